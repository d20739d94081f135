//! Finite-difference screened-Poisson and Poisson solvers on classified
//! grids, with Dirichlet data imposed on the true boundary circles through
//! sub-cell arm elimination.
//!
//! The 5-point operator keeps its symmetric positive-definite structure:
//! eliminating a boundary arm with crossing fraction θ only raises the
//! diagonal by 1/(θh²) and feeds g/(θh²) to the right-hand side. A plain
//! Jacobi-preconditioned conjugate gradient solver is then sufficient for
//! every grid this suite runs at.

use crate::domain::{ArmKind, ClassifiedGrid, DomainError, NodeLabel, PerforatedDomain};
use crate::field::{region_contains, Region, ScalarField};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EllipticError {
    #[error("conjugate gradient did not converge: {iterations} iterations, relative residual {residual:.3e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Symmetric positive-definite system over the interior unknowns of a grid,
/// with the Dirichlet lift folded into the right-hand side.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub grid: Arc<ClassifiedGrid>,
    row_ptr: Vec<u32>,
    col_idx: Vec<u32>,
    vals: Vec<f64>,
    pub rhs: Vec<f64>,
    diag: Vec<f64>,
    /// Imposed values at carrier nodes, for field reconstruction.
    boundary_values: Vec<f64>,
    /// Constant continuation inside each hole.
    hole_fill: Vec<f64>,
}

impl LinearSystem {
    pub fn n_unknowns(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k as usize] * x[self.col_idx[k as usize] as usize];
            }
            *yr = s;
        }
    }
}

/// Assembles −Δu + c·u = f with Dirichlet data: `outer_bc` evaluated at the
/// carrier-node positions (no interpolation along the boundary) and the
/// constant `hole_bc[j]` on hole j. The same per-arm values feed the flux
/// quadrature, which keeps the discrete flux identity exact.
pub fn assemble(
    grid: &Arc<ClassifiedGrid>,
    c: f64,
    f: Option<&ScalarField>,
    outer_bc: &dyn Fn([f64; 2]) -> f64,
    hole_bc: &[f64],
) -> LinearSystem {
    let n = grid.n_unknowns();
    let inv_h2 = 1.0 / (grid.h * grid.h);
    let mut diag = vec![c; n];
    let mut rhs = vec![0.0; n];
    if let Some(src) = f {
        for (k, &flat) in grid.interior.iter().enumerate() {
            rhs[k] = src.values[flat];
        }
    }

    // neighbor couplings
    let mut entries: Vec<Vec<(u32, f64)>> = vec![Vec::with_capacity(4); n];
    for (k, &flat) in grid.interior.iter().enumerate() {
        let (ix, iy) = grid.node_coords(flat);
        for (jx, jy) in [(ix + 1, iy), (ix - 1, iy), (ix, iy + 1), (ix, iy - 1)] {
            let nb = grid.node_index(jx, jy);
            let u = grid.unknown[nb];
            if u != crate::domain::NO_UNKNOWN {
                entries[k].push((u, -inv_h2));
                diag[k] += inv_h2;
            }
        }
    }
    for arm in &grid.arms {
        let k = arm.unknown as usize;
        diag[k] += inv_h2 / arm.theta;
        let g = match arm.kind {
            ArmKind::Outer => outer_bc(grid.position(arm.carrier)),
            ArmKind::Hole(j) => hole_bc[j as usize],
        };
        rhs[k] += g * inv_h2 / arm.theta;
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0u32);
    for (k, row) in entries.iter().enumerate() {
        col_idx.push(k as u32);
        vals.push(diag[k]);
        for &(c_, v) in row {
            col_idx.push(c_);
            vals.push(v);
        }
        row_ptr.push(col_idx.len() as u32);
    }

    let mut boundary_values = vec![0.0; grid.n_nodes()];
    for (flat, lab) in grid.labels.iter().enumerate() {
        match lab {
            NodeLabel::DirichletOuter => boundary_values[flat] = outer_bc(grid.position(flat)),
            NodeLabel::DirichletHole(j) => boundary_values[flat] = hole_bc[*j as usize],
            _ => {}
        }
    }

    LinearSystem {
        grid: grid.clone(),
        row_ptr,
        col_idx,
        vals,
        rhs,
        diag,
        boundary_values,
        hole_fill: hole_bc.to_vec(),
    }
}

/// Screened problem −Δu + u = f.
pub fn assemble_screened(
    grid: &Arc<ClassifiedGrid>,
    f: Option<&ScalarField>,
    outer_bc: &dyn Fn([f64; 2]) -> f64,
    hole_bc: &[f64],
) -> LinearSystem {
    assemble(grid, 1.0, f, outer_bc, hole_bc)
}

/// Pure Poisson problem −Δu = f.
pub fn assemble_poisson(
    grid: &Arc<ClassifiedGrid>,
    f: Option<&ScalarField>,
    outer_bc: &dyn Fn([f64; 2]) -> f64,
    hole_bc: &[f64],
) -> LinearSystem {
    assemble(grid, 0.0, f, outer_bc, hole_bc)
}

#[derive(Debug, Clone, Copy)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients down to a relative residual.
pub fn solve_cg(
    system: &LinearSystem,
    tol: f64,
    max_iter: usize,
) -> Result<(ScalarField, CgStats), EllipticError> {
    let n = system.n_unknowns();
    let b = &system.rhs;
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    let mut stats = CgStats {
        iterations: 0,
        relative_residual: 0.0,
    };
    if b_norm > 0.0 {
        let mut r = b.clone();
        let mut z: Vec<f64> = r.iter().zip(&system.diag).map(|(ri, d)| ri / d).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0; n];
        let mut converged = false;
        for it in 1..=max_iter {
            system.matvec(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            stats.iterations = it;
            stats.relative_residual = r_norm / b_norm;
            if stats.relative_residual <= tol {
                converged = true;
                break;
            }
            for i in 0..n {
                z[i] = r[i] / system.diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        if !converged {
            return Err(EllipticError::NoConvergence {
                iterations: stats.iterations,
                residual: stats.relative_residual,
            });
        }
    }

    let grid = &system.grid;
    let mut field = ScalarField::zeros(grid.clone());
    for (k, &flat) in grid.interior.iter().enumerate() {
        field.values[flat] = x[k];
    }
    for (flat, lab) in grid.labels.iter().enumerate() {
        match lab {
            NodeLabel::DirichletOuter | NodeLabel::DirichletHole(_) => {
                field.values[flat] = system.boundary_values[flat];
            }
            NodeLabel::HoleInterior(j) => {
                field.values[flat] = system.hole_fill[*j as usize];
            }
            _ => {}
        }
    }
    Ok((field, stats))
}

pub const DEFAULT_CG_TOL: f64 = 1e-11;
pub const DEFAULT_CG_MAX_ITER: usize = 200_000;

/// Screening profile ξ₀ of the unperforated outer region: −Δξ₀ + ξ₀ = 0 in
/// Ω, ξ₀ = 1 on ∂Ω. The holes are ignored; the returned field lives on a
/// hole-free grid with the same origin and spacing.
pub fn solve_xi0(
    domain: &PerforatedDomain,
    grid: &ClassifiedGrid,
) -> Result<ScalarField, EllipticError> {
    let bare = domain.without_holes();
    let grid0 = Arc::new(crate::domain::build_grid(&bare, grid.h)?);
    let sys = assemble_screened(&grid0, None, &|_| 1.0, &[]);
    let (field, _) = solve_cg(&sys, DEFAULT_CG_TOL, DEFAULT_CG_MAX_ITER)?;
    Ok(field)
}

/// Basis field ζᵢ: screened-harmonic in Ω_δ, 1 on hole i, 0 on the other
/// holes and on ∂Ω.
pub fn solve_basis_zeta(
    domain: &PerforatedDomain,
    grid: &Arc<ClassifiedGrid>,
    hole: usize,
) -> Result<ScalarField, EllipticError> {
    let mut bc = vec![0.0; domain.n_holes()];
    bc[hole] = 1.0;
    let sys = assemble_screened(grid, None, &|_| 0.0, &bc);
    let (field, _) = solve_cg(&sys, DEFAULT_CG_TOL, DEFAULT_CG_MAX_ITER)?;
    Ok(field)
}

/// Discrete −∮_{∂ωⱼ} ∂u/∂ν ds with ν pointing out of the hole, evaluated as
/// the sum of sub-cell one-sided differences over the arms that cross hole
/// j's circle. Positive for fields that decay away from the hole.
pub fn boundary_flux(field: &ScalarField, hole: usize) -> f64 {
    let grid = &field.grid;
    let mut s = 0.0;
    for arm in &grid.arms {
        if arm.kind == ArmKind::Hole(hole as u32) {
            s += (field.values[arm.carrier] - field.values[arm.node]) / arm.theta;
        }
    }
    s
}

/// Companion flux across the outer boundary, same inward-of-domain sign
/// convention (positive when the field decays toward the boundary).
pub fn outer_flux(field: &ScalarField) -> f64 {
    let grid = &field.grid;
    let mut s = 0.0;
    for arm in &grid.arms {
        if arm.kind == ArmKind::Outer {
            s += (field.values[arm.carrier] - field.values[arm.node]) / arm.theta;
        }
    }
    s
}

fn gradient_at(f: &ScalarField, flat: usize, region: Region) -> [f64; 2] {
    let g = &f.grid;
    let (ix, iy) = g.node_coords(flat);
    let h = g.h;
    let ok = |jx: usize, jy: usize| -> bool {
        jx < g.nx && jy < g.ny && region_contains(g.labels[g.node_index(jx, jy)], region)
    };
    let v = |jx: usize, jy: usize| f.values[g.node_index(jx, jy)];
    let gx = if ix > 0 && ok(ix - 1, iy) && ok(ix + 1, iy) {
        (v(ix + 1, iy) - v(ix - 1, iy)) / (2.0 * h)
    } else if ok(ix + 1, iy) {
        (v(ix + 1, iy) - v(ix, iy)) / h
    } else if ix > 0 && ok(ix - 1, iy) {
        (v(ix, iy) - v(ix - 1, iy)) / h
    } else {
        0.0
    };
    let gy = if iy > 0 && ok(ix, iy - 1) && ok(ix, iy + 1) {
        (v(ix, iy + 1) - v(ix, iy - 1)) / (2.0 * h)
    } else if ok(ix, iy + 1) {
        (v(ix, iy + 1) - v(ix, iy)) / h
    } else if iy > 0 && ok(ix, iy - 1) {
        (v(ix, iy) - v(ix, iy - 1)) / h
    } else {
        0.0
    };
    [gx, gy]
}

/// L² inner product by midpoint quadrature with h² weights over a region.
pub fn l2_inner(
    a: &ScalarField,
    b: &ScalarField,
    region: Region,
) -> Result<f64, EllipticError> {
    if !a.same_grid(b) {
        return Err(EllipticError::GridMismatch);
    }
    let g = &a.grid;
    let w = g.h * g.h;
    let mut s = 0.0;
    for flat in 0..g.n_nodes() {
        if region_contains(g.labels[flat], region) {
            s += a.values[flat] * b.values[flat];
        }
    }
    Ok(s * w)
}

/// H¹ inner product ∫(∇a·∇b + ab): centered differences where both axis
/// neighbors lie in the region, one-sided at region boundaries.
pub fn h1_inner(
    a: &ScalarField,
    b: &ScalarField,
    region: Region,
) -> Result<f64, EllipticError> {
    if !a.same_grid(b) {
        return Err(EllipticError::GridMismatch);
    }
    let g = &a.grid;
    let w = g.h * g.h;
    let mut s = 0.0;
    for flat in 0..g.n_nodes() {
        if region_contains(g.labels[flat], region) {
            let ga = gradient_at(a, flat, region);
            let gb = gradient_at(b, flat, region);
            s += ga[0] * gb[0] + ga[1] * gb[1] + a.values[flat] * b.values[flat];
        }
    }
    Ok(s * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::{bessel_i0, bessel_k0};
    use crate::domain::{build_grid, PerforatedDomain};

    fn unit_disk_grid(holes: Vec<[f64; 2]>, delta: f64, h: f64) -> Arc<ClassifiedGrid> {
        let dom = PerforatedDomain::disk([0.0, 0.0], 1.0, holes, delta);
        Arc::new(build_grid(&dom, h).unwrap())
    }

    #[test]
    fn constant_source_constant_bc_gives_constant_solution() {
        let grid = unit_disk_grid(vec![], 0.05, 0.05);
        let one = ScalarField::constant(grid.clone(), 1.0);
        let sys = assemble_screened(&grid, Some(&one), &|_| 1.0, &[]);
        let (u, _) = solve_cg(&sys, 1e-12, 10_000).unwrap();
        for &flat in &grid.interior {
            assert!((u.values[flat] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn tiny_system_matches_direct_elimination() {
        // 3-unknown strip: rectangle sized to leave one interior row of 3 nodes
        let dom = PerforatedDomain::rectangle([0.0, 0.0], [0.4, 0.2], vec![], 0.05);
        let grid = Arc::new(build_grid(&dom, 0.1).unwrap());
        assert_eq!(grid.n_unknowns(), 3);
        let f = ScalarField::from_fn(grid.clone(), |p| 1.0 + p[0]);
        let sys = assemble_screened(&grid, Some(&f), &|p| p[0] - p[1], &[]);
        let (u, _) = solve_cg(&sys, 1e-14, 1000).unwrap();
        // dense solve of the same 3x3 system
        let n = 3;
        let mut a = vec![vec![0.0; n]; n];
        let mut x = sys.rhs.clone();
        for r in 0..n {
            for k in sys.row_ptr[r]..sys.row_ptr[r + 1] {
                a[r][sys.col_idx[k as usize] as usize] = sys.vals[k as usize];
            }
        }
        for col in 0..n {
            let piv = a[col][col];
            for r in (col + 1)..n {
                let m = a[r][col] / piv;
                for c2 in col..n {
                    a[r][c2] -= m * a[col][c2];
                }
                x[r] -= m * x[col];
            }
        }
        for r in (0..n).rev() {
            for c2 in (r + 1)..n {
                let xc = x[c2];
                x[r] -= a[r][c2] * xc;
            }
            x[r] /= a[r][r];
        }
        for (k, &flat) in grid.interior.iter().enumerate() {
            assert!((u.values[flat] - x[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn exhausted_iterations_reported() {
        let grid = unit_disk_grid(vec![], 0.05, 0.02);
        let sys = assemble_screened(&grid, None, &|_| 1.0, &[]);
        let err = solve_cg(&sys, 1e-12, 1).unwrap_err();
        assert!(matches!(err, EllipticError::NoConvergence { .. }));
    }

    #[test]
    fn xi0_on_unit_disk_matches_bessel_profile() {
        let dom = PerforatedDomain::disk([0.0, 0.0], 1.0, vec![[0.0, 0.0]], 0.08);
        let grid = build_grid(&dom, 0.02).unwrap();
        let xi0 = solve_xi0(&dom, &grid).unwrap();
        let at = |p: [f64; 2]| xi0.bilinear(p);
        let center = at([0.0, 0.0]);
        let exact0 = 1.0 / bessel_i0(1.0);
        assert!((center - exact0).abs() < 5e-4, "{center} vs {exact0}");
        let mid = at([0.5, 0.0]);
        let exact_mid = bessel_i0(0.5) / bessel_i0(1.0);
        assert!((mid - exact_mid).abs() < 1e-3, "{mid} vs {exact_mid}");
        // maximum principle: strictly below 1 inside
        for &flat in &xi0.grid.interior {
            let v = xi0.values[flat];
            assert!(v > 0.0 && v < 1.0);
        }
    }

    #[test]
    fn zeta_respects_maximum_principle_and_other_rings() {
        let delta = 0.05;
        let grid = unit_disk_grid(vec![[-0.4, 0.0], [0.4, 0.0]], delta, delta / 4.0);
        let dom = PerforatedDomain::disk(
            [0.0, 0.0],
            1.0,
            vec![[-0.4, 0.0], [0.4, 0.0]],
            delta,
        );
        let z0 = solve_basis_zeta(&dom, &grid, 0).unwrap();
        for flat in 0..grid.n_nodes() {
            if grid.labels[flat] != NodeLabel::Exterior {
                assert!(z0.values[flat] >= -1e-12 && z0.values[flat] <= 1.0 + 1e-12);
            }
        }
        for &flat in &grid.hole_rings[1] {
            assert_eq!(z0.values[flat], 0.0);
        }
        for &flat in &grid.hole_rings[0] {
            assert_eq!(z0.values[flat], 1.0);
        }
    }

    #[test]
    fn constant_field_has_zero_flux() {
        let grid = unit_disk_grid(vec![[0.0, 0.0]], 0.05, 0.0125);
        let c = ScalarField::constant(grid.clone(), 3.7);
        assert!(boundary_flux(&c, 0).abs() < 1e-10);
    }

    #[test]
    fn flux_identity_ties_holes_outer_and_volume() {
        // for -Δu + u = f: Σ_j flux_j + outer_flux = ∫(u - f)
        let delta = 0.05;
        let dom =
            PerforatedDomain::disk([0.0, 0.0], 1.0, vec![[-0.3, 0.1], [0.35, -0.05]], delta);
        let grid = Arc::new(build_grid(&dom, delta / 4.0).unwrap());
        let f = ScalarField::from_fn(grid.clone(), |p| (3.0 * p[0]).cos() * (2.0 * p[1]).sin());
        let sys = assemble_screened(&grid, Some(&f), &|p| 0.5 + 0.1 * p[0], &[1.0, -0.5]);
        let (u, _) = solve_cg(&sys, 1e-12, 100_000).unwrap();
        let mut lhs = outer_flux(&u);
        for j in 0..2 {
            lhs += boundary_flux(&u, j);
        }
        let mut vol = 0.0;
        for (k, &flat) in grid.interior.iter().enumerate() {
            let _ = k;
            vol += (u.values[flat] - f.values[flat]) * grid.h * grid.h;
        }
        assert!(
            (lhs - vol).abs() < 1e-6 * (1.0 + vol.abs()),
            "flux {lhs} vs volume {vol}"
        );
    }

    #[test]
    fn inner_products_symmetric_and_area_consistent() {
        let grid = unit_disk_grid(vec![], 0.05, 0.02);
        let one = ScalarField::constant(grid.clone(), 1.0);
        let area = l2_inner(&one, &one, Region::Omega).unwrap();
        assert!((area - std::f64::consts::PI).abs() < 0.05 * std::f64::consts::PI);
        let f = ScalarField::from_fn(grid.clone(), |p| p[0] * p[1] + 0.3);
        let g = ScalarField::from_fn(grid.clone(), |p| (p[0] - p[1]).cos());
        let ab = h1_inner(&f, &g, Region::OmegaDelta).unwrap();
        let ba = h1_inner(&g, &f, Region::OmegaDelta).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn grid_mismatch_detected() {
        let g1 = unit_disk_grid(vec![], 0.05, 0.1);
        let g2 = unit_disk_grid(vec![], 0.05, 0.2);
        let a = ScalarField::constant(g1, 1.0);
        let b = ScalarField::constant(g2, 1.0);
        assert!(matches!(
            l2_inner(&a, &b, Region::Omega),
            Err(EllipticError::GridMismatch)
        ));
    }

    #[test]
    fn discrete_maximum_principle_for_harmonic_solutions() {
        let delta = 0.06;
        let dom = PerforatedDomain::disk([0.0, 0.0], 1.0, vec![[0.2, -0.1]], delta);
        let grid = Arc::new(build_grid(&dom, delta / 4.0).unwrap());
        let sys = assemble_screened(&grid, None, &|p| 0.3 + 0.2 * p[1], &[0.8]);
        let (u, _) = solve_cg(&sys, 1e-12, 100_000).unwrap();
        // screened operator pulls toward zero, so the bound includes 0
        let lo = 0.0_f64.min(0.1); // min of boundary data: outer ranges [0.1, 0.5], hole 0.8
        let hi = 0.8_f64;
        for &flat in &grid.interior {
            assert!(u.values[flat] >= lo - 1e-9 && u.values[flat] <= hi + 1e-9);
        }
    }

    #[test]
    fn zeta_flux_against_radial_oracle() {
        // single central hole: flux of ζ1 matches the 1-D profile's derivative
        let delta = 0.05;
        let dom = PerforatedDomain::disk([0.0, 0.0], 1.0, vec![[0.0, 0.0]], delta);
        let grid = Arc::new(build_grid(&dom, delta / 4.0).unwrap());
        let z = solve_basis_zeta(&dom, &grid, 0).unwrap();
        let flux = boundary_flux(&z, 0);
        let prof = crate::radial::solve_radial(
            delta,
            1.0,
            crate::radial::RadialEquation::Screened,
            (crate::radial::RadialBc::Dirichlet(1.0), 0.0),
            |_| 0.0,
            20_000,
        )
        .unwrap();
        let oracle = -2.0 * std::f64::consts::PI * delta * prof.inner_derivative();
        assert!(
            (flux - oracle).abs() < 0.05 * oracle.abs(),
            "flux {flux} vs oracle {oracle}"
        );
        // leading scale ~ 2π/|log δ|
        let scale = 2.0 * std::f64::consts::PI / delta.ln().abs();
        assert!(flux > 0.5 * scale && flux < 2.0 * scale);
        let _ = bessel_k0(delta).unwrap();
    }
}
