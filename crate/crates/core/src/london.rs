//! London-limit (S¹-valued) solver: the flux-constrained induced-field
//! problem for prescribed hole degrees, its exactly quadratic energy in the
//! degree vector, integer minimization, the closed-form degree prediction,
//! the threshold set, and reconstruction of the S¹ minimizer pair.
//!
//! The induced field for degrees D is assembled by superposition,
//! h = h_ext·ψ₀ + Σⱼ Hⱼ ζⱼ, where ψ₀ responds to a unit external field and
//! ζⱼ is the j-th hole basis field. The constants Hⱼ solve the N×N linear
//! system expressing the flux constraints
//!     −∮_{∂ωⱼ} ∂h/∂ν ds = 2πDʲ − Hⱼ|ωⱼ|,
//! evaluated in the same discrete flux metric the operator satisfies, so the
//! constrained solve is exact. Both the equation data and the energy are
//! affine/quadratic in (h_ext, H), which makes l_δ(D) an exactly quadratic
//! polynomial of the integer degrees.

use crate::bessel::bessel_k0;
use crate::domain::{ClassifiedGrid, DomainError, NodeLabel, PerforatedDomain};
use crate::elliptic::{
    assemble_screened, boundary_flux, solve_cg, EllipticError, DEFAULT_CG_MAX_ITER,
    DEFAULT_CG_TOL,
};
use crate::field::{EdgeField, Region, ScalarField};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

/// Prospective hole-vortex degrees, one integer per hole.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeVector(pub Vec<i64>);

impl DegreeVector {
    pub fn zeros(n: usize) -> Self {
        DegreeVector(vec![0; n])
    }

    pub fn unit(n: usize, j: usize, value: i64) -> Self {
        let mut d = vec![0; n];
        d[j] = value;
        DegreeVector(d)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::fmt::Display for DegreeVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LondonError {
    #[error("flux constraint system is numerically singular (condition estimate {0:.3e})")]
    SingularFluxSystem(f64),
    #[error("integer argmin lies on the search box surface; enlarge box_radius")]
    BoxTooSmall,
    #[error("sigma puts hole {0} exactly at a threshold (half-integer target)")]
    AtThreshold(usize),
    #[error("circulation around hole {hole} is {value:.4} turns, too far from an integer")]
    NonIntegerCirculation { hole: usize, value: f64 },
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// External field magnitude h_ext = σ|log δ|.
pub fn external_field(sigma: f64, delta: f64) -> f64 {
    sigma * delta.ln().abs()
}

/// Induced magnetic field of the S¹ problem at prescribed degrees.
#[derive(Debug, Clone)]
pub struct LondonSolution {
    pub h: ScalarField,
    /// Constant field value Hⱼ inside each hole.
    pub h_constants: Vec<f64>,
    pub degrees: DegreeVector,
    pub h_ext: f64,
    pub delta: f64,
}

/// Energy split of the London functional.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub gradient_term: f64,
    pub field_term: f64,
    pub total: f64,
}

/// l_δ(D) = ½ DᵀQD + bᵀD + c in grid-exact arithmetic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadraticEnergyForm {
    pub q: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: f64,
}

impl QuadraticEnergyForm {
    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn evaluate(&self, d: &DegreeVector) -> f64 {
        let n = self.n();
        let mut s = self.c;
        for i in 0..n {
            let di = d.0[i] as f64;
            s += self.b[i] * di;
            for j in 0..n {
                s += 0.5 * self.q[i][j] * di * d.0[j] as f64;
            }
        }
        s
    }

    /// Real vertex −Q⁻¹b of the paraboloid.
    pub fn vertex(&self) -> Result<Vec<f64>, LondonError> {
        let neg_b: Vec<f64> = self.b.iter().map(|v| -v).collect();
        solve_dense(&self.q, &neg_b).ok_or(LondonError::SingularFluxSystem(f64::INFINITY))
    }
}

/// Dense solve with partial pivoting; None on a vanishing pivot.
fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut x = b.to_vec();
    for col in 0..n {
        let (piv, &pval) = m
            .iter()
            .enumerate()
            .skip(col)
            .map(|(r, row)| (r, &row[col]))
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())?;
        if pval.abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        x.swap(col, piv);
        for r in (col + 1)..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
            x[r] -= f * x[col];
        }
    }
    for r in (0..n).rev() {
        for c in (r + 1)..n {
            let xc = x[c];
            x[r] -= m[r][c] * xc;
        }
        x[r] /= m[r][r];
    }
    Some(x)
}

fn inverse_dense(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        inv.push(solve_dense(a, &e)?);
    }
    // solve_dense produced columns; transpose into rows
    let mut out = vec![vec![0.0; n]; n];
    for (j, col) in inv.iter().enumerate() {
        for i in 0..n {
            out[i][j] = col[i];
        }
    }
    Some(out)
}

fn norm1(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    (0..n)
        .map(|j| a.iter().map(|row| row[j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Discrete Dirichlet-energy pairing ∫ ∇f·∇g over Ω_δ: interior edge
/// differences plus sub-cell boundary arms. This is the quadrature the
/// London energy uses, consistent with the assembled operator.
pub fn dirichlet_pairing(f: &ScalarField, g: &ScalarField) -> f64 {
    let grid = &f.grid;
    let mut s = 0.0;
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let p = grid.node_index(ix, iy);
            if grid.labels[p] != NodeLabel::Interior {
                continue;
            }
            if ix + 1 < grid.nx {
                let q = grid.node_index(ix + 1, iy);
                if grid.labels[q] == NodeLabel::Interior {
                    s += (f.values[q] - f.values[p]) * (g.values[q] - g.values[p]);
                }
            }
            if iy + 1 < grid.ny {
                let q = grid.node_index(ix, iy + 1);
                if grid.labels[q] == NodeLabel::Interior {
                    s += (f.values[q] - f.values[p]) * (g.values[q] - g.values[p]);
                }
            }
        }
    }
    for arm in &grid.arms {
        s += (f.values[arm.carrier] - f.values[arm.node])
            * (g.values[arm.carrier] - g.values[arm.node])
            / arm.theta;
    }
    s
}

fn omega_l2_pairing(f: &ScalarField, g: &ScalarField) -> f64 {
    let grid = &f.grid;
    let w = grid.h * grid.h;
    let mut s = 0.0;
    for flat in 0..grid.n_nodes() {
        if crate::field::region_contains(grid.labels[flat], Region::Omega) {
            s += f.values[flat] * g.values[flat];
        }
    }
    s * w
}

/// Reusable London solver: basis fields, flux matrix, and Gram data are
/// computed once per (domain, grid, h_ext); every degree vector after that
/// costs an N×N solve plus O(N²) algebra.
pub struct LondonSystem {
    pub domain: PerforatedDomain,
    pub grid: Arc<ClassifiedGrid>,
    pub h_ext: f64,
    /// Unit external-field response: outer BC 1, all hole BCs 0.
    pub psi0: ScalarField,
    pub zetas: Vec<ScalarField>,
    /// Analytic hole area πδ² used in the flux constraints.
    pub hole_area: f64,
    /// flux_matrix[i][j] = flux_i(ζⱼ) + δᵢⱼ|ω|
    flux_matrix: Vec<Vec<f64>>,
    flux_matrix_cond: f64,
    flux_psi0: Vec<f64>,
    // Gram blocks over the basis (ψ₀, ζ₁..ζ_N)
    gram_dirichlet: Vec<Vec<f64>>,
    gram_l2: Vec<Vec<f64>>,
    gram_mean: Vec<f64>,
    omega_area: f64,
}

impl LondonSystem {
    pub fn new(
        domain: &PerforatedDomain,
        grid: &Arc<ClassifiedGrid>,
        h_ext: f64,
    ) -> Result<Self, LondonError> {
        domain.validate()?;
        let n = domain.n_holes();
        let zero_bc = vec![0.0; n];
        let sys = assemble_screened(grid, None, &|_| 1.0, &zero_bc);
        let (psi0, _) = solve_cg(&sys, DEFAULT_CG_TOL, DEFAULT_CG_MAX_ITER)?;
        let mut zetas = Vec::with_capacity(n);
        for j in 0..n {
            zetas.push(crate::elliptic::solve_basis_zeta(domain, grid, j)?);
        }
        let hole_area = std::f64::consts::PI * domain.hole_radius * domain.hole_radius;

        let mut flux_matrix = vec![vec![0.0; n]; n];
        let mut flux_psi0 = vec![0.0; n];
        for i in 0..n {
            flux_psi0[i] = boundary_flux(&psi0, i);
            for (j, z) in zetas.iter().enumerate() {
                flux_matrix[i][j] = boundary_flux(z, i);
                if i == j {
                    flux_matrix[i][j] += hole_area;
                }
            }
        }
        let flux_matrix_cond = match inverse_dense(&flux_matrix) {
            Some(inv) => norm1(&flux_matrix) * norm1(&inv),
            None => f64::INFINITY,
        };
        if flux_matrix_cond > 1e12 {
            return Err(LondonError::SingularFluxSystem(flux_matrix_cond));
        }

        let m = n + 1;
        let basis: Vec<&ScalarField> = std::iter::once(&psi0).chain(zetas.iter()).collect();
        let mut gram_dirichlet = vec![vec![0.0; m]; m];
        let mut gram_l2 = vec![vec![0.0; m]; m];
        let mut gram_mean = vec![0.0; m];
        let one = ScalarField::constant(grid.clone(), 1.0);
        for a in 0..m {
            gram_mean[a] = omega_l2_pairing(basis[a], &one);
            for b in a..m {
                let d = dirichlet_pairing(basis[a], basis[b]);
                let f = omega_l2_pairing(basis[a], basis[b]);
                gram_dirichlet[a][b] = d;
                gram_dirichlet[b][a] = d;
                gram_l2[a][b] = f;
                gram_l2[b][a] = f;
            }
        }
        let omega_area = omega_l2_pairing(&one, &one);

        Ok(LondonSystem {
            domain: domain.clone(),
            grid: grid.clone(),
            h_ext,
            psi0,
            zetas,
            hole_area,
            flux_matrix,
            flux_matrix_cond,
            flux_psi0,
            gram_dirichlet,
            gram_l2,
            gram_mean,
            omega_area,
        })
    }

    pub fn n_holes(&self) -> usize {
        self.zetas.len()
    }

    pub fn flux_condition(&self) -> f64 {
        self.flux_matrix_cond
    }

    /// Hole constants Hⱼ for a degree vector.
    pub fn hole_constants(&self, d: &DegreeVector) -> Result<Vec<f64>, LondonError> {
        let n = self.n_holes();
        assert_eq!(d.len(), n, "degree vector length != hole count");
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                2.0 * std::f64::consts::PI * d.0[i] as f64 - self.h_ext * self.flux_psi0[i]
            })
            .collect();
        solve_dense(&self.flux_matrix, &rhs)
            .ok_or(LondonError::SingularFluxSystem(self.flux_matrix_cond))
    }

    /// Full induced field for a degree vector.
    pub fn solve(&self, d: &DegreeVector) -> Result<LondonSolution, LondonError> {
        let constants = self.hole_constants(d)?;
        let mut h = ScalarField::zeros(self.grid.clone());
        for flat in 0..self.grid.n_nodes() {
            let mut v = self.h_ext * self.psi0.values[flat];
            for (j, z) in self.zetas.iter().enumerate() {
                v += constants[j] * z.values[flat];
            }
            h.values[flat] = v;
        }
        Ok(LondonSolution {
            h,
            h_constants: constants,
            degrees: d.clone(),
            h_ext: self.h_ext,
            delta: self.domain.hole_radius,
        })
    }

    /// Energy from the cached Gram blocks, identical arithmetic to the
    /// direct quadrature up to floating-point reassociation.
    fn energy_of_constants(&self, constants: &[f64]) -> EnergyBreakdown {
        let n = self.n_holes();
        let mut coeff = Vec::with_capacity(n + 1);
        coeff.push(self.h_ext);
        coeff.extend_from_slice(constants);
        let mut grad = 0.0;
        let mut l2 = 0.0;
        let mut mean = 0.0;
        for a in 0..=n {
            mean += coeff[a] * self.gram_mean[a];
            for b in 0..=n {
                grad += coeff[a] * coeff[b] * self.gram_dirichlet[a][b];
                l2 += coeff[a] * coeff[b] * self.gram_l2[a][b];
            }
        }
        let field =
            0.5 * (l2 - 2.0 * self.h_ext * mean + self.h_ext * self.h_ext * self.omega_area);
        EnergyBreakdown {
            gradient_term: 0.5 * grad,
            field_term: field,
            total: 0.5 * grad + field,
        }
    }

    /// l_δ(D) through the cached basis.
    pub fn energy_at(&self, d: &DegreeVector) -> Result<f64, LondonError> {
        Ok(self.energy_of_constants(&self.hole_constants(d)?).total)
    }

    /// Assembles Q, b, c from evaluations of l_δ at 0, eᵢ, 2eᵢ and eᵢ+eⱼ.
    pub fn quadratic_form(&self) -> Result<QuadraticEnergyForm, LondonError> {
        let n = self.n_holes();
        let c = self.energy_at(&DegreeVector::zeros(n))?;
        let mut le = vec![0.0; n];
        let mut q = vec![vec![0.0; n]; n];
        for i in 0..n {
            le[i] = self.energy_at(&DegreeVector::unit(n, i, 1))?;
            let l2e = self.energy_at(&DegreeVector::unit(n, i, 2))?;
            q[i][i] = l2e - 2.0 * le[i] + c;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let mut d = DegreeVector::zeros(n);
                d.0[i] = 1;
                d.0[j] = 1;
                let lij = self.energy_at(&d)?;
                let qij = lij - le[i] - le[j] + c;
                q[i][j] = qij;
                q[j][i] = qij;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| le[i] - c - 0.5 * q[i][i]).collect();
        Ok(QuadraticEnergyForm { q, b, c })
    }
}

/// One-shot solve of the flux-constrained London problem.
pub fn solve_london(
    domain: &PerforatedDomain,
    grid: &Arc<ClassifiedGrid>,
    h_ext: f64,
    d: &DegreeVector,
) -> Result<LondonSolution, LondonError> {
    LondonSystem::new(domain, grid, h_ext)?.solve(d)
}

/// Direct quadrature of the London energy of a solution: edge/arm Dirichlet
/// energy over Ω_δ plus the nodal field term over Ω (holes at Hⱼ).
pub fn london_energy(sol: &LondonSolution) -> EnergyBreakdown {
    let grad = dirichlet_pairing(&sol.h, &sol.h);
    let grid = &sol.h.grid;
    let w = grid.h * grid.h;
    let mut field = 0.0;
    for flat in 0..grid.n_nodes() {
        if crate::field::region_contains(grid.labels[flat], Region::Omega) {
            let dv = sol.h.values[flat] - sol.h_ext;
            field += dv * dv;
        }
    }
    EnergyBreakdown {
        gradient_term: 0.5 * grad,
        field_term: 0.5 * field * w,
        total: 0.5 * grad + 0.5 * field * w,
    }
}

/// One-shot assembly of the quadratic form.
pub fn energy_quadratic_form(
    domain: &PerforatedDomain,
    grid: &Arc<ClassifiedGrid>,
    h_ext: f64,
) -> Result<QuadraticEnergyForm, LondonError> {
    LondonSystem::new(domain, grid, h_ext)?.quadratic_form()
}

/// Result of the integer minimization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegreeMinimum {
    pub degrees: DegreeVector,
    pub energy: f64,
    pub is_unique: bool,
}

pub const DEFAULT_BOX_RADIUS: i64 = 2;
const UNIQUENESS_REL_TOL: f64 = 1e-6;

/// Exhaustive integer search over the box of the given radius centered at
/// the rounded real vertex.
pub fn minimize_degrees(
    form: &QuadraticEnergyForm,
    box_radius: i64,
) -> Result<DegreeMinimum, LondonError> {
    let n = form.n();
    let vertex = form.vertex()?;
    let center: Vec<i64> = vertex.iter().map(|v| v.round() as i64).collect();
    let width = 2 * box_radius + 1;
    let total = (width as u128).pow(n as u32);
    let mut best: Option<(f64, Vec<i64>)> = None;
    let mut second_best = f64::INFINITY;
    let mut counter = vec![0i64; n];
    for _ in 0..total {
        let d = DegreeVector(
            counter
                .iter()
                .zip(&center)
                .map(|(off, c)| c + off - box_radius)
                .collect(),
        );
        let e = form.evaluate(&d);
        match &mut best {
            Some((be, bd)) => {
                if e < *be {
                    second_best = *be;
                    *be = e;
                    *bd = d.0;
                } else if e < second_best {
                    second_best = e;
                }
            }
            None => best = Some((e, d.0)),
        }
        // odometer
        for slot in counter.iter_mut() {
            *slot += 1;
            if *slot < width {
                break;
            }
            *slot = 0;
        }
    }
    let (energy, degrees) = best.expect("box enumeration is never empty");
    for (d, c) in degrees.iter().zip(&center) {
        if (d - c).abs() >= box_radius {
            return Err(LondonError::BoxTooSmall);
        }
    }
    let scale = energy.abs().max(f64::MIN_POSITIVE);
    let is_unique = (second_best - energy) >= UNIQUENESS_REL_TOL * scale;
    Ok(DegreeMinimum {
        degrees: DegreeVector(degrees),
        energy,
        is_unique,
    })
}

const THRESHOLD_TOL: f64 = 1e-9;

/// Per-hole nearest integer of σ(1 − ξ₀(aʲ)), with ξ₀ read by bilinear
/// interpolation at the hole center. Fails when any target sits within
/// 1e−9 of a half-integer.
pub fn predicted_degrees(
    xi0: &ScalarField,
    domain: &PerforatedDomain,
    sigma: f64,
) -> Result<DegreeVector, LondonError> {
    let mut d = Vec::with_capacity(domain.n_holes());
    for (j, a) in domain.holes.iter().enumerate() {
        let z = sigma * (1.0 - xi0.bilinear(*a));
        let frac = z - z.floor();
        if (frac - 0.5).abs() < THRESHOLD_TOL {
            return Err(LondonError::AtThreshold(j));
        }
        d.push(z.round() as i64);
    }
    Ok(DegreeVector(d))
}

/// All threshold field strengths σ = (k+½)/(1−ξ₀(aʲ)) up to σ_max,
/// ascending, each tagged with its hole index.
pub fn threshold_set(
    xi0: &ScalarField,
    domain: &PerforatedDomain,
    sigma_max: f64,
) -> Vec<(f64, usize)> {
    let mut out = Vec::new();
    for (j, a) in domain.holes.iter().enumerate() {
        let t = 1.0 - xi0.bilinear(*a);
        if t <= 0.0 {
            continue;
        }
        let mut k = 0u32;
        loop {
            let sigma = (k as f64 + 0.5) / t;
            if sigma > sigma_max {
                break;
            }
            out.push((sigma, j));
            k += 1;
        }
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    out
}

/// Quintic smoothstep, 0 at t ≤ 0, 1 at t ≥ 1.
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Truncated-Bessel vortex-field ansatz h₂ = Σⱼ Dʲ θⱼφⱼ: θ is K₀ truncated
/// at δ, φ a smooth cutoff supported inside the largest free radius.
pub fn h2_ansatz(
    domain: &PerforatedDomain,
    grid: &Arc<ClassifiedGrid>,
    d: &DegreeVector,
) -> ScalarField {
    let big_r = domain.largest_free_radius();
    let delta = domain.hole_radius;
    let k0_delta = bessel_k0(delta).expect("positive hole radius");
    let mut out = ScalarField::zeros(grid.clone());
    for flat in 0..grid.n_nodes() {
        if grid.labels[flat] == NodeLabel::Exterior {
            continue;
        }
        let p = grid.position(flat);
        let mut v = 0.0;
        for (j, a) in domain.holes.iter().enumerate() {
            if d.0[j] == 0 {
                continue;
            }
            let r = ((p[0] - a[0]).powi(2) + (p[1] - a[1]).powi(2)).sqrt();
            if r >= big_r / 2.0 {
                continue;
            }
            let theta = if r <= delta {
                k0_delta
            } else {
                bessel_k0(r).expect("r > 0")
            };
            let phi = 1.0 - smoothstep((r - big_r / 4.0) / (big_r / 4.0));
            v += d.0[j] as f64 * theta * phi;
        }
        out.values[flat] = v;
    }
    out
}

/// Reconstructed S¹ minimizer data: single-valued phase from a spanning-tree
/// integration, per-edge phase increments (which carry the multi-valued
/// jumps), the Coulomb-gauge vector potential on edges, and the measured
/// circulation around each hole in radians.
#[derive(Debug, Clone)]
pub struct S1Minimizer {
    pub phase: ScalarField,
    pub phase_steps: EdgeField,
    pub vector_potential: EdgeField,
    /// Edge line integrals of ∇⊥h, built from the same plaquette averages.
    pub grad_perp_h: EdgeField,
    pub circulations: Vec<f64>,
}

fn u_node(label: NodeLabel) -> bool {
    matches!(
        label,
        NodeLabel::Interior | NodeLabel::DirichletOuter | NodeLabel::DirichletHole(_)
    )
}

/// Average of the non-exterior corner values of each plaquette; lower-left
/// corner indexing.
fn plaquette_average(h: &ScalarField) -> Vec<f64> {
    let grid = &h.grid;
    let mut out = vec![0.0; grid.n_nodes()];
    for iy in 0..grid.ny - 1 {
        for ix in 0..grid.nx - 1 {
            let corners = [
                grid.node_index(ix, iy),
                grid.node_index(ix + 1, iy),
                grid.node_index(ix, iy + 1),
                grid.node_index(ix + 1, iy + 1),
            ];
            let mut s = 0.0;
            let mut cnt = 0usize;
            for c in corners {
                if grid.labels[c] != NodeLabel::Exterior {
                    s += h.values[c];
                    cnt += 1;
                }
            }
            if cnt > 0 {
                out[grid.node_index(ix, iy)] = s / cnt as f64;
            }
        }
    }
    out
}

/// Edge field whose value on each edge is the difference of a dual-node
/// (plaquette-centered) potential across that edge, left minus right with
/// respect to the edge direction. Divergence-free by construction.
fn dual_difference_field(grid: &Arc<ClassifiedGrid>, chi: &[f64]) -> EdgeField {
    let mut e = EdgeField::zeros(grid.clone());
    let nx = grid.nx;
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let flat = iy * nx + ix;
            // x-edge (ix,iy)->(ix+1,iy): left plaquette (ix,iy), right (ix,iy-1)
            if ix + 1 < grid.nx {
                let left = if iy < grid.ny - 1 { chi[flat] } else { 0.0 };
                let right = if iy > 0 { chi[flat - nx] } else { 0.0 };
                e.ax[flat] = left - right;
            }
            // y-edge (ix,iy)->(ix,iy+1): left plaquette (ix-1,iy), right (ix,iy)
            if iy + 1 < grid.ny {
                let left = if ix > 0 { chi[flat - 1] } else { 0.0 };
                let right = if ix < grid.nx - 1 { chi[flat] } else { 0.0 };
                e.ay[flat] = left - right;
            }
        }
    }
    e
}

/// Plain 5-point Poisson solve −Δψ = rhs on the dual lattice of plaquettes
/// with four non-exterior corners (exactly the cells whose circulation the
/// gauge-covariant energy sees), ψ = 0 outside. Jacobi-free CG.
fn dual_poisson(grid: &ClassifiedGrid, rhs_cells: &[f64]) -> Result<Vec<f64>, EllipticError> {
    let nx = grid.nx;
    let h = grid.h;
    let non_ext = |flat: usize| grid.labels[flat] != NodeLabel::Exterior;
    let mut active = vec![false; grid.n_nodes()];
    let mut unknowns = Vec::new();
    let mut index = vec![u32::MAX; grid.n_nodes()];
    for iy in 0..grid.ny - 1 {
        for ix in 0..grid.nx - 1 {
            let flat = iy * nx + ix;
            if non_ext(flat) && non_ext(flat + 1) && non_ext(flat + nx) && non_ext(flat + nx + 1)
            {
                active[flat] = true;
                index[flat] = unknowns.len() as u32;
                unknowns.push(flat);
            }
        }
    }
    let n = unknowns.len();
    let inv_h2 = 1.0 / (h * h);
    let neighbors = |flat: usize| -> [Option<usize>; 4] {
        let (ix, iy) = (flat % nx, flat / nx);
        [
            if ix + 1 < nx { Some(flat + 1) } else { None },
            if ix > 0 { Some(flat - 1) } else { None },
            if iy + 2 < grid.ny { Some(flat + nx) } else { None },
            if iy > 0 { Some(flat - nx) } else { None },
        ]
    };
    let matvec = |x: &[f64], y: &mut [f64]| {
        for (k, &flat) in unknowns.iter().enumerate() {
            let mut s = 4.0 * x[k];
            for nb in neighbors(flat).into_iter().flatten() {
                if active[nb] {
                    s -= x[index[nb] as usize];
                }
            }
            y[k] = s * inv_h2;
        }
    };
    let b: Vec<f64> = unknowns.iter().map(|&f| rhs_cells[f]).collect();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if b_norm > 0.0 {
        let mut r = b.clone();
        let mut p = r.clone();
        let mut rr: f64 = r.iter().map(|v| v * v).sum();
        let mut ap = vec![0.0; n];
        let mut done = false;
        for it in 1..=DEFAULT_CG_MAX_ITER {
            matvec(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            let alpha = rr / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rr_new: f64 = r.iter().map(|v| v * v).sum();
            if rr_new.sqrt() <= 1e-11 * b_norm {
                done = true;
                break;
            }
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
            if it == DEFAULT_CG_MAX_ITER {
                break;
            }
        }
        if !done {
            return Err(EllipticError::NoConvergence {
                iterations: DEFAULT_CG_MAX_ITER,
                residual: f64::NAN,
            });
        }
    }
    let mut psi = vec![0.0; grid.n_nodes()];
    for (k, &flat) in unknowns.iter().enumerate() {
        psi[flat] = x[k];
    }
    Ok(psi)
}

const CIRCULATION_TOL_TURNS: f64 = 0.1;

/// Builds the S¹ minimizer pair from a London field: the Coulomb-gauge
/// vector potential A = ∇⊥Π with ΔΠ = h, Π = 0 on ∂Ω, and the phase whose
/// gradient is A − ∇⊥h. Circulation around each hole is measured at radius
/// 2δ and must land within 0.1 turns of an integer multiple of 2π.
pub fn reconstruct_s1_minimizer(
    sol: &LondonSolution,
    domain: &PerforatedDomain,
) -> Result<S1Minimizer, LondonError> {
    let grid = &sol.h.grid;
    let h_cell = plaquette_average(&sol.h);
    let psi = dual_poisson(grid, &h_cell)?;
    let a = dual_difference_field(grid, &psi);
    let neg_h: Vec<f64> = h_cell.iter().map(|v| -v).collect();
    let w = dual_difference_field(grid, &neg_h);

    // phase increments on Ω_δ edges
    let mut steps = EdgeField::zeros(grid.clone());
    let nx = grid.nx;
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let flat = iy * nx + ix;
            if !u_node(grid.labels[flat]) {
                continue;
            }
            if ix + 1 < nx && u_node(grid.labels[flat + 1]) {
                steps.ax[flat] = a.ax[flat] - w.ax[flat];
            }
            if iy + 1 < grid.ny && u_node(grid.labels[flat + nx]) {
                steps.ay[flat] = a.ay[flat] - w.ay[flat];
            }
        }
    }

    // spanning-tree integration over interior nodes only: tree paths must
    // never run along the carrier rings, where the phase increments carry
    // no London structure and would break the 2π-multiple defect property
    let mut phase = ScalarField::zeros(grid.clone());
    let mut seen = vec![false; grid.n_nodes()];
    let base = grid.interior[0];
    seen[base] = true;
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(base);
    while let Some(p) = queue.pop_front() {
        let (ix, iy) = grid.node_coords(p);
        let mut push = |q: usize, dphi: f64| {
            if !seen[q] && grid.labels[q] == NodeLabel::Interior {
                seen[q] = true;
                phase.values[q] = phase.values[p] + dphi;
                queue.push_back(q);
            }
        };
        if ix + 1 < nx {
            push(p + 1, steps.ax[p]);
        }
        if ix > 0 {
            push(p - 1, -steps.ax[p - 1]);
        }
        if iy + 1 < grid.ny {
            push(p + nx, steps.ay[p]);
        }
        if iy > 0 {
            push(p - nx, -steps.ay[p - nx]);
        }
    }
    // Dirichlet carriers hang off a single adjacent interior node each
    for flat in 0..grid.n_nodes() {
        if !u_node(grid.labels[flat]) || grid.labels[flat] == NodeLabel::Interior {
            continue;
        }
        let (ix, iy) = grid.node_coords(flat);
        let interior = |q: usize| grid.labels[q] == NodeLabel::Interior;
        if ix + 1 < nx && interior(flat + 1) {
            phase.values[flat] = phase.values[flat + 1] - steps.ax[flat];
        } else if ix > 0 && interior(flat - 1) {
            phase.values[flat] = phase.values[flat - 1] + steps.ax[flat - 1];
        } else if iy + 1 < grid.ny && interior(flat + nx) {
            phase.values[flat] = phase.values[flat + nx] - steps.ay[flat];
        } else if iy > 0 && interior(flat - nx) {
            phase.values[flat] = phase.values[flat - nx] + steps.ay[flat - nx];
        }
    }

    // circulation around each hole at radius 2δ, by discrete Stokes over
    // the enclosed plaquettes: Σ (ĥ − Δ_h ĥ) h², which is exact for the
    // constructed A and ∇⊥h fields.
    let h2 = grid.h * grid.h;
    let mut circulations = Vec::with_capacity(domain.n_holes());
    for (j, center) in domain.holes.iter().enumerate() {
        let radius = 2.0 * domain.hole_radius;
        let mut circ = 0.0;
        for iy in 1..grid.ny - 2 {
            for ix in 1..grid.nx - 2 {
                let c = [
                    grid.origin[0] + (ix as f64 + 0.5) * grid.h,
                    grid.origin[1] + (iy as f64 + 0.5) * grid.h,
                ];
                let dist =
                    ((c[0] - center[0]).powi(2) + (c[1] - center[1]).powi(2)).sqrt();
                if dist > radius {
                    continue;
                }
                let flat = iy * nx + ix;
                let lap = (h_cell[flat + 1]
                    + h_cell[flat - 1]
                    + h_cell[flat + nx]
                    + h_cell[flat - nx]
                    - 4.0 * h_cell[flat])
                    / h2;
                circ += (h_cell[flat] - lap) * h2;
            }
        }
        let turns = circ / (2.0 * std::f64::consts::PI);
        if (turns - turns.round()).abs() > CIRCULATION_TOL_TURNS {
            return Err(LondonError::NonIntegerCirculation {
                hole: j,
                value: turns,
            });
        }
        circulations.push(circ);
    }

    Ok(S1Minimizer {
        phase,
        phase_steps: steps,
        vector_potential: a,
        grad_perp_h: w,
        circulations,
    })
}
