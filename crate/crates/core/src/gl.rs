//! Full ℂ-valued Ginzburg-Landau minimization on the perforated grid.
//!
//! The discretization is gauge-covariant: the order parameter u sits on
//! nodes, the vector potential A on edges as line integrals, and the kinetic
//! term couples them through link phases,
//!     ½ Σ_edges |u_q e^{−iA_e} − u_p|²,
//! so a lattice gauge transform u → u e^{iφ}, A_e → A_e + (φ_q − φ_p)
//! leaves the energy invariant to rounding. The magnetic term lives on
//! plaquette circulations over all of Ω, holes included; u is free on every
//! node of Ω_δ including the Dirichlet carriers.
//!
//! Minimization is Polak-Ribière nonlinear conjugate gradients with Armijo
//! backtracking; the analytic gradient matches central finite differences.

use crate::domain::{ClassifiedGrid, NodeLabel};
use crate::field::{ComplexField, EdgeField, ScalarField};
use crate::london::{LondonSolution, S1Minimizer};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlParams {
    pub epsilon: f64,
    pub delta: f64,
    pub sigma: f64,
    pub h_ext: f64,
}

impl GlParams {
    pub fn new(epsilon: f64, delta: f64, sigma: f64) -> Self {
        GlParams {
            epsilon,
            delta,
            sigma,
            h_ext: crate::london::external_field(sigma, delta),
        }
    }
}

/// Precomputed active index sets of the lattice: which nodes carry u, which
/// edges carry A, which of those edges enter the kinetic term, and which
/// plaquettes enter the magnetic term.
#[derive(Debug, Clone)]
pub struct GlLattice {
    pub grid: Arc<ClassifiedGrid>,
    pub u_nodes: Vec<usize>,
    u_slot: Vec<u32>,
    /// base node of each +x / +y edge with both endpoints non-exterior
    pub ax_edges: Vec<usize>,
    pub ay_edges: Vec<usize>,
    ax_slot: Vec<u32>,
    ay_slot: Vec<u32>,
    /// kinetic edges: both endpoints in the u-node set
    kin_x: Vec<usize>,
    kin_y: Vec<usize>,
    /// lower-left corner of each plaquette with 4 non-exterior corners
    pub plaquettes: Vec<usize>,
}

const NONE: u32 = u32::MAX;

fn is_u_node(label: NodeLabel) -> bool {
    matches!(
        label,
        NodeLabel::Interior | NodeLabel::DirichletOuter | NodeLabel::DirichletHole(_)
    )
}

impl GlLattice {
    pub fn new(grid: Arc<ClassifiedGrid>) -> Self {
        let n = grid.n_nodes();
        let nx = grid.nx;
        let mut u_nodes = Vec::new();
        let mut u_slot = vec![NONE; n];
        for flat in 0..n {
            if is_u_node(grid.labels[flat]) {
                u_slot[flat] = u_nodes.len() as u32;
                u_nodes.push(flat);
            }
        }
        let mut ax_edges = Vec::new();
        let mut ay_edges = Vec::new();
        let mut ax_slot = vec![NONE; n];
        let mut ay_slot = vec![NONE; n];
        let mut kin_x = Vec::new();
        let mut kin_y = Vec::new();
        let non_ext = |flat: usize| grid.labels[flat] != NodeLabel::Exterior;
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let flat = iy * nx + ix;
                // kinetic edges need one interior endpoint: edges joining two
                // Dirichlet carriers lie outside Ω_δ
                let kinetic_pair = |a: usize, b: usize| {
                    is_u_node(grid.labels[a])
                        && is_u_node(grid.labels[b])
                        && (grid.labels[a] == NodeLabel::Interior
                            || grid.labels[b] == NodeLabel::Interior)
                };
                if ix + 1 < nx && non_ext(flat) && non_ext(flat + 1) {
                    ax_slot[flat] = ax_edges.len() as u32;
                    ax_edges.push(flat);
                    if kinetic_pair(flat, flat + 1) {
                        kin_x.push(flat);
                    }
                }
                if iy + 1 < grid.ny && non_ext(flat) && non_ext(flat + nx) {
                    ay_slot[flat] = ay_edges.len() as u32;
                    ay_edges.push(flat);
                    if kinetic_pair(flat, flat + nx) {
                        kin_y.push(flat);
                    }
                }
            }
        }
        let mut plaquettes = Vec::new();
        for iy in 0..grid.ny - 1 {
            for ix in 0..grid.nx - 1 {
                let flat = iy * nx + ix;
                if non_ext(flat) && non_ext(flat + 1) && non_ext(flat + nx) && non_ext(flat + nx + 1)
                {
                    plaquettes.push(flat);
                }
            }
        }
        GlLattice {
            grid,
            u_nodes,
            u_slot,
            ax_edges,
            ay_edges,
            ax_slot,
            ay_slot,
            kin_x,
            kin_y,
            plaquettes,
        }
    }

    pub fn n_dof(&self) -> usize {
        2 * self.u_nodes.len() + self.ax_edges.len() + self.ay_edges.len()
    }
}

/// Configuration of the ℂ-valued problem: order parameter on Ω_δ nodes,
/// vector potential line integrals on Ω edges, physical parameters.
#[derive(Debug, Clone)]
pub struct GLState {
    pub u: ComplexField,
    pub a: EdgeField,
    pub params: GlParams,
}

impl GLState {
    /// Uniform superconducting state u ≡ 1, A ≡ 0.
    pub fn uniform(grid: Arc<ClassifiedGrid>, params: GlParams) -> Self {
        GLState {
            u: ComplexField::constant(grid.clone(), Complex64::new(1.0, 0.0)),
            a: EdgeField::zeros(grid),
            params,
        }
    }

    pub fn max_modulus(&self, lattice: &GlLattice) -> f64 {
        lattice
            .u_nodes
            .iter()
            .map(|&n| self.u.values[n].norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GLEnergyBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub magnetic: f64,
    pub total: f64,
}

fn pack(lattice: &GlLattice, state: &GLState, x: &mut Vec<f64>) {
    x.clear();
    for &n in &lattice.u_nodes {
        x.push(state.u.values[n].re);
        x.push(state.u.values[n].im);
    }
    for &e in &lattice.ax_edges {
        x.push(state.a.ax[e]);
    }
    for &e in &lattice.ay_edges {
        x.push(state.a.ay[e]);
    }
}

fn unpack(lattice: &GlLattice, x: &[f64], state: &mut GLState) {
    let nu = lattice.u_nodes.len();
    for (k, &n) in lattice.u_nodes.iter().enumerate() {
        state.u.values[n] = Complex64::new(x[2 * k], x[2 * k + 1]);
    }
    let mut idx = 2 * nu;
    for &e in &lattice.ax_edges {
        state.a.ax[e] = x[idx];
        idx += 1;
    }
    for &e in &lattice.ay_edges {
        state.a.ay[e] = x[idx];
        idx += 1;
    }
}

struct EnergyModel<'a> {
    lattice: &'a GlLattice,
    params: GlParams,
}

impl<'a> EnergyModel<'a> {
    fn breakdown(&self, x: &[f64]) -> GLEnergyBreakdown {
        let lat = self.lattice;
        let grid = &lat.grid;
        let nx = grid.nx;
        let nu = lat.u_nodes.len();
        let h2 = grid.h * grid.h;
        let u = |flat: usize| -> Complex64 {
            let s = lat.u_slot[flat] as usize;
            Complex64::new(x[2 * s], x[2 * s + 1])
        };
        let ax = |flat: usize| x[2 * nu + lat.ax_slot[flat] as usize];
        let ay = |flat: usize| x[2 * nu + lat.ax_edges.len() + lat.ay_slot[flat] as usize];

        let mut kinetic = 0.0;
        for &p in &lat.kin_x {
            let link = Complex64::from_polar(1.0, -ax(p));
            kinetic += (u(p + 1) * link - u(p)).norm_sqr();
        }
        for &p in &lat.kin_y {
            let link = Complex64::from_polar(1.0, -ay(p));
            kinetic += (u(p + nx) * link - u(p)).norm_sqr();
        }
        kinetic *= 0.5;

        let mut potential = 0.0;
        for k in 0..nu {
            let m2 = x[2 * k] * x[2 * k] + x[2 * k + 1] * x[2 * k + 1];
            let d = 1.0 - m2;
            potential += d * d;
        }
        potential *= h2 / (4.0 * self.params.epsilon * self.params.epsilon);

        let mut magnetic = 0.0;
        for &p in &lat.plaquettes {
            let circ = ax(p) + ay(p + 1) - ax(p + nx) - ay(p);
            let d = circ / h2 - self.params.h_ext;
            magnetic += d * d;
        }
        magnetic *= 0.5 * h2;

        GLEnergyBreakdown {
            kinetic,
            potential,
            magnetic,
            total: kinetic + potential + magnetic,
        }
    }

    fn energy(&self, x: &[f64]) -> f64 {
        self.breakdown(x).total
    }

    fn energy_and_gradient(&self, x: &[f64], g: &mut [f64]) -> f64 {
        let lat = self.lattice;
        let grid = &lat.grid;
        let nx = grid.nx;
        let nu = lat.u_nodes.len();
        let h2 = grid.h * grid.h;
        let ax_off = 2 * nu;
        let ay_off = 2 * nu + lat.ax_edges.len();
        g.iter_mut().for_each(|v| *v = 0.0);

        let u = |flat: usize| -> Complex64 {
            let s = lat.u_slot[flat] as usize;
            Complex64::new(x[2 * s], x[2 * s + 1])
        };

        let mut kinetic = 0.0;
        for &p in &lat.kin_x {
            let q = p + 1;
            let a = x[ax_off + lat.ax_slot[p] as usize];
            let link = Complex64::from_polar(1.0, -a);
            let up = u(p);
            let uq = u(q);
            let uq_rot = uq * link; // u_q e^{-iA}
            kinetic += (uq_rot - up).norm_sqr();
            let sp = lat.u_slot[p] as usize;
            let sq = lat.u_slot[q] as usize;
            g[2 * sp] += up.re - uq_rot.re;
            g[2 * sp + 1] += up.im - uq_rot.im;
            let up_rot = up * link.conj(); // u_p e^{+iA}
            g[2 * sq] += uq.re - up_rot.re;
            g[2 * sq + 1] += uq.im - up_rot.im;
            g[ax_off + lat.ax_slot[p] as usize] -= (up.conj() * uq_rot).im;
        }
        for &p in &lat.kin_y {
            let q = p + nx;
            let a = x[ay_off + lat.ay_slot[p] as usize];
            let link = Complex64::from_polar(1.0, -a);
            let up = u(p);
            let uq = u(q);
            let uq_rot = uq * link;
            kinetic += (uq_rot - up).norm_sqr();
            let sp = lat.u_slot[p] as usize;
            let sq = lat.u_slot[q] as usize;
            g[2 * sp] += up.re - uq_rot.re;
            g[2 * sp + 1] += up.im - uq_rot.im;
            let up_rot = up * link.conj();
            g[2 * sq] += uq.re - up_rot.re;
            g[2 * sq + 1] += uq.im - up_rot.im;
            g[ay_off + lat.ay_slot[p] as usize] -= (up.conj() * uq_rot).im;
        }
        kinetic *= 0.5;

        let eps2 = self.params.epsilon * self.params.epsilon;
        let mut potential = 0.0;
        for k in 0..nu {
            let (re, im) = (x[2 * k], x[2 * k + 1]);
            let d = 1.0 - re * re - im * im;
            potential += d * d;
            let f = -(h2 / eps2) * d;
            g[2 * k] += f * re;
            g[2 * k + 1] += f * im;
        }
        potential *= h2 / (4.0 * eps2);

        let mut magnetic = 0.0;
        for &p in &lat.plaquettes {
            let e_bottom = ax_off + lat.ax_slot[p] as usize;
            let e_top = ax_off + lat.ax_slot[p + nx] as usize;
            let e_left = ay_off + lat.ay_slot[p] as usize;
            let e_right = ay_off + lat.ay_slot[p + 1] as usize;
            let circ = x[e_bottom] + x[e_right] - x[e_top] - x[e_left];
            let d = circ / h2 - self.params.h_ext;
            magnetic += d * d;
            g[e_bottom] += d;
            g[e_right] += d;
            g[e_top] -= d;
            g[e_left] -= d;
        }
        magnetic *= 0.5 * h2;

        kinetic + potential + magnetic
    }
}

/// Total energy split of a state.
pub fn gl_energy(lattice: &GlLattice, state: &GLState) -> GLEnergyBreakdown {
    let mut x = Vec::with_capacity(lattice.n_dof());
    pack(lattice, state, &mut x);
    EnergyModel {
        lattice,
        params: state.params,
    }
    .breakdown(&x)
}

/// Analytic gradient, packed in the optimizer's dof order:
/// (Re u, Im u) per u-node, then +x edges, then +y edges.
pub fn gl_gradient(lattice: &GlLattice, state: &GLState) -> Vec<f64> {
    let mut x = Vec::with_capacity(lattice.n_dof());
    pack(lattice, state, &mut x);
    let mut g = vec![0.0; x.len()];
    EnergyModel {
        lattice,
        params: state.params,
    }
    .energy_and_gradient(&x, &mut g);
    g
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Schedule {
    pub max_iters: usize,
    /// Absolute gradient max-norm target; None derives 1e−8·max(1, E₀).
    pub grad_tol: Option<f64>,
    pub armijo_c1: f64,
    pub min_step: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            max_iters: 20_000,
            grad_tol: None,
            armijo_c1: 1e-4,
            min_step: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug)]
pub struct MinimizeResult {
    pub state: GLState,
    pub trace: Vec<IterRecord>,
    pub converged: bool,
    /// Line search found no decrease at the minimal step; best iterate kept.
    pub stalled: bool,
    pub final_energy: f64,
    pub final_grad_norm: f64,
}

/// Polak-Ribière nonlinear CG with restarts and Armijo backtracking.
/// Accepted steps never increase the energy.
pub fn minimize_gl(lattice: &GlLattice, init: &GLState, schedule: &Schedule) -> MinimizeResult {
    let model = EnergyModel {
        lattice,
        params: init.params,
    };
    let n = lattice.n_dof();
    let mut x = Vec::with_capacity(n);
    pack(lattice, init, &mut x);
    let mut g = vec![0.0; n];
    let mut energy = model.energy_and_gradient(&x, &mut g);
    let grad_tol = schedule
        .grad_tol
        .unwrap_or_else(|| 1e-8 * energy.abs().max(1.0));

    let mut dir: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut g_old = g.clone();
    let mut trace = Vec::new();
    let mut alpha_init = 1.0;
    let mut converged = false;
    let mut stalled = false;
    let mut trial = vec![0.0; n];

    let grad_max = |g: &[f64]| g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));

    let mut gnorm = grad_max(&g);
    trace.push(IterRecord {
        iter: 0,
        energy,
        grad_norm: gnorm,
        step: 0.0,
    });
    if gnorm <= grad_tol {
        converged = true;
    }

    let mut iter = 0;
    while !converged && !stalled && iter < schedule.max_iters {
        iter += 1;
        let slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            // not a descent direction: restart on steepest descent
            for i in 0..n {
                dir[i] = -g[i];
            }
        }
        let slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();

        let mut alpha = alpha_init;
        let mut accepted = false;
        for _ in 0..80 {
            for i in 0..n {
                trial[i] = x[i] + alpha * dir[i];
            }
            let e_trial = model.energy(&trial);
            if e_trial <= energy + schedule.armijo_c1 * alpha * slope {
                accepted = true;
                break;
            }
            alpha *= 0.5;
            if alpha < schedule.min_step {
                break;
            }
        }
        if !accepted {
            stalled = true;
            break;
        }
        std::mem::swap(&mut x, &mut trial);
        alpha_init = (alpha * 2.5).clamp(1e-12, 1e6);

        std::mem::swap(&mut g_old, &mut g);
        energy = model.energy_and_gradient(&x, &mut g);
        gnorm = grad_max(&g);
        trace.push(IterRecord {
            iter,
            energy,
            grad_norm: gnorm,
            step: alpha,
        });
        if gnorm <= grad_tol {
            converged = true;
            break;
        }
        // Polak-Ribière+ with automatic restart through the max(0, ·)
        let gg_old: f64 = g_old.iter().map(|v| v * v).sum();
        let num: f64 = g.iter().zip(&g_old).map(|(gn, go)| gn * (gn - go)).sum();
        let beta = (num / gg_old).max(0.0);
        for i in 0..n {
            dir[i] = -g[i] + beta * dir[i];
        }
    }

    let mut state = init.clone();
    unpack(lattice, &x, &mut state);
    MinimizeResult {
        state,
        trace,
        converged,
        stalled,
        final_energy: energy,
        final_grad_norm: gnorm,
    }
}

pub const SEED_MODULUS_FLOOR: f64 = 0.1;
pub const SEED_COLLAR_WIDTHS: f64 = 3.0;

/// Builds the ℂ-valued starting state from a reconstructed S¹ minimizer:
/// u = m·e^{iΦ} with the modulus ramped from the floor at the hole rings to
/// one over a collar of width 3ε, and A taken from the reconstructed
/// Coulomb-gauge edge integrals.
pub fn seed_from_london(
    domain: &crate::domain::PerforatedDomain,
    sol: &LondonSolution,
    rec: &S1Minimizer,
    params: GlParams,
) -> GLState {
    let grid = &sol.h.grid;
    let collar = SEED_COLLAR_WIDTHS * params.epsilon;
    let mut u = ComplexField::constant(grid.clone(), Complex64::new(1.0, 0.0));
    for flat in 0..grid.n_nodes() {
        if !is_u_node(grid.labels[flat]) {
            continue;
        }
        let p = grid.position(flat);
        let mut dist = f64::INFINITY;
        for a in &domain.holes {
            let r = ((p[0] - a[0]).powi(2) + (p[1] - a[1]).powi(2)).sqrt();
            dist = dist.min((r - domain.hole_radius).max(0.0));
        }
        let ramp = if collar > 0.0 {
            (dist / collar).min(1.0)
        } else {
            1.0
        };
        let m = SEED_MODULUS_FLOOR + (1.0 - SEED_MODULUS_FLOOR) * ramp;
        u.values[flat] = Complex64::from_polar(m, rec.phase.values[flat]);
    }
    GLState {
        u,
        a: rec.vector_potential.clone(),
        params,
    }
}

/// Applies the lattice gauge transform u → u e^{iφ}, A_e → A_e + (φ_q − φ_p)
/// for a nodal φ given on all non-exterior nodes.
pub fn gauge_transform(lattice: &GlLattice, state: &GLState, phi: &[f64]) -> GLState {
    let grid = &lattice.grid;
    let nx = grid.nx;
    let mut out = state.clone();
    for &n in &lattice.u_nodes {
        out.u.values[n] *= Complex64::from_polar(1.0, phi[n]);
    }
    for &e in &lattice.ax_edges {
        out.a.ax[e] += phi[e + 1] - phi[e];
    }
    for &e in &lattice.ay_edges {
        out.a.ay[e] += phi[e + nx] - phi[e];
    }
    out
}

/// Projects onto the discrete Coulomb gauge: solves the graph-Laplacian
/// Poisson problem making the edge field divergence-free with zero normal
/// trace, then applies the gauge transform. Energy-neutral to rounding.
pub fn project_coulomb_gauge(
    lattice: &GlLattice,
    state: &GLState,
) -> Result<GLState, crate::elliptic::EllipticError> {
    let grid = &lattice.grid;
    let nx = grid.nx;
    let n = grid.n_nodes();
    // active node set: everything non-exterior (A lives on all of Ω)
    let mut active = vec![false; n];
    let mut order = Vec::new();
    let mut slot = vec![NONE; n];
    for flat in 0..n {
        if grid.labels[flat] != NodeLabel::Exterior {
            active[flat] = true;
            slot[flat] = order.len() as u32;
            order.push(flat);
        }
    }
    // raw divergence sums r_n = Σ_e s(n,e) A_e over active edges
    let mut rhs = vec![0.0; order.len()];
    for &e in &lattice.ax_edges {
        rhs[slot[e] as usize] += state.a.ax[e];
        rhs[slot[e + 1] as usize] -= state.a.ax[e];
    }
    for &e in &lattice.ay_edges {
        rhs[slot[e] as usize] += state.a.ay[e];
        rhs[slot[e + nx] as usize] -= state.a.ay[e];
    }
    // graph Laplacian L φ = r with φ pinned at the first node
    let m = order.len();
    let neighbors = |flat: usize| -> [Option<usize>; 4] {
        let (ix, iy) = (flat % nx, flat / nx);
        [
            if ix + 1 < nx { Some(flat + 1) } else { None },
            if ix > 0 { Some(flat - 1) } else { None },
            if iy + 1 < grid.ny { Some(flat + nx) } else { None },
            if iy > 0 { Some(flat - nx) } else { None },
        ]
    };
    let matvec = |p: &[f64], out: &mut [f64]| {
        for (k, &flat) in order.iter().enumerate() {
            let mut deg = 0.0;
            let mut acc = 0.0;
            for nb in neighbors(flat).into_iter().flatten() {
                if active[nb] {
                    deg += 1.0;
                    if slot[nb] != 0 {
                        acc += p[slot[nb] as usize];
                    }
                }
            }
            out[k] = deg * p[k] - acc;
        }
        out[0] = p[0]; // pinned node
    };
    let mut phi_u = vec![0.0; m];
    {
        let mut b = rhs.clone();
        b[0] = 0.0;
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if b_norm > 0.0 {
            let mut r = b.clone();
            let mut p = r.clone();
            let mut rr: f64 = r.iter().map(|v| v * v).sum();
            let mut ap = vec![0.0; m];
            let mut ok = false;
            for _ in 0..crate::elliptic::DEFAULT_CG_MAX_ITER {
                matvec(&p, &mut ap);
                let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
                let alpha = rr / pap;
                for i in 0..m {
                    phi_u[i] += alpha * p[i];
                    r[i] -= alpha * ap[i];
                }
                let rr_new: f64 = r.iter().map(|v| v * v).sum();
                if rr_new.sqrt() <= 1e-12 * b_norm {
                    ok = true;
                    break;
                }
                let beta = rr_new / rr;
                rr = rr_new;
                for i in 0..m {
                    p[i] = r[i] + beta * p[i];
                }
            }
            if !ok {
                return Err(crate::elliptic::EllipticError::NoConvergence {
                    iterations: crate::elliptic::DEFAULT_CG_MAX_ITER,
                    residual: f64::NAN,
                });
            }
        }
    }
    let mut phi = vec![0.0; n];
    for (k, &flat) in order.iter().enumerate() {
        phi[flat] = phi_u[k];
    }
    Ok(gauge_transform(lattice, state, &phi))
}

/// Discrete divergence max-norm of the vector potential over Ω nodes.
pub fn max_divergence(lattice: &GlLattice, state: &GLState) -> f64 {
    let grid = &lattice.grid;
    let mut worst = 0.0_f64;
    for &flat in lattice
        .u_nodes
        .iter()
        .chain(lattice.plaquettes.iter())
    {
        let (ix, iy) = grid.node_coords(flat);
        worst = worst.max(state.a.node_divergence(ix, iy).abs());
    }
    worst
}

/// Terms of the energy decomposition against an S¹ reference pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub gl_total: f64,
    /// GL energy of the reconstructed S¹ pair (u = e^{iΦ}, A = A_δD),
    /// evaluated in the same discrete functional.
    pub london_total: f64,
    pub f_term: f64,
    pub cross_term: f64,
    pub residual: f64,
}

/// Splits GL[u, A] into the S¹ reference energy, the relative-field energy
/// F[v, B] with v = u·e^{−iΦ}, B = A − A_δD, and the cross term
/// −∫∇⊥h·Im(v̄∇v); reports the remainder.
pub fn energy_decomposition_check(
    lattice: &GlLattice,
    state: &GLState,
    rec: &S1Minimizer,
) -> DecompositionReport {
    let grid = &lattice.grid;
    let nx = grid.nx;
    let gl_total = gl_energy(lattice, state).total;

    // S¹ reference pair in the same discrete functional
    let mut reference = GLState {
        u: ComplexField::constant(grid.clone(), Complex64::new(1.0, 0.0)),
        a: rec.vector_potential.clone(),
        params: state.params,
    };
    for &nd in &lattice.u_nodes {
        reference.u.values[nd] = Complex64::from_polar(1.0, rec.phase.values[nd]);
    }
    let london_total = gl_energy(lattice, &reference).total;

    // v = u e^{-iΦ}, B = A − A_δD
    let mut v = ComplexField::constant(grid.clone(), Complex64::new(1.0, 0.0));
    for &nd in &lattice.u_nodes {
        v.values[nd] =
            state.u.values[nd] * Complex64::from_polar(1.0, -rec.phase.values[nd]);
    }
    let h2 = grid.h * grid.h;
    let eps2 = state.params.epsilon * state.params.epsilon;

    let mut f_kin = 0.0;
    let mut cross = 0.0;
    for &p in &lattice.kin_x {
        let b = state.a.ax[p] - rec.vector_potential.ax[p];
        let link = Complex64::from_polar(1.0, -b);
        f_kin += (v.values[p + 1] * link - v.values[p]).norm_sqr();
        cross -= rec.grad_perp_h.ax[p] * (v.values[p].conj() * v.values[p + 1]).im;
    }
    for &p in &lattice.kin_y {
        let b = state.a.ay[p] - rec.vector_potential.ay[p];
        let link = Complex64::from_polar(1.0, -b);
        f_kin += (v.values[p + nx] * link - v.values[p]).norm_sqr();
        cross -= rec.grad_perp_h.ay[p] * (v.values[p].conj() * v.values[p + nx]).im;
    }
    f_kin *= 0.5;

    let mut f_pot = 0.0;
    for &nd in &lattice.u_nodes {
        let d = 1.0 - v.values[nd].norm_sqr();
        f_pot += d * d;
    }
    f_pot *= h2 / (4.0 * eps2);

    let mut f_mag = 0.0;
    for &p in &lattice.plaquettes {
        let circ_b = (state.a.ax[p] - rec.vector_potential.ax[p])
            + (state.a.ay[p + 1] - rec.vector_potential.ay[p + 1])
            - (state.a.ax[p + nx] - rec.vector_potential.ax[p + nx])
            - (state.a.ay[p] - rec.vector_potential.ay[p]);
        let d = circ_b / h2;
        f_mag += d * d;
    }
    f_mag *= 0.5 * h2;

    let f_term = f_kin + f_pot + f_mag;
    let residual = gl_total - london_total - f_term - cross;
    DecompositionReport {
        gl_total,
        london_total,
        f_term,
        cross_term: cross,
        residual,
    }
}

/// Copies the plaquette curls of the state's vector potential into a nodal
/// field (value at the plaquette's lower-left corner), for diagnostics.
pub fn curl_field(lattice: &GlLattice, state: &GLState) -> ScalarField {
    let grid = &lattice.grid;
    let mut out = ScalarField::zeros(grid.clone());
    for &p in &lattice.plaquettes {
        let (ix, iy) = grid.node_coords(p);
        out.values[p] = state.a.plaquette_curl(ix, iy);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, PerforatedDomain};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_lattice(delta: f64, h: f64) -> (PerforatedDomain, GlLattice) {
        let dom = PerforatedDomain::disk([0.0, 0.0], 1.0, vec![[0.0, 0.0]], delta);
        let grid = Arc::new(build_grid(&dom, h).unwrap());
        (dom, GlLattice::new(grid))
    }

    fn random_state(lattice: &GlLattice, params: GlParams, seed: u64, amp: f64) -> GLState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut st = GLState::uniform(lattice.grid.clone(), params);
        for &n in &lattice.u_nodes {
            st.u.values[n] = Complex64::new(
                1.0 + amp * rng.gen_range(-1.0..1.0),
                amp * rng.gen_range(-1.0..1.0),
            );
        }
        for &e in &lattice.ax_edges {
            st.a.ax[e] = amp * rng.gen_range(-1.0..1.0);
        }
        for &e in &lattice.ay_edges {
            st.a.ay[e] = amp * rng.gen_range(-1.0..1.0);
        }
        st
    }

    #[test]
    fn ground_state_energy_vanishes() {
        let (_, lat) = small_lattice(0.1, 0.025);
        let params = GlParams::new(0.01, 0.1, 0.0);
        let st = GLState::uniform(lat.grid.clone(), params);
        let e = gl_energy(&lat, &st);
        assert_eq!(e.total, 0.0);
    }

    #[test]
    fn plugin_energies_match_closed_forms() {
        let (_, lat) = small_lattice(0.1, 0.025);
        let eps = 0.02;
        let params = GlParams::new(eps, 0.1, 0.0);
        // u ≡ 0: potential = |Ω_δ|/(4ε²) with nodal area h²·#u_nodes
        let mut st = GLState::uniform(lat.grid.clone(), params);
        for &n in &lat.u_nodes {
            st.u.values[n] = Complex64::new(0.0, 0.0);
        }
        let e = gl_energy(&lat, &st);
        let area = lat.u_nodes.len() as f64 * lat.grid.h * lat.grid.h;
        assert!((e.potential - area / (4.0 * eps * eps)).abs() < 1e-9);
        assert_eq!(e.kinetic, 0.0);

        // u ≡ 1, A ≡ 0, h_ext ≠ 0: magnetic = ½ h_ext² |Ω| over plaquettes
        let params2 = GlParams::new(eps, 0.1, 2.0);
        let st2 = GLState::uniform(lat.grid.clone(), params2);
        let e2 = gl_energy(&lat, &st2);
        let plaq_area = lat.plaquettes.len() as f64 * lat.grid.h * lat.grid.h;
        assert!((e2.magnetic - 0.5 * params2.h_ext * params2.h_ext * plaq_area).abs() < 1e-8);
        assert_eq!(e2.kinetic, 0.0);
        assert_eq!(e2.potential, 0.0);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (_, lat) = small_lattice(0.2, 0.05);
        let params = GlParams::new(0.1, 0.2, 1.0);
        let st = random_state(&lat, params, 7, 0.25);
        let model = EnergyModel {
            lattice: &lat,
            params,
        };
        let mut x = Vec::new();
        pack(&lat, &st, &mut x);
        let mut g = vec![0.0; x.len()];
        model.energy_and_gradient(&x, &mut g);

        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let fd_step = 1e-5;
        for _ in 0..60 {
            let i = rng.gen_range(0..x.len());
            let mut xp = x.clone();
            xp[i] += fd_step;
            let mut xm = x.clone();
            xm[i] -= fd_step;
            let fd = (model.energy(&xp) - model.energy(&xm)) / (2.0 * fd_step);
            let rel = (g[i] - fd).abs() / (1.0 + fd.abs());
            assert!(rel <= 1e-6, "dof {i}: analytic {} vs fd {fd}", g[i]);
        }
    }

    #[test]
    fn gradient_zero_at_uniform_zero_field_state() {
        let (_, lat) = small_lattice(0.1, 0.025);
        let params = GlParams::new(0.05, 0.1, 0.0);
        let st = GLState::uniform(lat.grid.clone(), params);
        let g = gl_gradient(&lat, &st);
        for v in g {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn exact_gauge_invariance() {
        let (_, lat) = small_lattice(0.12, 0.03);
        let params = GlParams::new(0.05, 0.12, 1.5);
        let st = random_state(&lat, params, 3, 0.4);
        let e0 = gl_energy(&lat, &st).total;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let phi: Vec<f64> = (0..lat.grid.n_nodes())
            .map(|_| rng.gen_range(-3.0..3.0))
            .collect();
        let st2 = gauge_transform(&lat, &st, &phi);
        let e1 = gl_energy(&lat, &st2).total;
        assert!(
            (e1 - e0).abs() <= 1e-12 * e0.abs().max(1.0),
            "{e0} vs {e1}"
        );
    }

    #[test]
    fn coulomb_projection_neutral_idempotent_and_inverts_gauging() {
        let (_, lat) = small_lattice(0.12, 0.03);
        let params = GlParams::new(0.05, 0.12, 0.5);
        // start from a divergence-free field: zero
        let st = GLState::uniform(lat.grid.clone(), params);
        // gauge by a smooth φ, then project back
        let phi: Vec<f64> = (0..lat.grid.n_nodes())
            .map(|i| {
                let p = lat.grid.position(i);
                0.3 * (2.0 * p[0]).sin() + 0.2 * p[1]
            })
            .collect();
        let gauged = gauge_transform(&lat, &st, &phi);
        assert!(max_divergence(&lat, &gauged) > 1e-3);
        let projected = project_coulomb_gauge(&lat, &gauged).unwrap();
        assert!(max_divergence(&lat, &projected) < 1e-9);
        for &e in &lat.ax_edges {
            assert!((projected.a.ax[e] - st.a.ax[e]).abs() < 1e-8);
        }
        // energy neutral
        let e_gauged = gl_energy(&lat, &gauged).total;
        let e_proj = gl_energy(&lat, &projected).total;
        assert!((e_gauged - e_proj).abs() <= 1e-12 * e_gauged.max(1.0));
        // idempotent
        let twice = project_coulomb_gauge(&lat, &projected).unwrap();
        for &e in &lat.ax_edges {
            assert!((twice.a.ax[e] - projected.a.ax[e]).abs() < 1e-9);
        }
    }

    #[test]
    fn minimizer_settles_uniform_state_immediately() {
        let (_, lat) = small_lattice(0.1, 0.025);
        let params = GlParams::new(0.05, 0.1, 0.0);
        let st = GLState::uniform(lat.grid.clone(), params);
        let res = minimize_gl(&lat, &st, &Schedule::default());
        assert!(res.converged);
        assert_eq!(res.trace.len(), 1);
        assert!(res.final_energy.abs() < 1e-15);
    }

    #[test]
    fn descent_is_monotone_and_reduces_random_state() {
        let (_, lat) = small_lattice(0.12, 0.03);
        let params = GlParams::new(0.1, 0.12, 0.5);
        let st = random_state(&lat, params, 11, 0.5);
        let schedule = Schedule {
            max_iters: 400,
            grad_tol: Some(1e-6),
            ..Schedule::default()
        };
        let res = minimize_gl(&lat, &st, &schedule);
        for w in res.trace.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-12);
        }
        assert!(res.final_energy < gl_energy(&lat, &st).total);
    }
}
