//! High-accuracy 1-D radial oracle for radially symmetric validation cases.
//!
//! Solves −u'' − u'/r + c·u = f on [r_in, r_out] with a three-point scheme.
//! For r_in > 0 the equation is discretized in t = ln r, where it becomes
//! −u_tt + r²(c·u − f) = 0 on a uniform t-grid; the log coordinate absorbs
//! the 1/r stiffness near small inner radii, so K₀-type layers are resolved
//! to O(Δt²) with bounded constants. For r_in = 0 a uniform r-grid with the
//! symmetry condition u'(0) = 0 is used instead.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialEquation {
    /// −Δu + u = f
    Screened,
    /// −Δu = f
    Poisson,
}

/// Inner boundary condition; the outer end is always Dirichlet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialBc {
    Dirichlet(f64),
    /// Regularity at r = 0 (u'(0) = 0); only valid when r_in = 0.
    SymmetryAxis,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RadialError {
    #[error("invalid radial interval [{0}, {1}]")]
    BadInterval(f64, f64),
    #[error("symmetry-axis condition requires r_in = 0, got {0}")]
    BadAxisCondition(f64),
}

/// Radial profile on a (possibly log-spaced) r grid.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub r: Vec<f64>,
    pub values: Vec<f64>,
    pub inner_bc: RadialBc,
    pub outer_value: f64,
}

impl RadialProfile {
    /// Linear interpolation in r.
    pub fn at(&self, r: f64) -> f64 {
        let n = self.r.len();
        if r <= self.r[0] {
            return self.values[0];
        }
        if r >= self.r[n - 1] {
            return self.values[n - 1];
        }
        // grids are monotone; binary search for the cell
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.r[mid] <= r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = (r - self.r[lo]) / (self.r[hi] - self.r[lo]);
        self.values[lo] * (1.0 - t) + self.values[hi] * t
    }

    /// du/dr at the inner endpoint, one-sided second order.
    pub fn inner_derivative(&self) -> f64 {
        let d0 = self.r[1] - self.r[0];
        let d1 = self.r[2] - self.r[1];
        // three-point one-sided derivative on a (mildly) graded mesh
        let (u0, u1, u2) = (self.values[0], self.values[1], self.values[2]);
        let a = -(2.0 * d0 + d1) / (d0 * (d0 + d1));
        let b = (d0 + d1) / (d0 * d1);
        let c = -d0 / (d1 * (d0 + d1));
        a * u0 + b * u1 + c * u2
    }
}

fn thomas(sub: &[f64], diag: &mut [f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    for i in 1..n {
        let m = sub[i] / diag[i - 1];
        diag[i] -= m * sup[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
    }
}

/// Solves the radial problem with `n` intervals (n+1 nodes).
pub fn solve_radial(
    r_in: f64,
    r_out: f64,
    equation: RadialEquation,
    bc: (RadialBc, f64),
    f: impl Fn(f64) -> f64,
    n: usize,
) -> Result<RadialProfile, RadialError> {
    if !(r_in >= 0.0 && r_in < r_out && r_out.is_finite()) {
        return Err(RadialError::BadInterval(r_in, r_out));
    }
    let (inner_bc, outer_value) = bc;
    let c = match equation {
        RadialEquation::Screened => 1.0,
        RadialEquation::Poisson => 0.0,
    };
    match inner_bc {
        RadialBc::Dirichlet(g_in) => {
            if r_in <= 0.0 {
                return Err(RadialError::BadAxisCondition(r_in));
            }
            // log coordinates: −u_tt + r² c u = r² f
            let t0 = r_in.ln();
            let t1 = r_out.ln();
            let dt = (t1 - t0) / n as f64;
            let m = n - 1;
            let inv = 1.0 / (dt * dt);
            let mut sub = vec![-inv; m];
            let mut sup = vec![-inv; m];
            let mut diag = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            let mut r = Vec::with_capacity(n + 1);
            for i in 0..=n {
                r.push((t0 + i as f64 * dt).exp());
            }
            for i in 0..m {
                let ri = r[i + 1];
                diag[i] = 2.0 * inv + ri * ri * c;
                rhs[i] = ri * ri * f(ri);
            }
            rhs[0] += inv * g_in;
            rhs[m - 1] += inv * outer_value;
            sub[0] = 0.0;
            sup[m - 1] = 0.0;
            thomas(&sub, &mut diag, &sup, &mut rhs);
            let mut values = Vec::with_capacity(n + 1);
            values.push(g_in);
            values.extend_from_slice(&rhs);
            values.push(outer_value);
            Ok(RadialProfile {
                r,
                values,
                inner_bc,
                outer_value,
            })
        }
        RadialBc::SymmetryAxis => {
            if r_in != 0.0 {
                return Err(RadialError::BadAxisCondition(r_in));
            }
            let dr = r_out / n as f64;
            let inv = 1.0 / (dr * dr);
            // unknowns at i = 0..n-1 (node n is the Dirichlet end)
            let m = n;
            let mut sub = vec![0.0; m];
            let mut sup = vec![0.0; m];
            let mut diag = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            // r = 0: −Δu → −4u''(0) /2 … use the standard axis stencil
            // −4(u₁ − u₀)/dr² + c u₀ = f(0)
            diag[0] = 4.0 * inv + c;
            sup[0] = -4.0 * inv;
            rhs[0] = f(0.0);
            for i in 1..m {
                let ri = i as f64 * dr;
                sub[i] = -inv * (1.0 - dr / (2.0 * ri));
                sup[i] = -inv * (1.0 + dr / (2.0 * ri));
                diag[i] = 2.0 * inv + c;
                rhs[i] = f(ri);
            }
            rhs[m - 1] += inv * (1.0 + dr / (2.0 * (m as f64 - 1.0) * dr)) * outer_value;
            sup[m - 1] = 0.0;
            thomas(&sub, &mut diag, &sup, &mut rhs);
            let mut r = Vec::with_capacity(n + 1);
            let mut values = Vec::with_capacity(n + 1);
            for (i, v) in rhs.iter().enumerate() {
                r.push(i as f64 * dr);
                values.push(*v);
            }
            r.push(r_out);
            values.push(outer_value);
            Ok(RadialProfile {
                r,
                values,
                inner_bc,
                outer_value,
            })
        }
    }
}

pub const DEFAULT_RADIAL_POINTS: usize = 10_000;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::{bessel_i0, bessel_k0};

    /// Coefficients of C₁I₀ + C₂K₀ matching Dirichlet data at both ends.
    fn bessel_fit(r_in: f64, r_out: f64, g_in: f64, g_out: f64) -> (f64, f64) {
        let (a11, a12) = (bessel_i0(r_in), bessel_k0(r_in).unwrap());
        let (a21, a22) = (bessel_i0(r_out), bessel_k0(r_out).unwrap());
        let det = a11 * a22 - a12 * a21;
        (
            (g_in * a22 - a12 * g_out) / det,
            (a11 * g_out - g_in * a21) / det,
        )
    }

    #[test]
    fn screened_annulus_matches_bessel_combination() {
        let (delta, rout) = (0.05, 1.0);
        let prof = solve_radial(
            delta,
            rout,
            RadialEquation::Screened,
            (RadialBc::Dirichlet(1.0), 0.0),
            |_| 0.0,
            DEFAULT_RADIAL_POINTS,
        )
        .unwrap();
        let (c1, c2) = bessel_fit(delta, rout, 1.0, 0.0);
        let mut worst = 0.0_f64;
        for (i, &r) in prof.r.iter().enumerate() {
            let exact = c1 * bessel_i0(r) + c2 * bessel_k0(r).unwrap();
            worst = worst.max((prof.values[i] - exact).abs());
        }
        assert!(worst < 1e-8, "max abs error {worst}");
    }

    #[test]
    fn harmonic_annulus_is_logarithmic() {
        let prof = solve_radial(
            0.1,
            1.0,
            RadialEquation::Poisson,
            (RadialBc::Dirichlet(1.0), 0.0),
            |_| 0.0,
            DEFAULT_RADIAL_POINTS,
        )
        .unwrap();
        for (i, &r) in prof.r.iter().enumerate() {
            let exact = r.ln() / 0.1_f64.ln();
            assert!((prof.values[i] - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn unit_source_unit_bc_is_identity() {
        let prof = solve_radial(
            0.05,
            1.0,
            RadialEquation::Screened,
            (RadialBc::Dirichlet(1.0), 1.0),
            |_| 1.0,
            1000,
        )
        .unwrap();
        for v in &prof.values {
            assert!((v - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn axis_symmetric_disk_matches_bessel_ratio() {
        // −u'' − u'/r + u = 0, u'(0)=0, u(1)=1  →  I0(r)/I0(1)
        let prof = solve_radial(
            0.0,
            1.0,
            RadialEquation::Screened,
            (RadialBc::SymmetryAxis, 1.0),
            |_| 0.0,
            20_000,
        )
        .unwrap();
        let i01 = bessel_i0(1.0);
        for (i, &r) in prof.r.iter().enumerate().step_by(997) {
            let exact = bessel_i0(r) / i01;
            assert!((prof.values[i] - exact).abs() < 1e-7, "at r={r}");
        }
    }

    #[test]
    fn inner_derivative_matches_bessel_derivative() {
        let (delta, rout) = (0.05, 1.0);
        let prof = solve_radial(
            delta,
            rout,
            RadialEquation::Screened,
            (RadialBc::Dirichlet(1.0), 0.0),
            |_| 0.0,
            DEFAULT_RADIAL_POINTS,
        )
        .unwrap();
        let (c1, c2) = bessel_fit(delta, rout, 1.0, 0.0);
        let exact = c1 * crate::bessel::bessel_i1(delta)
            - c2 * crate::bessel::bessel_k1(delta).unwrap();
        let got = prof.inner_derivative();
        assert!(
            (got - exact).abs() < 1e-5 * exact.abs(),
            "{got} vs {exact}"
        );
    }

    #[test]
    fn rejects_bad_intervals() {
        assert!(solve_radial(
            1.0,
            0.5,
            RadialEquation::Poisson,
            (RadialBc::Dirichlet(0.0), 0.0),
            |_| 0.0,
            100
        )
        .is_err());
        assert!(solve_radial(
            0.5,
            1.0,
            RadialEquation::Poisson,
            (RadialBc::SymmetryAxis, 0.0),
            |_| 0.0,
            100
        )
        .is_err());
    }
}
