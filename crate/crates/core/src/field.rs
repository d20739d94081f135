//! Node-, and edge-valued fields over a classified grid.
//!
//! A `ScalarField` stores one value per grid node (exterior nodes hold 0 and
//! are never read by quadrature). An `EdgeField` stores line integrals along
//! the two grid edges emanating from each node in the +x and +y directions,
//! which is the natural home for vector potentials in a link-variable
//! discretization.

use crate::domain::{ClassifiedGrid, NodeLabel};
use num_complex::Complex64;
use std::sync::Arc;

/// Node subset used by quadrature and inner products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// The perforated domain: interior nodes plus Dirichlet carriers.
    OmegaDelta,
    /// Everything inside the outer region, holes included.
    Omega,
}

pub fn region_contains(label: NodeLabel, region: Region) -> bool {
    match region {
        Region::OmegaDelta => matches!(
            label,
            NodeLabel::Interior | NodeLabel::DirichletOuter | NodeLabel::DirichletHole(_)
        ),
        Region::Omega => label != NodeLabel::Exterior,
    }
}

#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<ClassifiedGrid>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Arc<ClassifiedGrid>) -> Self {
        let n = grid.n_nodes();
        ScalarField {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn constant(grid: Arc<ClassifiedGrid>, v: f64) -> Self {
        let mut f = ScalarField::zeros(grid);
        for (i, lab) in f.grid.labels.iter().enumerate() {
            if *lab != NodeLabel::Exterior {
                f.values[i] = v;
            }
        }
        f
    }

    /// Builds a field from a function of position, set on all non-exterior nodes.
    pub fn from_fn(grid: Arc<ClassifiedGrid>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let mut out = ScalarField::zeros(grid);
        for i in 0..out.grid.n_nodes() {
            if out.grid.labels[i] != NodeLabel::Exterior {
                out.values[i] = f(out.grid.position(i));
            }
        }
        out
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid)
            || (self.grid.h == other.grid.h
                && self.grid.origin == other.grid.origin
                && self.grid.nx == other.grid.nx
                && self.grid.ny == other.grid.ny)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Bilinear interpolation at a point inside the covered region.
    pub fn bilinear(&self, p: [f64; 2]) -> f64 {
        let g = &self.grid;
        let fx = (p[0] - g.origin[0]) / g.h;
        let fy = (p[1] - g.origin[1]) / g.h;
        let ix = (fx.floor().max(0.0) as usize).min(g.nx - 2);
        let iy = (fy.floor().max(0.0) as usize).min(g.ny - 2);
        let tx = (fx - ix as f64).clamp(0.0, 1.0);
        let ty = (fy - iy as f64).clamp(0.0, 1.0);
        let v00 = self.values[g.node_index(ix, iy)];
        let v10 = self.values[g.node_index(ix + 1, iy)];
        let v01 = self.values[g.node_index(ix, iy + 1)];
        let v11 = self.values[g.node_index(ix + 1, iy + 1)];
        v00 * (1.0 - tx) * (1.0 - ty)
            + v10 * tx * (1.0 - ty)
            + v01 * (1.0 - tx) * ty
            + v11 * tx * ty
    }

    /// Writes `x,y,value` rows for non-exterior nodes.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,value")?;
        for i in 0..self.grid.n_nodes() {
            if self.grid.labels[i] != NodeLabel::Exterior {
                let p = self.grid.position(i);
                writeln!(w, "{},{},{}", p[0], p[1], self.values[i])?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ComplexField {
    pub grid: Arc<ClassifiedGrid>,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn constant(grid: Arc<ClassifiedGrid>, v: Complex64) -> Self {
        let n = grid.n_nodes();
        ComplexField {
            grid,
            values: vec![v; n],
        }
    }

    pub fn from_fn(grid: Arc<ClassifiedGrid>, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        let n = grid.n_nodes();
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            values.push(f(grid.position(i)));
        }
        ComplexField { grid, values }
    }
}

/// Line integrals of a vector field along grid edges. `ax[i]` belongs to the
/// edge from node i to its +x neighbor, `ay[i]` to the +y edge.
#[derive(Debug, Clone)]
pub struct EdgeField {
    pub grid: Arc<ClassifiedGrid>,
    pub ax: Vec<f64>,
    pub ay: Vec<f64>,
}

impl EdgeField {
    pub fn zeros(grid: Arc<ClassifiedGrid>) -> Self {
        let n = grid.n_nodes();
        EdgeField {
            grid,
            ax: vec![0.0; n],
            ay: vec![0.0; n],
        }
    }

    /// Plaquette circulation divided by cell area: the discrete curl at the
    /// cell whose lower-left corner is node (ix, iy).
    pub fn plaquette_curl(&self, ix: usize, iy: usize) -> f64 {
        let g = &self.grid;
        let p = g.node_index(ix, iy);
        let e = g.node_index(ix + 1, iy);
        let n = g.node_index(ix, iy + 1);
        (self.ax[p] + self.ay[e] - self.ax[n] - self.ay[p]) / (g.h * g.h)
    }

    /// Discrete divergence at a node, using only edges whose other endpoint
    /// is non-exterior; absent edges contribute zero normal flux.
    pub fn node_divergence(&self, ix: usize, iy: usize) -> f64 {
        let g = &self.grid;
        let flat = g.node_index(ix, iy);
        let mut s = 0.0;
        if ix + 1 < g.nx && g.labels[g.node_index(ix + 1, iy)] != NodeLabel::Exterior {
            s += self.ax[flat];
        }
        if ix > 0 && g.labels[g.node_index(ix - 1, iy)] != NodeLabel::Exterior {
            s -= self.ax[g.node_index(ix - 1, iy)];
        }
        if iy + 1 < g.ny && g.labels[g.node_index(ix, iy + 1)] != NodeLabel::Exterior {
            s += self.ay[flat];
        }
        if iy > 0 && g.labels[g.node_index(ix, iy - 1)] != NodeLabel::Exterior {
            s -= self.ay[g.node_index(ix, iy - 1)];
        }
        s / (g.h * g.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, PerforatedDomain};

    #[test]
    fn bilinear_reproduces_affine_fields() {
        let dom = PerforatedDomain::disk([0.0, 0.0], 1.0, vec![], 0.05);
        let grid = Arc::new(build_grid(&dom, 0.1).unwrap());
        let f = ScalarField::from_fn(grid.clone(), |p| 2.0 * p[0] - 3.0 * p[1] + 0.5);
        for p in [[0.03, 0.04], [-0.21, 0.17], [0.4, -0.33]] {
            let got = f.bilinear(p);
            let want = 2.0 * p[0] - 3.0 * p[1] + 0.5;
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn gradient_edge_field_is_curl_free() {
        let dom = PerforatedDomain::disk([0.0, 0.0], 1.0, vec![], 0.05);
        let grid = Arc::new(build_grid(&dom, 0.1).unwrap());
        // edge field = discrete gradient of a nodal potential
        let phi = ScalarField::from_fn(grid.clone(), |p| (p[0] * 1.3).sin() + p[1] * p[1]);
        let mut a = EdgeField::zeros(grid.clone());
        for iy in 0..grid.ny - 1 {
            for ix in 0..grid.nx - 1 {
                let i = grid.node_index(ix, iy);
                a.ax[i] = phi.values[grid.node_index(ix + 1, iy)] - phi.values[i];
                a.ay[i] = phi.values[grid.node_index(ix, iy + 1)] - phi.values[i];
            }
        }
        for iy in 5..grid.ny - 5 {
            for ix in 5..grid.nx - 5 {
                assert!(a.plaquette_curl(ix, iy).abs() < 1e-12);
            }
        }
    }
}
