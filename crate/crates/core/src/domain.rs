//! Perforated domains Ω_δ = Ω \ ∪ⱼB(aʲ,δ), classified Cartesian grids over
//! them, and discrete circular loops for winding-number measurement.
//!
//! Grid classification: a node is `Interior` when it lies strictly inside
//! Ω_δ. Non-interior nodes adjacent (4-neighborhood) to an interior node are
//! Dirichlet carriers, tagged by which boundary circle separates them. The
//! remaining nodes are `HoleInterior(j)` or `Exterior`. Every grid edge from
//! an interior node to a carrier stores the sub-cell fraction θ ∈ (0,1] at
//! which it crosses the boundary circle, so solvers can impose Dirichlet data
//! on the true circle rather than on the staircase ring.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Outer region Ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OuterShape {
    Disk { center: [f64; 2], radius: f64 },
    Rectangle { lo: [f64; 2], hi: [f64; 2] },
}

/// Ω with N circular holes of common radius δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerforatedDomain {
    pub outer: OuterShape,
    pub holes: Vec<[f64; 2]>,
    pub hole_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("hole radius {0} must be positive")]
    NonPositiveRadius(f64),
    #[error("holes {0} and {1} closer than 4*delta")]
    HoleOverlap(usize, usize),
    #[error("hole {0} within 2*delta of the outer boundary")]
    HoleTooCloseToBoundary(usize),
    #[error("grid spacing {h} exceeds delta/4 = {limit}")]
    ResolutionTooCoarse { h: f64, limit: f64 },
    #[error("circle (center ({0}, {1}), radius {2}) cannot be traced inside the domain")]
    LoopBroken(f64, f64, f64),
}

impl OuterShape {
    /// Signed distance to the outer boundary, positive inside.
    pub fn inside_distance(&self, p: [f64; 2]) -> f64 {
        match *self {
            OuterShape::Disk { center, radius } => {
                radius - ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt()
            }
            OuterShape::Rectangle { lo, hi } => (p[0] - lo[0])
                .min(hi[0] - p[0])
                .min(p[1] - lo[1])
                .min(hi[1] - p[1]),
        }
    }

    /// Axis-aligned bounding box.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            OuterShape::Disk { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            OuterShape::Rectangle { lo, hi } => (lo, hi),
        }
    }

    /// Fraction t ∈ (0,1] at which the segment p → p + step crosses the outer
    /// boundary, given that p is inside and p + step is not.
    fn crossing_fraction(&self, p: [f64; 2], step: [f64; 2]) -> f64 {
        match *self {
            OuterShape::Disk { center, radius } => {
                circle_crossing(p, step, center, radius)
            }
            OuterShape::Rectangle { lo, hi } => {
                let mut t = 1.0_f64;
                for axis in 0..2 {
                    if step[axis] > 0.0 {
                        t = t.min((hi[axis] - p[axis]) / step[axis]);
                    } else if step[axis] < 0.0 {
                        t = t.min((lo[axis] - p[axis]) / step[axis]);
                    }
                }
                t.clamp(f64::EPSILON, 1.0)
            }
        }
    }
}

/// Smallest positive root of |p + t·step − c|² = r².
fn circle_crossing(p: [f64; 2], step: [f64; 2], c: [f64; 2], r: f64) -> f64 {
    let dx = [p[0] - c[0], p[1] - c[1]];
    let a = step[0] * step[0] + step[1] * step[1];
    let b = 2.0 * (dx[0] * step[0] + dx[1] * step[1]);
    let q = dx[0] * dx[0] + dx[1] * dx[1] - r * r;
    let disc = (b * b - 4.0 * a * q).max(0.0).sqrt();
    let t1 = (-b - disc) / (2.0 * a);
    let t2 = (-b + disc) / (2.0 * a);
    let t = if t1 > 1e-12 { t1 } else { t2 };
    t.clamp(1e-12, 1.0)
}

impl PerforatedDomain {
    pub fn disk(center: [f64; 2], radius: f64, holes: Vec<[f64; 2]>, delta: f64) -> Self {
        PerforatedDomain {
            outer: OuterShape::Disk { center, radius },
            holes,
            hole_radius: delta,
        }
    }

    pub fn rectangle(lo: [f64; 2], hi: [f64; 2], holes: Vec<[f64; 2]>, delta: f64) -> Self {
        PerforatedDomain {
            outer: OuterShape::Rectangle { lo, hi },
            holes,
            hole_radius: delta,
        }
    }

    /// Same outer region, no holes. The unperforated Ω used by the screening
    /// profile ξ₀.
    pub fn without_holes(&self) -> Self {
        PerforatedDomain {
            outer: self.outer,
            holes: Vec::new(),
            hole_radius: self.hole_radius,
        }
    }

    pub fn n_holes(&self) -> usize {
        self.holes.len()
    }

    /// Checks the geometric invariants: δ > 0, pairwise hole separation
    /// ≥ 4δ, clearance ≥ 2δ between each hole and the outer boundary.
    pub fn validate(&self) -> Result<&Self, DomainError> {
        let d = self.hole_radius;
        if d <= 0.0 || !d.is_finite() {
            return Err(DomainError::NonPositiveRadius(d));
        }
        for (j, a) in self.holes.iter().enumerate() {
            let clearance = self.outer.inside_distance(*a) - d;
            if clearance < 2.0 * d {
                return Err(DomainError::HoleTooCloseToBoundary(j));
            }
        }
        for i in 0..self.holes.len() {
            for j in (i + 1)..self.holes.len() {
                let sep = ((self.holes[i][0] - self.holes[j][0]).powi(2)
                    + (self.holes[i][1] - self.holes[j][1]).powi(2))
                .sqrt();
                if sep < 4.0 * d {
                    return Err(DomainError::HoleOverlap(i, j));
                }
            }
        }
        Ok(self)
    }

    /// Largest R such that the balls B(aʲ,R) are pairwise disjoint and stay
    /// inside Ω. Sets the cutoff scale of the vortex-field ansatz.
    pub fn largest_free_radius(&self) -> f64 {
        let mut r = f64::INFINITY;
        for (i, a) in self.holes.iter().enumerate() {
            r = r.min(self.outer.inside_distance(*a));
            for b in self.holes.iter().skip(i + 1) {
                let sep = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                r = r.min(sep / 2.0);
            }
        }
        r
    }

    /// Index of the hole containing p, if any.
    pub fn hole_containing(&self, p: [f64; 2]) -> Option<usize> {
        let d2 = self.hole_radius * self.hole_radius;
        self.holes
            .iter()
            .position(|a| (p[0] - a[0]).powi(2) + (p[1] - a[1]).powi(2) <= d2)
    }
}

/// Per-node classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeLabel {
    Exterior,
    Interior,
    DirichletOuter,
    DirichletHole(u32),
    HoleInterior(u32),
}

/// Which boundary circle a grid edge crosses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArmKind {
    Outer,
    Hole(u32),
}

/// A grid edge from an interior node across a boundary circle.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryArm {
    /// Unknown index of the interior endpoint.
    pub unknown: u32,
    /// Flat node index of the interior endpoint.
    pub node: usize,
    /// Flat node index of the carrier (non-interior) endpoint.
    pub carrier: usize,
    /// Crossing fraction along the edge, in (0,1].
    pub theta: f64,
    /// Boundary point where the edge meets the circle.
    pub crossing: [f64; 2],
    pub kind: ArmKind,
}

/// Uniform Cartesian grid with classified nodes and boundary arms.
#[derive(Debug, Clone)]
pub struct ClassifiedGrid {
    pub h: f64,
    pub origin: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    pub labels: Vec<NodeLabel>,
    /// Node → unknown index (u32::MAX for non-interior nodes).
    pub unknown: Vec<u32>,
    /// Unknown index → flat node index.
    pub interior: Vec<usize>,
    pub arms: Vec<BoundaryArm>,
    /// Flat indices of DirichletHole(j) nodes, per hole.
    pub hole_rings: Vec<Vec<usize>>,
    pub n_holes: usize,
}

pub const NO_UNKNOWN: u32 = u32::MAX;

impl ClassifiedGrid {
    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn node_coords(&self, flat: usize) -> (usize, usize) {
        (flat % self.nx, flat / self.nx)
    }

    pub fn position(&self, flat: usize) -> [f64; 2] {
        let (ix, iy) = self.node_coords(flat);
        [
            self.origin[0] + ix as f64 * self.h,
            self.origin[1] + iy as f64 * self.h,
        ]
    }

    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_unknowns(&self) -> usize {
        self.interior.len()
    }

    pub fn label(&self, flat: usize) -> NodeLabel {
        self.labels[flat]
    }

    /// Nearest node to a point (clamped to the array).
    pub fn nearest_node(&self, p: [f64; 2]) -> (usize, usize) {
        let fx = ((p[0] - self.origin[0]) / self.h).round();
        let fy = ((p[1] - self.origin[1]) / self.h).round();
        let ix = (fx.max(0.0) as usize).min(self.nx - 1);
        let iy = (fy.max(0.0) as usize).min(self.ny - 1);
        (ix, iy)
    }

    /// Writes one `x,y,label` line per node, row-major.
    pub fn write_labels_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,label")?;
        for flat in 0..self.n_nodes() {
            let p = self.position(flat);
            let tag = match self.labels[flat] {
                NodeLabel::Exterior => "exterior".to_string(),
                NodeLabel::Interior => "interior".to_string(),
                NodeLabel::DirichletOuter => "dirichlet_outer".to_string(),
                NodeLabel::DirichletHole(j) => format!("dirichlet_hole_{j}"),
                NodeLabel::HoleInterior(j) => format!("hole_interior_{j}"),
            };
            writeln!(w, "{},{},{}", p[0], p[1], tag)?;
        }
        Ok(())
    }
}

/// Builds the classified grid over the validated domain. Requires h ≤ δ/4
/// when holes are present so each hole ring resolves into ≥ 16 carriers.
pub fn build_grid(domain: &PerforatedDomain, h: f64) -> Result<ClassifiedGrid, DomainError> {
    domain.validate()?;
    if !domain.holes.is_empty() && h > domain.hole_radius / 4.0 + 1e-14 {
        return Err(DomainError::ResolutionTooCoarse {
            h,
            limit: domain.hole_radius / 4.0,
        });
    }
    let (lo, hi) = domain.outer.bounding_box();
    // two-cell margin keeps the array edge strictly exterior
    let origin = [lo[0] - 2.0 * h, lo[1] - 2.0 * h];
    let nx = ((hi[0] - origin[0]) / h + 2.0).ceil() as usize + 1;
    let ny = ((hi[1] - origin[1]) / h + 2.0).ceil() as usize + 1;
    let n = nx * ny;

    let pos = |ix: usize, iy: usize| -> [f64; 2] {
        [origin[0] + ix as f64 * h, origin[1] + iy as f64 * h]
    };

    // pass 1: strict interior predicate
    let mut inside = vec![false; n];
    for iy in 0..ny {
        for ix in 0..nx {
            let p = pos(ix, iy);
            inside[iy * nx + ix] =
                domain.outer.inside_distance(p) > 0.0 && domain.hole_containing(p).is_none();
        }
    }

    // pass 2: labels, unknowns, arms
    let mut labels = vec![NodeLabel::Exterior; n];
    let mut unknown = vec![NO_UNKNOWN; n];
    let mut interior = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let flat = iy * nx + ix;
            if inside[flat] {
                labels[flat] = NodeLabel::Interior;
                unknown[flat] = interior.len() as u32;
                interior.push(flat);
            }
        }
    }
    let neighbor = |ix: usize, iy: usize, dir: usize| -> Option<(usize, usize)> {
        match dir {
            0 if ix + 1 < nx => Some((ix + 1, iy)),
            1 if ix > 0 => Some((ix - 1, iy)),
            2 if iy + 1 < ny => Some((ix, iy + 1)),
            3 if iy > 0 => Some((ix, iy - 1)),
            _ => None,
        }
    };
    for iy in 0..ny {
        for ix in 0..nx {
            let flat = iy * nx + ix;
            if inside[flat] {
                continue;
            }
            let adjacent = (0..4).any(|d| {
                neighbor(ix, iy, d).is_some_and(|(jx, jy)| inside[jy * nx + jx])
            });
            let p = pos(ix, iy);
            labels[flat] = match (domain.hole_containing(p), adjacent) {
                (Some(j), true) => NodeLabel::DirichletHole(j as u32),
                (Some(j), false) => NodeLabel::HoleInterior(j as u32),
                (None, true) => NodeLabel::DirichletOuter,
                (None, false) => NodeLabel::Exterior,
            };
        }
    }

    let mut arms = Vec::new();
    let steps = [[h, 0.0], [-h, 0.0], [0.0, h], [0.0, -h]];
    for (k, &flat) in interior.iter().enumerate() {
        let (ix, iy) = (flat % nx, flat / nx);
        let p = pos(ix, iy);
        for dir in 0..4 {
            let Some((jx, jy)) = neighbor(ix, iy, dir) else {
                continue;
            };
            let nb = jy * nx + jx;
            if inside[nb] {
                continue;
            }
            let step = steps[dir];
            let q = [p[0] + step[0], p[1] + step[1]];
            let (kind, theta) = match domain.hole_containing(q) {
                Some(j) => {
                    let t = circle_crossing(p, step, domain.holes[j], domain.hole_radius);
                    (ArmKind::Hole(j as u32), t)
                }
                None => {
                    let t = domain.outer.crossing_fraction(p, step);
                    (ArmKind::Outer, t)
                }
            };
            let theta = theta.clamp(1e-3, 1.0);
            arms.push(BoundaryArm {
                unknown: k as u32,
                node: flat,
                carrier: nb,
                theta,
                crossing: [p[0] + theta * step[0], p[1] + theta * step[1]],
                kind,
            });
        }
    }

    let mut hole_rings = vec![Vec::new(); domain.n_holes()];
    for (flat, lab) in labels.iter().enumerate() {
        if let NodeLabel::DirichletHole(j) = lab {
            hole_rings[*j as usize].push(flat);
        }
    }
    for ring in &hole_rings {
        if ring.len() < 16 {
            return Err(DomainError::ResolutionTooCoarse {
                h,
                limit: domain.hole_radius / 4.0,
            });
        }
    }

    Ok(ClassifiedGrid {
        h,
        origin,
        nx,
        ny,
        labels,
        unknown,
        interior,
        arms,
        hole_rings,
        n_holes: domain.n_holes(),
    })
}

/// Loop orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Ccw,
    Cw,
}

/// Simple closed chain of grid nodes approximating a circle. Consecutive
/// nodes are 8-neighbors; traversal order realizes the stored orientation.
#[derive(Debug, Clone)]
pub struct DiscreteLoop {
    pub nodes: Vec<usize>,
    pub orientation: Orientation,
    pub center: [f64; 2],
    pub radius: f64,
}

impl DiscreteLoop {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn reversed(&self) -> DiscreteLoop {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        DiscreteLoop {
            nodes,
            orientation: match self.orientation {
                Orientation::Ccw => Orientation::Cw,
                Orientation::Cw => Orientation::Ccw,
            },
            center: self.center,
            radius: self.radius,
        }
    }

    /// Total signed turning of the node polygon about the loop center,
    /// in units of full turns.
    pub fn geometric_winding(&self, grid: &ClassifiedGrid) -> f64 {
        let mut total = 0.0;
        for i in 0..self.nodes.len() {
            let a = grid.position(self.nodes[i]);
            let b = grid.position(self.nodes[(i + 1) % self.nodes.len()]);
            let ang_a = (a[1] - self.center[1]).atan2(a[0] - self.center[0]);
            let ang_b = (b[1] - self.center[1]).atan2(b[0] - self.center[0]);
            let mut d = ang_b - ang_a;
            while d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
            }
            while d <= -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
            }
            total += d;
        }
        total / (2.0 * std::f64::consts::PI)
    }
}

/// Traces the circle ∂B(center, R) as a counterclockwise chain of nearest
/// grid nodes. Fails with `LoopBroken` when the circle leaves the region
/// covered by interior/outer-carrier nodes or the chain degenerates.
pub fn circle_loop(
    grid: &ClassifiedGrid,
    center: [f64; 2],
    radius: f64,
) -> Result<DiscreteLoop, DomainError> {
    let broken = || DomainError::LoopBroken(center[0], center[1], radius);
    if radius <= 0.0 || radius < grid.h {
        return Err(broken());
    }
    // arc step <= h/2 keeps consecutive nearest nodes 8-adjacent
    let n_samples = ((2.0 * std::f64::consts::PI * radius) / (0.5 * grid.h)).ceil() as usize;
    let n_samples = n_samples.max(16);
    let mut chain: Vec<usize> = Vec::with_capacity(n_samples / 2);
    for s in 0..n_samples {
        let ang = 2.0 * std::f64::consts::PI * s as f64 / n_samples as f64;
        let p = [
            center[0] + radius * ang.cos(),
            center[1] + radius * ang.sin(),
        ];
        let (ix, iy) = grid.nearest_node(p);
        let flat = grid.node_index(ix, iy);
        if chain.last() != Some(&flat) {
            chain.push(flat);
        }
    }
    while chain.len() > 1 && chain.first() == chain.last() {
        chain.pop();
    }
    // remove a,b,a excursions left by Voronoi-edge jitter
    loop {
        let m = chain.len();
        if m < 3 {
            return Err(broken());
        }
        let mut removed = false;
        let mut i = 0;
        while i < chain.len() && chain.len() >= 3 {
            let m = chain.len();
            let prev = chain[(i + m - 1) % m];
            let next = chain[(i + 1) % m];
            if prev == next {
                let kill = [i, (i + 1) % m];
                let mut keep = Vec::with_capacity(m - 2);
                for (k, &v) in chain.iter().enumerate() {
                    if k != kill[0] && k != kill[1] {
                        keep.push(v);
                    }
                }
                chain = keep;
                removed = true;
            } else {
                i += 1;
            }
        }
        if !removed {
            break;
        }
    }
    // validate: simple, 8-connected, on allowed labels, winding +1
    let m = chain.len();
    {
        let mut sorted = chain.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != m {
            return Err(broken());
        }
    }
    for i in 0..m {
        let (ax, ay) = grid.node_coords(chain[i]);
        let (bx, by) = grid.node_coords(chain[(i + 1) % m]);
        if ax.abs_diff(bx) > 1 || ay.abs_diff(by) > 1 {
            return Err(broken());
        }
        match grid.labels[chain[i]] {
            NodeLabel::Interior | NodeLabel::DirichletOuter => {}
            _ => return Err(broken()),
        }
        let p = grid.position(chain[i]);
        let dist = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt();
        if (dist - radius).abs() > grid.h {
            return Err(broken());
        }
    }
    let lp = DiscreteLoop {
        nodes: chain,
        orientation: Orientation::Ccw,
        center,
        radius,
    };
    if (lp.geometric_winding(grid) - 1.0).abs() > 0.01 {
        return Err(broken());
    }
    Ok(lp)
}
