//! Winding numbers on discrete loops, hole-degree measurement, and a
//! discrete ball-construction style locator for bulk vortices.
//!
//! Windings are taken as sums of wrapped phase differences along the loop,
//! which yields exact integers after rounding as long as the pre-rounding
//! value stays close to ℤ; the allowed drift is 0.2 turns. Low-modulus nodes
//! are clustered by grid connectivity, wrapped in smallest enclosing disks,
//! and merged until pairwise disjoint; each disk gets a boundary winding
//! when a measuring loop just outside it exists.

use crate::domain::{circle_loop, ClassifiedGrid, DiscreteLoop, NodeLabel, PerforatedDomain};
use crate::field::ComplexField;
use crate::london::DegreeVector;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VortexError {
    #[error("order parameter modulus below floor at loop node {node}")]
    ZeroOnLoop { node: usize },
    #[error("winding sum {value:.3} turns is more than 0.2 from an integer")]
    AmbiguousWinding { value: f64 },
    #[error(transparent)]
    Domain(#[from] crate::domain::DomainError),
}

pub const MODULUS_FLOOR: f64 = 1e-8;
const WINDING_DRIFT_TOL: f64 = 0.2;

/// Integer winding of u/|u| along a discrete loop.
pub fn winding_number(u: &ComplexField, lp: &DiscreteLoop) -> Result<i64, VortexError> {
    let mut total = 0.0;
    let n = lp.nodes.len();
    for i in 0..n {
        let a = u.values[lp.nodes[i]];
        let b = u.values[lp.nodes[(i + 1) % n]];
        if a.norm() < MODULUS_FLOOR {
            return Err(VortexError::ZeroOnLoop { node: lp.nodes[i] });
        }
        total += (b * a.conj()).arg();
    }
    let turns = total / (2.0 * std::f64::consts::PI);
    let rounded = turns.round();
    if (turns - rounded).abs() > WINDING_DRIFT_TOL {
        return Err(VortexError::AmbiguousWinding { value: turns });
    }
    Ok(rounded as i64)
}

/// Hole degrees measured at several radii (given as multiples of δ).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HoleDegrees {
    /// (radius multiplier, degrees per hole)
    pub per_radius: Vec<(f64, DegreeVector)>,
    /// False when any hole disagrees across radii, which signals an
    /// uncaptured vortex in the annulus between the loops.
    pub consistent: bool,
}

pub fn hole_degrees(
    u: &ComplexField,
    grid: &Arc<ClassifiedGrid>,
    domain: &PerforatedDomain,
    radius_multipliers: &[f64],
) -> Result<HoleDegrees, VortexError> {
    let mut per_radius = Vec::with_capacity(radius_multipliers.len());
    for &m in radius_multipliers {
        let mut degrees = Vec::with_capacity(domain.n_holes());
        for a in &domain.holes {
            let lp = circle_loop(grid, *a, m * domain.hole_radius)?;
            degrees.push(winding_number(u, &lp)?);
        }
        per_radius.push((m, DegreeVector(degrees)));
    }
    let consistent = per_radius
        .windows(2)
        .all(|w| w[0].1 == w[1].1);
    Ok(HoleDegrees {
        per_radius,
        consistent,
    })
}

/// Disk wrapped around a cluster of low-modulus nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BadRegion {
    pub center: [f64; 2],
    pub radius: f64,
    /// Boundary winding, when a measuring loop just outside exists.
    pub degree: Option<i64>,
    pub min_modulus: f64,
}

fn circumcircle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> ([f64; 2], f64) {
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    if d.abs() < 1e-30 {
        // collinear: fall back to the widest pair
        let pairs = [(a, b), (a, c), (b, c)];
        let (p, q) = pairs
            .iter()
            .max_by(|(p1, q1), (p2, q2)| {
                let d1 = (p1[0] - q1[0]).powi(2) + (p1[1] - q1[1]).powi(2);
                let d2 = (p2[0] - q2[0]).powi(2) + (p2[1] - q2[1]).powi(2);
                d1.partial_cmp(&d2).unwrap()
            })
            .copied()
            .unwrap();
        let center = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
        let r = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt() / 2.0;
        return (center, r);
    }
    let a2 = a[0] * a[0] + a[1] * a[1];
    let b2 = b[0] * b[0] + b[1] * b[1];
    let c2 = c[0] * c[0] + c[1] * c[1];
    let ux = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d;
    let uy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d;
    let r = ((a[0] - ux).powi(2) + (a[1] - uy).powi(2)).sqrt();
    ([ux, uy], r)
}

fn inside(c: ([f64; 2], f64), p: [f64; 2]) -> bool {
    (p[0] - c.0[0]).powi(2) + (p[1] - c.0[1]).powi(2) <= (c.1 + 1e-12) * (c.1 + 1e-12)
}

/// Smallest enclosing disk by the incremental point/two-point/three-point
/// construction. Cluster sizes here are small, so no shuffling is needed.
fn smallest_enclosing_disk(points: &[[f64; 2]]) -> ([f64; 2], f64) {
    assert!(!points.is_empty());
    if points.len() == 1 {
        return (points[0], 0.0);
    }
    let two = |p: [f64; 2], q: [f64; 2]| {
        (
            [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0],
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt() / 2.0,
        )
    };
    let mut c = two(points[0], points[1]);
    for i in 2..points.len() {
        if inside(c, points[i]) {
            continue;
        }
        c = two(points[0], points[i]);
        for j in 1..i {
            if inside(c, points[j]) {
                continue;
            }
            c = two(points[j], points[i]);
            for k in 0..j {
                if inside(c, points[k]) {
                    continue;
                }
                c = circumcircle(points[k], points[j], points[i]);
            }
        }
    }
    c
}

/// Clusters the nodes of Ω_δ with |u| ≤ 1 − θ by 8-connectivity, wraps each
/// cluster in its smallest enclosing disk, merges overlapping disks until
/// pairwise disjoint, and measures each disk's boundary winding where
/// possible.
pub fn find_bad_regions(u: &ComplexField, theta: f64) -> Vec<BadRegion> {
    let grid = &u.grid;
    let nx = grid.nx;
    let cutoff = 1.0 - theta;
    let mut bad = vec![false; grid.n_nodes()];
    for flat in 0..grid.n_nodes() {
        if matches!(
            grid.labels[flat],
            NodeLabel::Interior | NodeLabel::DirichletOuter | NodeLabel::DirichletHole(_)
        ) && u.values[flat].norm() <= cutoff
        {
            bad[flat] = true;
        }
    }
    // 8-connected components
    let mut comp = vec![usize::MAX; grid.n_nodes()];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for start in 0..grid.n_nodes() {
        if !bad[start] || comp[start] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        let mut stack = vec![start];
        comp[start] = id;
        let mut members = Vec::new();
        while let Some(p) = stack.pop() {
            members.push(p);
            let (ix, iy) = grid.node_coords(p);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let jx = ix as i64 + dx;
                    let jy = iy as i64 + dy;
                    if jx < 0 || jy < 0 || jx >= nx as i64 || jy >= grid.ny as i64 {
                        continue;
                    }
                    let q = jy as usize * nx + jx as usize;
                    if bad[q] && comp[q] == usize::MAX {
                        comp[q] = id;
                        stack.push(q);
                    }
                }
            }
        }
        clusters.push(members);
    }

    // wrap clusters, then merge overlapping disks (union-find) to disjointness
    let mut sets: Vec<Vec<usize>> = clusters;
    let mut disks: Vec<([f64; 2], f64)> = sets
        .iter()
        .map(|members| {
            let pts: Vec<[f64; 2]> = members.iter().map(|&m| grid.position(m)).collect();
            let (c, r) = smallest_enclosing_disk(&pts);
            (c, r + grid.h / 2.0)
        })
        .collect();
    loop {
        let mut merged = false;
        'outer: for i in 0..disks.len() {
            for j in (i + 1)..disks.len() {
                let dist = ((disks[i].0[0] - disks[j].0[0]).powi(2)
                    + (disks[i].0[1] - disks[j].0[1]).powi(2))
                .sqrt();
                if dist < disks[i].1 + disks[j].1 {
                    let moved = sets.swap_remove(j);
                    sets[i].extend(moved);
                    disks.swap_remove(j);
                    let pts: Vec<[f64; 2]> =
                        sets[i].iter().map(|&m| grid.position(m)).collect();
                    let (c, r) = smallest_enclosing_disk(&pts);
                    disks[i] = (c, r + grid.h / 2.0);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }

    let mut out = Vec::with_capacity(sets.len());
    for (members, (center, radius)) in sets.iter().zip(&disks) {
        let min_modulus = members
            .iter()
            .map(|&m| u.values[m].norm())
            .fold(f64::INFINITY, f64::min);
        let probe_radius = radius + 2.0 * grid.h;
        let degree = circle_loop(grid, *center, probe_radius)
            .ok()
            .and_then(|lp| winding_number(u, &lp).ok());
        out.push(BadRegion {
            center: *center,
            radius: *radius,
            degree,
            min_modulus,
        });
    }
    out
}

/// Vortex survey of a converged state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VortexReport {
    pub hole_degrees: DegreeVector,
    pub bad_regions: Vec<BadRegion>,
    /// Σ|degree| over regions lying fully inside Ω_δ.
    pub bulk_degree_sum: i64,
}

pub fn build_report(
    u: &ComplexField,
    grid: &Arc<ClassifiedGrid>,
    domain: &PerforatedDomain,
    theta: f64,
) -> Result<VortexReport, VortexError> {
    let hd = hole_degrees(u, grid, domain, &[2.0])?;
    let bad_regions = find_bad_regions(u, theta);
    let bulk_degree_sum = bad_regions
        .iter()
        .filter(|r| region_inside_omega_delta(r, domain))
        .filter_map(|r| r.degree)
        .map(|d| d.abs())
        .sum();
    Ok(VortexReport {
        hole_degrees: hd.per_radius[0].1.clone(),
        bad_regions,
        bulk_degree_sum,
    })
}

fn region_inside_omega_delta(r: &BadRegion, domain: &PerforatedDomain) -> bool {
    if domain.outer.inside_distance(r.center) < r.radius {
        return false;
    }
    for a in &domain.holes {
        let d = ((r.center[0] - a[0]).powi(2) + (r.center[1] - a[1]).powi(2)).sqrt();
        if d < r.radius + domain.hole_radius {
            return false;
        }
    }
    true
}

/// Outcome of the bulk-vortex check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BulkCheck {
    pub pass: bool,
    /// Regions that are away from every hole collar yet carry degree ≠ 0.
    pub offending: Vec<BadRegion>,
}

/// Passes iff every bad region either touches a hole collar (within 4δ of a
/// hole center) or carries zero degree.
pub fn assert_no_bulk_vortices(
    report: &VortexReport,
    domain: &PerforatedDomain,
) -> BulkCheck {
    let collar = 4.0 * domain.hole_radius;
    let mut offending = Vec::new();
    for r in &report.bad_regions {
        let touches_collar = domain.holes.iter().any(|a| {
            let d = ((r.center[0] - a[0]).powi(2) + (r.center[1] - a[1]).powi(2)).sqrt();
            d - r.radius < collar
        });
        if touches_collar {
            continue;
        }
        match r.degree {
            Some(0) => {}
            _ => offending.push(r.clone()),
        }
    }
    BulkCheck {
        pass: offending.is_empty(),
        offending,
    }
}
