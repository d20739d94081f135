//! Numerical solvers for the two-dimensional Ginzburg-Landau model of a
//! superconductor with small circular holes.
//!
//! The suite covers both sides of the degree-selection story:
//!
//! * the S¹-valued (London-limit) problem, where the induced magnetic field
//!   solves a screened-Poisson equation with one flux constraint per hole and
//!   the energy is an exactly quadratic polynomial of the integer hole
//!   degrees, minimized by integer search;
//! * the full ℂ-valued functional, minimized with a gauge-covariant
//!   link-variable discretization and nonlinear conjugate gradients, whose
//!   hole-vortex degrees are then measured by winding numbers on discrete
//!   loops.
//!
//! At fields h_ext = σ|log δ| the two selections agree away from the
//! threshold set where the optimal degree increments; the experiment
//! binaries in the companion CLI crate exercise exactly that comparison.

pub mod bessel;
pub mod domain;
pub mod elliptic;
pub mod field;
pub mod gl;
pub mod london;
pub mod radial;
pub mod vortex;

pub use bessel::{bessel, bessel_i0, bessel_i1, bessel_k0, bessel_k1, BesselEval};
pub use domain::{build_grid, circle_loop, ClassifiedGrid, DiscreteLoop, PerforatedDomain};
pub use field::{ComplexField, EdgeField, Region, ScalarField};
pub use london::{DegreeVector, LondonSolution, LondonSystem, QuadraticEnergyForm};
