//! Formation maneuver control with matrix-weighted (augmented) Laplacians.
//!
//! The crate builds constraint matrices whose edge weights have the form
//! `a·I + b·ζζᵀ + c·ζ×` for a rotation axis ζ, and simulates single-integrator
//! leader/follower protocols that translate, scale and rotate a formation
//! while keeping it in the kernel of that matrix. Rotation axes may be
//! switched mid-run and new agents may join.
//!
//! Module map:
//!
//! - [`geometry`]: skew maps, axis projectors, Rodrigues rotations.
//! - [`graph`]: interaction graph, roles, 2-rootedness, centroid.
//! - [`laplacian`]: weight synthesis, assembly, block partition, follower solve,
//!   planar specialization and the complex-Laplacian oracle.
//! - [`maneuver`]: piecewise maneuver profiles, target configurations, axis switches.
//! - [`sim`]: control laws, integrators, events, trajectory logs.
//! - [`scenario`]: JSON scenarios, run driver, CSV and SVG output.
//! - [`sweep`]: Monte Carlo property sweeps over random transforms and formations.

pub mod exec;
pub mod geometry;
pub mod graph;
pub mod laplacian;
pub mod maneuver;
pub mod presets;
pub mod scenario;
pub mod sim;
pub mod sweep;

pub use exec::Execution;
pub use geometry::{Mat3, RotationAxis, Vec3};
pub use graph::{Dimension, Formation, InteractionGraph, Role};
pub use laplacian::{AugmentedLaplacian, WeightCoeffs};
