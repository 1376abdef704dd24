//! Meshfree discretization of the 2D linear peridynamic solid (LPS).
//!
//! The pipeline is:
//!
//! 1. [`pointcloud`]: perturbed lattice over the unit square plus a Dirichlet
//!    collar, and δ-ball neighborhoods.
//! 2. [`quadrature`]: per-point least-norm quadrature weights that integrate a
//!    quadratic reproducing space exactly over the full ball.
//! 3. [`lps_model`]: bond breaking, the corrected dilitation and assembly of
//!    the coupled displacement/dilitation block system.
//! 4. [`solver`]: sparse direct solve with a residual certificate.
//! 5. [`analytic`]: exact solutions used for Dirichlet data and error norms.
//! 6. [`driver`]: end-to-end benchmark runs, convergence ladders and the
//!    material-contrast sweep.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod analytic;
pub mod driver;
pub mod error;
pub mod lps_model;
pub mod pointcloud;
pub mod quadrature;
pub mod solver;

pub use analytic::{AnalyticCase, ElasticModuli, HoleParams, InclusionParams};
pub use driver::{CaseKind, ConvergenceReport, GridKind, RunConfig, RunOutcome};
pub use error::{Error, Result};
pub use lps_model::{BlockSystem, BondSet, DilitationCorrection, LpsConstants, LpsOperator, MaterialField};
pub use pointcloud::{Circle, DomainSpec, Neighborhoods, PointCloud, Role};
pub use quadrature::{ConstraintBasis, KernelSpec, QuadratureFamily};
pub use solver::SolveReport;

/// 2D point / vector type used throughout.
pub type Vec2 = nalgebra::Vector2<f64>;
