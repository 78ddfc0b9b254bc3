//! Hyperbolic-disk laboratory for boundary representations of Schottky groups.
//!
//! The crate is organized bottom-up: [`geometry`] holds closed-form disk
//! geometry, [`group`] builds ping-pong groups and enumerates orbits,
//! [`measure`] bins Patterson densities on the boundary circle and
//! [`representation`] evaluates the boundary representation, its matrix
//! coefficients and the equidistribution averages built from them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod group;
pub mod measure;
pub mod report;
pub mod representation;

pub use error::{Error, Result};

/// Version of this crate, recorded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use geometry::{
    busemann, conformal_factor, gromov_product, hyp_dist, identity_audit, shadow_arc, visual_dist,
    Arc, BoundaryDirection, DiskPoint, GeometryContext, IdentityAudit, MoebiusMap, Point,
};
pub use group::{
    enumerate_orbit, enumerate_orbit_with, estimate_alpha, growth_report, predict_orbit_size,
    AnnulusSpec, BoundaryDisk, EnumerationOptions, GroupModel, OrbitCatalog, OrbitPoint,
};
pub use measure::{patterson_measure, shell_measure, BinnedMeasure, BoundaryPartition};
pub use report::ConvergenceReport;
pub use representation::cone::ConeSet;
pub use representation::experiments::{Family, Setup};
pub use representation::poisson::DwKernel;
pub use representation::{BoundaryRep, StepFunction};
