//! Cones `C_R(x, U)` over boundary arcs and the interior test functions built from them.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{hyp_dist, shadow_arc, Arc, DiskPoint};

/// `C_R(x, U) = { y : O_R(x, y) meets U }` for a finite union of arcs `U`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSet {
    pub base_arcs: Vec<Arc>,
    pub radius: f64,
}

impl ConeSet {
    pub fn new(base_arcs: Vec<Arc>, radius: f64) -> Self {
        ConeSet { base_arcs, radius }
    }

    /// Membership of the interior point `y`; fails for `y == x`.
    pub fn contains(&self, x: DiskPoint, y: DiskPoint) -> Result<bool> {
        cone_indicator(y, &self.base_arcs, self.radius, x).map(|v| v == 1)
    }

    /// Membership of a boundary angle, i.e. of `U` itself.
    pub fn contains_boundary(&self, angle: f64) -> bool {
        self.base_arcs.iter().any(|a| a.contains(angle))
    }
}

/// 1 if the shadow `O_R(x, y)` meets one of the arcs, else 0.
pub fn cone_indicator(y: DiskPoint, arcs: &[Arc], radius: f64, x: DiskPoint) -> Result<u8> {
    let shadow = shadow_arc(x, y, radius)?;
    Ok(arcs.iter().any(|a| a.intersects(&shadow)) as u8)
}

/// Functions on the closed disk that annulus averages can weight by.
#[derive(Clone, Debug)]
pub enum InteriorFunction {
    Constant(f64),
    /// Indicator of `C_R(x, U) ∪ U`.
    Cone(ConeSet),
    /// `y -> profile(d(x, y))`.
    Radial(fn(f64) -> f64),
}

impl InteriorFunction {
    pub fn eval(&self, x: DiskPoint, y: DiskPoint) -> Result<f64> {
        match self {
            InteriorFunction::Constant(c) => Ok(*c),
            InteriorFunction::Cone(cone) => Ok(cone.contains(x, y)? as u8 as f64),
            InteriorFunction::Radial(profile) => Ok(profile(hyp_dist(x, y))),
        }
    }
}
