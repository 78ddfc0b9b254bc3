//! The boundary representation on binned `L^2(mu_x)` and everything built from it.
//!
//! `(pi_x(g) xi)(v) = xi(g^{-1} v) exp(alpha/2 beta_v(x, g x))`, evaluated at bin
//! centers with `xi(g^{-1} v)` read from the bin containing `g^{-1} v`.
//! Busemann terms are computed in the frame where `x` is the origin:
//! for `g` with local matrix `(a, b)`, `exp(alpha/2 beta_v(x, g x)) = |b - conj(a) v'|^{-alpha}`
//! where `v'` is `v` seen from that frame.

pub mod cone;
pub mod experiments;
pub mod harish;
pub mod operators;
pub mod poisson;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{busemann, Arc, DiskPoint, MoebiusMap};
use crate::measure::{BinnedMeasure, BoundaryPartition};

/// Piecewise-constant function on a boundary partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    partition: BoundaryPartition,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(partition: BoundaryPartition, values: Vec<f64>) -> Result<Self> {
        if values.len() != partition.bin_count() {
            return Err(Error::PartitionMismatch(
                partition.bin_count(),
                values.len(),
            ));
        }
        Ok(StepFunction { partition, values })
    }

    pub fn constant(partition: BoundaryPartition, c: f64) -> Self {
        StepFunction {
            partition,
            values: vec![c; partition.bin_count()],
        }
    }

    /// Bin-center samples of `f(angle)`.
    pub fn from_fn(partition: BoundaryPartition, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..partition.bin_count())
            .map(|i| f(partition.center(i)))
            .collect();
        StepFunction { partition, values }
    }

    /// Indicator of a union of arcs, by bin center.
    pub fn indicator(partition: BoundaryPartition, arcs: &[Arc]) -> Self {
        StepFunction::from_fn(partition, |t| {
            if arcs.iter().any(|a| a.contains(t)) {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Piecewise constant on `pieces` equal arcs with uniform random levels in `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(
        partition: BoundaryPartition,
        pieces: usize,
        rng: &mut R,
    ) -> Self {
        let levels: Vec<f64> = (0..pieces).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = partition.bin_count();
        let values = (0..n).map(|i| levels[i * pieces / n]).collect();
        StepFunction { partition, values }
    }

    pub fn partition(&self) -> BoundaryPartition {
        self.partition
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value on the bin containing `angle`.
    pub fn value_at(&self, angle: f64) -> f64 {
        self.values[self.partition.bin_of(angle)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> StepFunction {
        StepFunction {
            partition: self.partition,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mul(&self, other: &StepFunction) -> StepFunction {
        StepFunction {
            partition: self.partition,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    fn check(&self, mu: &BinnedMeasure) -> Result<()> {
        if self.partition != mu.partition() {
            return Err(Error::PartitionMismatch(
                self.partition.bin_count(),
                mu.partition().bin_count(),
            ));
        }
        Ok(())
    }

    /// `int xi dmu`.
    pub fn integral(&self, mu: &BinnedMeasure) -> f64 {
        mu.integrate(&self.values)
    }

    /// `<self, other>` in `L^2(mu)`.
    pub fn inner(&self, other: &StepFunction, mu: &BinnedMeasure) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(mu.masses())
            .map(|((a, b), m)| a * b * m)
            .sum()
    }

    pub fn l2_norm(&self, mu: &BinnedMeasure) -> f64 {
        self.inner(self, mu).sqrt()
    }

    /// `sup |self - other|`.
    pub fn sup_distance(&self, other: &StepFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// The boundary representation `pi_x` on `L^2(mu_x)` of dimension `alpha`.
#[derive(Clone, Debug)]
pub struct BoundaryRep<'a> {
    mu: &'a BinnedMeasure,
    x: DiskPoint,
    alpha: f64,
    frame: MoebiusMap,
    local_centers: Vec<Complex64>,
    support: Vec<usize>,
}

impl<'a> BoundaryRep<'a> {
    pub fn new(mu: &'a BinnedMeasure, x: DiskPoint, alpha: f64) -> Self {
        let frame = MoebiusMap::transvection_to(x);
        let part = mu.partition();
        let local_centers = (0..part.bin_count())
            .map(|i| {
                frame
                    .inverse()
                    .apply_boundary(part.center_direction(i))
                    .to_complex()
            })
            .collect();
        BoundaryRep {
            mu,
            x,
            alpha,
            frame,
            local_centers,
            support: mu.support(0.0),
        }
    }

    pub fn mu(&self) -> &BinnedMeasure {
        self.mu
    }

    pub fn partition(&self) -> BoundaryPartition {
        self.mu.partition()
    }

    pub fn base_point(&self) -> DiskPoint {
        self.x
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Bins carrying positive mass; all quadratures run over these.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// `g` seen from the frame where `x` is the origin.
    pub fn local(&self, g: &MoebiusMap) -> MoebiusMap {
        self.frame.inverse().compose(g).compose(&self.frame)
    }

    /// `exp(alpha/2 beta_{v_i}(x, g x))` for a map `local` already in the `x` frame.
    #[inline]
    pub fn half_density(&self, local: &MoebiusMap, i: usize) -> f64 {
        (local.b() - local.a().conj() * self.local_centers[i])
            .norm()
            .powf(-self.alpha)
    }

    /// `pi_x(g) xi` at bin centers.
    pub fn pi_apply(&self, g: &MoebiusMap, xi: &StepFunction) -> StepFunction {
        let part = self.partition();
        let local = self.local(g);
        let inv = g.inverse();
        let values = (0..part.bin_count())
            .map(|i| {
                let src = inv.apply_boundary(part.center_direction(i));
                xi.value_at(src.angle()) * self.half_density(&local, i)
            })
            .collect();
        StepFunction {
            partition: part,
            values,
        }
    }

    /// `phi_x(g) = <pi_x(g) 1, 1>`.
    pub fn harish_chandra(&self, g: &MoebiusMap) -> f64 {
        let local = self.local(g);
        let m = self.mu.masses();
        self.support
            .iter()
            .map(|&i| self.half_density(&local, i) * m[i])
            .sum()
    }

    /// `<pi_x(g) xi, eta>` by bin quadrature.
    pub fn matrix_coefficient(&self, g: &MoebiusMap, xi: &StepFunction, eta: &StepFunction) -> f64 {
        let part = self.partition();
        let local = self.local(g);
        let inv = g.inverse();
        let m = self.mu.masses();
        self.support
            .iter()
            .map(|&i| {
                let src = inv.apply_boundary(part.center_direction(i));
                xi.value_at(src.angle()) * self.half_density(&local, i) * eta.values[i] * m[i]
            })
            .sum()
    }
}

/// Multiplication by `exp(-alpha/2 beta_v(x, y))`, the intertwiner `L^2(mu_x) -> L^2(mu_y)`.
pub fn intertwine(xi: &StepFunction, x: DiskPoint, y: DiskPoint, alpha: f64) -> StepFunction {
    let part = xi.partition();
    let values = (0..part.bin_count())
        .map(|i| xi.values[i] * (-0.5 * alpha * busemann(part.center_direction(i), x, y)).exp())
        .collect();
    StepFunction {
        partition: part,
        values,
    }
}

/// `sup ||U pi_x(g) xi - pi_y(g) U xi||_{mu_y} / ||xi||_{mu_x}` over the given maps and vectors.
pub fn intertwiner_check(
    x: DiskPoint,
    y: DiskPoint,
    mu_x: &BinnedMeasure,
    mu_y: &BinnedMeasure,
    alpha: f64,
    gammas: &[MoebiusMap],
    xis: &[StepFunction],
) -> Result<f64> {
    if mu_x.partition() != mu_y.partition() {
        return Err(Error::PartitionMismatch(
            mu_x.partition().bin_count(),
            mu_y.partition().bin_count(),
        ));
    }
    let rep_x = BoundaryRep::new(mu_x, x, alpha);
    let rep_y = BoundaryRep::new(mu_y, y, alpha);
    let mut worst: f64 = 0.0;
    for g in gammas {
        for xi in xis {
            xi.check(mu_x)?;
            let left = intertwine(&rep_x.pi_apply(g, xi), x, y, alpha);
            let right = rep_y.pi_apply(g, &intertwine(xi, x, y, alpha));
            let diff = StepFunction {
                partition: left.partition,
                values: left
                    .values
                    .iter()
                    .zip(&right.values)
                    .map(|(a, b)| a - b)
                    .collect(),
            };
            let norm = xi.l2_norm(mu_x);
            if norm > 0.0 {
                worst = worst.max(diff.l2_norm(mu_y) / norm);
            }
        }
    }
    Ok(worst)
}

/// Lebesgue measure, which is exactly conformal of dimension one for every isometry.
pub fn exact_conformal_measure(partition: BoundaryPartition, x: DiskPoint) -> BinnedMeasure {
    let origin = BinnedMeasure::uniform(partition, 1.0);
    if x == DiskPoint::ORIGIN {
        return origin;
    }
    origin.reweighted(|v| busemann(v, DiskPoint::ORIGIN, x).exp())
}
