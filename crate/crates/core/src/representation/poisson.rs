//! Poisson kernel `P(y, v) = exp(alpha beta_v(x, y))`, the measures `mu_y` and `nu_y`,
//! and the Dirac–Weierstrass kernel checks.

use serde::{Deserialize, Serialize};

use super::StepFunction;
use crate::error::{Error, Result};
use crate::geometry::{busemann, point_towards, visual_dist, BoundaryDirection, DiskPoint};
use crate::measure::BinnedMeasure;
use crate::report::ConvergenceReport;

/// `P(y, v) = exp(alpha beta_v(x, y))`.
pub fn poisson_eval(y: DiskPoint, v: BoundaryDirection, x: DiskPoint, alpha: f64) -> f64 {
    (alpha * busemann(v, x, y)).exp()
}

/// `P_lambda f(y) = int P(y, v)^{lambda + 1/2} f(v) dmu_x(v)`.
pub fn p_lambda_apply(
    lambda: f64,
    f: &StepFunction,
    y: DiskPoint,
    x: DiskPoint,
    mu: &BinnedMeasure,
    alpha: f64,
) -> f64 {
    let part = mu.partition();
    let e = lambda + 0.5;
    mu.masses()
        .iter()
        .enumerate()
        .filter(|(_, m)| **m > 0.0)
        .map(|(i, m)| {
            poisson_eval(y, part.center_direction(i), x, alpha).powf(e) * f.values()[i] * m
        })
        .sum()
}

/// Bin masses `w_i m_i / sum_j w_j m_j` with `log w_i = power * alpha * beta_{v_i}(x, y)`.
fn normalized_weights(
    y: DiskPoint,
    mu: &BinnedMeasure,
    x: DiskPoint,
    alpha: f64,
    power: f64,
) -> Vec<f64> {
    let part = mu.partition();
    let logs: Vec<f64> = (0..part.bin_count())
        .map(|i| power * alpha * busemann(part.center_direction(i), x, y))
        .collect();
    let top = logs
        .iter()
        .zip(mu.masses())
        .filter(|(_, m)| **m > 0.0)
        .map(|(l, _)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs
        .iter()
        .zip(mu.masses())
        .map(|(l, m)| (l - top).exp() * m)
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

/// `mu_y / |mu_y|` realized by reweighting `mu_x` with `P(y, .)`.
pub fn conformal_at(
    y: DiskPoint,
    mu: &BinnedMeasure,
    x: DiskPoint,
    alpha: f64,
) -> Result<BinnedMeasure> {
    BinnedMeasure::new(mu.partition(), normalized_weights(y, mu, x, alpha, 1.0))
}

/// `d nu_y = P(y, .)^{1/2} / P_0 1(y) d mu_x`, a probability measure.
pub fn nu_measure(
    y: DiskPoint,
    mu: &BinnedMeasure,
    x: DiskPoint,
    alpha: f64,
) -> Result<BinnedMeasure> {
    BinnedMeasure::new(mu.partition(), normalized_weights(y, mu, x, alpha, 0.5))
}

/// The two kernels shown to form Dirac–Weierstrass families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DwKernel {
    /// `P^{1/2}(y, v) / P_0 1(y)`.
    SqrtPoisson,
    /// `P(y, v) / |mu_y|`.
    Poisson,
}

impl DwKernel {
    pub fn name(self) -> &'static str {
        match self {
            DwKernel::SqrtPoisson => "sqrt_poisson",
            DwKernel::Poisson => "poisson",
        }
    }

    /// `K(y, v_i)` at bin centers; zero off the support of `mu`.
    pub fn weights(self, y: DiskPoint, mu: &BinnedMeasure, x: DiskPoint, alpha: f64) -> Vec<f64> {
        let power = match self {
            DwKernel::SqrtPoisson => 0.5,
            DwKernel::Poisson => 1.0,
        };
        normalized_weights(y, mu, x, alpha, power)
            .into_iter()
            .zip(mu.masses())
            .map(|(w, m)| if *m > 0.0 { w / m } else { 0.0 })
            .collect()
    }
}

/// `K f(y) = int f K(y, .) dmu_x`, the extension of `f` into the disk.
pub fn kbar_apply(
    kernel: DwKernel,
    f: &StepFunction,
    y: DiskPoint,
    mu: &BinnedMeasure,
    x: DiskPoint,
    alpha: f64,
) -> f64 {
    let k = kernel.weights(y, mu, x, alpha);
    mu.integrate(
        &k.iter()
            .zip(f.values())
            .map(|(a, b)| a * b)
            .collect::<Vec<_>>(),
    )
}

/// Checks the three kernel conditions along the ray from `x` to `v0`.
///
/// Rows are indexed by the distance of the approach point; columns record
/// `|int K dmu - 1|`, `min K`, the mass outside the visual ball `B(v0, r0)` and
/// `|K f(y_t) - f(v0)|`.
#[allow(clippy::too_many_arguments)]
pub fn dw_family_check(
    kernel: DwKernel,
    mu: &BinnedMeasure,
    x: DiskPoint,
    alpha: f64,
    v0: BoundaryDirection,
    r0: f64,
    approach: &[f64],
    f: &StepFunction,
) -> Result<ConvergenceReport> {
    if approach.is_empty() {
        return Err(Error::OutOfRange("approach path is empty".into()));
    }
    let part = mu.partition();
    let outside: Vec<bool> = (0..part.bin_count())
        .map(|i| visual_dist(v0, part.center_direction(i), x) > r0)
        .collect();
    let target = f.value_at(v0.angle());
    let mut report = ConvergenceReport::new(
        &format!("dirac_weierstrass_{}", kernel.name()),
        "",
        &[
            "integral_error",
            "min_kernel",
            "tail_mass",
            "extension_error",
        ],
    )
    .param("r0", r0)
    .param("v0", v0.angle())
    .param("alpha", alpha);
    for &t in approach {
        let y = point_towards(x, v0, t);
        let k = kernel.weights(y, mu, x, alpha);
        let integral = mu.integrate(&k);
        let min = k.iter().cloned().fold(f64::INFINITY, f64::min);
        let tail: f64 = (0..k.len())
            .filter(|&i| outside[i])
            .map(|i| k[i] * mu.masses()[i])
            .sum();
        let ext = mu.integrate(
            &k.iter()
                .zip(f.values())
                .map(|(a, b)| a * b)
                .collect::<Vec<_>>(),
        );
        report.push(
            t.round() as u32,
            vec![(integral - 1.0).abs(), min, tail, (ext - target).abs()],
        );
    }
    let ints = report.column("integral_error").unwrap_or_default();
    let mins = report.column("min_kernel").unwrap_or_default();
    let tails = report.column("tail_mass").unwrap_or_default();
    let exts = report.column("extension_error").unwrap_or_default();
    let exact = ints.iter().all(|e| *e < 1e-12) && mins.iter().all(|m| *m >= 0.0);
    let decreasing = tails.windows(2).all(|w| w[1] < w[0]);
    let last_tail = *tails.last().unwrap_or(&f64::INFINITY);
    let last_ext = *exts.last().unwrap_or(&f64::INFINITY);
    report.set_verdict(
        exact && decreasing && last_tail < 0.05 && last_ext < 0.05,
        format!("tail {last_tail:.3e}, extension error {last_ext:.3e}, decreasing {decreasing}"),
    );
    Ok(report)
}
