//! Binned boundary measures and Patterson densities.
//!
//! The circle is cut into `2^k` equal angular bins. A measure is a mass per bin,
//! spread uniformly inside the bin when intersected with arcs, so arc masses
//! prorate partial bins linearly.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    busemann, hyp_dist, shadow_arc, Arc, BoundaryDirection, DiskPoint, MoebiusMap,
};
use crate::group::{OrbitCatalog, OrbitPoint};

/// Orbit points per histogram chunk; fixed so that sums do not depend on the thread count.
const CHUNK: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryPartition {
    bin_count: usize,
}

impl BoundaryPartition {
    /// A partition into `bin_count` equal arcs; `bin_count` must be a power of two >= 256.
    pub fn new(bin_count: usize) -> Result<Self> {
        if bin_count < 256 || !bin_count.is_power_of_two() {
            return Err(Error::InvalidPartition(bin_count));
        }
        Ok(BoundaryPartition { bin_count })
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    pub fn bin_width(&self) -> f64 {
        TAU / self.bin_count as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.bin_width()
    }

    pub fn center_direction(&self, i: usize) -> BoundaryDirection {
        BoundaryDirection::new(self.center(i))
    }

    pub fn bin_of(&self, angle: f64) -> usize {
        let a = angle.rem_euclid(TAU);
        ((a / self.bin_width()) as usize).min(self.bin_count - 1)
    }

    fn check(&self, other: &BoundaryPartition) -> Result<()> {
        if self != other {
            return Err(Error::PartitionMismatch(self.bin_count, other.bin_count));
        }
        Ok(())
    }

    /// Calls `visit(bin, fraction)` for every bin met by the ccw arc from `start`
    /// of length `width`, with the fraction of the arc's length inside the bin.
    fn walk(&self, start: f64, width: f64, mut visit: impl FnMut(usize, f64)) {
        if width <= 0.0 {
            visit(self.bin_of(start), 1.0);
            return;
        }
        let w = self.bin_width();
        let s = start.rem_euclid(TAU);
        let mut pos = s;
        let end = s + width.min(TAU);
        let mut k = (pos / w).floor();
        if (k + 1.0) * w <= pos {
            k += 1.0;
        }
        while pos < end {
            let bin_end = ((k + 1.0) * w).min(end);
            let piece = bin_end - pos;
            if piece > 0.0 {
                visit((k as usize) % self.bin_count, piece / width);
            }
            pos = bin_end;
            k += 1.0;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinnedMeasure {
    partition: BoundaryPartition,
    masses: Vec<f64>,
    total: f64,
    /// Set when the measure came from a catalog without any nontrivial orbit point.
    pub degenerate: bool,
}

impl BinnedMeasure {
    pub fn new(partition: BoundaryPartition, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != partition.bin_count() {
            return Err(Error::PartitionMismatch(
                partition.bin_count(),
                masses.len(),
            ));
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidMeasure(
                "masses must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("total mass must be positive".into()));
        }
        Ok(BinnedMeasure {
            partition,
            masses,
            total,
            degenerate: false,
        })
    }

    /// Lebesgue measure scaled to total mass `total`.
    pub fn uniform(partition: BoundaryPartition, total: f64) -> Self {
        let m = total / partition.bin_count() as f64;
        BinnedMeasure::new(partition, vec![m; partition.bin_count()])
            .expect("uniform masses are valid")
    }

    pub fn partition(&self) -> BoundaryPartition {
        self.partition
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn normalized(&self) -> BinnedMeasure {
        let masses = self.masses.iter().map(|m| m / self.total).collect();
        BinnedMeasure {
            partition: self.partition,
            masses,
            total: 1.0,
            degenerate: self.degenerate,
        }
    }

    pub fn scaled(&self, factor: f64) -> BinnedMeasure {
        BinnedMeasure {
            partition: self.partition,
            masses: self.masses.iter().map(|m| m * factor).collect(),
            total: self.total * factor,
            degenerate: self.degenerate,
        }
    }

    /// `sum_i values[i] * mass_i`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.masses).map(|(v, m)| v * m).sum()
    }

    /// Mass of a closed arc, partial bins prorated linearly.
    pub fn arc_mass(&self, arc: &Arc) -> f64 {
        if arc.is_full() {
            return self.total;
        }
        let width = arc.length();
        let bw = self.partition.bin_width();
        let mut mass = 0.0;
        self.partition.walk(arc.start(), width, |bin, frac| {
            mass += self.masses[bin] * (frac * width / bw).min(1.0);
        });
        mass
    }

    /// Total variation `1/2 sum |p_i - q_i|` between the normalized measures.
    pub fn tv_distance(&self, other: &BinnedMeasure) -> Result<f64> {
        self.partition.check(&other.partition)?;
        Ok(0.5
            * self
                .masses
                .iter()
                .zip(&other.masses)
                .map(|(p, q)| (p / self.total - q / other.total).abs())
                .sum::<f64>())
    }

    /// Bins carrying more than `fraction` of the total mass.
    pub fn support(&self, fraction: f64) -> Vec<usize> {
        let floor = fraction * self.total;
        (0..self.masses.len())
            .filter(|&i| self.masses[i] > floor)
            .collect()
    }

    /// `g_* mu`: the mass of each bin is spread uniformly over the image arc of the bin.
    pub fn push_forward(&self, g: &MoebiusMap) -> BinnedMeasure {
        let part = self.partition;
        let w = part.bin_width();
        let mut out = vec![0.0; part.bin_count()];
        for (i, &m) in self.masses.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let a = g
                .apply_boundary(BoundaryDirection::new(i as f64 * w))
                .angle();
            let b = g
                .apply_boundary(BoundaryDirection::new((i + 1) as f64 * w))
                .angle();
            let width = (b - a).rem_euclid(TAU);
            part.walk(a, width, |bin, frac| out[bin] += m * frac);
        }
        BinnedMeasure {
            partition: part,
            total: out.iter().sum(),
            masses: out,
            degenerate: self.degenerate,
        }
    }

    /// Density reweighting `w(v_i) * mass_i` at bin centers.
    pub fn reweighted(&self, weight: impl Fn(BoundaryDirection) -> f64) -> BinnedMeasure {
        let masses: Vec<f64> = (0..self.masses.len())
            .map(|i| self.masses[i] * weight(self.partition.center_direction(i)))
            .collect();
        BinnedMeasure {
            partition: self.partition,
            total: masses.iter().sum(),
            masses,
            degenerate: self.degenerate,
        }
    }

    /// The measure rotated by `bins` whole bins counterclockwise.
    pub fn rotated_bins(&self, bins: usize) -> BinnedMeasure {
        let n = self.masses.len();
        let mut masses = vec![0.0; n];
        for (i, &m) in self.masses.iter().enumerate() {
            masses[(i + bins) % n] = m;
        }
        BinnedMeasure {
            masses,
            ..self.clone()
        }
    }

    /// CSV export: a metadata header, then `bin_index,center_angle,mass` rows.
    pub fn to_csv(&self, alpha: f64, s_offset: f64, depth: f64) -> String {
        let mut out = String::from("bin_count,total,alpha,s_offset,depth\n");
        let _ = writeln!(
            out,
            "{},{:.16e},{alpha:.16e},{s_offset:.16e},{depth:.16e}",
            self.partition.bin_count(),
            self.total
        );
        out.push_str("bin_index,center_angle,mass\n");
        for (i, m) in self.masses.iter().enumerate() {
            let _ = writeln!(out, "{i},{:.16e},{m:.16e}", self.partition.center(i));
        }
        out
    }
}

/// Radial projection from the base point of `gamma x`, via the local frame.
///
/// The identity projects to the image of angle 0 under the transvection to `x`.
pub fn orbit_projection(frame: &MoebiusMap, p: &OrbitPoint) -> BoundaryDirection {
    let (a, b) = (p.local.a(), p.local.b());
    let local = if b.norm() == 0.0 {
        0.0
    } else {
        b.arg() + a.arg()
    };
    frame.apply_boundary(BoundaryDirection::new(local))
}

/// Histogram of `weight(p)` at the radial projections of the catalog points.
///
/// Chunks of fixed size are reduced in parallel and merged in catalog order.
pub fn orbit_histogram(
    cat: &OrbitCatalog,
    part: BoundaryPartition,
    weight: impl Fn(&OrbitPoint) -> f64 + Sync,
) -> Vec<f64> {
    let frame = MoebiusMap::transvection_to(cat.base_point());
    let partial: Vec<Vec<(usize, f64)>> = cat
        .points()
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(|p| (part.bin_of(orbit_projection(&frame, p).angle()), weight(p)))
                .collect()
        })
        .collect();
    let mut masses = vec![0.0; part.bin_count()];
    for chunk in partial {
        for (bin, w) in chunk {
            masses[bin] += w;
        }
    }
    masses
}

/// Patterson approximation `sum_gamma e^{-s d(x, gamma x)} delta_{proj(gamma x)}`
/// with `s = alpha + s_offset`.
pub fn patterson_measure(
    cat: &OrbitCatalog,
    alpha: f64,
    s_offset: f64,
    part: BoundaryPartition,
) -> Result<BinnedMeasure> {
    if cat.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    if !(s_offset > 0.0) {
        return Err(Error::OutOfRange(format!(
            "s_offset must be positive, got {s_offset}"
        )));
    }
    let s = alpha + s_offset;
    let degenerate = cat.points().iter().all(|p| p.word.is_empty());
    let masses = orbit_histogram(cat, part, |p| {
        if p.word.is_empty() && !degenerate {
            0.0
        } else {
            (-s * p.dist).exp()
        }
    });
    let mut mu = BinnedMeasure::new(part, masses)?;
    mu.degenerate = degenerate;
    Ok(mu)
}

/// Orbital measure of the outer shell `max_dist - width < d <= max_dist` with weights
/// `e^{-alpha d}`.
///
/// Unlike the truncated Poincaré sum, every ball of radius `e^{-t}` with `t` below the
/// shell gets its full share of mass, so the measure stays close to `alpha`-regular
/// down to the depth of the catalog.
pub fn shell_measure(
    cat: &OrbitCatalog,
    alpha: f64,
    width: f64,
    part: BoundaryPartition,
) -> Result<BinnedMeasure> {
    if !(width > 0.0) {
        return Err(Error::OutOfRange(format!(
            "shell width must be positive, got {width}"
        )));
    }
    let inner = cat.max_dist() - width;
    if cat
        .points()
        .iter()
        .all(|p| p.dist <= inner || p.word.is_empty())
    {
        return Err(Error::InsufficientDepth(format!(
            "no orbit point in the shell ({inner}, {}]",
            cat.max_dist()
        )));
    }
    let masses = orbit_histogram(cat, part, |p| {
        if p.dist > inner && !p.word.is_empty() {
            (-alpha * p.dist).exp()
        } else {
            0.0
        }
    });
    BinnedMeasure::new(part, masses)
}

/// The same orbital sum seen from `y`: weights `e^{-s d(y, gamma x)}` over the ball
/// `d(y, gamma x) <= max_dist - d(x, y)`, which the catalog covers completely.
/// Projections are still taken from `x`; the point `gamma x = y` is skipped.
pub fn rebased_measure(
    cat: &OrbitCatalog,
    y: DiskPoint,
    alpha: f64,
    s_offset: f64,
    part: BoundaryPartition,
) -> Result<BinnedMeasure> {
    if cat.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    let s = alpha + s_offset;
    let radius = cat.max_dist() - hyp_dist(cat.base_point(), y);
    let masses = orbit_histogram(cat, part, |p| {
        let d = hyp_dist(y, p.image);
        if d > radius || d < 1e-9 {
            0.0
        } else {
            (-s * d).exp()
        }
    });
    BinnedMeasure::new(part, masses)
}

/// Median of `values` under the weights `weights`.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    let mut pairs: Vec<(f64, f64)> = values
        .iter()
        .copied()
        .zip(weights.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = 0.5 * pairs.iter().map(|p| p.1).sum::<f64>();
    let mut acc = 0.0;
    for (v, w) in &pairs {
        acc += w;
        if acc >= half {
            return *v;
        }
    }
    pairs.last().map(|p| p.0).unwrap_or(0.0)
}

/// Weighted median of per-bin relative errors `|actual/expected - 1|`, weighted by
/// `actual`, skipping bins below `1e-9` of the total.
fn relative_error_median(actual: &BinnedMeasure, expected: &BinnedMeasure) -> (f64, usize) {
    let floor_a = 1e-9 * actual.total();
    let floor_e = 1e-9 * expected.total();
    let mut errs = Vec::new();
    let mut weights = Vec::new();
    for (a, e) in actual.masses().iter().zip(expected.masses()) {
        if *a <= floor_a || *e <= floor_e {
            continue;
        }
        errs.push((a / e - 1.0).abs());
        weights.push(*a);
    }
    (weighted_median(&errs, &weights), errs.len())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityAudit {
    /// Weighted median of per-bin relative errors.
    pub median_error: f64,
    pub bins_used: usize,
}

/// Compares `mu_y / mu_x` per bin with `exp(alpha beta_v(x, y))` at bin centers.
pub fn conformality_check(
    cat: &OrbitCatalog,
    alpha: f64,
    s_offset: f64,
    part: BoundaryPartition,
    y: DiskPoint,
) -> Result<DensityAudit> {
    let x = cat.base_point();
    let mu_x = patterson_measure(
        &cat.truncated(cat.max_dist() - hyp_dist(x, y)),
        alpha,
        s_offset,
        part,
    )?;
    let mu_y = rebased_measure(cat, y, alpha, s_offset, part)?;
    let predicted = mu_x.reweighted(|v| (alpha * busemann(v, x, y)).exp());
    let (median_error, bins_used) = relative_error_median(&mu_y, &predicted);
    Ok(DensityAudit {
        median_error,
        bins_used,
    })
}

/// `g_*` of the Patterson sum, applied to the orbital atoms before binning.
pub fn patterson_push_forward(
    cat: &OrbitCatalog,
    g: &MoebiusMap,
    alpha: f64,
    s_offset: f64,
    part: BoundaryPartition,
) -> Result<BinnedMeasure> {
    if cat.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    let s = alpha + s_offset;
    let frame = MoebiusMap::transvection_to(cat.base_point());
    let partial: Vec<Vec<(usize, f64)>> = cat
        .points()
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .filter(|p| !p.word.is_empty())
                .map(|p| {
                    let v = g.apply_boundary(orbit_projection(&frame, p));
                    (part.bin_of(v.angle()), (-s * p.dist).exp())
                })
                .collect()
        })
        .collect();
    let mut masses = vec![0.0; part.bin_count()];
    for (bin, w) in partial.into_iter().flatten() {
        masses[bin] += w;
    }
    BinnedMeasure::new(part, masses)
}

/// Compares `mu_{g x}` (rebased orbital sum) with the pushforward `g_* mu_x`,
/// both summed over balls of equal radius about their own base point.
pub fn invariance_check(
    cat: &OrbitCatalog,
    alpha: f64,
    s_offset: f64,
    part: BoundaryPartition,
    g: &MoebiusMap,
) -> Result<DensityAudit> {
    let x = cat.base_point();
    let gx = g.apply(x);
    let inner = cat.truncated(cat.max_dist() - hyp_dist(x, gx));
    let pushed = patterson_push_forward(&inner, g, alpha, s_offset, part)?;
    let mu_gx = rebased_measure(cat, gx, alpha, s_offset, part)?;
    let (median_error, bins_used) = relative_error_median(&mu_gx, &pushed);
    Ok(DensityAudit {
        median_error,
        bins_used,
    })
}

/// Total variation between the Patterson measures at `(depth, s_offset)` and
/// `(depth + 2, s_offset / 2)`; `cat` must reach `depth + 2`.
pub fn cauchy_check(
    cat: &OrbitCatalog,
    alpha: f64,
    s_offset: f64,
    depth: f64,
    part: BoundaryPartition,
) -> Result<f64> {
    if cat.max_dist() < depth + 2.0 - 1e-12 {
        return Err(Error::InsufficientDepth(format!(
            "catalog reaches {}, need {}",
            cat.max_dist(),
            depth + 2.0
        )));
    }
    let coarse = patterson_measure(&cat.truncated(depth), alpha, s_offset, part)?;
    let fine = patterson_measure(&cat.truncated(depth + 2.0), alpha, 0.5 * s_offset, part)?;
    coarse.tv_distance(&fine)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowLemmaReport {
    pub radius: f64,
    /// Points with `d > 3` whose shadow spans at least three bins.
    pub samples: usize,
    pub deepest: f64,
    pub min: f64,
    pub max: f64,
    /// `max / min`, the empirical `C^2`.
    pub ratio: f64,
    /// Set when no orbit point qualifies.
    pub flagged: bool,
}

/// Audits `mu(O_R(x, gamma x)) e^{alpha d(x, gamma x)}` over the catalog.
///
/// Only shadows spanning at least three bins are resolved by the partition,
/// so deeper points are skipped.
pub fn shadow_lemma_report(
    cat: &OrbitCatalog,
    mu: &BinnedMeasure,
    radius: f64,
    alpha: f64,
) -> Result<ShadowLemmaReport> {
    let x = cat.base_point();
    let min_width = 3.0 * mu.partition().bin_width();
    let candidates: Vec<&OrbitPoint> = cat.points().iter().filter(|p| p.dist > 3.0).collect();
    let mut values = Vec::new();
    let mut deepest: f64 = 0.0;
    for p in &candidates {
        let arc = shadow_arc(x, p.image, radius)?;
        if arc.length() < min_width {
            continue;
        }
        deepest = deepest.max(p.dist);
        values.push(mu.arc_mass(&arc) / mu.total() * (alpha * p.dist).exp());
    }
    if values.is_empty() && !candidates.is_empty() {
        return Err(Error::ShadowTooNarrow(format!(
            "no shadow of radius {radius} spans three bins of {}; raise bin_count or R",
            mu.partition().bin_count()
        )));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(0.0, f64::max);
    Ok(ShadowLemmaReport {
        radius,
        samples: values.len(),
        deepest,
        min,
        max,
        ratio: if values.is_empty() {
            f64::NAN
        } else {
            max / min
        },
        flagged: values.is_empty(),
    })
}

/// The ball `{v : d_x(z, v) <= r}` of the visual metric, as an arc.
pub fn visual_ball(z: BoundaryDirection, r: f64, x: DiskPoint) -> Arc {
    if r >= 1.0 {
        return Arc::full();
    }
    let frame = MoebiusMap::transvection_to(x);
    let local = frame.inverse().apply_boundary(z).angle();
    let half = 2.0 * r.asin();
    let lo = frame.apply_boundary(BoundaryDirection::new(local - half));
    let hi = frame.apply_boundary(BoundaryDirection::new(local + half));
    Arc::between(lo.angle(), hi.angle())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AhlforsReport {
    pub spread: f64,
    pub min: f64,
    pub max: f64,
    pub centers: usize,
    pub radii: Vec<f64>,
    pub regular: bool,
}

/// Spread above which a measure is reported as not Ahlfors regular.
pub const AHLFORS_SPREAD_LIMIT: f64 = 100.0;

/// Spread `max/min` of `mu(B(z, r)) / r^alpha` over mass-quantile centers `z` and
/// dyadic radii `r = 2^{-k}` whose balls cover at least four bins.
pub fn ahlfors_report(mu: &BinnedMeasure, x: DiskPoint, alpha: f64) -> AhlforsReport {
    ahlfors_report_with(mu, x, alpha, 0.0)
}

/// As [`ahlfors_report`], with dyadic radii also kept at or above `min_radius`.
pub fn ahlfors_report_with(
    mu: &BinnedMeasure,
    x: DiskPoint,
    alpha: f64,
    min_radius: f64,
) -> AhlforsReport {
    let part = mu.partition();
    let support = mu.support(0.0);
    let centers = mass_quantile_bins(mu, 64);
    let mut radii = Vec::new();
    let mut r = 0.5;
    while r >= min_radius {
        let narrowest = centers
            .iter()
            .map(|&i| visual_ball(part.center_direction(i), r, x).length())
            .fold(f64::INFINITY, f64::min);
        if narrowest < 4.0 * part.bin_width() {
            break;
        }
        radii.push(r);
        r *= 0.5;
    }
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    for &i in &centers {
        for &r in &radii {
            let ball = visual_ball(part.center_direction(i), r, x);
            let q = mu.arc_mass(&ball) / mu.total() / r.powf(alpha);
            min = min.min(q);
            max = max.max(q);
        }
    }
    let spread = if radii.is_empty() || min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    };
    AhlforsReport {
        spread,
        min,
        max,
        centers: centers.len(),
        radii,
        regular: support.len() >= 32 && spread <= AHLFORS_SPREAD_LIMIT,
    }
}

/// Quarter arcs `[k pi/2 - pi/4, k pi/2 + pi/4]`.
pub fn quarter_arc(k: usize) -> Arc {
    Arc::new(k as f64 * 0.5 * PI, 0.25 * PI)
}

/// Bins where the cumulative mass crosses `(k + 1/2) / count`, deduplicated.
pub fn mass_quantile_bins(mu: &BinnedMeasure, count: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(count);
    let mut acc = 0.0;
    let mut k = 0;
    for (i, m) in mu.masses().iter().enumerate() {
        acc += m / mu.total();
        while k < count && acc >= (k as f64 + 0.5) / count as f64 {
            if out.last() != Some(&i) {
                out.push(i);
            }
            k += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{enumerate_orbit, estimate_alpha, BoundaryDisk, GroupModel};
    use std::f64::consts::FRAC_PI_2;
    use std::sync::OnceLock;

    struct Fixture {
        group: GroupModel,
        deep: OrbitCatalog,
        cat: OrbitCatalog,
        alpha: f64,
    }

    fn fixture() -> &'static Fixture {
        static F: OnceLock<Fixture> = OnceLock::new();
        F.get_or_init(|| {
            let r = 0.7;
            let group = GroupModel::schottky(&[
                BoundaryDisk::new(0.0, r),
                BoundaryDisk::new(PI, r),
                BoundaryDisk::new(FRAC_PI_2, r),
                BoundaryDisk::new(1.5 * PI, r),
            ])
            .unwrap();
            let deep = enumerate_orbit(&group, DiskPoint::ORIGIN, 16.0).unwrap();
            let cat = deep.truncated(14.0);
            let alpha = estimate_alpha(&cat).unwrap().alpha;
            Fixture {
                group,
                deep,
                cat,
                alpha,
            }
        })
    }

    fn part(n: usize) -> BoundaryPartition {
        BoundaryPartition::new(n).unwrap()
    }

    #[test]
    fn partitions_must_be_large_powers_of_two() {
        assert_eq!(
            BoundaryPartition::new(128),
            Err(Error::InvalidPartition(128))
        );
        assert_eq!(
            BoundaryPartition::new(1000),
            Err(Error::InvalidPartition(1000))
        );
        let p = part(256);
        assert_eq!(p.bin_of(0.0), 0);
        assert_eq!(p.bin_of(TAU - 1e-15), 255);
        assert_eq!(p.bin_of(-1e-3), 255);
        assert!((p.center(0) - 0.5 * p.bin_width()).abs() < 1e-15);
    }

    #[test]
    fn measure_validation() {
        let p = part(256);
        assert!(BinnedMeasure::new(p, vec![0.0; 256]).is_err());
        assert!(BinnedMeasure::new(p, vec![1.0; 255]).is_err());
        let mut bad = vec![1.0; 256];
        bad[3] = -0.5;
        assert!(BinnedMeasure::new(p, bad).is_err());
        let mu = BinnedMeasure::uniform(p, 3.0);
        let sum: f64 = mu.masses().iter().sum();
        assert!((sum - mu.total()).abs() <= 1e-12 * mu.total());
    }

    #[test]
    fn arc_mass_matches_arc_length_for_uniform_measure() {
        let mu = BinnedMeasure::uniform(part(1024), 1.0);
        for (c, h) in [(0.3, 0.2), (6.2, 0.5), (0.0, 1e-4), (3.0, 3.0)] {
            let arc = Arc::new(c, h);
            assert!(
                (mu.arc_mass(&arc) - arc.length() / TAU).abs() < 1e-12,
                "{c} {h}"
            );
        }
        assert_eq!(mu.arc_mass(&Arc::full()), 1.0);
    }

    #[test]
    fn arc_mass_prorates_against_dense_sampling() {
        let p = part(256);
        let masses: Vec<f64> = (0..256).map(|i| ((i * 37) % 11) as f64).collect();
        let mu = BinnedMeasure::new(p, masses).unwrap();
        let arc = Arc::new(5.9, 0.9);
        let n = 2_000_000;
        let mut oracle = 0.0;
        for k in 0..n {
            let t = arc.start() + (k as f64 + 0.5) / n as f64 * arc.length();
            oracle += mu.masses()[p.bin_of(t)] / p.bin_width() * arc.length() / n as f64;
        }
        assert!((mu.arc_mass(&arc) - oracle).abs() < 1e-4 * oracle);
    }

    #[test]
    fn push_forward_conserves_mass() {
        let f = fixture();
        let mu = patterson_measure(&f.cat, f.alpha, 0.05, part(1024)).unwrap();
        let same = mu.push_forward(&MoebiusMap::identity());
        assert!(same.tv_distance(&mu).unwrap() < 1e-9);
        let moved = mu.push_forward(&f.group.generators()[1]);
        assert!((moved.total() - mu.total()).abs() < 1e-10 * mu.total());
        let quarter = mu.push_forward(&MoebiusMap::rotation(FRAC_PI_2));
        assert!(quarter.tv_distance(&mu.rotated_bins(256)).unwrap() < 1e-9);
    }

    #[test]
    fn identity_catalog_is_degenerate() {
        let x = DiskPoint::new(0.2, 0.3).unwrap();
        let cat = OrbitCatalog::identity_only(x, 5.0);
        let mu = patterson_measure(&cat, 0.5, 0.05, part(256)).unwrap();
        assert!(mu.degenerate);
        let conv = MoebiusMap::transvection_to(x).apply_boundary(BoundaryDirection::new(0.0));
        assert_eq!(mu.support(0.0), vec![part(256).bin_of(conv.angle())]);
        let report = shadow_lemma_report(&cat, &mu, 2.0, 0.5).unwrap();
        assert!(report.flagged && report.samples == 0);
        assert!(patterson_measure(&cat, 0.5, 0.0, part(256)).is_err());
    }

    #[test]
    fn patterson_mass_lives_on_the_ping_pong_disks() {
        let f = fixture();
        let p = part(4096);
        let mu = patterson_measure(&f.cat, f.alpha, 0.05, p).unwrap();
        assert!(!mu.degenerate);
        // a bin meets a disk when its closed angular range overlaps the disk arc
        let half_bin = 0.5 * p.bin_width();
        let on_disks: f64 = (0..p.bin_count())
            .filter(|&i| {
                f.group
                    .disks()
                    .iter()
                    .any(|d| d.arc().intersects(&Arc::new(p.center(i), half_bin)))
            })
            .map(|i| mu.masses()[i])
            .sum();
        assert!(on_disks >= 0.999 * mu.total());
        let rotated = mu.rotated_bins(1024);
        assert!(mu.tv_distance(&rotated).unwrap() < 0.01);
    }

    #[test]
    fn conformality_is_exact_at_the_base_point_and_close_nearby() {
        let f = fixture();
        let p = part(4096);
        let same = conformality_check(&f.cat, f.alpha, 0.05, p, DiskPoint::ORIGIN).unwrap();
        assert!(same.median_error < 1e-12);
        let y = DiskPoint::from_polar(0.3, 0.5);
        let at14 = conformality_check(&f.cat, f.alpha, 0.05, p, y).unwrap();
        let at16 = conformality_check(&f.deep, f.alpha, 0.05, p, y).unwrap();
        assert!(at14.median_error < 0.1, "{at14:?}");
        assert!(at16.median_error <= at14.median_error, "{at14:?} {at16:?}");
    }

    #[test]
    fn invariance_under_a_generator() {
        let f = fixture();
        for g in f.group.generators() {
            let audit = invariance_check(&f.cat, f.alpha, 0.05, part(4096), g).unwrap();
            assert!(audit.median_error < 0.05, "{audit:?}");
        }
    }

    #[test]
    fn cauchy_refinement_distance_is_measured() {
        let f = fixture();
        let tv = cauchy_check(&f.deep, f.alpha, 0.05, 14.0, part(4096)).unwrap();
        assert!(tv > 0.0 && tv < 0.1, "{tv}");
        assert!(cauchy_check(&f.cat, f.alpha, 0.05, 14.0, part(4096)).is_err());
    }

    #[test]
    fn shadow_masses_grow_with_radius() {
        let f = fixture();
        let mu = patterson_measure(&f.cat, f.alpha, 0.05, part(4096)).unwrap();
        for p in f.cat.points().iter().filter(|p| p.dist > 3.0).take(500) {
            let small = mu.arc_mass(&shadow_arc(DiskPoint::ORIGIN, p.image, 1.0).unwrap());
            let large = mu.arc_mass(&shadow_arc(DiskPoint::ORIGIN, p.image, 2.0).unwrap());
            assert!(large >= small - 1e-12);
        }
    }

    #[test]
    fn shadow_constant_is_stable_in_depth() {
        let f = fixture();
        let p = part(4096);
        let mu14 = patterson_measure(&f.cat, f.alpha, 0.05, p).unwrap();
        let mu16 = patterson_measure(&f.deep, f.alpha, 0.05, p).unwrap();
        let r14 = shadow_lemma_report(&f.cat, &mu14, 2.0, f.alpha).unwrap();
        let r16 = shadow_lemma_report(&f.deep, &mu16, 2.0, f.alpha).unwrap();
        assert!(r14.ratio.is_finite() && r14.samples > 100);
        assert!((r16.ratio / r14.ratio - 1.0).abs() < 0.2, "{r14:?} {r16:?}");
        let narrow = patterson_measure(&f.cat, f.alpha, 0.05, part(256)).unwrap();
        assert!(matches!(
            shadow_lemma_report(&f.cat.truncated(3.5), &narrow, 0.05, f.alpha),
            Err(Error::ShadowTooNarrow(_))
        ));
    }

    #[test]
    fn ahlfors_spread_examples() {
        let uniform = BinnedMeasure::uniform(part(4096), 1.0);
        let report = ahlfors_report(&uniform, DiskPoint::ORIGIN, 1.0);
        // oracle: mu(B(z, r)) = 4 asin(r) / 2pi, so the ratio lies in [2/pi, 2/pi * (pi/3)/1]
        let worst = (0.5f64.asin() / 0.5) / 1.0;
        assert!((report.spread - worst).abs() < 0.05 * worst, "{report:?}");
        assert!(report.regular);
        let mut spike = vec![0.0; 4096];
        spike[100] = 1.0;
        let point = BinnedMeasure::new(part(4096), spike).unwrap();
        let r = ahlfors_report(&point, DiskPoint::ORIGIN, 1.0);
        assert!(!r.regular && r.spread > 100.0);
    }

    #[test]
    fn ahlfors_spread_is_stable_under_refinement() {
        let f = fixture();
        let coarse = patterson_measure(&f.cat, f.alpha, 0.05, part(4096)).unwrap();
        let fine = patterson_measure(&f.cat, f.alpha, 0.05, part(8192)).unwrap();
        let a = ahlfors_report(&coarse, DiskPoint::ORIGIN, f.alpha);
        let floor = *a.radii.last().unwrap();
        let b = ahlfors_report_with(&fine, DiskPoint::ORIGIN, f.alpha, floor);
        assert_eq!(a.radii, b.radii);
        assert!(
            (b.spread / a.spread - 1.0).abs() < 0.25,
            "{} {}",
            a.spread,
            b.spread
        );
    }

    #[test]
    fn weighted_median_and_csv() {
        assert_eq!(weighted_median(&[3.0, 1.0, 2.0], &[1.0, 1.0, 5.0]), 2.0);
        let mu = BinnedMeasure::uniform(part(256), 2.0);
        let csv = mu.to_csv(0.7, 0.05, 14.0);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "bin_count,total,alpha,s_offset,depth");
        assert!(lines[1].starts_with("256,2.0000000000000000e0,"));
        assert_eq!(lines.len(), 3 + 256);
    }

    #[test]
    fn shell_measure_support_and_errors() {
        let f = fixture();
        let p = part(4096);
        let shell = shell_measure(&f.cat, f.alpha, 1.0, p).unwrap();
        let pat = patterson_measure(&f.cat, f.alpha, 0.05, p).unwrap();
        assert!(shell.support(0.0).iter().all(|i| pat.masses()[*i] > 0.0));
        for k in 0..4 {
            let q = shell.arc_mass(&quarter_arc(k)) / shell.total();
            assert!((q - 0.25).abs() < 1e-12, "{q}");
        }
        let lone = OrbitCatalog::identity_only(DiskPoint::ORIGIN, 5.0);
        assert!(matches!(
            shell_measure(&lone, 1.0, 1.0, p),
            Err(Error::InsufficientDepth(_))
        ));
        assert!(shell_measure(&f.cat, f.alpha, 0.0, p).is_err());
    }
}
