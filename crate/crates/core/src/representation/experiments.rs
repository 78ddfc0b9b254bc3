//! Named experiments assembled from the representation primitives.
//!
//! Each returns a [`ConvergenceReport`] with one row per feasible `n`
//! (`4 <= n <= floor(max_dist - rho)`) and a verdict. Thresholds are engineering
//! defaults; the statements being tested are asymptotic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cone::{ConeSet, InteriorFunction};
use super::operators::{
    annulus_reduce, fn_hn_table, g_n_aligned, limit_coefficient, mn_table, TestTriple,
};
use super::poisson::{dw_family_check, DwKernel};
use super::{BoundaryRep, StepFunction};
use crate::error::{Error, Result};
use crate::geometry::{radial_projection, Arc};
use crate::group::{AnnulusSpec, OrbitCatalog};
use crate::measure::{quarter_arc, BinnedMeasure};
use crate::report::{ls_slope, trailing_log_slope, ConvergenceReport};

/// Largest error allowed at the last row of the averaging experiments.
pub const TRAILING_LIMIT: f64 = 0.05;
/// Largest least-squares slope (per unit `n`) an error column may have and still count
/// as non-increasing.
pub const TREND_TOLERANCE: f64 = 2e-3;
/// Largest trailing log-slope allowed for the sup-norms of `F^n` and `H^n`.
pub const BOUNDED_SLOPE: f64 = 0.02;

/// The data every annulus experiment shares.
#[derive(Clone, Copy, Debug)]
pub struct Setup<'a> {
    pub cat: &'a OrbitCatalog,
    pub mu: &'a BinnedMeasure,
    pub alpha: f64,
    pub rho: f64,
    pub fingerprint: &'a str,
}

impl Setup<'_> {
    /// `n = 4 ..= floor(max_dist - rho)`.
    pub fn ns(&self) -> Result<Vec<u32>> {
        let last = self.cat.max_annulus(self.rho);
        let first = 4.max(self.rho.ceil() as u32);
        if last < first {
            return Err(Error::InsufficientDepth(format!(
                "no annulus with n >= {first} and half-width {} fits below {}",
                self.rho,
                self.cat.max_dist()
            )));
        }
        Ok((first..=last).collect())
    }

    pub fn specs(&self) -> Result<Vec<AnnulusSpec>> {
        Ok(self
            .ns()?
            .into_iter()
            .map(|n| AnnulusSpec::new(n, self.rho))
            .collect())
    }

    pub fn rep(&self) -> BoundaryRep<'_> {
        BoundaryRep::new(self.mu, self.cat.base_point(), self.alpha)
    }

    fn report(&self, experiment: &str, columns: &[&str]) -> ConvergenceReport {
        ConvergenceReport::new(experiment, self.fingerprint, columns)
            .param("rho", self.rho)
            .param("alpha", self.alpha)
            .param("bins", self.mu.partition().bin_count() as u64)
            .param("max_dist", self.cat.max_dist())
    }
}

/// Whether an error column ends below `limit` without an increasing trend.
pub fn settles(ns: &[u32], errors: &[f64], limit: f64) -> bool {
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    match errors.last() {
        Some(&last) => last < limit && ls_slope(&xs, errors) <= TREND_TOLERANCE,
        None => false,
    }
}

/// Sup-norms of `F^n` and `H^n`, and `G_n` at aligned pairs.
pub fn bounded_report(setup: &Setup) -> Result<ConvergenceReport> {
    let specs = setup.specs()?;
    let rep = setup.rep();
    let fh = fn_hn_table(setup.cat, &rep, &specs)?;
    let mut report = setup.report("uniform_boundedness", &["f_sup", "h_sup", "g_aligned"]);
    for (spec, (f, h)) in specs.iter().zip(fh) {
        report.push(
            spec.n,
            vec![f, h, g_n_aligned(setup.cat, setup.alpha, *spec)?],
        );
    }
    let ns = report.ns();
    let col = |c: &str| report.column(c).unwrap_or_default();
    let f_slope = trailing_log_slope(&ns, &col("f_sup"));
    let h_slope = trailing_log_slope(&ns, &col("h_sup"));
    let g_slope = trailing_log_slope(&ns, &col("g_aligned"));
    let passed =
        f_slope <= BOUNDED_SLOPE && h_slope <= BOUNDED_SLOPE && g_slope >= 0.5 * setup.alpha;
    report = report
        .param("f_log_slope", f_slope)
        .param("h_log_slope", h_slope)
        .param("g_log_slope", g_slope);
    report.set_verdict(
        passed,
        format!(
            "log-slopes: F {f_slope:+.4}, H {h_slope:+.4}, G {g_slope:+.4} (alpha/2 = {:.4})",
            0.5 * setup.alpha
        ),
    );
    Ok(report)
}

/// A cone-average test triple: `f = 1_{C_R(x, U) ∪ U}`, `xi = 1_A`, `eta = 1_B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeTriple {
    pub u: Vec<Arc>,
    pub a: Vec<Arc>,
    pub b: Vec<Arc>,
}

fn union(arcs: &[usize]) -> Vec<Arc> {
    arcs.iter().map(|&k| quarter_arc(k)).collect()
}

/// Five triples built from the quarter arcs `Q_k` centered at `k pi / 2`.
pub fn default_triples() -> Vec<ConeTriple> {
    let full = vec![Arc::full()];
    vec![
        ConeTriple {
            u: union(&[0]),
            a: union(&[1]),
            b: union(&[0]),
        },
        ConeTriple {
            u: union(&[0, 1]),
            a: union(&[2]),
            b: union(&[1, 2]),
        },
        ConeTriple {
            u: full.clone(),
            a: union(&[0]),
            b: union(&[3]),
        },
        ConeTriple {
            u: union(&[2]),
            a: union(&[0, 1, 2]),
            b: union(&[2, 3]),
        },
        ConeTriple {
            u: union(&[1, 3]),
            a: union(&[1]),
            b: full,
        },
    ]
}

/// `<M^n(1_U^) 1_A, 1_B>` against `mu(U ∩ B) mu(A) / |mu|^2` for each triple, and the
/// normalization `<M^n(1) 1, 1> = 1`.
pub fn thm_a_report(
    setup: &Setup,
    triples: &[ConeTriple],
    cone_radius: f64,
) -> Result<ConvergenceReport> {
    let part = setup.mu.partition();
    let specs = setup.specs()?;
    let rep = setup.rep();
    let one = StepFunction::constant(part, 1.0);
    let mut tests = vec![TestTriple {
        f: InteriorFunction::Constant(1.0),
        xi: one.clone(),
        eta: one.clone(),
    }];
    let mut targets = Vec::new();
    for t in triples {
        let xi = StepFunction::indicator(part, &t.a);
        let eta = StepFunction::indicator(part, &t.b);
        targets.push(limit_coefficient(
            &StepFunction::indicator(part, &t.u),
            &xi,
            &eta,
            setup.mu,
        ));
        tests.push(TestTriple {
            f: InteriorFunction::Cone(ConeSet::new(t.u.clone(), cone_radius)),
            xi,
            eta,
        });
    }
    let mut columns = vec!["unit".to_string(), "unit_error".to_string()];
    for k in 0..triples.len() {
        columns.extend([
            format!("value_{k}"),
            format!("target_{k}"),
            format!("error_{k}"),
        ]);
    }
    let cols: Vec<&str> = columns.iter().map(|c| c.as_str()).collect();
    let mut report = setup
        .report("theorem_a", &cols)
        .param("cone_radius", cone_radius)
        .param("triples", serde_json::to_value(triples).unwrap_or_default());
    let table = mn_table(setup.cat, &rep, &specs, &tests)?;
    for (spec, row) in specs.iter().zip(table) {
        let mut values = vec![row[0], (row[0] - 1.0).abs()];
        for (v, t) in row[1..].iter().zip(&targets) {
            values.extend([*v, *t, (v - t).abs()]);
        }
        report.push(spec.n, values);
    }
    let ns = report.ns();
    let unit_exact = report
        .column("unit_error")
        .unwrap_or_default()
        .iter()
        .all(|e| *e <= 1e-12);
    let mut worst: f64 = 0.0;
    let mut all_settle = true;
    for k in 0..triples.len() {
        let err = report.column(&format!("error_{k}")).unwrap_or_default();
        worst = worst.max(*err.last().unwrap_or(&f64::INFINITY));
        all_settle &= settles(&ns, &err, TRAILING_LIMIT);
    }
    report.set_verdict(
        unit_exact && all_settle,
        format!("largest final error {worst:.4e}; normalization exact: {unit_exact}"),
    );
    Ok(report)
}

/// The constant plus three mean-zero quarter-arc step functions.
pub fn default_basis(mu: &BinnedMeasure) -> Vec<StepFunction> {
    let part = mu.partition();
    let mut basis = vec![StepFunction::constant(part, 1.0)];
    for arcs in [vec![0], vec![1], vec![0, 3]] {
        let ind = StepFunction::indicator(part, &union(&arcs));
        let mean = ind.integral(mu) / mu.total();
        basis.push(ind.map(|v| v - mean));
    }
    basis
}

/// Entries of `|mu|^2 <M^n(1) xi_i, xi_j>` against `(int xi_i dmu)(int xi_j dmu)`.
pub fn cor_b_report(setup: &Setup, basis: &[StepFunction]) -> Result<ConvergenceReport> {
    let specs = setup.specs()?;
    let rep = setup.rep();
    let total = setup.mu.total();
    let mut tests = Vec::new();
    let mut targets = Vec::new();
    let mut columns = Vec::new();
    for (i, xi) in basis.iter().enumerate() {
        for (j, eta) in basis.iter().enumerate() {
            tests.push(TestTriple {
                f: InteriorFunction::Constant(1.0),
                xi: xi.clone(),
                eta: eta.clone(),
            });
            targets.push(xi.integral(setup.mu) * eta.integral(setup.mu));
            columns.push(format!("m_{i}{j}"));
        }
    }
    columns.push("max_error".into());
    let cols: Vec<&str> = columns.iter().map(|c| c.as_str()).collect();
    let mut report = setup
        .report("corollary_b", &cols)
        .param("targets", targets.clone());
    for (spec, row) in specs.iter().zip(mn_table(setup.cat, &rep, &specs, &tests)?) {
        let values: Vec<f64> = row.iter().map(|v| v * total * total).collect();
        let err = values
            .iter()
            .zip(&targets)
            .map(|(v, t)| (v - t).abs())
            .fold(0.0, f64::max);
        let mut out = values;
        out.push(err);
        report.push(spec.n, out);
    }
    let err = report.column("max_error").unwrap_or_default();
    let last = *err.last().unwrap_or(&f64::INFINITY);
    report.set_verdict(
        settles(&report.ns(), &err, TRAILING_LIMIT),
        format!("final max-entry error {last:.4e}"),
    );
    Ok(report)
}

/// Target family for the averaged orbital measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `mu_{gamma x} / |mu_{gamma x}|`.
    Conformal,
    /// `nu_{gamma x}`.
    Nu,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Conformal => "conformal",
            Family::Nu => "nu",
        }
    }
}

/// Seeded random step functions on 16 arcs, two off-axis arc indicators and a
/// fourth-order Fourier mode; none of them is invariant under the symmetries of the
/// shipped group.
pub fn default_test_functions(mu: &BinnedMeasure, seed: u64) -> Vec<StepFunction> {
    let part = mu.partition();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<StepFunction> = (0..4)
        .map(|_| StepFunction::random(part, 16, &mut rng))
        .collect();
    out.push(StepFunction::indicator(part, &[Arc::new(0.3, 0.4)]));
    out.push(StepFunction::indicator(part, &[Arc::new(2.0, 0.15)]));
    out.push(StepFunction::from_fn(part, |t| (4.0 * t + 0.4).cos()));
    out
}

/// Averaged orbital measures against `mu_x / |mu_x|` (which is also `nu_x`).
pub fn thm_d_report(
    setup: &Setup,
    family: Family,
    tests: &[StepFunction],
) -> Result<ConvergenceReport> {
    let specs = setup.specs()?;
    let rep = setup.rep();
    let bins = setup.mu.partition().bin_count();
    let m = setup.mu.masses();
    let power = match family {
        Family::Conformal => 2,
        Family::Nu => 1,
    };
    let sums = annulus_reduce(setup.cat, &specs, bins, |p, out| {
        let mut total = 0.0;
        for &s in rep.support() {
            let k = rep.half_density(&p.local, s);
            let w = if power == 2 { k * k } else { k } * m[s];
            out[s] = w;
            total += w;
        }
        for &s in rep.support() {
            out[s] /= total;
        }
        Ok(())
    })?;
    let target = setup.mu.normalized();
    let mut report = setup
        .report(
            &format!("theorem_d_{}", family.name()),
            &["tv", "test_error", "min_mass"],
        )
        .param("family", family.name());
    for (spec, (count, masses)) in specs.iter().zip(sums) {
        let avg = BinnedMeasure::new(
            setup.mu.partition(),
            masses.iter().map(|v| v / count as f64).collect(),
        )?;
        let tv = avg.tv_distance(&target)?;
        let test_error = tests
            .iter()
            .map(|h| (avg.integrate(h.values()) - target.integrate(h.values())).abs())
            .fold(0.0, f64::max);
        report.push(spec.n, vec![tv, test_error, avg.total()]);
    }
    let tv = report.column("tv").unwrap_or_default();
    let last = *tv.last().unwrap_or(&f64::INFINITY);
    report.set_verdict(
        settles(&report.ns(), &tv, 0.1),
        format!("final bin total variation {last:.4e}"),
    );
    Ok(report)
}

/// Quarter-arc pairs `(A, B)`: adjacent, opposite, diagonal and repeated.
pub fn default_pairs() -> Vec<(Arc, Arc)> {
    vec![
        (quarter_arc(0), quarter_arc(1)),
        (quarter_arc(1), quarter_arc(0)),
        (quarter_arc(0), quarter_arc(2)),
        (quarter_arc(1), quarter_arc(3)),
        (quarter_arc(2), quarter_arc(2)),
    ]
}

/// Fraction of `gamma` in `C_n` with `proj(gamma^{-1} x) in A` and `proj(gamma x) in B`
/// against `mu(A) mu(B) / |mu|^2`.
pub fn roblin_report(setup: &Setup, pairs: &[(Arc, Arc)]) -> Result<ConvergenceReport> {
    let specs = setup.specs()?;
    let x = setup.cat.base_point();
    let total = setup.mu.total();
    let targets: Vec<f64> = pairs
        .iter()
        .map(|(a, b)| setup.mu.arc_mass(a) * setup.mu.arc_mass(b) / (total * total))
        .collect();
    let sums = annulus_reduce(setup.cat, &specs, pairs.len(), |p, out| {
        let from = radial_projection(x, p.inverse_image).angle();
        let to = radial_projection(x, p.image).angle();
        for (o, (a, b)) in out.iter_mut().zip(pairs) {
            *o = (a.contains(from) && b.contains(to)) as u8 as f64;
        }
        Ok(())
    })?;
    let mut columns = Vec::new();
    for k in 0..pairs.len() {
        columns.extend([
            format!("value_{k}"),
            format!("target_{k}"),
            format!("error_{k}"),
        ]);
    }
    let cols: Vec<&str> = columns.iter().map(|c| c.as_str()).collect();
    let mut report = setup
        .report("roblin_pairs", &cols)
        .param("pairs", serde_json::to_value(pairs).unwrap_or_default());
    for (spec, (count, hits)) in specs.iter().zip(sums) {
        let mut row = Vec::new();
        for (h, t) in hits.iter().zip(&targets) {
            let v = h / count as f64;
            row.extend([v, *t, (v - t).abs()]);
        }
        report.push(spec.n, row);
    }
    let mut worst: f64 = 0.0;
    for k in 0..pairs.len() {
        let err = report.column(&format!("error_{k}")).unwrap_or_default();
        worst = worst.max(*err.last().unwrap_or(&f64::INFINITY));
    }
    report.set_verdict(
        worst < TRAILING_LIMIT,
        format!("largest final error {worst:.4e}"),
    );
    Ok(report)
}

/// Runs `f` on every `rho` of a sweep, in order.
pub fn rho_sweep<T: Send>(rhos: &[f64], f: impl Fn(f64) -> Result<T> + Sync) -> Result<Vec<T>> {
    rhos.par_iter().map(|&r| f(r)).collect()
}

/// Dirac–Weierstrass conditions along the ray to the heaviest bin center of `mu`.
///
/// `v0` is a bin center so that it is an atom of the binned measure; the test function
/// for the extension is `cos(theta - v0)`.
pub fn dw_report(
    setup: &Setup,
    kernel: DwKernel,
    r0: f64,
    approach: &[f64],
) -> Result<ConvergenceReport> {
    let part = setup.mu.partition();
    let heaviest = setup
        .mu
        .masses()
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &m)| {
            if m > best.1 {
                (i, m)
            } else {
                best
            }
        })
        .0;
    let v0 = part.center_direction(heaviest);
    let f = StepFunction::from_fn(part, |t| (t - v0.angle()).cos());
    let mut report = dw_family_check(
        kernel,
        setup.mu,
        setup.cat.base_point(),
        setup.alpha,
        v0,
        r0,
        approach,
        &f,
    )?;
    report.fingerprint = setup.fingerprint.to_string();
    Ok(report)
}
