//! Builds the shared catalog and measures, runs experiments and writes run directories.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use cat1lab::geometry::random_isometry;
use cat1lab::measure::{
    ahlfors_report, cauchy_check, conformality_check, invariance_check, shadow_lemma_report,
};
use cat1lab::representation::exact_conformal_measure;
use cat1lab::representation::experiments::{
    bounded_report, cor_b_report, default_basis, default_pairs, default_test_functions,
    default_triples, dw_report, roblin_report, thm_a_report, thm_d_report,
};
use cat1lab::representation::harish::{hc_report, AtomicQuadrature};
use cat1lab::{
    enumerate_orbit_with, estimate_alpha, growth_report, identity_audit, patterson_measure,
    predict_orbit_size, shell_measure, BinnedMeasure, BoundaryPartition, BoundaryRep,
    ConvergenceReport, DiskPoint, DwKernel, EnumerationOptions, Family, GeometryContext,
    GroupModel, MoebiusMap, OrbitCatalog, Setup, StepFunction,
};

use crate::config::{Config, Experiment, MeasureKind};
use crate::error::LabError;

/// Point at which the conformality audit compares `mu_y` with `mu_x`, in the frame of `x`.
const AUDIT_OFFSET: (f64, f64) = (0.3, 0.5);
const CONFORMALITY_LIMIT: f64 = 0.10;
const INVARIANCE_LIMIT: f64 = 0.05;
const CAUCHY_LIMIT: f64 = 0.05;
const GEOMETRY_CASES: usize = 10_000;
const GEOMETRY_LIMIT: f64 = 1e-9;
const UNITARITY_LIMIT: f64 = 0.01;

/// One report plus the CSV written next to it.
pub struct Artifact {
    pub name: String,
    pub report: Value,
    pub csv: String,
    pub passed: bool,
    pub summary: String,
}

impl Artifact {
    fn from_report(name: String, report: &ConvergenceReport) -> Self {
        Artifact {
            name,
            report: serde_json::to_value(report).expect("report serializes"),
            csv: report.to_csv(),
            passed: report.verdict.passed,
            summary: report.verdict.summary.clone(),
        }
    }
}

pub struct Lab {
    pub config: Config,
    pub group: GroupModel,
    pub fingerprint: String,
    pub cat: OrbitCatalog,
    pub alpha: f64,
    pub alpha_poincare: f64,
    rep_measure: Option<BinnedMeasure>,
}

impl Lab {
    /// Checks the budget model, then enumerates the catalog and estimates the exponent.
    pub fn build(config: Config) -> Result<Self, LabError> {
        let group = config.group()?;
        let x = config.base_point()?;
        let cap = config.orbit.point_cap;
        predict_orbit_size(&group, x, config.orbit.max_dist, cap)?;
        let opts = EnumerationOptions {
            point_cap: cap,
            prune_margin: None,
        };
        let cat = enumerate_orbit_with(&group, x, config.orbit.max_dist, &opts)?;
        let est = estimate_alpha(&cat)?;
        Ok(Lab {
            fingerprint: group.fingerprint(),
            group,
            cat,
            alpha: est.alpha,
            alpha_poincare: est.poincare,
            config,
            rep_measure: None,
        })
    }

    fn partition(&self) -> BoundaryPartition {
        self.config.partition()
    }

    fn representation_measure(&mut self) -> Result<&BinnedMeasure, LabError> {
        if self.rep_measure.is_none() {
            let part = self.partition();
            let mu = match self.config.representation.measure {
                MeasureKind::Shell => shell_measure(&self.cat, self.alpha, 1.0, part)?,
                MeasureKind::Patterson => {
                    patterson_measure(&self.cat, self.alpha, self.config.measure.s_offset, part)?
                }
            };
            self.rep_measure = Some(mu.normalized());
        }
        Ok(self.rep_measure.as_ref().expect("just built"))
    }

    fn audit_point(&self) -> DiskPoint {
        let x = self.cat.base_point();
        MoebiusMap::transvection_to(x).apply(DiskPoint::from_polar(AUDIT_OFFSET.0, AUDIT_OFFSET.1))
    }

    pub fn run(&mut self, experiment: Experiment) -> Result<Vec<Artifact>, LabError> {
        match experiment {
            Experiment::Orbit => self.orbit(),
            Experiment::Measure => self.measure().map(|a| vec![a]),
            _ => {
                let rhos = self.config.representation.rho.clone();
                let mut out = Vec::new();
                for &rho in &rhos {
                    let suffix = if rhos.len() > 1 {
                        format!("_rho{rho}")
                    } else {
                        String::new()
                    };
                    for (name, report) in self.representation(experiment, rho)? {
                        out.push(Artifact::from_report(format!("{name}{suffix}"), &report));
                    }
                }
                Ok(out)
            }
        }
    }

    fn orbit(&self) -> Result<Vec<Artifact>, LabError> {
        let rho = self.config.representation.rho[0];
        let report = growth_report(&self.cat, rho, &self.fingerprint)?
            .param("points", self.cat.len() as u64);
        Ok(vec![Artifact::from_report(
            Experiment::Orbit.name().into(),
            &report,
        )])
    }

    /// Patterson measure at full depth (CSV) and its audits per truncation depth (JSON).
    fn measure(&self) -> Result<Artifact, LabError> {
        let part = self.partition();
        let s = self.config.measure.s_offset;
        let (cat, alpha) = (&self.cat, self.alpha);
        let mu = patterson_measure(cat, alpha, s, part)?;
        let y = self.audit_point();
        let mut report = ConvergenceReport::new(
            "measure_audit",
            &self.fingerprint,
            &["tv_to_final", "conformality", "invariance"],
        );
        let top = cat.max_dist().floor() as u32;
        let first = (top / 2).max(4);
        for n in first..=top {
            let shallow = cat.truncated(n as f64);
            let tv = patterson_measure(&shallow, alpha, s, part)?.tv_distance(&mu)?;
            let conf = conformality_check(&shallow, alpha, s, part, y)?.median_error;
            let mut inv: f64 = 0.0;
            for g in self.group.generators() {
                inv = inv.max(invariance_check(&shallow, alpha, s, part, g)?.median_error);
            }
            report.push(n, vec![tv, conf, inv]);
        }
        let cauchy = cauchy_check(cat, alpha, s, cat.max_dist() - 2.0, part)?;
        let shadow = shadow_lemma_report(cat, &mu, self.config.measure.shadow_radius, alpha)?;
        let ahlfors = ahlfors_report(&mu, cat.base_point(), alpha);
        let last = report
            .rows
            .last()
            .map(|r| r.values.clone())
            .unwrap_or_default();
        let (conf, inv) = (last[1], last[2]);
        let passed =
            conf < CONFORMALITY_LIMIT && inv < INVARIANCE_LIMIT && shadow.ratio.is_finite();
        report = report
            .param("alpha", alpha)
            .param("s_offset", s)
            .param("bins", part.bin_count() as u64)
            .param("max_dist", cat.max_dist())
            .param("cauchy_tv", cauchy)
            .param("cauchy_within_limit", cauchy < CAUCHY_LIMIT)
            .param("shadow_ratio", shadow.ratio)
            .param("shadow_samples", shadow.samples as u64)
            .param("ahlfors_spread", ahlfors.spread);
        report.set_verdict(
            passed,
            format!(
                "conformality {conf:.4}, invariance {inv:.2e}, shadow ratio {:.3}; Cauchy TV {cauchy:.4} (limit {CAUCHY_LIMIT}, reported only)",
                shadow.ratio
            ),
        );
        let mut artifact = Artifact::from_report(Experiment::Measure.name().into(), &report);
        artifact.csv = mu.to_csv(alpha, s, cat.max_dist());
        Ok(artifact)
    }

    fn representation(
        &mut self,
        experiment: Experiment,
        rho: f64,
    ) -> Result<Vec<(String, ConvergenceReport)>, LabError> {
        let repr = self.config.representation.clone();
        let seed = self.config.run.seed;
        let bins = self.config.measure.bin_count;
        self.representation_measure()?;
        let mu = self.rep_measure.as_ref().expect("built above");
        let setup = Setup {
            cat: &self.cat,
            mu,
            alpha: self.alpha,
            rho,
            fingerprint: &self.fingerprint,
        };
        let tag =
            |r: ConvergenceReport| r.param("measure", format!("{:?}", repr.measure).to_lowercase());
        Ok(match experiment {
            Experiment::Hc => {
                let quad = AtomicQuadrature::from_shell(&self.cat, self.alpha, 1.0, bins)?;
                vec![(
                    experiment.name().into(),
                    hc_report(&self.cat, &quad, self.alpha, rho, &self.fingerprint)?,
                )]
            }
            Experiment::Bounded => vec![(experiment.name().into(), tag(bounded_report(&setup)?))],
            Experiment::ThmA => vec![(
                experiment.name().into(),
                tag(thm_a_report(&setup, &default_triples(), repr.cone_radius)?),
            )],
            Experiment::CorB => vec![(
                experiment.name().into(),
                tag(cor_b_report(&setup, &default_basis(mu))?),
            )],
            Experiment::ThmD => {
                let tests = default_test_functions(mu, seed);
                let mut out = Vec::new();
                for family in [Family::Conformal, Family::Nu] {
                    let report = tag(thm_d_report(&setup, family, &tests)?.param("seed", seed));
                    out.push((format!("{}_{}", experiment.name(), family.name()), report));
                }
                out
            }
            Experiment::Roblin => vec![(
                experiment.name().into(),
                tag(roblin_report(&setup, &default_pairs())?),
            )],
            Experiment::Dw => {
                let mut out = Vec::new();
                for kernel in [DwKernel::SqrtPoisson, DwKernel::Poisson] {
                    let report = tag(dw_report(&setup, kernel, repr.dw_r0, &repr.dw_approach)?);
                    out.push((format!("{}_{}", experiment.name(), kernel.name()), report));
                }
                out
            }
            Experiment::Orbit | Experiment::Measure => unreachable!("handled by run"),
        })
    }

    /// Invariant suite: geometry identities, unitarity, density audits, shadow lemma
    /// and both Dirac–Weierstrass kernels.
    pub fn checks(&mut self) -> Result<Artifact, LabError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.run.seed);
        let mut checks = Vec::new();
        let audit = identity_audit(&mut rng, GEOMETRY_CASES, 5.0);
        checks.push(Check::below(
            "geometry_identities",
            audit.max_violation(),
            GEOMETRY_LIMIT,
        ));
        // ln 2 is sharp for the disk, so the sampled defect can reach it up to rounding.
        let delta = GeometryContext::default().delta + GEOMETRY_LIMIT;
        let defect = GeometryContext::four_point_defect(&mut rng, GEOMETRY_CASES, 8.0);
        checks.push(Check::at_most("four_point_condition", defect, delta));

        let part = self.partition();
        let leb = exact_conformal_measure(part, DiskPoint::ORIGIN);
        let rep = BoundaryRep::new(&leb, DiskPoint::ORIGIN, 1.0);
        let mut unitarity: f64 = 0.0;
        for _ in 0..16 {
            let g = random_isometry(&mut rng, 3.0);
            let xi = StepFunction::random(part, 16, &mut rng);
            let ratio = rep.pi_apply(&g, &xi).l2_norm(&leb) / xi.l2_norm(&leb);
            unitarity = unitarity.max((ratio - 1.0).abs());
        }
        checks.push(Check::below("unitarity", unitarity, UNITARITY_LIMIT));

        let (s, alpha) = (self.config.measure.s_offset, self.alpha);
        let conf = conformality_check(&self.cat, alpha, s, part, self.audit_point())?.median_error;
        checks.push(Check::below("conformality", conf, CONFORMALITY_LIMIT));
        let mut inv: f64 = 0.0;
        for g in self.group.generators() {
            inv = inv.max(invariance_check(&self.cat, alpha, s, part, g)?.median_error);
        }
        checks.push(Check::below("invariance", inv, INVARIANCE_LIMIT));
        let mu = patterson_measure(&self.cat, alpha, s, part)?;
        let shadow = shadow_lemma_report(&self.cat, &mu, self.config.measure.shadow_radius, alpha)?;
        checks.push(Check {
            name: "shadow_lemma_ratio".into(),
            value: shadow.ratio,
            limit: f64::INFINITY,
            passed: shadow.ratio.is_finite() && shadow.samples > 0,
        });

        let rho = self.config.representation.rho[0];
        for (name, report) in self.representation(Experiment::Dw, rho)? {
            let tail = report
                .column("tail_mass")
                .and_then(|c| c.last().copied())
                .unwrap_or(f64::NAN);
            checks.push(Check {
                name,
                value: tail,
                limit: cat1lab::representation::experiments::TRAILING_LIMIT,
                passed: report.verdict.passed,
            });
        }

        let failed: Vec<&str> = checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        let mut csv = String::from("check,value,limit,passed\n");
        for c in &checks {
            csv.push_str(&format!(
                "{},{:e},{:e},{}\n",
                c.name, c.value, c.limit, c.passed
            ));
        }
        Ok(Artifact {
            name: "checks".into(),
            report: json!({
                "experiment": "checks",
                "fingerprint": self.fingerprint,
                "params": {"alpha": alpha, "max_dist": self.cat.max_dist(), "bins": part.bin_count()},
                "checks": checks,
            }),
            csv,
            passed: failed.is_empty(),
            summary: if failed.is_empty() {
                format!("{} checks passed", checks.len())
            } else {
                format!("failed: {}", failed.join(", "))
            },
        })
    }
}

#[derive(Serialize)]
struct Check {
    name: String,
    value: f64,
    limit: f64,
    passed: bool,
}

impl Check {
    fn below(name: &str, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            limit,
            passed: value < limit,
        }
    }

    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Check {
            passed: value <= limit,
            ..Check::below(name, value, limit)
        }
    }
}

/// A fresh timestamped directory under `root`; an existing name gets a numeric suffix.
pub fn create_run_dir(root: &Path) -> Result<PathBuf, LabError> {
    fs::create_dir_all(root)?;
    let stamp = chrono::Utc::now().format("run-%Y%m%dT%H%M%SZ").to_string();
    for k in 0.. {
        let name = if k == 0 {
            stamp.clone()
        } else {
            format!("{stamp}-{k}")
        };
        let dir = root.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

pub fn versions() -> Value {
    json!({
        "cat1lab-core": cat1lab::VERSION,
        "lab": env!("CARGO_PKG_VERSION"),
    })
}

/// Writes `<name>.json` (report plus resolved config and versions) and `<name>.csv`.
pub fn write_artifact(
    dir: &Path,
    config: &Config,
    artifact: &Artifact,
) -> Result<Vec<String>, LabError> {
    let mut doc = artifact.report.clone();
    if let Value::Object(map) = &mut doc {
        map.insert(
            "config".into(),
            serde_json::to_value(config).expect("config serializes"),
        );
        map.insert("versions".into(), versions());
    }
    let json_name = format!("{}.json", artifact.name);
    let csv_name = format!("{}.csv", artifact.name);
    fs::write(
        dir.join(&json_name),
        serde_json::to_string_pretty(&doc).expect("json") + "\n",
    )?;
    fs::write(dir.join(&csv_name), &artifact.csv)?;
    Ok(vec![json_name, csv_name])
}

pub struct RunOutcome {
    pub dir: PathBuf,
    pub passed: bool,
}

/// Runs `experiments` (or the checks suite when `None`) and writes the run directory.
pub fn execute(
    config: Config,
    experiments: Option<Vec<Experiment>>,
) -> Result<RunOutcome, LabError> {
    let started = chrono::Utc::now().to_rfc3339();
    let clock = Instant::now();
    let out_root = PathBuf::from(&config.run.output_dir);
    let mut lab = Lab::build(config.clone())?;
    let dir = create_run_dir(&out_root)?;
    fs::write(dir.join("config.toml"), config.to_toml())?;
    let mut entries = Vec::new();
    let mut all_passed = true;
    let mut record = |artifact: Artifact, seconds: f64| -> Result<(), LabError> {
        let files = write_artifact(&dir, &config, &artifact)?;
        eprintln!(
            "{:<18} {}  {:.1}s  {}",
            artifact.name,
            if artifact.passed { "PASS" } else { "FAIL" },
            seconds,
            artifact.summary
        );
        all_passed &= artifact.passed;
        entries.push(json!({
            "name": artifact.name,
            "passed": artifact.passed,
            "summary": artifact.summary,
            "seconds": seconds,
            "files": files,
        }));
        Ok(())
    };
    match experiments {
        Some(list) => {
            for e in list {
                let t = Instant::now();
                let artifacts = lab.run(e)?;
                let seconds = t.elapsed().as_secs_f64() / artifacts.len() as f64;
                for a in artifacts {
                    record(a, seconds)?;
                }
            }
        }
        None => {
            let t = Instant::now();
            let artifact = lab.checks()?;
            record(artifact, t.elapsed().as_secs_f64())?;
        }
    }
    let summary = json!({
        "started": started,
        "seconds": clock.elapsed().as_secs_f64(),
        "threads": rayon::current_num_threads(),
        "fingerprint": lab.fingerprint,
        "alpha": lab.alpha,
        "alpha_poincare": lab.alpha_poincare,
        "points": lab.cat.len(),
        "passed": all_passed,
        "experiments": entries,
        "versions": versions(),
        "config": serde_json::to_value(&config).expect("config serializes"),
    });
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("json") + "\n",
    )?;
    Ok(RunOutcome {
        dir,
        passed: all_passed,
    })
}
