//! Experiment configuration: a TOML file with fixed sections and no computed values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use cat1lab::{BoundaryDisk, BoundaryPartition, DiskPoint, GroupModel};

/// The shipped rank-2 reference configuration.
pub const REFERENCE: &str = include_str!("../configs/reference.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub group: GroupSection,
    #[serde(default)]
    pub orbit: OrbitSection,
    #[serde(default)]
    pub measure: MeasureSection,
    #[serde(default)]
    pub representation: RepresentationSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSection {
    /// `[center_angle, angular_radius]` per disk; disks `2k` and `2k + 1` are paired.
    pub disks: Vec<[f64; 2]>,
    #[serde(default)]
    pub base_point: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitSection {
    pub max_dist: f64,
    pub point_cap: usize,
}

impl Default for OrbitSection {
    fn default() -> Self {
        OrbitSection {
            max_dist: 14.0,
            point_cap: cat1lab::group::DEFAULT_POINT_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureSection {
    pub bin_count: usize,
    pub s_offset: f64,
    pub shadow_radius: f64,
}

impl Default for MeasureSection {
    fn default() -> Self {
        MeasureSection {
            bin_count: 4096,
            s_offset: 0.05,
            shadow_radius: 2.0,
        }
    }
}

/// Which boundary measure carries the representation experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    /// Orbital measure of the outer unit shell of the catalog.
    Shell,
    /// Truncated Patterson sum with the configured `s_offset`.
    Patterson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RepresentationSection {
    pub measure: MeasureKind,
    pub rho: Vec<f64>,
    pub cone_radius: f64,
    pub dw_r0: f64,
    pub dw_approach: Vec<f64>,
}

impl Default for RepresentationSection {
    fn default() -> Self {
        RepresentationSection {
            measure: MeasureKind::Shell,
            rho: vec![1.0],
            cone_radius: 2.0,
            dw_r0: 0.2,
            dw_approach: vec![4.0, 8.0, 12.0, 16.0, 20.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Orbit,
    Measure,
    Hc,
    Bounded,
    ThmA,
    CorB,
    ThmD,
    Roblin,
    Dw,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Orbit,
        Experiment::Measure,
        Experiment::Hc,
        Experiment::Bounded,
        Experiment::ThmA,
        Experiment::CorB,
        Experiment::ThmD,
        Experiment::Roblin,
        Experiment::Dw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Orbit => "orbit",
            Experiment::Measure => "measure",
            Experiment::Hc => "hc",
            Experiment::Bounded => "bounded",
            Experiment::ThmA => "thm_a",
            Experiment::CorB => "cor_b",
            Experiment::ThmD => "thm_d",
            Experiment::Roblin => "roblin",
            Experiment::Dw => "dw",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub experiments: Vec<Experiment>,
    pub output_dir: String,
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            experiments: Experiment::ALL.to_vec(),
            output_dir: "runs".into(),
            seed: 7,
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl Config {
    pub fn reference() -> Self {
        Config::parse(REFERENCE).expect("shipped config parses")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError(m));
        let positive = |name: &str, v: f64| -> Result<(), ConfigError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        positive("orbit.max_dist", self.orbit.max_dist)?;
        positive("measure.s_offset", self.measure.s_offset)?;
        positive("measure.shadow_radius", self.measure.shadow_radius)?;
        positive(
            "representation.cone_radius",
            self.representation.cone_radius,
        )?;
        positive("representation.dw_r0", self.representation.dw_r0)?;
        if self.orbit.point_cap == 0 {
            return fail("orbit.point_cap must be positive".into());
        }
        if self.representation.rho.is_empty() {
            return fail("representation.rho needs at least one value".into());
        }
        for &r in &self.representation.rho {
            positive("representation.rho", r)?;
        }
        let approach = &self.representation.dw_approach;
        if approach.is_empty() || approach.windows(2).any(|w| w[1] <= w[0]) {
            return fail("representation.dw_approach must be a nonempty increasing list".into());
        }
        for &t in approach {
            positive("representation.dw_approach", t)?;
        }
        if self.run.experiments.is_empty() {
            return fail("run.experiments is empty".into());
        }
        BoundaryPartition::new(self.measure.bin_count)
            .map_err(|e| ConfigError(format!("measure.bin_count: {e}")))?;
        self.base_point()?;
        self.group()?;
        Ok(())
    }

    pub fn group(&self) -> Result<GroupModel, ConfigError> {
        let disks: Vec<BoundaryDisk> = self
            .group
            .disks
            .iter()
            .map(|d| BoundaryDisk::new(d[0], d[1]))
            .collect();
        GroupModel::schottky(&disks).map_err(|e| ConfigError(format!("group.disks: {e}")))
    }

    pub fn base_point(&self) -> Result<DiskPoint, ConfigError> {
        let [re, im] = self.group.base_point;
        DiskPoint::new(re, im).map_err(|e| ConfigError(format!("group.base_point: {e}")))
    }

    pub fn partition(&self) -> BoundaryPartition {
        BoundaryPartition::new(self.measure.bin_count).expect("validated bin count")
    }

    /// Experiments in dependency order, without repeats.
    pub fn ordered_experiments(&self) -> Vec<Experiment> {
        let mut list = self.run.experiments.clone();
        list.sort();
        list.dedup();
        list
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
