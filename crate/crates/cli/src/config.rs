//! Run configuration: a TOML document with a `[model]` table, an optional
//! `[schedule]` table and one table per experiment.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mploc_core::schedule::{content_hash, Level, RRule, ToySpec};
use mploc_core::{derive_schedule, Cube, DiagonalHopping, DisorderSpec, LatticePoint, ModelParams, Schedule, ScheduleInputs, ScheduleMode};
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

/// A value that may be written as `"auto"` to take its derived default.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Auto<T> {
    #[default]
    Auto,
    Value(T),
}

impl<T: Copy> Auto<T> {
    pub fn or(self, fallback: T) -> T {
        match self {
            Auto::Auto => fallback,
            Auto::Value(v) => v,
        }
    }

    pub fn value(self) -> Option<T> {
        match self {
            Auto::Auto => None,
            Auto::Value(v) => Some(v),
        }
    }
}

impl<T: Serialize> Serialize for Auto<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Auto::Auto => s.serialize_str("auto"),
            Auto::Value(v) => v.serialize(s),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Auto<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Text(String),
            Value(T),
        }
        match Raw::<T>::deserialize(d)? {
            Raw::Text(s) if s == "auto" => Ok(Auto::Auto),
            Raw::Text(s) => Err(de::Error::custom(format!("expected a number or \"auto\", found \"{s}\""))),
            Raw::Value(v) => Ok(Auto::Value(v)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n: usize,
    pub d: usize,
    pub g: f64,
    pub r: f64,
    pub r0: i64,
    #[serde(default)]
    pub u_amp: f64,
    #[serde(default)]
    pub m1: f64,
    #[serde(default)]
    pub diagonal: DiagonalHopping,
    /// The seed field is ignored; `master_seed` is used.
    pub disorder: DisorderSpec,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default)]
    pub mode: ScheduleMode,
    #[serde(default)]
    pub n_max: Auto<usize>,
    #[serde(default)]
    pub d: Auto<usize>,
    #[serde(default)]
    pub rho: Auto<f64>,
    #[serde(default)]
    pub p0: Auto<f64>,
    #[serde(default)]
    pub eps_slack: Auto<f64>,
    #[serde(default)]
    pub l0: Auto<u64>,
    #[serde(default)]
    pub k_max: Auto<u32>,
    #[serde(default)]
    pub r_rule: RRule,
    /// Override of the derived `β` (strict) or its value (toy).
    #[serde(default)]
    pub beta: Auto<f64>,
    /// Model exponent to test `r_n < r - nd/2` against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_r: Option<f64>,
    /// Toy levels, `n = 1..`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<Level>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeConfig {
    /// One row of `d` coordinates per particle.
    pub center: Vec<Vec<i64>>,
    pub radius: i64,
}

impl CubeConfig {
    pub fn cube(&self) -> Result<Cube> {
        if self.radius < 0 {
            bail!("cube radius must be nonnegative");
        }
        Ok(Cube::new(LatticePoint::from_rows(&self.center)?, self.radius))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    pub cubes: Vec<CubeConfig>,
    #[serde(default)]
    pub energy: f64,
    #[serde(default)]
    pub realization: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StollmannVariant {
    #[default]
    Single,
    Two,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StollmannConfig {
    #[serde(default)]
    pub variant: StollmannVariant,
    pub cubes: Vec<CubeConfig>,
    #[serde(default)]
    pub energy: f64,
    pub eps: Vec<f64>,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointConfig {
    pub cubes: Vec<CubeConfig>,
    #[serde(default)]
    pub grid_step: Auto<f64>,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub l: i64,
    pub center: Vec<Vec<i64>>,
    #[serde(default)]
    pub energy: f64,
    #[serde(default)]
    pub cover_radius: Auto<i64>,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub cube: CubeConfig,
    #[serde(default)]
    pub realization: u64,
    #[serde(default)]
    pub floor_tol: Auto<f64>,
    #[serde(default)]
    pub exp_cap: Auto<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonConfig {
    pub big: CubeConfig,
    pub sub_radius: i64,
    /// Number of eigenpairs to check, one realization each.
    pub pairs: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub model: ModelConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify: Option<ClassifyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stollmann: Option<StollmannConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<JointConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poisson: Option<PoissonConfig>,
}

/// A configuration that failed to parse; the message carries line and column.
#[derive(Debug)]
pub struct ConfigError {
    pub path: PathBuf,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.message)
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &Path) -> std::result::Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError { path: path.to_path_buf(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self::parse(&text, path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        content_hash(&serde_json::to_vec(self).expect("config serializes"))
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let m = &self.model;
        let params = ModelParams {
            n: m.n,
            d: m.d,
            g: m.g,
            r: m.r,
            r0: m.r0,
            u_amp: m.u_amp,
            m1: m.m1,
            disorder: m.disorder.with_seed(self.master_seed),
            diagonal: m.diagonal,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn build_schedule(&self) -> Result<Schedule> {
        let s = &self.schedule;
        let m = &self.model;
        let n_max = s.n_max.or(m.n);
        let d = s.d.or(m.d);
        let rho = s.rho.or(m.disorder.holder_exponent());
        let l0 = s.l0.or(3);
        let k_max = s.k_max.or(1);
        let width = m.disorder.m;
        match s.mode {
            ScheduleMode::Strict => {
                if !s.levels.is_empty() {
                    bail!("schedule.levels is only accepted in toy mode");
                }
                let inputs = ScheduleInputs {
                    n_max,
                    d,
                    rho,
                    p0: s.p0.or(20.0 * (n_max * d) as f64),
                    eps_slack: s.eps_slack.or(0.2),
                    l0,
                    k_max,
                    m: width,
                    r_rule: s.r_rule,
                };
                let mut schedule = derive_schedule(&inputs)?;
                if let Some(beta) = s.beta.value() {
                    schedule.beta = beta;
                    schedule.revalidate();
                }
                Ok(schedule)
            }
            ScheduleMode::Toy => {
                let Some(beta) = s.beta.value() else {
                    bail!("toy schedules need an explicit schedule.beta");
                };
                if s.levels.is_empty() {
                    bail!("toy schedules need [[schedule.levels]] entries");
                }
                Ok(Schedule::toy(ToySpec {
                    d,
                    rho,
                    p0: s.p0.or(1.0),
                    beta,
                    levels: s.levels.clone(),
                    l0,
                    k_max,
                    m: width,
                })?)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
master_seed = 11

[model]
n = 2
d = 1
g = 10.0
r = 6.0
r0 = 1
u_amp = 0.5
disorder = { kind = "uniform", m = 1.0 }

[schedule]
mode = "strict"
p0 = "auto"
l0 = 3

[classify]
cubes = [{ center = [[0], [9]], radius = 2 }]
energy = 0.25
"#;

    #[test]
    fn round_trip() {
        let cfg = ExperimentConfig::parse(SAMPLE, Path::new("x.toml")).unwrap();
        assert_eq!(cfg.schedule.p0, Auto::Auto);
        assert_eq!(cfg.schedule.l0, Auto::Value(3));
        let again = ExperimentConfig::parse(&cfg.to_toml(), Path::new("y.toml")).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
    }

    #[test]
    fn auto_defers_to_ledger() {
        let cfg = ExperimentConfig::parse(SAMPLE, Path::new("x.toml")).unwrap();
        let s = cfg.build_schedule().unwrap();
        assert_eq!(s.p0, 40.0);
        assert_eq!(s.beta, 6480.0);
        assert!(s.violations().is_empty());
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let bad = SAMPLE.replace("g = 10.0", "g = ten");
        let err = ExperimentConfig::parse(&bad, Path::new("bad.toml")).unwrap_err();
        assert!(err.to_string().contains("line 7"), "{err}");
        let bad = SAMPLE.replace("p0 = \"auto\"", "p0 = \"soon\"");
        assert!(ExperimentConfig::parse(&bad, Path::new("bad.toml")).is_err());
        let bad = SAMPLE.replace("r0 = 1", "r0 = 1\nextra = 3");
        assert!(ExperimentConfig::parse(&bad, Path::new("bad.toml")).is_err());
    }

    #[test]
    fn seed_changes_hash() {
        let mut cfg = ExperimentConfig::parse(SAMPLE, Path::new("x.toml")).unwrap();
        let h = cfg.hash();
        cfg.master_seed += 1;
        assert_ne!(h, cfg.hash());
    }
}
