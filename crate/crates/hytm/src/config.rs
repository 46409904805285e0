//! Run configuration: one JSON document, every field overridable from the
//! command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hytm_core::checker::DEFAULT_TX_LIMIT;
use hytm_core::memory::DEFAULT_CAPACITY;
use hytm_core::schedule::Step;
use hytm_core::Algorithm;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CONFIG_FORMAT: &str = "hytm-config";
pub const CONFIG_VERSION: u32 = 1;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Opacity,
    StrictSerializability,
    Progress,
    InvisibleReads,
    Footprint,
}

impl CheckKind {
    pub const ALL: [CheckKind; 5] = [
        CheckKind::Opacity,
        CheckKind::StrictSerializability,
        CheckKind::Progress,
        CheckKind::InvisibleReads,
        CheckKind::Footprint,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::Opacity => "opacity",
            CheckKind::StrictSerializability => "strict-serializability",
            CheckKind::Progress => "progress",
            CheckKind::InvisibleReads => "invisible-reads",
            CheckKind::Footprint => "footprint",
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CheckKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CheckKind::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown check `{s}`"))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzSpec {
    pub seed: u64,
    pub n_txns: u32,
    pub ops_per_txn: u32,
    pub fast_fraction: f64,
    pub iterations: u32,
}

impl Default for FuzzSpec {
    fn default() -> Self {
        FuzzSpec {
            seed: 0,
            n_txns: 4,
            ops_per_txn: 3,
            fast_fraction: 0.5,
            iterations: 1,
        }
    }
}

impl FuzzSpec {
    /// Applies `key=value` overrides.
    pub fn apply(&mut self, pairs: &[String]) -> Result<(), CliError> {
        for pair in pairs {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("fuzz parameter `{pair}` is not key=value")))?;
            let bad = |e: &dyn fmt::Display| CliError::Config(format!("fuzz parameter `{k}`: {e}"));
            match k {
                "seed" => self.seed = v.parse().map_err(|e| bad(&e))?,
                "n_txns" => self.n_txns = v.parse().map_err(|e| bad(&e))?,
                "ops_per_txn" => self.ops_per_txn = v.parse().map_err(|e| bad(&e))?,
                "fast_fraction" => self.fast_fraction = v.parse().map_err(|e| bad(&e))?,
                "iterations" => self.iterations = v.parse().map_err(|e| bad(&e))?,
                _ => return Err(CliError::Config(format!("unknown fuzz parameter `{k}`"))),
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScheduleSource {
    Inline { steps: Vec<Step> },
    File { path: PathBuf },
    Fuzz(FuzzSpec),
    Scenario { name: String },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<PathBuf>,
}

/// The config document as written; every field is optional so that the
/// command line can fill the gaps.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub format: String,
    pub version: u32,
    #[serde(default)]
    pub algorithm: Option<Algorithm>,
    #[serde(default)]
    pub n_tobjects: Option<u32>,
    #[serde(default)]
    pub capacity: Option<usize>,
    #[serde(default)]
    pub schedule: Option<ScheduleSource>,
    #[serde(default)]
    pub checks: Option<Vec<CheckKind>>,
    #[serde(default)]
    pub limit: Option<usize>,
    #[serde(default)]
    pub outputs: Outputs,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: ConfigFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if cfg.format != CONFIG_FORMAT || cfg.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "{}: expected format `{CONFIG_FORMAT}` version {CONFIG_VERSION}, found `{}` version {}",
                path.display(),
                cfg.format,
                cfg.version
            )));
        }
        Ok(cfg)
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub algorithm: Option<Algorithm>,
    pub n_tobjects: Option<u32>,
    pub capacity: Option<usize>,
    pub schedule_file: Option<PathBuf>,
    pub fuzz: Option<Vec<String>>,
    pub scenario: Option<String>,
    pub checks: Option<Vec<CheckKind>>,
    pub limit: Option<usize>,
    pub history: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
}

/// A validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// `None` lets a scenario use its own algorithm.
    pub algorithm: Option<Algorithm>,
    pub n_tobjects: Option<u32>,
    pub capacity: usize,
    pub schedule: ScheduleSource,
    pub checks: Vec<CheckKind>,
    pub limit: usize,
    pub outputs: Outputs,
}

impl RunConfig {
    pub fn resolve(file: Option<ConfigFile>, cli: Overrides) -> Result<Self, CliError> {
        let file = file.unwrap_or_default();
        let given = [cli.schedule_file.is_some(), cli.fuzz.is_some(), cli.scenario.is_some()];
        if given.iter().filter(|&&g| g).count() > 1 {
            return Err(CliError::Config(
                "--schedule, --fuzz and --scenario are mutually exclusive".into(),
            ));
        }
        let schedule = if let Some(path) = cli.schedule_file {
            ScheduleSource::File { path }
        } else if let Some(name) = cli.scenario {
            ScheduleSource::Scenario { name }
        } else if let Some(pairs) = cli.fuzz {
            let mut spec = match file.schedule {
                Some(ScheduleSource::Fuzz(spec)) => spec,
                _ => FuzzSpec::default(),
            };
            spec.apply(&pairs)?;
            ScheduleSource::Fuzz(spec)
        } else {
            file.schedule
                .ok_or_else(|| CliError::Config("no schedule given (use --schedule, --fuzz or --scenario)".into()))?
        };
        let cfg = RunConfig {
            algorithm: cli.algorithm.or(file.algorithm),
            n_tobjects: cli.n_tobjects.or(file.n_tobjects),
            capacity: cli.capacity.or(file.capacity).unwrap_or(DEFAULT_CAPACITY),
            schedule,
            checks: {
                let mut c = cli.checks.or(file.checks).unwrap_or_default();
                c.sort();
                c.dedup();
                c
            },
            limit: cli.limit.or(file.limit).unwrap_or(DEFAULT_TX_LIMIT),
            outputs: Outputs {
                history: cli.history.or(file.outputs.history),
                metrics: cli.metrics.or(file.outputs.metrics),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.capacity < 2 {
            return Err(CliError::Config(format!(
                "tracking-set capacity must be at least 2, got {}",
                self.capacity
            )));
        }
        match &self.schedule {
            ScheduleSource::Scenario { .. } => {}
            other => {
                if self.algorithm.is_none() {
                    return Err(CliError::Config("no algorithm given (use --alg)".into()));
                }
                if self.n_tobjects.is_none_or(|n| n == 0) {
                    return Err(CliError::Config("n_tobjects must be given and positive".into()));
                }
                if let ScheduleSource::File { path } = other {
                    if !path.is_file() {
                        return Err(CliError::Config(format!("schedule file {} does not exist", path.display())));
                    }
                }
                if let ScheduleSource::Fuzz(f) = other {
                    if f.iterations == 0 {
                        return Err(CliError::Config("fuzz iterations must be positive".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_overrides_file() {
        let file = ConfigFile {
            format: CONFIG_FORMAT.into(),
            version: 1,
            algorithm: Some(Algorithm::Naive),
            n_tobjects: Some(2),
            schedule: Some(ScheduleSource::Fuzz(FuzzSpec {
                iterations: 5,
                ..FuzzSpec::default()
            })),
            ..ConfigFile::default()
        };
        let cli = Overrides {
            algorithm: Some(Algorithm::Constant),
            fuzz: Some(vec!["seed=9".into()]),
            ..Overrides::default()
        };
        let cfg = RunConfig::resolve(Some(file), cli).unwrap();
        assert_eq!(cfg.algorithm, Some(Algorithm::Constant));
        assert_eq!(cfg.n_tobjects, Some(2));
        match cfg.schedule {
            ScheduleSource::Fuzz(f) => assert_eq!((f.seed, f.iterations), (9, 5)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_inputs_are_config_errors() {
        let mut f = FuzzSpec::default();
        assert!(f.apply(&["seed".into()]).is_err());
        assert!(f.apply(&["depth=3".into()]).is_err());
        let cli = Overrides {
            algorithm: Some(Algorithm::Naive),
            n_tobjects: Some(1),
            capacity: Some(1),
            fuzz: Some(vec![]),
            ..Overrides::default()
        };
        assert!(matches!(RunConfig::resolve(None, cli), Err(CliError::Config(_))));
    }
}
