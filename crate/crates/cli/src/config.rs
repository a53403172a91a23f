//! Run configuration, stored as sectioned `key = value` text.
//!
//! ```text
//! [scenario]
//! settings = 2
//! outcomes = 2
//!
//! [sampler]
//! n_samples = 10000
//! seed = 7
//! burn_in = 1000
//! thinning = 5
//!
//! [membership]
//! targets = "L,Qt1,Q1"
//! need_vstar = false
//! confidence = 0.99
//!
//! [run]
//! output_dir = "out"
//! workers = 0
//! ```

use std::path::{Path, PathBuf};

use bellvol_core::membership::{parse_targets, TargetKind};
use bellvol_core::{BellScenario, SamplerConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const WORKERS_ENV: &str = "BELLVOL_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub settings: usize,
    pub outcomes: usize,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self { settings: 2, outcomes: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub n_samples: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub thinning: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            n_samples: 1000,
            seed: d.seed,
            burn_in: d.burn_in,
            thinning: d.thinning,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MembershipSection {
    /// Comma-separated target tags, e.g. `L,Qt1,Q1`.
    pub targets: String,
    pub need_vstar: bool,
    pub confidence: f64,
}

impl Default for MembershipSection {
    fn default() -> Self {
        Self {
            targets: "L".into(),
            need_vstar: false,
            confidence: bellvol_core::volume::DEFAULT_CONFIDENCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub output_dir: PathBuf,
    /// `0` means available parallelism.
    pub workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("bellvol-out"),
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioSection,
    pub sampler: SamplerSection,
    pub membership: MembershipSection,
    pub run: RunSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn scenario(&self) -> Result<BellScenario, CliError> {
        Ok(BellScenario::new(self.scenario.settings, self.scenario.outcomes)?)
    }

    pub fn set_scenario(&mut self, s: BellScenario) {
        self.scenario = ScenarioSection {
            settings: s.n_settings(),
            outcomes: s.n_outcomes(),
        };
    }

    pub fn targets(&self) -> Result<Vec<TargetKind>, CliError> {
        Ok(parse_targets(&self.membership.targets)?)
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            seed: self.sampler.seed,
            burn_in: self.sampler.burn_in,
            thinning: self.sampler.thinning,
        }
    }

    /// Worker count: the environment override, then the config, then the
    /// available parallelism.
    pub fn workers(&self) -> Result<usize, CliError> {
        let from_env = match std::env::var(WORKERS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Config(format!("{WORKERS_ENV}={v:?} is not a count")))?,
            ),
            Err(_) => None,
        };
        let n = from_env.unwrap_or(self.run.workers);
        Ok(if n == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            n
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.set_scenario(BellScenario::new(3, 2).unwrap());
        c.sampler.seed = 42;
        c.membership.targets = "L,Qt1,P1.25".into();
        c.run.output_dir = PathBuf::from("runs/a");
        let text = c.to_text();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn partial_files_take_defaults() {
        let c = RunConfig::parse("[sampler]\nseed = 9\n").unwrap();
        assert_eq!(c.sampler.seed, 9);
        assert_eq!(c.sampler.burn_in, SamplerConfig::default().burn_in);
        assert_eq!(c.scenario, ScenarioSection::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[sampler]\nsead = 9\n").is_err());
        assert!(RunConfig::parse("[scenario]\nsettings = \"two\"\n").is_err());
    }

    #[test]
    fn bad_scenario_is_reported() {
        let c = RunConfig::parse("[scenario]\nsettings = 2\noutcomes = 1\n").unwrap();
        assert!(matches!(c.scenario(), Err(CliError::Config(_))));
    }
}
