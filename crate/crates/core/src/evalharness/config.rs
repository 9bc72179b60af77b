//! TOML experiment configuration.
//!
//! ```toml
//! task = "pd"
//! method = "ADV"
//! steps = 300000
//! seed = 1
//! out = "runs"
//! n = 5
//!
//! [hps]        # optional; fixes instead of sampling
//! lr = 1e-3
//! alpha = 20.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::envs::VALIDATION_EPISODES;

/// Overrides the output root when `--out` is not given.
pub const OUT_ENV: &str = "ADVISOR_OUT";
pub const DEFAULT_OUT: &str = "runs";
pub const DEFAULT_DEMO_EPISODES: usize = 1000;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedHps {
    pub lr: Option<f64>,
    pub stage_split: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub task: Option<String>,
    pub method: Option<String>,
    pub steps: Option<u64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Runs per sweep.
    pub n: usize,
    /// Concurrent runs in a sweep.
    pub jobs: usize,
    pub validation_episodes: u64,
    pub demo_episodes: usize,
    /// Demonstration file; recorded on the fly when absent.
    pub demos: Option<PathBuf>,
    pub save_checkpoint: bool,
    pub hps: FixedHps,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            task: None,
            method: None,
            steps: None,
            seed: 0,
            out: None,
            n: 1,
            jobs: 1,
            validation_episodes: VALIDATION_EPISODES,
            demo_episodes: DEFAULT_DEMO_EPISODES,
            demos: None,
            save_checkpoint: true,
            hps: FixedHps::default(),
        }
    }
}

impl HarnessConfig {
    pub fn from_toml(src: &str) -> Result<Self, HarnessError> {
        toml::from_str(src).map_err(|e| HarnessError::Invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let src = std::fs::read_to_string(path)?;
        Self::from_toml(&src)
    }

    /// Output root: explicit setting, else `ADVISOR_OUT`, else `runs`.
    pub fn out_root(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(v) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(v);
        }
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_defaults() {
        let c = HarnessConfig::from_toml("task = \"pd\"\nsteps = 4000\n[hps]\nlr = 0.001\n").unwrap();
        assert_eq!(c.task.as_deref(), Some("pd"));
        assert_eq!(c.hps.lr, Some(1e-3));
        assert_eq!(c.validation_episodes, 200);
        assert_eq!(c.n, 1);
        assert!(HarnessConfig::from_toml("tsak = \"pd\"").is_err());
        let c = HarnessConfig::from_toml("out = \"a\"").unwrap();
        assert_eq!(c.out_root(Some(Path::new("b"))), PathBuf::from("b"));
    }
}
