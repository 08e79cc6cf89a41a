//! Run configuration, shared by every subcommand.
//!
//! A configuration is read from an optional JSON file (see
//! `config.schema.json`), then overridden by command-line flags, validated,
//! and echoed into every artifact a run writes.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use jackstraw_core::diproperm::ProjectionStatistic;
use jackstraw_core::{
    Adjustment, Components, DiProPermConfig, JackstrawConfig, JointRank, Mode, Space, ToyConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// JSON schema of [`RunConfig`].
pub const CONFIG_SCHEMA: &str = include_str!("../config.schema.json");

/// Which decomposition supplies the jackstraw scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Ajive,
    Pca,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ajive => "ajive",
            Method::Pca => "pca",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ajive" => Ok(Method::Ajive),
            "pca" => Ok(Method::Pca),
            _ => Err(format!("unknown method '{s}' (expected ajive or pca)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Matrix CSV files, one per data block.
    pub blocks: Vec<PathBuf>,
    /// Block names; defaults to the file stems.
    pub block_names: Vec<String>,
    /// Initial rank per block (plus one for the indicator block, if any).
    pub ranks: Vec<usize>,
    pub joint_rank: JointRank,
    pub normalize_blocks: bool,
    /// Case-label CSV appended as a one-hot supervision block.
    pub indicator: Option<PathBuf>,
    /// Class order for the indicator block, or the two classes compared by DiProPerm.
    pub classes: Vec<String>,

    pub method: Method,
    pub space: Space,
    pub block_index: usize,
    pub component: Components,
    pub k: usize,
    pub s: usize,
    pub mode: Mode,
    pub alpha: f64,
    pub adjust: Adjustment,
    pub smoothing: bool,

    pub seed: u64,
    /// Worker threads; results do not depend on it.
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,

    pub toy: ToyConfig,
    pub replicates: usize,

    pub matrix: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub n_perm: usize,
    pub batches: usize,
    pub balanced: bool,
    pub statistic: ProjectionStatistic,

    /// Jackstraw result JSON to re-plot.
    pub result: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let j = JackstrawConfig::default();
        let d = DiProPermConfig::default();
        RunConfig {
            blocks: Vec::new(),
            block_names: Vec::new(),
            ranks: Vec::new(),
            joint_rank: JointRank::Auto,
            normalize_blocks: false,
            indicator: None,
            classes: Vec::new(),
            method: Method::Ajive,
            space: Space::Joint,
            block_index: 0,
            component: Components::One(0),
            k: j.k_rows,
            s: j.n_reps,
            mode: j.mode,
            alpha: j.alpha,
            adjust: j.adjustment,
            smoothing: j.smoothing,
            seed: 0,
            threads: None,
            out: None,
            toy: ToyConfig::default(),
            replicates: 1,
            matrix: None,
            labels: None,
            n_perm: d.n_perm,
            batches: d.batches,
            balanced: d.balanced,
            statistic: d.statistic,
            result: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::validation("no output directory (use --out)"))
    }

    pub fn jackstraw(&self) -> JackstrawConfig {
        JackstrawConfig {
            k_rows: self.k,
            n_reps: self.s,
            mode: self.mode,
            seed: self.seed,
            alpha: self.alpha,
            adjustment: self.adjust,
            smoothing: self.smoothing,
        }
    }

    pub fn diproperm(&self) -> DiProPermConfig {
        DiProPermConfig {
            n_perm: self.n_perm,
            balanced: self.balanced,
            batches: self.batches,
            seed: self.seed,
            statistic: self.statistic,
        }
    }

    /// The toy configuration with the run seed applied.
    pub fn toy(&self) -> ToyConfig {
        self.toy.clone().with_seed(self.seed)
    }

    /// Settings checks that need no input files.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::validation(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.k == 0 || self.s == 0 {
            return Err(CliError::validation("--k and --s must be positive"));
        }
        if self.threads == Some(0) {
            return Err(CliError::validation("--threads must be positive"));
        }
        if self.replicates == 0 {
            return Err(CliError::validation("--replicates must be positive"));
        }
        if !self.block_names.is_empty() && self.block_names.len() != self.blocks.len() {
            return Err(CliError::validation(format!(
                "{} block names for {} blocks",
                self.block_names.len(),
                self.blocks.len()
            )));
        }
        self.toy().validate()?;
        Ok(())
    }
}

/// Identifies the tool and the exact configuration behind an artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Resolved configuration; feeding it back through `--config`
    /// reproduces the artifact. The thread count is omitted because results
    /// do not depend on it.
    pub config: RunConfig,
}

impl Provenance {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Provenance {
            tool: "jackstraw".to_string(),
            version: jackstraw_core::VERSION.to_string(),
            command: command.to_string(),
            seed: config.seed,
            config: RunConfig {
                threads: None,
                ..config.clone()
            },
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("provenance is always serializable")
    }
}
