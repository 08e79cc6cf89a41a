use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use jackstraw_core::diproperm::ProjectionStatistic;
use jackstraw_core::{Adjustment, Components, JointRank, Mode, Space};

use crate::config::{Method, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "jackstraw", version, about = "AJIVE decomposition with jackstraw tests on loadings")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the two-block toy data set.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        toy: ToyArgs,
    },
    /// Decompose blocks into joint and individual parts.
    Ajive {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        blocks: BlockArgs,
    },
    /// Jackstraw significance test of the loadings of one block.
    Jackstraw {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        blocks: BlockArgs,
        #[command(flatten)]
        target: TargetArgs,
        #[command(flatten)]
        test: TestArgs,
    },
    /// Compare AJIVE- and PCA-jackstraw on simulated toy data.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        toy: ToyArgs,
        #[command(flatten)]
        test: TestArgs,
    },
    /// Direction-projection-permutation two-sample test.
    Diproperm {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        args: DiProPermArgs,
    },
    /// Re-plot diagnostics of a saved jackstraw result.
    Diagnose {
        #[command(flatten)]
        common: CommonArgs,
        /// jackstraw.json written by the jackstraw command.
        #[arg(long)]
        result: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Ajive { .. } => "ajive",
            Command::Jackstraw { .. } => "jackstraw",
            Command::Compare { .. } => "compare",
            Command::Diproperm { .. } => "diproperm",
            Command::Diagnose { .. } => "diagnose",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Simulate { common, .. }
            | Command::Ajive { common, .. }
            | Command::Jackstraw { common, .. }
            | Command::Compare { common, .. }
            | Command::Diproperm { common, .. }
            | Command::Diagnose { common, .. } => common,
        }
    }

    /// Applies the flags on top of `config`.
    pub fn apply(&self, config: &mut RunConfig) {
        self.common().apply(config);
        match self {
            Command::Simulate { toy, .. } => toy.apply(config),
            Command::Ajive { blocks, .. } => blocks.apply(config),
            Command::Jackstraw { blocks, target, test, .. } => {
                blocks.apply(config);
                target.apply(config);
                test.apply(config);
            }
            Command::Compare { toy, test, .. } => {
                toy.apply(config);
                test.apply(config);
            }
            Command::Diproperm { args, .. } => args.apply(config),
            Command::Diagnose { result, .. } => {
                if let Some(r) = result {
                    config.result = Some(r.clone());
                }
            }
        }
    }
}

macro_rules! set {
    ($config:ident . $($field:ident).+ = $value:expr) => {
        if let Some(v) = &$value {
            $config.$($field).+ = v.clone();
        }
    };
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON configuration file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, env = "JIVE_JACKSTRAW_THREADS")]
    pub threads: Option<usize>,
}

impl CommonArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(out) = &self.out {
            c.out = Some(out.clone());
        }
        set!(c.seed = self.seed);
        if self.threads.is_some() {
            c.threads = self.threads;
        }
    }
}

#[derive(Debug, Args)]
pub struct BlockArgs {
    /// Matrix CSV files, comma separated or repeated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub blocks: Option<Vec<PathBuf>>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub block_names: Option<Vec<String>>,
    /// Initial rank of each block.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub ranks: Option<Vec<usize>>,
    /// Joint rank, or `auto`.
    #[arg(long)]
    pub joint_rank: Option<JointRank>,
    /// Divide each centered block by its Frobenius norm.
    #[arg(long)]
    pub normalize_blocks: bool,
    /// case,label CSV added as a one-hot supervision block.
    #[arg(long)]
    pub indicator: Option<PathBuf>,
    /// Class order of the indicator block.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub classes: Option<Vec<String>>,
}

impl BlockArgs {
    fn apply(&self, c: &mut RunConfig) {
        set!(c.blocks = self.blocks);
        set!(c.block_names = self.block_names);
        set!(c.ranks = self.ranks);
        set!(c.joint_rank = self.joint_rank);
        if self.normalize_blocks {
            c.normalize_blocks = true;
        }
        if let Some(p) = &self.indicator {
            c.indicator = Some(p.clone());
        }
        set!(c.classes = self.classes);
    }
}

#[derive(Debug, Args)]
pub struct TargetArgs {
    /// Score source: ajive or pca (PCA of the block alone).
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub space: Option<Space>,
    /// 0-based block whose loadings are tested.
    #[arg(long)]
    pub block_index: Option<usize>,
    /// 0-based component, or `all` for the whole space.
    #[arg(long)]
    pub component: Option<Components>,
}

impl TargetArgs {
    fn apply(&self, c: &mut RunConfig) {
        set!(c.method = self.method);
        set!(c.space = self.space);
        set!(c.block_index = self.block_index);
        set!(c.component = self.component);
    }
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Rows permuted per replicate.
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of replicates.
    #[arg(long)]
    pub s: Option<usize>,
    /// full or approx.
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// bonferroni, bh or none.
    #[arg(long)]
    pub adjust: Option<Adjustment>,
    /// Use (1 + count)/(1 + replicates) p-values.
    #[arg(long)]
    pub smoothing: bool,
}

impl TestArgs {
    fn apply(&self, c: &mut RunConfig) {
        set!(c.k = self.k);
        set!(c.s = self.s);
        set!(c.mode = self.mode);
        set!(c.alpha = self.alpha);
        set!(c.adjust = self.adjust);
        if self.smoothing {
            c.smoothing = true;
        }
    }
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    #[arg(long)]
    pub noise_variance: Option<f64>,
    /// Simulated data sets; tables report per-cell medians.
    #[arg(long)]
    pub replicates: Option<usize>,
}

impl ToyArgs {
    fn apply(&self, c: &mut RunConfig) {
        set!(c.toy.noise_variance = self.noise_variance);
        set!(c.replicates = self.replicates);
    }
}

#[derive(Debug, Args)]
pub struct DiProPermArgs {
    /// Feature-by-case matrix CSV.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// case,label CSV.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// The two classes to compare (the second is the positive class).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub classes: Option<Vec<String>>,
    #[arg(long)]
    pub n_perm: Option<usize>,
    #[arg(long)]
    pub batches: Option<usize>,
    /// Plain label shuffles instead of balanced permutations.
    #[arg(long)]
    pub unbalanced: bool,
    /// mean_difference or t_statistic.
    #[arg(long)]
    pub statistic: Option<ProjectionStatistic>,
}

impl DiProPermArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(p) = &self.matrix {
            c.matrix = Some(p.clone());
        }
        if let Some(p) = &self.labels {
            c.labels = Some(p.clone());
        }
        set!(c.classes = self.classes);
        set!(c.n_perm = self.n_perm);
        set!(c.batches = self.batches);
        if self.unbalanced {
            c.balanced = false;
        }
        set!(c.statistic = self.statistic);
    }
}
