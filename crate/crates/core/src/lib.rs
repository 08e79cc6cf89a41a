//! Joint/individual decomposition of multi-block data (AJIVE) with jackstraw
//! significance tests on the resulting loadings.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: matrix newtype, truncated SVD, PCA, angles
//! - [`ajive`]: data blocks, the decomposition, indicator blocks
//! - [`jackstraw`]: F statistics, permutation nulls, p-values
//! - [`diagnostics`]: null density, sorted p-values, uniformity test
//! - [`simulation`]: the two-block toy example and method comparison
//! - [`diproperm`]: direction-projection-permutation two-sample test

pub mod ajive;
pub mod diagnostics;
pub mod diproperm;
pub mod error;
pub mod jackstraw;
pub mod linalg;
mod serde_f64;
pub mod simulation;

pub use ajive::{
    build_indicator_block, decompose, AjiveDecomposition, AjiveOptions, BlockDecomposition,
    Components, DataBlock, JointRank, Space,
};
pub use diagnostics::{build_report, DiagnosticReport};
pub use diproperm::{diproperm_test, DiProPermConfig, DiProPermResult};
pub use error::{Error, Result};
pub use jackstraw::{
    Adjustment, AjiveScores, JackstrawConfig, JackstrawResult, Mode, PcaScores, ScoreModel,
};
pub use linalg::RealMatrix;
pub use simulation::{
    compare_methods, compare_replicates, simulate_toy, Comparison, ComparisonSummary, ToyConfig,
    ToyData, ToyGroundTruth,
};

/// Library version, embedded in every output artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
