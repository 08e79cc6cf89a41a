//! Jackstraw significance tests for loadings.
//!
//! Every row of a centered block is regressed on one or more score vectors
//! and summarized by an F statistic. The null distribution comes from
//! permuting a few rows at a time, optionally re-fitting the decomposition,
//! and recording the F statistics of the permuted rows.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ajive::{decompose, AjiveOptions, Components, DataBlock, JointRank, Space};
use crate::error::{Error, Result};
use crate::linalg::{pca, RealMatrix, CENTERING_TOLERANCE};

/// Residual sums of squares below this fraction of `SSE_0` count as a perfect fit.
const PERFECT_FIT_RATIO: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Re-fit the decomposition after every permutation.
    Full,
    /// Reuse the scores of the original fit.
    #[serde(alias = "approx")]
    Approximate,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::Approximate => "approximate",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Mode::Full),
            "approx" | "approximate" => Ok(Mode::Approximate),
            _ => Err(Error::invalid(format!("unknown jackstraw mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adjustment {
    Bonferroni,
    /// Benjamini–Hochberg step-up.
    Bh,
    None,
}

impl fmt::Display for Adjustment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Adjustment::Bonferroni => "bonferroni",
            Adjustment::Bh => "bh",
            Adjustment::None => "none",
        })
    }
}

impl FromStr for Adjustment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bonferroni" => Ok(Adjustment::Bonferroni),
            "bh" | "fdr" => Ok(Adjustment::Bh),
            "none" => Ok(Adjustment::None),
            _ => Err(Error::invalid(format!("unknown adjustment '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JackstrawConfig {
    /// Rows permuted per replicate (K).
    pub k_rows: usize,
    /// Number of replicates (S).
    pub n_reps: usize,
    pub mode: Mode,
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_adjustment")]
    pub adjustment: Adjustment,
    #[serde(default)]
    pub smoothing: bool,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_adjustment() -> Adjustment {
    Adjustment::Bonferroni
}

impl Default for JackstrawConfig {
    fn default() -> Self {
        JackstrawConfig {
            k_rows: 1,
            n_reps: 1000,
            mode: Mode::Approximate,
            seed: 0,
            alpha: default_alpha(),
            adjustment: default_adjustment(),
            smoothing: false,
        }
    }
}

impl JackstrawConfig {
    /// Checks the configuration against a block with `n_features` rows and
    /// returns non-fatal warnings.
    pub fn validate(&self, n_features: usize) -> Result<Vec<String>> {
        if self.k_rows == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if 2 * self.k_rows > n_features {
            return Err(Error::invalid(format!(
                "K = {} is too large for {n_features} features (at most {})",
                self.k_rows,
                n_features / 2
            )));
        }
        if self.n_reps == 0 {
            return Err(Error::invalid("S must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        let mut warnings = Vec::new();
        let draws = self.k_rows * self.n_reps;
        if draws < 10 * n_features {
            let msg = format!(
                "S*K = {draws} null draws is below the recommended 10*d = {}",
                10 * n_features
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        Ok(warnings)
    }
}

/// Independent random stream for replicate `replicate` under a master seed.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Ordinary least-squares fit of a response on a fixed predictor matrix,
/// without intercept.
#[derive(Debug, Clone)]
pub struct Regression {
    /// n × r orthonormal basis of the predictor column space.
    basis: DMatrix<f64>,
}

impl Regression {
    pub fn new(predictor: &DMatrix<f64>) -> Result<Self> {
        let (n, r) = predictor.shape();
        if r == 0 {
            return Err(Error::invalid("predictor has no columns"));
        }
        if n <= r {
            return Err(Error::invalid(format!(
                "need more cases than predictors (n = {n}, r = {r})"
            )));
        }
        if predictor.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("predictor has non-finite entries"));
        }
        let qr = predictor.clone().qr();
        let rmat = qr.r();
        let scale = predictor.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
        let min_diag = rmat.diagonal().iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        if scale == 0.0 || min_diag <= 1e-12 * scale {
            return Err(Error::invalid("predictor columns are linearly dependent (singular VᵀV)"));
        }
        Ok(Regression { basis: qr.q() })
    }

    pub fn n_cases(&self) -> usize {
        self.basis.nrows()
    }

    pub fn n_predictors(&self) -> usize {
        self.basis.ncols()
    }

    /// F statistic of one response vector; `+∞` on a perfect fit.
    pub fn f_value(&self, y: &[f64]) -> f64 {
        let (n, r) = self.basis.shape();
        debug_assert_eq!(y.len(), n);
        let y = DVector::from_column_slice(y);
        let sse0 = y.norm_squared();
        if sse0 == 0.0 {
            return 0.0;
        }
        let coef = self.basis.tr_mul(&y);
        let sse1 = (&y - &self.basis * coef).norm_squared();
        if sse1 <= PERFECT_FIT_RATIO * sse0 {
            return f64::INFINITY;
        }
        let numerator = ((sse0 - sse1) / r as f64).max(0.0);
        numerator / (sse1 / (n - r) as f64)
    }
}

/// `((SSE₀ − SSE₁)/r) / (SSE₁/(n − r))` for a centered response `y` regressed
/// on the columns of `predictor` (n × r). Returns `+∞` when the fit is perfect.
pub fn f_statistic(y: &[f64], predictor: &DMatrix<f64>) -> Result<f64> {
    if y.len() != predictor.nrows() {
        return Err(Error::invalid(format!(
            "response has {} cases but the predictor has {}",
            y.len(),
            predictor.nrows()
        )));
    }
    check_centered_row(y)?;
    Ok(Regression::new(predictor)?.f_value(y))
}

fn check_centered_row(y: &[f64]) -> Result<()> {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    if mean.abs() > CENTERING_TOLERANCE {
        return Err(Error::precondition(format!("response is not centered (mean {mean:.3e})")));
    }
    Ok(())
}

fn require_centered(block: &DataBlock) -> Result<()> {
    if !block.is_centered() {
        return Err(Error::precondition(format!(
            "block '{}' must be row-centered",
            block.name()
        )));
    }
    Ok(())
}

/// Loading vector `L = D·v` of a centered block for a unit score vector.
pub fn loading_vector(block: &DataBlock, v: &[f64]) -> Result<DVector<f64>> {
    if v.len() != block.n_cases() {
        return Err(Error::invalid(format!(
            "score vector has length {} but the block has {} cases",
            v.len(),
            block.n_cases()
        )));
    }
    require_centered(block)?;
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::precondition(format!("score vector must be unit norm, got {norm}")));
    }
    Ok(block.matrix().as_dmatrix() * DVector::from_column_slice(v))
}

/// F statistic of every row of a centered block against `predictor` (n × r).
pub fn observed_f(block: &DataBlock, predictor: &DMatrix<f64>) -> Result<Vec<f64>> {
    if predictor.nrows() != block.n_cases() {
        return Err(Error::invalid(format!(
            "predictor has {} cases but the block has {}",
            predictor.nrows(),
            block.n_cases()
        )));
    }
    require_centered(block)?;
    let reg = Regression::new(predictor)?;
    Ok(row_f_values(block.matrix().as_dmatrix(), &reg))
}

fn row_f_values(data: &DMatrix<f64>, reg: &Regression) -> Vec<f64> {
    (0..data.nrows())
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = data.row(i).iter().copied().collect();
            reg.f_value(&row)
        })
        .collect()
}

/// Draws `k` distinct rows and shuffles each one. Returns (row index, permuted values)
/// in draw order.
fn draw_permuted_rows<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    k: usize,
    rng: &mut R,
) -> Vec<(usize, Vec<f64>)> {
    let rows = index::sample(rng, data.nrows(), k).into_vec();
    rows.into_iter()
        .map(|i| {
            let mut values: Vec<f64> = data.row(i).iter().copied().collect();
            values.shuffle(rng);
            (i, values)
        })
        .collect()
}

fn shuffle_rows<R: Rng + ?Sized>(data: &DMatrix<f64>, rows: &[usize], rng: &mut R) -> DMatrix<f64> {
    let mut out = data.clone();
    for &i in rows {
        let mut values: Vec<f64> = data.row(i).iter().copied().collect();
        values.shuffle(rng);
        for (j, x) in values.into_iter().enumerate() {
            out[(i, j)] = x;
        }
    }
    out
}

/// Shuffles the entries of each listed row across cases; other rows are untouched.
pub fn permute_rows<R: Rng + ?Sized>(
    block: &DataBlock,
    row_indices: &[usize],
    rng: &mut R,
) -> Result<DataBlock> {
    let d = block.n_features();
    for (pos, &i) in row_indices.iter().enumerate() {
        if i >= d {
            return Err(Error::invalid(format!("row index {i} out of range for {d} rows")));
        }
        if row_indices[..pos].contains(&i) {
            return Err(Error::invalid(format!("row index {i} given twice")));
        }
    }
    let permuted = shuffle_rows(block.matrix().as_dmatrix(), row_indices, rng);
    Ok(block.with_matrix(RealMatrix::from_trusted(permuted)))
}

/// Who produced the score vectors under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDescriptor {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub space: Option<Space>,
    pub block: usize,
    pub block_name: String,
    pub components: Components,
}

/// Produces the predictor scores for a jackstraw run, from original or permuted blocks.
pub trait ScoreModel: Sync {
    /// Index of the block whose rows are tested.
    fn block(&self) -> usize;

    /// n × r predictor matrix computed from `blocks`.
    fn predictor(&self, blocks: &[DataBlock]) -> Result<DMatrix<f64>>;

    fn describe(&self, blocks: &[DataBlock]) -> TargetDescriptor;
}

/// Scores taken from an AJIVE decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct AjiveScores {
    pub initial_ranks: Vec<usize>,
    pub joint_rank: JointRank,
    pub options: AjiveOptions,
    pub space: Space,
    pub block: usize,
    pub components: Components,
}

impl ScoreModel for AjiveScores {
    fn block(&self) -> usize {
        self.block
    }

    fn predictor(&self, blocks: &[DataBlock]) -> Result<DMatrix<f64>> {
        let dec = decompose(blocks, &self.initial_ranks, self.joint_rank, self.options)?;
        dec.score_matrix(self.space, Some(self.block), self.components)
    }

    fn describe(&self, blocks: &[DataBlock]) -> TargetDescriptor {
        TargetDescriptor {
            method: "ajive".into(),
            space: Some(self.space),
            block: self.block,
            block_name: blocks.get(self.block).map(|b| b.name().to_string()).unwrap_or_default(),
            components: self.components,
        }
    }
}

/// Scores from a per-block PCA (the classic single-block jackstraw).
#[derive(Debug, Clone, PartialEq)]
pub struct PcaScores {
    pub block: usize,
    pub rank: usize,
    pub components: Components,
}

impl ScoreModel for PcaScores {
    fn block(&self) -> usize {
        self.block
    }

    fn predictor(&self, blocks: &[DataBlock]) -> Result<DMatrix<f64>> {
        let block = blocks
            .get(self.block)
            .ok_or_else(|| Error::invalid(format!("block index {} out of range", self.block)))?;
        let p = pca(block.centered().matrix(), self.rank)?;
        match self.components {
            Components::One(c) if c < self.rank => {
                Ok(DMatrix::from_column_slice(p.normalized_scores.ncols(), 1, p.normalized_scores.row(c).transpose().as_slice()))
            }
            Components::One(c) => Err(Error::invalid(format!(
                "component {c} out of range for a rank-{} PCA",
                self.rank
            ))),
            Components::All => Ok(p.normalized_scores.transpose()),
        }
    }

    fn describe(&self, blocks: &[DataBlock]) -> TargetDescriptor {
        TargetDescriptor {
            method: "pca".into(),
            space: None,
            block: self.block,
            block_name: blocks.get(self.block).map(|b| b.name().to_string()).unwrap_or_default(),
            components: self.components,
        }
    }
}

fn centered_blocks(blocks: &[DataBlock]) -> Vec<DataBlock> {
    blocks.iter().map(DataBlock::centered).collect()
}

fn target_block<'a, M: ScoreModel + ?Sized>(blocks: &'a [DataBlock], model: &M) -> Result<&'a DataBlock> {
    blocks
        .get(model.block())
        .ok_or_else(|| Error::invalid(format!("block index {} out of range", model.block())))
}

/// Pooled `S·K` null F statistics, in replicate order.
///
/// Replicate `b` draws from [`replicate_rng`]`(seed, b)`, so the result does
/// not depend on how replicates are scheduled across threads.
pub fn null_samples<M: ScoreModel + ?Sized>(
    blocks: &[DataBlock],
    model: &M,
    config: &JackstrawConfig,
) -> Result<Vec<f64>> {
    let blocks = centered_blocks(blocks);
    let target = target_block(&blocks, model)?;
    config.validate(target.n_features())?;
    let data = target.matrix().as_dmatrix();

    let fixed = match config.mode {
        Mode::Approximate => Some(Regression::new(&model.predictor(&blocks)?)?),
        Mode::Full => None,
    };

    let per_replicate: Vec<Vec<f64>> = (0..config.n_reps)
        .into_par_iter()
        .map(|b| {
            let mut rng = replicate_rng(config.seed, b as u64);
            let drawn = draw_permuted_rows(data, config.k_rows, &mut rng);
            let values = match &fixed {
                Some(reg) => drawn.iter().map(|(_, y)| reg.f_value(y)).collect(),
                None => {
                    let mut permuted = data.clone();
                    for (i, y) in &drawn {
                        for (j, x) in y.iter().enumerate() {
                            permuted[(*i, j)] = *x;
                        }
                    }
                    let mut refit = blocks.clone();
                    refit[model.block()] = target.with_matrix(RealMatrix::from_trusted(permuted));
                    let reg = model
                        .predictor(&refit)
                        .and_then(|p| Regression::new(&p))
                        .map_err(|e| Error::Replicate { index: b, source: Box::new(e) })?;
                    drawn.iter().map(|(_, y)| reg.f_value(y)).collect()
                }
            };
            Ok(values)
        })
        .collect::<Result<_>>()?;

    Ok(per_replicate.into_iter().flatten().collect())
}

/// `p_j = #{b : F_j ≤ F_null_b} / B`, or `(1 + count)/(1 + B)` with smoothing.
/// An infinite observed statistic always gets p = 0.
pub fn empirical_pvalues(f_observed: &[f64], f_null: &[f64], smoothing: bool) -> Result<Vec<f64>> {
    if f_null.is_empty() {
        return Err(Error::invalid("null sample is empty"));
    }
    let mut sorted = f_null.to_vec();
    sorted.sort_by(f64::total_cmp);
    let b = sorted.len() as f64;
    Ok(f_observed
        .iter()
        .map(|&f| {
            if f == f64::INFINITY {
                return 0.0;
            }
            let below = sorted.partition_point(|&x| x < f);
            let count = (sorted.len() - below) as f64;
            if smoothing {
                (1.0 + count) / (1.0 + b)
            } else {
                count / b
            }
        })
        .collect())
}

/// Multiple-testing adjustment over all `p.len()` tests.
pub fn adjust_pvalues(p: &[f64], method: Adjustment) -> Vec<f64> {
    let d = p.len() as f64;
    match method {
        Adjustment::None => p.to_vec(),
        Adjustment::Bonferroni => p.iter().map(|x| (x * d).min(1.0)).collect(),
        Adjustment::Bh => {
            let mut order: Vec<usize> = (0..p.len()).collect();
            order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
            let mut adjusted = vec![0.0; p.len()];
            let mut running = 1.0_f64;
            for (rank, &i) in order.iter().enumerate().rev() {
                running = running.min(p[i] * d / (rank + 1) as f64);
                adjusted[i] = running.min(1.0);
            }
            adjusted
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JackstrawResult {
    pub target: TargetDescriptor,
    pub config: JackstrawConfig,
    pub feature_names: Vec<String>,
    #[serde(with = "crate::serde_f64")]
    pub f_observed: Vec<f64>,
    #[serde(with = "crate::serde_f64")]
    pub f_null: Vec<f64>,
    pub p_raw: Vec<f64>,
    pub p_adjusted: Vec<f64>,
    pub significant: Vec<bool>,
    /// Observed statistics that hit the perfect-fit sentinel.
    pub n_infinite_observed: usize,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl JackstrawResult {
    pub fn n_significant(&self) -> usize {
        self.significant.iter().filter(|s| **s).count()
    }

    pub fn significant_indices(&self) -> Vec<usize> {
        self.significant
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.then_some(i))
            .collect()
    }
}

/// Observed statistics, null sample, p-values and significance calls.
pub fn run<M: ScoreModel + ?Sized>(
    blocks: &[DataBlock],
    model: &M,
    config: &JackstrawConfig,
) -> Result<JackstrawResult> {
    let blocks = centered_blocks(blocks);
    let target = target_block(&blocks, model)?;
    let warnings = config.validate(target.n_features())?;

    let predictor = model.predictor(&blocks)?;
    let f_observed = observed_f(target, &predictor)?;
    let f_null = null_samples(&blocks, model, config)?;
    let p_raw = empirical_pvalues(&f_observed, &f_null, config.smoothing)?;
    let p_adjusted = adjust_pvalues(&p_raw, config.adjustment);
    let significant = p_adjusted.iter().map(|p| *p <= config.alpha).collect();
    let n_infinite_observed = f_observed.iter().filter(|f| f.is_infinite()).count();

    Ok(JackstrawResult {
        target: model.describe(&blocks),
        config: config.clone(),
        feature_names: target.feature_names().to_vec(),
        f_observed,
        f_null,
        p_raw,
        p_adjusted,
        significant,
        n_infinite_observed,
        warnings,
    })
}

/// Jackstraw on AJIVE loadings of one block.
pub fn jackstraw_run(
    blocks: &[DataBlock],
    space: Space,
    block: usize,
    components: Components,
    initial_ranks: &[usize],
    joint_rank: JointRank,
    config: &JackstrawConfig,
) -> Result<JackstrawResult> {
    let model = AjiveScores {
        initial_ranks: initial_ranks.to_vec(),
        joint_rank,
        options: AjiveOptions::default(),
        space,
        block,
        components,
    };
    run(blocks, &model, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    /// Normal-equations oracle: β = (VᵀV)⁻¹Vᵀy via explicit inverse.
    fn oracle_f(y: &[f64], v: &DMatrix<f64>) -> f64 {
        let (n, r) = v.shape();
        let y = DVector::from_column_slice(y);
        let beta = (v.transpose() * v).try_inverse().unwrap() * v.transpose() * &y;
        let sse0 = y.dot(&y);
        let resid = &y - v * beta;
        let sse1 = resid.dot(&resid);
        ((sse0 - sse1) / r as f64) / (sse1 / (n - r) as f64)
    }

    fn centered(v: Vec<f64>) -> Vec<f64> {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.into_iter().map(|x| x - m).collect()
    }

    fn noise_block(d: usize, n: usize, seed: u64) -> DataBlock {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let m = DMatrix::from_fn(d, n, |_, _| normal.sample(&mut rng));
        DataBlock::unlabeled("noise", RealMatrix::from_dmatrix(m).unwrap()).centered()
    }

    #[test]
    fn f_zero_when_orthogonal() {
        let v = DMatrix::from_column_slice(4, 1, &[0.5, 0.5, -0.5, -0.5]);
        let y = [1.0, -1.0, 1.0, -1.0];
        assert_eq!(f_statistic(&y, &v).unwrap(), 0.0);
    }

    #[test]
    fn f_infinite_on_perfect_fit() {
        let v = DMatrix::from_column_slice(4, 1, &[0.5, -0.5, 0.5, -0.5]);
        let y = [1.5, -1.5, 1.5, -1.5];
        assert_eq!(f_statistic(&y, &v).unwrap(), f64::INFINITY);
    }

    #[test]
    fn f_matches_normal_equations_example() {
        let v = DMatrix::from_column_slice(4, 1, &[0.5, -0.5, 0.5, -0.5]);
        let y = [1.0, -1.0, 2.0, -2.0];
        let f = f_statistic(&y, &v).unwrap();
        let expected = oracle_f(&y, &v);
        // SSE0 = 10, L = 3, SSE1 = 1 -> F = 9 / (1/3) = 27
        assert!((expected - 27.0).abs() < 1e-12);
        assert!((f - expected).abs() / expected < 1e-10);
    }

    #[test]
    fn f_errors() {
        let v = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, -1.0]);
        assert!(matches!(f_statistic(&[1.0, 1.0, 1.0], &v), Err(Error::Precondition(_))));
        assert!(f_statistic(&[1.0, -1.0], &v).is_err());
        let singular = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, -1.0, 2.0, 0.0, -2.0]);
        assert!(matches!(f_statistic(&[1.0, 0.0, -1.0], &singular), Err(Error::InvalidInput(_))));
        let square = DMatrix::from_column_slice(1, 1, &[1.0]);
        assert!(f_statistic(&[0.0], &square).is_err());
    }

    #[test]
    fn f_matches_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let normal = Normal::new(0.0, 1.0).unwrap();
        for case in 0..200 {
            let n = 5 + case % 40;
            let r = 1 + case % 3;
            let y = centered((0..n).map(|_| normal.sample(&mut rng)).collect());
            let v = DMatrix::from_fn(n, r, |_, _| normal.sample(&mut rng));
            let f = f_statistic(&y, &v).unwrap();
            let o = oracle_f(&y, &v);
            assert!((f - o).abs() / o.max(1.0) < 1e-10, "case {case}: {f} vs {o}");
        }
    }

    #[test]
    fn loading_vector_definition() {
        let m = RealMatrix::from_row_major(2, 2, &[1.0, -1.0, -2.0, 2.0]).unwrap();
        let block = DataBlock::unlabeled("b", m);
        let l = loading_vector(&block, &[1.0, 0.0]).unwrap();
        assert_eq!(l.as_slice(), &[1.0, -2.0]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let zero = loading_vector(&block, &[s, s]).unwrap();
        assert!(zero.amax() < 1e-15);
        assert!(loading_vector(&block, &[1.0]).is_err());
        assert!(loading_vector(&block, &[2.0, 0.0]).is_err());
    }

    #[test]
    fn observed_f_on_noise_is_near_one() {
        let block = noise_block(200, 160, 1);
        let v = DMatrix::from_fn(160, 1, |j, _| if j < 80 { 1.0 } else { -1.0 } / 160f64.sqrt());
        let f = observed_f(&block, &v).unwrap();
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        assert!((0.7..=1.4).contains(&mean), "mean F {mean}");
    }

    #[test]
    fn duplicated_row_gives_identical_f() {
        let block = noise_block(5, 30, 2);
        let mut m = block.matrix().as_dmatrix().clone();
        let first = m.row(0).into_owned();
        m.set_row(3, &first);
        let block = DataBlock::unlabeled("dup", RealMatrix::from_dmatrix(m).unwrap());
        let v = DMatrix::from_fn(30, 1, |j, _| (j as f64 - 14.5) / 10.0);
        let f = observed_f(&block, &v).unwrap();
        assert_eq!(f[0], f[3]);
    }

    #[test]
    fn permute_rows_contract() {
        let block = noise_block(6, 12, 3);
        let mut rng = replicate_rng(5, 0);
        let out = permute_rows(&block, &[1, 4], &mut rng).unwrap();
        for i in [0, 2, 3, 5] {
            assert_eq!(out.matrix().row_vec(i), block.matrix().row_vec(i));
        }
        for i in [1, 4] {
            let mut a = out.matrix().row_vec(i);
            let mut b = block.matrix().row_vec(i);
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a, b);
        }
        assert!(out.is_centered());
        let again = permute_rows(&block, &[1, 4], &mut replicate_rng(5, 0)).unwrap();
        assert_eq!(again, out);
        assert!(permute_rows(&block, &[1, 1], &mut rng).is_err());
        assert!(permute_rows(&block, &[6], &mut rng).is_err());
    }

    #[test]
    fn permuting_constant_rows_is_identity() {
        let m = RealMatrix::from_row_major(2, 3, &[0.0; 6]).unwrap();
        let block = DataBlock::unlabeled("z", m);
        let out = permute_rows(&block, &[0, 1], &mut replicate_rng(1, 1)).unwrap();
        assert_eq!(out, block);
    }

    #[test]
    fn pvalue_boundaries_and_ties() {
        let null: Vec<f64> = (1..=100).map(f64::from).collect();
        let p = empirical_pvalues(&[1000.0, 1.0, 50.0, f64::INFINITY], &null, false).unwrap();
        assert_eq!(p, vec![0.0, 1.0, 0.51, 0.0]);
        let s = empirical_pvalues(&[1000.0], &null, true).unwrap();
        assert!((s[0] - 1.0 / 101.0).abs() < 1e-15);
        assert!(empirical_pvalues(&[1.0], &[], false).is_err());
    }

    #[test]
    fn adjustment_examples() {
        let mut p = vec![0.5; 10];
        p[0] = 0.01;
        assert!((adjust_pvalues(&p, Adjustment::Bonferroni)[0] - 0.1).abs() < 1e-15);
        assert_eq!(adjust_pvalues(&[0.5, 0.2, 0.9], Adjustment::Bonferroni)[0], 1.0);
        let bh = adjust_pvalues(&[0.01, 0.02, 0.03, 0.04], Adjustment::Bh);
        for x in bh {
            assert!((x - 0.04).abs() < 1e-15);
        }
        assert_eq!(adjust_pvalues(&[0.3, 0.1], Adjustment::None), vec![0.3, 0.1]);
    }

    #[test]
    fn bh_matches_step_up_oracle() {
        // oracle: reject the largest k with p_(k) <= k q / d, all smaller ones too
        let p = [0.001, 0.2, 0.012, 0.04, 0.03, 0.5, 0.0095, 0.9];
        let adj = adjust_pvalues(&p, Adjustment::Bh);
        for q in [0.01, 0.05, 0.1, 0.25] {
            let mut sorted = p.to_vec();
            sorted.sort_by(f64::total_cmp);
            let d = p.len() as f64;
            let k = (1..=p.len()).rev().find(|&k| sorted[k - 1] <= k as f64 * q / d);
            let cutoff = k.map_or(-1.0, |k| sorted[k - 1]);
            for (pi, ai) in p.iter().zip(&adj) {
                assert_eq!(*pi <= cutoff, *ai <= q, "q={q} p={pi} adj={ai}");
            }
        }
    }

    #[test]
    fn config_validation() {
        let c = JackstrawConfig { k_rows: 6, ..Default::default() };
        assert!(c.validate(10).is_err());
        assert!(c.validate(12).is_ok());
        let c = JackstrawConfig { n_reps: 0, ..Default::default() };
        assert!(c.validate(10).is_err());
        let c = JackstrawConfig { n_reps: 10, ..Default::default() };
        assert_eq!(c.validate(10).unwrap().len(), 1);
        let c = JackstrawConfig { alpha: 1.5, ..Default::default() };
        assert!(c.validate(10).is_err());
    }

    #[test]
    fn single_replicate_single_row() {
        let blocks = vec![noise_block(20, 30, 7), noise_block(10, 30, 8)];
        let model = PcaScores { block: 0, rank: 2, components: Components::One(0) };
        let config = JackstrawConfig { k_rows: 1, n_reps: 1, ..Default::default() };
        assert_eq!(null_samples(&blocks, &model, &config).unwrap().len(), 1);
        let config = JackstrawConfig { k_rows: 3, n_reps: 7, ..Default::default() };
        assert_eq!(null_samples(&blocks, &model, &config).unwrap().len(), 21);
    }

    #[test]
    fn null_is_thread_count_independent() {
        let blocks = vec![noise_block(30, 40, 11), noise_block(25, 40, 12)];
        let model = AjiveScores {
            initial_ranks: vec![2, 2],
            joint_rank: JointRank::Fixed(1),
            options: AjiveOptions::default(),
            space: Space::Joint,
            block: 0,
            components: Components::One(0),
        };
        for mode in [Mode::Approximate, Mode::Full] {
            let config = JackstrawConfig { k_rows: 2, n_reps: 40, mode, seed: 77, ..Default::default() };
            let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
            let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
            let a = one.install(|| null_samples(&blocks, &model, &config)).unwrap();
            let b = four.install(|| null_samples(&blocks, &model, &config)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn result_invariants() {
        let blocks = vec![noise_block(40, 50, 21), noise_block(30, 50, 22)];
        let model = PcaScores { block: 0, rank: 2, components: Components::One(0) };
        let config = JackstrawConfig { n_reps: 400, seed: 3, ..Default::default() };
        let res = run(&blocks, &model, &config).unwrap();
        assert_eq!(res.f_observed.len(), 40);
        assert_eq!(res.f_null.len(), 400);
        for i in 0..40 {
            assert!(res.p_adjusted[i] >= res.p_raw[i]);
            assert_eq!(res.significant[i], res.p_adjusted[i] <= config.alpha);
            for j in 0..40 {
                if res.f_observed[i] > res.f_observed[j] {
                    assert!(res.p_raw[i] <= res.p_raw[j]);
                }
            }
        }
        assert!(res.f_observed.iter().chain(&res.f_null).all(|f| *f >= 0.0));
        let again = run(&blocks, &model, &config).unwrap();
        assert_eq!(res, again);
    }

    proptest! {
        #[test]
        fn bonferroni_calls_are_subset_of_bh(p in proptest::collection::vec(0.0f64..1.0, 1..60), alpha in 0.001f64..0.5) {
            let bonf = adjust_pvalues(&p, Adjustment::Bonferroni);
            let bh = adjust_pvalues(&p, Adjustment::Bh);
            for i in 0..p.len() {
                prop_assert!(bh[i] >= p[i] - 1e-15);
                prop_assert!(bonf[i] >= bh[i] - 1e-12);
                if bonf[i] <= alpha { prop_assert!(bh[i] <= alpha); }
            }
        }

        #[test]
        fn pvalues_monotone_in_f(
            obs in proptest::collection::vec(0.0f64..20.0, 1..30),
            null in proptest::collection::vec(0.0f64..20.0, 1..50),
        ) {
            let p = empirical_pvalues(&obs, &null, false).unwrap();
            for i in 0..obs.len() {
                prop_assert!((0.0..=1.0).contains(&p[i]));
                for j in 0..obs.len() {
                    if obs[i] >= obs[j] { prop_assert!(p[i] <= p[j]); }
                }
            }
        }
    }
}
