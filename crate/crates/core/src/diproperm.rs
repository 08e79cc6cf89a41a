//! Direction-projection-permutation (DiProPerm) two-sample test.
//!
//! The data are projected on the normalized class mean-difference direction
//! and summarized by a univariate statistic. Class labels are then permuted,
//! the direction is recomputed from the permuted labels, and the observed
//! statistic is reported as a z-score against the permutation null.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jackstraw::replicate_rng;
use crate::linalg::RealMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionStatistic {
    /// Difference of the projected class means.
    MeanDifference,
    /// Welch two-sample t statistic of the projections.
    TStatistic,
}

impl fmt::Display for ProjectionStatistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProjectionStatistic::MeanDifference => "mean_difference",
            ProjectionStatistic::TStatistic => "t_statistic",
        })
    }
}

impl FromStr for ProjectionStatistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "mean_difference" | "md" | "mean" => Ok(ProjectionStatistic::MeanDifference),
            "t_statistic" | "t" => Ok(ProjectionStatistic::TStatistic),
            _ => Err(Error::invalid(format!("unknown projection statistic '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiProPermConfig {
    pub n_perm: usize,
    pub balanced: bool,
    pub batches: usize,
    pub seed: u64,
    pub statistic: ProjectionStatistic,
}

impl Default for DiProPermConfig {
    fn default() -> Self {
        DiProPermConfig {
            n_perm: 1000,
            balanced: true,
            batches: 10,
            seed: 0,
            statistic: ProjectionStatistic::MeanDifference,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiProPermResult {
    pub observed_stat: f64,
    pub null_stats: Vec<f64>,
    pub z_score: f64,
    pub z_interval: (f64, f64),
    pub batch_z_scores: Vec<f64>,
    pub empirical_pvalue: f64,
    /// Unit mean-difference direction of the original labels.
    pub direction: Vec<f64>,
    /// Permutations redrawn because the permuted direction was degenerate.
    pub retries: usize,
    pub n_class0: usize,
    pub n_class1: usize,
    pub config: DiProPermConfig,
}

fn class_sizes(labels: &[bool]) -> (usize, usize) {
    let n1 = labels.iter().filter(|l| **l).count();
    (labels.len() - n1, n1)
}

/// Normalized difference `mean(class 1) − mean(class 0)` of the columns of `x`.
pub fn mean_diff_direction(x: &RealMatrix, labels: &[bool]) -> Result<DVector<f64>> {
    if labels.len() != x.ncols() {
        return Err(Error::invalid(format!(
            "{} labels for {} cases",
            labels.len(),
            x.ncols()
        )));
    }
    let (n0, n1) = class_sizes(labels);
    if n0 == 0 || n1 == 0 {
        return Err(Error::invalid("both classes must be non-empty"));
    }
    let mut diff = DVector::zeros(x.nrows());
    for (col, &label) in x.column_iter().zip(labels) {
        if label {
            diff.axpy(1.0 / n1 as f64, &col, 1.0);
        } else {
            diff.axpy(-1.0 / n0 as f64, &col, 1.0);
        }
    }
    let norm = diff.norm();
    let scale = x.amax().max(f64::MIN_POSITIVE);
    if norm <= 1e-12 * scale {
        return Err(Error::numerical("class means coincide; the mean-difference direction is undefined"));
    }
    Ok(diff / norm)
}

fn projected_statistic(
    x: &RealMatrix,
    labels: &[bool],
    direction: &DVector<f64>,
    statistic: ProjectionStatistic,
) -> f64 {
    let proj = x.tr_mul(direction);
    let (mut s0, mut s1) = (Vec::new(), Vec::new());
    for (p, &l) in proj.iter().zip(labels) {
        if l {
            s1.push(*p);
        } else {
            s0.push(*p);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m0, m1) = (mean(&s0), mean(&s1));
    match statistic {
        ProjectionStatistic::MeanDifference => m1 - m0,
        ProjectionStatistic::TStatistic => {
            let var = |v: &[f64], m: f64| {
                v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
            };
            let se = (var(&s0, m0) / s0.len() as f64 + var(&s1, m1) / s1.len() as f64).sqrt();
            if se > 0.0 {
                (m1 - m0) / se
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Relabeling that keeps the class sizes.
///
/// Balanced draws split each original class as evenly as possible between
/// the two permuted classes; otherwise labels are shuffled uniformly.
fn permuted_labels<R: Rng + ?Sized>(labels: &[bool], balanced: bool, rng: &mut R) -> Vec<bool> {
    if !balanced {
        let mut out = labels.to_vec();
        out.shuffle(rng);
        return out;
    }
    let class1: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let class0: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    let (n0, n1) = (class0.len(), class1.len());
    let mut from1 = n1 / 2;
    if n1 % 2 == 1 && rng.random_bool(0.5) {
        from1 += 1;
    }
    let from1 = from1.max(n1.saturating_sub(n0)).min(n1);
    let from0 = n1 - from1;
    let mut out = vec![false; labels.len()];
    for i in index::sample(rng, n1, from1).into_iter() {
        out[class1[i]] = true;
    }
    for i in index::sample(rng, n0, from0).into_iter() {
        out[class0[i]] = true;
    }
    out
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (mean, sd)
}

pub fn diproperm_test(x: &RealMatrix, labels: &[bool], config: &DiProPermConfig) -> Result<DiProPermResult> {
    if config.n_perm < 100 {
        return Err(Error::invalid(format!(
            "at least 100 permutations are required, got {}",
            config.n_perm
        )));
    }
    if config.batches < 2 || config.n_perm / config.batches < 2 {
        return Err(Error::invalid(format!(
            "{} permutations cannot be split into {} batches of at least 2",
            config.n_perm, config.batches
        )));
    }
    if labels.len() != x.ncols() {
        return Err(Error::invalid(format!("{} labels for {} cases", labels.len(), x.ncols())));
    }
    let (n0, n1) = class_sizes(labels);
    if n0 < 2 || n1 < 2 {
        return Err(Error::invalid(format!(
            "each class needs at least 2 cases (got {n0} and {n1})"
        )));
    }

    let direction = mean_diff_direction(x, labels)?;
    let observed_stat = projected_statistic(x, labels, &direction, config.statistic);
    let max_retries = 10 * config.n_perm;

    let draws: Vec<(f64, usize)> = (0..config.n_perm)
        .into_par_iter()
        .map(|p| {
            let mut rng = replicate_rng(config.seed, p as u64);
            let mut retries = 0;
            loop {
                let permuted = permuted_labels(labels, config.balanced, &mut rng);
                match mean_diff_direction(x, &permuted) {
                    Ok(dir) => {
                        return Ok((projected_statistic(x, &permuted, &dir, config.statistic), retries))
                    }
                    Err(Error::Numerical(_)) if retries < max_retries => retries += 1,
                    Err(e) => return Err(Error::Replicate { index: p, source: Box::new(e) }),
                }
            }
        })
        .collect::<Result<_>>()?;

    let null_stats: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let retries = draws.iter().map(|d| d.1).sum();
    if null_stats.iter().any(|s| !s.is_finite()) {
        return Err(Error::numerical("a permuted statistic is not finite"));
    }
    let (mean, sd) = mean_sd(&null_stats);
    if sd.is_nan() || sd <= 0.0 {
        return Err(Error::numerical("the permutation null has zero spread"));
    }
    let z_score = (observed_stat - mean) / sd;

    let batch_len = config.n_perm / config.batches;
    let batch_z_scores: Vec<f64> = null_stats
        .chunks(batch_len)
        .take(config.batches)
        .map(|chunk| {
            let (m, s) = mean_sd(chunk);
            if s > 0.0 {
                (observed_stat - m) / s
            } else {
                z_score
            }
        })
        .collect();
    let (_, batch_sd) = mean_sd(&batch_z_scores);
    let z_interval = (z_score - 2.0 * batch_sd, z_score + 2.0 * batch_sd);

    let exceed = null_stats.iter().filter(|s| **s >= observed_stat).count();

    Ok(DiProPermResult {
        observed_stat,
        null_stats,
        z_score,
        z_interval,
        batch_z_scores,
        empirical_pvalue: exceed as f64 / config.n_perm as f64,
        direction: direction.as_slice().to_vec(),
        retries,
        n_class0: n0,
        n_class1: n1,
        config: config.clone(),
    })
}
