//! Two-block toy example with known joint and individual structure, and the
//! AJIVE-jackstraw versus PCA-jackstraw comparison run on it.
//!
//! Block `m` is `J_m + I_m + E_m`:
//!
//! - `J_m = a_J · u_m s_Jᵀ`, where `u_m` indicates the joint rows and `s_J` is
//!   `+1` on the first half of the cases and `−1` on the second;
//! - `I_m = a_I · w_m s_mᵀ`, where `w_m` indicates the individual rows and the
//!   case patterns over consecutive quarters are `(+,−,+,−)` for block 1 and
//!   `(+,−,−,+)` for block 2;
//! - `E_m` is i.i.d. Gaussian noise.
//!
//! The three case patterns are mutually orthogonal whenever `n` is a multiple of 4.

use std::ops::Range;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ajive::{decompose, AjiveOptions, Components, DataBlock, JointRank, Space};
use crate::error::{Error, Result};
use crate::jackstraw::{self, AjiveScores, JackstrawConfig, PcaScores};
use crate::linalg::{pca, vector_angle, RealMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub d1: usize,
    pub d2: usize,
    pub n: usize,
    pub joint_amplitude: f64,
    pub individual_amplitude: f64,
    pub noise_variance: f64,
    /// 0-based half-open row ranges, one per block.
    pub joint_support: [Range<usize>; 2],
    pub individual_support: [Range<usize>; 2],
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            d1: 120,
            d2: 120,
            n: 160,
            joint_amplitude: 0.7,
            individual_amplitude: 1.0,
            // standard deviation 2
            noise_variance: 4.0,
            joint_support: [0..80, 0..40],
            individual_support: [80..120, 40..120],
            seed: 0,
        }
    }
}

impl ToyConfig {
    pub fn noiseless() -> Self {
        ToyConfig {
            noise_variance: 0.0,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn dims(&self) -> [usize; 2] {
        [self.d1, self.d2]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 || self.n % 4 != 0 {
            return Err(Error::invalid(format!(
                "the number of cases must be a positive multiple of 4, got {}",
                self.n
            )));
        }
        for (name, x) in [
            ("joint_amplitude", self.joint_amplitude),
            ("individual_amplitude", self.individual_amplitude),
        ] {
            if !x.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::invalid("noise_variance must be finite and non-negative"));
        }
        for (m, &d) in self.dims().iter().enumerate() {
            if d == 0 {
                return Err(Error::invalid(format!("block {} has no features", m + 1)));
            }
            let joint = &self.joint_support[m];
            let indiv = &self.individual_support[m];
            for (what, r) in [("joint", joint), ("individual", indiv)] {
                if r.start >= r.end || r.end > d {
                    return Err(Error::invalid(format!(
                        "{what} support {}..{} of block {} must be non-empty and within 0..{d}",
                        r.start,
                        r.end,
                        m + 1
                    )));
                }
            }
            if joint.start < indiv.end && indiv.start < joint.end {
                return Err(Error::invalid(format!(
                    "joint and individual supports of block {} overlap",
                    m + 1
                )));
            }
        }
        Ok(())
    }
}

/// Known structure behind a simulated toy data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyGroundTruth {
    /// Unit-norm joint case pattern.
    pub joint_scores: Vec<f64>,
    /// Unit-norm individual case pattern of each block.
    pub individual_scores: Vec<Vec<f64>>,
    /// 0/1 joint row indicator of each block.
    pub joint_loadings: Vec<Vec<f64>>,
    pub individual_loadings: Vec<Vec<f64>>,
    pub joint_masks: Vec<Vec<bool>>,
    pub individual_masks: Vec<Vec<bool>>,
}

impl ToyGroundTruth {
    pub fn loading(&self, space: Space, block: usize) -> &[f64] {
        match space {
            Space::Joint => &self.joint_loadings[block],
            Space::Individual => &self.individual_loadings[block],
        }
    }

    pub fn mask(&self, space: Space, block: usize) -> &[bool] {
        match space {
            Space::Joint => &self.joint_masks[block],
            Space::Individual => &self.individual_masks[block],
        }
    }
}

/// Simulated blocks with their signal and noise parts.
#[derive(Debug, Clone)]
pub struct ToyData {
    /// Row-centered input blocks.
    pub blocks: Vec<DataBlock>,
    pub truth: ToyGroundTruth,
    pub joint: Vec<DMatrix<f64>>,
    pub individual: Vec<DMatrix<f64>>,
    pub noise: Vec<DMatrix<f64>>,
}

fn case_pattern(n: usize, signs: [f64; 4]) -> DVector<f64> {
    DVector::from_fn(n, |j, _| signs[4 * j / n])
}

fn indicator(d: usize, support: &Range<usize>) -> DVector<f64> {
    DVector::from_fn(d, |i, _| if support.contains(&i) { 1.0 } else { 0.0 })
}

pub fn simulate_toy(config: &ToyConfig) -> Result<ToyData> {
    config.validate()?;
    let n = config.n;
    let s_joint = case_pattern(n, [1.0, 1.0, -1.0, -1.0]);
    let s_indiv = [
        case_pattern(n, [1.0, -1.0, 1.0, -1.0]),
        case_pattern(n, [1.0, -1.0, -1.0, 1.0]),
    ];

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, config.noise_variance.sqrt())
        .map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;
    let case_ids = crate::ajive::default_case_ids(n);

    let mut data = ToyData {
        blocks: Vec::with_capacity(2),
        truth: ToyGroundTruth {
            joint_scores: s_joint.normalize().as_slice().to_vec(),
            individual_scores: s_indiv.iter().map(|s| s.normalize().as_slice().to_vec()).collect(),
            joint_loadings: Vec::new(),
            individual_loadings: Vec::new(),
            joint_masks: Vec::new(),
            individual_masks: Vec::new(),
        },
        joint: Vec::new(),
        individual: Vec::new(),
        noise: Vec::new(),
    };

    for (m, s_indiv) in s_indiv.iter().enumerate() {
        let d = config.dims()[m];
        let u = indicator(d, &config.joint_support[m]);
        let w = indicator(d, &config.individual_support[m]);
        let joint = &u * s_joint.transpose() * config.joint_amplitude;
        let individual = &w * s_indiv.transpose() * config.individual_amplitude;
        let mut noise = DMatrix::zeros(d, n);
        if config.noise_variance > 0.0 {
            // row-major draw order
            for i in 0..d {
                for j in 0..n {
                    noise[(i, j)] = normal.sample(&mut rng);
                }
            }
        }
        let sum = &joint + &individual + &noise;
        let features = (1..=d).map(|i| format!("f{i}")).collect();
        let block = DataBlock::new(
            format!("datablock{}", m + 1),
            RealMatrix::from_dmatrix(sum)?,
            features,
            case_ids.clone(),
        )?
        .centered();

        data.truth.joint_masks.push(u.iter().map(|x| *x > 0.0).collect());
        data.truth.individual_masks.push(w.iter().map(|x| *x > 0.0).collect());
        data.truth.joint_loadings.push(u.as_slice().to_vec());
        data.truth.individual_loadings.push(w.as_slice().to_vec());
        data.blocks.push(block);
        data.joint.push(joint);
        data.individual.push(individual);
        data.noise.push(noise);
    }
    Ok(data)
}

/// Proportion of features on which two significance masks agree.
pub fn accuracy(significant: &[bool], truth: &[bool]) -> Result<f64> {
    check_lengths(significant, truth)?;
    let agree = significant.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(agree as f64 / truth.len() as f64)
}

/// Share of truly significant features that were called significant;
/// `None` when the truth mask is empty.
pub fn true_positive_rate(significant: &[bool], truth: &[bool]) -> Result<Option<f64>> {
    check_lengths(significant, truth)?;
    let positives = truth.iter().filter(|t| **t).count();
    if positives == 0 {
        return Ok(None);
    }
    let hits = significant.iter().zip(truth).filter(|(s, t)| **s && **t).count();
    Ok(Some(hits as f64 / positives as f64))
}

fn check_lengths(a: &[bool], b: &[bool]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid(format!(
            "masks must be non-empty and of equal length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    /// `assignment[t]` is the estimated component paired with truth `t`.
    pub assignment: Vec<usize>,
    pub angles: Vec<f64>,
    pub total_angle: f64,
}

/// Assignment of estimated to true loading vectors minimizing the summed angle.
/// Exhaustive; intended for a handful of components.
pub fn pair_components(estimated: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<Pairing> {
    if estimated.len() != truth.len() || truth.is_empty() {
        return Err(Error::invalid(format!(
            "need equal, non-zero component counts ({} estimated vs {} true)",
            estimated.len(),
            truth.len()
        )));
    }
    let k = truth.len();
    let angles: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| estimated.iter().map(|e| vector_angle(e, t)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let mut best: Option<Pairing> = None;
    for perm in (0..k).permutations(k) {
        let picked: Vec<f64> = perm.iter().enumerate().map(|(t, &e)| angles[t][e]).collect();
        let total: f64 = picked.iter().sum();
        if best.as_ref().is_none_or(|b| total < b.total_angle) {
            best = Some(Pairing {
                assignment: perm,
                angles: picked,
                total_angle: total,
            });
        }
    }
    Ok(best.expect("at least one permutation"))
}

/// Column labels of the comparison tables, in table order.
pub const COMPARISON_COLUMNS: [&str; 4] = [
    "D1.(joint/PC2)",
    "D1.(indivi/PC1)",
    "D2.(joint/PC2)",
    "D2.(indivi/PC1)",
];

/// Block and space of each comparison column.
pub const COMPARISON_CELLS: [(usize, Space); 4] = [
    (0, Space::Joint),
    (0, Space::Individual),
    (1, Space::Joint),
    (1, Space::Individual),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub accuracy: [f64; 4],
    pub angle: [f64; 4],
    pub true_positive_rate: [Option<f64>; 4],
    pub n_significant: [usize; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub columns: [String; 4],
    pub ajive: MethodRow,
    pub pca: MethodRow,
    /// 0-based principal component paired with each column.
    pub pca_components: [usize; 4],
    pub toy: ToyConfig,
    pub jackstraw: JackstrawConfig,
}

/// Deterministic per-cell seed derived from a master seed (splitmix64 step).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15_u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

enum Cell {
    Ajive(AjiveScores),
    Pca(PcaScores),
}

/// Runs AJIVE-jackstraw and PCA-jackstraw on one simulated data set and
/// tabulates accuracy and loading angles per block and mode of variation.
pub fn compare_methods(toy: &ToyConfig, jconfig: &JackstrawConfig) -> Result<Comparison> {
    let data = simulate_toy(toy)?;
    let blocks = &data.blocks;
    let truth = &data.truth;
    let ranks = [2usize, 2];
    let dec = decompose(blocks, &ranks, JointRank::Fixed(1), AjiveOptions::default())?;

    let mut cells: Vec<Cell> = Vec::with_capacity(8);
    let mut ajive_angle = [0.0; 4];
    for (c, &(m, space)) in COMPARISON_CELLS.iter().enumerate() {
        let v = dec.select_scores(space, Some(m), 0)?;
        let loading = &dec.blocks[m].data * v;
        ajive_angle[c] = vector_angle(loading.as_slice(), truth.loading(space, m))?;
        cells.push(Cell::Ajive(AjiveScores {
            initial_ranks: ranks.to_vec(),
            joint_rank: JointRank::Fixed(1),
            options: AjiveOptions::default(),
            space,
            block: m,
            components: Components::One(0),
        }));
    }

    let mut pca_components = [0usize; 4];
    let mut pca_angle = [0.0; 4];
    for (m, block) in blocks.iter().enumerate() {
        let p = pca(block.matrix(), 2)?;
        let estimated: Vec<Vec<f64>> = (0..2).map(|k| p.loading(k).as_slice().to_vec()).collect();
        let targets = vec![
            truth.loading(Space::Joint, m).to_vec(),
            truth.loading(Space::Individual, m).to_vec(),
        ];
        let pairing = pair_components(&estimated, &targets)?;
        for (t, space) in [Space::Joint, Space::Individual].into_iter().enumerate() {
            let c = 2 * m + t;
            debug_assert_eq!(COMPARISON_CELLS[c], (m, space));
            pca_components[c] = pairing.assignment[t];
            pca_angle[c] = pairing.angles[t];
        }
    }
    for c in 0..4 {
        cells.push(Cell::Pca(PcaScores {
            block: COMPARISON_CELLS[c].0,
            rank: 2,
            components: Components::One(pca_components[c]),
        }));
    }

    let outcomes: Vec<(f64, Option<f64>, usize)> = cells
        .par_iter()
        .enumerate()
        .map(|(i, cell)| {
            let config = JackstrawConfig {
                seed: derive_seed(jconfig.seed, i as u64),
                ..jconfig.clone()
            };
            let (m, space) = COMPARISON_CELLS[i % 4];
            let result = match cell {
                Cell::Ajive(model) => jackstraw::run(blocks, model, &config)?,
                Cell::Pca(model) => jackstraw::run(blocks, model, &config)?,
            };
            let mask = truth.mask(space, m);
            Ok((
                accuracy(&result.significant, mask)?,
                true_positive_rate(&result.significant, mask)?,
                result.n_significant(),
            ))
        })
        .collect::<Result<_>>()?;

    let row = |offset: usize, angle: [f64; 4]| MethodRow {
        accuracy: std::array::from_fn(|c| outcomes[offset + c].0),
        angle,
        true_positive_rate: std::array::from_fn(|c| outcomes[offset + c].1),
        n_significant: std::array::from_fn(|c| outcomes[offset + c].2),
    };

    Ok(Comparison {
        columns: COMPARISON_COLUMNS.map(String::from),
        ajive: row(0, ajive_angle),
        pca: row(4, pca_angle),
        pca_components,
        toy: toy.clone(),
        jackstraw: jconfig.clone(),
    })
}

/// Median accuracy and angle tables over several simulated data sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub columns: [String; 4],
    pub replicates: usize,
    pub ajive_accuracy: [f64; 4],
    pub ajive_angle: [f64; 4],
    pub pca_accuracy: [f64; 4],
    pub pca_angle: [f64; 4],
    pub runs: Vec<Comparison>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Repeats [`compare_methods`] with seeds `seed, seed + 1, …` for both the
/// simulation and the jackstraw, and reports per-cell medians.
pub fn compare_replicates(
    toy: &ToyConfig,
    jconfig: &JackstrawConfig,
    replicates: usize,
) -> Result<ComparisonSummary> {
    if replicates == 0 {
        return Err(Error::invalid("at least one replicate is required"));
    }
    let runs: Vec<Comparison> = (0..replicates as u64)
        .map(|r| {
            let t = toy.clone().with_seed(toy.seed.wrapping_add(r));
            let j = JackstrawConfig {
                seed: jconfig.seed.wrapping_add(r),
                ..jconfig.clone()
            };
            compare_methods(&t, &j)
        })
        .collect::<Result<_>>()?;
    let cell_median = |f: &dyn Fn(&Comparison) -> [f64; 4]| -> [f64; 4] {
        std::array::from_fn(|c| median(&mut runs.iter().map(|r| f(r)[c]).collect::<Vec<_>>()))
    };
    Ok(ComparisonSummary {
        columns: COMPARISON_COLUMNS.map(String::from),
        replicates,
        ajive_accuracy: cell_median(&|r| r.ajive.accuracy),
        ajive_angle: cell_median(&|r| r.ajive.angle),
        pca_accuracy: cell_median(&|r| r.pca.accuracy),
        pca_angle: cell_median(&|r| r.pca.angle),
        runs,
    })
}
