//! Angle-based joint and individual variation explained.
//!
//! Each block is reduced to a rank-`r_m` row basis of its score space, the
//! bases are stacked and decomposed again, and the leading right singular
//! vectors of the stack become the common normalized scores (CNS). Joint
//! matrices are the projections of each block onto the CNS row space; the
//! individual matrices are low-rank approximations of what is left.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{center_rows, truncated_svd, RealMatrix};

/// A feature × case data matrix with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBlock {
    name: String,
    matrix: RealMatrix,
    feature_names: Vec<String>,
    case_ids: Vec<String>,
    centered: bool,
}

impl DataBlock {
    pub fn new(
        name: impl Into<String>,
        matrix: RealMatrix,
        feature_names: Vec<String>,
        case_ids: Vec<String>,
    ) -> Result<Self> {
        let name = name.into();
        if feature_names.len() != matrix.nrows() {
            return Err(Error::invalid(format!(
                "block '{name}': {} feature names for {} rows",
                feature_names.len(),
                matrix.nrows()
            )));
        }
        if case_ids.len() != matrix.ncols() {
            return Err(Error::invalid(format!(
                "block '{name}': {} case ids for {} columns",
                case_ids.len(),
                matrix.ncols()
            )));
        }
        let centered = matrix.is_row_centered();
        Ok(DataBlock {
            name,
            matrix,
            feature_names,
            case_ids,
            centered,
        })
    }

    /// Block with generated labels `f1..fd` and `c1..cn`.
    pub fn unlabeled(name: impl Into<String>, matrix: RealMatrix) -> Self {
        let features = (1..=matrix.nrows()).map(|i| format!("f{i}")).collect();
        let cases = default_case_ids(matrix.ncols());
        DataBlock::new(name, matrix, features, cases).expect("generated labels match shape")
    }

    pub fn with_case_ids(mut self, case_ids: Vec<String>) -> Result<Self> {
        if case_ids.len() != self.matrix.ncols() {
            return Err(Error::invalid(format!(
                "block '{}': {} case ids for {} columns",
                self.name,
                case_ids.len(),
                self.matrix.ncols()
            )));
        }
        self.case_ids = case_ids;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.matrix
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn case_ids(&self) -> &[String] {
        &self.case_ids
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn n_features(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cases(&self) -> usize {
        self.matrix.ncols()
    }

    /// Row-centered copy; returns `self` unchanged if already centered.
    pub fn centered(&self) -> DataBlock {
        if self.centered {
            return self.clone();
        }
        DataBlock {
            matrix: center_rows(&self.matrix),
            centered: true,
            ..self.clone()
        }
    }

    /// Same labels, different values. The shape must match.
    pub(crate) fn with_matrix(&self, matrix: RealMatrix) -> DataBlock {
        debug_assert_eq!(matrix.shape(), self.matrix.shape());
        let centered = matrix.is_row_centered();
        DataBlock {
            matrix,
            centered,
            ..self.clone()
        }
    }
}

pub(crate) fn default_case_ids(n: usize) -> Vec<String> {
    (1..=n).map(|j| format!("c{j}")).collect()
}

/// How the joint rank is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointRank {
    Fixed(usize),
    /// Keep stacked-basis singular values whose squares exceed `1 + (M − 1)/2`.
    Auto,
}

impl fmt::Display for JointRank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JointRank::Fixed(r) => write!(f, "{r}"),
            JointRank::Auto => f.write_str("auto"),
        }
    }
}

impl std::str::FromStr for JointRank {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(JointRank::Auto);
        }
        s.parse()
            .map(JointRank::Fixed)
            .map_err(|_| Error::invalid(format!("joint rank must be a count or 'auto', got '{s}'")))
    }
}

impl Serialize for JointRank {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            JointRank::Fixed(r) => serializer.serialize_u64(*r as u64),
            JointRank::Auto => serializer.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for JointRank {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Count(r) => Ok(JointRank::Fixed(r)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AjiveOptions {
    /// Divide each centered block by its Frobenius norm before decomposing.
    #[serde(default)]
    pub normalize_blocks: bool,
}

/// Per-block part of an [`AjiveDecomposition`].
#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    pub name: String,
    pub initial_rank: usize,
    pub individual_rank: usize,
    /// The block as it entered the decomposition (centered, optionally scaled).
    pub data: DMatrix<f64>,
    /// d_m × n
    pub joint: DMatrix<f64>,
    /// d_m × n
    pub individual: DMatrix<f64>,
    /// r_I × n with orthonormal rows; zero rows when the individual rank is 0.
    pub bss: DMatrix<f64>,
    /// Singular values of the individual matrix.
    pub individual_singular_values: Vec<f64>,
    /// Whether the block had to be centered at entry.
    pub centered_at_entry: bool,
    /// Factor the centered block was divided by (1 unless normalization is on).
    pub scale: f64,
}

impl BlockDecomposition {
    pub fn residual(&self) -> DMatrix<f64> {
        &self.data - &self.joint - &self.individual
    }
}

#[derive(Debug, Clone)]
pub struct AjiveDecomposition {
    /// r_J × n with orthonormal rows.
    pub cns: DMatrix<f64>,
    pub blocks: Vec<BlockDecomposition>,
    pub joint_rank: usize,
    /// All singular values of the stacked score bases.
    pub stacked_singular_values: Vec<f64>,
    pub case_ids: Vec<String>,
}

/// Joint or individual score space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Joint,
    Individual,
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Space::Joint => "joint",
            Space::Individual => "individual",
        })
    }
}

impl std::str::FromStr for Space {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "joint" => Ok(Space::Joint),
            "individual" | "indiv" => Ok(Space::Individual),
            _ => Err(Error::invalid(format!("unknown space '{s}'"))),
        }
    }
}

/// Squared-singular-value threshold used by [`JointRank::Auto`].
pub fn auto_joint_threshold(n_blocks: usize) -> f64 {
    1.0 + (n_blocks as f64 - 1.0) / 2.0
}

pub fn decompose(
    blocks: &[DataBlock],
    initial_ranks: &[usize],
    joint_rank: JointRank,
    options: AjiveOptions,
) -> Result<AjiveDecomposition> {
    validate_inputs(blocks, initial_ranks)?;
    let n = blocks[0].n_cases();

    let prepared: Vec<(DMatrix<f64>, bool, f64)> = blocks
        .iter()
        .map(|b| {
            let centered_at_entry = !b.is_centered();
            let mut data = b.centered().matrix().clone().into_dmatrix();
            let mut scale = 1.0;
            if options.normalize_blocks {
                let norm = data.norm();
                if norm == 0.0 {
                    return Err(Error::invalid(format!(
                        "block '{}' is zero after centering and cannot be normalized",
                        b.name()
                    )));
                }
                data /= norm;
                scale = norm;
            }
            Ok((data, centered_at_entry, scale))
        })
        .collect::<Result<_>>()?;

    let bases: Vec<DMatrix<f64>> = prepared
        .par_iter()
        .zip(initial_ranks.par_iter())
        .map(|((data, _, _), &r)| {
            let f = truncated_svd(&RealMatrix::from_trusted(data.clone()), r)?;
            Ok(f.right.transpose())
        })
        .collect::<Result<_>>()?;

    let total_rows: usize = initial_ranks.iter().sum();
    let mut stacked = DMatrix::zeros(total_rows, n);
    let mut offset = 0;
    for basis in &bases {
        stacked
            .rows_mut(offset, basis.nrows())
            .copy_from(basis);
        offset += basis.nrows();
    }
    let stacked_rank = total_rows.min(n);
    let stacked_svd = truncated_svd(&RealMatrix::from_trusted(stacked), stacked_rank)?;
    let stacked_singular_values: Vec<f64> = stacked_svd.singular_values.iter().copied().collect();

    let min_rank = *initial_ranks.iter().min().expect("at least two blocks");
    let joint_rank = match joint_rank {
        JointRank::Fixed(r) => {
            if r == 0 || r > min_rank {
                return Err(Error::invalid(format!(
                    "joint rank {r} must be in 1..={min_rank} (smallest initial rank)"
                )));
            }
            r
        }
        JointRank::Auto => {
            let threshold = auto_joint_threshold(blocks.len());
            let r = stacked_singular_values
                .iter()
                .take_while(|s| *s * *s > threshold)
                .count()
                .min(min_rank);
            if r == 0 {
                return Err(Error::numerical(
                    "automatic joint rank selection found no joint component",
                ));
            }
            log::info!("automatic joint rank: {r} (threshold {threshold:.3} on squared values)");
            r
        }
    };

    let cns: DMatrix<f64> = stacked_svd.right.columns(0, joint_rank).transpose();

    let decomposed: Vec<BlockDecomposition> = prepared
        .into_par_iter()
        .zip(blocks.par_iter())
        .zip(initial_ranks.par_iter())
        .map(|(((data, centered_at_entry, scale), block), &r)| {
            let joint = (&data * cns.transpose()) * &cns;
            let residual = &data - &joint;
            let individual_rank = r - joint_rank;
            let (individual, bss, individual_singular_values) = if individual_rank == 0 {
                (DMatrix::zeros(data.nrows(), n), DMatrix::zeros(0, n), Vec::new())
            } else {
                let f = truncated_svd(&RealMatrix::from_trusted(residual), individual_rank)?;
                (
                    f.reconstruct(),
                    f.right.transpose(),
                    f.singular_values.iter().copied().collect(),
                )
            };
            Ok(BlockDecomposition {
                name: block.name().to_string(),
                initial_rank: r,
                individual_rank,
                data,
                joint,
                individual,
                bss,
                individual_singular_values,
                centered_at_entry,
                scale,
            })
        })
        .collect::<Result<_>>()?;

    Ok(AjiveDecomposition {
        cns,
        blocks: decomposed,
        joint_rank,
        stacked_singular_values,
        case_ids: blocks[0].case_ids().to_vec(),
    })
}

fn validate_inputs(blocks: &[DataBlock], initial_ranks: &[usize]) -> Result<()> {
    if blocks.len() < 2 {
        return Err(Error::invalid(format!(
            "at least two blocks are required, got {}",
            blocks.len()
        )));
    }
    if initial_ranks.len() != blocks.len() {
        return Err(Error::invalid(format!(
            "{} initial ranks given for {} blocks",
            initial_ranks.len(),
            blocks.len()
        )));
    }
    let first = &blocks[0];
    for b in &blocks[1..] {
        if b.case_ids() != first.case_ids() {
            return Err(Error::invalid(format!(
                "block '{}' case ids differ from block '{}'",
                b.name(),
                first.name()
            )));
        }
    }
    for (b, &r) in blocks.iter().zip(initial_ranks) {
        let max_rank = b.n_features().min(b.n_cases());
        if r == 0 || r > max_rank {
            return Err(Error::invalid(format!(
                "initial rank {r} for block '{}' out of range 1..={max_rank}",
                b.name()
            )));
        }
    }
    Ok(())
}

/// Which score vectors to use as the regression predictor.
///
/// Serialized as the component index or the string `"all"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Components {
    /// A single mode of variation.
    One(usize),
    /// Every component of the space.
    All,
}

impl fmt::Display for Components {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Components::One(c) => write!(f, "{c}"),
            Components::All => f.write_str("all"),
        }
    }
}

impl std::str::FromStr for Components {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(Components::All);
        }
        s.parse()
            .map(Components::One)
            .map_err(|_| Error::invalid(format!("component must be an index or 'all', got '{s}'")))
    }
}

impl Serialize for Components {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Components::One(c) => serializer.serialize_u64(*c as u64),
            Components::All => serializer.serialize_str("all"),
        }
    }
}

impl<'de> Deserialize<'de> for Components {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Index(usize),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Index(c) => Ok(Components::One(c)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl AjiveDecomposition {
    pub fn n_cases(&self) -> usize {
        self.cns.ncols()
    }

    /// Individual ranks, one per block.
    pub fn individual_ranks(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.individual_rank).collect()
    }

    fn space_rows(&self, space: Space, block: Option<usize>) -> Result<&DMatrix<f64>> {
        match space {
            Space::Joint => Ok(&self.cns),
            Space::Individual => {
                let m = block.ok_or_else(|| {
                    Error::invalid("individual scores need a block index")
                })?;
                self.blocks
                    .get(m)
                    .map(|b| &b.bss)
                    .ok_or_else(|| Error::invalid(format!("block index {m} out of range")))
            }
        }
    }

    /// Unit-norm score vector of one joint or individual component.
    pub fn select_scores(
        &self,
        space: Space,
        block: Option<usize>,
        component: usize,
    ) -> Result<DVector<f64>> {
        if let (Space::Joint, Some(m)) = (space, block) {
            if m >= self.blocks.len() {
                return Err(Error::invalid(format!("block index {m} out of range")));
            }
        }
        let rows = self.space_rows(space, block)?;
        if component >= rows.nrows() {
            return Err(Error::invalid(format!(
                "component {component} out of range: the {space} space has rank {}",
                rows.nrows()
            )));
        }
        Ok(rows.row(component).transpose())
    }

    /// n × r predictor matrix for the requested components.
    pub fn score_matrix(
        &self,
        space: Space,
        block: Option<usize>,
        components: Components,
    ) -> Result<DMatrix<f64>> {
        match components {
            Components::One(c) => {
                let v = self.select_scores(space, block, c)?;
                Ok(DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
            }
            Components::All => {
                let rows = self.space_rows(space, block)?;
                if rows.nrows() == 0 {
                    return Err(Error::invalid(format!("the {space} space is empty")));
                }
                Ok(rows.transpose())
            }
        }
    }
}

/// One-hot class-membership block: one row per class, one column per case.
pub fn build_indicator_block<S: AsRef<str>>(labels: &[S], class_order: &[S]) -> Result<DataBlock> {
    if class_order.len() < 2 {
        return Err(Error::invalid("an indicator block needs at least two classes"));
    }
    if labels.is_empty() {
        return Err(Error::invalid("no labels given"));
    }
    let classes: Vec<&str> = class_order.iter().map(AsRef::as_ref).collect();
    for (i, c) in classes.iter().enumerate() {
        if classes[..i].contains(c) {
            return Err(Error::invalid(format!("class '{c}' listed twice")));
        }
    }
    let n = labels.len();
    let mut m = DMatrix::zeros(classes.len(), n);
    let mut present = vec![false; classes.len()];
    for (j, label) in labels.iter().enumerate() {
        let label = label.as_ref();
        let row = classes
            .iter()
            .position(|c| *c == label)
            .ok_or_else(|| Error::invalid(format!("label '{label}' is not in the class list")))?;
        m[(row, j)] = 1.0;
        present[row] = true;
    }
    if present.iter().filter(|p| **p).count() < 2 {
        return Err(Error::invalid(
            "fewer than two classes are present; the indicator block is rank 0 after centering",
        ));
    }
    DataBlock::new(
        "indicator",
        RealMatrix::from_dmatrix(m)?,
        classes.iter().map(|c| c.to_string()).collect(),
        default_case_ids(n),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector_angle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Two noise-free blocks sharing score `s` with individual scores `a`, `b`.
    fn exact_blocks() -> (Vec<DataBlock>, DVector<f64>) {
        let n = 8;
        let s = DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0]);
        let a = DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0]);
        let b = DVector::from_vec(vec![1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0]);
        let u1 = DVector::from_vec(vec![1.0, 2.0, 0.0, 0.0, 1.0]);
        let w1 = DVector::from_vec(vec![0.0, 0.0, 3.0, 1.0, 0.0]);
        let u2 = DVector::from_vec(vec![2.0, 0.0, 1.0, 0.0]);
        let w2 = DVector::from_vec(vec![0.0, 1.5, 0.0, 2.0]);
        let d1 = &u1 * s.transpose() + &w1 * a.transpose();
        let d2 = &u2 * s.transpose() + &w2 * b.transpose();
        assert_eq!(d1.ncols(), n);
        let blocks = vec![
            DataBlock::unlabeled("x", RealMatrix::from_dmatrix(d1).unwrap()),
            DataBlock::unlabeled("y", RealMatrix::from_dmatrix(d2).unwrap()),
        ];
        (blocks, s)
    }

    fn noisy_blocks(seed: u64, n: usize) -> Vec<DataBlock> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let shared: Vec<f64> = (0..n).map(|j| if j < n / 2 { 1.0 } else { -1.0 }).collect();
        [30usize, 20]
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                let m = DMatrix::from_fn(d, n, |i, j| {
                    let signal = if i < d / 2 { 2.0 * shared[j] } else { 0.0 };
                    signal + normal.sample(&mut rng)
                });
                DataBlock::unlabeled(format!("b{k}"), RealMatrix::from_dmatrix(m).unwrap())
            })
            .collect()
    }

    #[test]
    fn exact_shared_structure_is_recovered() {
        let (blocks, s) = exact_blocks();
        let dec = decompose(&blocks, &[2, 2], JointRank::Fixed(1), AjiveOptions::default()).unwrap();
        let cns = dec.select_scores(Space::Joint, None, 0).unwrap();
        assert!(vector_angle(cns.as_slice(), s.as_slice()).unwrap() < 1.0);
        assert_eq!(dec.individual_ranks(), vec![1, 1]);
        assert!((cns.norm() - 1.0).abs() < 1e-10);
        let bss = dec.select_scores(Space::Individual, Some(0), 0).unwrap();
        assert_eq!(bss, dec.blocks[0].bss.row(0).transpose());
    }

    #[test]
    fn decomposition_invariants_hold_on_noisy_data() {
        let blocks = noisy_blocks(3, 40);
        let dec = decompose(&blocks, &[3, 4], JointRank::Fixed(1), AjiveOptions::default()).unwrap();
        let gram = &dec.cns * dec.cns.transpose();
        assert!((gram - DMatrix::<f64>::identity(1, 1)).amax() < 1e-8);
        for b in &dec.blocks {
            let reproj = (&b.joint * dec.cns.transpose()) * &dec.cns;
            assert!((&reproj - &b.joint).amax() < 1e-8);
            assert!((&b.individual * dec.cns.transpose()).amax() < 1e-6);
            let bg = &b.bss * b.bss.transpose();
            assert!((bg - DMatrix::<f64>::identity(b.individual_rank, b.individual_rank)).amax() < 1e-8);
            assert!((b.residual() * b.bss.transpose()).amax() < 1e-6);
            assert!(b.centered_at_entry);
        }
        assert_eq!(dec.individual_ranks(), vec![2, 3]);
    }

    #[test]
    fn case_permutation_permutes_cns_columns() {
        let (blocks, _) = exact_blocks();
        let dec = decompose(&blocks[..], &[2, 2], JointRank::Fixed(1), AjiveOptions::default()).unwrap();
        let order = [3usize, 0, 7, 1, 6, 2, 5, 4];
        let permuted: Vec<DataBlock> = blocks
            .iter()
            .map(|b| {
                let m = b.matrix().as_dmatrix().select_columns(order.iter());
                DataBlock::unlabeled(b.name(), RealMatrix::from_dmatrix(m).unwrap())
            })
            .collect();
        let dec2 = decompose(&permuted, &[2, 2], JointRank::Fixed(1), AjiveOptions::default()).unwrap();
        let expected = dec.cns.select_columns(order.iter());
        assert!((expected - &dec2.cns).amax() < 1e-10);
    }

    #[test]
    fn scaling_one_block_keeps_joint_direction() {
        let blocks = noisy_blocks(9, 40);
        let base = decompose(&blocks, &[2, 2], JointRank::Fixed(1), AjiveOptions::default()).unwrap();
        let v0 = base.select_scores(Space::Joint, None, 0).unwrap();
        for c in [0.5, 2.0] {
            let mut scaled = blocks.clone();
            let m = scaled[0].matrix().as_dmatrix() * c;
            scaled[0] = DataBlock::unlabeled("b0", RealMatrix::from_dmatrix(m).unwrap());
            let dec = decompose(&scaled, &[2, 2], JointRank::Fixed(1), AjiveOptions::default()).unwrap();
            let v = dec.select_scores(Space::Joint, None, 0).unwrap();
            assert!(vector_angle(v.as_slice(), v0.as_slice()).unwrap() < 1.0);
        }
    }

    #[test]
    fn rank_arithmetic_matches_large_configuration() {
        // 77/70/3 initial ranks with a rank-3 joint space
        let n = 90;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let labels: Vec<String> = (0..n).map(|j| ["A", "B", "C", "D"][j % 4].to_string()).collect();
        let order: Vec<String> = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
        let indicator = build_indicator_block(&labels, &order).unwrap();
        let ind = indicator.matrix().as_dmatrix().clone();
        let make = |d: usize, rng: &mut ChaCha8Rng| {
            let load = DMatrix::from_fn(d, 4, |_, _| normal.sample(rng));
            let noise = DMatrix::from_fn(d, n, |_, _| 0.1 * normal.sample(rng));
            RealMatrix::from_dmatrix(&load * &ind + noise).unwrap()
        };
        let cnv = DataBlock::unlabeled("cnv", make(100, &mut rng));
        let ge = DataBlock::unlabeled("ge", make(120, &mut rng));
        let blocks = vec![cnv, ge, indicator];
        let dec = decompose(&blocks, &[77, 70, 3], JointRank::Fixed(3), AjiveOptions::default()).unwrap();
        assert_eq!(dec.individual_ranks(), vec![74, 67, 0]);
        assert_eq!(dec.blocks[2].bss.nrows(), 0);
        assert!(dec.blocks[2].individual.amax() == 0.0);
        assert!(dec.select_scores(Space::Individual, Some(2), 0).is_err());
    }

    #[test]
    fn auto_rank_finds_the_shared_direction() {
        let blocks = noisy_blocks(5, 60);
        let dec = decompose(&blocks, &[2, 2], JointRank::Auto, AjiveOptions::default()).unwrap();
        assert_eq!(dec.joint_rank, 1);
        assert!(dec.stacked_singular_values[0].powi(2) > auto_joint_threshold(2));
    }

    #[test]
    fn normalization_flag_keeps_scores() {
        let blocks = noisy_blocks(4, 40);
        let plain = decompose(&blocks, &[2, 2], JointRank::Fixed(1), AjiveOptions::default()).unwrap();
        let norm = decompose(
            &blocks,
            &[2, 2],
            JointRank::Fixed(1),
            AjiveOptions { normalize_blocks: true },
        )
        .unwrap();
        assert!((plain.cns.clone() - norm.cns.clone()).amax() < 1e-10);
        assert!((norm.blocks[0].data.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn input_errors() {
        let (blocks, _) = exact_blocks();
        let opts = AjiveOptions::default();
        assert!(decompose(&blocks[..1], &[2], JointRank::Fixed(1), opts).is_err());
        assert!(decompose(&blocks, &[2], JointRank::Fixed(1), opts).is_err());
        assert!(decompose(&blocks, &[2, 2], JointRank::Fixed(3), opts).is_err());
        assert!(decompose(&blocks, &[0, 2], JointRank::Fixed(1), opts).is_err());
        assert!(decompose(&blocks, &[9, 2], JointRank::Fixed(1), opts).is_err());
        let mut mismatched = blocks.clone();
        let ids: Vec<String> = (0..8).map(|j| format!("other{j}")).collect();
        mismatched[1] = mismatched[1].clone().with_case_ids(ids).unwrap();
        assert!(matches!(
            decompose(&mismatched, &[2, 2], JointRank::Fixed(1), opts),
            Err(Error::InvalidInput(_))
        ));
        let dec = decompose(&blocks, &[2, 2], JointRank::Fixed(1), opts).unwrap();
        assert!(dec.select_scores(Space::Joint, None, 1).is_err());
        assert!(dec.select_scores(Space::Individual, None, 0).is_err());
        assert!(dec.select_scores(Space::Individual, Some(5), 0).is_err());
    }

    #[test]
    fn indicator_block_matches_displayed_example() {
        let labels = ["B", "C", "A", "B", "A", "C", "D"];
        let order = ["A", "B", "C", "D"];
        let block = build_indicator_block(&labels, &order).unwrap();
        let expected = [
            [0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        ];
        for (i, row) in expected.iter().enumerate() {
            assert_eq!(block.matrix().row_vec(i), row.to_vec());
        }
        assert!(!block.is_centered());
        assert_eq!(block.feature_names(), &["A", "B", "C", "D"]);

        let other = build_indicator_block(&["C", "A", "B", "A", "B", "C", "D"], &order).unwrap();
        assert_eq!(other.matrix().row_vec(0), vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        for j in 0..7 {
            assert_eq!(other.matrix().column(j).sum(), 1.0);
        }
    }

    #[test]
    fn indicator_block_edge_cases() {
        let two = build_indicator_block(&["A", "B"], &["A", "B"]).unwrap();
        assert_eq!(two.matrix().as_dmatrix(), &DMatrix::<f64>::identity(2, 2));
        assert!(build_indicator_block(&["A", "A", "A"], &["A", "B"]).is_err());
        assert!(build_indicator_block(&["A", "Z"], &["A", "B"]).is_err());
        assert!(build_indicator_block(&["A"], &["A"]).is_err());
    }

    #[test]
    fn joint_rank_parsing() {
        assert_eq!("auto".parse::<JointRank>().unwrap(), JointRank::Auto);
        assert_eq!("3".parse::<JointRank>().unwrap(), JointRank::Fixed(3));
        assert!("x".parse::<JointRank>().is_err());
    }

    #[test]
    fn components_round_trip() {
        for (c, text) in [(Components::One(2), "2"), (Components::All, "\"all\"")] {
            assert_eq!(serde_json::to_string(&c).unwrap(), text);
            assert_eq!(serde_json::from_str::<Components>(text).unwrap(), c);
            assert_eq!(c.to_string().parse::<Components>().unwrap(), c);
        }
        assert_eq!(serde_json::to_string(&JointRank::Auto).unwrap(), "\"auto\"");
        assert!("-1".parse::<Components>().is_err());
    }
}
