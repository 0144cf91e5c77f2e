//! Adaptive hierarchical sensing over a binary tree of coefficient ranges.
//!
//! A signal of padded dimension `n_padded = 2^d` is sensed through a perfect
//! binary tree: the node `(level, index)` covers the contiguous coefficient
//! range `[index * 2^level, (index + 1) * 2^level)` and its measurement is
//! the sum of the analysis coefficients in that range. Sensing starts by
//! measuring every node of an initial level chosen from the target sparsity
//! `k`, then repeatedly keeps the `k` measurements of largest magnitude and
//! descends into their children, finishing at the leaves. The observed leaf
//! values form a sparse coefficient estimate with at most `2k` nonzeros,
//! and reconstruction is a single synthesis transform.
//!
//! All node and coefficient indices are 0-based.

use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::transforms::Transform;

/// Errors from configuration, selection, and reconstruction.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum SensingError {
    /// The sensing tree needs a power-of-two dimension of at least 8.
    #[error("padded dimension {0} is not a power of two at least 8")]
    InvalidDimension(usize),
    /// Target sparsity must satisfy `1 <= k < n_padded / 4`.
    #[error("sparsity {k} outside 1..{limit} for padded dimension {n_padded}")]
    InvalidSparsity {
        k: usize,
        n_padded: usize,
        limit: usize,
    },
    /// Selection size exceeds the number of candidate measurements.
    #[error("selection size {k} exceeds {available} measurements")]
    SelectionTooLarge { k: usize, available: usize },
    /// No admissible sparsity level fits the measurement budget.
    #[error("no sparsity fits measurement budget {m_target} at padded dimension {n_padded}")]
    NoFeasibleBudget { m_target: usize, n_padded: usize },
    /// Signal or estimate length does not match the transform.
    #[error("length {got} does not match transform dimension {want}")]
    DimensionMismatch { got: usize, want: usize },
    /// Estimate entry outside the signal dimension.
    #[error("estimate index {index} outside dimension {dimension}")]
    IndexOutOfRange { index: usize, dimension: usize },
}

/// A sensing-tree node. `level` counts up from the leaves (level 0);
/// `index` runs over `0..n_padded >> level` left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    /// Tree level, 0 at the leaves.
    pub level: usize,
    /// Position within the level, 0-based.
    pub index: usize,
}

impl NodeId {
    /// Node at `level` and `index`.
    pub fn new(level: usize, index: usize) -> Self {
        NodeId { level, index }
    }

    /// Contiguous 0-based coefficient range the node covers; its length is
    /// exactly `2^level`.
    pub fn coefficient_range(self) -> Range<usize> {
        let start = self.index << self.level;
        start..start + (1 << self.level)
    }

    /// The two children, whose ranges partition this node's range.
    ///
    /// # Panics
    /// Panics on a leaf (level 0).
    pub fn children(self) -> (NodeId, NodeId) {
        assert!(self.level >= 1, "leaf nodes have no children");
        (
            NodeId::new(self.level - 1, 2 * self.index),
            NodeId::new(self.level - 1, 2 * self.index + 1),
        )
    }
}

/// Order used to break ties among equal-magnitude measurements.
///
/// The canonical order keeps runs reproducible; the inverted order exists
/// purely as a diagnostic to demonstrate that the descent-replay check in
/// the verification command actually detects a deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Prefer the smaller `(level, index)`; the canonical order.
    #[default]
    LowIndexFirst,
    /// Prefer the larger `(level, index)`; diagnostic only.
    HighIndexFirst,
}

/// Validated sensing parameters: original dimension `n`, padded dimension
/// `n_padded = 2^ceil(log2(n))`, target sparsity `k`, and the initial tree
/// level derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SensingConfig {
    n: usize,
    n_padded: usize,
    k: usize,
    initial_level: usize,
    tie_break: TieBreak,
}

impl SensingConfig {
    /// Configuration for a signal of length `n` and target sparsity `k`.
    /// Requires `1 <= k < n_padded / 4`.
    pub fn new(n: usize, k: usize) -> Result<Self, SensingError> {
        let n_padded = pad_dimension(n);
        let level = initial_level(n_padded, k)?;
        Ok(SensingConfig {
            n,
            n_padded,
            k,
            initial_level: level,
            tie_break: TieBreak::default(),
        })
    }

    /// Same configuration with an explicit tie-break order.
    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    /// Original signal dimension `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Padded dimension, the next power of two at or above `n`.
    pub fn n_padded(&self) -> usize {
        self.n_padded
    }

    /// Target sparsity `k`.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Initial tree level where sensing starts.
    pub fn initial_level(&self) -> usize {
        self.initial_level
    }

    /// Tie-break order used during selection.
    pub fn tie_break(&self) -> TieBreak {
        self.tie_break
    }
}

/// A measurement device. `measure` returns the sum of the analysis
/// coefficients over the node's range; implementations count every call
/// and must be safe for concurrent use.
pub trait MeasurementOracle: Send + Sync {
    /// Measurement value for one node.
    fn measure(&self, node: NodeId) -> f64;

    /// Number of `measure` calls so far.
    fn query_count(&self) -> u64;
}

/// Fast simulation oracle that sums a pre-analyzed (and pre-padded)
/// coefficient vector over the node's range.
#[derive(Debug)]
pub struct RangeSumOracle {
    coeffs: Vec<f64>,
    queries: AtomicU64,
}

/// Oracle over `coeffs`, which must already be padded to a power-of-two
/// length of at least 8 (entries beyond the original dimension zero).
pub fn range_sum_oracle(coeffs: Vec<f64>) -> Result<RangeSumOracle, SensingError> {
    if coeffs.len() < 8 || !coeffs.len().is_power_of_two() {
        return Err(SensingError::InvalidDimension(coeffs.len()));
    }
    Ok(RangeSumOracle {
        coeffs,
        queries: AtomicU64::new(0),
    })
}

impl MeasurementOracle for RangeSumOracle {
    fn measure(&self, node: NodeId) -> f64 {
        self.queries.fetch_add(1, Ordering::Relaxed);
        let range = node.coefficient_range();
        assert!(range.end <= self.coeffs.len(), "node {node:?} out of range");
        self.coeffs[range].iter().sum()
    }

    fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }
}

/// Reference oracle that touches the signal only through inner products:
/// for each node it materializes the sensing vector as the analysis
/// adjoint of the node's range indicator and returns its dot product with
/// the signal. Coefficient positions beyond the transform dimension are
/// implicitly zero, so indicator entries there are simply dropped.
pub struct InnerProductOracle<'a> {
    x: Vec<f64>,
    transform: &'a dyn Transform,
    n_padded: usize,
    queries: AtomicU64,
}

/// Oracle measuring `x` through `transform`; fails if their dimensions
/// disagree.
pub fn inner_product_oracle<'a>(
    x: &[f64],
    transform: &'a dyn Transform,
) -> Result<InnerProductOracle<'a>, SensingError> {
    if x.len() != transform.dimension() {
        return Err(SensingError::DimensionMismatch {
            got: x.len(),
            want: transform.dimension(),
        });
    }
    Ok(InnerProductOracle {
        x: x.to_vec(),
        transform,
        n_padded: pad_dimension(x.len()),
        queries: AtomicU64::new(0),
    })
}

impl std::fmt::Debug for InnerProductOracle<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InnerProductOracle")
            .field("dimension", &self.x.len())
            .field("n_padded", &self.n_padded)
            .field("queries", &self.queries)
            .finish()
    }
}

impl MeasurementOracle for InnerProductOracle<'_> {
    fn measure(&self, node: NodeId) -> f64 {
        self.queries.fetch_add(1, Ordering::Relaxed);
        let range = node.coefficient_range();
        assert!(range.end <= self.n_padded, "node {node:?} out of range");
        let n = self.transform.dimension();
        let mut indicator = vec![0.0; n];
        for i in range.start..range.end.min(n) {
            indicator[i] = 1.0;
        }
        let phi = self.transform.analysis_adjoint(&indicator);
        self.x.iter().zip(&phi).map(|(a, b)| a * b).sum()
    }

    fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }
}

/// Next power of two at or above `n`; identity when `n` already is one.
pub fn pad_dimension(n: usize) -> usize {
    assert!(n >= 1, "dimension must be at least 1");
    n.next_power_of_two()
}

/// Extend a coefficient vector with zeros up to the padded dimension.
pub fn pad_coefficients(coeffs: &[f64], n_padded: usize) -> Vec<f64> {
    assert!(n_padded >= coeffs.len(), "padded dimension too small");
    let mut out = coeffs.to_vec();
    out.resize(n_padded, 0.0);
    out
}

fn log2_exact(n: usize) -> usize {
    debug_assert!(n.is_power_of_two());
    n.trailing_zeros() as usize
}

/// The level where sensing starts: `log2(n_padded) - floor(log2(k)) - 2`,
/// which is the deepest level that still holds more than `2k` nodes.
pub fn initial_level(n_padded: usize, k: usize) -> Result<usize, SensingError> {
    if n_padded < 8 || !n_padded.is_power_of_two() {
        return Err(SensingError::InvalidDimension(n_padded));
    }
    let limit = n_padded / 4;
    if k < 1 || k >= limit {
        return Err(SensingError::InvalidSparsity { k, n_padded, limit });
    }
    let level = log2_exact(n_padded) - k.ilog2() as usize - 2;
    debug_assert!(level >= 1 && (n_padded >> level) > 2 * k);
    Ok(level)
}

/// Total measurements a run performs: the full initial level plus `2k`
/// child measurements per descent step. Never exceeds
/// `2k * log2(n_padded / k)`, with equality exactly when `k` is a power
/// of two.
pub fn measurement_count(n_padded: usize, k: usize) -> Result<usize, SensingError> {
    let level = initial_level(n_padded, k)?;
    let m = (n_padded >> level) + 2 * k * level;
    let bound = 2.0 * k as f64 * (n_padded as f64 / k as f64).log2();
    debug_assert!(m as f64 <= bound + 1e-6, "count {m} above bound {bound}");
    debug_assert!(
        k.is_power_of_two() == ((m as f64 - bound).abs() < 1e-6),
        "equality must hold exactly at powers of two: m={m} bound={bound} k={k}"
    );
    Ok(m)
}

/// Largest sparsity whose measurement count stays within `m_target`
/// (measurements grow monotonically with sparsity, so this inversion is
/// well defined). Scans every admissible value rather than assuming the
/// growth law.
pub fn k_for_budget(n_padded: usize, m_target: usize) -> Result<usize, SensingError> {
    let mut best = None;
    for k in 1..n_padded / 4 {
        if measurement_count(n_padded, k)? <= m_target {
            best = Some(k);
        }
    }
    best.ok_or(SensingError::NoFeasibleBudget {
        m_target,
        n_padded,
    })
}

/// The `k` records of largest magnitude ("larger" always means larger in
/// absolute value). Ties are resolved by the given node order, so the
/// result is deterministic.
pub fn select_top_k(
    measurements: &[(NodeId, f64)],
    k: usize,
    tie_break: TieBreak,
) -> Result<Vec<NodeId>, SensingError> {
    if k > measurements.len() {
        return Err(SensingError::SelectionTooLarge {
            k,
            available: measurements.len(),
        });
    }
    let mut order: Vec<&(NodeId, f64)> = measurements.iter().collect();
    order.sort_by(|a, b| {
        b.1.abs().total_cmp(&a.1.abs()).then_with(|| match tie_break {
            TieBreak::LowIndexFirst => a.0.cmp(&b.0),
            TieBreak::HighIndexFirst => b.0.cmp(&a.0),
        })
    });
    Ok(order[..k].iter().map(|record| record.0).collect())
}

/// Sparse coefficient estimate produced by a sensing run: observed leaf
/// values at their 0-based coefficient indices, all below the original
/// dimension, sorted by index. Zero-valued leaves are omitted, so the
/// entry count is at most `2k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEstimate {
    entries: Vec<(usize, f64)>,
    dimension: usize,
    permutation_seed: Option<u64>,
}

impl SparseEstimate {
    /// `(coefficient index, value)` pairs, strictly increasing in index.
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    /// Original (unpadded) coefficient dimension.
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Seed of the coefficient permutation the indices refer to, when the
    /// sensed transform was permuted; purely provenance.
    pub fn permutation_seed(&self) -> Option<u64> {
        self.permutation_seed
    }

    /// Record the permutation seed the indices refer to.
    pub fn with_permutation_seed(mut self, seed: u64) -> Self {
        self.permutation_seed = Some(seed);
        self
    }

    /// Dense coefficient vector of the original dimension.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        for &(index, value) in &self.entries {
            out[index] = value;
        }
        out
    }
}

/// Every measurement of one level in the order taken, plus the winners
/// whose children the run descended into.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelLog {
    level: usize,
    records: Vec<(NodeId, f64)>,
    winners: Vec<NodeId>,
}

impl LevelLog {
    /// Tree level of the records.
    pub fn level(&self) -> usize {
        self.level
    }

    /// Measurements in the order they were taken. The initial level is
    /// measured in index order; deeper levels follow the winner ranking,
    /// left child before right child.
    pub fn records(&self) -> &[(NodeId, f64)] {
        &self.records
    }

    /// The selected nodes in ranking order, exactly `k` at every level.
    pub fn winners(&self) -> &[NodeId] {
        &self.winners
    }
}

/// Complete record of a sensing run, one entry per visited level from the
/// initial level down to the leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    levels: Vec<LevelLog>,
}

impl RunLog {
    /// Per-level logs ordered from the initial level down to level 0.
    pub fn levels(&self) -> &[LevelLog] {
        &self.levels
    }

    /// Total number of measurements recorded.
    pub fn total_measurements(&self) -> usize {
        self.levels.iter().map(|l| l.records.len()).sum()
    }

    /// CSV rendering with header `level,node_index,value,winner`, rows in
    /// measurement order, winner flagged 0/1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,node_index,value,winner\n");
        for level in &self.levels {
            for &(node, value) in &level.records {
                let winner = u8::from(level.winners.contains(&node));
                out.push_str(&format!("{},{},{},{}\n", node.level, node.index, value, winner));
            }
        }
        out
    }
}

/// Run the adaptive descent: measure the whole initial level, then per
/// level keep the `k` largest-magnitude measurements and measure both
/// children of each winner, down to the leaves. Observed leaves become the
/// sparse estimate (indices at or above the original dimension are
/// padding and get dropped); the log records every measurement and every
/// winner, including the final ranking among the leaves.
pub fn k_ahs_sense(
    oracle: &dyn MeasurementOracle,
    cfg: &SensingConfig,
) -> Result<(SparseEstimate, RunLog), SensingError> {
    let top = cfg.initial_level();
    let mut records: Vec<(NodeId, f64)> = (0..cfg.n_padded() >> top)
        .map(|i| {
            let node = NodeId::new(top, i);
            (node, oracle.measure(node))
        })
        .collect();

    let mut levels = Vec::with_capacity(top + 1);
    for level in (1..=top).rev() {
        let winners = select_top_k(&records, cfg.k(), cfg.tie_break())?;
        let mut next = Vec::with_capacity(2 * cfg.k());
        for &winner in &winners {
            let (left, right) = winner.children();
            next.push((left, oracle.measure(left)));
            next.push((right, oracle.measure(right)));
        }
        levels.push(LevelLog {
            level,
            records,
            winners,
        });
        records = next;
    }

    let leaf_winners = select_top_k(&records, cfg.k(), cfg.tie_break())?;
    let mut entries: Vec<(usize, f64)> = records
        .iter()
        .filter(|(node, value)| node.index < cfg.n() && *value != 0.0)
        .map(|&(node, value)| (node.index, value))
        .collect();
    entries.sort_unstable_by_key(|&(index, _)| index);
    levels.push(LevelLog {
        level: 0,
        records,
        winners: leaf_winners,
    });

    Ok((
        SparseEstimate {
            entries,
            dimension: cfg.n(),
            permutation_seed: None,
        },
        RunLog { levels },
    ))
}

/// Embed the estimate into a dense coefficient vector and apply the
/// synthesis transform; no inverse problem is solved. A permuted transform
/// un-shuffles the coefficients itself during synthesis.
pub fn reconstruct(
    estimate: &SparseEstimate,
    transform: &dyn Transform,
) -> Result<Vec<f64>, SensingError> {
    if estimate.dimension() != transform.dimension() {
        return Err(SensingError::DimensionMismatch {
            got: estimate.dimension(),
            want: transform.dimension(),
        });
    }
    for &(index, _) in estimate.entries() {
        if index >= estimate.dimension() {
            return Err(SensingError::IndexOutOfRange {
                index,
                dimension: estimate.dimension(),
            });
        }
    }
    Ok(transform.synthesize(&estimate.to_dense()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::{cdf97_2d_pair, haar2d_pair, identity_pair, permuted};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    const ORACLE_EPS: f64 = 1e-8;
    const RECOVERY_EPS: f64 = 1e-9;

    fn spike(n: usize, index: usize, value: f64) -> Vec<f64> {
        let mut x = vec![0.0; n];
        x[index] = value;
        x
    }

    #[test]
    fn node_ranges_and_children() {
        assert_eq!(NodeId::new(0, 6).coefficient_range(), 6..7);
        assert_eq!(NodeId::new(3, 1).coefficient_range(), 8..16);
        let parent = NodeId::new(2, 0);
        let (left, right) = parent.children();
        assert_eq!(left, NodeId::new(1, 0));
        assert_eq!(right, NodeId::new(1, 1));
        assert_eq!(left.coefficient_range().start, parent.coefficient_range().start);
        assert_eq!(left.coefficient_range().end, right.coefficient_range().start);
        assert_eq!(right.coefficient_range().end, parent.coefficient_range().end);
    }

    #[test]
    fn initial_level_examples() {
        assert_eq!(initial_level(1024, 4).unwrap(), 6);
        let level = initial_level(1024, 1).unwrap();
        assert_eq!(level, 8);
        assert_eq!(1024 >> level, 4, "sparsity 1 starts at a 4-node level");
        assert_eq!(initial_level(64, 8).unwrap(), 1);
        // Non-power-of-two sparsity rounds its log down.
        assert_eq!(initial_level(1024, 3).unwrap(), 7);
        assert_eq!(initial_level(1024, 5).unwrap(), 6);

        assert_eq!(
            initial_level(1024, 256).unwrap_err(),
            SensingError::InvalidSparsity { k: 256, n_padded: 1024, limit: 256 }
        );
        assert_eq!(
            initial_level(1024, 0).unwrap_err(),
            SensingError::InvalidSparsity { k: 0, n_padded: 1024, limit: 256 }
        );
        assert_eq!(initial_level(12, 1).unwrap_err(), SensingError::InvalidDimension(12));
        assert_eq!(initial_level(4, 1).unwrap_err(), SensingError::InvalidDimension(4));
    }

    #[test]
    fn measurement_count_examples() {
        assert_eq!(measurement_count(1024, 4).unwrap(), 64);
        assert_eq!(measurement_count(1024, 1).unwrap(), 20);
        assert_eq!(initial_level(262_144, 4506).unwrap(), 4);
        assert_eq!(measurement_count(262_144, 4506).unwrap(), 52_432);
    }

    #[test]
    fn measurement_count_is_monotone_and_bounded() {
        for n_padded in [16usize, 64, 256, 1024, 4096] {
            let mut previous = 0;
            for k in 1..n_padded / 4 {
                let m = measurement_count(n_padded, k).unwrap();
                assert!(m > previous, "count not increasing at n={n_padded} k={k}");
                previous = m;
                let bound = 2.0 * k as f64 * (n_padded as f64 / k as f64).log2();
                if k.is_power_of_two() {
                    assert!((m as f64 - bound).abs() < 1e-6, "n={n_padded} k={k}: {m} vs {bound}");
                } else {
                    assert!((m as f64) < bound - 1e-6, "n={n_padded} k={k}: {m} vs {bound}");
                }
            }
        }
    }

    #[test]
    fn budget_inversion_examples() {
        assert_eq!(k_for_budget(1024, 64).unwrap(), 4);
        assert_eq!(k_for_budget(1024, 20).unwrap(), 1);
        assert_eq!(
            k_for_budget(1024, 19).unwrap_err(),
            SensingError::NoFeasibleBudget { m_target: 19, n_padded: 1024 }
        );
        // Budget of a fifth of the coefficients at 512x512.
        let k = k_for_budget(262_144, 52_429).unwrap();
        assert_eq!(k, 4505);
        assert_eq!(measurement_count(262_144, k).unwrap(), 52_424);
        assert!(measurement_count(262_144, k + 1).unwrap() > 52_429);
    }

    #[test]
    fn budget_inversion_is_maximal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n_padded = 1usize << rng.gen_range(4..=12);
            let m_target = rng.gen_range(1..=3 * n_padded);
            match k_for_budget(n_padded, m_target) {
                Ok(k) => {
                    assert!(measurement_count(n_padded, k).unwrap() <= m_target);
                    if k + 1 < n_padded / 4 {
                        assert!(measurement_count(n_padded, k + 1).unwrap() > m_target);
                    }
                }
                Err(_) => {
                    assert!(measurement_count(n_padded, 1).unwrap() > m_target);
                }
            }
        }
    }

    #[test]
    fn padding_helpers() {
        assert_eq!(pad_dimension(1000), 1024);
        assert_eq!(pad_dimension(512 * 512), 512 * 512);
        assert_eq!(pad_dimension(1), 1);
        assert_eq!(pad_coefficients(&[1.0, 2.0, 3.0], 8), vec![1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn range_sum_oracle_sums_ranges() {
        let oracle = range_sum_oracle(pad_coefficients(&[1.0, 2.0, 3.0, 4.0], 8)).unwrap();
        assert_eq!(oracle.measure(NodeId::new(2, 0)), 10.0);
        assert_eq!(oracle.measure(NodeId::new(1, 0)), 3.0);
        for n in 0..4 {
            assert_eq!(oracle.measure(NodeId::new(0, n)), (n + 1) as f64);
        }
        assert_eq!(oracle.query_count(), 6);

        let cancel = range_sum_oracle(pad_coefficients(&[5.0, -5.0], 8)).unwrap();
        assert_eq!(cancel.measure(NodeId::new(1, 0)), 0.0, "opposite pair cancels");
        assert_eq!(range_sum_oracle(vec![0.0; 12]).unwrap_err(), SensingError::InvalidDimension(12));
    }

    #[test]
    fn inner_product_oracle_examples() {
        let pair = identity_pair(8);
        let x = pad_coefficients(&[1.0, 2.0, 3.0, 4.0], 8);
        let oracle = inner_product_oracle(&x, &pair).unwrap();
        assert!((oracle.measure(NodeId::new(1, 0)) - 3.0).abs() < ORACLE_EPS);

        // Constant image: the sole approximation coefficient is side * c,
        // every detail coefficient is 0, and node measurements are range
        // sums of that analyzed vector.
        let pair = haar2d_pair(4).unwrap();
        let x = vec![1.0; 16];
        let analyzed = pair.analyze(&x);
        assert!((analyzed[0] - 4.0).abs() < 1e-12);
        let oracle = inner_product_oracle(&x, &pair).unwrap();
        let covering = oracle.measure(NodeId::new(2, 0));
        assert!((covering - 4.0).abs() < 1e-12, "range holding the approximation: {covering}");
        for index in 1..4 {
            let detail_only = oracle.measure(NodeId::new(2, index));
            assert!(detail_only.abs() < 1e-12, "detail-only range: {detail_only}");
        }

        assert_eq!(
            inner_product_oracle(&[1.0; 4], &identity_pair(8)).unwrap_err(),
            SensingError::DimensionMismatch { got: 4, want: 8 }
        );
    }

    #[test]
    fn oracles_agree_on_every_node() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cases: Vec<(Box<dyn crate::transforms::Transform>, usize)> = vec![
            (Box::new(identity_pair(16)), 16),
            (Box::new(identity_pair(12)), 12),
            (Box::new(haar2d_pair(8).unwrap()), 64),
            (Box::new(cdf97_2d_pair(8, 3).unwrap()), 64),
            (Box::new(permuted(cdf97_2d_pair(8, 3).unwrap(), 31)), 64),
        ];
        for (pair, n) in &cases {
            let x: Vec<f64> = (0..*n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n_padded = pad_dimension(*n);
            let coeffs = pad_coefficients(&pair.analyze(&x), n_padded);
            let fast = range_sum_oracle(coeffs).unwrap();
            let reference = inner_product_oracle(&x, pair.as_ref()).unwrap();
            for level in 0..=log2_exact(n_padded) {
                for index in 0..n_padded >> level {
                    let node = NodeId::new(level, index);
                    let a = fast.measure(node);
                    let b = reference.measure(node);
                    assert!((a - b).abs() < ORACLE_EPS, "node {node:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn select_top_k_orders_by_magnitude() {
        let n1 = NodeId::new(1, 0);
        let n2 = NodeId::new(1, 1);
        let n3 = NodeId::new(1, 2);
        let records = vec![(n1, -4.0), (n2, 3.0), (n3, 1.0)];
        assert_eq!(select_top_k(&records, 2, TieBreak::LowIndexFirst).unwrap(), vec![n1, n2]);
        assert_eq!(select_top_k(&records, 3, TieBreak::LowIndexFirst).unwrap(), vec![n1, n2, n3]);

        let ties = vec![(n3, 2.0), (n1, 2.0), (n2, 2.0)];
        assert_eq!(select_top_k(&ties, 2, TieBreak::LowIndexFirst).unwrap(), vec![n1, n2]);
        assert_eq!(select_top_k(&ties, 2, TieBreak::HighIndexFirst).unwrap(), vec![n3, n2]);

        assert_eq!(
            select_top_k(&ties, 4, TieBreak::LowIndexFirst).unwrap_err(),
            SensingError::SelectionTooLarge { k: 4, available: 3 }
        );
    }

    #[test]
    fn single_spike_is_recovered() {
        let cfg = SensingConfig::new(16, 1).unwrap();
        let oracle = range_sum_oracle(spike(16, 4, 3.0)).unwrap();
        let (estimate, _) = k_ahs_sense(&oracle, &cfg).unwrap();
        assert_eq!(estimate.entries(), &[(4, 3.0)]);

        let pair = identity_pair(16);
        let rebuilt = reconstruct(&estimate, &pair).unwrap();
        assert_eq!(rebuilt, spike(16, 4, 3.0));
    }

    #[test]
    fn two_gaussian_spikes_always_recovered() {
        for trial in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
            let n = 64;
            let mut a = vec![0.0; n];
            let first = rng.gen_range(0..n);
            let mut second = rng.gen_range(0..n);
            while second == first {
                second = rng.gen_range(0..n);
            }
            let g: f64 = StandardNormal.sample(&mut rng);
            a[first] = g;
            let g: f64 = StandardNormal.sample(&mut rng);
            a[second] = g;

            let cfg = SensingConfig::new(n, 2).unwrap();
            let oracle = range_sum_oracle(a.clone()).unwrap();
            let (estimate, _) = k_ahs_sense(&oracle, &cfg).unwrap();
            let dense = estimate.to_dense();
            for i in 0..n {
                assert!(
                    (dense[i] - a[i]).abs() < RECOVERY_EPS,
                    "trial {trial}: coefficient {i} got {} want {}",
                    dense[i],
                    a[i]
                );
            }
        }
    }

    #[test]
    fn cancelling_pair_is_missed() {
        // The two large opposite coefficients share every ancestor up to
        // the initial level, so their sums vanish and the descent follows
        // the small third coefficient instead.
        let mut a = vec![0.0; 16];
        a[0] = 5.0;
        a[1] = -5.0;
        a[2] = 0.1;
        let cfg = SensingConfig::new(16, 1).unwrap();
        let oracle = range_sum_oracle(a).unwrap();
        let (estimate, log) = k_ahs_sense(&oracle, &cfg).unwrap();
        assert_eq!(estimate.entries(), &[(2, 0.1)]);

        assert_eq!(cfg.initial_level(), 2);
        let level2 = &log.levels()[0];
        assert_eq!(
            level2.records(),
            &[
                (NodeId::new(2, 0), 0.1),
                (NodeId::new(2, 1), 0.0),
                (NodeId::new(2, 2), 0.0),
                (NodeId::new(2, 3), 0.0),
            ]
        );
        assert_eq!(level2.winners(), &[NodeId::new(2, 0)]);
        let level1 = &log.levels()[1];
        assert_eq!(
            level1.records(),
            &[(NodeId::new(1, 0), 0.0), (NodeId::new(1, 1), 0.1)]
        );
        assert_eq!(level1.winners(), &[NodeId::new(1, 1)]);
        let level0 = &log.levels()[2];
        assert_eq!(
            level0.records(),
            &[(NodeId::new(0, 2), 0.1), (NodeId::new(0, 3), 0.0)]
        );
        assert_eq!(level0.winners(), &[NodeId::new(0, 2)]);
    }

    #[test]
    fn exactly_sparse_signals_recover_perfectly() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..200 {
            let n = 64;
            let big_k = 4;
            let k = rng.gen_range(1..=big_k);
            let mut a = vec![0.0; n];
            let mut placed = 0;
            while placed < k {
                let at = rng.gen_range(0..n);
                if a[at] == 0.0 {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    a[at] = g;
                    placed += 1;
                }
            }
            let cfg = SensingConfig::new(n, big_k).unwrap();
            let oracle = range_sum_oracle(a.clone()).unwrap();
            let (estimate, _) = k_ahs_sense(&oracle, &cfg).unwrap();
            let dense = estimate.to_dense();
            for i in 0..n {
                assert!((dense[i] - a[i]).abs() < RECOVERY_EPS, "trial {trial} index {i}");
            }
        }
    }

    #[test]
    fn descent_structure_and_query_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 256;
        let k = 4;
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cfg = SensingConfig::new(n, k).unwrap();
        let oracle = range_sum_oracle(a).unwrap();
        let (_, log) = k_ahs_sense(&oracle, &cfg).unwrap();

        assert_eq!(oracle.query_count() as usize, measurement_count(n, k).unwrap());
        assert_eq!(log.total_measurements(), measurement_count(n, k).unwrap());

        let top = cfg.initial_level();
        assert_eq!(log.levels()[0].level(), top);
        assert_eq!(log.levels()[0].records().len(), n >> top);
        for window in log.levels().windows(2) {
            let (upper, lower) = (&window[0], &window[1]);
            assert_eq!(upper.winners().len(), k);
            assert_eq!(lower.records().len(), 2 * k);
            let mut expected: Vec<NodeId> = upper
                .winners()
                .iter()
                .flat_map(|w| {
                    let (l, r) = w.children();
                    [l, r]
                })
                .collect();
            let mut got: Vec<NodeId> = lower.records().iter().map(|r| r.0).collect();
            expected.sort();
            got.sort();
            assert_eq!(got, expected, "level {} is not the winners' children", lower.level());
        }
        assert_eq!(log.levels().last().unwrap().winners().len(), k);
    }

    #[test]
    fn truncated_dimension_matches_padded_run() {
        let coeffs = spike(12, 9, 2.5);
        let cfg_small = SensingConfig::new(12, 1).unwrap();
        assert_eq!(cfg_small.n_padded(), 16);
        let oracle = range_sum_oracle(pad_coefficients(&coeffs, 16)).unwrap();
        let (estimate_small, _) = k_ahs_sense(&oracle, &cfg_small).unwrap();

        let cfg_big = SensingConfig::new(16, 1).unwrap();
        let oracle = range_sum_oracle(pad_coefficients(&coeffs, 16)).unwrap();
        let (estimate_big, _) = k_ahs_sense(&oracle, &cfg_big).unwrap();

        assert_eq!(estimate_small.entries(), estimate_big.entries());
        assert!(estimate_small.entries().iter().all(|&(i, _)| i < 12));
    }

    #[test]
    fn estimate_respects_sparsity_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for trial in 0..20u64 {
            let n = 128;
            let k = 3;
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let cfg = SensingConfig::new(n, k).unwrap();
            let oracle = range_sum_oracle(a).unwrap();
            let (estimate, _) = k_ahs_sense(&oracle, &cfg).unwrap();
            assert!(estimate.entries().len() <= 2 * k, "trial {trial}");
            for pair in estimate.entries().windows(2) {
                assert!(pair[0].0 < pair[1].0, "indices must be strictly increasing");
            }
        }
    }

    #[test]
    fn wavelet_sparse_image_round_trip() {
        // A signal that is exactly sparse in the wavelet domain is sensed
        // perfectly once the sparsity budget covers its support.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for (case, wrapped_seed) in [(0u64, None), (1, Some(17u64))] {
            let pair = haar2d_pair(8).unwrap();
            let n = 64;
            let k = 3;
            let mut a = vec![0.0; n];
            let mut placed = 0;
            while placed < k {
                let at = rng.gen_range(0..n);
                if a[at] == 0.0 {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    a[at] = g;
                    placed += 1;
                }
            }
            let cfg = SensingConfig::new(n, 4).unwrap();
            let (x, estimate) = match wrapped_seed {
                None => {
                    let x = pair.synthesize(&a);
                    let oracle = inner_product_oracle(&x, &pair).unwrap();
                    let (estimate, _) = k_ahs_sense(&oracle, &cfg).unwrap();
                    let rebuilt = reconstruct(&estimate, &pair).unwrap();
                    (x, (estimate, rebuilt))
                }
                Some(seed) => {
                    let wrapped = permuted(pair, seed);
                    let x = wrapped.synthesize(&a);
                    let oracle = inner_product_oracle(&x, &wrapped).unwrap();
                    let (estimate, _) = k_ahs_sense(&oracle, &cfg).unwrap();
                    let rebuilt = reconstruct(&estimate, &wrapped).unwrap();
                    (x, (estimate, rebuilt))
                }
            };
            let (estimate, rebuilt) = estimate;
            assert!(estimate.entries().len() <= 8, "case {case}");
            let err = x
                .iter()
                .zip(&rebuilt)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            assert!(err < RECOVERY_EPS, "case {case}: reconstruction error {err}");
        }
    }

    #[test]
    fn reconstruct_edge_cases() {
        let cfg = SensingConfig::new(16, 1).unwrap();
        let oracle = range_sum_oracle(vec![0.0; 16]).unwrap();
        let (empty, _) = k_ahs_sense(&oracle, &cfg).unwrap();
        assert!(empty.entries().is_empty());
        assert_eq!(reconstruct(&empty, &identity_pair(16)).unwrap(), vec![0.0; 16]);

        assert_eq!(
            reconstruct(&empty, &identity_pair(8)).unwrap_err(),
            SensingError::DimensionMismatch { got: 16, want: 8 }
        );
    }

    #[test]
    fn run_log_is_deterministic_and_serializable() {
        let a: Vec<f64> = (0..32).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let cfg = SensingConfig::new(32, 2).unwrap();
        let first = {
            let oracle = range_sum_oracle(a.clone()).unwrap();
            k_ahs_sense(&oracle, &cfg).unwrap().1.to_csv()
        };
        let second = {
            let oracle = range_sum_oracle(a.clone()).unwrap();
            k_ahs_sense(&oracle, &cfg).unwrap().1.to_csv()
        };
        assert_eq!(first, second, "same input must give a byte-identical log");
        assert!(first.starts_with("level,node_index,value,winner\n"));
        let rows = first.lines().count() - 1;
        assert_eq!(rows, measurement_count(32, 2).unwrap());

        let flipped = cfg.with_tie_break(TieBreak::HighIndexFirst);
        let oracle = range_sum_oracle(vec![1.0; 32]).unwrap();
        let flipped_log = k_ahs_sense(&oracle, &flipped).unwrap().1;
        let oracle = range_sum_oracle(vec![1.0; 32]).unwrap();
        let canonical_log = k_ahs_sense(&oracle, &cfg).unwrap().1;
        assert_ne!(
            canonical_log.levels()[0].winners(),
            flipped_log.levels()[0].winners(),
            "tie-break order must be observable on an all-ties level"
        );
    }
}
