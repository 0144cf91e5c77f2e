//! Synthetic coefficient models (exact sparsity, exponential decay, power
//! law) and the theory toolkit that predicts when the adaptive descent is
//! guaranteed to collect every significant coefficient: the minimal
//! nonempty subset sum `u`, the magnitude tail `r`, their sufficient
//! condition `u > r`, the critical power-law exponent where a 1-term
//! approximation still captures most of the energy, and the largest
//! admissible initial partition size for a given exponent.

use std::sync::OnceLock;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from model construction and the theory operations.
#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    /// Sparsity must satisfy `1 <= k <= n`.
    #[error("sparsity {k} outside 1..={n}")]
    InvalidSparsity { k: usize, n: usize },
    /// Exponential base must exceed 1.
    #[error("base {q} must exceed 1")]
    InvalidBase { q: f64 },
    /// Power-law exponent must exceed 1.
    #[error("exponent {alpha} must exceed 1")]
    InvalidExponent { alpha: f64 },
    /// Scale must be positive.
    #[error("scale {scale} must be positive")]
    InvalidScale { scale: f64 },
    /// Models need at least one coefficient.
    #[error("dimension must be at least 1")]
    EmptyDimension,
    /// Exhaustive subset enumeration is capped at 24 elements.
    #[error("subset enumeration limited to 24 elements, got {0}")]
    EnumerationTooLarge(usize),
    /// The magnitude tail reaches past the available ranks.
    #[error("tail needs rank 2*{partition}-1 but only {n} coefficients exist")]
    RankOverflow { partition: usize, n: usize },
    /// Selection larger than the coefficient vector.
    #[error("selection {k} exceeds {n} coefficients")]
    SelectionTooLarge { k: usize, n: usize },
}

/// The three coefficient models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Exactly `k` standard-Gaussian nonzeros at uniform locations.
    KSparse,
    /// Magnitudes `scale * q^-(rank-1)`, geometric decay.
    Exponential,
    /// Magnitudes `scale * rank^-alpha`, polynomial decay.
    PowerLaw,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::KSparse => "ksparse",
            ModelKind::Exponential => "exponential",
            ModelKind::PowerLaw => "powerlaw",
        })
    }
}

/// Full description of one synthetic coefficient vector. Unused parameters
/// keep their defaults (`k=1`, `q=2`, `alpha=2`) so a spec serializes as a
/// flat block regardless of kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Which decay model.
    pub kind: ModelKind,
    /// Coefficient dimension.
    #[serde(rename = "N")]
    pub n: usize,
    /// Nonzero count for the exact-sparsity model.
    pub k: usize,
    /// Base of the exponential model, > 1.
    pub q: f64,
    /// Exponent of the power-law model, > 1.
    pub alpha: f64,
    /// Magnitude scale applied to every model.
    #[serde(rename = "R")]
    pub scale: f64,
    /// Seed of the deterministic generator.
    pub seed: u64,
}

impl ModelSpec {
    /// Exactly `k` Gaussian nonzeros among `n` coefficients.
    pub fn ksparse(n: usize, k: usize, seed: u64) -> Self {
        ModelSpec {
            kind: ModelKind::KSparse,
            n,
            k,
            q: 2.0,
            alpha: 2.0,
            scale: 1.0,
            seed,
        }
    }

    /// Geometric magnitude decay with base `q`.
    pub fn exponential(n: usize, q: f64, seed: u64) -> Self {
        ModelSpec {
            kind: ModelKind::Exponential,
            n,
            k: 1,
            q,
            alpha: 2.0,
            scale: 1.0,
            seed,
        }
    }

    /// Polynomial magnitude decay with exponent `alpha`.
    pub fn powerlaw(n: usize, alpha: f64, seed: u64) -> Self {
        ModelSpec {
            kind: ModelKind::PowerLaw,
            n,
            k: 1,
            q: 2.0,
            alpha,
            scale: 1.0,
            seed,
        }
    }

    /// Same model with a different magnitude scale.
    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    /// Check the parameters against the model constraints.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n == 0 {
            return Err(ModelError::EmptyDimension);
        }
        if self.scale <= 0.0 {
            return Err(ModelError::InvalidScale { scale: self.scale });
        }
        match self.kind {
            ModelKind::KSparse => {
                if self.k < 1 || self.k > self.n {
                    return Err(ModelError::InvalidSparsity { k: self.k, n: self.n });
                }
            }
            ModelKind::Exponential => {
                if self.q <= 1.0 {
                    return Err(ModelError::InvalidBase { q: self.q });
                }
            }
            ModelKind::PowerLaw => {
                if self.alpha <= 1.0 {
                    return Err(ModelError::InvalidExponent { alpha: self.alpha });
                }
            }
        }
        Ok(())
    }
}

/// Draw the coefficient vector a spec describes. Deterministic in the
/// seed; the generator is consumed in a fixed order: first the signed
/// values in magnitude-rank order (Gaussian draws for the sparse model,
/// analytic magnitudes with fair-coin signs for the decaying models),
/// then one position shuffle that scatters rank `j` to a uniform location.
pub fn generate(spec: &ModelSpec) -> Result<Vec<f64>, ModelError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ranked: Vec<f64> = match spec.kind {
        ModelKind::KSparse => (0..spec.k)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                spec.scale * g
            })
            .collect(),
        ModelKind::Exponential => {
            let magnitudes: Vec<f64> = (0..spec.n)
                .map(|rank| spec.scale * spec.q.powi(-(rank as i32)))
                .collect();
            sign_flip(magnitudes, &mut rng)
        }
        ModelKind::PowerLaw => {
            let magnitudes: Vec<f64> = (1..=spec.n)
                .map(|rank| spec.scale * (rank as f64).powf(-spec.alpha))
                .collect();
            sign_flip(magnitudes, &mut rng)
        }
    };

    let mut positions: Vec<usize> = (0..spec.n).collect();
    for i in (1..spec.n).rev() {
        let j = rng.gen_range(0..=i);
        positions.swap(i, j);
    }
    let mut out = vec![0.0; spec.n];
    for (rank, &value) in ranked.iter().enumerate() {
        out[positions[rank]] = value;
    }
    Ok(out)
}

fn sign_flip(magnitudes: Vec<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    magnitudes
        .into_iter()
        .map(|m| if rng.gen::<bool>() { m } else { -m })
        .collect()
}

/// The `k` coefficients of largest magnitude with their indices, ordered
/// by descending magnitude with ties broken by the smaller index (the
/// same order the sensing selection uses on leaves).
#[derive(Debug, Clone, PartialEq)]
pub struct SignificantSet {
    entries: Vec<(usize, f64)>,
}

impl SignificantSet {
    /// Top `k` of a coefficient vector by magnitude.
    pub fn from_coefficients(coeffs: &[f64], k: usize) -> Result<Self, ModelError> {
        if k > coeffs.len() {
            return Err(ModelError::SelectionTooLarge { k, n: coeffs.len() });
        }
        let mut order: Vec<(usize, f64)> = coeffs.iter().copied().enumerate().collect();
        order.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
        order.truncate(k);
        Ok(SignificantSet { entries: order })
    }

    /// Member count `k`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// True when the set is empty.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Coefficient indices in rank order.
    pub fn indices(&self) -> Vec<usize> {
        self.entries.iter().map(|&(i, _)| i).collect()
    }

    /// Coefficient values in rank order.
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|&(_, v)| v).collect()
    }
}

/// Smallest magnitude any nonempty subset sum of the significant
/// coefficients can reach, by exhaustive enumeration of the `2^k - 1`
/// nonempty subsets. The empty subset is excluded on purpose: admitting it
/// would pin the minimum at 0 and void the recovery condition.
pub fn u_min_subset(sig: &SignificantSet) -> Result<f64, ModelError> {
    let k = sig.len();
    if k > 24 {
        return Err(ModelError::EnumerationTooLarge(k));
    }
    let values = sig.values();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1u32 << k) {
        let mut sum = 0.0;
        for (bit, value) in values.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                sum += value;
            }
        }
        best = best.min(sum.abs());
    }
    Ok(best)
}

/// Sum of the coefficient magnitudes at ranks `k+1 ..= 2*partition - 1`
/// (1-based ranks). Zero when the range is empty; the top rank `2*partition - 1`
/// must exist.
pub fn r_tail(coeffs: &[f64], k: usize, partition: usize) -> Result<f64, ModelError> {
    let top_rank = 2 * partition - 1;
    if top_rank > coeffs.len() {
        return Err(ModelError::RankOverflow {
            partition,
            n: coeffs.len(),
        });
    }
    let mut magnitudes: Vec<f64> = coeffs.iter().map(|v| v.abs()).collect();
    magnitudes.sort_by(|a, b| b.total_cmp(a));
    Ok(magnitudes[k.min(top_rank)..top_rank].iter().sum())
}

/// Worst-case insignificant mass in one selection comparison. A dropped
/// significant node pits a measurement carrying significant coefficients
/// (at most `partition - 1` insignificant passengers) against one carrying
/// none (at most `partition`), so at most `2*partition - 1` insignificant
/// coefficients are involved; their mass is bounded by the largest
/// insignificant magnitudes, ranks `k+1 ..= k + 2*partition - 1`. The range
/// truncates at the dimension when fewer insignificant ranks exist.
fn guarantee_tail(coeffs: &[f64], k: usize, partition: usize) -> Result<f64, ModelError> {
    if 2 * partition - 1 > coeffs.len() {
        return Err(ModelError::RankOverflow {
            partition,
            n: coeffs.len(),
        });
    }
    let top_rank = (k + 2 * partition - 1).min(coeffs.len());
    let mut magnitudes: Vec<f64> = coeffs.iter().map(|v| v.abs()).collect();
    magnitudes.sort_by(|a, b| b.total_cmp(a));
    Ok(magnitudes[k.min(top_rank)..top_rank].iter().sum())
}

/// The sufficient recovery condition: when it holds, a sensing run whose
/// budget covers `sig` must collect every significant coefficient. The
/// converse is not implied.
///
/// The comparison pits `u` against the worst-case insignificant mass of a
/// selection round ([`guarantee_tail`]), not against the plain tail sum
/// [`r_tail`]: the latter starts its `2*partition - 1` window at rank 1
/// instead of rank `k+1` and so undercounts by `k` terms, which admits
/// cancellation misses it claims to exclude (e.g. an empty window whenever
/// `k >= 2*partition - 1`).
pub fn recovery_certified(
    sig: &SignificantSet,
    coeffs: &[f64],
    partition: usize,
) -> Result<bool, ModelError> {
    let u = u_min_subset(sig)?;
    let r = guarantee_tail(coeffs, sig.len(), partition)?;
    Ok(u > r)
}

/// Terms of the direct zeta series; the midpoint integral tail keeps the
/// certified truncation error below 1e-12 for exponents above 1.2.
const ZETA_SERIES_TERMS: usize = 1_000_000;

/// Riemann zeta for a real argument > 1: compensated direct summation of
/// the first million terms plus the midpoint integral tail
/// `(M + 1/2)^(1-alpha) / (alpha - 1)`.
///
/// # Panics
/// Panics if `alpha <= 1`.
pub fn zeta(alpha: f64) -> f64 {
    assert!(alpha > 1.0, "zeta series needs alpha > 1, got {alpha}");
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for n in 1..=ZETA_SERIES_TERMS {
        let term = (n as f64).powf(-alpha);
        let y = term - compensation;
        let t = sum + y;
        compensation = (t - sum) - y;
        sum = t;
    }
    let m = ZETA_SERIES_TERMS as f64 + 0.5;
    sum + m.powf(1.0 - alpha) / (alpha - 1.0)
}

/// The exponent where a power-law signal's zeta-normalized magnitudes sum
/// to 2, found by bisection; cached after the first call. At this exponent
/// the optimal 1-term approximation still captures over 88% of the energy.
pub fn alpha_star() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| {
        // zeta is strictly decreasing: zeta(1.5) > 2 > zeta(2).
        let mut lo = 1.5;
        let mut hi = 2.0;
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if zeta(mid) > 2.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    })
}

/// Energy share of the single largest coefficient of a power-law signal of
/// dimension `n`: `1 / sum_(m=1..n) m^(-2 alpha)`.
pub fn energy_fraction_top1(alpha: f64, n: usize) -> Result<f64, ModelError> {
    if alpha <= 1.0 {
        return Err(ModelError::InvalidExponent { alpha });
    }
    let mut sum = 0.0;
    for m in (1..=n).rev() {
        sum += (m as f64).powf(-2.0 * alpha);
    }
    Ok(1.0 / sum)
}

/// Dimension-free limit of [`energy_fraction_top1`]: `1 / zeta(2 alpha)`.
pub fn energy_fraction_top1_limit(alpha: f64) -> Result<f64, ModelError> {
    if alpha <= 1.0 {
        return Err(ModelError::InvalidExponent { alpha });
    }
    Ok(1.0 / zeta(2.0 * alpha))
}

/// Partition sizes are scanned up to this power of two before the bound is
/// declared unbounded.
const PARTITION_CAP_LEVEL: usize = 60;

/// Result of the partition-size bound for a power-law exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionBound {
    /// Largest admissible power-of-two partition size.
    pub partition: usize,
    /// Its base-2 logarithm, the deepest admissible initial tree level.
    pub level: usize,
    /// Whether any partition size satisfied the bound. Defensive: for
    /// every exponent above 1 the size-1 partition does.
    pub any_valid: bool,
    /// True when every scanned size satisfied the bound; `partition` then
    /// reports the scan cap rather than a true maximum.
    pub unbounded: bool,
}

/// Left-hand side of the partition admissibility test: the analytic bound
/// on the normalized magnitude tail `r / scale` for partition size
/// `partition`, via an integral approximation of the rank sum. Admissible
/// when this is below 1.
pub fn partition_bound_rhs(alpha: f64, partition: usize) -> f64 {
    let p = partition as f64;
    2f64.powf(-alpha) + ((2.0 * p - 0.5).powf(1.0 - alpha) - 2.5f64.powf(1.0 - alpha)) / (1.0 - alpha)
}

/// Largest power-of-two partition size whose bound stays below 1 for a
/// power-law signal with exponent `alpha`. The bound grows with the
/// partition size, so the scan stops at the first violation; exponents
/// past roughly 1.74 admit every size and report the cap with the
/// `unbounded` flag set.
pub fn max_partition_size(alpha: f64) -> Result<PartitionBound, ModelError> {
    if alpha <= 1.0 {
        return Err(ModelError::InvalidExponent { alpha });
    }
    let mut best: Option<usize> = None;
    for level in 0..=PARTITION_CAP_LEVEL {
        let partition = 1usize << level;
        if partition_bound_rhs(alpha, partition) < 1.0 {
            best = Some(level);
        } else {
            break;
        }
    }
    Ok(match best {
        None => PartitionBound {
            partition: 1,
            level: 0,
            any_valid: false,
            unbounded: false,
        },
        Some(level) => PartitionBound {
            partition: 1 << level,
            level,
            any_valid: true,
            unbounded: level == PARTITION_CAP_LEVEL,
        },
    })
}
