//! Analysis/synthesis transform pairs that expose sparse structure in
//! signals: the canonical basis, the orthonormal non-standard 2D Haar
//! wavelet, the biorthogonal CDF 9/7 wavelet, and a seeded permutation
//! wrapper that randomizes the coefficient order.
//!
//! Every pair satisfies perfect reconstruction: `synthesize(analyze(x))`
//! returns `x` up to floating-point error. The adjoint of the analysis
//! operator is exposed as well, so callers can materialize the signal-domain
//! vector that a coefficient-domain functional corresponds to.

mod cdf97;
mod haar;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Errors reported by the transform constructors.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum TransformError {
    /// 2D transforms require a power-of-two side of at least 2.
    #[error("side {side} is not a power of two at least 2")]
    InvalidSide { side: usize },
    /// Decomposition depth must lie in `1..=log2(side)`.
    #[error("levels {levels} outside 1..={max} for side {side}")]
    InvalidLevels { levels: usize, side: usize, max: usize },
}

/// A linear analysis/synthesis pair over `R^N`.
///
/// `analyze` maps a signal to its coefficient vector, `synthesize` is its
/// exact inverse, and `analysis_adjoint` applies the transpose of the
/// analysis operator. All three panic if the input length differs from
/// [`dimension`](Transform::dimension). Implementations are pure functions
/// of their inputs and safe to share across threads.
pub trait Transform: Send + Sync {
    /// Signal length `N`, equal to the coefficient count.
    fn dimension(&self) -> usize;

    /// Map a signal to its coefficient vector.
    fn analyze(&self, x: &[f64]) -> Vec<f64>;

    /// Map a coefficient vector back to the signal; exact inverse of
    /// [`analyze`](Transform::analyze).
    fn synthesize(&self, a: &[f64]) -> Vec<f64>;

    /// Apply the transpose of the analysis operator. For a coefficient-domain
    /// vector `u` this returns the signal-domain vector `v` with
    /// `dot(analyze(x), u) == dot(x, v)` for every `x`.
    fn analysis_adjoint(&self, u: &[f64]) -> Vec<f64>;
}

/// Which decomposition a [`TransformPair`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    /// Canonical basis; both directions are the identity map.
    Identity,
    /// Orthonormal non-standard (square) 2D Haar decomposition.
    Haar2d,
    /// Biorthogonal CDF 9/7 2D decomposition.
    Cdf97,
}

#[derive(Debug, Clone)]
enum Repr {
    Identity { n: usize },
    Haar2d { side: usize, levels: usize },
    Cdf97 { side: usize, levels: usize },
}

/// A concrete analysis/synthesis pair; build one with [`identity_pair`],
/// [`haar2d_pair`], or [`cdf97_2d_pair`].
#[derive(Debug, Clone)]
pub struct TransformPair {
    repr: Repr,
}

impl TransformPair {
    /// Which decomposition this pair applies.
    pub fn kind(&self) -> TransformKind {
        match self.repr {
            Repr::Identity { .. } => TransformKind::Identity,
            Repr::Haar2d { .. } => TransformKind::Haar2d,
            Repr::Cdf97 { .. } => TransformKind::Cdf97,
        }
    }

    /// Image side length for the 2D kinds, `None` for the identity.
    pub fn side(&self) -> Option<usize> {
        match self.repr {
            Repr::Identity { .. } => None,
            Repr::Haar2d { side, .. } | Repr::Cdf97 { side, .. } => Some(side),
        }
    }

    /// Decomposition depth; 0 for the identity.
    pub fn levels(&self) -> usize {
        match self.repr {
            Repr::Identity { .. } => 0,
            Repr::Haar2d { levels, .. } | Repr::Cdf97 { levels, .. } => levels,
        }
    }
}

/// Canonical-basis pair: `analyze` and `synthesize` are both the identity
/// map, so coefficients equal samples.
///
/// # Panics
/// Panics if `n` is 0.
pub fn identity_pair(n: usize) -> TransformPair {
    assert!(n >= 1, "dimension must be at least 1");
    TransformPair {
        repr: Repr::Identity { n },
    }
}

/// Orthonormal non-standard 2D Haar pair over a `side x side` image at the
/// full depth `log2(side)`.
pub fn haar2d_pair(side: usize) -> Result<TransformPair, TransformError> {
    let max = checked_log2(side)?;
    haar2d_pair_with_levels(side, max)
}

/// Orthonormal non-standard 2D Haar pair with an explicit decomposition
/// depth in `1..=log2(side)`.
pub fn haar2d_pair_with_levels(
    side: usize,
    levels: usize,
) -> Result<TransformPair, TransformError> {
    checked_levels(side, levels)?;
    Ok(TransformPair {
        repr: Repr::Haar2d { side, levels },
    })
}

/// Biorthogonal CDF 9/7 pair over a `side x side` image with an explicit
/// decomposition depth in `1..=log2(side)`. The analysis and synthesis
/// operators differ; synthesis is the exact lifting inverse.
pub fn cdf97_2d_pair(side: usize, levels: usize) -> Result<TransformPair, TransformError> {
    checked_levels(side, levels)?;
    Ok(TransformPair {
        repr: Repr::Cdf97 { side, levels },
    })
}

fn checked_log2(side: usize) -> Result<usize, TransformError> {
    if side < 2 || !side.is_power_of_two() {
        return Err(TransformError::InvalidSide { side });
    }
    Ok(side.trailing_zeros() as usize)
}

fn checked_levels(side: usize, levels: usize) -> Result<(), TransformError> {
    let max = checked_log2(side)?;
    if levels == 0 || levels > max {
        return Err(TransformError::InvalidLevels { levels, side, max });
    }
    Ok(())
}

impl Transform for TransformPair {
    fn dimension(&self) -> usize {
        match self.repr {
            Repr::Identity { n } => n,
            Repr::Haar2d { side, .. } | Repr::Cdf97 { side, .. } => side * side,
        }
    }

    fn analyze(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dimension(), "signal length mismatch");
        match self.repr {
            Repr::Identity { .. } => x.to_vec(),
            Repr::Haar2d { side, levels } => forward_2d(x, side, levels, haar::forward_step),
            Repr::Cdf97 { side, levels } => forward_2d(x, side, levels, cdf97::forward_step),
        }
    }

    fn synthesize(&self, a: &[f64]) -> Vec<f64> {
        assert_eq!(a.len(), self.dimension(), "coefficient length mismatch");
        match self.repr {
            Repr::Identity { .. } => a.to_vec(),
            Repr::Haar2d { side, levels } => backward_2d(a, side, levels, haar::inverse_step),
            Repr::Cdf97 { side, levels } => backward_2d(a, side, levels, cdf97::inverse_step),
        }
    }

    fn analysis_adjoint(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.dimension(), "coefficient length mismatch");
        match self.repr {
            Repr::Identity { .. } => u.to_vec(),
            // Orthonormal, so the adjoint of analysis is its inverse.
            Repr::Haar2d { .. } => self.synthesize(u),
            Repr::Cdf97 { side, levels } => backward_2d(u, side, levels, cdf97::adjoint_step),
        }
    }
}

/// Wraps a pair and shuffles its coefficient order with a seeded
/// permutation, so downstream consumers see the same coefficient values
/// assigned to pseudo-random positions.
#[derive(Debug, Clone)]
pub struct PermutedTransform {
    inner: TransformPair,
    perm: Vec<usize>,
    seed: u64,
}

/// Wrap `inner` with a uniformly random coefficient permutation drawn by
/// Fisher-Yates from a deterministic generator; the same seed always
/// produces the same permutation.
pub fn permuted(inner: TransformPair, seed: u64) -> PermutedTransform {
    let n = inner.dimension();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    PermutedTransform { inner, perm, seed }
}

impl PermutedTransform {
    /// The wrapped pair.
    pub fn inner(&self) -> &TransformPair {
        &self.inner
    }

    /// Position mapping: output slot `j` carries inner coefficient
    /// `perm()[j]`.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Seed the permutation was drawn from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Scatter permuted coefficients back to the inner order.
    fn unpermute(&self, w: &[f64]) -> Vec<f64> {
        let mut a = vec![0.0; w.len()];
        for (j, &value) in w.iter().enumerate() {
            a[self.perm[j]] = value;
        }
        a
    }
}

impl Transform for PermutedTransform {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn analyze(&self, x: &[f64]) -> Vec<f64> {
        let a = self.inner.analyze(x);
        self.perm.iter().map(|&src| a[src]).collect()
    }

    fn synthesize(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.dimension(), "coefficient length mismatch");
        self.inner.synthesize(&self.unpermute(w))
    }

    fn analysis_adjoint(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.dimension(), "coefficient length mismatch");
        self.inner.analysis_adjoint(&self.unpermute(u))
    }
}

/// Multilevel 2D analysis: per level, the 1D kernel sweeps every row of the
/// active top-left block and then every column, after which the flattening
/// below linearizes the sub-bands.
fn forward_2d(x: &[f64], side: usize, levels: usize, step: fn(&mut [f64])) -> Vec<f64> {
    let mut img = x.to_vec();
    for t in 0..levels {
        let c = side >> t;
        for r in 0..c {
            step(&mut img[r * side..r * side + c]);
        }
        let mut col = vec![0.0; c];
        for j in 0..c {
            for r in 0..c {
                col[r] = img[r * side + j];
            }
            step(&mut col);
            for r in 0..c {
                img[r * side + j] = col[r];
            }
        }
    }
    flatten_mallat(&img, side, levels)
}

/// Shared reverse driver: with the inverse kernel this inverts
/// [`forward_2d`], with the adjoint kernel it applies its transpose, since
/// in both cases the per-level stages act in mirrored order
/// (columns before rows, coarsest level first).
fn backward_2d(a: &[f64], side: usize, levels: usize, step: fn(&mut [f64])) -> Vec<f64> {
    let mut img = unflatten_mallat(a, side, levels);
    for t in (0..levels).rev() {
        let c = side >> t;
        let mut col = vec![0.0; c];
        for j in 0..c {
            for r in 0..c {
                col[r] = img[r * side + j];
            }
            step(&mut col);
            for r in 0..c {
                img[r * side + j] = col[r];
            }
        }
        for r in 0..c {
            step(&mut img[r * side..r * side + c]);
        }
    }
    img
}

/// Linearize the in-place Mallat representation: the approximation band
/// first (row-major), then detail bands coarse to fine, each scale
/// contributing its top-right, bottom-left, and bottom-right quadrant
/// bands in row-major order.
fn flatten_mallat(img: &[f64], side: usize, levels: usize) -> Vec<f64> {
    let s0 = side >> levels;
    let mut out = Vec::with_capacity(side * side);
    for r in 0..s0 {
        for c in 0..s0 {
            out.push(img[r * side + c]);
        }
    }
    let mut h = s0;
    while h < side {
        for r in 0..h {
            for c in h..2 * h {
                out.push(img[r * side + c]);
            }
        }
        for r in h..2 * h {
            for c in 0..h {
                out.push(img[r * side + c]);
            }
        }
        for r in h..2 * h {
            for c in h..2 * h {
                out.push(img[r * side + c]);
            }
        }
        h *= 2;
    }
    out
}

/// Inverse of [`flatten_mallat`]: scatter the linearized bands back into
/// the row-major `side x side` layout.
fn unflatten_mallat(v: &[f64], side: usize, levels: usize) -> Vec<f64> {
    let s0 = side >> levels;
    let mut img = vec![0.0; side * side];
    let mut it = v.iter();
    let mut take = |img: &mut [f64], r: usize, c: usize| {
        img[r * side + c] = *it.next().expect("flattened vector too short");
    };
    for r in 0..s0 {
        for c in 0..s0 {
            take(&mut img, r, c);
        }
    }
    let mut h = s0;
    while h < side {
        for r in 0..h {
            for c in h..2 * h {
                take(&mut img, r, c);
            }
        }
        for r in h..2 * h {
            for c in 0..h {
                take(&mut img, r, c);
            }
        }
        for r in h..2 * h {
            for c in h..2 * h {
                take(&mut img, r, c);
            }
        }
        h *= 2;
    }
    img
}
