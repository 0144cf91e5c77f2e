//! CDF 9/7 lifting kernel with symmetric whole-sample boundary extension,
//! the factorization used by JPEG 2000.
//!
//! The scaling lane is multiplied by [`ZETA`] and the detail lane divided
//! by it, which gives the analysis low-pass a DC gain of sqrt(2) and keeps
//! the amplitude convention aligned with the orthonormal Haar kernel.

/// First predict lifting coefficient.
pub(crate) const ALPHA: f64 = -1.586_134_342_059_924;
/// First update lifting coefficient.
pub(crate) const BETA: f64 = -0.052_980_118_572_961;
/// Second predict lifting coefficient.
pub(crate) const GAMMA: f64 = 0.882_911_075_530_934;
/// Second update lifting coefficient.
pub(crate) const DELTA: f64 = 0.443_506_852_043_971;
/// Lane scaling factor, sqrt(2) divided by the classic 1.230174 constant.
pub(crate) const ZETA: f64 = 1.149_604_398_860_241;

/// Predict pass: each odd sample gains `c` times the sum of its even
/// neighbors. The right edge folds back to `x[m - 2]` (whole-sample
/// symmetry), which for `m == 2` doubles the single left neighbor.
fn lift_odd(x: &mut [f64], c: f64) {
    let m = x.len();
    let mut i = 1;
    while i < m {
        let right = if i + 1 < m { x[i + 1] } else { x[m - 2] };
        x[i] += c * (x[i - 1] + right);
        i += 2;
    }
}

/// Update pass: each even sample gains `c` times the sum of its odd
/// neighbors. The left edge folds back to `x[1]`.
fn lift_even(x: &mut [f64], c: f64) {
    let m = x.len();
    let mut i = 0;
    while i < m {
        let left = if i == 0 { x[1] } else { x[i - 1] };
        x[i] += c * (left + x[i + 1]);
        i += 2;
    }
}

/// Transpose of [`lift_odd`]: reads the odd lane and scatters into the
/// even lane, with the same boundary fold.
fn scatter_odd(x: &mut [f64], c: f64) {
    let m = x.len();
    let mut i = 1;
    while i < m {
        let right = if i + 1 < m { i + 1 } else { m - 2 };
        let v = c * x[i];
        x[i - 1] += v;
        x[right] += v;
        i += 2;
    }
}

/// Transpose of [`lift_even`]: reads the even lane and scatters into the
/// odd lane.
fn scatter_even(x: &mut [f64], c: f64) {
    let m = x.len();
    let mut i = 0;
    while i < m {
        let left = if i == 0 { 1 } else { i - 1 };
        let v = c * x[i];
        x[left] += v;
        x[i + 1] += v;
        i += 2;
    }
}

/// One analysis sweep: the four lifting passes in place, then the scaled
/// lanes deinterleaved into [approximation | detail] halves.
pub(crate) fn forward_step(x: &mut [f64]) {
    let m = x.len();
    debug_assert!(m >= 2 && m % 2 == 0, "kernel needs an even length, got {m}");
    lift_odd(x, ALPHA);
    lift_even(x, BETA);
    lift_odd(x, GAMMA);
    lift_even(x, DELTA);
    let half = m / 2;
    let mut out = vec![0.0; m];
    for i in 0..half {
        out[i] = x[2 * i] * ZETA;
        out[half + i] = x[2 * i + 1] / ZETA;
    }
    x.copy_from_slice(&out);
}

/// Exact inverse of [`forward_step`]: interleave with inverse scaling,
/// then undo the lifting passes in reverse order.
pub(crate) fn inverse_step(x: &mut [f64]) {
    let m = x.len();
    debug_assert!(m >= 2 && m % 2 == 0, "kernel needs an even length, got {m}");
    let half = m / 2;
    let mut interleaved = vec![0.0; m];
    for i in 0..half {
        interleaved[2 * i] = x[i] / ZETA;
        interleaved[2 * i + 1] = x[half + i] * ZETA;
    }
    x.copy_from_slice(&interleaved);
    lift_even(x, -DELTA);
    lift_odd(x, -GAMMA);
    lift_even(x, -BETA);
    lift_odd(x, -ALPHA);
}

/// Transpose of [`forward_step`], assembled by transposing each stage and
/// reversing their order. Unlike the inverse it runs the scatter passes
/// with the original signs, so for this biorthogonal kernel the result
/// differs from [`inverse_step`].
pub(crate) fn adjoint_step(x: &mut [f64]) {
    let m = x.len();
    debug_assert!(m >= 2 && m % 2 == 0, "kernel needs an even length, got {m}");
    let half = m / 2;
    let mut interleaved = vec![0.0; m];
    for i in 0..half {
        interleaved[2 * i] = x[i] * ZETA;
        interleaved[2 * i + 1] = x[half + i] / ZETA;
    }
    x.copy_from_slice(&interleaved);
    scatter_even(x, DELTA);
    scatter_odd(x, GAMMA);
    scatter_even(x, BETA);
    scatter_odd(x, ALPHA);
}
