//! Orthonormal Haar butterfly used as the 1D building block of the
//! non-standard 2D decomposition.

use std::f64::consts::FRAC_1_SQRT_2;

/// One analysis sweep over an even-length slice: pairwise sums and
/// differences scaled by 1/sqrt(2) so energy is preserved, approximation
/// samples packed into the front half and details into the back half.
pub(crate) fn forward_step(x: &mut [f64]) {
    let m = x.len();
    debug_assert!(m >= 2 && m % 2 == 0, "kernel needs an even length, got {m}");
    let half = m / 2;
    let mut out = vec![0.0; m];
    for i in 0..half {
        let a = x[2 * i];
        let b = x[2 * i + 1];
        out[i] = (a + b) * FRAC_1_SQRT_2;
        out[half + i] = (a - b) * FRAC_1_SQRT_2;
    }
    x.copy_from_slice(&out);
}

/// Exact inverse of [`forward_step`]; for an orthonormal kernel this is
/// also its transpose.
pub(crate) fn inverse_step(x: &mut [f64]) {
    let m = x.len();
    debug_assert!(m >= 2 && m % 2 == 0, "kernel needs an even length, got {m}");
    let half = m / 2;
    let mut out = vec![0.0; m];
    for i in 0..half {
        let s = x[i];
        let d = x[half + i];
        out[2 * i] = (s + d) * FRAC_1_SQRT_2;
        out[2 * i + 1] = (s - d) * FRAC_1_SQRT_2;
    }
    x.copy_from_slice(&out);
}
