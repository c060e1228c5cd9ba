//! An infinite-alphabet source where variable-length codes win outright.
//!
//! Letters `n = 0, 1, 2, …` carry probabilities `pₙ = (6/π²)/(n+1)²`. Any
//! quantizer restricted to `N` reproduction levels must miss the tail mass
//! `Σ_{n≥N} pₙ > 0`, while the variable-length code with lengths
//! `ℓₙ = ⌈2·log₂(n+1) + 1⌉` reproduces every letter exactly at the finite
//! rate `Σ pₙ ℓₙ`. The continuous analogue partitions `[0, 1]` into
//! consecutive intervals of lengths `pₙ`; encoding a uniform sample to its
//! interval index gives zero distortion under the matching binary
//! distortion measure at the same finite rate.
//!
//! Infinite sums are reported as brackets: an explicit partial sum plus
//! integral bounds on the remainder, so every returned value is a checked
//! enclosure rather than a guess.

use crate::error::{Error, Result};
use crate::quantizer::prefix_code_len;
use crate::scalar::{cast, cast_u64, Real};

/// `6/π²`, the normalizer of the inverse-square law.
pub fn normalizer<F: Real>() -> F {
    cast::<F>(6.0) / (F::PI() * F::PI())
}

/// Letter probability `pₙ = (6/π²)/(n+1)²`.
pub fn letter_probability<F: Real>(n: u64) -> F {
    let k = cast_u64::<F>(n + 1);
    normalizer::<F>() / (k * k)
}

/// Bracket `[lower, upper]` of the variable-length quantization rate
/// `Σ pₙ ℓₙ`: the partial sum through `n_trunc` terms, plus a tail bracket
/// from `ℓₙ ≤ 2·log₂(n+1) + 2` and integral bounds on `Σ ln(n+1)/(n+1)²`.
pub fn vlq_rate_bracket<F: Real>(n_trunc: u64) -> Result<(F, F)> {
    if n_trunc < 1 {
        return Err(Error::Domain("n_trunc must be at least 1".into()));
    }
    let mut lower = F::zero();
    for n in 0..n_trunc {
        lower += letter_probability::<F>(n) * cast::<F>(prefix_code_len(n) as f64);
    }
    // tail: Σ_{n≥N} pₙ ℓₙ ≤ (6/π²) [ (2/ln2) Σ ln(n+1)/(n+1)² + 2 Σ (n+1)⁻² ]
    // with decreasing-term integral bounds f(N) + ∫_N^∞ f
    let nf = cast_u64::<F>(n_trunc);
    let np1 = nf + F::one();
    let log_term = np1.ln() / (np1 * np1) + (np1.ln() + F::one()) / np1;
    let sq_term = (np1 * np1).recip() + np1.recip();
    let two = cast::<F>(2.0);
    let tail = normalizer::<F>() * (two / cast::<F>(2.0f64.ln()) * log_term + two * sq_term);
    Ok((lower, lower + tail))
}

/// Minimal attainable distortion of any `n_levels`-level fixed-length
/// quantizer: the tail mass `Σ_{n≥N} pₙ` left over after reproducing the
/// `N` most probable letters. Evaluated as a short explicit sum plus an
/// integral-bracket midpoint, accurate to the bracket width
/// `1/(M(M−1))` with `M ≈ N + 1000`.
pub fn flq_min_distortion<F: Real>(n_levels: u64) -> Result<F> {
    if n_levels < 1 {
        return Err(Error::Domain("n_levels must be at least 1".into()));
    }
    let explicit = 1000u64;
    let mut partial = F::zero();
    // Σ_{k=N+1}^{N+explicit} k⁻²  (k = n+1 over n ≥ N)
    for k in (n_levels + 1)..=(n_levels + explicit) {
        let kf = cast_u64::<F>(k);
        partial += (kf * kf).recip();
    }
    let m = cast_u64::<F>(n_levels + explicit + 1);
    // Σ_{k≥M} k⁻² ∈ [1/M, 1/(M−1)]
    let tail_mid = (m.recip() + (m - F::one()).recip()) / cast::<F>(2.0);
    Ok(normalizer::<F>() * (partial + tail_mid))
}

/// Index of the interval of `[0, 1]` containing `x`, under the
/// left-to-right layout of consecutive intervals with lengths `pₙ`.
///
/// The cumulative sums converge to 1 only in the limit, so the search
/// stops once adding the next probability no longer advances the
/// accumulator in floating point (a set of width about `8·10⁻⁹` next to
/// 1 that uniform samples essentially never hit).
pub fn partition_index<F: Real>(x: F) -> Result<u64> {
    if !(x >= F::zero() && x <= F::one()) {
        return Err(Error::Domain(format!("sample must lie in [0, 1], got {x}")));
    }
    let mut n = 0u64;
    let mut cum = letter_probability::<F>(0);
    while x >= cum {
        let next = cum + letter_probability::<F>(n + 1);
        if next == cum {
            break; // float saturation; land in the last representable interval
        }
        cum = next;
        n += 1;
    }
    Ok(n)
}

/// Binary distortion of reproducing `x` by the letter of interval `n`:
/// zero exactly when `x` lies in interval `n`.
pub fn interval_distortion<F: Real>(x: F, n: u64) -> Result<u8> {
    if !(x >= F::zero() && x <= F::one()) {
        return Err(Error::Domain(format!("sample must lie in [0, 1], got {x}")));
    }
    let mut lo = F::zero();
    for k in 0..n {
        lo += letter_probability::<F>(k);
    }
    let hi = lo + letter_probability::<F>(n);
    Ok(u8::from(!(x >= lo && x < hi)))
}
