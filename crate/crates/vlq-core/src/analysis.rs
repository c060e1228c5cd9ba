//! Analytic bounds and their numerical verification hooks.
//!
//! The achievable-rate argument splits the index distribution at a layer
//! threshold `ℓ₀`: indices below `|Y_{ℓ₀}|` are handled by the per-cell
//! bound `P(cell) ≤ 1 − e^{−α} ≤ α`, and the mass beyond layer `ℓ`
//! (`ℓ ≥ ℓ₀`) is confined to the thin shell `α ≤ ‖h‖² ≤ α(1 + 3t/2^ℓ)`,
//! whose probability is below `3(t+1)/t · αᵗ / 2^ℓ`. This module computes
//! the threshold, the explicit tail constant, the resulting rate bound
//! with an exact geometric closure for the unmaterialized layers, the
//! converse floor, and log–log decay slopes for scaling checks.

use rayon::prelude::*;

use crate::channel::{sample_channel, ChannelVector, RandomStream};
use crate::codebook::{enumerate_layer_slice, CodebookStream, MAX_LAYER};
use crate::core_math::outage_open_closed;
use crate::error::{Error, Result};
use crate::quantizer::{encode_vlq_packed, PackedChannel};
use crate::scalar::{cast, cast_i64, cast_u64, cast_usize, Real};

/// Explicit evaluation of the achievable-rate bound.
#[derive(Clone, Debug)]
pub struct BoundReport<F: Real> {
    /// Layer threshold from which the tail estimate applies.
    pub ell0: usize,
    /// Tail constant `3(t+1)/t`.
    pub tail_constant: F,
    /// The rate bound in bits per channel state.
    pub rate_bound: F,
    /// Materialized per-layer series terms `⌊log₂|Y_{ℓ+1}|⌋ / 2^ℓ`.
    pub per_layer_terms: Vec<F>,
}

/// Smallest layer `ℓ ≥ 1` at which all three tail-estimate conditions
/// hold: the covering construction is valid (`2t < 2^{2(ℓ+1)}`), the
/// shell bound is positive (`2^ℓ > 6t`), and the geometric bracket
/// `Σ_{j<t} (1 + 3t/2^ℓ)^j` stays below `t + 1`.
pub fn min_tail_layer(t: usize) -> usize {
    let mut ell = 1usize;
    loop {
        let pow2 = (1u128 << ell) as f64;
        let cond_a = (2 * t as u128) < (1u128 << (2 * ell + 2));
        let cond_b = (1u128 << ell) > 6 * t as u128;
        let ratio = 1.0 + 3.0 * t as f64 / pow2;
        let mut bracket = 0.0f64;
        let mut term = 1.0f64;
        for _ in 0..t {
            bracket += term;
            term *= ratio;
        }
        let cond_c = bracket < (t + 1) as f64;
        if cond_a && cond_b && cond_c {
            return ell;
        }
        ell += 1;
    }
}

/// Shell-probability bound `3(t+1)/t · αᵗ / 2^ℓ` on the index mass beyond
/// layer `ell`. Only justified from [`min_tail_layer`] upward.
pub fn tail_bound<F: Real>(t: usize, alpha: F, ell: usize) -> Result<F> {
    if t < 1 {
        return Err(Error::Domain("t must be at least 1".into()));
    }
    if alpha <= F::zero() {
        return Err(Error::Domain("alpha must be positive".into()));
    }
    let ell0 = min_tail_layer(t);
    if ell < ell0 {
        return Err(Error::Domain(format!(
            "tail bound not justified below layer {ell0} (got {ell})"
        )));
    }
    let c1 = cast::<F>(3.0) * cast_usize::<F>(t + 1) / cast_usize::<F>(t);
    Ok(c1 * alpha.powi(t as i32) / cast::<F>(2.0f64.powi(ell as i32)))
}

/// Evaluate the explicit rate bound
/// `α·⌊log₂|Y_{ℓ₀}|⌋·(|Y_{ℓ₀}|−2) + C₁ αᵗ Σ_{ℓ≥ℓ₀} ⌊log₂|Y_{ℓ+1}|⌋/2^ℓ`.
///
/// `layer_sizes` are cumulative deduplicated counts starting at layer 0.
/// Series terms whose layer size is not supplied fall back to the
/// cardinality cap `|Y_ℓ| ≤ 2^{2t(ℓ+2)}`, for which the remaining series
/// sums in closed form: `Σ_{ℓ≥L} 2t(ℓ+3)/2^ℓ = 2t(L+4)·2^{1−L}`.
pub fn rate_upper_bound<F: Real>(
    t: usize,
    alpha: F,
    layer_sizes: &[u64],
) -> Result<BoundReport<F>> {
    if alpha <= F::zero() {
        return Err(Error::Domain("alpha must be positive".into()));
    }
    let ell0 = min_tail_layer(t);
    if layer_sizes.len() <= ell0 {
        return Err(Error::InsufficientLayers {
            needed: ell0,
            available: layer_sizes.len().saturating_sub(1),
        });
    }
    let two = cast::<F>(2.0);
    let size_ell0 = layer_sizes[ell0];
    let head = alpha
        * cast_u64::<F>(size_ell0.ilog2() as u64)
        * cast_u64::<F>(size_ell0 - 2);

    let mut series = F::zero();
    let mut per_layer_terms = Vec::new();
    let mut ell = ell0;
    while ell + 1 < layer_sizes.len() {
        let term = cast_u64::<F>(layer_sizes[ell + 1].ilog2() as u64)
            / two.powi(ell as i32);
        per_layer_terms.push(term);
        series += term;
        ell += 1;
    }
    // closed-form remainder from the first layer without a materialized size
    let l = ell as i32;
    let remainder = cast_usize::<F>(2 * t)
        * cast_i64::<F>(l as i64 + 4)
        * two.powi(1 - l);
    series += remainder;

    let c1 = cast::<F>(3.0) * cast_usize::<F>(t + 1) / cast_usize::<F>(t);
    let rate_bound = head + c1 * alpha.powi(t as i32) * series;
    Ok(BoundReport { ell0, tail_constant: c1, rate_bound, per_layer_terms })
}

/// Converse floor `max(0, P(|h₁|² < α) − rate)`: any feedback scheme with
/// the given rate has outage probability at least this value.
pub fn converse_floor<F: Real>(alpha: F, rate: F) -> Result<F> {
    if rate < F::zero() {
        return Err(Error::Domain("rate must be nonnegative".into()));
    }
    Ok((outage_open_closed(alpha)? - rate).max(F::zero()))
}

/// Least-squares slope of `log(value)` against `log(P)`.
pub fn log_log_slope<F: Real>(points: &[(F, F)]) -> Result<F> {
    if points.len() < 3 {
        return Err(Error::Domain(format!(
            "slope fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    for &(p, v) in points {
        if p <= F::zero() || v <= F::zero() {
            return Err(Error::Domain("slope fit needs positive coordinates".into()));
        }
    }
    let n = cast_usize::<F>(points.len());
    let xs: Vec<F> = points.iter().map(|&(p, _)| p.ln()).collect();
    let ys: Vec<F> = points.iter().map(|&(_, v)| v.ln()).collect();
    let x_mean = xs.iter().copied().sum::<F>() / n;
    let y_mean = ys.iter().copied().sum::<F>() / n;
    let mut num = F::zero();
    let mut den = F::zero();
    for (x, y) in xs.iter().zip(&ys) {
        num += (*x - x_mean) * (*y - y_mean);
        den += (*x - x_mean) * (*x - x_mean);
    }
    Ok(num / den)
}

// ---------------------------------------------------------------------------
// Monte Carlo tail mass
// ---------------------------------------------------------------------------

/// Monte Carlo estimate of the probability that the sequential encoder
/// resolves only beyond the layer-`ell` prefix of the codebook.
#[derive(Clone, Copy, Debug)]
pub struct TailMassEstimate {
    pub unresolved: u64,
    pub n_samples: u64,
    /// `unresolved / n_samples`.
    pub fraction: f64,
    /// Binomial standard error of the fraction.
    pub std_err: f64,
}

/// Estimate `P(index ≥ |Y_ell|)` for the layered codebook at threshold
/// `alpha`, over `n_samples` deterministic channel draws.
///
/// Layers up to `base.ell_max()` are scanned through the materialized
/// cache. Deeper layers (up to `ell ≤ MAX_LAYER`) are too large to store;
/// the few channels still unresolved are settled against a streamed
/// enumeration: a componentwise-quantization witness first (a hit proves
/// membership without a scan), then an exact parallel sweep of the layer
/// for the remainder.
pub fn mc_tail_mass(
    t: usize,
    alpha: f64,
    ell: usize,
    base: &CodebookStream,
    n_samples: u64,
    seed: u64,
) -> Result<TailMassEstimate> {
    if ell > MAX_LAYER {
        return Err(Error::Domain(format!("ell {ell} exceeds MAX_LAYER {MAX_LAYER}")));
    }
    if t != base.t() {
        return Err(Error::DimensionMismatch { expected: base.t(), got: t });
    }
    let scan_ell = ell.min(base.ell_max());

    // resolve what the materialized prefix can; collect the survivors
    let chunk = 1u64 << 14;
    let ranges: Vec<(u64, u64)> = (0..n_samples)
        .step_by(chunk as usize)
        .map(|lo| (lo, (lo + chunk).min(n_samples)))
        .collect();
    let mut pending: Vec<PackedChannel<f64>> = ranges
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut local = Vec::new();
            for i in lo..hi {
                let mut stream = RandomStream::new(seed, i);
                let h: ChannelVector<f64> = sample_channel(&mut stream, t).expect("t >= 1");
                let packed = PackedChannel::new(&h);
                if packed.norm_sqr < alpha {
                    continue; // resolves at index 0
                }
                let mut hit = false;
                for l in 0..=scan_ell {
                    if crate::quantizer::scan_layer_first_hit(
                        base.layer(l),
                        &packed,
                        alpha,
                        usize::MAX,
                    )
                    .is_some()
                    {
                        hit = true;
                        break;
                    }
                }
                if !hit {
                    local.push(packed);
                }
            }
            local
        })
        .reduce(Vec::new, |mut a, mut b| {
            a.append(&mut b);
            a
        });

    for l in (scan_ell + 1)..=ell {
        if pending.is_empty() {
            break;
        }
        pending = resolve_against_streamed_layer(t, alpha, l, pending);
    }

    let unresolved = pending.len() as u64;
    let fraction = unresolved as f64 / n_samples as f64;
    let std_err = (fraction * (1.0 - fraction) / n_samples as f64).sqrt();
    Ok(TailMassEstimate { unresolved, n_samples, fraction, std_err })
}

/// Drop every pending channel that some layer-`ell` direction serves, by
/// streaming the layer once in parallel first-coordinate slices.
fn resolve_against_streamed_layer(
    t: usize,
    alpha: f64,
    ell: usize,
    pending: Vec<PackedChannel<f64>>,
) -> Vec<PackedChannel<f64>> {
    // witness shortcut: a successful componentwise quantization of h̄ is a
    // member of the layer, so those channels need no scan
    let min_ell = crate::codebook::min_witness_layer(t);
    let (resolved_fast, pending): (Vec<_>, Vec<_>) = pending.into_iter().partition(|p| {
        if ell < min_ell {
            return false;
        }
        let norm = p.norm_sqr.sqrt();
        let entries: Vec<num_complex::Complex<f64>> = (0..t)
            .map(|i| num_complex::Complex::new(p.a[2 * i] / norm, p.a[2 * i + 1] / norm))
            .collect();
        let h_bar = ChannelVector::new(entries).expect("nonzero");
        match crate::codebook::covering_witness(&h_bar, ell) {
            Ok(w) => match crate::channel::gain(&w, &h_bar) {
                Ok(g) => g * p.norm_sqr >= alpha,
                Err(_) => false,
            },
            Err(_) => false,
        }
    });
    drop(resolved_fast);
    if pending.is_empty() {
        return pending;
    }

    let max_abs = (1i64 << (ell + 1)) - 1;
    let hit_masks: Vec<Vec<bool>> = (-max_abs..=max_abs)
        .into_par_iter()
        .map(|c0| {
            let mut mask = vec![false; pending.len()];
            let mut it = enumerate_layer_slice(ell, t, c0);
            let mut coords_f = vec![0.0f64; 2 * t];
            while let Some((coords, norm_sqr)) = it.next_ref() {
                for (dst, &c) in coords_f.iter_mut().zip(coords) {
                    *dst = c as f64;
                }
                for (m, p) in mask.iter_mut().zip(&pending) {
                    if *m {
                        continue;
                    }
                    let mut re = 0.0f64;
                    let mut im = 0.0f64;
                    for ((&cf, &ai), &bi) in coords_f.iter().zip(&p.a).zip(&p.b) {
                        re += cf * ai;
                        im += cf * bi;
                    }
                    if re * re + im * im >= alpha * norm_sqr as f64 {
                        *m = true;
                    }
                }
            }
            mask
        })
        .collect();

    pending
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !hit_masks.iter().any(|m| m[*i]))
        .map(|(_, p)| p)
        .collect()
}

/// Exact per-sample inclusion checks used by the verification battery:
/// channels below the threshold always resolve to index 0 with outage,
/// and channels above the guaranteed margin never truncate.
pub fn inclusion_check(
    stream: &CodebookStream,
    alpha: f64,
    n_samples: u64,
    seed: u64,
) -> Result<(u64, u64)> {
    let t = stream.t();
    let ell = stream.ell_max();
    if ell < min_tail_layer(t) {
        return Err(Error::Domain(format!(
            "inclusion check needs ell_max ≥ {}",
            min_tail_layer(t)
        )));
    }
    let margin = alpha * (1.0 + 3.0 * t as f64 / 2.0f64.powi(ell as i32));
    let mut below_violations = 0u64;
    let mut above_violations = 0u64;
    for i in 0..n_samples {
        let mut s = RandomStream::new(seed, i);
        let h: ChannelVector<f64> = sample_channel(&mut s, t)?;
        let packed = PackedChannel::new(&h);
        let o = encode_vlq_packed(&packed, stream, alpha);
        if packed.norm_sqr < alpha && !(o.index == 0 && o.outage && !o.truncated) {
            below_violations += 1;
        }
        if packed.norm_sqr > margin && o.truncated {
            above_violations += 1;
        }
    }
    Ok((below_violations, above_violations))
}
