//! Channel sampling and beamforming gains.
//!
//! Channel vectors have i.i.d. unit-variance complex Gaussian entries.
//! Sampling is counter-based: a [`RandomStream`] is identified by
//! `(master_seed, shard_index)` and every draw position is addressable, so
//! independent shards replay exactly and a simulation result is a pure
//! function of its seed. The stream-derivation rule is fixed: logical
//! shard `k` uses the ChaCha stream `(master_seed, k)`; the Monte Carlo
//! engine assigns one logical shard per sample index.
//!
//! A beamforming direction is an integer vector `p ∈ Z^{2t}` read as `t`
//! complex numbers (coordinate `2i` is the real part of entry `i`,
//! coordinate `2i+1` the imaginary part). Its gain against a channel `h`
//! is `|⟨p, h⟩|² / ‖p‖²`, the squared inner product with the unit vector
//! `p/‖p‖`. The inner-product convention is `⟨x, h⟩ = Σ conj(xᵢ) hᵢ`; the
//! squared modulus does not depend on that choice.

use num_complex::Complex;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codebook::DirectionKey;
use crate::error::{Error, Result};
use crate::scalar::{cast, cast_i64, Real};

/// A channel realization: `t` complex gains.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelVector<F: Real> {
    entries: Vec<Complex<F>>,
}

impl<F: Real> ChannelVector<F> {
    pub fn new(entries: Vec<Complex<F>>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Domain("channel vector must have at least one entry".into()));
        }
        Ok(Self { entries })
    }

    pub fn t(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Complex<F>] {
        &self.entries
    }

    /// Squared Euclidean norm `‖h‖²`.
    pub fn norm_sqr(&self) -> F {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Unit-norm copy `h/‖h‖`. Fails on the zero vector.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n <= F::zero() {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            entries: self.entries.iter().map(|z| z / n).collect(),
        })
    }
}

/// Deterministic, seekable random stream.
///
/// Identified by `(master_seed, shard_index)`; `counter` is the number of
/// uniform draws consumed so far. Identical `(master_seed, shard_index,
/// counter)` triples always continue with identical output, and distinct
/// shard indices select statistically independent ChaCha streams.
#[derive(Clone, Debug)]
pub struct RandomStream {
    master_seed: u64,
    shard_index: u64,
    counter: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(master_seed: u64, shard_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(shard_index);
        Self { master_seed, shard_index, counter: 0, rng }
    }

    /// `(master_seed, shard_index, counter)` state triple.
    pub fn state(&self) -> (u64, u64, u64) {
        (self.master_seed, self.shard_index, self.counter)
    }

    /// Jump to an absolute draw position in O(1).
    pub fn seek(&mut self, counter: u64) {
        // one uniform draw = one u64 = two ChaCha words
        self.rng.set_word_pos(counter as u128 * 2);
        self.counter = counter;
    }

    /// Next uniform in `[0, 1)`.
    pub fn next_uniform(&mut self) -> f64 {
        self.counter += 1;
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Next uniform in `(0, 1]`, safe to feed into a logarithm.
    fn next_uniform_open(&mut self) -> f64 {
        self.counter += 1;
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Next complex Gaussian with unit total variance (real and imaginary
    /// parts are independent N(0, 1/2)). Consumes exactly two uniforms.
    ///
    /// Box–Muller in `f64` regardless of `F`, so the draw sequence is
    /// identical across scalar types.
    pub fn next_complex_gaussian<F: Real>(&mut self) -> Complex<F> {
        let u1 = self.next_uniform_open();
        let u2 = self.next_uniform();
        let r = (-u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        Complex::new(cast(r * theta.cos()), cast(r * theta.sin()))
    }
}

/// Draw a `t`-entry channel vector, advancing the stream by `2t` draws.
pub fn sample_channel<F: Real>(stream: &mut RandomStream, t: usize) -> Result<ChannelVector<F>> {
    if t < 1 {
        return Err(Error::Domain("t must be at least 1".into()));
    }
    let entries = (0..t).map(|_| stream.next_complex_gaussian()).collect();
    ChannelVector::new(entries)
}

/// Beamforming gain `|⟨p, h⟩|² / ‖p‖²` of a direction key against `h`.
pub fn gain<F: Real>(direction: &DirectionKey, h: &ChannelVector<F>) -> Result<F> {
    gain_coords(direction.coords(), h)
}

/// Gain of a raw integer vector, reduced to its primitive representative
/// first so that positive collinear multiples evaluate bit-identically.
pub fn gain_raw<F: Real>(coords: &[i64], h: &ChannelVector<F>) -> Result<F> {
    let key = DirectionKey::from_integer_point(coords)?;
    gain_coords(key.coords(), h)
}

fn gain_coords<F: Real>(coords: &[i64], h: &ChannelVector<F>) -> Result<F> {
    if coords.len() != 2 * h.t() {
        return Err(Error::DimensionMismatch { expected: 2 * h.t(), got: coords.len() });
    }
    let mut re = F::zero();
    let mut im = F::zero();
    let mut norm_sqr = 0i64;
    for (i, z) in h.entries().iter().enumerate() {
        let pr = coords[2 * i];
        let pi = coords[2 * i + 1];
        let (fr, fi) = (cast_i64::<F>(pr), cast_i64::<F>(pi));
        re += fr * z.re + fi * z.im;
        im += fr * z.im - fi * z.re;
        norm_sqr += pr * pr + pi * pi;
    }
    if norm_sqr == 0 {
        return Err(Error::ZeroVector);
    }
    Ok((re * re + im * im) / cast_i64::<F>(norm_sqr))
}
