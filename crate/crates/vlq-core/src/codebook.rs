//! Layered beamforming codebook over dyadic grids.
//!
//! Layer `ℓ` uses the scalar grid `S_ℓ = {j / 2^{ℓ+1} : |j| ≤ 2^{ℓ+1} − 1}`
//! (step `ε = 2^{−(ℓ+1)}`, endpoints ±1 excluded). The layer-`ℓ` direction
//! set consists of every unit vector `y/‖y‖` where `y ∈ C^t` has all real
//! and imaginary parts in `S_ℓ` and `0 < ‖y‖ ≤ 1`. Layers are nested and
//! become dense on the unit sphere as `ℓ` grows.
//!
//! Directions are represented exactly: a grid point is an integer vector
//! `p ∈ Z^{2t}` scaled by `2^{ℓ+1}`, and distinct grid points that
//! normalize to the same unit vector are positive integer multiples of a
//! common primitive vector. The canonical representative of a direction is
//! therefore the primitive integer vector, and a direction belongs to layer
//! [`layer_of`]`(p)` — the smallest `ℓ` whose box and norm constraints
//! admit `p`. This keeps deduplication in exact integer arithmetic with no
//! floating-point set logic and no seen-set.
//!
//! Enumeration of one layer walks the integer box in ascending
//! lexicographic order with branch-and-bound pruning on the partial sum of
//! squares, emitting exactly the primitive vectors whose first feasible
//! layer is `ℓ`. Any fixed order of a layer is valid; lexicographic makes
//! the stream a pure function of `(t, ell_max)`.

use std::io::{BufRead, Write};
use std::sync::OnceLock;

use num_complex::Complex;
use num_integer::Integer;
use rayon::prelude::*;

use crate::channel::ChannelVector;
use crate::error::{Error, Result};
use crate::scalar::{cast, cast_i64, Real};

/// Largest supported layer index. Keeps every coordinate within `i16` and
/// every squared norm within `u32` in materialized storage.
pub const MAX_LAYER: usize = 13;

/// Materialized-codebook budget in bytes; deeper layers must be streamed.
const MATERIALIZE_BYTE_LIMIT: u64 = 400 << 20;

// ---------------------------------------------------------------------------
// Direction keys
// ---------------------------------------------------------------------------

/// Canonical representative of one beamforming direction: a primitive
/// integer vector in `Z^{2t}` (nonzero, gcd of coordinates equal to one).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DirectionKey {
    coords: Vec<i64>,
}

impl DirectionKey {
    /// Validate an already-primitive coordinate vector.
    pub fn new(coords: Vec<i64>) -> Result<Self> {
        if coords.iter().all(|&c| c == 0) {
            return Err(Error::ZeroVector);
        }
        if !coords.len().is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "direction needs an even coordinate count, got {}",
                coords.len()
            )));
        }
        if coords_gcd(&coords) != 1 {
            return Err(Error::NotPrimitive(coords));
        }
        Ok(Self { coords })
    }

    /// Reduce an arbitrary nonzero integer point to its primitive key.
    pub fn from_integer_point(point: &[i64]) -> Result<Self> {
        if point.iter().all(|&c| c == 0) {
            return Err(Error::ZeroVector);
        }
        if !point.len().is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "direction needs an even coordinate count, got {}",
                point.len()
            )));
        }
        let g = coords_gcd(point);
        Ok(Self {
            coords: point.iter().map(|&c| c / g).collect(),
        })
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    /// Real dimension `2t`.
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Complex dimension `t`.
    pub fn t(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn norm_sqr(&self) -> i64 {
        self.coords.iter().map(|&c| c * c).sum()
    }

    /// The unit-norm complex vector this key represents.
    pub fn unit_vector<F: Real>(&self) -> Vec<Complex<F>> {
        unit_vector_of(&self.coords).expect("key is nonzero")
    }

    /// First layer whose grid contains this direction.
    pub fn layer(&self) -> usize {
        layer_of(self)
    }
}

fn coords_gcd(coords: &[i64]) -> i64 {
    coords.iter().fold(0u64, |acc, &c| acc.gcd(&c.unsigned_abs())) as i64
}

/// Unit-norm complex vector `p/‖p‖` for a raw integer point.
pub fn unit_vector_of<F: Real>(coords: &[i64]) -> Result<Vec<Complex<F>>> {
    if !coords.len().is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "direction needs an even coordinate count, got {}",
            coords.len()
        )));
    }
    let norm_sqr: i64 = coords.iter().map(|&c| c * c).sum();
    if norm_sqr == 0 {
        return Err(Error::ZeroVector);
    }
    let inv = cast_i64::<F>(norm_sqr).sqrt().recip();
    Ok(coords
        .chunks_exact(2)
        .map(|pair| Complex::new(cast_i64::<F>(pair[0]) * inv, cast_i64::<F>(pair[1]) * inv))
        .collect())
}

// ---------------------------------------------------------------------------
// Scalar grid and quantizer
// ---------------------------------------------------------------------------

/// Box bound `2^{ℓ+1} − 1` and squared-norm cap `4^{ℓ+1}` of layer `ell`.
fn layer_bounds(ell: usize) -> (i64, i64) {
    assert!(ell <= MAX_LAYER, "layer {ell} exceeds MAX_LAYER {MAX_LAYER}");
    ((1i64 << (ell + 1)) - 1, 1i64 << (2 * ell + 2))
}

fn ceil_log2(n: i64) -> u32 {
    debug_assert!(n >= 1);
    64 - ((n - 1).leading_zeros().min(64))
}

/// The grid `S_ℓ` in ascending order: `{j / 2^{ℓ+1} : |j| ≤ 2^{ℓ+1} − 1}`.
pub fn grid_values<F: Real>(ell: usize) -> Vec<F> {
    let (max_abs, _) = layer_bounds(ell);
    let eps = cast::<F>((0.5f64).powi(ell as i32 + 1));
    (-max_abs..=max_abs).map(|j| cast_i64::<F>(j) * eps).collect()
}

/// Integer grid index of the layer-`ell` scalar quantizer: for `x` in
/// `[−1, 1]` returns `j` such that the quantized value is `j / 2^{ℓ+1}`.
///
/// A three-piece staircase with step `ε = 2^{−(ℓ+1)}`: the middle band
/// `[−ε, ε]` collapses to zero, negative inputs round up toward zero
/// (closed intervals, so negative grid points are fixed), positive inputs
/// round strictly down (half-open intervals). Overlapping interval
/// boundaries resolve to the first case in that order. Consequences used
/// elsewhere: `|q(x)| ≤ |x|` and `|q(x) − x| ≤ ε`.
pub fn quantize_grid_index<F: Real>(x: F, ell: usize) -> Result<i64> {
    if x.is_nan() || x.abs() > F::one() {
        return Err(Error::Domain(format!("quantizer input must lie in [-1, 1], got {x}")));
    }
    let (max_abs, _) = layer_bounds(ell);
    // scale by 2^{ℓ+1}: exact in binary floating point
    let s = x * cast_i64::<F>(max_abs + 1);
    let j = if s <= -F::one() {
        let c = s.ceil().to_i64().expect("bounded by construction");
        c.max(-max_abs)
    } else if s <= F::one() {
        0
    } else {
        s.ceil().to_i64().expect("bounded by construction") - 1
    };
    Ok(j)
}

/// Layer-`ell` scalar quantizer value; lies in `grid_values(ell)`.
pub fn scalar_quantize<F: Real>(x: F, ell: usize) -> Result<F> {
    let j = quantize_grid_index(x, ell)?;
    Ok(cast_i64::<F>(j) * cast::<F>((0.5f64).powi(ell as i32 + 1)))
}

/// First layer whose grid contains the primitive vector `p`: the smallest
/// `ℓ` with `max|pᵢ| ≤ 2^{ℓ+1} − 1` and `‖p‖² ≤ 4^{ℓ+1}`.
pub fn layer_of(key: &DirectionKey) -> usize {
    let max_abs = key.coords.iter().map(|c| c.abs()).max().expect("nonzero");
    let norm_sqr = key.norm_sqr();
    // box: 2^{ℓ+1} ≥ max_abs + 1;  norm: 2ℓ+2 ≥ ceil_log2(‖p‖²)
    let box_layer = (ceil_log2(max_abs + 1).max(1) - 1) as usize;
    let norm_layer = (ceil_log2(norm_sqr).div_ceil(2).max(1) - 1) as usize;
    box_layer.max(norm_layer)
}

/// Smallest layer at which the componentwise covering construction is
/// guaranteed a nonzero quantized vector: `2t / 2^{2(ℓ+1)} < 1`.
pub fn min_witness_layer(t: usize) -> usize {
    let mut ell = 0usize;
    while (1i64 << (2 * ell + 2)) <= 2 * t as i64 {
        ell += 1;
    }
    ell
}

// ---------------------------------------------------------------------------
// Layer enumeration
// ---------------------------------------------------------------------------

fn isqrt(n: i64) -> i64 {
    debug_assert!(n >= 0);
    let mut r = (n as f64).sqrt() as i64;
    while r > 0 && r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Lexicographic enumeration of the primitive integer vectors whose first
/// feasible layer is exactly `ell`, with pruning on partial norms.
pub struct LayerIter {
    dim: usize,
    max_abs: i64,
    cap: i64,
    prev: Option<(i64, i64)>,
    first_lo: i64,
    first_hi: i64,
    coords: Vec<i64>,
    hi: Vec<i64>,
    sumsq: Vec<i64>,
    gcds: Vec<i64>,
    maxab: Vec<i64>,
    started: bool,
    exhausted: bool,
}

impl LayerIter {
    fn new(ell: usize, t: usize, first_lo: i64, first_hi: i64) -> Self {
        let dim = 2 * t;
        let (max_abs, cap) = layer_bounds(ell);
        let prev = if ell == 0 {
            None
        } else {
            Some(layer_bounds(ell - 1))
        };
        Self {
            dim,
            max_abs,
            cap,
            prev,
            first_lo,
            first_hi,
            coords: vec![0; dim],
            hi: vec![0; dim],
            sumsq: vec![0; dim + 1],
            gcds: vec![0; dim + 1],
            maxab: vec![0; dim + 1],
            started: false,
            exhausted: false,
        }
    }

    #[inline]
    fn set_prefix(&mut self, lvl: usize) {
        let c = self.coords[lvl];
        self.sumsq[lvl + 1] = self.sumsq[lvl] + c * c;
        self.gcds[lvl + 1] = self.gcds[lvl].gcd(&c.abs());
        self.maxab[lvl + 1] = self.maxab[lvl].max(c.abs());
    }

    fn descend(&mut self, from: usize) -> bool {
        for i in from..self.dim {
            let rem = self.cap - self.sumsq[i];
            let bound = self.max_abs.min(isqrt(rem));
            let (mut lo, mut hi) = (-bound, bound);
            if i == 0 {
                lo = lo.max(self.first_lo);
                hi = hi.min(self.first_hi);
                if lo > hi {
                    return false;
                }
            }
            self.coords[i] = lo;
            self.hi[i] = hi;
            self.set_prefix(i);
        }
        true
    }

    #[inline]
    fn leaf_ok(&self) -> bool {
        let d = self.dim;
        if self.sumsq[d] == 0 || self.gcds[d] != 1 {
            return false;
        }
        match self.prev {
            None => true,
            Some((pm, pc)) => self.maxab[d] > pm || self.sumsq[d] > pc,
        }
    }

    /// Advance to the next member and expose it without allocating.
    pub(crate) fn next_ref(&mut self) -> Option<(&[i64], i64)> {
        if self.exhausted {
            return None;
        }
        loop {
            if !self.started {
                self.started = true;
                if !self.descend(0) {
                    self.exhausted = true;
                    return None;
                }
            } else {
                let mut lvl = self.dim - 1;
                loop {
                    self.coords[lvl] += 1;
                    if self.coords[lvl] <= self.hi[lvl] {
                        self.set_prefix(lvl);
                        break;
                    }
                    if lvl == 0 {
                        self.exhausted = true;
                        return None;
                    }
                    lvl -= 1;
                }
                if lvl + 1 < self.dim {
                    // zero is always admissible, so this cannot fail
                    self.descend(lvl + 1);
                }
            }
            if self.leaf_ok() {
                return Some((&self.coords, self.sumsq[self.dim]));
            }
        }
    }
}

impl Iterator for LayerIter {
    type Item = DirectionKey;

    fn next(&mut self) -> Option<DirectionKey> {
        self.next_ref().map(|(coords, _)| DirectionKey {
            coords: coords.to_vec(),
        })
    }
}

/// All directions of layer `ell` in ascending lexicographic order.
pub fn enumerate_layer(ell: usize, t: usize) -> LayerIter {
    let (max_abs, _) = layer_bounds(ell);
    LayerIter::new(ell, t, -max_abs, max_abs)
}

/// The lexicographic slice of layer `ell` whose first coordinate equals
/// `c0`. Slices over all `c0` partition the layer, which lets callers scan
/// a huge layer in parallel without materializing it.
pub fn enumerate_layer_slice(ell: usize, t: usize, c0: i64) -> LayerIter {
    LayerIter::new(ell, t, c0, c0)
}

/// Deduplicated cardinality of layer `ell`, counted by parallel streaming.
pub fn count_layer_parallel(ell: usize, t: usize) -> u64 {
    let (max_abs, _) = layer_bounds(ell);
    (-max_abs..=max_abs)
        .into_par_iter()
        .map(|c0| {
            let mut it = enumerate_layer_slice(ell, t, c0);
            let mut n = 0u64;
            while it.next_ref().is_some() {
                n += 1;
            }
            n
        })
        .sum()
}

// ---------------------------------------------------------------------------
// Materialized layers and the codebook stream
// ---------------------------------------------------------------------------

/// One fully materialized layer in flat storage: coordinates as `i16`
/// (stride `2t`) plus the squared norm of each direction.
pub struct FlatLayer {
    dim: usize,
    coords: Vec<i16>,
    norm_sqr: Vec<u32>,
}

impl FlatLayer {
    fn build(ell: usize, t: usize) -> Self {
        let dim = 2 * t;
        let mut coords = Vec::new();
        let mut norm_sqr = Vec::new();
        let mut it = enumerate_layer(ell, t);
        while let Some((c, sq)) = it.next_ref() {
            coords.extend(c.iter().map(|&v| v as i16));
            norm_sqr.push(sq as u32);
        }
        Self { dim, coords, norm_sqr }
    }

    pub fn len(&self) -> usize {
        self.norm_sqr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norm_sqr.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn coords_at(&self, i: usize) -> &[i16] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn norm_sqr_at(&self, i: usize) -> u32 {
        self.norm_sqr[i]
    }

    pub fn key_at(&self, i: usize) -> DirectionKey {
        DirectionKey {
            coords: self.coords_at(i).iter().map(|&c| c as i64).collect(),
        }
    }

    pub(crate) fn raw(&self) -> (&[i16], &[u32]) {
        (&self.coords, &self.norm_sqr)
    }
}

/// The ordered, deduplicated direction sequence through layer `ell_max`.
///
/// Layer `ℓ` occupies the index range `[cumulative(ℓ−1), cumulative(ℓ))`,
/// so the first `cumulative(ℓ)` directions are exactly the layer-`ℓ`
/// direction set. Layers materialize on first use and are never built
/// past what a consumer demands.
pub struct CodebookStream {
    t: usize,
    ell_max: usize,
    layers: Vec<OnceLock<FlatLayer>>,
}

impl CodebookStream {
    pub fn new(t: usize, ell_max: usize) -> Result<Self> {
        if t < 1 {
            return Err(Error::Domain("t must be at least 1".into()));
        }
        if ell_max > MAX_LAYER {
            return Err(Error::Domain(format!(
                "ell_max {ell_max} exceeds the supported maximum {MAX_LAYER}"
            )));
        }
        let bytes = estimate_materialized_bytes(t, ell_max);
        if bytes > MATERIALIZE_BYTE_LIMIT {
            return Err(Error::Domain(format!(
                "materializing t={t}, ell_max={ell_max} needs ≈{} MiB (limit {} MiB); \
                 use streaming enumeration instead",
                bytes >> 20,
                MATERIALIZE_BYTE_LIMIT >> 20
            )));
        }
        Ok(Self {
            t,
            ell_max,
            layers: (0..=ell_max).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn dim(&self) -> usize {
        2 * self.t
    }

    pub fn ell_max(&self) -> usize {
        self.ell_max
    }

    /// Materialize (once) and return layer `ell ≤ ell_max`.
    pub fn layer(&self, ell: usize) -> &FlatLayer {
        assert!(ell <= self.ell_max, "layer {ell} beyond ell_max {}", self.ell_max);
        self.layers[ell].get_or_init(|| FlatLayer::build(ell, self.t))
    }

    /// Cumulative direction counts `|Y_0|, |Y_1|, …, |Y_{ell_max}|`.
    pub fn layer_sizes(&self) -> Vec<u64> {
        let mut sizes = Vec::with_capacity(self.ell_max + 1);
        let mut acc = 0u64;
        for ell in 0..=self.ell_max {
            acc += self.layer(ell).len() as u64;
            sizes.push(acc);
        }
        sizes
    }

    /// Directions in stream order; materializes layers as they are reached.
    pub fn iter(&self) -> impl Iterator<Item = DirectionKey> + '_ {
        (0..=self.ell_max).flat_map(move |ell| {
            let layer = self.layer(ell);
            (0..layer.len()).map(move |i| layer.key_at(i))
        })
    }

    /// The first `n` directions, as owned keys (finite-codebook encoders).
    pub fn first_directions(&self, n: usize) -> Result<Vec<DirectionKey>> {
        let keys: Vec<DirectionKey> = self.iter().take(n).collect();
        if keys.len() < n {
            return Err(Error::Domain(format!(
                "requested {n} directions but only {} exist through layer {}",
                keys.len(),
                self.ell_max
            )));
        }
        Ok(keys)
    }
}

fn estimate_materialized_bytes(t: usize, ell_max: usize) -> u64 {
    // ball-volume estimate of the cumulative direction count, padded
    let r = (1u64 << (ell_max + 1)) as f64;
    let mut vol = 1.0f64;
    for k in 1..=t {
        vol *= std::f64::consts::PI * r * r / k as f64;
    }
    let per_dir = (4 * t + 4) as f64;
    (1.2 * vol * per_dir) as u64
}

// ---------------------------------------------------------------------------
// Covering witness
// ---------------------------------------------------------------------------

/// Componentwise-quantized covering direction for a unit channel vector.
///
/// Quantizing every real and imaginary part of `h̄` at layer `ell` yields a
/// grid point `z` with `0 < ‖z‖ ≤ 1` (nonzero because `ell ≥
/// min_witness_layer(t)`), whose direction satisfies
/// `|⟨z/‖z‖, h̄⟩|² > 1 − 2t/2^ℓ` and lies in a layer `≤ ell`.
pub fn covering_witness<F: Real>(h_bar: &ChannelVector<F>, ell: usize) -> Result<DirectionKey> {
    let t = h_bar.t();
    let norm = h_bar.norm_sqr().sqrt();
    let tol = cast::<F>(1e-9).max(F::epsilon() * cast::<F>(16.0));
    if (norm - F::one()).abs() > tol {
        return Err(Error::Domain(format!(
            "covering witness needs a unit vector, got norm {norm}"
        )));
    }
    let min_ell = min_witness_layer(t);
    if ell < min_ell {
        return Err(Error::Domain(format!(
            "layer {ell} below the covering threshold {min_ell} for t={t}"
        )));
    }
    let clamp = |x: F| x.min(F::one()).max(-F::one());
    let mut z = Vec::with_capacity(2 * t);
    for entry in h_bar.entries() {
        z.push(quantize_grid_index(clamp(entry.re), ell)?);
        z.push(quantize_grid_index(clamp(entry.im), ell)?);
    }
    let (_, cap) = layer_bounds(ell);
    let norm_sqr: i64 = z.iter().map(|&c| c * c).sum();
    if norm_sqr == 0 || norm_sqr > cap {
        return Err(Error::Invariant(format!(
            "quantized witness norm² {norm_sqr} outside (0, {cap}]"
        )));
    }
    DirectionKey::from_integer_point(&z)
}

// ---------------------------------------------------------------------------
// CSV export / import
// ---------------------------------------------------------------------------

/// Write the stream as CSV with header `index,layer,c0,…,c{2t−1}`.
pub fn write_codebook_csv<W: Write>(stream: &CodebookStream, mut out: W) -> Result<()> {
    let dim = stream.dim();
    let mut header = String::from("index,layer");
    for j in 0..dim {
        header.push_str(&format!(",c{j}"));
    }
    writeln!(out, "{header}")?;
    let mut index = 0u64;
    for ell in 0..=stream.ell_max() {
        let layer = stream.layer(ell);
        for i in 0..layer.len() {
            let mut row = format!("{index},{ell}");
            for &c in layer.coords_at(i) {
                row.push_str(&format!(",{c}"));
            }
            writeln!(out, "{row}")?;
            index += 1;
        }
    }
    Ok(())
}

/// Read a codebook CSV, validating primitivity, layer assignment, index
/// contiguity, and the lexicographic within-layer order.
pub fn read_codebook_csv<R: BufRead>(input: R) -> Result<Vec<DirectionKey>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty codebook file".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < 4 || cols[0] != "index" || cols[1] != "layer" {
        return Err(Error::Parse(format!("unexpected header: {header}")));
    }
    let dim = cols.len() - 2;
    let mut keys: Vec<DirectionKey> = Vec::new();
    let mut prev_layer = 0usize;
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != dim + 2 {
            return Err(Error::Parse(format!(
                "row {}: expected {} fields, got {}",
                lineno + 2,
                dim + 2,
                fields.len()
            )));
        }
        let index: u64 = fields[0]
            .parse()
            .map_err(|e| Error::Parse(format!("row {}: bad index: {e}", lineno + 2)))?;
        if index != keys.len() as u64 {
            return Err(Error::Parse(format!(
                "row {}: index {index} not consecutive",
                lineno + 2
            )));
        }
        let layer: usize = fields[1]
            .parse()
            .map_err(|e| Error::Parse(format!("row {}: bad layer: {e}", lineno + 2)))?;
        let coords: Vec<i64> = fields[2..]
            .iter()
            .map(|f| f.parse::<i64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("row {}: bad coordinate: {e}", lineno + 2)))?;
        let key = DirectionKey::new(coords)
            .map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 2)))?;
        if key.layer() != layer {
            return Err(Error::Parse(format!(
                "row {}: layer column {layer} but direction belongs to layer {}",
                lineno + 2,
                key.layer()
            )));
        }
        if layer < prev_layer {
            return Err(Error::Parse(format!(
                "row {}: layer {layer} decreases below {prev_layer}",
                lineno + 2
            )));
        }
        if layer == prev_layer {
            if let Some(last) = keys.last() {
                if last.layer() == layer && last.coords() >= key.coords() {
                    return Err(Error::Parse(format!(
                        "row {}: not in ascending lexicographic order",
                        lineno + 2
                    )));
                }
            }
        }
        prev_layer = layer;
        keys.push(key);
    }
    Ok(keys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gain, sample_channel, RandomStream};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn grid_values_first_layers() {
        assert_eq!(grid_values::<f64>(0), vec![-0.5, 0.0, 0.5]);
        assert_eq!(
            grid_values::<f64>(1),
            vec![-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75]
        );
        for ell in 0..=6 {
            assert_eq!(grid_values::<f64>(ell).len(), (1usize << (ell + 2)) - 1);
        }
    }

    #[test]
    fn scalar_quantize_examples() {
        assert_eq!(scalar_quantize(0.3, 0).unwrap(), 0.0);
        assert_eq!(scalar_quantize(0.6, 0).unwrap(), 0.5);
        assert_eq!(scalar_quantize(-0.6, 0).unwrap(), -0.5);
        // boundary behavior: negative grid points are fixed, positive ones step down
        assert_eq!(scalar_quantize(-0.5, 0).unwrap(), -0.5);
        assert_eq!(scalar_quantize(0.5, 0).unwrap(), 0.0);
        assert_eq!(scalar_quantize(-0.75, 1).unwrap(), -0.75);
        assert_eq!(scalar_quantize(0.75, 1).unwrap(), 0.5);
        assert_eq!(scalar_quantize(1.0, 0).unwrap(), 0.5);
        assert_eq!(scalar_quantize(-1.0, 0).unwrap(), -0.5);
        assert!(scalar_quantize(1.5, 0).is_err());
        assert!(scalar_quantize(f64::NAN, 0).is_err());
    }

    proptest! {
        #[test]
        fn scalar_quantize_staircase_properties(x in -1.0f64..=1.0, ell in 0usize..=6) {
            let eps = 0.5f64.powi(ell as i32 + 1);
            let q = scalar_quantize(x, ell).unwrap();
            prop_assert!(q.abs() <= x.abs() + 1e-15);
            prop_assert!((q - x).abs() <= eps + 1e-15);
            prop_assert!(x.abs() <= q.abs() + eps + 1e-15);
            // value sits on the grid
            let j = quantize_grid_index(x, ell).unwrap();
            prop_assert!(j.abs() < (1i64 << (ell + 1)));
            prop_assert_eq!(q, j as f64 * eps);
        }

        #[test]
        fn direction_key_reduction(m in 1i64..=9, a in -5i64..=5, b in -5i64..=5) {
            prop_assume!(a != 0 || b != 0);
            let key = DirectionKey::from_integer_point(&[a * m, b * m]).unwrap();
            let base = DirectionKey::from_integer_point(&[a, b]).unwrap();
            prop_assert_eq!(key, base);
        }
    }

    #[test]
    fn layer_of_examples() {
        let k = DirectionKey::new(vec![1, 0, 0, 0]).unwrap();
        assert_eq!(k.layer(), 0);
        let k = DirectionKey::new(vec![2, 1, 0, 0]).unwrap();
        assert_eq!(k.layer(), 1);
        let k = DirectionKey::new(vec![1, 1, 1, 1]).unwrap();
        assert_eq!(k.layer(), 0);
        assert!(DirectionKey::new(vec![0, 0]).is_err());
        assert!(DirectionKey::new(vec![2, 0]).is_err());
    }

    #[test]
    fn enumerate_layer_zero_t1() {
        let got: Vec<Vec<i64>> = enumerate_layer(0, 1).map(|k| k.coords().to_vec()).collect();
        let expected: Vec<Vec<i64>> = vec![
            vec![-1, -1],
            vec![-1, 0],
            vec![-1, 1],
            vec![0, -1],
            vec![0, 1],
            vec![1, -1],
            vec![1, 0],
            vec![1, 1],
        ];
        assert_eq!(got, expected);
    }

    #[test]
    fn enumerate_layer_zero_t2_count() {
        assert_eq!(enumerate_layer(0, 2).count(), 80);
    }

    #[test]
    fn enumerate_layer_one_t1_membership() {
        let got: Vec<DirectionKey> = enumerate_layer(1, 1).collect();
        assert!(got.iter().all(|k| k.layer() == 1));
        assert!(got.iter().any(|k| k.coords() == [-2, -1]));
        assert!(!got.iter().any(|k| k.coords() == [-1, 0]));
    }

    #[test]
    fn enumeration_is_sorted_primitive_unique() {
        for (ell, t) in [(0usize, 1usize), (1, 1), (2, 1), (0, 2), (1, 2)] {
            let keys: Vec<DirectionKey> = enumerate_layer(ell, t).collect();
            let mut sorted = keys.clone();
            sorted.sort_by(|a, b| a.coords().cmp(b.coords()));
            assert_eq!(keys, sorted, "ell={ell} t={t} not lexicographic");
            let set: HashSet<Vec<i64>> = keys.iter().map(|k| k.coords().to_vec()).collect();
            assert_eq!(set.len(), keys.len(), "duplicates at ell={ell} t={t}");
            for k in &keys {
                assert_eq!(k.layer(), ell);
            }
        }
    }

    #[test]
    fn slices_partition_layer() {
        let whole: Vec<DirectionKey> = enumerate_layer(1, 1).collect();
        let mut stitched = Vec::new();
        for c0 in -3i64..=3 {
            stitched.extend(enumerate_layer_slice(1, 1, c0));
        }
        assert_eq!(whole, stitched);
        assert_eq!(count_layer_parallel(1, 1), whole.len() as u64);
    }

    #[test]
    fn stream_prefix_property() {
        let small = CodebookStream::new(1, 1).unwrap();
        let big = CodebookStream::new(1, 2).unwrap();
        let a: Vec<DirectionKey> = small.iter().collect();
        let b: Vec<DirectionKey> = big.iter().take(a.len()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn stream_determinism() {
        let a: Vec<DirectionKey> = CodebookStream::new(1, 2).unwrap().iter().collect();
        let b: Vec<DirectionKey> = CodebookStream::new(1, 2).unwrap().iter().collect();
        assert_eq!(a, b);
    }

    #[test]
    fn layer_sizes_cumulative_and_bounded() {
        for t in [1usize, 2] {
            let ell_max = if t == 1 { 4 } else { 3 };
            let stream = CodebookStream::new(t, ell_max).unwrap();
            let sizes = stream.layer_sizes();
            assert_eq!(sizes[0], stream.layer(0).len() as u64);
            if t == 2 {
                assert_eq!(sizes[0], 80);
            }
            for (ell, &size) in sizes.iter().enumerate() {
                let cap = 1u128 << (2 * t * (ell + 2));
                assert!((size as u128) <= cap, "t={t} ell={ell}: {size} > {cap}");
            }
            for w in sizes.windows(2) {
                assert!(w[0] < w[1]);
            }
        }
    }

    /// Brute-force oracle for small instances: normalize every feasible grid
    /// point and deduplicate by distance.
    fn brute_force_directions(t: usize, ell: usize) -> Vec<Vec<f64>> {
        assert_eq!(t, 1);
        let (max_abs, cap) = layer_bounds(ell);
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for j1 in -max_abs..=max_abs {
            for j2 in -max_abs..=max_abs {
                let sq = j1 * j1 + j2 * j2;
                if sq == 0 || sq > cap {
                    continue;
                }
                let norm = ((sq as f64).sqrt()).recip();
                let cand = vec![j1 as f64 * norm, j2 as f64 * norm];
                if !dirs
                    .iter()
                    .any(|d| (d[0] - cand[0]).abs() < 1e-12 && (d[1] - cand[1]).abs() < 1e-12)
                {
                    dirs.push(cand);
                }
            }
        }
        dirs
    }

    #[test]
    fn small_instance_matches_brute_force() {
        for ell in 0..=2usize {
            let stream = CodebookStream::new(1, ell).unwrap();
            let mut streamed: Vec<Vec<f64>> = stream
                .iter()
                .map(|k| {
                    let u = k.unit_vector::<f64>();
                    vec![u[0].re, u[0].im]
                })
                .collect();
            let mut oracle = brute_force_directions(1, ell);
            let sort_key = |v: &Vec<f64>| (v[0] * 1e9, v[1] * 1e9);
            streamed.sort_by(|a, b| sort_key(a).partial_cmp(&sort_key(b)).unwrap());
            oracle.sort_by(|a, b| sort_key(a).partial_cmp(&sort_key(b)).unwrap());
            assert_eq!(streamed.len(), oracle.len(), "ell={ell}");
            for (s, o) in streamed.iter().zip(&oracle) {
                assert!((s[0] - o[0]).abs() < 1e-12 && (s[1] - o[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn t2_layers_match_brute_force_dedup() {
        // normalize every feasible 4-dimensional grid point of the layer-1
        // grid and deduplicate by distance; the stream through layer 1 must
        // produce exactly that direction set
        let stream = CodebookStream::new(2, 1).unwrap();
        let streamed: Vec<Vec<f64>> = stream
            .iter()
            .map(|k| {
                let n = (k.norm_sqr() as f64).sqrt();
                k.coords().iter().map(|&c| c as f64 / n).collect()
            })
            .collect();
        let (max_abs, cap) = layer_bounds(1);
        let mut brute: Vec<Vec<f64>> = Vec::new();
        for a in -max_abs..=max_abs {
            for b in -max_abs..=max_abs {
                for c in -max_abs..=max_abs {
                    for d in -max_abs..=max_abs {
                        let sq = a * a + b * b + c * c + d * d;
                        if sq == 0 || sq > cap {
                            continue;
                        }
                        let inv = ((sq as f64).sqrt()).recip();
                        let cand: Vec<f64> =
                            [a, b, c, d].iter().map(|&v| v as f64 * inv).collect();
                        if !brute.iter().any(|u| {
                            u.iter().zip(&cand).all(|(x, y)| (x - y).abs() < 1e-12)
                        }) {
                            brute.push(cand);
                        }
                    }
                }
            }
        }
        assert_eq!(streamed.len(), brute.len());
        for s in &streamed {
            assert!(
                brute
                    .iter()
                    .any(|u| u.iter().zip(s).all(|(x, y)| (x - y).abs() < 1e-12)),
                "missing direction {s:?}"
            );
        }
    }

    #[test]
    fn unit_vector_examples() {
        let u = unit_vector_of::<f64>(&[1, 1]).unwrap();
        let inv = 0.5f64.sqrt();
        assert_relative_eq!(u[0].re, inv, epsilon = 1e-15);
        assert_relative_eq!(u[0].im, inv, epsilon = 1e-15);
        // collinear raw points give the same unit vector
        let a = unit_vector_of::<f64>(&[2, 0, 0, 0]).unwrap();
        let b = unit_vector_of::<f64>(&[1, 0, 0, 0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0], Complex::new(1.0, 0.0));
        assert!(unit_vector_of::<f64>(&[0, 0]).is_err());
    }

    #[test]
    fn unit_vectors_have_unit_norm() {
        let mut count = 0;
        for ell in 0..=3usize {
            for key in enumerate_layer(ell, 2).step_by(7) {
                let n: f64 = key.unit_vector::<f64>().iter().map(|z| z.norm_sqr()).sum();
                assert!((n - 1.0).abs() < 1e-12);
                count += 1;
                if count >= 1000 {
                    return;
                }
            }
        }
    }

    #[test]
    fn min_witness_layer_values() {
        assert_eq!(min_witness_layer(1), 0);
        assert_eq!(min_witness_layer(2), 1);
        assert_eq!(min_witness_layer(7), 1);
        assert_eq!(min_witness_layer(8), 2); // 2t = 16 is not < 4²
    }

    #[test]
    fn witness_on_basis_vector() {
        let h = ChannelVector::new(vec![
            Complex::new(1.0f64, 0.0),
            Complex::new(0.0, 0.0),
        ])
        .unwrap();
        for ell in 1..=6 {
            let w = covering_witness(&h, ell).unwrap();
            let g = gain(&w, &h).unwrap();
            assert_relative_eq!(g, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn witness_gain_and_norm_bounds() {
        // randomized check of the covering guarantee and the quantized-vector
        // norm estimates 1 − 2√(2t)ε < ‖z‖² ≤ 1 and ‖h̄ − z‖² ≤ 2tε²
        for t in [1usize, 2] {
            for ell in min_witness_layer(t).max(2)..=6 {
                let eps = 0.5f64.powi(ell as i32 + 1);
                let bound = 1.0 - 2.0 * t as f64 / 2.0f64.powi(ell as i32);
                let mut stream = RandomStream::new(77, (t * 10 + ell) as u64);
                for _ in 0..1000 {
                    let h: ChannelVector<f64> = sample_channel(&mut stream, t).unwrap();
                    let h_bar = h.normalized().unwrap();
                    let w = covering_witness(&h_bar, ell).unwrap();
                    assert!(w.layer() <= ell);
                    let g = gain(&w, &h_bar).unwrap();
                    assert!(g > bound, "t={t} ell={ell}: gain {g} ≤ {bound}");

                    // rebuild z (the unreduced quantized point) for the norm bounds
                    let mut z = Vec::new();
                    for e in h_bar.entries() {
                        z.push(quantize_grid_index(e.re.clamp(-1.0, 1.0), ell).unwrap());
                        z.push(quantize_grid_index(e.im.clamp(-1.0, 1.0), ell).unwrap());
                    }
                    let z_norm_sqr =
                        z.iter().map(|&c| (c as f64 * eps).powi(2)).sum::<f64>();
                    assert!(z_norm_sqr <= 1.0 + 1e-12);
                    assert!(z_norm_sqr > 1.0 - 2.0 * (2.0 * t as f64).sqrt() * eps);
                    let dist: f64 = h_bar
                        .entries()
                        .iter()
                        .enumerate()
                        .map(|(i, e)| {
                            let dr = e.re - z[2 * i] as f64 * eps;
                            let di = e.im - z[2 * i + 1] as f64 * eps;
                            dr * dr + di * di
                        })
                        .sum();
                    assert!(dist <= 2.0 * t as f64 * eps * eps + 1e-12);
                }
            }
        }
    }

    #[test]
    fn witness_rejects_bad_inputs() {
        let h = ChannelVector::new(vec![Complex::new(2.0f64, 0.0)]).unwrap();
        assert!(covering_witness(&h, 3).is_err());
        let h = ChannelVector::new(vec![
            Complex::new(1.0f64, 0.0),
            Complex::new(0.0, 0.0),
        ])
        .unwrap();
        // below the covering threshold for t=2
        assert!(covering_witness(&h, 0).is_err());
    }

    #[test]
    fn csv_roundtrip_and_validation() {
        let stream = CodebookStream::new(1, 1).unwrap();
        let mut buf = Vec::new();
        write_codebook_csv(&stream, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("index,layer,c0,c1\n"));
        let keys = read_codebook_csv(std::io::Cursor::new(&buf)).unwrap();
        let direct: Vec<DirectionKey> = stream.iter().collect();
        assert_eq!(keys, direct);

        // non-primitive row rejected
        let bad = "index,layer,c0,c1\n0,0,2,0\n";
        assert!(read_codebook_csv(std::io::Cursor::new(bad.as_bytes())).is_err());
        // wrong order rejected
        let bad = "index,layer,c0,c1\n0,0,1,0\n1,0,-1,0\n";
        assert!(read_codebook_csv(std::io::Cursor::new(bad.as_bytes())).is_err());
        // wrong layer column rejected
        let bad = "index,layer,c0,c1\n0,1,1,0\n";
        assert!(read_codebook_csv(std::io::Cursor::new(bad.as_bytes())).is_err());
    }

    #[test]
    fn stream_guards() {
        assert!(CodebookStream::new(0, 1).is_err());
        assert!(CodebookStream::new(1, MAX_LAYER + 1).is_err());
        // materializing layer 5 at t=2 would exceed the byte budget
        assert!(CodebookStream::new(2, 5).is_err());
    }
}
