//! Variable-length limited-feedback beamforming for minimum outage.
//!
//! A `t`-antenna transmitter that learns its channel only through feedback
//! bits can still match the outage probability of perfect channel
//! knowledge, provided the feedback code is allowed to vary its length per
//! channel state. This crate implements the machinery end to end and
//! verifies the scaling claims numerically:
//!
//! - [`core_math`] — closed-form outage baselines and the threshold
//!   `α = (2^ρ − 1)/P`;
//! - [`channel`] — deterministic, seekable Rayleigh channel sampling and
//!   beamforming gains;
//! - [`codebook`] — the nested dyadic-grid direction codebook, enumerated
//!   lazily in exact integer arithmetic, plus the covering construction;
//! - [`quantizer`] — sequential, argmax, and precoding encoders with
//!   enumeration and prefix-free codeword lengths;
//! - [`simulate`] — embarrassingly parallel, bit-reproducible Monte Carlo
//!   estimation of outage and feedback rate;
//! - [`analysis`] — explicit tail and rate bounds, converse floor, and
//!   log–log slope fits;
//! - [`toy_sources`] — an infinite-alphabet source separating fixed-length
//!   from variable-length quantization;
//! - [`battery`] — the runnable invariant battery behind `verify`.
//!
//! Scalar-generic APIs take any [`Real`] (`f32` or `f64`); the simulation
//! pipeline and its file formats are fixed to `f64`, and the crate root
//! re-exports `f64` aliases for the common types.
//!
//! ```
//! use vlq_core::{SystemParams64, simulate::{run, Mode, SimConfig}};
//!
//! let config = SimConfig {
//!     params: SystemParams64::new(2, 1.0, 10.0).unwrap(),
//!     ell_max: 2,
//!     n_samples: 10_000,
//!     seed: 7,
//!     shards: 4,
//!     mode: Mode::Vlq,
//!     verify_cells: false,
//! };
//! let result = run(&config).unwrap();
//! assert!(result.out_hat >= result.closed_full - 3.0 * result.out_se);
//! ```

pub mod analysis;
pub mod battery;
pub mod channel;
pub mod codebook;
pub mod core_math;
pub mod error;
pub mod quantizer;
pub mod scalar;
pub mod simulate;
pub mod toy_sources;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` aliases for the scalar-generic core types.
pub type SystemParams64 = core_math::SystemParams<f64>;
pub type ChannelVector64 = channel::ChannelVector<f64>;
pub type BoundReport64 = analysis::BoundReport<f64>;

/// `f32` aliases, for consumers that trade precision for footprint.
pub type SystemParams32 = core_math::SystemParams<f32>;
pub type ChannelVector32 = channel::ChannelVector<f32>;
pub type BoundReport32 = analysis::BoundReport<f32>;
