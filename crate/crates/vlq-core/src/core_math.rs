//! Closed-form outage quantities.
//!
//! A `t`-antenna Rayleigh channel has squared norm distributed as a sum of
//! `t` unit-mean exponentials (a Gamma(t, 1) variable). The two baselines
//! every experiment compares against are
//!
//! - full side information: `P(‖h‖² < α) = 1 − e^{−α} Σ_{k<t} α^k / k!`,
//! - no side information:   `P(|h₁|² < α) = 1 − e^{−α}`,
//!
//! with `α = (2^ρ − 1) / P` derived from the target rate `ρ` and power `P`.
//! Both are evaluated without any special-function dependency: the integer
//! shape makes the Gamma CDF a finite Poisson sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cast_usize, Real};

/// System-wide parameters: antenna count, target rate, power, and the
/// derived outage threshold.
///
/// The threshold is computed once by [`outage_threshold`] so that every
/// consumer sees exactly the same value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams<F: Real> {
    t: usize,
    rho: F,
    power: F,
    alpha: F,
}

impl<F: Real> SystemParams<F> {
    pub fn new(t: usize, rho: F, power: F) -> Result<Self> {
        if t < 1 {
            return Err(Error::Domain("antenna count t must be at least 1".into()));
        }
        let alpha = outage_threshold(rho, power)?;
        Ok(Self { t, rho, power, alpha })
    }

    /// Number of transmit antennas.
    pub fn t(&self) -> usize {
        self.t
    }

    /// Target rate in bits per channel use.
    pub fn rho(&self) -> F {
        self.rho
    }

    /// Transmit power (linear SNR).
    pub fn power(&self) -> F {
        self.power
    }

    /// Outage threshold `(2^ρ − 1) / P`.
    pub fn alpha(&self) -> F {
        self.alpha
    }
}

/// Outage threshold `α = (2^ρ − 1) / P`.
///
/// A beamforming gain below `α` means the instantaneous capacity
/// `log₂(1 + gain · P)` falls short of the target rate `ρ`.
pub fn outage_threshold<F: Real>(rho: F, power: F) -> Result<F> {
    if rho <= F::zero() {
        return Err(Error::Domain(format!("rho must be positive, got {rho}")));
    }
    if power <= F::zero() {
        return Err(Error::Domain(format!("power must be positive, got {power}")));
    }
    Ok((rho.exp2() - F::one()) / power)
}

/// Full-side-information outage probability `P(‖h‖² < α)`.
///
/// The CDF at `α` of a sum of `t` unit-mean exponentials. Two
/// cancellation-free evaluations cover the whole range:
///
/// - small `α`: ascending Poisson tail `Σ_{k≥t} e^{−α} α^k / k!`, which is
///   the same quantity by the Gamma/Poisson identity and keeps full
///   relative precision when the result is tiny;
/// - otherwise: the finite complement `1 − e^{−α} Σ_{k<t} α^k / k!`.
pub fn outage_full_closed<F: Real>(t: usize, alpha: F) -> Result<F> {
    if t < 1 {
        return Err(Error::Domain("t must be at least 1".into()));
    }
    if alpha < F::zero() {
        return Err(Error::Domain(format!("alpha must be nonnegative, got {alpha}")));
    }
    if alpha == F::zero() {
        return Ok(F::zero());
    }

    if alpha < cast_usize::<F>(t + 1) {
        // first tail term e^{−α} α^t / t!
        let mut term = (-alpha).exp();
        for k in 1..=t {
            term = term * alpha / cast_usize::<F>(k);
        }
        let mut sum = term;
        let mut k = t;
        loop {
            k += 1;
            term = term * alpha / cast_usize::<F>(k);
            let next = sum + term;
            if next == sum || k > t + 10_000 {
                return Ok(next);
            }
            sum = next;
        }
    }

    let mut term = F::one();
    let mut partial = F::one();
    for k in 1..t {
        term = term * alpha / cast_usize::<F>(k);
        partial += term;
    }
    Ok(F::one() - (-alpha).exp() * partial)
}

/// No-side-information outage probability `P(|h₁|² < α) = 1 − e^{−α}`.
pub fn outage_open_closed<F: Real>(alpha: F) -> Result<F> {
    if alpha < F::zero() {
        return Err(Error::Domain(format!("alpha must be nonnegative, got {alpha}")));
    }
    Ok(-(-alpha).exp_m1())
}
