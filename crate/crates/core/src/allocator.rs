//! Power allocation laws.
//!
//! The ideal law splits the demand in proportion to unit state,
//! `p_i = x_i / sum_j x_j * p*`. The distributed law replaces the global
//! quantities with local estimates and guards the denominator:
//!
//! ```text
//!   p_i = x_i / max(a1/2, xhat_i / eta) * phat_i / sigma
//! ```
//!
//! With eta = sigma = 1 this is exactly the non-private law, so one
//! implementation serves both schemes. The a1/2 floor keeps the law defined
//! while the state estimate is still transient (it can even dip negative
//! early on; the allocation then momentarily overshoots, which is reported,
//! not corrected).

use crate::error::{Error, Result};
use crate::plant::OperatingMode;

/// Everything a unit needs to compute its own power command.
#[derive(Debug, Clone, Copy)]
pub struct AllocationInputs {
    /// Mode-dependent unit state x_i (the caller picked x_d or x_c).
    pub unit_state: f64,
    /// Local average-state estimate: xhat under the plain scheme, the shared
    /// alpha sub-state under the decomposed scheme.
    pub avg_state_estimate: f64,
    /// Local average-desired-power estimate.
    pub avg_power_estimate: f64,
    /// Denominator guard a1/2 (> 0).
    pub floor: f64,
    /// State-estimate descaling factor (1 for the plain scheme).
    pub eta: f64,
    /// Power-estimate descaling factor (1 for the plain scheme).
    pub sigma: f64,
    pub mode: OperatingMode,
}

/// Distributed allocation law.
pub fn allocate(inputs: &AllocationInputs) -> Result<f64> {
    if !(inputs.floor > 0.0) {
        return Err(Error::NonPositive {
            name: "floor",
            value: inputs.floor,
        });
    }
    if !(inputs.eta > 0.0) {
        return Err(Error::NonPositive {
            name: "eta",
            value: inputs.eta,
        });
    }
    if !(inputs.sigma > 0.0) {
        return Err(Error::NonPositive {
            name: "sigma",
            value: inputs.sigma,
        });
    }
    let denom = (inputs.avg_state_estimate / inputs.eta).max(inputs.floor);
    Ok(inputs.unit_state / denom * (inputs.avg_power_estimate / inputs.sigma))
}

/// Centralized reference law with perfect knowledge: p_i = x_i / sum x * p*.
/// The outputs sum to p* exactly (up to rounding).
pub fn ideal_allocate(states: &[f64], p_star: f64) -> Result<Vec<f64>> {
    for &x in states {
        if !(x > 0.0) {
            return Err(Error::NonPositive {
                name: "unit state",
                value: x,
            });
        }
    }
    let total: f64 = states.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(states.iter().map(|&x| x / total * p_star).collect())
}
