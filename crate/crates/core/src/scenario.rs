//! Experiment configuration: everything a run needs, validated up front.

use crate::adversary::ObserverGains;
use crate::error::{Error, Result};
use crate::estimators::SplitConfig;
use crate::plant::{BatteryParams, OperatingMode, TimeUnit};
use crate::topology::{validate_connected, Topology};
use serde::{Deserialize, Serialize};

/// Which estimator pipeline drives the allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Plain estimators; every true estimate is on the wire.
    Baseline,
    /// Decomposed state estimator plus scaled power estimator.
    Privacy,
}

/// Desired total power p*(t).
#[derive(Debug, Clone, PartialEq)]
pub enum PowerProfile {
    Constant {
        power_w: f64,
    },
    /// amplitude * sin(omega t) + offset
    Sinusoid {
        amplitude_w: f64,
        offset_w: f64,
        omega: f64,
    },
    /// Right-continuous step function through (time, power) points.
    Piecewise {
        points: Vec<(f64, f64)>,
    },
}

impl PowerProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            PowerProfile::Constant { power_w } => *power_w,
            PowerProfile::Sinusoid {
                amplitude_w,
                offset_w,
                omega,
            } => amplitude_w * (omega * t).sin() + offset_w,
            PowerProfile::Piecewise { points } => {
                let mut value = points.first().map(|p| p.1).unwrap_or(0.0);
                for &(tk, pk) in points {
                    if tk <= t {
                        value = pk;
                    } else {
                        break;
                    }
                }
                value
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PowerProfile::Constant { power_w } => {
                if !power_w.is_finite() {
                    return Err(Error::NonFinite {
                        name: "power_w",
                        value: *power_w,
                    });
                }
            }
            PowerProfile::Sinusoid {
                amplitude_w,
                offset_w,
                omega,
            } => {
                for (name, v) in [
                    ("amplitude_w", *amplitude_w),
                    ("offset_w", *offset_w),
                    ("omega", *omega),
                ] {
                    if !v.is_finite() {
                        return Err(Error::NonFinite { name, value: v });
                    }
                }
            }
            PowerProfile::Piecewise { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidScenario(
                        "piecewise profile needs at least one point".into(),
                    ));
                }
                for w in points.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(Error::InvalidScenario(
                            "piecewise profile times must be strictly increasing".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Eavesdropper configuration for a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdversaryConfig {
    pub enabled: bool,
    pub gains: ObserverGains,
    /// Denominator guard for the attacker's allocation formula. Defaults to
    /// the same a1/2 the plant uses (the bounds are treated as public
    /// physical knowledge).
    pub floor_guess: Option<f64>,
}

/// Full experiment description. Everything a run reads lives here; two runs
/// of an identical scenario (seed included) produce bit-identical traces.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: Topology,
    pub batteries: Vec<BatteryParams>,
    pub initial_soc: Vec<f64>,
    pub mode: OperatingMode,
    pub profile: PowerProfile,
    /// Declared bounds on |p*(t)|, checked at sample points.
    pub power_min_abs_w: f64,
    pub power_max_abs_w: f64,
    pub beta: f64,
    pub kappa: f64,
    pub eta: f64,
    pub sigma: f64,
    pub split: SplitConfig,
    pub seed: u64,
    pub scheme: Scheme,
    pub time_unit: TimeUnit,
    pub horizon: f64,
    pub dt: f64,
    pub sample_stride: usize,
    pub settle_fraction: f64,
    pub adversary: AdversaryConfig,
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.topology.n()
    }

    /// Validate every precondition a run relies on: connected graph, a
    /// leader for the power estimator, batteries and SoC in range, positive
    /// gains and scalings, profile inside its declared band.
    pub fn validate(&self) -> Result<()> {
        let n = self.topology.n();
        if !validate_connected(&self.topology) {
            return Err(Error::Disconnected);
        }
        if !self.topology.has_leader() {
            return Err(Error::NoLeader);
        }
        if self.batteries.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.batteries.len(),
            });
        }
        if self.initial_soc.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.initial_soc.len(),
            });
        }
        for (i, b) in self.batteries.iter().enumerate() {
            b.validate()?;
            let s = self.initial_soc[i];
            if !(b.soc_floor <= s && s <= b.soc_ceiling) {
                return Err(Error::InvalidScenario(format!(
                    "initial SoC of unit {} ({s}) outside [{}, {}]",
                    i + 1,
                    b.soc_floor,
                    b.soc_ceiling
                )));
            }
        }
        for (name, v) in [
            ("beta", self.beta),
            ("kappa", self.kappa),
            ("eta", self.eta),
            ("sigma", self.sigma),
            ("horizon", self.horizon),
            ("dt", self.dt),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NonPositive { name, value: v });
            }
        }
        if self.dt > self.horizon {
            return Err(Error::InvalidScenario(
                "dt must not exceed the horizon".into(),
            ));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidScenario("sample_stride must be >= 1".into()));
        }
        if !(self.settle_fraction > 0.0 && self.settle_fraction < 1.0) {
            return Err(Error::InvalidScenario(format!(
                "settle_fraction must be in (0, 1), got {}",
                self.settle_fraction
            )));
        }
        self.split.validate()?;
        self.profile.validate()?;
        self.adversary.gains.validate()?;

        // Bounded demand with the declared band, checked on a sample grid.
        if !(self.power_min_abs_w >= 0.0 && self.power_max_abs_w >= self.power_min_abs_w) {
            return Err(Error::InvalidScenario(format!(
                "power band [{}, {}] is invalid",
                self.power_min_abs_w, self.power_max_abs_w
            )));
        }
        let samples = 1000;
        let slack = 1e-9 * self.power_max_abs_w.max(1.0);
        for k in 0..=samples {
            let t = self.horizon * k as f64 / samples as f64;
            let p = self.profile.eval(t).abs();
            if p < self.power_min_abs_w - slack || p > self.power_max_abs_w + slack {
                return Err(Error::InvalidScenario(format!(
                    "|p*({t:.3})| = {p:.3} outside the declared band [{}, {}]",
                    self.power_min_abs_w, self.power_max_abs_w
                )));
            }
        }
        Ok(())
    }
}
