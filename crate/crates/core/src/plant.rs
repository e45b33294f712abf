//! Battery unit physics.
//!
//! Coulomb counting with a constant terminal voltage per unit gives
//! `dS/dt = -p / (C V)`. The mode-dependent unit state
//!
//! ```text
//!   x_d = C V S        (discharging: deliverable energy)
//!   x_c = C V (1 - S)  (charging: fillable energy)
//! ```
//!
//! is what the allocation law shares between units. Sign conventions follow
//! the plant: positive power and current mean discharging.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// How nameplate ampere-hours map onto the simulation time unit.
///
/// `Paper` keeps C*V numerically as printed (ampere-hours times volts), which
/// makes SoC move visibly over a few tens of time units with kW-scale power.
/// `Si` converts capacity to ampere-seconds so that one time unit is one
/// second; SoC then drifts slowly and long horizons are required.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    Paper,
    Si,
}

impl TimeUnit {
    pub fn capacity_factor(self) -> f64 {
        match self {
            TimeUnit::Paper => 1.0,
            TimeUnit::Si => 3600.0,
        }
    }
}

pub const DEFAULT_SOC_FLOOR: f64 = 0.02;
pub const DEFAULT_SOC_CEILING: f64 = 0.98;

/// Nameplate battery parameters as configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryParams {
    pub capacity_ah: f64,
    pub voltage_v: f64,
    pub soc_floor: f64,
    pub soc_ceiling: f64,
}

impl BatteryParams {
    pub fn new(capacity_ah: f64, voltage_v: f64) -> Self {
        Self {
            capacity_ah,
            voltage_v,
            soc_floor: DEFAULT_SOC_FLOOR,
            soc_ceiling: DEFAULT_SOC_CEILING,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.capacity_ah > 0.0) {
            return Err(Error::NonPositive {
                name: "capacity_ah",
                value: self.capacity_ah,
            });
        }
        if !(self.voltage_v > 0.0) {
            return Err(Error::NonPositive {
                name: "voltage_v",
                value: self.voltage_v,
            });
        }
        if !(0.0 <= self.soc_floor && self.soc_floor < self.soc_ceiling && self.soc_ceiling <= 1.0)
        {
            return Err(Error::InvalidBattery(format!(
                "need 0 <= soc_floor < soc_ceiling <= 1, got [{}, {}]",
                self.soc_floor, self.soc_ceiling
            )));
        }
        Ok(())
    }

    /// Fix the capacity scale for a given time unit.
    pub fn resolve(&self, unit: TimeUnit) -> Result<ResolvedBattery> {
        self.validate()?;
        Ok(ResolvedBattery {
            cv: self.capacity_ah * unit.capacity_factor() * self.voltage_v,
            voltage_v: self.voltage_v,
            soc_floor: self.soc_floor,
            soc_ceiling: self.soc_ceiling,
        })
    }
}

/// Battery parameters with the capacity-voltage product `cv` expressed in the
/// engine's time unit. All plant operations work off this.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedBattery {
    pub cv: f64,
    pub voltage_v: f64,
    pub soc_floor: f64,
    pub soc_ceiling: f64,
}

/// State of charge, a fraction of capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryState {
    pub soc: f64,
}

impl BatteryState {
    /// Bound check against the configured SoC band. A violation during a run
    /// is a reported failure, never a silent clamp: clamping would break the
    /// positive-lower-bound premise the allocation analysis rests on.
    pub fn in_bounds(&self, params: &ResolvedBattery) -> bool {
        self.soc >= params.soc_floor && self.soc <= params.soc_ceiling
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatingMode {
    Discharging,
    Charging,
}

/// Mode-dependent unit state x_i: deliverable energy when discharging,
/// fillable energy when charging. Always in [0, C V].
pub fn unit_state(params: &ResolvedBattery, state: BatteryState, mode: OperatingMode) -> f64 {
    match mode {
        OperatingMode::Discharging => params.cv * state.soc,
        OperatingMode::Charging => params.cv * (1.0 - state.soc),
    }
}

/// SoC rate -p / (C V); negative power (charging) raises SoC.
pub fn soc_rate(params: &ResolvedBattery, power_w: f64) -> f64 {
    -power_w / params.cv
}

/// Rate of the unit state: -p when discharging, +p when charging (fillable
/// energy shrinks as the battery fills, since charging power is negative).
pub fn unit_state_rate(mode: OperatingMode, power_w: f64) -> f64 {
    match mode {
        OperatingMode::Discharging => -power_w,
        OperatingMode::Charging => power_w,
    }
}

/// Output current i = p / V, positive when discharging.
pub fn output_current(power_w: f64, voltage_v: f64) -> Result<f64> {
    if !(voltage_v > 0.0) {
        return Err(Error::NonPositive {
            name: "voltage_v",
            value: voltage_v,
        });
    }
    Ok(power_w / voltage_v)
}

/// Network-wide unit-state bounds (a1, a2): every admissible x_i stays within
/// them as long as SoC respects its band. a1 backs the allocation floor a1/2.
pub fn state_bounds(params: &[ResolvedBattery], mode: OperatingMode) -> (f64, f64) {
    let a1 = params
        .iter()
        .map(|p| match mode {
            OperatingMode::Discharging => p.cv * p.soc_floor,
            OperatingMode::Charging => p.cv * (1.0 - p.soc_ceiling),
        })
        .fold(f64::INFINITY, f64::min);
    let a2 = params.iter().map(|p| p.cv).fold(0.0, f64::max);
    (a1, a2)
}
