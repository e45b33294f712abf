//! Shared helpers for the benchmark targets.

use bess_core::config::preset;
use bess_core::scenario::Scenario;

/// Discharge replication preset trimmed to the given horizon.
pub fn discharge_scenario(horizon: f64) -> Scenario {
    let mut s = preset("discharge_paper").expect("embedded preset is valid");
    s.horizon = horizon;
    s.sample_stride = usize::MAX; // record endpoints only
    s
}
