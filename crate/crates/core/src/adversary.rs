//! External eavesdropper model.
//!
//! The eavesdropper sees the communication graph, the consensus gains and
//! every transmitted signal, and runs an observer per unit to reconstruct the
//! private unit state from them:
//!
//! ```text
//!   d/dt v_i    = phi_i - beta * c_i + k1 (y_i - v_i)
//!   d/dt xi_i   = k2 (y_i - z_i - xi_i) + phi_i
//!   phi_i       = k3 y_i + phi'_i                      (algebraic)
//!   d/dt phi'_i = -k3 (phi_i - beta * c_i) + k4 (y_i - v_i)
//!   d/dt z_i    = -beta * c_i,   z_i(0) = 0
//! ```
//!
//! where y_i is the transmitted estimate and c_i = sum_j a_ij (y_i - y_j) its
//! consensus coupling. Against the plain estimator, z_i(t) equals
//! y_i(t) - x_i(t) exactly (both start equal and share the same coupling), so
//! xi_i locks onto the private state x_i. Against the decomposed estimator
//! that identity is broken and xi_i lands elsewhere; quantifying that gap is
//! the point of this module.
//!
//! The observer's inputs are restricted by construction: an
//! [`ObservableBundle`] can only be built from transmitted signals and public
//! protocol constants, never from beta sub-states, raw unit states, or the
//! private scaling factors.

use crate::error::{Error, Result};
use crate::topology::Topology;
use serde::{Deserialize, Serialize};

/// Exactly what an eavesdropper on the channel can hold, nothing else.
#[derive(Debug, Clone, Copy)]
pub struct ObservableBundle<'a> {
    /// Transmitted average-state estimates (xhat, or the alpha sub-state
    /// under the decomposed scheme).
    pub transmitted_estimates: &'a [f64],
    /// Transmitted average-desired-power estimates.
    pub power_estimates: &'a [f64],
    /// Communication graph (public protocol knowledge).
    pub topology: &'a Topology,
    /// Consensus gains (public protocol knowledge).
    pub beta: f64,
    pub kappa: f64,
}

/// Observer gains k1..k4, all positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverGains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

impl Default for ObserverGains {
    fn default() -> Self {
        // Fast relative to the plant time constants at paper scale.
        Self {
            k1: 50.0,
            k2: 50.0,
            k3: 50.0,
            k4: 50.0,
        }
    }
}

impl ObserverGains {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k4", self.k4),
        ] {
            if !(v > 0.0) {
                return Err(Error::NonPositive { name, value: v });
            }
        }
        Ok(())
    }
}

/// Per-unit observer state. `v` reconstructs the transmitted estimate,
/// `xi` the private unit state, `phi_prime` and `z` are auxiliaries
/// (`phi = k3 * y + phi_prime` reconstructs the state derivative).
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub v: Vec<f64>,
    pub xi: Vec<f64>,
    pub phi_prime: Vec<f64>,
    pub z: Vec<f64>,
    pub gains: ObserverGains,
}

impl ObserverState {
    /// All-zero start; z(0) = 0 is required, the rest is the conventional
    /// cold start.
    pub fn new(n: usize, gains: ObserverGains) -> Result<Self> {
        gains.validate()?;
        Ok(Self {
            v: vec![0.0; n],
            xi: vec![0.0; n],
            phi_prime: vec![0.0; n],
            z: vec![0.0; n],
            gains,
        })
    }

    /// Derivative reconstruction phi_i = k3 y_i + phi'_i.
    pub fn phi(&self, transmitted: &[f64]) -> Vec<f64> {
        self.phi_prime
            .iter()
            .zip(transmitted)
            .map(|(&p, &y)| self.gains.k3 * y + p)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverRates {
    pub v: Vec<f64>,
    pub xi: Vec<f64>,
    pub phi_prime: Vec<f64>,
    pub z: Vec<f64>,
}

/// Observer right-hand side, fed exclusively from the bundle.
pub fn observer_rhs(state: &ObserverState, bundle: &ObservableBundle) -> Result<ObserverRates> {
    let n = bundle.topology.n();
    for len in [
        state.v.len(),
        state.xi.len(),
        state.phi_prime.len(),
        state.z.len(),
        bundle.transmitted_estimates.len(),
    ] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: len,
            });
        }
    }
    let g = &state.gains;
    let y = bundle.transmitted_estimates;
    let mut rates = ObserverRates {
        v: Vec::with_capacity(n),
        xi: Vec::with_capacity(n),
        phi_prime: Vec::with_capacity(n),
        z: Vec::with_capacity(n),
    };
    for i in 0..n {
        let mut coupling = 0.0;
        for &j in bundle.topology.neighbors(i) {
            coupling += y[i] - y[j];
        }
        let coupling = bundle.beta * coupling;
        let phi = g.k3 * y[i] + state.phi_prime[i];
        let innovation = y[i] - state.v[i];
        rates.v.push(phi - coupling + g.k1 * innovation);
        rates.xi.push(g.k2 * (y[i] - state.z[i] - state.xi[i]) + phi);
        rates.phi_prime.push(-g.k3 * (phi - coupling) + g.k4 * innovation);
        rates.z.push(-coupling);
    }
    Ok(rates)
}

/// Power inference: the allocation law evaluated with the observer's
/// quantities — xi for the unit state, v for the average-state estimate, the
/// intercepted power estimate as is. Deliberately no eta or sigma descaling:
/// the eavesdropper does not know the scaling factors exist.
pub fn infer_power(
    state: &ObserverState,
    bundle: &ObservableBundle,
    floor_guess: f64,
) -> Vec<f64> {
    state
        .xi
        .iter()
        .zip(&state.v)
        .zip(bundle.power_estimates)
        .map(|((&xi, &v), &phat)| xi / v.max(floor_guess) * phat)
        .collect()
}

/// Windowed reconstruction-error statistics, per unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leakage {
    /// RMSE of the state reconstruction xi against x, per unit.
    pub state_rmse: Vec<f64>,
    /// RMSE of the inferred power against the true allocation, per unit.
    pub power_rmse: Vec<f64>,
    /// sup |p_inferred - p| / sup |p| over the window, per unit.
    pub power_rel_sup_error: Vec<f64>,
    /// Worst and mean of the per-unit relative sup errors.
    pub worst_rel_sup_error: f64,
    pub mean_rel_sup_error: f64,
}

/// Compute leakage metrics over the trailing `window` fraction of the
/// sample range. `true_*` and `inferred_*` are sample-major (one vector of n
/// per time sample) on the same grid.
pub fn leakage_metrics(
    times: &[f64],
    true_states: &[Vec<f64>],
    inferred_states: &[Vec<f64>],
    true_powers: &[Vec<f64>],
    inferred_powers: &[Vec<f64>],
    window: f64,
) -> Result<Leakage> {
    let samples = times.len();
    if samples == 0
        || [
            true_states.len(),
            inferred_states.len(),
            true_powers.len(),
            inferred_powers.len(),
        ]
        .iter()
        .any(|&l| l != samples)
    {
        return Err(Error::EmptyWindow);
    }
    let n = true_states[0].len();
    let t0 = times[0];
    let t1 = times[samples - 1];
    let start = t1 - window * (t1 - t0);
    let idx: Vec<usize> = (0..samples).filter(|&k| times[k] >= start).collect();
    if idx.is_empty() {
        return Err(Error::EmptyWindow);
    }

    let mut state_rmse = vec![0.0; n];
    let mut power_rmse = vec![0.0; n];
    let mut sup_abs_err = vec![0.0f64; n];
    let mut sup_abs_p = vec![0.0f64; n];
    for &k in &idx {
        for i in 0..n {
            let se = inferred_states[k][i] - true_states[k][i];
            state_rmse[i] += se * se;
            let pe = inferred_powers[k][i] - true_powers[k][i];
            power_rmse[i] += pe * pe;
            sup_abs_err[i] = sup_abs_err[i].max(pe.abs());
            sup_abs_p[i] = sup_abs_p[i].max(true_powers[k][i].abs());
        }
    }
    let m = idx.len() as f64;
    for i in 0..n {
        state_rmse[i] = (state_rmse[i] / m).sqrt();
        power_rmse[i] = (power_rmse[i] / m).sqrt();
    }
    let power_rel_sup_error: Vec<f64> = (0..n)
        .map(|i| {
            if sup_abs_p[i] > 0.0 {
                sup_abs_err[i] / sup_abs_p[i]
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let worst = power_rel_sup_error.iter().copied().fold(0.0, f64::max);
    let mean = power_rel_sup_error.iter().sum::<f64>() / n as f64;
    Ok(Leakage {
        state_rmse,
        power_rmse,
        power_rel_sup_error,
        worst_rel_sup_error: worst,
        mean_rel_sup_error: mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{dac_rhs, DacState};
    use crate::topology::Topology;

    /// The bundle carries transmitted signals and public constants, nothing
    /// else. Exhaustive destructuring makes this a compile-time fact: adding
    /// a field for private data would break this test.
    #[test]
    fn bundle_has_no_private_fields() {
        let topo = Topology::path(2, &[0]).unwrap();
        let transmitted = [1.0, 2.0];
        let power = [0.5, 0.5];
        let bundle = ObservableBundle {
            transmitted_estimates: &transmitted,
            power_estimates: &power,
            topology: &topo,
            beta: 300.0,
            kappa: 210.0,
        };
        let ObservableBundle {
            transmitted_estimates,
            power_estimates,
            topology,
            beta,
            kappa,
        } = bundle;
        assert_eq!(transmitted_estimates.len(), 2);
        assert_eq!(power_estimates.len(), 2);
        assert_eq!(topology.n(), 2);
        assert!(beta > 0.0 && kappa > 0.0);
    }

    #[test]
    fn origin_is_a_fixed_point() {
        let topo = Topology::ring(4, &[0]).unwrap();
        let state = ObserverState::new(4, ObserverGains::default()).unwrap();
        let zeros = [0.0; 4];
        let bundle = ObservableBundle {
            transmitted_estimates: &zeros,
            power_estimates: &zeros,
            topology: &topo,
            beta: 300.0,
            kappa: 210.0,
        };
        let rates = observer_rhs(&state, &bundle).unwrap();
        assert_eq!(rates.v, vec![0.0; 4]);
        assert_eq!(rates.xi, vec![0.0; 4]);
        assert_eq!(rates.phi_prime, vec![0.0; 4]);
        assert_eq!(rates.z, vec![0.0; 4]);
    }

    #[test]
    fn gains_must_be_positive() {
        let g = ObserverGains {
            k3: 0.0,
            ..Default::default()
        };
        assert!(ObserverState::new(2, g).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let topo = Topology::ring(4, &[0]).unwrap();
        let state = ObserverState::new(3, ObserverGains::default()).unwrap();
        let y = [0.0; 4];
        let bundle = ObservableBundle {
            transmitted_estimates: &y,
            power_estimates: &y,
            topology: &topo,
            beta: 1.0,
            kappa: 1.0,
        };
        assert!(matches!(
            observer_rhs(&state, &bundle),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    /// Static plant, plain estimator: after the network reaches consensus the
    /// observer recovers each x_i(0) because z_i = xhat_i - x_i exactly.
    /// Integrates the coupled estimator + observer system and checks the
    /// steady state against that closed-form fixed point.
    #[test]
    fn observer_recovers_static_states_on_plain_channel() {
        let topo = Topology::path(3, &[0]).unwrap();
        let x0 = [5.0, 1.0, -3.0];
        let beta = 2.0;
        let gains = ObserverGains {
            k1: 8.0,
            k2: 8.0,
            k3: 8.0,
            k4: 8.0,
        };
        let mut est = DacState::init(&x0);
        let mut obs = ObserverState::new(3, gains).unwrap();
        let h = 5e-4;
        let steps = 80_000; // t = 40, far past both time constants
        let xdot = [0.0; 3];
        for _ in 0..steps {
            // RK4 on the concatenated (estimator, observer) state
            let eval = |e: &DacState, o: &ObserverState| {
                let er = dac_rhs(e, &xdot, &topo, beta).unwrap();
                let bundle = ObservableBundle {
                    transmitted_estimates: &e.estimates,
                    power_estimates: &[0.0; 3],
                    topology: &topo,
                    beta,
                    kappa: 1.0,
                };
                let or = observer_rhs(o, &bundle).unwrap();
                (er, or)
            };
            let advance = |e: &DacState, o: &ObserverState, er: &[f64], or: &ObserverRates, f: f64| {
                let mut e2 = e.clone();
                let mut o2 = o.clone();
                for i in 0..3 {
                    e2.estimates[i] += f * er[i];
                    o2.v[i] += f * or.v[i];
                    o2.xi[i] += f * or.xi[i];
                    o2.phi_prime[i] += f * or.phi_prime[i];
                    o2.z[i] += f * or.z[i];
                }
                (e2, o2)
            };
            let (er1, or1) = eval(&est, &obs);
            let (e2, o2) = advance(&est, &obs, &er1, &or1, 0.5 * h);
            let (er2, or2) = eval(&e2, &o2);
            let (e3, o3) = advance(&est, &obs, &er2, &or2, 0.5 * h);
            let (er3, or3) = eval(&e3, &o3);
            let (e4, o4) = advance(&est, &obs, &er3, &or3, h);
            let (er4, or4) = eval(&e4, &o4);
            for i in 0..3 {
                est.estimates[i] +=
                    h / 6.0 * (er1[i] + 2.0 * er2[i] + 2.0 * er3[i] + er4[i]);
                obs.v[i] += h / 6.0 * (or1.v[i] + 2.0 * or2.v[i] + 2.0 * or3.v[i] + or4.v[i]);
                obs.xi[i] +=
                    h / 6.0 * (or1.xi[i] + 2.0 * or2.xi[i] + 2.0 * or3.xi[i] + or4.xi[i]);
                obs.phi_prime[i] += h / 6.0
                    * (or1.phi_prime[i]
                        + 2.0 * or2.phi_prime[i]
                        + 2.0 * or3.phi_prime[i]
                        + or4.phi_prime[i]);
                obs.z[i] += h / 6.0 * (or1.z[i] + 2.0 * or2.z[i] + 2.0 * or3.z[i] + or4.z[i]);
            }
        }
        let mean = (x0[0] + x0[1] + x0[2]) / 3.0;
        for i in 0..3 {
            // estimator reached the average, observer reached x_i(0)
            assert!((est.estimates[i] - mean).abs() < 1e-9);
            assert!(
                (obs.xi[i] - x0[i]).abs() < 1e-6,
                "unit {i}: xi = {}, x0 = {}",
                obs.xi[i],
                x0[i]
            );
            // v tracks the transmitted estimate, phi (the xdot reconstruction)
            // vanishes for a static plant
            assert!((obs.v[i] - est.estimates[i]).abs() < 1e-8);
            let phi = obs.phi(&est.estimates)[i];
            assert!(phi.abs() < 1e-8);
        }
    }

    #[test]
    fn infer_power_identities() {
        let topo = Topology::path(2, &[0]).unwrap();
        let y = [10.0, 12.0];
        let phat = [3.0, 3.0];
        let bundle = ObservableBundle {
            transmitted_estimates: &y,
            power_estimates: &phat,
            topology: &topo,
            beta: 1.0,
            kappa: 1.0,
        };
        let mut obs = ObserverState::new(2, ObserverGains::default()).unwrap();
        obs.xi = vec![5.0, 6.0];
        obs.v = vec![10.0, 12.0];
        let p = infer_power(&obs, &bundle, 1.0);
        assert_eq!(p, vec![5.0 / 10.0 * 3.0, 6.0 / 12.0 * 3.0]);

        // Intercepted power estimate of zero infers zero power.
        let zero = [0.0, 0.0];
        let bundle_zero = ObservableBundle {
            power_estimates: &zero,
            ..bundle
        };
        assert_eq!(infer_power(&obs, &bundle_zero, 1.0), vec![0.0, 0.0]);

        // Floor guards a collapsed v.
        obs.v = vec![0.0, -4.0];
        let p = infer_power(&obs, &bundle, 2.0);
        assert_eq!(p, vec![5.0 / 2.0 * 3.0, 6.0 / 2.0 * 3.0]);
    }

    #[test]
    fn leakage_metric_basics() {
        let times: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let truth: Vec<Vec<f64>> = times.iter().map(|_| vec![1.0, 2.0]).collect();
        let same = truth.clone();
        let l = leakage_metrics(&times, &truth, &same, &truth, &same, 0.4).unwrap();
        assert_eq!(l.state_rmse, vec![0.0, 0.0]);
        assert_eq!(l.power_rmse, vec![0.0, 0.0]);
        assert_eq!(l.power_rel_sup_error, vec![0.0, 0.0]);

        // Constant offset on unit 0 shows up as exactly that RMSE.
        let shifted: Vec<Vec<f64>> = truth.iter().map(|v| vec![v[0] + 0.5, v[1]]).collect();
        let l = leakage_metrics(&times, &truth, &shifted, &truth, &shifted, 0.4).unwrap();
        assert!((l.state_rmse[0] - 0.5).abs() < 1e-12);
        assert_eq!(l.state_rmse[1], 0.0);
        assert!((l.power_rel_sup_error[0] - 0.5).abs() < 1e-12);

        assert!(leakage_metrics(&[], &[], &[], &[], &[], 0.4).is_err());
    }
}
