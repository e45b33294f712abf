//! Closed-loop simulation: plant, estimators, allocation law and (optionally)
//! the eavesdropper observer integrated as one coupled ODE system with
//! classical fixed-step RK4.
//!
//! The allocation law is algebraic feedthrough: it is evaluated inside every
//! RK4 stage from that stage's estimator values, never from delayed ones.
//! A run is strictly sequential and, for a fixed scenario (seed included),
//! bit-reproducible on a given platform.

use crate::adversary::{
    infer_power, leakage_metrics, observer_rhs, Leakage, ObservableBundle, ObserverState,
};
use crate::allocator::{allocate, AllocationInputs};
use crate::error::{Error, Result};
use crate::estimators::{
    dac_rhs, decomp_init, decomp_rhs, power_est_rhs, DacState, DecomposedState, PowerEstState,
    SplitGenerator,
};
use crate::plant::{
    soc_rate, unit_state, unit_state_rate, BatteryState, OperatingMode, ResolvedBattery,
};
use crate::scenario::{Scenario, Scheme};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write as IoWrite;

/// One classical RK4 step of a generic system, for reuse in tests and
/// stand-alone estimator studies.
pub fn rk4_step<F: FnMut(f64, &[f64], &mut [f64])>(f: &mut F, t: f64, h: f64, y: &mut [f64]) {
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    f(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    f(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    f(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    f(t + h, &tmp, &mut k4);
    for i in 0..n {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Offsets of the state blocks inside the flat ODE vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    scheme: Scheme,
    adversary: bool,
}

impl Layout {
    fn true_alpha(&self) -> usize {
        self.n
    }
    fn true_beta(&self) -> usize {
        2 * self.n
    }
    fn est_alpha(&self) -> usize {
        3 * self.n
    }
    fn est_beta(&self) -> usize {
        4 * self.n
    }
    fn xhat(&self) -> usize {
        self.n
    }
    fn phat(&self) -> usize {
        match self.scheme {
            Scheme::Baseline => 2 * self.n,
            Scheme::Privacy => 5 * self.n,
        }
    }
    fn adv(&self) -> usize {
        self.phat() + self.n
    }
    fn len(&self) -> usize {
        self.adv() + if self.adversary { 4 * self.n } else { 0 }
    }
    /// Offset of the transmitted average-state estimate (what an
    /// eavesdropper can tap): xhat, or the alpha sub-state.
    fn transmitted(&self) -> usize {
        match self.scheme {
            Scheme::Baseline => self.xhat(),
            Scheme::Privacy => self.est_alpha(),
        }
    }
}

/// Immutable per-run data: resolved plant parameters, effective scalings,
/// split generator, layout.
struct RunContext<'a> {
    scen: &'a Scenario,
    resolved: Vec<ResolvedBattery>,
    a1: f64,
    floor: f64,
    eta_eff: f64,
    sigma_eff: f64,
    split: SplitGenerator,
    adv_floor_guess: f64,
    layout: Layout,
}

/// Mutable scratch reused across RK4 stages (the estimator APIs take owned
/// state structs; we refill them from the flat vector each stage).
struct Scratch {
    x: Vec<f64>,
    xdot: Vec<f64>,
    p: Vec<f64>,
    dac: DacState,
    decomp: DecomposedState,
    power: PowerEstState,
    observer: ObserverState,
}

/// Stage-level diagnostics accumulated over the whole run.
#[derive(Debug, Clone, Copy, Default)]
struct StageDiag {
    split_rate_residual_max: f64,
}

impl<'a> RunContext<'a> {
    fn new(scen: &'a Scenario) -> Result<Self> {
        scen.validate()?;
        let n = scen.n();
        let resolved: Vec<ResolvedBattery> = scen
            .batteries
            .iter()
            .map(|b| b.resolve(scen.time_unit))
            .collect::<Result<_>>()?;
        let (a1, _a2) = crate::plant::state_bounds(&resolved, scen.mode);
        let floor = a1 / 2.0;
        if !(floor > 0.0) {
            return Err(Error::InvalidScenario(
                "unit-state lower bound a1 is zero; use soc_floor > 0 (discharge) or \
                 soc_ceiling < 1 (charge) so the allocation floor a1/2 is positive"
                    .into(),
            ));
        }
        let (eta_eff, sigma_eff) = match scen.scheme {
            Scheme::Baseline => (1.0, 1.0),
            Scheme::Privacy => (scen.eta, scen.sigma),
        };
        let split = SplitGenerator::from_seed(&scen.split, n, scen.seed)?;
        let layout = Layout {
            n,
            scheme: scen.scheme,
            adversary: scen.adversary.enabled,
        };
        Ok(Self {
            scen,
            resolved,
            a1,
            floor,
            eta_eff,
            sigma_eff,
            split,
            adv_floor_guess: scen.adversary.floor_guess.unwrap_or(floor),
            layout,
        })
    }

    fn initial_state(&self) -> Result<(Vec<f64>, Scratch)> {
        let n = self.layout.n;
        let mut y = vec![0.0; self.layout.len()];
        y[..n].copy_from_slice(&self.scen.initial_soc);
        let x0: Vec<f64> = (0..n)
            .map(|i| {
                unit_state(
                    &self.resolved[i],
                    BatteryState { soc: y[i] },
                    self.scen.mode,
                )
            })
            .collect();
        let decomp = decomp_init(&x0, self.eta_eff, self.split.clone())?;
        match self.scen.scheme {
            Scheme::Baseline => {
                let lo = self.layout.xhat();
                y[lo..lo + n].copy_from_slice(&x0);
            }
            Scheme::Privacy => {
                y[self.layout.true_alpha()..self.layout.true_alpha() + n]
                    .copy_from_slice(&decomp.true_alpha);
                y[self.layout.true_beta()..self.layout.true_beta() + n]
                    .copy_from_slice(&decomp.true_beta);
                y[self.layout.est_alpha()..self.layout.est_alpha() + n]
                    .copy_from_slice(&decomp.est_alpha);
                y[self.layout.est_beta()..self.layout.est_beta() + n]
                    .copy_from_slice(&decomp.est_beta);
            }
        }
        // phat and adversary blocks start at zero.
        let scratch = Scratch {
            x: vec![0.0; n],
            xdot: vec![0.0; n],
            p: vec![0.0; n],
            dac: DacState {
                estimates: vec![0.0; n],
            },
            decomp,
            power: PowerEstState::init(n, self.sigma_eff, self.scen.kappa)?,
            observer: ObserverState::new(n, self.scen.adversary.gains)?,
        };
        Ok((y, scratch))
    }

    /// Algebraic feedthrough at a state: unit states and allocated powers.
    fn algebra(&self, t: f64, y: &[f64], x: &mut [f64], p: &mut [f64]) -> f64 {
        let n = self.layout.n;
        let p_star = self.scen.profile.eval(t);
        let est = &y[self.layout.transmitted()..self.layout.transmitted() + n];
        let phat = &y[self.layout.phat()..self.layout.phat() + n];
        for i in 0..n {
            x[i] = unit_state(
                &self.resolved[i],
                BatteryState { soc: y[i] },
                self.scen.mode,
            );
            p[i] = allocate(&AllocationInputs {
                unit_state: x[i],
                avg_state_estimate: est[i],
                avg_power_estimate: phat[i],
                floor: self.floor,
                eta: self.eta_eff,
                sigma: self.sigma_eff,
                mode: self.scen.mode,
            })
            .expect("allocation inputs validated at scenario level");
        }
        p_star
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64], s: &mut Scratch, diag: &mut StageDiag) {
        let n = self.layout.n;
        let p_star = {
            let (x, p) = (&mut s.x, &mut s.p);
            self.algebra(t, y, x, p)
        };
        for i in 0..n {
            dy[i] = soc_rate(&self.resolved[i], s.p[i]);
            s.xdot[i] = unit_state_rate(self.scen.mode, s.p[i]);
        }

        match self.scen.scheme {
            Scheme::Baseline => {
                let lo = self.layout.xhat();
                s.dac.estimates.copy_from_slice(&y[lo..lo + n]);
                let rates = dac_rhs(&s.dac, &s.xdot, &self.scen.topology, self.scen.beta)
                    .expect("dimensions fixed by layout");
                dy[lo..lo + n].copy_from_slice(&rates);
            }
            Scheme::Privacy => {
                s.decomp
                    .est_alpha
                    .copy_from_slice(&y[self.layout.est_alpha()..self.layout.est_alpha() + n]);
                s.decomp
                    .est_beta
                    .copy_from_slice(&y[self.layout.est_beta()..self.layout.est_beta() + n]);
                let rates = decomp_rhs(&s.decomp, &s.xdot, t, &self.scen.topology, self.scen.beta)
                    .expect("dimensions fixed by layout");
                for i in 0..n {
                    let scaled = 2.0 * self.eta_eff * s.xdot[i];
                    let residual = (rates.true_alpha[i] + rates.true_beta[i] - scaled).abs();
                    diag.split_rate_residual_max = diag.split_rate_residual_max.max(residual);
                }
                dy[self.layout.true_alpha()..self.layout.true_alpha() + n]
                    .copy_from_slice(&rates.true_alpha);
                dy[self.layout.true_beta()..self.layout.true_beta() + n]
                    .copy_from_slice(&rates.true_beta);
                dy[self.layout.est_alpha()..self.layout.est_alpha() + n]
                    .copy_from_slice(&rates.est_alpha);
                dy[self.layout.est_beta()..self.layout.est_beta() + n]
                    .copy_from_slice(&rates.est_beta);
            }
        }

        let lo = self.layout.phat();
        s.power.estimates.copy_from_slice(&y[lo..lo + n]);
        let rates = power_est_rhs(&s.power, p_star, &self.scen.topology)
            .expect("leader checked at scenario level");
        dy[lo..lo + n].copy_from_slice(&rates);

        if self.layout.adversary {
            let a = self.layout.adv();
            s.observer.v.copy_from_slice(&y[a..a + n]);
            s.observer.xi.copy_from_slice(&y[a + n..a + 2 * n]);
            s.observer.phi_prime.copy_from_slice(&y[a + 2 * n..a + 3 * n]);
            s.observer.z.copy_from_slice(&y[a + 3 * n..a + 4 * n]);
            let bundle = ObservableBundle {
                transmitted_estimates: &y[self.layout.transmitted()..self.layout.transmitted() + n],
                power_estimates: &y[self.layout.phat()..self.layout.phat() + n],
                topology: &self.scen.topology,
                beta: self.scen.beta,
                kappa: self.scen.kappa,
            };
            let rates = observer_rhs(&s.observer, &bundle).expect("dimensions fixed by layout");
            dy[a..a + n].copy_from_slice(&rates.v);
            dy[a + n..a + 2 * n].copy_from_slice(&rates.xi);
            dy[a + 2 * n..a + 3 * n].copy_from_slice(&rates.phi_prime);
            dy[a + 3 * n..a + 4 * n].copy_from_slice(&rates.z);
        }
    }
}

/// Per-channel adversary record.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdversaryTrace {
    pub v: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
    pub phi_prime: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub p_inferred: Vec<Vec<f64>>,
}

/// Run metadata frozen into the trace for downstream consumers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub n: usize,
    pub scheme: Scheme,
    pub mode: OperatingMode,
    pub dt: f64,
    pub horizon: f64,
    pub sample_stride: usize,
    pub settle_fraction: f64,
    /// Effective scalings the run used (1 under the baseline scheme).
    pub eta: f64,
    pub sigma: f64,
    pub a1: f64,
    pub floor: f64,
    pub seed: u64,
    pub completed: bool,
}

/// Time-indexed record of a run. Sample-major: `soc[k][i]` is unit i at
/// sample k.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub t: Vec<f64>,
    pub soc: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    /// Baseline scheme only.
    pub xhat: Option<Vec<Vec<f64>>>,
    /// Privacy scheme only. The true sub-states are kept for diagnostics but
    /// never serialized into the CSV column contract.
    pub x_alpha: Option<Vec<Vec<f64>>>,
    pub x_beta: Option<Vec<Vec<f64>>>,
    pub xhat_alpha: Option<Vec<Vec<f64>>>,
    pub xhat_beta: Option<Vec<Vec<f64>>>,
    pub phat: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub p_sigma: Vec<f64>,
    pub p_star: Vec<f64>,
    pub adversary: Option<AdversaryTrace>,
    /// Largest |alpha_rate + beta_rate - 2 eta xdot| seen at any RK4 stage.
    pub split_rate_residual_max: f64,
}

impl Trace {
    pub fn samples(&self) -> usize {
        self.t.len()
    }

    /// Network-average unit state per sample.
    pub fn x_average(&self) -> Vec<f64> {
        self.x
            .iter()
            .map(|row| row.iter().sum::<f64>() / row.len() as f64)
            .collect()
    }

    /// SoC spread max_i S_i - min_i S_i per sample.
    pub fn soc_spread(&self) -> Vec<f64> {
        self.soc
            .iter()
            .map(|row| {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = row.iter().copied().fold(f64::INFINITY, f64::min);
                max - min
            })
            .collect()
    }

    /// The transmitted average-state estimate columns (xhat or alpha).
    pub fn transmitted(&self) -> &Vec<Vec<f64>> {
        match self.meta.scheme {
            Scheme::Baseline => self.xhat.as_ref().expect("baseline trace has xhat"),
            Scheme::Privacy => self
                .xhat_alpha
                .as_ref()
                .expect("privacy trace has alpha estimates"),
        }
    }

    /// CSV header for this trace's (scheme, n, adversary) triple.
    pub fn csv_header(&self) -> String {
        let n = self.meta.n;
        let mut cols: Vec<String> = vec!["t".into()];
        let unit_block = |name: &str| (1..=n).map(move |i| format!("{name}_{i}")).collect::<Vec<_>>();
        cols.extend(unit_block("S"));
        cols.extend(unit_block("x"));
        match self.meta.scheme {
            Scheme::Baseline => cols.extend(unit_block("xhat")),
            Scheme::Privacy => {
                cols.extend(unit_block("xhat_alpha"));
                cols.extend(unit_block("xhat_beta"));
            }
        }
        cols.extend(unit_block("phat"));
        cols.extend(unit_block("p"));
        cols.push("p_sigma".into());
        cols.push("p_star".into());
        if self.adversary.is_some() {
            cols.extend(unit_block("adv_v"));
            cols.extend(unit_block("adv_xi"));
            cols.extend(unit_block("adv_phiprime"));
            cols.extend(unit_block("adv_z"));
            cols.extend(unit_block("adv_pinf"));
        }
        cols.join(",")
    }

    /// Write the trace as CSV. Values print in shortest round-trip form, so
    /// identical runs serialize to identical bytes.
    pub fn write_csv<W: IoWrite>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.csv_header())?;
        let mut line = String::new();
        for k in 0..self.samples() {
            line.clear();
            line.push_str(&format!("{}", self.t[k]));
            let push_block = |line: &mut String, block: &Vec<Vec<f64>>| {
                for v in &block[k] {
                    line.push(',');
                    line.push_str(&format!("{v}"));
                }
            };
            push_block(&mut line, &self.soc);
            push_block(&mut line, &self.x);
            match self.meta.scheme {
                Scheme::Baseline => push_block(&mut line, self.xhat.as_ref().unwrap()),
                Scheme::Privacy => {
                    push_block(&mut line, self.xhat_alpha.as_ref().unwrap());
                    push_block(&mut line, self.xhat_beta.as_ref().unwrap());
                }
            }
            push_block(&mut line, &self.phat);
            push_block(&mut line, &self.p);
            line.push_str(&format!(",{}", self.p_sigma[k]));
            line.push_str(&format!(",{}", self.p_star[k]));
            if let Some(adv) = &self.adversary {
                push_block(&mut line, &adv.v);
                push_block(&mut line, &adv.xi);
                push_block(&mut line, &adv.phi_prime);
                push_block(&mut line, &adv.z);
                push_block(&mut line, &adv.p_inferred);
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Why a run stopped early.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FailureReason {
    SocFloor { unit: usize, soc: f64 },
    SocCeiling { unit: usize, soc: f64 },
    NonFinite,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::SocFloor { unit, soc } => {
                write!(f, "SoC of unit {} fell to {soc} (below its floor)", unit + 1)
            }
            FailureReason::SocCeiling { unit, soc } => {
                write!(f, "SoC of unit {} rose to {soc} (above its ceiling)", unit + 1)
            }
            FailureReason::NonFinite => write!(f, "state became non-finite"),
        }
    }
}

/// Aborted run: the reason, the last valid time, and the partial trace
/// recorded up to that point.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub reason: FailureReason,
    pub t: f64,
    pub partial: Trace,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run aborted after t = {}: {}", self.t, self.reason)
    }
}

impl std::error::Error for RunFailure {}

#[derive(Debug)]
pub enum RunError {
    /// The scenario failed validation; nothing was integrated.
    Invalid(Error),
    /// Integration started but hit a bound violation or diverged.
    Aborted(Box<RunFailure>),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Invalid(e) => write!(f, "{e}"),
            RunError::Aborted(a) => write!(f, "{a}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Invalid(e)
    }
}

/// Integrate a scenario to its horizon.
///
/// Deterministic for a fixed scenario. SoC leaving its configured band or a
/// non-finite state aborts the run and returns the partial trace with a
/// diagnostic; nothing is ever clamped.
pub fn run(scenario: &Scenario) -> std::result::Result<Trace, RunError> {
    let ctx = RunContext::new(scenario)?;
    let (mut y, mut scratch) = ctx.initial_state()?;
    let layout = ctx.layout;
    let n = layout.n;
    let steps = (scenario.horizon / scenario.dt).round().max(1.0) as usize;
    let h = scenario.dt;

    let mut trace = Trace {
        meta: TraceMeta {
            n,
            scheme: scenario.scheme,
            mode: scenario.mode,
            dt: h,
            horizon: steps as f64 * h,
            sample_stride: scenario.sample_stride,
            settle_fraction: scenario.settle_fraction,
            eta: ctx.eta_eff,
            sigma: ctx.sigma_eff,
            a1: ctx.a1,
            floor: ctx.floor,
            seed: scenario.seed,
            completed: false,
        },
        t: Vec::new(),
        soc: Vec::new(),
        x: Vec::new(),
        xhat: matches!(scenario.scheme, Scheme::Baseline).then(Vec::new),
        x_alpha: matches!(scenario.scheme, Scheme::Privacy).then(Vec::new),
        x_beta: matches!(scenario.scheme, Scheme::Privacy).then(Vec::new),
        xhat_alpha: matches!(scenario.scheme, Scheme::Privacy).then(Vec::new),
        xhat_beta: matches!(scenario.scheme, Scheme::Privacy).then(Vec::new),
        phat: Vec::new(),
        p: Vec::new(),
        p_sigma: Vec::new(),
        p_star: Vec::new(),
        adversary: scenario.adversary.enabled.then(AdversaryTrace::default),
        split_rate_residual_max: 0.0,
    };

    let mut diag = StageDiag::default();
    let mut k1 = vec![0.0; y.len()];
    let mut k2 = vec![0.0; y.len()];
    let mut k3 = vec![0.0; y.len()];
    let mut k4 = vec![0.0; y.len()];
    let mut tmp = vec![0.0; y.len()];

    let record = |trace: &mut Trace, t: f64, y: &[f64], ctx: &RunContext| {
        let mut x = vec![0.0; n];
        let mut p = vec![0.0; n];
        let p_star = ctx.algebra(t, y, &mut x, &mut p);
        trace.t.push(t);
        trace.soc.push(y[..n].to_vec());
        trace.x.push(x);
        match scenario.scheme {
            Scheme::Baseline => trace
                .xhat
                .as_mut()
                .unwrap()
                .push(y[layout.xhat()..layout.xhat() + n].to_vec()),
            Scheme::Privacy => {
                trace
                    .x_alpha
                    .as_mut()
                    .unwrap()
                    .push(y[layout.true_alpha()..layout.true_alpha() + n].to_vec());
                trace
                    .x_beta
                    .as_mut()
                    .unwrap()
                    .push(y[layout.true_beta()..layout.true_beta() + n].to_vec());
                trace
                    .xhat_alpha
                    .as_mut()
                    .unwrap()
                    .push(y[layout.est_alpha()..layout.est_alpha() + n].to_vec());
                trace
                    .xhat_beta
                    .as_mut()
                    .unwrap()
                    .push(y[layout.est_beta()..layout.est_beta() + n].to_vec());
            }
        }
        trace
            .phat
            .push(y[layout.phat()..layout.phat() + n].to_vec());
        let p_sigma: f64 = p.iter().sum();
        trace.p.push(p);
        trace.p_sigma.push(p_sigma);
        trace.p_star.push(p_star);
        if let Some(adv) = trace.adversary.as_mut() {
            let a = layout.adv();
            let mut observer = ObserverState::new(n, scenario.adversary.gains)
                .expect("gains validated at scenario level");
            observer.v.copy_from_slice(&y[a..a + n]);
            observer.xi.copy_from_slice(&y[a + n..a + 2 * n]);
            observer.phi_prime.copy_from_slice(&y[a + 2 * n..a + 3 * n]);
            observer.z.copy_from_slice(&y[a + 3 * n..a + 4 * n]);
            let bundle = ObservableBundle {
                transmitted_estimates: &y[layout.transmitted()..layout.transmitted() + n],
                power_estimates: &y[layout.phat()..layout.phat() + n],
                topology: &scenario.topology,
                beta: scenario.beta,
                kappa: scenario.kappa,
            };
            adv.p_inferred
                .push(infer_power(&observer, &bundle, ctx.adv_floor_guess));
            adv.v.push(observer.v);
            adv.xi.push(observer.xi);
            adv.phi_prime.push(observer.phi_prime);
            adv.z.push(observer.z);
        }
    };

    record(&mut trace, 0.0, &y, &ctx);

    for step in 1..=steps {
        let t0 = (step - 1) as f64 * h;
        ctx.rhs(t0, &y, &mut k1, &mut scratch, &mut diag);
        for i in 0..y.len() {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        ctx.rhs(t0 + 0.5 * h, &tmp, &mut k2, &mut scratch, &mut diag);
        for i in 0..y.len() {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        ctx.rhs(t0 + 0.5 * h, &tmp, &mut k3, &mut scratch, &mut diag);
        for i in 0..y.len() {
            tmp[i] = y[i] + h * k3[i];
        }
        ctx.rhs(t0 + h, &tmp, &mut k4, &mut scratch, &mut diag);
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = step as f64 * h;

        // Bound and sanity checks on the accepted state.
        let mut failure = None;
        if y.iter().any(|v| !v.is_finite()) {
            failure = Some(FailureReason::NonFinite);
        } else {
            for i in 0..n {
                let state = BatteryState { soc: y[i] };
                if !state.in_bounds(&ctx.resolved[i]) {
                    failure = Some(if state.soc < ctx.resolved[i].soc_floor {
                        FailureReason::SocFloor {
                            unit: i,
                            soc: state.soc,
                        }
                    } else {
                        FailureReason::SocCeiling {
                            unit: i,
                            soc: state.soc,
                        }
                    });
                    break;
                }
            }
        }
        if let Some(reason) = failure {
            trace.split_rate_residual_max = diag.split_rate_residual_max;
            let t_last = trace.t.last().copied().unwrap_or(0.0);
            return Err(RunError::Aborted(Box::new(RunFailure {
                reason,
                t: t_last,
                partial: trace,
            })));
        }

        if step % scenario.sample_stride == 0 || step == steps {
            record(&mut trace, t, &y, &ctx);
        }
    }

    trace.split_rate_residual_max = diag.split_rate_residual_max;
    trace.meta.completed = true;
    Ok(trace)
}

/// Scenario-level summary statistics over the trailing `settle_fraction` of
/// a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub settle_start_t: f64,
    pub soc_spread_final: f64,
    pub soc_spread_sup_settled: f64,
    /// Whether the spread never increased (beyond rounding) over the settled
    /// window.
    pub soc_spread_monotone_settled: bool,
    pub soc_spread_max_increase: f64,
    /// sup |p_sigma - p*| over the settled window, absolute and relative to
    /// sup |p*| over the whole trace.
    pub power_tracking_abs_error: f64,
    pub power_tracking_rel_error: f64,
    pub sup_abs_p_star: f64,
    /// sup over the settled window of max_i |estimate_i - eta x_a(t)|
    /// (eta = 1 under the baseline scheme).
    pub state_estimator_sup_error: f64,
    /// sup over the settled window of max_i |phat_i - sigma p*(t)/n|.
    pub power_estimator_sup_error: f64,
    /// max over all samples of |mean(estimates) - eta x_a| / |eta x_a|
    /// (all 2n sub-estimates under the privacy scheme).
    pub conservation_max_rel_residual: f64,
    pub split_rate_residual_max: f64,
    /// Whether the a1/2 floor was ever the active denominator inside the
    /// settled window (it must not be, in an accepted run).
    pub floor_active_in_settled_window: bool,
    pub leakage: Option<Leakage>,
}

/// Compute run metrics. `settle_fraction` is the trailing fraction of the
/// sample range treated as settled.
pub fn metrics(trace: &Trace, settle_fraction: f64) -> Result<RunMetrics> {
    let samples = trace.samples();
    if samples == 0 {
        return Err(Error::EmptyWindow);
    }
    let t0 = trace.t[0];
    let t1 = trace.t[samples - 1];
    let settle_start_t = t1 - settle_fraction * (t1 - t0);
    let settled: Vec<usize> = (0..samples)
        .filter(|&k| trace.t[k] >= settle_start_t)
        .collect();
    if settled.is_empty() {
        return Err(Error::EmptyWindow);
    }

    let spread = trace.soc_spread();
    let soc_spread_final = *spread.last().unwrap();
    let soc_spread_sup_settled = settled
        .iter()
        .map(|&k| spread[k])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut max_increase = 0.0f64;
    for w in settled.windows(2) {
        max_increase = max_increase.max(spread[w[1]] - spread[w[0]]);
    }
    // Rounding-scale slack: estimator ripple moves the spread by a few 1e-9
    // per step without being a real increase.
    let soc_spread_monotone_settled = max_increase <= 1e-7;

    let sup_abs_p_star = trace
        .p_star
        .iter()
        .map(|p| p.abs())
        .fold(0.0f64, f64::max);
    let power_tracking_abs_error = settled
        .iter()
        .map(|&k| (trace.p_sigma[k] - trace.p_star[k]).abs())
        .fold(0.0f64, f64::max);
    let power_tracking_rel_error = if sup_abs_p_star > 0.0 {
        power_tracking_abs_error / sup_abs_p_star
    } else {
        power_tracking_abs_error
    };

    let x_avg = trace.x_average();
    let eta = trace.meta.eta;
    let transmitted = trace.transmitted();
    let mut state_estimator_sup_error = 0.0f64;
    let mut floor_active = false;
    for &k in &settled {
        let target = eta * x_avg[k];
        for i in 0..trace.meta.n {
            state_estimator_sup_error =
                state_estimator_sup_error.max((transmitted[k][i] - target).abs());
            if transmitted[k][i] / eta <= trace.meta.floor {
                floor_active = true;
            }
        }
        if let Scheme::Privacy = trace.meta.scheme {
            let beta_est = trace.xhat_beta.as_ref().unwrap();
            for i in 0..trace.meta.n {
                state_estimator_sup_error =
                    state_estimator_sup_error.max((beta_est[k][i] - target).abs());
            }
        }
    }

    let n = trace.meta.n as f64;
    let sigma = trace.meta.sigma;
    let mut power_estimator_sup_error = 0.0f64;
    for &k in &settled {
        let target = sigma * trace.p_star[k] / n;
        for v in &trace.phat[k] {
            power_estimator_sup_error = power_estimator_sup_error.max((v - target).abs());
        }
    }

    // Conservation holds at every sample, not just the settled ones.
    let mut conservation_max_rel_residual = 0.0f64;
    for k in 0..samples {
        let target = eta * x_avg[k];
        let mean_est = match trace.meta.scheme {
            Scheme::Baseline => {
                let row = &trace.xhat.as_ref().unwrap()[k];
                row.iter().sum::<f64>() / n
            }
            Scheme::Privacy => {
                let a = &trace.xhat_alpha.as_ref().unwrap()[k];
                let b = &trace.xhat_beta.as_ref().unwrap()[k];
                (a.iter().sum::<f64>() + b.iter().sum::<f64>()) / (2.0 * n)
            }
        };
        let rel = (mean_est - target).abs() / target.abs().max(f64::MIN_POSITIVE);
        conservation_max_rel_residual = conservation_max_rel_residual.max(rel);
    }

    let leakage = match &trace.adversary {
        Some(adv) => Some(leakage_metrics(
            &trace.t,
            &trace.x,
            &adv.xi,
            &trace.p,
            &adv.p_inferred,
            settle_fraction,
        )?),
        None => None,
    };

    Ok(RunMetrics {
        settle_start_t,
        soc_spread_final,
        soc_spread_sup_settled,
        soc_spread_monotone_settled,
        soc_spread_max_increase: max_increase,
        power_tracking_abs_error,
        power_tracking_rel_error,
        sup_abs_p_star,
        state_estimator_sup_error,
        power_estimator_sup_error,
        conservation_max_rel_residual,
        split_rate_residual_max: trace.split_rate_residual_max,
        floor_active_in_settled_window: floor_active,
        leakage,
    })
}

/// Parameter axis a sweep can move along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Beta,
    Kappa,
    Eta,
    Sigma,
    Dt,
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(SweepParameter::Beta),
            "kappa" => Ok(SweepParameter::Kappa),
            "eta" => Ok(SweepParameter::Eta),
            "sigma" => Ok(SweepParameter::Sigma),
            "h" | "dt" => Ok(SweepParameter::Dt),
            other => Err(Error::InvalidScenario(format!(
                "unknown sweep parameter '{other}' (expected beta, kappa, eta, sigma or h)"
            ))),
        }
    }
}

pub fn apply_parameter(scenario: &mut Scenario, parameter: SweepParameter, value: f64) {
    match parameter {
        SweepParameter::Beta => scenario.beta = value,
        SweepParameter::Kappa => scenario.kappa = value,
        SweepParameter::Eta => scenario.eta = value,
        SweepParameter::Sigma => scenario.sigma = value,
        SweepParameter::Dt => scenario.dt = value,
    }
}

/// One sweep row: the parameter value, and either metrics or the failure.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub status: String,
    pub metrics: Option<RunMetrics>,
}

/// Run the scenario once per value with matched seeds. A failed run is
/// recorded in its row and the sweep continues.
pub fn sweep(base: &Scenario, parameter: SweepParameter, values: &[f64]) -> Vec<SweepRow> {
    values
        .iter()
        .map(|&value| {
            let mut scen = base.clone();
            apply_parameter(&mut scen, parameter, value);
            match run(&scen) {
                Ok(trace) => match metrics(&trace, scen.settle_fraction) {
                    Ok(m) => SweepRow {
                        value,
                        status: "ok".into(),
                        metrics: Some(m),
                    },
                    Err(e) => SweepRow {
                        value,
                        status: format!("failed: {e}"),
                        metrics: None,
                    },
                },
                Err(e) => SweepRow {
                    value,
                    status: format!("failed: {e}"),
                    metrics: None,
                },
            }
        })
        .collect()
}
