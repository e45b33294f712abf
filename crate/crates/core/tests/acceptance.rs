//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with the measured numbers (run with `--nocapture` to see
//! them). Quantitative bands that are not analytic were frozen from a
//! calibration run of `examples/diagnostics.rs` at seed 42 and are asserted
//! with a +/-10% reproducibility margin.

use bess_core::config::preset;
use bess_core::engine::{metrics, rk4_step, run};
use bess_core::estimators::{dac_rhs, power_est_rhs, DacState, PowerEstState, SplitConfig};
use bess_core::linalg::{jacobi_eigh, Matrix};
use bess_core::scenario::Scheme;
use bess_core::topology::{decomposed_laplacian, spectral_summary, validate_connected, Topology};
use bess_core::Error;

// Frozen calibration values (seed 42, six-unit discharge presets).
const FROZEN_BASELINE_ATTACK_WORST: f64 = 5.037250e-5;
const FROZEN_PRIVACY_ATTACK_WORST: f64 = 3.633890;
const FROZEN_PRIVACY_ATTACK_BEST: f64 = 2.458248;
/// Sanity bands: the plain channel must leak to within a few percent, the
/// decomposed channel must stay off by tens of percent at least.
const LEAK_BAND: f64 = 0.05;
const PROTECT_BAND: f64 = 0.10;

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn uniform(state: &mut u64) -> f64 {
    (splitmix(state) >> 11) as f64 * (1.0 / 9007199254740992.0)
}

/// Random connected graph: a random spanning tree plus extra random edges.
fn random_connected(n: usize, seed: u64, leaders: &[usize]) -> Topology {
    let mut s = seed;
    let mut edges = Vec::new();
    for i in 1..n {
        let j = (splitmix(&mut s) as usize) % i;
        edges.push((j, i));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if uniform(&mut s) < 0.3 {
                edges.push((i, j));
            }
        }
    }
    Topology::from_edges(n, &edges, leaders).unwrap()
}

/// exp(scale * M) v for symmetric M, via the eigendecomposition. Independent
/// of the RK4 integration path it is used to check.
fn expm_times_vec(m: &Matrix, scale: f64, v: &[f64]) -> Vec<f64> {
    let e = jacobi_eigh(m, 1e-14, 512).unwrap();
    let n = m.n();
    // w = Q^T v
    let mut w = vec![0.0; n];
    for (k, wk) in w.iter_mut().enumerate() {
        for i in 0..n {
            *wk += e.vectors.get(i, k) * v[i];
        }
    }
    for (k, wk) in w.iter_mut().enumerate() {
        *wk *= (scale * e.values[k]).exp();
    }
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        for k in 0..n {
            *o += e.vectors.get(i, k) * w[k];
        }
    }
    out
}

#[test]
fn criterion_01_discharge_replication() {
    let scen = preset("discharge_paper").unwrap();
    let t0 = std::time::Instant::now();
    let trace = run(&scen).expect("discharge preset must complete");
    let wall = t0.elapsed().as_secs_f64();
    let m = metrics(&trace, scen.settle_fraction).unwrap();

    assert!(
        m.soc_spread_final <= 0.02,
        "criterion 01: final SoC spread {} exceeds 0.02",
        m.soc_spread_final
    );
    assert!(
        m.power_tracking_rel_error <= 0.02,
        "criterion 01: relative tracking error {} exceeds 2%",
        m.power_tracking_rel_error
    );
    assert!(
        m.soc_spread_monotone_settled,
        "criterion 01: SoC spread increased by {} inside the settled window",
        m.soc_spread_max_increase
    );
    assert!(
        !m.floor_active_in_settled_window,
        "criterion 01: allocation floor was active in the settled window"
    );
    assert!(wall <= 10.0, "criterion 01: runtime {wall:.2} s exceeds 10 s");
    println!(
        "criterion 01 (discharge replication): PASS — spread_final = {:.4} <= 0.02, \
         tracking = {:.3}% <= 2%, spread monotone over settled window \
         (sup over window {:.4}), runtime = {:.3} s",
        m.soc_spread_final,
        100.0 * m.power_tracking_rel_error,
        m.soc_spread_sup_settled,
        wall
    );
}

#[test]
fn criterion_02_charge_replication() {
    let scen = preset("charge_paper").unwrap();
    let trace = run(&scen).expect("charge preset must complete");
    let m = metrics(&trace, scen.settle_fraction).unwrap();

    assert!(
        m.soc_spread_final <= 0.02,
        "criterion 02: final SoC spread {} exceeds 0.02",
        m.soc_spread_final
    );
    assert!(
        m.power_tracking_rel_error <= 0.02,
        "criterion 02: relative tracking error {} exceeds 2%",
        m.power_tracking_rel_error
    );
    assert!(
        m.soc_spread_monotone_settled,
        "criterion 02: SoC spread increased by {} inside the settled window",
        m.soc_spread_max_increase
    );
    // Sign convention: charging power is never positive once settled.
    let mut max_p = f64::NEG_INFINITY;
    for (t, row) in trace.t.iter().zip(&trace.p) {
        if *t >= m.settle_start_t {
            for &p in row {
                max_p = max_p.max(p);
            }
        }
    }
    assert!(
        max_p <= 0.0,
        "criterion 02: positive allocation {max_p} during charging"
    );
    println!(
        "criterion 02 (charge replication): PASS — spread_final = {:.4} <= 0.02, \
         tracking = {:.3}% <= 2%, max settled p_i = {:.3} W <= 0",
        m.soc_spread_final,
        100.0 * m.power_tracking_rel_error,
        max_p
    );
}

#[test]
fn criterion_03_exact_conservation() {
    let scen = preset("discharge_paper").unwrap();
    let trace = run(&scen).unwrap();
    let m = metrics(&trace, scen.settle_fraction).unwrap();

    // Decomposition identity mean of the 2n sub-estimates = eta x_a(t),
    // at every recorded sample.
    assert!(
        m.conservation_max_rel_residual <= 1e-8,
        "criterion 03: conservation residual {} exceeds 1e-8",
        m.conservation_max_rel_residual
    );
    // Split-rate identity at every RK4 stage of the whole run; the beta rate
    // is constructed as the exact complement, so the residual is at most one
    // rounding of the final addition.
    assert!(
        trace.split_rate_residual_max <= 1e-10,
        "criterion 03: split-rate residual {} exceeds rounding scale",
        trace.split_rate_residual_max
    );
    println!(
        "criterion 03 (exact conservation): PASS — max relative conservation residual = {:.3e} \
         <= 1e-8 over {} samples, max split-rate residual = {:.3e} over all RK4 stages",
        m.conservation_max_rel_residual,
        trace.samples(),
        trace.split_rate_residual_max
    );
}

#[test]
fn criterion_04_beta_error_scaling() {
    let mut base = preset("discharge_paper").unwrap();
    base.dt = 5e-4; // keeps beta = 600 inside the RK4 stability region
    let betas = [75.0, 150.0, 300.0, 600.0];
    // Matched seeds: only beta changes between runs. The measured quantity is
    // the settled sup of max_i |alpha estimate_i - eta x_a(t)|.
    let mut errors = Vec::new();
    for &beta in &betas {
        let mut scen = base.clone();
        scen.beta = beta;
        let trace = run(&scen).unwrap_or_else(|e| panic!("criterion 04: beta = {beta}: {e}"));
        let x_avg = trace.x_average();
        let start = {
            let t1 = *trace.t.last().unwrap();
            t1 - scen.settle_fraction * (t1 - trace.t[0])
        };
        let alpha = trace.xhat_alpha.as_ref().unwrap();
        let mut sup = 0.0f64;
        for k in 0..trace.samples() {
            if trace.t[k] < start {
                continue;
            }
            let target = scen.eta * x_avg[k];
            for &v in &alpha[k] {
                sup = sup.max((v - target).abs());
            }
        }
        errors.push(sup);
    }
    for (w, pair) in errors.windows(2).enumerate() {
        assert!(
            pair[1] <= pair[0],
            "criterion 04: error increased from beta = {} ({}) to beta = {} ({})",
            betas[w],
            pair[0],
            betas[w + 1],
            pair[1]
        );
    }
    let ratio = errors[3] / errors[0];
    assert!(
        ratio <= 0.55,
        "criterion 04: error(600)/error(75) = {ratio} exceeds 0.55"
    );
    println!(
        "criterion 04 (beta error scaling): PASS — sup errors {:?} non-increasing, \
         error(600)/error(75) = {:.4} <= 0.55",
        errors, ratio
    );
}

#[test]
fn criterion_05_static_dac_matches_matrix_exponential() {
    let beta = 1.0;
    let mut worst_avg = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for n in 3..=8usize {
        let topo = random_connected(n, 1000 + n as u64, &[]);
        assert!(validate_connected(&topo));
        let l = topo.laplacian();
        let spec = spectral_summary(&l, 1e-9).unwrap();
        let mut s = 77u64 * n as u64;
        let x0: Vec<f64> = (0..n).map(|_| 1.0 + 9.0 * uniform(&mut s)).collect();
        let mean = x0.iter().sum::<f64>() / n as f64;

        let horizon = 25.0 / (beta * spec.fiedler);
        let h = 0.02 / (beta * spec.largest());
        let steps = (horizon / h).ceil() as usize;
        let mut y = x0.clone();
        let xdot = vec![0.0; n];
        let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| {
            let state = DacState {
                estimates: y.to_vec(),
            };
            let rates = dac_rhs(&state, &xdot, &topo, beta).unwrap();
            dy.copy_from_slice(&rates);
        };
        for k in 0..steps {
            rk4_step(&mut f, k as f64 * h, h, &mut y);
        }
        let t_end = steps as f64 * h;
        // Independent route: closed-form solution exp(-beta L t) x0.
        let oracle = expm_times_vec(&l, -beta * t_end, &x0);
        for i in 0..n {
            let avg_err = (y[i] - mean).abs();
            let oracle_err = (y[i] - oracle[i]).abs();
            worst_avg = worst_avg.max(avg_err);
            worst_oracle = worst_oracle.max(oracle_err);
            assert!(
                avg_err <= 1e-6,
                "criterion 05: n = {n}, unit {i}: |estimate - exact average| = {avg_err}"
            );
            assert!(
                oracle_err <= 1e-8,
                "criterion 05: n = {n}, unit {i}: |estimate - matrix exponential| = {oracle_err}"
            );
        }
    }
    println!(
        "criterion 05 (static consensus vs matrix exponential): PASS — worst |est - average| \
         = {worst_avg:.3e} <= 1e-6, worst |est - oracle| = {worst_oracle:.3e} <= 1e-8 \
         over random connected graphs n = 3..8"
    );
}

#[test]
fn criterion_06_leader_follower_convergence() {
    let kappa = 210.0;
    let sigma = 4.0;
    let p_star = 4200.0;

    // Scalar case: the 20/kappa settling bound is exact (e^-20 of the
    // initial offset).
    {
        let topo = Topology::from_edges(1, &[], &[0]).unwrap();
        let target = sigma * p_star;
        let mut y = vec![0.0];
        let h = 1e-5f64;
        let steps = (20.0 / kappa / h).round() as usize;
        let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| {
            let state = PowerEstState {
                estimates: y.to_vec(),
                sigma,
                kappa,
            };
            dy.copy_from_slice(&power_est_rhs(&state, p_star, &topo).unwrap());
        };
        for k in 0..steps {
            rk4_step(&mut f, k as f64 * h, h, &mut y);
        }
        let err = (y[0] - target).abs();
        assert!(
            err <= 1e-6 * target.abs(),
            "criterion 06: scalar estimator error {err} after 20/kappa"
        );
    }

    // Graph case: the same bound holds in time normalized by the smallest
    // eigenvalue of L + B (the scalar case has that eigenvalue equal to 1).
    let mut worst_rel = 0.0f64;
    for n in 2..=8usize {
        let topo = random_connected(n, 2000 + n as u64, &[0]);
        let l = topo.laplacian();
        let mut lb = l.clone();
        lb.set(0, 0, lb.get(0, 0) + 1.0);
        let eig = jacobi_eigh(&lb, 1e-13, 512).unwrap();
        let lambda_min = eig.values[0];
        let lambda_max = *eig.values.last().unwrap();
        assert!(lambda_min > 0.0);

        let target = sigma * p_star / n as f64;
        let horizon = 20.0 / (kappa * lambda_min);
        let h = 0.02 / (kappa * lambda_max);
        let steps = (horizon / h).ceil() as usize;
        let mut y = vec![0.0; n];
        let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| {
            let state = PowerEstState {
                estimates: y.to_vec(),
                sigma,
                kappa,
            };
            dy.copy_from_slice(&power_est_rhs(&state, p_star, &topo).unwrap());
        };
        for k in 0..steps {
            rk4_step(&mut f, k as f64 * h, h, &mut y);
        }
        for (i, &v) in y.iter().enumerate() {
            let rel = (v - target).abs() / target.abs();
            worst_rel = worst_rel.max(rel);
            assert!(
                rel <= 1e-6,
                "criterion 06: n = {n}, unit {i}: relative error {rel} after 20/(kappa lambda_min)"
            );
        }
    }

    // sigma = 1 reproduces the plain estimator bit for bit along a whole
    // trajectory (textbook transcription as the second route).
    {
        let topo = random_connected(5, 3000, &[2]);
        let n = 5;
        let p_a = p_star / n as f64;
        let h = 1e-4;
        let mut via_impl = vec![0.0; n];
        let mut via_plain = vec![0.0; n];
        let mut f_impl = |_t: f64, y: &[f64], dy: &mut [f64]| {
            let state = PowerEstState {
                estimates: y.to_vec(),
                sigma: 1.0,
                kappa,
            };
            dy.copy_from_slice(&power_est_rhs(&state, p_star, &topo).unwrap());
        };
        let mut f_plain = |_t: f64, y: &[f64], dy: &mut [f64]| {
            for i in 0..n {
                let mut acc = 0.0;
                for &j in topo.neighbors(i) {
                    acc += y[i] - y[j];
                }
                if topo.is_leader(i) {
                    acc += y[i] - 1.0 * p_a;
                }
                dy[i] = -kappa * acc;
            }
        };
        for k in 0..2000 {
            rk4_step(&mut f_impl, k as f64 * h, h, &mut via_impl);
            rk4_step(&mut f_plain, k as f64 * h, h, &mut via_plain);
        }
        for i in 0..n {
            assert_eq!(
                via_impl[i].to_bits(),
                via_plain[i].to_bits(),
                "criterion 06: sigma = 1 trajectory diverged from the plain form at unit {i}"
            );
        }
    }

    println!(
        "criterion 06 (leader-follower estimator): PASS — scalar error <= 1e-6 |sigma p*| at \
         t = 20/kappa, graph errors <= 1e-6 (worst {worst_rel:.3e}) at rate-normalized time, \
         sigma = 1 bit-identical to the plain estimator"
    );
}

#[test]
fn criterion_07_attack_comparison() {
    let baseline = preset("attack_baseline").unwrap();
    let privacy = preset("attack_privacy").unwrap();
    assert_eq!(baseline.seed, privacy.seed, "matched seeds required");
    let tb = run(&baseline).unwrap();
    let tp = run(&privacy).unwrap();
    let mb = metrics(&tb, baseline.settle_fraction).unwrap();
    let mp = metrics(&tp, privacy.settle_fraction).unwrap();
    let lb = mb.leakage.expect("adversary enabled");
    let lp = mp.leakage.expect("adversary enabled");

    // Strict per-unit ordering: the plain channel reconstructs every unit's
    // power better than the decomposed channel allows.
    for i in 0..baseline.n() {
        assert!(
            lb.power_rel_sup_error[i] < lp.power_rel_sup_error[i],
            "criterion 07: unit {} ordering violated ({} vs {})",
            i + 1,
            lb.power_rel_sup_error[i],
            lp.power_rel_sup_error[i]
        );
    }
    assert!(
        lb.worst_rel_sup_error <= LEAK_BAND,
        "criterion 07: baseline attack error {} above the leak band {LEAK_BAND}",
        lb.worst_rel_sup_error
    );
    assert!(
        lp.power_rel_sup_error
            .iter()
            .all(|&e| e >= PROTECT_BAND),
        "criterion 07: privacy attack errors {:?} dip below the protection band {PROTECT_BAND}",
        lp.power_rel_sup_error
    );
    // Reproducibility against the frozen calibration numbers.
    assert!(
        (lb.worst_rel_sup_error / FROZEN_BASELINE_ATTACK_WORST - 1.0).abs() <= 0.10,
        "criterion 07: baseline worst error {} drifted beyond 10% of frozen {}",
        lb.worst_rel_sup_error,
        FROZEN_BASELINE_ATTACK_WORST
    );
    assert!(
        (lp.worst_rel_sup_error / FROZEN_PRIVACY_ATTACK_WORST - 1.0).abs() <= 0.10,
        "criterion 07: privacy worst error {} drifted beyond 10% of frozen {}",
        lp.worst_rel_sup_error,
        FROZEN_PRIVACY_ATTACK_WORST
    );
    let best = lp
        .power_rel_sup_error
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    assert!(
        (best / FROZEN_PRIVACY_ATTACK_BEST - 1.0).abs() <= 0.10,
        "criterion 07: privacy best-case error {} drifted beyond 10% of frozen {}",
        best,
        FROZEN_PRIVACY_ATTACK_BEST
    );
    // Observer boundedness: with bounded transmissions every observer state
    // stays bounded over the horizon on both channels.
    for trace in [&tb, &tp] {
        let adv = trace.adversary.as_ref().unwrap();
        let sup = [&adv.v, &adv.xi, &adv.phi_prime, &adv.z]
            .iter()
            .flat_map(|block| block.iter().flatten())
            .fold(0.0f64, |acc, &v| acc.max(v.abs()));
        assert!(
            sup.is_finite() && sup < 1e9,
            "criterion 07: observer states reached {sup:e}"
        );
    }
    println!(
        "criterion 07 (attack comparison): PASS — per-unit ordering strict; plain channel worst \
         = {:.3e} <= {LEAK_BAND}; decomposed channel worst = {:.3} / best = {:.3} >= {PROTECT_BAND}; \
         both within 10% of frozen calibration",
        lb.worst_rel_sup_error, lp.worst_rel_sup_error, best
    );
}

/// Degeneracy equivalence as specified: the privacy pipeline at
/// eta = sigma = 1, zero split amplitude and a symmetric initial split is
/// required to match the baseline pipeline's trace to 1e-9 sup norm.
///
/// The power-estimator halves do coincide bit for bit (sigma = 1 is the same
/// equation), and the allocation law is shared code. The decomposed
/// average-state estimator, however, is a structurally different linear
/// system even under the degenerate split: the twin sub-state halves the
/// effective consensus gain (quasi-steady alpha dynamics behave like the
/// plain estimator at beta/2), so the transients differ at the 1e2 scale and
/// the closed-loop SoC at the 1e-5 scale. The assertion is kept at the
/// specified 1e-9 and this criterion documents the measured gap when it
/// fails.
#[test]
fn criterion_08_degeneracy_equivalence() {
    let mut degenerate = preset("discharge_paper").unwrap();
    degenerate.eta = 1.0;
    degenerate.sigma = 1.0;
    degenerate.split = SplitConfig::degenerate();
    let mut baseline = degenerate.clone();
    baseline.scheme = Scheme::Baseline;

    let dt = run(&degenerate).unwrap();
    let bt = run(&baseline).unwrap();
    let sup = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| -> f64 {
        a.iter()
            .zip(b)
            .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs()))
            .fold(0.0f64, f64::max)
    };
    let soc_gap = sup(&dt.soc, &bt.soc);
    let p_gap = sup(&dt.p, &bt.p);
    let phat_gap = sup(&dt.phat, &bt.phat);
    let est_gap = sup(dt.xhat_alpha.as_ref().unwrap(), bt.xhat.as_ref().unwrap());
    let worst = soc_gap.max(p_gap).max(phat_gap).max(est_gap);

    println!(
        "criterion 08 (degeneracy equivalence): measured sup gaps — soc {soc_gap:.3e}, \
         p {p_gap:.3e}, phat {phat_gap:.3e}, state estimator {est_gap:.3e}; requirement 1e-9"
    );
    assert!(
        worst <= 1e-9,
        "criterion 08: FAIL — degenerate privacy trace differs from the baseline trace by \
         {worst:.3e} sup norm (soc {soc_gap:.3e}, p {p_gap:.3e}, phat {phat_gap:.3e}, \
         state estimator {est_gap:.3e}); the decomposed estimator is not trajectory-equivalent \
         to the plain one even under a symmetric split"
    );
    println!("criterion 08 (degeneracy equivalence): PASS — worst gap {worst:.3e} <= 1e-9");
}

#[test]
fn criterion_09_integrator_self_convergence() {
    // Step-halving on the discharge scenario; the base step sits inside the
    // stability region (beta lambda_max(L') h < 2.785).
    let base = 8e-4;
    let endpoint = |dt: f64| -> Vec<f64> {
        let mut s = preset("discharge_paper").unwrap();
        s.dt = dt;
        s.sample_stride = usize::MAX; // record first and last samples only
        let trace = run(&s).unwrap();
        let k = trace.samples() - 1;
        let mut y = trace.soc[k].clone();
        y.extend_from_slice(&trace.xhat_alpha.as_ref().unwrap()[k]);
        y.extend_from_slice(&trace.xhat_beta.as_ref().unwrap()[k]);
        y.extend_from_slice(&trace.phat[k]);
        y
    };
    let yh = endpoint(base);
    let yh2 = endpoint(base / 2.0);
    let yh4 = endpoint(base / 4.0);
    let norm = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let e1 = norm(&yh, &yh2);
    let e2 = norm(&yh2, &yh4);
    let ratio = e1 / e2;
    assert!(
        (8.0..=32.0).contains(&ratio),
        "criterion 09: halving ratio {ratio} outside [8, 32] (e1 = {e1:.3e}, e2 = {e2:.3e})"
    );
    println!(
        "criterion 09 (integrator self-convergence): PASS — endpoint change ratio {ratio:.1} \
         in [8, 32] at base h = {base:.1e} (order-4 behavior)"
    );
}

#[test]
fn criterion_10_spectral_checks() {
    // L' row sums are exactly zero and lambda_2' > 0 for every preset
    // topology and the named shapes.
    let mut topologies = vec![
        preset("discharge_paper").unwrap().topology,
        preset("charge_paper").unwrap().topology,
        preset("attack_baseline").unwrap().topology,
        preset("attack_privacy").unwrap().topology,
        Topology::ring(6, &[0]).unwrap(),
        Topology::path(5, &[0]).unwrap(),
        Topology::complete(4, &[0]).unwrap(),
    ];
    let mut fiedlers = Vec::new();
    for topo in topologies.drain(..) {
        let lp = decomposed_laplacian(&topo.laplacian());
        for i in 0..lp.n() {
            assert_eq!(lp.row_sum(i), 0.0, "criterion 10: L' row {i} sum not exactly zero");
        }
        let s = spectral_summary(&lp, 1e-9).unwrap();
        assert!(s.fiedler > 0.0);
        fiedlers.push(s.fiedler);
    }

    // Eigensolver residual on random symmetric matrices.
    let mut worst = 0.0f64;
    for n in [4usize, 8, 12, 16, 24] {
        let mut s = 4000 + n as u64;
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = 20.0 * uniform(&mut s) - 10.0;
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        let e = jacobi_eigh(&m, 1e-14, 512).unwrap();
        let r = e.reconstruct();
        let mut diff = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                diff += (m.get(i, j) - r.get(i, j)).powi(2);
            }
        }
        let rel = diff.sqrt() / m.frobenius_norm();
        worst = worst.max(rel);
        assert!(
            rel <= 1e-9,
            "criterion 10: reconstruction residual {rel} at n = {n}"
        );
    }

    // The ring-with-chord preset keeps lambda_2 = 1, so lambda_2' has the
    // block closed form (3 - sqrt 5)/2.
    let expected = (3.0 - 5.0f64.sqrt()) / 2.0;
    assert!((fiedlers[0] - expected).abs() < 1e-9);

    // Disconnection is reported distinctly, agreeing with traversal.
    let split_graph = Topology::from_edges(4, &[(0, 1), (2, 3)], &[]).unwrap();
    assert!(!validate_connected(&split_graph));
    assert!(matches!(
        spectral_summary(&split_graph.laplacian(), 1e-9),
        Err(Error::NoSpectralGap { .. })
    ));

    println!(
        "criterion 10 (spectral checks): PASS — L' row sums exactly 0, lambda_2' > 0 for all \
         preset topologies (preset value {:.6}), eigensolver residual <= 1e-9 \
         (worst {worst:.3e})",
        fiedlers[0]
    );
}
