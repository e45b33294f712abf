//! Prints the spectral constants, replication metrics, sweep behavior and
//! eavesdropper errors for the embedded presets. Useful when re-tuning
//! preset horizons or checking a platform's numeric behavior.
//!
//! Run with: cargo run --release -p bess-core --example diagnostics

use bess_core::config::{self, preset};
use bess_core::engine::{self, metrics, run, SweepParameter};
use bess_core::estimators::SplitConfig;
use bess_core::scenario::Scheme;
use bess_core::topology::{decomposed_laplacian, spectral_summary};

fn main() {
    let discharge = preset("discharge_paper").unwrap();

    // Spectral constants of the preset topology.
    let l = discharge.topology.laplacian();
    let s = spectral_summary(&l, 1e-9).unwrap();
    println!("L:  lambda_2 = {:.12}, lambda_max = {:.12}", s.fiedler, s.largest());
    let lp = decomposed_laplacian(&l);
    let sp = spectral_summary(&lp, 1e-9).unwrap();
    println!("L': lambda_2 = {:.12}, lambda_max = {:.12}", sp.fiedler, sp.largest());
    let mut lb = l.clone();
    for (i, &is_leader) in discharge.topology.leaders().iter().enumerate() {
        if is_leader {
            lb.set(i, i, lb.get(i, i) + 1.0);
        }
    }
    let slb = spectral_summary(&lb, 1e-12).unwrap();
    println!(
        "L+B: lambda_min = {:.12}, lambda_max = {:.12}",
        slb.eigenvalues[0], slb.largest()
    );
    println!(
        "rk4 real-axis stability bound: beta * lambda_max(L') * h < 2.785 -> h < {:.6e} at beta = {}",
        2.785 / (discharge.beta * sp.largest()),
        discharge.beta
    );

    for name in ["discharge_paper", "charge_paper"] {
        let scen = preset(name).unwrap();
        let t0 = std::time::Instant::now();
        match run(&scen) {
            Ok(trace) => {
                let wall = t0.elapsed();
                let m = metrics(&trace, scen.settle_fraction).unwrap();
                let last = trace.samples() - 1;
                let soc_min = trace.soc[last].iter().copied().fold(f64::INFINITY, f64::min);
                let soc_max = trace.soc[last]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                println!("\n== {name} ==  ({} samples, {:.0} ms)", trace.samples(), wall.as_secs_f64() * 1e3);
                println!("  spread_final            = {:.6}", m.soc_spread_final);
                println!("  spread_sup_settled      = {:.6}", m.soc_spread_sup_settled);
                println!("  spread monotone settled = {} (max increase {:.3e})", m.soc_spread_monotone_settled, m.soc_spread_max_increase);
                println!("  tracking rel error      = {:.6e}", m.power_tracking_rel_error);
                println!("  state est sup err       = {:.6e}", m.state_estimator_sup_error);
                println!("  power est sup err       = {:.6e}", m.power_estimator_sup_error);
                println!("  conservation rel resid  = {:.6e}", m.conservation_max_rel_residual);
                println!("  split rate resid        = {:.6e}", m.split_rate_residual_max);
                println!("  floor active in window  = {}", m.floor_active_in_settled_window);
                println!("  final soc range         = [{soc_min:.4}, {soc_max:.4}]");
                if name == "charge_paper" {
                    let start = m.settle_start_t;
                    let max_p = trace
                        .t
                        .iter()
                        .zip(&trace.p)
                        .filter(|(t, _)| **t >= start)
                        .flat_map(|(_, row)| row.iter().copied())
                        .fold(f64::NEG_INFINITY, f64::max);
                    println!("  max p_i in settled window = {max_p:.6e}");
                }
            }
            Err(e) => println!("\n== {name} == FAILED: {e}"),
        }
    }

    // Beta sweep on the discharge preset at a step small enough for beta=600.
    let mut sweep_base = preset("discharge_paper").unwrap();
    sweep_base.dt = 5e-4;
    let rows = engine::sweep(&sweep_base, SweepParameter::Beta, &[75.0, 150.0, 300.0, 600.0]);
    println!("\n== beta sweep (dt = 5e-4) ==");
    for row in &rows {
        match &row.metrics {
            Some(m) => println!(
                "  beta = {:>5}: state est sup err = {:.6e}, tracking = {:.3e}",
                row.value, m.state_estimator_sup_error, m.power_tracking_rel_error
            ),
            None => println!("  beta = {:>5}: {}", row.value, row.status),
        }
    }

    // Step-halving self-convergence on the discharge scenario. Base steps
    // must respect the beta * lambda_max(L') stability bound printed above.
    println!("\n== rk4 self-convergence ==");
    for base in [1.2e-3, 1.0e-3, 8e-4] {
        let endpoint = |dt: f64| {
            let mut s = preset("discharge_paper").unwrap();
            s.dt = dt;
            s.sample_stride = usize::MAX; // first + last samples only
            let trace = run(&s).unwrap();
            let k = trace.samples() - 1;
            let mut y = trace.soc[k].clone();
            y.extend_from_slice(&trace.xhat_alpha.as_ref().unwrap()[k]);
            y.extend_from_slice(&trace.xhat_beta.as_ref().unwrap()[k]);
            y.extend_from_slice(&trace.phat[k]);
            y
        };
        let h = endpoint(base);
        let h2 = endpoint(base / 2.0);
        let h4 = endpoint(base / 4.0);
        let norm = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        };
        let e1 = norm(&h, &h2);
        let e2 = norm(&h2, &h4);
        println!(
            "  base h = {base:.1e}: |y_h - y_h/2| = {e1:.3e}, |y_h/2 - y_h/4| = {e2:.3e}, ratio = {:.2}",
            e1 / e2
        );
    }

    // Attack comparison with matched seeds.
    println!("\n== eavesdropper ==");
    for name in ["attack_baseline", "attack_privacy"] {
        let scen = preset(name).unwrap();
        let trace = run(&scen).unwrap();
        let m = metrics(&trace, scen.settle_fraction).unwrap();
        let leak = m.leakage.unwrap();
        println!("  {name}: per-unit power rel sup err = {:?}", leak.power_rel_sup_error);
        println!("           worst = {:.6e}, mean = {:.6e}", leak.worst_rel_sup_error, leak.mean_rel_sup_error);
    }

    // Degenerate privacy (eta = sigma = 1, symmetric non-oscillating split)
    // against the plain scheme: measure how far the traces actually sit.
    println!("\n== degenerate privacy vs baseline ==");
    let mut degenerate = preset("discharge_paper").unwrap();
    degenerate.eta = 1.0;
    degenerate.sigma = 1.0;
    degenerate.split = SplitConfig::degenerate();
    let mut baseline = degenerate.clone();
    baseline.scheme = Scheme::Baseline;
    let dtrace = run(&degenerate).unwrap();
    let btrace = run(&baseline).unwrap();
    let sup = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| {
        a.iter()
            .zip(b)
            .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs()))
            .fold(0.0f64, f64::max)
    };
    println!("  sup |soc diff|   = {:.6e}", sup(&dtrace.soc, &btrace.soc));
    println!("  sup |p diff|     = {:.6e}", sup(&dtrace.p, &btrace.p));
    println!("  sup |phat diff|  = {:.6e}", sup(&dtrace.phat, &btrace.phat));
    println!(
        "  sup |xhat_alpha - xhat| = {:.6e}",
        sup(dtrace.xhat_alpha.as_ref().unwrap(), btrace.xhat.as_ref().unwrap())
    );

    // Scenario echo round-trip sanity.
    let echo = config::ConfigFile::from_scenario(&discharge).to_toml().unwrap();
    println!("\nresolved echo length = {} bytes", echo.len());
}
