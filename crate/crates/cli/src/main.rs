//! `bess` — scenario validation, simulation runs, eavesdropper comparisons
//! and parameter sweeps for the networked battery storage simulator.
//!
//! Exit codes: 0 success, 1 validation failure, 2 run failure, 64 usage.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bess_core::config::{self, apply_overrides, ConfigFile};
use bess_core::engine::{self, metrics, run, RunError, RunMetrics, SweepParameter, Trace};
use bess_core::scenario::{Scenario, Scheme};
use clap::{Args, Parser, Subcommand};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUN: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "bess",
    version,
    about = "Distributed SoC balancing and power tracking simulator for networked battery storage"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file (or preset) against every run precondition.
    Validate(ValidateArgs),
    /// Integrate a scenario and write trace, metrics and a resolved echo.
    Run(RunArgs),
    /// Run both schemes with matched seeds and report eavesdropper leakage.
    Attack(AttackArgs),
    /// Run a scenario once per parameter value and tabulate the metrics.
    Sweep(SweepArgs),
}

/// Where a scenario comes from and how it is adjusted.
#[derive(Args)]
struct Source {
    /// Scenario file (TOML). Omit when using --preset.
    #[arg(value_name = "CONFIG")]
    config: Option<PathBuf>,

    /// Embedded preset: discharge_paper, charge_paper, attack_baseline,
    /// attack_privacy.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,

    /// Dotted-path override, e.g. --set control.beta=600 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Shorthand for --set sim.seed=N.
    #[arg(long)]
    seed: Option<u64>,

    /// Shorthand for --set control.scheme=NAME.
    #[arg(long)]
    scheme: Option<String>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    source: Source,

    /// Print an embedded preset document and exit.
    #[arg(long, value_name = "NAME")]
    dump_preset: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,

    /// Output directory (default: $BESS_OUT_DIR or ./bess-out).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    source: Source,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,

    /// Parameter to sweep: beta, kappa, eta, sigma or h.
    #[arg(long)]
    parameter: String,

    /// Comma-separated values, e.g. 75,150,300,600.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,

    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failures carrying their process exit code.
enum CliError {
    Usage(String),
    Validation(String),
    Run(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Run(_) => EXIT_RUN,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Run(m) => m,
        }
    }
}

fn io_err(context: &str, e: std::io::Error) -> CliError {
    CliError::Run(format!("{context}: {e}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let result = match cli.command {
        Command::Validate(args) => cmd_validate(args),
        Command::Run(args) => cmd_run(args),
        Command::Attack(args) => cmd_attack(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// Resolve the scenario text (file or preset) with overrides applied, then
/// parse and validate it.
fn load(source: &Source) -> Result<(Scenario, String), CliError> {
    let raw = match (&source.config, &source.preset) {
        (Some(path), None) => fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?,
        (None, Some(name)) => config::preset_toml(name)
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown preset '{name}' (available: {})",
                    config::PRESET_NAMES.join(", ")
                ))
            })?
            .to_string(),
        (None, None) => {
            return Err(CliError::Usage(
                "give a scenario file or --preset NAME".into(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };

    let mut overrides: Vec<(String, String)> = Vec::new();
    for kv in &source.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        overrides.push((k.to_string(), v.to_string()));
    }
    if let Some(seed) = source.seed {
        overrides.push(("sim.seed".into(), seed.to_string()));
    }
    if let Some(scheme) = &source.scheme {
        overrides.push(("control.scheme".into(), scheme.clone()));
    }

    let text = if overrides.is_empty() {
        raw
    } else {
        apply_overrides(&raw, &overrides).map_err(|e| CliError::Validation(e.to_string()))?
    };
    let scenario =
        config::parse_scenario(&text).map_err(|e| CliError::Validation(e.to_string()))?;
    Ok((scenario, text))
}

fn out_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os("BESS_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("bess-out"))
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    if let Some(name) = &args.dump_preset {
        let text = config::preset_toml(name).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown preset '{name}' (available: {})",
                config::PRESET_NAMES.join(", ")
            ))
        })?;
        print!("{}", text.trim_start());
        return Ok(());
    }
    let (scenario, _) = load(&args.source)?;
    println!(
        "ok: {} units, scheme {:?}, horizon {} at dt {}, seed {}",
        scenario.n(),
        scenario.scheme,
        scenario.horizon,
        scenario.dt,
        scenario.seed
    );
    Ok(())
}

fn write_scenario_echo(dir: &Path, scenario: &Scenario) -> Result<(), CliError> {
    let echo = ConfigFile::from_scenario(scenario)
        .to_toml()
        .map_err(|e| CliError::Run(e.to_string()))?;
    fs::write(dir.join("scenario.toml"), echo)
        .map_err(|e| io_err("writing scenario echo", e))
}

fn write_trace(dir: &Path, name: &str, trace: &Trace) -> Result<(), CliError> {
    let file = fs::File::create(dir.join(name)).map_err(|e| io_err("creating trace file", e))?;
    trace
        .write_csv(std::io::BufWriter::new(file))
        .map_err(|e| io_err("writing trace", e))
}

fn metrics_lines(m: &RunMetrics) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        s.push_str(k);
        s.push('=');
        s.push_str(&v);
        s.push('\n');
    };
    kv("settle_start_t", format!("{}", m.settle_start_t));
    kv("soc_spread_final", format!("{}", m.soc_spread_final));
    kv(
        "soc_spread_sup_settled",
        format!("{}", m.soc_spread_sup_settled),
    );
    kv(
        "soc_spread_monotone_settled",
        format!("{}", m.soc_spread_monotone_settled),
    );
    kv(
        "power_tracking_abs_error_w",
        format!("{}", m.power_tracking_abs_error),
    );
    kv(
        "power_tracking_rel_error",
        format!("{}", m.power_tracking_rel_error),
    );
    kv(
        "state_estimator_sup_error",
        format!("{}", m.state_estimator_sup_error),
    );
    kv(
        "power_estimator_sup_error",
        format!("{}", m.power_estimator_sup_error),
    );
    kv(
        "conservation_max_rel_residual",
        format!("{}", m.conservation_max_rel_residual),
    );
    kv(
        "split_rate_residual_max",
        format!("{}", m.split_rate_residual_max),
    );
    kv(
        "floor_active_in_settled_window",
        format!("{}", m.floor_active_in_settled_window),
    );
    if let Some(leak) = &m.leakage {
        kv(
            "leakage_worst_rel_sup_error",
            format!("{}", leak.worst_rel_sup_error),
        );
        kv(
            "leakage_mean_rel_sup_error",
            format!("{}", leak.mean_rel_sup_error),
        );
        for (i, v) in leak.power_rel_sup_error.iter().enumerate() {
            kv(&format!("leakage_power_rel_sup_error_{}", i + 1), format!("{v}"));
        }
    }
    s
}

fn write_metrics(dir: &Path, m: &RunMetrics) -> Result<(), CliError> {
    fs::write(dir.join("metrics.txt"), metrics_lines(m))
        .map_err(|e| io_err("writing metrics.txt", e))?;
    let json = serde_json::to_string_pretty(m).map_err(|e| CliError::Run(e.to_string()))?;
    fs::write(dir.join("metrics.json"), json).map_err(|e| io_err("writing metrics.json", e))
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let (scenario, _) = load(&args.source)?;
    let dir = out_dir(&args.out);
    fs::create_dir_all(&dir).map_err(|e| io_err("creating output directory", e))?;
    write_scenario_echo(&dir, &scenario)?;

    match run(&scenario) {
        Ok(trace) => {
            write_trace(&dir, "trace.csv", &trace)?;
            let m = metrics(&trace, scenario.settle_fraction)
                .map_err(|e| CliError::Run(e.to_string()))?;
            write_metrics(&dir, &m)?;
            println!(
                "run complete: {} samples -> {}",
                trace.samples(),
                dir.display()
            );
            println!(
                "soc_spread_final = {:.6}, tracking_rel_error = {:.6}",
                m.soc_spread_final, m.power_tracking_rel_error
            );
            Ok(())
        }
        Err(RunError::Invalid(e)) => Err(CliError::Validation(e.to_string())),
        Err(RunError::Aborted(failure)) => {
            write_trace(&dir, "trace.csv", &failure.partial)?;
            fs::write(dir.join("failure.txt"), format!("{failure}\n"))
                .map_err(|e| io_err("writing failure diagnostic", e))?;
            Err(CliError::Run(format!(
                "{failure} (partial artifacts in {})",
                dir.display()
            )))
        }
    }
}

fn leakage_report(
    scenario_base: &Scenario,
    baseline: &RunMetrics,
    privacy: &RunMetrics,
) -> (String, serde_json::Value) {
    let lb = baseline.leakage.as_ref().expect("adversary enabled");
    let lp = privacy.leakage.as_ref().expect("adversary enabled");
    let n = scenario_base.n();

    let ordering_holds = (0..n).all(|i| lb.power_rel_sup_error[i] < lp.power_rel_sup_error[i]);
    let baseline_leaks = lb.worst_rel_sup_error <= 0.05;
    let privacy_protects = lp
        .power_rel_sup_error
        .iter()
        .all(|&e| e >= 0.10);

    let mut text = String::new();
    text.push_str("unit  baseline_rel_sup_err  privacy_rel_sup_err\n");
    for i in 0..n {
        text.push_str(&format!(
            "{:>4}  {:>20.6e}  {:>19.6e}\n",
            i + 1,
            lb.power_rel_sup_error[i],
            lp.power_rel_sup_error[i]
        ));
    }
    text.push_str(&format!(
        "\nbaseline channel: attacker worst relative error {:.6e} -> {}\n",
        lb.worst_rel_sup_error,
        if baseline_leaks {
            "power delivery reconstructed (leaks)"
        } else {
            "reconstruction degraded"
        }
    ));
    text.push_str(&format!(
        "privacy channel:  attacker worst relative error {:.6e} -> {}\n",
        lp.worst_rel_sup_error,
        if privacy_protects {
            "power delivery protected"
        } else {
            "reconstruction still accurate (leaks)"
        }
    ));
    text.push_str(&format!(
        "per-unit ordering baseline < privacy: {}\n",
        if ordering_holds { "holds" } else { "violated" }
    ));

    let json = serde_json::json!({
        "baseline": lb,
        "privacy": lp,
        "verdict": {
            "baseline_leaks": baseline_leaks,
            "privacy_protects": privacy_protects,
            "ordering_holds_per_unit": ordering_holds,
        }
    });
    (text, json)
}

fn cmd_attack(args: AttackArgs) -> Result<(), CliError> {
    let (scenario, _) = load(&args.source)?;
    if !scenario.adversary.enabled {
        return Err(CliError::Validation(
            "attack comparison needs adversary.enabled = true in the scenario".into(),
        ));
    }
    let dir = out_dir(&args.out);
    fs::create_dir_all(&dir).map_err(|e| io_err("creating output directory", e))?;

    // Same scenario, same seed, both schemes.
    let mut base = scenario.clone();
    base.scheme = Scheme::Baseline;
    let mut priv_scen = scenario.clone();
    priv_scen.scheme = Scheme::Privacy;

    let run_one = |scen: &Scenario, label: &str| -> Result<(Trace, RunMetrics), CliError> {
        let trace = match run(scen) {
            Ok(t) => t,
            Err(RunError::Invalid(e)) => return Err(CliError::Validation(e.to_string())),
            Err(RunError::Aborted(f)) => {
                return Err(CliError::Run(format!("{label} run failed: {f}")))
            }
        };
        let m = metrics(&trace, scen.settle_fraction).map_err(|e| CliError::Run(e.to_string()))?;
        Ok((trace, m))
    };
    let (trace_b, metrics_b) = run_one(&base, "baseline")?;
    let (trace_p, metrics_p) = run_one(&priv_scen, "privacy")?;

    write_scenario_echo(&dir, &scenario)?;
    write_trace(&dir, "attack_baseline_trace.csv", &trace_b)?;
    write_trace(&dir, "attack_privacy_trace.csv", &trace_p)?;
    let (text, json) = leakage_report(&scenario, &metrics_b, &metrics_p);
    fs::write(dir.join("leakage.txt"), &text).map_err(|e| io_err("writing leakage.txt", e))?;
    fs::write(
        dir.join("leakage.json"),
        serde_json::to_string_pretty(&json).map_err(|e| CliError::Run(e.to_string()))?,
    )
    .map_err(|e| io_err("writing leakage.json", e))?;
    print!("{text}");
    println!("report -> {}", dir.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let parameter: SweepParameter = args
        .parameter
        .parse()
        .map_err(|e: bess_core::Error| CliError::Usage(e.to_string()))?;
    if args.values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one --values entry".into()));
    }
    let (scenario, _) = load(&args.source)?;
    let dir = out_dir(&args.out);
    fs::create_dir_all(&dir).map_err(|e| io_err("creating output directory", e))?;
    write_scenario_echo(&dir, &scenario)?;

    let rows = engine::sweep(&scenario, parameter, &args.values);
    let mut csv = String::from(
        "parameter,value,status,soc_spread_final,power_tracking_rel_error,\
         state_estimator_sup_error,power_estimator_sup_error\n",
    );
    println!("{:>10} {:>12} {:>8} {:>14} {:>14}", "parameter", "value", "status", "spread_final", "est_sup_err");
    for row in &rows {
        let (spread, track, est, pest) = match &row.metrics {
            Some(m) => (
                format!("{}", m.soc_spread_final),
                format!("{}", m.power_tracking_rel_error),
                format!("{}", m.state_estimator_sup_error),
                format!("{}", m.power_estimator_sup_error),
            ),
            None => ("".into(), "".into(), "".into(), "".into()),
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            args.parameter,
            row.value,
            row.status.replace(',', ";"),
            spread,
            track,
            est,
            pest
        ));
        println!(
            "{:>10} {:>12} {:>8} {:>14} {:>14}",
            args.parameter,
            row.value,
            if row.status == "ok" { "ok" } else { "failed" },
            spread,
            est
        );
    }
    fs::write(dir.join("sweep.csv"), csv).map_err(|e| io_err("writing sweep.csv", e))?;
    println!("table -> {}", dir.join("sweep.csv").display());
    Ok(())
}
