//! Command-line runner: sweeps, the shell game, table lookups, and
//! reproduction checks.

mod checks;
mod report;
mod settings;

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coverage_forecast::conditioning::{lookup_forecast, read_table_csv};
use coverage_forecast::experiment::{run_experiment, ExperimentOptions};
use coverage_forecast::monty::{
    expected_payout, score_cup_forecasts, simulate_mean_payout, GameConfig, Strategy,
};
use coverage_forecast::ScoringRuleKind;

use settings::{Overrides, Settings};

#[derive(Parser)]
#[command(
    name = "coverage-forecast",
    version,
    about = "Monte Carlo coverage experiments scored as Bernoulli forecasts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the window-model sweep; writes summaries, lookup tables, and
    /// the two score tables.
    Submarine(SubmarineArgs),
    /// The three-cup shell game: analytic and simulated payouts.
    Monty(MontyArgs),
    /// Look up a forecast in a persisted conditional-coverage table.
    Forecast(ForecastArgs),
    /// Run the reproduction checks and exit nonzero on any failure.
    Check(CheckArgs),
}

#[derive(Args)]
struct SweepFlags {
    /// Flat key = value config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hatch locations: `start:step:count` or a comma list.
    #[arg(long)]
    theta_grid: Option<String>,
    /// Hull widths: `start:step:count` or a comma list.
    #[arg(long)]
    hull_width_grid: Option<String>,
    /// Trials per configuration.
    #[arg(long)]
    n_trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// One minus the nominal coverage level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Bins for the spanned relative width.
    #[arg(long)]
    bins_d: Option<usize>,
    /// Bins for the folded relative width.
    #[arg(long)]
    bins_w: Option<usize>,
    /// Comma list of procedures (np, ump, sd, trivial).
    #[arg(long)]
    procedures: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Cap the worker pool; results are identical for any value.
    #[arg(long)]
    threads: Option<usize>,
    /// Override a check tolerance: KEY=VALUE (repeatable).
    #[arg(long = "tol", value_name = "KEY=VALUE")]
    tolerances: Vec<String>,
}

#[derive(Args)]
struct SubmarineArgs {
    #[command(flatten)]
    sweep: SweepFlags,
    /// Also write the raw per-trial records (large).
    #[arg(long)]
    records: bool,
    /// Compare results against the expected values after the run.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct MontyArgs {
    /// Hidden prize in dollars (at least 10).
    #[arg(long, default_value_t = 10.0)]
    v: f64,
    /// Games to simulate.
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
    /// stay or switch; both when omitted.
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct ForecastArgs {
    /// A table CSV produced by the sweep.
    table: PathBuf,
    /// Statistic value to look up.
    #[arg(long)]
    value: f64,
    /// Nominal-level fallback for empty bins.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    sweep: SweepFlags,
}

enum Failure {
    /// Bad configuration or arguments (exit 2).
    Usage(String),
    /// Runtime failure such as unwritable output (exit 1).
    Runtime(String),
    /// Checks ran and failed; already reported (exit 1).
    Checks,
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(Failure::Checks) => ExitCode::from(1),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Submarine(args) => cmd_submarine(args),
        Command::Monty(args) => cmd_monty(args),
        Command::Forecast(args) => cmd_forecast(args),
        Command::Check(args) => cmd_check(args),
    }
}

fn resolve_sweep(flags: &SweepFlags) -> Result<Settings, Failure> {
    if let Some(threads) = flags.threads {
        if threads == 0 {
            return Err(Failure::Usage("--threads must be at least 1".to_string()));
        }
        // ignore the error when a pool already exists (tests, repeat calls)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    settings::resolve(
        flags.config.as_deref(),
        &Overrides {
            theta_grid: flags.theta_grid.clone(),
            hull_width_grid: flags.hull_width_grid.clone(),
            n_trials: flags.n_trials,
            seed: flags.seed,
            alpha: flags.alpha,
            bins_d: flags.bins_d,
            bins_w: flags.bins_w,
            procedures: flags.procedures.clone(),
            out_dir: flags.out_dir.clone(),
        },
    )
    .map_err(Failure::Usage)
}

fn run_sweep_experiment(
    settings: &Settings,
) -> Result<coverage_forecast::experiment::SubmarineExperiment, Failure> {
    let options = ExperimentOptions {
        bins_d: settings.bins_d,
        bins_w: settings.bins_w,
        ..ExperimentOptions::default()
    };
    run_experiment(&settings.config, &settings.procedures, &options)
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn cmd_submarine(args: SubmarineArgs) -> Result<(), Failure> {
    let settings = resolve_sweep(&args.sweep)?;
    let overrides = checks::parse_overrides(&args.sweep.tolerances).map_err(Failure::Usage)?;
    let started = chrono::Utc::now();

    eprintln!(
        "sweep: {} configs x {} trials, seed {}",
        settings.config.n_configs(),
        settings.config.n_trials,
        settings.config.seed
    );
    let experiment = run_sweep_experiment(&settings)?;

    let mut artifacts = report::write_all(&settings.out_dir, &settings, &experiment, args.records)?;
    let manifest = report::write_manifest(
        &settings.out_dir,
        "submarine",
        &settings,
        started,
        &artifacts,
    )?;
    artifacts.paths.push(manifest);
    for path in &artifacts.paths {
        println!("wrote {}", path.display());
    }

    for row in &experiment.table1 {
        println!(
            "table1 {:<16} mean {:.6}  variance {:.2e}",
            row.id, row.mean, row.across_config_variance
        );
    }
    for row in &experiment.table2 {
        println!(
            "table2 {:<20} mean {:.6}  variance {:.2e}",
            row.id, row.mean, row.across_config_variance
        );
    }

    if args.check {
        let report = checks::submarine_checks(&experiment, &overrides);
        report.print();
        if !report.all_pass() {
            return Err(Failure::Checks);
        }
    }
    Ok(())
}

fn cmd_monty(args: MontyArgs) -> Result<(), Failure> {
    let config = GameConfig::new(args.v).map_err(|e| Failure::Usage(e.to_string()))?;
    if args.n == 0 {
        return Err(Failure::Usage("--n must be at least 1".to_string()));
    }
    let strategies: Vec<Strategy> = match args.strategy {
        Some(s) => vec![s],
        None => vec![Strategy::Stay, Strategy::Switch],
    };
    println!(
        "three-cup game: prize ${}, buy-in ${}, losing penalty {}x the prize",
        config.prize_v(),
        config.buy_in(),
        config.loss_fraction()
    );
    println!("strategy  analytic payout  simulated mean  standard error  n");
    for strategy in &strategies {
        let analytic = expected_payout(&config, *strategy);
        let sim = simulate_mean_payout(&config, *strategy, args.n, args.seed)
            .map_err(|e| Failure::Usage(e.to_string()))?;
        println!(
            "{:<8}  {:>15.2}  {:>14.4}  {:>14.4}  {}",
            strategy.as_str(),
            analytic,
            sim.mean,
            sim.standard_error,
            sim.n
        );
    }
    println!();
    println!("cup-win forecast scores (Brier):");
    let rows = score_cup_forecasts(args.n, args.seed, ScoringRuleKind::Brier)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    for row in rows {
        println!(
            "  {:<28} q = {:.4}  mean score {:.4}",
            row.id, row.forecast, row.mean_score
        );
    }
    Ok(())
}

fn cmd_forecast(args: ForecastArgs) -> Result<(), Failure> {
    if !(args.alpha.is_finite() && 0.0 < args.alpha && args.alpha < 1.0) {
        return Err(Failure::Usage(format!(
            "alpha must lie strictly inside (0, 1), got {}",
            args.alpha
        )));
    }
    let file = File::open(&args.table)
        .map_err(|e| Failure::Usage(format!("cannot open {}: {e}", args.table.display())))?;
    let table = read_table_csv(BufReader::new(file))
        .map_err(|e| Failure::Usage(format!("{}: {e}", args.table.display())))?;
    println!(
        "table: statistic {}, procedure {}, {} bins on [{}, {}]",
        table.statistic(),
        table.procedure(),
        table.binning().len(),
        table.binning().range().0,
        table.binning().range().1
    );
    let looked_up = lookup_forecast(&table, args.value, args.alpha)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let bin = looked_up.lookup;
    println!(
        "value {} -> bin {} [{}, {}), count {}",
        args.value, bin.bin, bin.lo, bin.hi, bin.count
    );
    if looked_up.fallback {
        println!("no estimate in this bin; falling back to the nominal level 1 - alpha");
        println!("forecast q = {:.6} (fallback)", looked_up.forecast.value());
    } else {
        println!("forecast q = {:.6}", looked_up.forecast.value());
    }
    Ok(())
}

fn cmd_check(args: CheckArgs) -> Result<(), Failure> {
    let settings = resolve_sweep(&args.sweep)?;
    let overrides = checks::parse_overrides(&args.sweep.tolerances).map_err(Failure::Usage)?;

    eprintln!(
        "check sweep: {} configs x {} trials, seed {}",
        settings.config.n_configs(),
        settings.config.n_trials,
        settings.config.seed
    );
    let experiment = run_sweep_experiment(&settings)?;
    let mut report = checks::submarine_checks(&experiment, &overrides);
    report
        .lines
        .extend(checks::auxiliary_checks(settings.config.seed, &overrides).lines);
    report.print();
    if report.all_pass() {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}
