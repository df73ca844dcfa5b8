use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlogis_cli::{
    default_config, exit, load_config, output_path, report_summary, run_to_file, Experiment, Failure, Overrides,
    ResultRow, SUITE,
};

/// Steady states of nonlocal logistic models: experiment runner.
#[derive(Parser)]
#[command(name = "nlogis", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for parameter sweeps (default: all cores).
    #[arg(long, global = true, env = "NLOGIS_JOBS")]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Principal eigenvalue and its scaling under dilation.
    Eigen(RunArgs),
    /// Steady states, by default at 0.8 and 1.2 times the principal eigenvalue.
    Solve(RunArgs),
    /// Critical survival radius by bisection.
    ThresholdRadius(RunArgs),
    /// Eigenvalue comparison of two exponents across scales.
    ExtCrossing(RunArgs),
    /// Two congruent intervals versus their union.
    Congruence(RunArgs),
    /// Population abundance under strong localized resources.
    Abundance(RunArgs),
    /// Where the population exceeds the resource.
    Beat(RunArgs),
    /// Periodic steady states.
    Periodic(RunArgs),
    /// Mixed local/nonlocal transmission model.
    Transmission(RunArgs),
    /// Resource design from a target population.
    Strategic(RunArgs),
    /// Experiment named by the config's `experiment` key.
    Run(ConfigArgs),
    /// Every experiment at default settings, one CSV each.
    Suite(SuiteArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    /// Output CSV path (default: the config's `out`, else `<experiment>.csv`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid spacing override.
    #[arg(long)]
    h: Option<f64>,
    /// Fractional exponent override.
    #[arg(long)]
    s: Option<f64>,
}

#[derive(Args)]
struct SuiteArgs {
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::INVALID_INPUT } else { exit::PASS };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 || rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().is_err() {
            eprintln!("error: --jobs must be a positive integer");
            return ExitCode::from(exit::INVALID_INPUT);
        }
    }
    match execute(cli.command) {
        Ok(rows) => {
            let summary = report_summary(&rows).unwrap_or_else(|e| format!("FAIL  {e}\n"));
            print!("{summary}");
            let pass = !rows.is_empty() && rows.iter().all(ResultRow::passed);
            ExitCode::from(if pass { exit::PASS } else { exit::CHECK_FAILED })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn single(experiment: Option<Experiment>, config: Option<&Path>, c: CommonArgs) -> Result<Vec<ResultRow>, Failure> {
    let overrides = Overrides { h: c.h, s: c.s };
    let cfg = load_config(config, experiment, overrides)?;
    let out = output_path(&cfg, c.out.as_deref());
    let rows = run_to_file(&cfg, &out)?;
    eprintln!("wrote {} ({} rows)", out.display(), rows.len());
    Ok(rows)
}

fn execute(command: Command) -> Result<Vec<ResultRow>, Failure> {
    let (experiment, args) = match command {
        Command::Run(a) => return single(None, Some(&a.config), a.common),
        Command::Suite(a) => return suite(&a.out),
        Command::Eigen(a) => (Experiment::Eigen, a),
        Command::Solve(a) => (Experiment::Solve, a),
        Command::ThresholdRadius(a) => (Experiment::ThresholdRadius, a),
        Command::ExtCrossing(a) => (Experiment::ExtCrossing, a),
        Command::Congruence(a) => (Experiment::Congruence, a),
        Command::Abundance(a) => (Experiment::Abundance, a),
        Command::Beat(a) => (Experiment::Beat, a),
        Command::Periodic(a) => (Experiment::Periodic, a),
        Command::Transmission(a) => (Experiment::Transmission, a),
        Command::Strategic(a) => (Experiment::Strategic, a),
    };
    single(Some(experiment), args.config.as_deref(), args.common)
}

fn suite(dir: &Path) -> Result<Vec<ResultRow>, Failure> {
    let mut rows = Vec::new();
    for exp in SUITE {
        let cfg = default_config(exp, Overrides::default()).map_err(|e| Failure::InvalidInput(e.to_string()))?;
        let out = dir.join(format!("{exp}.csv"));
        let part = run_to_file(&cfg, &out)?;
        eprintln!("wrote {} ({} rows)", out.display(), part.len());
        rows.extend(part);
    }
    Ok(rows)
}
