use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use fedgps_core::eval::{
    nemenyi_test, score_matrix, summarize, write_nemenyi_csv, write_summary_csv, Metric, RankMatrix,
};
use fedgps_core::experiment::diag::{self, DiagReport, GradCheckSettings, QuadraticSettings};
use fedgps_core::experiment::{read_results, run_experiment, ExperimentConfig};
use fedgps_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_DIAGNOSTIC: u8 = 4;

#[derive(Parser)]
#[command(name = "fedgps", version, about = "Federated learning simulator with surrogate-guided gradient rectification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (scenario seed, training seed, algorithm) job of a config.
    Run(RunArgs),
    /// Run a built-in self-check.
    Diag {
        #[command(subcommand)]
        which: DiagCommand,
    },
    /// Print the accuracy table for a results.csv.
    Summarize(TableArgs),
    /// Friedman test and Nemenyi critical distance over a results.csv.
    Nemenyi(NemenyiArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; defaults apply to everything it omits.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set local.eta_l=0.05`. Repeatable; wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory, overriding `output_dir`.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DiagCommand {
    /// Finite-difference check of the full local objective.
    GradCheck {
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
        #[arg(long, default_value_t = 64)]
        coords: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Rectification identity on quadratics with a shared Hessian.
    QuadraticOracle {
        #[arg(long, default_value_t = 0.3)]
        lambda_g: f64,
        #[arg(long, default_value_t = 4)]
        clients: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Distance triangle monitor over a short run.
    Triangle {
        #[arg(long, default_value_t = 5)]
        rounds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Per-client communication units for every algorithm.
    CommAudit {
        /// Model parameter count M.
        #[arg(short, long)]
        m: u64,
        /// Number of classes C.
        #[arg(short, long)]
        classes: u64,
        /// Prototype width d.
        #[arg(short = 'd', long)]
        embed_dim: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Best,
    Final,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Best => Metric::Best,
            MetricArg::Final => Metric::Final,
        }
    }
}

#[derive(Args)]
struct TableArgs {
    /// results.csv written by `run`.
    results: PathBuf,
    #[arg(long, value_enum, default_value = "best")]
    metric: MetricArg,
    /// Write CSV here instead of stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NemenyiArgs {
    #[command(flatten)]
    table: TableArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

fn output(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout()),
    })
}

fn run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let mut overrides = args.overrides;
    if let Some(out) = &args.output {
        overrides.push(format!("output_dir={:?}", out.display().to_string()));
    }
    let cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p, &overrides)?,
        None => ExperimentConfig::from_toml_str("", &overrides)?,
    };
    let report = run_experiment(&cfg)?;
    println!("wrote {}", report.output_dir.display());
    write_summary_csv(&report.summary, Metric::Best, io::stdout())?;
    Ok(ExitCode::SUCCESS)
}

fn diag(which: DiagCommand) -> anyhow::Result<ExitCode> {
    let report: DiagReport = match which {
        DiagCommand::GradCheck {
            epsilon,
            coords,
            tolerance,
            seed,
        } => diag::grad_check(&GradCheckSettings {
            epsilon,
            coordinates: coords,
            tolerance,
            seed,
        })?,
        DiagCommand::QuadraticOracle {
            lambda_g,
            clients,
            seed,
        } => diag::quadratic_oracle(&QuadraticSettings {
            lambda_g,
            clients,
            seed,
            ..QuadraticSettings::default()
        })?,
        DiagCommand::Triangle { rounds, seed } => diag::triangle(rounds, seed)?,
        DiagCommand::CommAudit {
            m,
            classes,
            embed_dim,
        } => diag::comm_audit(m, classes, embed_dim),
    };
    print!("{report}");
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_DIAGNOSTIC)
    })
}

fn summarize_cmd(args: TableArgs) -> anyhow::Result<ExitCode> {
    let results = read_results(&args.results)?;
    let rows = summarize(&results, args.metric.into())?;
    write_summary_csv(&rows, args.metric.into(), output(args.out.as_ref())?)?;
    Ok(ExitCode::SUCCESS)
}

fn nemenyi_cmd(args: NemenyiArgs) -> anyhow::Result<ExitCode> {
    let results = read_results(&args.table.results)?;
    let rows = summarize(&results, args.table.metric.into())?;
    let (scenarios, scores) = score_matrix(&rows)?;
    let ranks = RankMatrix::from_scores(scores)?;
    let result = nemenyi_test(&ranks, args.alpha)?;
    let f = &result.friedman;
    eprintln!(
        "{} scenarios, {} algorithms: chi2_F = {:.6}, critical {:.6} ({}), CD = {:.6}",
        scenarios.len(),
        rows.len(),
        f.chi2,
        f.critical_value,
        if f.significant { "significant" } else { "not significant" },
        result.critical_distance
    );
    let names: Vec<String> = rows.iter().map(|r| r.algo.clone()).collect();
    write_nemenyi_csv(&names, &result, output(args.table.out.as_ref())?)?;
    Ok(ExitCode::SUCCESS)
}

fn exit_code_for(err: &anyhow::Error) -> ExitCode {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => ExitCode::from(EXIT_CONFIG),
        Some(Error::Diverged { .. } | Error::NonFinite(_)) => ExitCode::from(EXIT_DIVERGED),
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Diag { which } => diag(which),
        Command::Summarize(args) => summarize_cmd(args),
        Command::Nemenyi(args) => nemenyi_cmd(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code_for(&e)
        }
    }
}
