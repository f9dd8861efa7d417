use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rodplan::instance::load_instance;
use rodplan::scenario::SetKind;

mod commands;
mod report;
mod settings;

use commands::GenerateArgs;
use settings::Common;

/// Robust edge service placement and resource reservation.
#[derive(Parser, Debug)]
#[command(name = "rodplan", version)]
struct Cli {
    /// JSON file with defaults for the shared flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log more (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Sus,
    Dus,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthetic instance (and optionally its demand history)
    Generate {
        #[arg(long, default_value_t = 20)]
        ap: usize,
        #[arg(long, default_value_t = 10)]
        en: usize,
        #[arg(long, default_value_t = 6)]
        horizon: usize,
        #[arg(long, default_value_t = 1)]
        lag: usize,
        #[arg(long, value_enum, default_value_t = Kind::Dus)]
        kind: Kind,
        /// Nodes in the random topology
        #[arg(long)]
        nodes: Option<usize>,
        /// Periods of demand history
        #[arg(long, default_value_t = 2000)]
        history: usize,
        #[arg(long)]
        traces_out: Option<PathBuf>,
        /// Parameters the history was drawn from
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
    /// Seasonal and autoregressive fit of a demand-trace CSV
    Fit {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long, default_value_t = 1)]
        lag: usize,
    },
    /// Solve one model; writes the result and an iteration log
    Solve {
        /// Iteration log (JSON lines); defaults next to --out
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Compare the decomposition against exhaustive enumeration
    OracleCheck {
        /// Random reservations at which the inner value is checked
        #[arg(long, default_value_t = 5)]
        points: usize,
    },
    /// Monte-Carlo cost of each model's decisions on sampled demand
    Evaluate {
        /// Comma-separated models (default: all that apply)
        #[arg(long)]
        models: Option<String>,
        #[arg(long, default_value_t = 200)]
        trajectories: usize,
        /// Per-trajectory CSV; defaults next to --out
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// CSV table of one-at-a-time sweeps
    Report {
        /// axis=v1,v2,... with axis one of gamma, psi_f, psi_h, psi_p, psi_e, psi_rho
        #[arg(long, required = true)]
        sweep: Vec<report::Sweep>,
        /// Comma-separated models (default: --model, else the adaptive one)
        #[arg(long)]
        models: Option<String>,
    },
}

/// Exit code when an oracle comparison fails.
const MISMATCH: u8 = 3;

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let opts = match &cli.config {
        Some(p) => cli.common.over(Common::load(p)?),
        None => cli.common,
    };
    match cli.command {
        Command::Generate { ap, en, horizon, lag, kind, nodes, history, traces_out, truth_out } => {
            let kind = match kind {
                Kind::Sus => SetKind::Sus,
                Kind::Dus => SetKind::Dus,
            };
            let args = GenerateArgs { ap, en, horizon, lag, kind, nodes, history, traces_out, truth_out };
            commands::cmd_generate(args, &opts)?;
        }
        Command::Fit { traces, lag } => commands::cmd_fit(&traces, lag, &opts)?,
        Command::Solve { log } => commands::cmd_solve(log.as_deref(), &opts)?,
        Command::OracleCheck { points } => {
            if !commands::cmd_oracle_check(points, &opts)? {
                let message = "decomposition differs from enumeration beyond tolerance";
                eprintln!("{}", serde_json::json!({"error": {"kind": "oracle-mismatch", "message": message}}));
                return Ok(ExitCode::from(MISMATCH));
            }
        }
        Command::Evaluate { models, trajectories, samples } => {
            commands::cmd_evaluate(models.as_deref(), trajectories, samples.as_deref(), &opts)?
        }
        Command::Report { sweep, models } => {
            let inst = load_instance(opts.instance_path()?)?;
            let models = match models.or_else(|| opts.model.clone()) {
                Some(l) => commands::parse_models(Some(&l), &inst)?,
                None => vec![commands::adaptive_for(&inst.uncertainty)],
            };
            let cfg = opts.rod_config()?;
            match &opts.out {
                Some(p) => report::run(&inst, &sweep, &models, &opts, &cfg, std::fs::File::create(p)?)?,
                None => report::run(&inst, &sweep, &models, &opts, &cfg, std::io::stdout().lock())?,
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn error_json(e: &anyhow::Error) -> serde_json::Value {
    let kind = e
        .chain()
        .find_map(|c| c.downcast_ref::<rodplan::Error>())
        .map_or("runtime", rodplan::Error::kind);
    serde_json::json!({"error": {"kind": kind, "message": format!("{e:#}")}})
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help, --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", serde_json::json!({"error": {"kind": "usage", "message": e.to_string()}}));
            return ExitCode::from(2);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_env("RODPLAN_LOG").init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
