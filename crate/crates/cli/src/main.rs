use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stgia_cli::config::ExperimentConfig;
use stgia_cli::{commands, CliError};

#[derive(Parser)]
#[command(
    name = "stgia",
    version,
    about = "Gradient inversion attacks and location-privacy defenses in federated next-location prediction"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Federated training; writes transcript.jsonl and metrics.csv.
    Train,
    /// Attack a saved transcript; writes attack_summary.csv, attack_points.csv and reconstruction.jsonl.
    Attack {
        /// Defaults to <out>/transcript.jsonl.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Train once and attack with all eight component combinations; writes ablation.csv.
    Ablate,
    /// Defended training and attack for every mechanism and epsilon; writes tradeoff.csv.
    Tradeoff,
    /// Exact ratio-bound audit of the privacy mechanisms; writes audit.csv.
    Audit,
    /// Write the scenario's network.json and trajectories.jsonl.
    GenData,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let Cli { common, command } = cli;
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = common.out {
        cfg.out_dir = out;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    match command {
        Command::Train => commands::train(&cfg).map(|_| ()),
        Command::Attack { transcript } => {
            let path = transcript.unwrap_or_else(|| cfg.out_dir.join("transcript.jsonl"));
            commands::attack_cmd(&cfg, &path, common.config.is_some()).map(|_| ())
        }
        Command::Ablate => commands::ablate(&cfg),
        Command::Tradeoff => commands::tradeoff(&cfg),
        Command::Audit => commands::audit(&cfg),
        Command::GenData => commands::gen_data(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ST_GIA_LOG", "error")).init();
    let cli = match Cli::try_parse() {
        Ok(f) => f,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
