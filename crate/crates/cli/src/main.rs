use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fbpopt::{parse_config, run_command, Command, Outcome};
use log::{error, info, warn};

/// Optimal control of a surface-tension free boundary problem: solvers,
/// derivative checks and constant bookkeeping.
#[derive(Debug, Parser)]
#[command(name = "fbpopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `out_dir` from the config.
    #[arg(short, long, global = true)]
    out_dir: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    verbose: bool,
}

fn init_threads() {
    let Ok(raw) = std::env::var("FBPOPT_THREADS") else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                warn!("could not size the thread pool: {e}");
            }
        }
        _ => warn!("ignoring FBPOPT_THREADS = {raw:?}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    init_threads();

    let Some(path) = cli.config else {
        eprintln!("config error: no config file given (use -c/--config)");
        return ExitCode::from(2);
    };
    let mut cfg = match parse_config(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(o) = cli.out_dir {
        cfg.out_dir = o;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match run_command(cli.command, &cfg) {
        Ok(Outcome::Success) => {
            info!("{} finished; artifacts in {}", cli.command.name(), cfg.out_dir.display());
            ExitCode::SUCCESS
        }
        Ok(o) => {
            match &o {
                Outcome::SolverFailure(m) | Outcome::VerificationFailure(m) => error!("{m}"),
                Outcome::Success => {}
            }
            if let Outcome::SolverFailure(m) | Outcome::VerificationFailure(m) = &o {
                eprintln!("{m}");
            }
            ExitCode::from(o.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
