mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use crate::commands::Outputs;
use crate::config::RunConfig;

/// Transition-cost experiments for two-phase elastic rods.
#[derive(Parser, Debug)]
#[command(name = "rodlab", version)]
struct Args {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the configuration.
    #[arg(long, env = "RODLAB_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "RODLAB_THREADS")]
    threads: Option<usize>,
    /// Seed; overrides `solver.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_ABORT: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let mut cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(seed) = args.seed {
        cfg.solver.seed = seed;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("--threads must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot configure {n} threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    let dir = args.out.clone().unwrap_or_else(|| commands::default_out(&cfg));
    let mut out = match Outputs::new(dir.clone(), &cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("cannot create {}: {e}", dir.display());
            return ExitCode::FAILURE;
        }
    };
    let start = Instant::now();
    let result = commands::run(&cfg, &mut out);
    log::info!("{} finished in {:.1}s", cfg.command.name(), start.elapsed().as_secs_f64());
    let code = match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let core = e.downcast_ref::<rodlab::Error>();
            let code = match core {
                Some(rodlab::Error::SolverAbort { .. }) => ExitCode::from(EXIT_ABORT),
                _ => ExitCode::FAILURE,
            };
            if let Some(err) = core {
                if let Err(w) = commands::persist_failure(&cfg, &mut out, err) {
                    eprintln!("cannot persist the diagnostic record: {w}");
                }
            }
            eprintln!("error: {e}");
            code
        }
    };
    match out.finish() {
        Ok(summary) => print!("{summary}"),
        Err(e) => {
            eprintln!("cannot write summary: {e}");
            return ExitCode::FAILURE;
        }
    }
    code
}
