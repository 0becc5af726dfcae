use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use greenwave_cli::config::Config;
use greenwave_cli::run::{run_audit, run_solve, RunError, EXIT_CONFIG, EXIT_OK};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Solve,
    Audit,
}

/// Solve the dissipative wave equation or audit the kernel bounds.
#[derive(Parser, Debug)]
#[command(name = "greenwave", version)]
struct Args {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum, default_value = "solve")]
    mode: Mode,
    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Seed for the randomized audit tuples.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Only report errors.
    #[arg(long)]
    quiet: bool,
}

fn run(args: &Args) -> Result<i32, RunError> {
    let cfg = Config::load(&args.config)?;
    match args.mode {
        Mode::Solve => {
            let s = run_solve(&cfg, &args.config)?;
            if !args.quiet {
                println!(
                    "{} iterations (converged: {}), certificate factor {:.4}, outputs in {}",
                    s.iterations,
                    s.converged,
                    s.factor,
                    s.dir.display()
                );
            }
            Ok(EXIT_OK)
        }
        Mode::Audit => run_audit(&cfg, &args.config, args.seed, args.quiet),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(args.threads).build_global() {
        eprintln!("cannot start thread pool: {e}");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    match run(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
