use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use twinfuse::{cmd_fusion_demo, cmd_run_many, cmd_twin_eval, CliError, MAX_WORKERS_ENV};

#[derive(Parser)]
#[command(
    name = "twinfuse",
    version,
    about = "Triplicated sensor fusion with digital-twin substitution"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario configs.
    Run {
        /// Scenario file; repeat to run several (outputs go to <out>/<stem>).
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in every config.
        #[arg(long)]
        seed: Option<u64>,
        /// Scenarios run concurrently.
        #[arg(long, env = MAX_WORKERS_ENV)]
        max_workers: Option<usize>,
    },
    /// Reproduce the two-cycle worked fusion example.
    FusionDemo,
    /// Fit a twin, forecast a horizon and score it.
    TwinEval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn report(err: &CliError) -> u8 {
    eprintln!("error: {err}");
    err.exit_code() as u8
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            max_workers,
        } => {
            let workers = max_workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let results = match cmd_run_many(&config, &out, seed, workers) {
                Ok(r) => r,
                Err(e) => return ExitCode::from(report(&e)),
            };
            // the most severe failure decides the exit status
            let mut code = 0u8;
            for (path, result) in config.iter().zip(results) {
                match result {
                    Ok(a) => println!(
                        "{}: wrote {}",
                        path.display(),
                        a.metrics.parent().unwrap_or(&out).display()
                    ),
                    Err(e) => {
                        let c = report(&e);
                        code = code.max(c);
                    }
                }
            }
            ExitCode::from(code)
        }
        Command::FusionDemo => match cmd_fusion_demo(&mut std::io::stdout()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => ExitCode::from(report(&e)),
        },
        Command::TwinEval { config, out } => match cmd_twin_eval(&config, &out) {
            Ok(a) => {
                println!("wrote {}", a.metrics.display());
                ExitCode::SUCCESS
            }
            Err(e) => ExitCode::from(report(&e)),
        },
    }
}
