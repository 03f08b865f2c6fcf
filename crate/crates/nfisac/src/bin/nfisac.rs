//! Command-line entry point: `run`, `validate` and `list-experiments`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nfisac::sim::{list_experiments, load_config, run_experiment, validate_config};
use nfisac::Error;

#[derive(Parser)]
#[command(name = "nfisac", version, about = "Near-field ISAC simulation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a configuration file and report every problem.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the built-in experiments.
    ListExperiments,
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for (name, about) in list_experiments() {
                println!("{name}\t{about}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match validate_config(&config) {
            Ok(r) if r.is_valid() => {
                println!("{}: valid", config.display());
                ExitCode::SUCCESS
            }
            Ok(r) => {
                eprint!("{r}");
                ExitCode::from(EXIT_VALIDATION)
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(EXIT_VALIDATION)
            }
        },
        Command::Run { config, out } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(EXIT_VALIDATION);
                }
            };
            let result = match run_experiment(&cfg) {
                Ok(r) => r,
                Err(Error::Config(e)) => {
                    eprintln!("configuration error: {e}");
                    return ExitCode::from(EXIT_VALIDATION);
                }
                Err(e) => {
                    eprintln!("runtime error: {e}");
                    return ExitCode::from(EXIT_RUNTIME);
                }
            };
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            match result.write(&out) {
                Ok(paths) => {
                    for p in paths {
                        println!("{}", p.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("runtime error: {e}");
                    ExitCode::from(EXIT_RUNTIME)
                }
            }
        }
    }
}
