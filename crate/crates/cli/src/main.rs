use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pvlab::config::ExperimentConfig;
use pvlab::experiments::{run_experiment, selftest};
use pvlab_core::registry::catalogue;

/// Monte Carlo experiments on Poisson functionals: variance bounds,
/// scaling laws and covariance positivity.
#[derive(Parser)]
#[command(name = "pvlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List every registered functional with its parameter schema.
    List,
    /// Run a fixed experiment twice and byte-compare the CSV outputs.
    Selftest {
        /// Keep the work directory instead of deleting it.
        #[arg(long)]
        keep: bool,
    },
}

const EXIT_PASS: u8 = 0;
const EXIT_ASSERTION_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("PVLAB_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .expect("thread pool built once at startup");
            }
            _ => {
                eprintln!("error: PVLAB_THREADS must be a positive integer, got `{threads}`");
                return ExitCode::from(EXIT_USAGE);
            }
        }
    }

    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed } => {
            let mut experiment = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(EXIT_USAGE);
                }
            };
            if let Some(seed) = seed {
                experiment.seed.master_seed = seed;
            }
            match run_experiment(&experiment) {
                Ok(outcome) => {
                    for rule in &outcome.summary.rules {
                        let verdict = if rule.pass { "pass" } else { "FAIL" };
                        println!("[{verdict}] {}: {}", rule.name, rule.detail);
                    }
                    println!(
                        "wrote {} and {}",
                        experiment.output.csv.display(),
                        experiment.output.summary.display()
                    );
                    if outcome.pass {
                        ExitCode::from(EXIT_PASS)
                    } else {
                        let failing: Vec<&str> = outcome
                            .summary
                            .rules
                            .iter()
                            .filter(|r| !r.pass)
                            .map(|r| r.name.as_str())
                            .collect();
                        eprintln!("assertion failed: {}", failing.join(", "));
                        ExitCode::from(EXIT_ASSERTION_FAILED)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(EXIT_USAGE)
                }
            }
        }
        Command::List => {
            println!("{:<22} {:<10} {:<40} description", "name", "group", "params");
            for entry in catalogue() {
                println!(
                    "{:<22} {:<10} {:<40} {}",
                    entry.name, entry.group, entry.params, entry.description
                );
            }
            ExitCode::from(EXIT_PASS)
        }
        Command::Selftest { keep } => {
            let dir = std::env::temp_dir().join(format!("pvlab-selftest-{}", std::process::id()));
            let result = selftest(&dir);
            if !keep {
                std::fs::remove_dir_all(&dir).ok();
            }
            match result {
                Ok(true) => {
                    println!("selftest: reruns produced byte-identical CSV output");
                    ExitCode::from(EXIT_PASS)
                }
                Ok(false) => {
                    eprintln!("selftest: CSV outputs differ between reruns");
                    ExitCode::from(EXIT_ASSERTION_FAILED)
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(EXIT_USAGE)
                }
            }
        }
    }
}
