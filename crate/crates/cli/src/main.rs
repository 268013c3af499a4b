use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use predprey_core::harness::{self, ExitStatus, DEFAULT_SEED};

#[derive(Parser)]
#[command(name = "predprey", version, about = "Run predator-prey analysis scenarios")]
struct Cli {
    /// Output root; each scenario writes to <out>/<name>.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized spot checks.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run { file: PathBuf },
    /// Run the bundled reproduction scenarios and compare against stored values.
    ReproduceAll {
        /// Only scenarios whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { file } => {
            let report = harness::run(&file, cli.out.as_deref(), cli.seed);
            match (&report.manifest, &report.directory) {
                (Some(m), Some(dir)) => {
                    println!("{} -> {}", m.scenario, dir.display());
                    for (k, v) in &m.metrics {
                        println!("  {k} = {v}");
                    }
                    for (k, v) in &m.labels {
                        println!("  {k} = {v}");
                    }
                    for c in &m.checks {
                        println!("  check {}: {}", c.metric, if c.pass { "pass" } else { "FAIL" });
                    }
                }
                _ => eprintln!("{}", serde_json::to_string_pretty(&report).unwrap_or_default()),
            }
            ExitCode::from(report.status as u8)
        }
        Command::ReproduceAll { filter, workers } => {
            let out = cli.out.unwrap_or_else(|| PathBuf::from("out"));
            match harness::reproduce_all(filter.as_deref(), workers, &out, cli.seed) {
                Ok(summary) => {
                    print!("{}", summary.to_table());
                    if summary.all_pass() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(ExitStatus::DomainError as u8)
                    }
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(ExitStatus::ConfigError as u8)
                }
            }
        }
    }
}
