use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sdl_cli::{run_config, sweep_dir, thread_count, RunStatus, THREADS_ENV};
use sdl_core::io::fmt_f64;
use sdl_core::verify::run_all;

#[derive(Parser)]
#[command(name = "sdl", version, about = "Discrete spectral geometry experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Run { config: PathBuf },
    /// Run every *.toml config in a directory and aggregate sweep.csv.
    Sweep { dir: PathBuf },
    /// Run the acceptance checks.
    Verify {
        /// Coarser meshes and fewer samples, same thresholds.
        #[arg(long)]
        fast: bool,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match thread_count() {
        Ok(n) => n,
        Err(e) => {
            eprintln!("sdl: {e}");
            return code(e.exit_code());
        }
    };
    match cli.command {
        Command::Run { config } => match run_config(&config, threads) {
            Ok(m) => {
                if let Some(s) = &m.summary {
                    for c in &s.checks {
                        println!("[{}] {} = {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, fmt_f64(c.value), c.condition);
                    }
                }
                for d in &m.diagnostics {
                    eprintln!("sdl: {d}");
                }
                if let Some(dir) = &m.output_dir {
                    println!("outputs in {}", dir.display());
                }
                code(m.status.exit_code())
            }
            Err(e) => {
                eprintln!("sdl: {e}");
                code(e.exit_code())
            }
        },
        Command::Sweep { dir } => match sweep_dir(&dir, threads) {
            Ok(entries) => {
                for e in &entries {
                    let status = serde_json::to_string(&e.status).unwrap_or_default();
                    println!("{} {}{}", e.config.display(), status.trim_matches('"'), e.error.as_ref().map_or(String::new(), |m| format!(": {m}")));
                }
                println!("{} runs on {threads} worker thread(s) ({THREADS_ENV})", entries.len());
                code(entries.iter().map(|e| e.status.exit_code()).max().unwrap_or(0))
            }
            Err(e) => {
                eprintln!("sdl: {e}");
                code(e.exit_code())
            }
        },
        Command::Verify { fast } => {
            let results = run_all(fast, |r| println!("{r}"));
            code(if results.iter().all(|r| r.passed) { 0 } else { RunStatus::ChecksFailed.exit_code() })
        }
    }
}
