use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use devilstick::cli::commands::{
    analyze, format_analyze, format_linearize, format_summary, linearize_report, plot,
    run_parallel, simulate,
};
use devilstick::cli::output::write_text;
use devilstick::cli::scenario::resolve_scenario;

#[derive(Parser)]
#[command(name = "devilstick", version, about = "Impulsive devil-stick juggling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenarios and write CSV/JSON artifacts.
    Simulate {
        /// Scenario file, or a built-in name (sim-vhc, sim-orbit). Repeatable.
        #[arg(long, short, required = true)]
        scenario: Vec<String>,
        /// Output directory. With several scenarios, one subdirectory each.
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
        /// Worker threads for batches.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Reserved; the simulation is deterministic.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Zero-dynamics summary and a sweep of periodic orbits.
    Analyze {
        #[arg(long, short)]
        scenario: String,
        /// Extra orbit rates to tabulate (rad/s).
        #[arg(long = "omega-star", allow_negative_numbers = true)]
        omega_star: Vec<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Linearize the Poincare map about the target orbit and design the LQR gain.
    Linearize {
        #[arg(long, short)]
        scenario: String,
        /// Also write the report as JSON to this path.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Render impulse or trajectory CSVs as SVG.
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Simulate {
            scenario,
            out,
            jobs,
            seed,
        } => {
            if let Some(s) = seed {
                log::debug!("seed {s} ignored");
            }
            // parse everything before any file is created
            let scenarios = scenario
                .iter()
                .map(|s| resolve_scenario(s))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let batch = scenarios.len() > 1;
            let results = run_parallel(&scenarios, jobs, |sc| {
                let dir = if batch { out.join(&sc.name) } else { out.clone() };
                simulate(sc, &dir).with_context(|| format!("scenario {}", sc.name))
            });
            let mut all_ok = true;
            for r in results {
                let r = r?;
                print!("{}", format_summary(&r.summary));
                for f in &r.files {
                    println!("wrote {}", f.display());
                }
                all_ok &= r.summary.completed;
            }
            Ok(all_ok)
        }
        Command::Analyze {
            scenario,
            omega_star,
            json,
        } => {
            let sc = resolve_scenario(&scenario)?;
            let report = analyze(&sc, &omega_star);
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", format_analyze(&report));
            }
            Ok(true)
        }
        Command::Linearize { scenario, json } => {
            let sc = resolve_scenario(&scenario)?;
            let report = linearize_report(&sc)?;
            print!("{}", format_linearize(&report));
            if let Some(path) = json {
                let text = serde_json::to_string_pretty(&report)? + "\n";
                write_text(&path, text.as_bytes())?;
                println!("wrote {}", path.display());
            }
            Ok(true)
        }
        Command::Plot { csv, out } => {
            for f in plot(&csv, out.as_deref())? {
                println!("wrote {}", f.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
