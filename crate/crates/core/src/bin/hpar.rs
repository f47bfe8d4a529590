use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use hpar_core::cli::{compare, config_help, emit_config, load_config, run_scenario, write_comparison, RunManifest};
use hpar_core::geometry::Zone;
use hpar_core::simcore::{ScenarioConfig, TrafficFlow};

#[derive(Parser)]
#[command(name = "hpar", version, about = "Anonymous geographic routing simulator", after_long_help = config_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write metrics.csv, trace.jsonl, observations.jsonl and summary.json
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        reps: u32,
        /// Seed of the first repetition (defaults to the config's seed)
        #[arg(long)]
        seed_base: Option<u64>,
    },
    /// Run two configs on identical seeds and report paired deltas (B minus A)
    Compare {
        config_a: PathBuf,
        config_b: PathBuf,
        #[arg(long, default_value_t = 1)]
        reps: u32,
        #[arg(long)]
        seed_base: Option<u64>,
        /// Also write comparison.csv and summary.json here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a canonical config with every default filled in
    ShowConfig,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            reps,
            seed_base,
        } => {
            let manifest = RunManifest {
                config_path: config,
                out_dir: out,
                repetitions: reps,
                seed_base,
            };
            let records = run_scenario(&manifest)?;
            for m in &records {
                let rate = m.delivery_rate.map_or("-".to_string(), |r| format!("{r:.3}"));
                println!(
                    "seed {} delivery {rate} transmissions {}",
                    m.seed, m.transmissions_total
                );
            }
        }
        Command::Compare {
            config_a,
            config_b,
            reps,
            seed_base,
            out,
        } => {
            let a = load_config(&config_a)?;
            let b = load_config(&config_b)?;
            anyhow::ensure!(reps > 0, "reps must be at least 1");
            let cmp = compare(&a, &b, reps, seed_base.unwrap_or(a.seed)).context("comparison failed")?;
            let mut stdout = std::io::stdout().lock();
            cmp.write_csv(&mut stdout)?;
            for (name, stat) in cmp.delta_summary() {
                if let Some(s) = stat {
                    println!("# mean delta {name} = {}", s.mean);
                }
            }
            if let Some(dir) = out {
                write_comparison(&dir, &a, &b, &cmp)?;
            }
        }
        Command::ShowConfig => {
            let mut cfg = ScenarioConfig::new(Zone::with_size(1000.0, 1000.0)?, 100, 250.0, 1);
            cfg.traffic.push(TrafficFlow {
                src: 0,
                dst: 1,
                start: 5.0,
                period: 5.0,
                size: 512,
                count: 10,
            });
            print!("{}", emit_config(&cfg));
        }
    }
    Ok(())
}
