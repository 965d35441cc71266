//! Command-line front end for the cache placement simulator.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use infocache::config::ExperimentConfig;
use infocache::runner::{bounds_report, run_experiment, RunOptions};

#[derive(Parser)]
#[command(
    name = "infocache",
    version,
    about = "Cache content placement under unknown popularity: bandit policies, \
             knapsack solvers, and regret analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run {
        /// Path to the experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for CSV/JSON results.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the configured base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured replicate count.
        #[arg(long)]
        replicates: Option<usize>,
        /// Comma-separated policy list overriding the config.
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<String>>,
        /// Keep every period in the aggregate CSV instead of the decimated
        /// checkpoint grid.
        #[arg(long)]
        full_resolution: bool,
        /// Dump the first N replicate traces per (point, policy).
        #[arg(long, default_value_t = 0)]
        dump_traces: usize,
    },
    /// Evaluate the closed-form regret bounds on a small instance.
    Bounds {
        /// Path to the experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Largest period to evaluate the bounds at.
        #[arg(long)]
        t_max: u64,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the reference default configuration as TOML.
    PaperDefaults {
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            replicates,
            policies,
            full_resolution,
            dump_traces,
        } => {
            let cfg = ExperimentConfig::load(&config)
                .with_context(|| format!("loading config {}", config.display()))?;
            let summary = run_experiment(
                &cfg,
                &RunOptions {
                    out_dir: out,
                    seed,
                    replicates,
                    policies,
                    full_resolution,
                    dump_traces,
                },
            )?;
            for ((point, policy), eff) in &summary.final_efficiency {
                println!("{point} {policy}: efficiency {:.4}%", 100.0 * eff);
            }
            println!("results in {}", summary.out_dir.display());
        }
        Command::Bounds { config, t_max, out } => {
            let cfg = ExperimentConfig::load(&config)
                .with_context(|| format!("loading config {}", config.display()))?;
            let path = bounds_report(&cfg, t_max, &out)?;
            println!("bounds in {}", path.display());
        }
        Command::PaperDefaults { out } => {
            let text = ExperimentConfig::paper_defaults().to_toml_string()?;
            match out {
                Some(path) => std::fs::write(&path, text)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subcommands_parse() {
        let cli = Cli::try_parse_from([
            "infocache",
            "run",
            "--config",
            "x.toml",
            "--out",
            "results",
            "--seed",
            "7",
            "--replicates",
            "3",
            "--policies",
            "iub,cucb",
            "--full-resolution",
            "--dump-traces",
            "2",
        ])
        .unwrap();
        match cli.command {
            Command::Run {
                seed,
                replicates,
                policies,
                full_resolution,
                dump_traces,
                ..
            } => {
                assert_eq!(seed, Some(7));
                assert_eq!(replicates, Some(3));
                assert_eq!(policies, Some(vec!["iub".into(), "cucb".into()]));
                assert!(full_resolution);
                assert_eq!(dump_traces, 2);
            }
            _ => panic!("expected run"),
        }

        let cli =
            Cli::try_parse_from(["infocache", "bounds", "--config", "x.toml", "--t-max", "100"])
                .unwrap();
        assert!(matches!(cli.command, Command::Bounds { t_max: 100, .. }));

        let cli = Cli::try_parse_from(["infocache", "paper-defaults"]).unwrap();
        assert!(matches!(cli.command, Command::PaperDefaults { out: None }));
    }

    #[test]
    fn bounds_requires_t_max() {
        assert!(Cli::try_parse_from(["infocache", "bounds", "--config", "x.toml"]).is_err());
    }
}
