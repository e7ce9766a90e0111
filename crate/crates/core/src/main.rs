use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rblspi::harness::chain::{chain_report, format_report, ChainSettings};
use rblspi::harness::plot::{render_svg, Series};
use rblspi::harness::run::read_aggregate_csv;
use rblspi::harness::{run_experiment, write_outputs, ExperimentConfig};
use rblspi::Error;

#[derive(Parser)]
#[command(version, about = "Run and summarise least-squares policy iteration experiments")]
struct Cli {
    /// Worker threads (overrides the config)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (overrides the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sweep point of an experiment config and write CSV, SVG and summary files
    Run { config: PathBuf },
    /// Print the per-iteration chain-walk report for LSPI and BLSPI
    Chain {
        #[arg(long, default_value_t = 5000)]
        samples: usize,
        #[arg(long, default_value_t = 1e-6)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
    },
    /// Render an aggregate CSV as SVG
    Plot {
        aggregate: PathBuf,
        output: PathBuf,
        #[arg(long, default_value = "steps")]
        metric_label: String,
        #[arg(long, default_value_t = 100)]
        window: usize,
    },
    /// Check a config without running it
    Validate { config: PathBuf },
}

fn load(cli: &Cli, path: &Path) -> rblspi::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(dir) = &cli.out {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> rblspi::Result<()> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(cli, config)?;
            let result = run_experiment(&cfg, cfg.workers)?;
            let files = write_outputs(&result, &cfg, &cfg.output_dir)?;
            for s in &result.sweeps {
                let last = s.summary.last().map_or("n/a".to_string(), |w| format!("{:.2} ± {:.2}", w.mean, w.ci95));
                println!("{}: final window {} ({}), failed updates {}", s.point.label, last, result.metric.label(), s.failed_updates());
            }
            println!("wrote {}", files.raw.parent().unwrap_or(&cfg.output_dir).display());
        }
        Command::Chain { samples, alpha, beta } => {
            let settings = ChainSettings {
                seed: cli.seed.unwrap_or(0),
                samples: *samples,
                alpha: *alpha,
                beta: *beta,
                ..ChainSettings::default()
            };
            print!("{}", format_report(&chain_report(&settings)?));
        }
        Command::Plot { aggregate, output, metric_label, window } => {
            let series = read_aggregate_csv(aggregate)?;
            let series: Vec<Series> = series.iter().map(|(label, windows)| Series { label, windows }).collect();
            std::fs::write(output, render_svg(&series, *window, metric_label)?)?;
        }
        Command::Validate { config } => {
            let cfg = load(cli, config)?;
            println!("ok: {} sweep point(s), {} run(s) each", cfg.sweep_points().len(), cfg.runs);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
