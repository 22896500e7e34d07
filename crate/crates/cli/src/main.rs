use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use wheel_core::experiment::{calibrate_noise, emit_results, run_experiment, ExperimentConfig, FitOptions, OutputFormat};

#[derive(Parser)]
#[command(name = "hamster-wheel", version, about = "Simulate graph-state teleportation around a regenerating qubit ring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run a hop sweep and write negativity/fidelity rows.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Use exact outcome probabilities instead of sampled shots.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when omitted and not set in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Record wall-clock seconds per row.
        #[arg(long)]
        timing: bool,
    },
    /// Fit p2 (with p1 = p2/10) so the negativity at one hop count matches a target.
    CalibrateNoise {
        #[arg(long)]
        target_negativity: f64,
        #[arg(long)]
        at_hops: usize,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = FitOptions::default().p2_max)]
        p2_max: f64,
        #[arg(long, default_value_t = FitOptions::default().tolerance)]
        tolerance: f64,
    },
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ExperimentConfig::parse(&text).with_context(|| format!("in {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, exact, seed, out, format, timing } => {
            let mut cfg = load_config(&config)?;
            cfg.exact |= exact;
            cfg.timing |= timing;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(out) = out {
                cfg.output = Some(out);
            }
            if let Some(format) = format {
                cfg.format = match format {
                    Format::Csv => OutputFormat::Csv,
                    Format::Json => OutputFormat::Json,
                };
            }
            let rows = run_experiment(&cfg)?;
            match &cfg.output {
                Some(path) => {
                    let mut file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
                    emit_results(&rows, &cfg, cfg.format, &mut file)
                        .with_context(|| format!("writing {}", path.display()))?;
                }
                None => emit_results(&rows, &cfg, cfg.format, &mut io::stdout().lock())?,
            }
        }
        Command::CalibrateNoise { target_negativity, at_hops, config, p2_max, tolerance } => {
            let cfg = load_config(&config)?;
            let options = FitOptions { p2_max, tolerance, ..FitOptions::default() };
            let fit = calibrate_noise(&cfg, target_negativity, at_hops, options)?;
            for (p2, neg) in &fit.evaluations {
                eprintln!("p2 = {p2:.6}  negativity = {neg:.6}");
            }
            let m = fit.model;
            println!("p1 = {}", m.p1);
            println!("p2 = {}", m.p2);
            println!("eps01 = {}", m.eps01);
            println!("eps10 = {}", m.eps10);
            println!("reset_flip = {}", m.reset_flip);
            println!("mid_circuit_flips = {}", m.mid_circuit_flips);
            println!("# negativity at {at_hops} hops = {:.6}", fit.negativity);
            if !fit.converged {
                anyhow::bail!(
                    "no p2 in [0, {p2_max}] reaches negativity {target_negativity} within {tolerance} (closest {:.6})",
                    fit.negativity
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
