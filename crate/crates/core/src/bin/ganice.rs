//! Experiment runner CLI: config-driven repetitions over the method x
//! dataset matrix, rate studies, plot-data emission, and config checks.

use clap::{Parser, Subcommand};
use ganice::exp::{emit_plot_data, load_config, run, run_rate_study, RateStudyConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ganice", version, about = "Distributional causal inference lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config-driven experiment (accepts a config or a manifest
    /// for exact replay).
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the number of repetitions.
        #[arg(long)]
        reps: Option<usize>,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: ./out).
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Directory with the job-training text files.
        #[arg(long)]
        jobs_data_dir: Option<PathBuf>,
        /// Worker threads for repetitions.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Transport-risk decay against sample size on the finite-state
    /// family.
    RateStudy {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Distill plot-ready CSVs from a completed results directory.
    PlotData {
        #[arg(long)]
        results: PathBuf,
    },
    /// Parse and validate an experiment config.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> ganice::Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            reps,
            seed,
            out,
            jobs_data_dir,
            threads,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(r) = reps {
                cfg.repetitions = r;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(t) = threads {
                cfg.threads = t;
            }
            let summary = run(&cfg, &out, jobs_data_dir.as_deref())?;
            println!(
                "wrote {} rows for {} repetitions to {}",
                summary.reports.len(),
                cfg.repetitions,
                summary.out_dir.display()
            );
            if summary.failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                for (rep, msg) in &summary.failures {
                    eprintln!("repetition {rep} failed: {msg}");
                }
                eprintln!("partial results preserved in {}", summary.out_dir.display());
                Ok(ExitCode::FAILURE)
            }
        }
        Command::RateStudy { config, out, seed } => {
            let mut cfg: RateStudyConfig = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p)
                        .map_err(|e| ganice::GaniceError::io(p.display().to_string(), e))?;
                    serde_json::from_str(&text)
                        .map_err(|e| ganice::GaniceError::Config(format!("{e}")))?
                }
                None => RateStudyConfig::default(),
            };
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            let report = run_rate_study(&cfg)?;
            std::fs::create_dir_all(&out)
                .map_err(|e| ganice::GaniceError::io(out.display().to_string(), e))?;
            let p = out.join("rate_study.json");
            std::fs::write(&p, serde_json::to_string_pretty(&report)?)
                .map_err(|e| ganice::GaniceError::io(p.display().to_string(), e))?;
            println!(
                "slope {:.4} (95% bootstrap [{:.4}, {:.4}]); medians {:?} -> {}",
                report.slope,
                report.slope_ci.0,
                report.slope_ci.1,
                report.medians,
                p.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::PlotData { results } => {
            let written = emit_plot_data(&results)?;
            for w in &written {
                println!("{w}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateConfig { config } => {
            let cfg = load_config(&config)?;
            println!(
                "valid: {} repetitions, {} methods, dataset {:?}",
                cfg.repetitions,
                cfg.methods.len(),
                cfg.dataset
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
