//! Config-driven experiment runner: seeded repetitions over a method x
//! dataset matrix, append-only result streaming, aggregation, and an
//! exact-replay manifest.

use super::benchmarks::{BenchmarkInstance, DatasetSpec, FittedMethod, MethodSpec};
use crate::error::{GaniceError, Result};
use crate::estimator::GaniceConfig;
use crate::eval::{EvalOptions, MetricReport, CSV_COLUMNS};
use crate::numeric::{kahan_sum, mix_seed};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub b_ew: usize,
    pub b_cal: usize,
    /// Cap on evaluated test units (deterministic subsample); None uses
    /// every design state.
    pub max_eval_units: Option<usize>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            b_ew: 1000,
            b_cal: 2000,
            max_eval_units: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Estimator profile; None picks the benchmark default.
    #[serde(default)]
    pub ganice: Option<GaniceConfig>,
    #[serde(default)]
    pub eval: EvalSettings,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

fn default_reps() -> usize {
    10
}
fn default_threads() -> usize {
    1
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(GaniceError::Config("repetitions must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(GaniceError::Config("method list is empty".into()));
        }
        if self.eval.b_ew < 2 || self.eval.b_cal < 2 {
            return Err(GaniceError::Config("eval draw counts must be >= 2".into()));
        }
        if let Some(g) = &self.ganice {
            g.validate()?;
        }
        Ok(())
    }
}

/// Replay manifest: the resolved config plus the per-repetition seeds and
/// dataset hashes actually used.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub repetitions: Vec<RepRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepRecord {
    pub repetition: usize,
    pub seed: u64,
    pub dataset_hash: u64,
}

#[derive(Debug)]
pub struct RunSummary {
    pub reports: Vec<MetricReport>,
    pub failures: Vec<(usize, String)>,
    pub out_dir: PathBuf,
}

/// Load either a bare experiment config or a manifest (replay).
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| GaniceError::io(path.display().to_string(), e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let config: ExperimentConfig = if value.get("config").is_some() {
        serde_json::from_value(
            value
                .get("config")
                .cloned()
                .expect("checked presence above"),
        )
        .map_err(|e| GaniceError::Config(format!("manifest config: {e}")))?
    } else {
        serde_json::from_str(&text).map_err(|e| GaniceError::Config(format!("{e}")))?
    };
    config.validate()?;
    Ok(config)
}

fn append_row(file: &Mutex<std::fs::File>, line: &str) -> Result<()> {
    let mut f = file.lock().expect("results file lock");
    writeln!(f, "{line}").and_then(|_| f.flush()).map_err(|e| GaniceError::io("results", e))
}

/// Execute all repetitions. Per-repetition rows stream into
/// `results_stream.csv` as they finish (append + flush per row); the
/// sorted `results.csv`, `aggregate.csv`, per-repetition detail JSONs,
/// and the replay manifest are written at the end. Failed repetitions
/// are recorded and do not disturb completed rows.
pub fn run(config: &ExperimentConfig, out_dir: &Path, jobs_dir: Option<&Path>) -> Result<RunSummary> {
    config.validate()?;
    std::fs::create_dir_all(out_dir.join("details"))
        .map_err(|e| GaniceError::io(out_dir.display().to_string(), e))?;
    let stream_path = out_dir.join("results_stream.csv");
    let stream = Mutex::new(
        std::fs::File::create(&stream_path)
            .map_err(|e| GaniceError::io(stream_path.display().to_string(), e))?,
    );
    append_row(&stream, &MetricReport::csv_header())?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.max(1))
        .build()
        .map_err(|e| GaniceError::Config(format!("thread pool: {e}")))?;

    let results: Vec<std::result::Result<(RepRecord, Vec<MetricReport>), (usize, String)>> =
        pool.install(|| {
            use rayon::prelude::*;
            (0..config.repetitions)
                .into_par_iter()
                .map(|rep| {
                    run_repetition(config, rep, jobs_dir).map_err(|e| (rep, e.to_string()))
                })
                .map(|res| {
                    if let Ok((_, reports)) = &res {
                        for r in reports {
                            let _ = append_row(&stream, &r.csv_row());
                        }
                    }
                    res
                })
                .collect()
        });

    let mut reports = Vec::new();
    let mut rep_records = Vec::new();
    let mut failures = Vec::new();
    for res in results {
        match res {
            Ok((rec, rs)) => {
                rep_records.push(rec);
                reports.extend(rs);
            }
            Err(f) => failures.push(f),
        }
    }
    reports.sort_by(|a, b| (a.method.clone(), a.repetition).cmp(&(b.method.clone(), b.repetition)));
    rep_records.sort_by_key(|r| r.repetition);

    // final sorted per-repetition table
    let results_path = out_dir.join("results.csv");
    {
        let mut f = std::fs::File::create(&results_path)
            .map_err(|e| GaniceError::io(results_path.display().to_string(), e))?;
        writeln!(f, "{}", MetricReport::csv_header())
            .map_err(|e| GaniceError::io("results.csv", e))?;
        for r in &reports {
            writeln!(f, "{}", r.csv_row()).map_err(|e| GaniceError::io("results.csv", e))?;
        }
    }
    // detail JSONs
    for r in &reports {
        if r.detail.is_some() {
            let p = out_dir
                .join("details")
                .join(format!("{}_rep{}.json", r.method, r.repetition));
            std::fs::write(&p, serde_json::to_string_pretty(r)?)
                .map_err(|e| GaniceError::io(p.display().to_string(), e))?;
        }
    }
    write_aggregate(&reports, &out_dir.join("aggregate.csv"))?;
    let manifest = Manifest {
        config: config.clone(),
        repetitions: rep_records,
    };
    let mp = out_dir.join("manifest.json");
    std::fs::write(&mp, serde_json::to_string_pretty(&manifest)?)
        .map_err(|e| GaniceError::io(mp.display().to_string(), e))?;

    Ok(RunSummary {
        reports,
        failures,
        out_dir: out_dir.to_path_buf(),
    })
}

fn run_repetition(
    config: &ExperimentConfig,
    rep: usize,
    jobs_dir: Option<&Path>,
) -> Result<(RepRecord, Vec<MetricReport>)> {
    // base + repetition index seeds both the DGP/split and the methods,
    // so every method inside a repetition shares the same data
    let seed = config.base_seed.wrapping_add(rep as u64);
    let bench = BenchmarkInstance::build(&config.dataset, seed, jobs_dir)?;
    let dataset_hash = bench.dataset().content_hash();
    let ganice_cfg = config.ganice.clone().unwrap_or_else(|| bench.default_ganice());

    let opts = EvalOptions {
        b_ew: config.eval.b_ew,
        b_cal: config.eval.b_cal,
        seed: mix_seed(seed, 0xe7a1),
        ..Default::default()
    };

    let mut reports = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let fitted: FittedMethod = bench.fit(method, &ganice_cfg, mix_seed(seed, method as u64))?;
        let mut report = bench.evaluate(&fitted, &opts, config.eval.max_eval_units)?;
        report.method = method.name().to_string();
        report.repetition = rep;
        report.dataset_hash = dataset_hash;
        report.check_sane()?;
        reports.push(report);
    }
    Ok((
        RepRecord {
            repetition: rep,
            seed,
            dataset_hash,
        },
        reports,
    ))
}

/// Aggregate CSV: per method and metric, the mean and the standard error
/// over repetitions (sample sd / sqrt(R)).
pub fn write_aggregate(reports: &[MetricReport], path: &Path) -> Result<()> {
    let mut methods: Vec<String> = reports.iter().map(|r| r.method.clone()).collect();
    methods.sort();
    methods.dedup();
    let metric_names = &CSV_COLUMNS[3..];
    let mut f = std::fs::File::create(path)
        .map_err(|e| GaniceError::io(path.display().to_string(), e))?;
    writeln!(f, "method,metric,mean,std_err,reps").map_err(|e| GaniceError::io("aggregate", e))?;
    for m in &methods {
        let rows: Vec<&MetricReport> = reports.iter().filter(|r| &r.method == m).collect();
        for (k, name) in metric_names.iter().enumerate() {
            let vals: Vec<f64> = rows.iter().filter_map(|r| r.numeric_fields()[k]).collect();
            if vals.is_empty() {
                continue;
            }
            let mean = kahan_sum(vals.iter().copied()) / vals.len() as f64;
            let se = if vals.len() > 1 {
                (crate::numeric::variance(&vals) / vals.len() as f64).sqrt()
            } else {
                0.0
            };
            writeln!(f, "{m},{name},{mean},{se},{}", vals.len())
                .map_err(|e| GaniceError::io("aggregate", e))?;
        }
    }
    Ok(())
}

/// Parse a results CSV back into reports (used by replay checks and plot
/// emission).
pub fn read_results_csv(path: &Path) -> Result<Vec<MetricReport>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| GaniceError::io(path.display().to_string(), e))?;
    Ok(text
        .lines()
        .skip(1)
        .filter_map(MetricReport::parse_csv_row)
        .collect())
}
