//! Tidy long-format plot data distilled from a results directory.

use crate::error::{GaniceError, Result};
use crate::eval::MetricReport;
use crate::numeric::{mean, variance};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// Emit plot-ready CSVs from a completed run directory. Missing detail
/// files are reported and skipped. Returns the files written.
pub fn emit_plot_data(results_dir: &Path) -> Result<Vec<String>> {
    let details_dir = results_dir.join("details");
    let mut reports: Vec<MetricReport> = Vec::new();
    if details_dir.is_dir() {
        let mut entries: Vec<_> = std::fs::read_dir(&details_dir)
            .map_err(|e| GaniceError::io(details_dir.display().to_string(), e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .collect();
        entries.sort();
        for p in entries {
            if p.extension().is_some_and(|x| x == "json") {
                match std::fs::read_to_string(&p)
                    .ok()
                    .and_then(|t| serde_json::from_str::<MetricReport>(&t).ok())
                {
                    Some(r) => reports.push(r),
                    None => log::warn!("skipping unreadable detail file {}", p.display()),
                }
            }
        }
    }
    if reports.is_empty() {
        return Err(GaniceError::Contract(format!(
            "no detail files under {}",
            details_dir.display()
        )));
    }

    let mut written = Vec::new();
    let plot_dir = results_dir.join("plots");
    std::fs::create_dir_all(&plot_dir)
        .map_err(|e| GaniceError::io(plot_dir.display().to_string(), e))?;

    // quantile-level curves: |QTE error| and |quantile error| per level
    {
        let mut rows = Vec::new();
        for r in &reports {
            let Some(d) = &r.detail else { continue };
            for (k, &level) in d.quantile_levels.iter().enumerate() {
                if let Some(&v) = d.qte_abs_err_per_level.get(k) {
                    rows.push((r.method.clone(), "qte_abs_err".to_string(), level, v));
                }
                if let Some(&v) = d.quantile_abs_err_per_level.get(k) {
                    rows.push((r.method.clone(), "quantile_abs_err".to_string(), level, v));
                }
            }
        }
        if !rows.is_empty() {
            let p = plot_dir.join("quantile_curves.csv");
            let mut grouped: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
            for (m, kind, level, v) in rows {
                grouped.entry((m, kind, format!("{level}"))).or_default().push(v);
            }
            let mut f = create(&p)?;
            writeln!(f, "method,curve,level,mean,std_err").map_err(io_err)?;
            for ((m, kind, level), vals) in grouped {
                let se = (variance(&vals) / vals.len() as f64).sqrt();
                writeln!(f, "{m},{kind},{level},{},{se}", mean(&vals)).map_err(io_err)?;
            }
            written.push(p.display().to_string());
        }
    }

    // dose bands: lower <= median <= upper rows per dose
    {
        let mut grouped: BTreeMap<(String, String), Vec<[f64; 6]>> = BTreeMap::new();
        for r in &reports {
            let Some(d) = &r.detail else { continue };
            for row in &d.dose_bands {
                grouped
                    .entry((r.method.clone(), format!("{}", row[0])))
                    .or_default()
                    .push([row[1], row[2], row[3], row[4], row[5], row[6]]);
            }
        }
        if !grouped.is_empty() {
            let p = plot_dir.join("dose_bands.csv");
            let mut f = create(&p)?;
            writeln!(
                f,
                "method,dose,model_lower,model_median,model_upper,true_lower,true_median,true_upper"
            )
            .map_err(io_err)?;
            for ((m, dose), rows) in grouped {
                let col = |i: usize| mean(&rows.iter().map(|r| r[i]).collect::<Vec<_>>());
                writeln!(
                    f,
                    "{m},{dose},{},{},{},{},{},{}",
                    col(0),
                    col(1),
                    col(2),
                    col(3),
                    col(4),
                    col(5)
                )
                .map_err(io_err)?;
            }
            written.push(p.display().to_string());
        }
    }

    // arm-level CDF curves
    {
        let mut grouped: BTreeMap<(String, String, String), Vec<(f64, f64)>> = BTreeMap::new();
        for r in &reports {
            let Some(d) = &r.detail else { continue };
            for row in &d.arm_cdf {
                grouped
                    .entry((r.method.clone(), format!("{}", row[0]), format!("{}", row[1])))
                    .or_default()
                    .push((row[2], row[3]));
            }
        }
        if !grouped.is_empty() {
            let p = plot_dir.join("arm_cdf.csv");
            let mut f = create(&p)?;
            writeln!(f, "method,arm,y,model_cdf,reference_cdf").map_err(io_err)?;
            for ((m, arm, y), vals) in grouped {
                let fm = mean(&vals.iter().map(|v| v.0).collect::<Vec<_>>());
                let fr = mean(&vals.iter().map(|v| v.1).collect::<Vec<_>>());
                writeln!(f, "{m},{arm},{y},{fm},{fr}").map_err(io_err)?;
            }
            written.push(p.display().to_string());
        }
    }

    // interval widths and PIT histograms
    {
        let p = plot_dir.join("calibration_diagnostics.csv");
        let mut f = create(&p)?;
        writeln!(f, "method,repetition,kind,x,value").map_err(io_err)?;
        for r in &reports {
            let Some(d) = &r.detail else { continue };
            for (k, &c) in d.coverage_levels.iter().enumerate() {
                writeln!(f, "{},{},interval_width,{c},{}", r.method, r.repetition, d.interval_widths[k])
                    .map_err(io_err)?;
            }
            for (k, &h) in d.pit_histogram.iter().enumerate() {
                let center = (k as f64 + 0.5) / d.pit_histogram.len() as f64;
                writeln!(f, "{},{},pit,{center},{h}", r.method, r.repetition).map_err(io_err)?;
            }
        }
        written.push(p.display().to_string());
    }

    // ablation bars from the aggregate table
    let agg = results_dir.join("aggregate.csv");
    if agg.exists() {
        let text = std::fs::read_to_string(&agg).map_err(|e| GaniceError::io("aggregate", e))?;
        let p = plot_dir.join("ablation_bars.csv");
        let mut f = create(&p)?;
        writeln!(f, "method,metric,mean,std_err").map_err(io_err)?;
        for line in text.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() >= 4 && (fields[1] == "ew" || fields[1] == "rct_w1") {
                writeln!(f, "{},{},{},{}", fields[0], fields[1], fields[2], fields[3])
                    .map_err(io_err)?;
            }
        }
        written.push(p.display().to_string());
    }

    Ok(written)
}

fn create(p: &Path) -> Result<std::fs::File> {
    std::fs::File::create(p).map_err(|e| GaniceError::io(p.display().to_string(), e))
}

fn io_err(e: std::io::Error) -> GaniceError {
    GaniceError::io("plot data", e)
}
