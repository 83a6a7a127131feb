//! Per-repetition metric record with CSV row / JSON detail export.

use serde::{Deserialize, Serialize};

pub const CSV_COLUMNS: [&str; 21] = [
    "method",
    "repetition",
    "dataset_hash",
    "ew",
    "crps",
    "crps_earn",
    "energy",
    "ks",
    "iqe",
    "qte_err",
    "dq_err",
    "tail_err",
    "cal_err",
    "pehe",
    "ate_err",
    "mise",
    "dpe",
    "pe",
    "att_err",
    "policy_value",
    "rct_w1",
];

/// One evaluation record for a (method, repetition) pair. Metrics that do
/// not apply to a benchmark stay `None` and serialize as empty CSV
/// fields.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub repetition: usize,
    pub dataset_hash: u64,
    pub ew: Option<f64>,
    pub crps: Option<f64>,
    /// Factual score on the original earnings scale (job-training data).
    pub crps_earn: Option<f64>,
    pub energy: Option<f64>,
    pub ks: Option<f64>,
    pub iqe: Option<f64>,
    pub qte_err: Option<f64>,
    pub dq_err: Option<f64>,
    pub tail_err: Option<f64>,
    pub cal_err: Option<f64>,
    pub pehe: Option<f64>,
    pub ate_err: Option<f64>,
    pub mise: Option<f64>,
    pub dpe: Option<f64>,
    pub pe: Option<f64>,
    pub att_err: Option<f64>,
    pub policy_value: Option<f64>,
    pub rct_w1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<MetricDetail>,
}

/// Plot-ready per-repetition payload (interval widths, PIT bins,
/// level-indexed curves, dose bands, arm CDFs).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetricDetail {
    pub coverage_levels: Vec<f64>,
    pub interval_widths: Vec<f64>,
    pub pit_bin_edges: Vec<f64>,
    pub pit_histogram: Vec<f64>,
    pub quantile_levels: Vec<f64>,
    /// |model QTE - true QTE| per level (binary benchmarks).
    pub qte_abs_err_per_level: Vec<f64>,
    /// Mean absolute quantile error per level.
    pub quantile_abs_err_per_level: Vec<f64>,
    /// Dose-indexed bands: rows (dose, model q10, model q50, model q90,
    /// true q10, true q50, true q90).
    pub dose_bands: Vec<[f64; 7]>,
    /// Arm-level CDF curves: rows (arm, y, model F, reference F).
    pub arm_cdf: Vec<[f64; 4]>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl MetricReport {
    pub fn csv_header() -> String {
        CSV_COLUMNS.join(",")
    }

    pub fn csv_row(&self) -> String {
        [
            self.method.clone(),
            self.repetition.to_string(),
            self.dataset_hash.to_string(),
            opt(self.ew),
            opt(self.crps),
            opt(self.crps_earn),
            opt(self.energy),
            opt(self.ks),
            opt(self.iqe),
            opt(self.qte_err),
            opt(self.dq_err),
            opt(self.tail_err),
            opt(self.cal_err),
            opt(self.pehe),
            opt(self.ate_err),
            opt(self.mise),
            opt(self.dpe),
            opt(self.pe),
            opt(self.att_err),
            opt(self.policy_value),
            opt(self.rct_w1),
        ]
        .join(",")
    }

    pub fn parse_csv_row(line: &str) -> Option<MetricReport> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != CSV_COLUMNS.len() {
            return None;
        }
        let f = |i: usize| -> Option<f64> { fields[i].parse().ok() };
        Some(MetricReport {
            method: fields[0].to_string(),
            repetition: fields[1].parse().ok()?,
            dataset_hash: fields[2].parse().ok()?,
            ew: f(3),
            crps: f(4),
            crps_earn: f(5),
            energy: f(6),
            ks: f(7),
            iqe: f(8),
            qte_err: f(9),
            dq_err: f(10),
            tail_err: f(11),
            cal_err: f(12),
            pehe: f(13),
            ate_err: f(14),
            mise: f(15),
            dpe: f(16),
            pe: f(17),
            att_err: f(18),
            policy_value: f(19),
            rct_w1: f(20),
            detail: None,
        })
    }

    /// Numeric fields in CSV order (for aggregation).
    pub fn numeric_fields(&self) -> [Option<f64>; 18] {
        [
            self.ew,
            self.crps,
            self.crps_earn,
            self.energy,
            self.ks,
            self.iqe,
            self.qte_err,
            self.dq_err,
            self.tail_err,
            self.cal_err,
            self.pehe,
            self.ate_err,
            self.mise,
            self.dpe,
            self.pe,
            self.att_err,
            self.policy_value,
            self.rct_w1,
        ]
    }

    /// Every populated metric must be finite; all but the signed policy
    /// value must be nonnegative.
    pub fn check_sane(&self) -> crate::error::Result<()> {
        let names = &CSV_COLUMNS[3..];
        for (k, v) in self.numeric_fields().iter().enumerate() {
            if let Some(x) = v {
                if !x.is_finite() {
                    return Err(crate::error::GaniceError::Contract(format!(
                        "metric {} is not finite",
                        names[k]
                    )));
                }
                if names[k] != "policy_value" && *x < 0.0 {
                    return Err(crate::error::GaniceError::Contract(format!(
                        "metric {} is negative: {x}",
                        names[k]
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_is_exact() {
        let r = MetricReport {
            method: "ganice".into(),
            repetition: 3,
            dataset_hash: 77,
            ew: Some(0.123456789012345),
            rct_w1: None,
            ..Default::default()
        };
        let back = MetricReport::parse_csv_row(&r.csv_row()).unwrap();
        assert_eq!(back.method, "ganice");
        assert_eq!(back.ew.unwrap().to_bits(), r.ew.unwrap().to_bits());
        assert!(back.rct_w1.is_none());
    }

    #[test]
    fn sanity_check_rejects_negative_and_nan() {
        let mut r = MetricReport {
            ew: Some(-0.1),
            ..Default::default()
        };
        assert!(r.check_sane().is_err());
        r.ew = Some(f64::NAN);
        assert!(r.check_sane().is_err());
        r.ew = Some(0.5);
        r.policy_value = Some(-100.0); // signed metric may be negative
        r.check_sane().unwrap();
    }
}
