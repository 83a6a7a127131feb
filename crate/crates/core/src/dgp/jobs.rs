//! Job-training benchmark loader: NSW randomized sample plus PSID
//! comparison controls from whitespace-delimited numeric text files in the
//! NBER column layout, with leakage-free per-source splits and an
//! asinh-transformed earnings outcome.

use super::synthetic::RankMap;
use super::{stratified_split, Dataset, Split, Standardization, StateRecord, TargetDesign};
use crate::error::{GaniceError, Result};
use crate::numeric::{rng_stream, Matrix};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobsPaths {
    pub nsw_treated: PathBuf,
    pub nsw_control: PathBuf,
    pub psid_controls: PathBuf,
}

impl JobsPaths {
    pub fn in_dir(dir: &Path) -> Self {
        JobsPaths {
            nsw_treated: dir.join("nsw_treated.txt"),
            nsw_control: dir.join("nsw_control.txt"),
            psid_controls: dir.join("psid_controls.txt"),
        }
    }

    pub fn all_exist(&self) -> bool {
        self.nsw_treated.exists() && self.nsw_control.exists() && self.psid_controls.exists()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobsSource {
    NswTreated,
    NswControl,
    Psid,
}

#[derive(Debug, Clone)]
struct JobsRow {
    treatment: f64,
    age: f64,
    education: f64,
    black: f64,
    hispanic: f64,
    married: f64,
    nodegree: f64,
    re75: f64,
    re78: f64,
}

/// Columns per source: NSW files carry 9 columns, PSID carries 10 (the
/// extra `re74` column, which is dropped).
fn parse_file(path: &Path, has_re74: bool) -> Result<Vec<JobsRow>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GaniceError::io(path.display().to_string(), e))?;
    let want_cols = if has_re74 { 10 } else { 9 };
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != want_cols {
            return Err(GaniceError::Parse {
                line: lineno + 1,
                detail: format!(
                    "{}: expected {want_cols} columns, found {}",
                    path.display(),
                    fields.len()
                ),
            });
        }
        let nums: Vec<f64> = fields
            .iter()
            .enumerate()
            .map(|(k, f)| {
                f.parse::<f64>().map_err(|_| GaniceError::Parse {
                    line: lineno + 1,
                    detail: format!("{}: column {k} not numeric: {f}", path.display()),
                })
            })
            .collect::<Result<_>>()?;
        let re75_idx = if has_re74 { 8 } else { 7 };
        rows.push(JobsRow {
            treatment: nums[0],
            age: nums[1],
            education: nums[2],
            black: nums[3],
            hispanic: nums[4],
            married: nums[5],
            nodegree: nums[6],
            re75: nums[re75_idx],
            re78: nums[re75_idx + 1],
        });
    }
    Ok(rows)
}

pub fn asinh_outcome(re78: f64) -> f64 {
    (re78 / 1000.0).asinh()
}

pub fn earnings_from_outcome(y: f64) -> f64 {
    1000.0 * y.sinh()
}

/// Loaded benchmark: dataset rows ordered NSW-treated, NSW-control, PSID.
pub struct JobsBenchmark {
    pub dataset: Dataset,
    pub design: TargetDesign,
    pub sources: Vec<JobsSource>,
    pub counts: (usize, usize, usize),
}

impl JobsBenchmark {
    pub fn rct_rows(&self) -> Vec<usize> {
        self.dataset.rows_in(Split::RctHoldout)
    }

    /// Observed outcomes (transformed scale) of the RCT holdout for one arm.
    pub fn rct_arm_outcomes(&self, arm: usize) -> Vec<f64> {
        self.rct_rows()
            .into_iter()
            .filter(|&i| self.dataset.arms[i] == arm)
            .map(|i| self.dataset.outcomes[i])
            .collect()
    }
}

/// Parse, assemble, standardize, and split the benchmark. Splits are
/// drawn per source (0.56 train / 0.24 validation / rest), the RCT
/// holdout is the NSW test fraction, and PSID units never enter it.
pub fn load_jobs(paths: &JobsPaths, seed: u64) -> Result<JobsBenchmark> {
    let treated = parse_file(&paths.nsw_treated, false)?;
    let control = parse_file(&paths.nsw_control, false)?;
    let psid = parse_file(&paths.psid_controls, true)?;
    let counts = (treated.len(), control.len(), psid.len());

    let mut rows: Vec<JobsRow> = Vec::new();
    let mut sources = Vec::new();
    for r in treated {
        rows.push(r);
        sources.push(JobsSource::NswTreated);
    }
    for r in control {
        rows.push(r);
        sources.push(JobsSource::NswControl);
    }
    for r in psid {
        rows.push(r);
        sources.push(JobsSource::Psid);
    }
    let n = rows.len();
    if n == 0 {
        return Err(GaniceError::Contract("no rows in the supplied files".into()));
    }

    // per-source split, then NSW test rows become the RCT holdout
    let source_ids: Vec<usize> = sources.iter().map(|s| *s as usize).collect();
    let mut split_rng = rng_stream(seed, 0x10b5);
    let mut splits = stratified_split(&source_ids, (0.56, 0.24), &mut split_rng);
    for i in 0..n {
        if splits[i] == Split::Test && sources[i] != JobsSource::Psid {
            splits[i] = Split::RctHoldout;
        }
    }

    // covariates: age, education, black, hispanic, married, nodegree, re75
    let x = Matrix::from_rows(
        rows.iter()
            .map(|r| {
                vec![
                    r.age,
                    r.education,
                    r.black,
                    r.hispanic,
                    r.married,
                    r.nodegree,
                    r.re75,
                ]
            })
            .collect(),
    );
    let arms: Vec<usize> = rows.iter().map(|r| r.treatment as usize).collect();
    let outcomes: Vec<f64> = rows.iter().map(|r| asinh_outcome(r.re78)).collect();

    let train_rows: Vec<usize> = (0..n).filter(|&i| splits[i] == Split::Train).collect();
    let continuous = vec![0usize, 1, 6];
    let standardization = Standardization::fit(&x, &train_rows, &continuous);
    let xs = standardization.apply(&x);

    let features = Matrix::from_rows(
        (0..n)
            .map(|i| {
                let mut f = xs.row(i).to_vec();
                f.push(arms[i] as f64);
                f
            })
            .collect(),
    );

    // cell map: standardized re75 rank, Black indicator, treatment
    let re75_rank = RankMap::fit(&train_rows.iter().map(|&i| xs.get(i, 6)).collect::<Vec<_>>());
    let cell_coords = Matrix::from_rows(
        (0..n)
            .map(|i| vec![re75_rank.eval(xs.get(i, 6)), xs.get(i, 2), arms[i] as f64])
            .collect(),
    );

    // calibration uses the NSW validation rows (randomized sample only)
    let cal_rows: Vec<usize> = (0..n)
        .filter(|&i| splits[i] == Split::Valid && sources[i] != JobsSource::Psid)
        .collect();

    let dataset = Dataset {
        features,
        cell_coords: cell_coords.clone(),
        arms: arms.clone(),
        outcomes,
        splits: splits.clone(),
        standardization,
        cal_rows: Some(cal_rows),
    };

    // target design: RCT-holdout covariates crossed with both arms
    let mut states = Vec::new();
    for i in dataset.rows_in(Split::RctHoldout) {
        for t in 0..2usize {
            let mut f = xs.row(i).to_vec();
            f.push(t as f64);
            let mut cc = cell_coords.row(i).to_vec();
            cc[2] = t as f64;
            states.push(StateRecord {
                features: f,
                cell_coords: cc,
                arm: t,
            });
        }
    }
    let design = TargetDesign::uniform(states, None)?;

    Ok(JobsBenchmark {
        dataset,
        design,
        sources,
        counts,
    })
}

/// Write synthetic stand-in files in the exact NBER layout and official
/// cardinalities (297 treated / 425 control / 2490 PSID). Used when the
/// real files are not on disk; the loader does not distinguish them.
pub fn write_synthetic_nber_fixture(dir: &Path, seed: u64) -> Result<JobsPaths> {
    std::fs::create_dir_all(dir).map_err(|e| GaniceError::io(dir.display().to_string(), e))?;
    let paths = JobsPaths::in_dir(dir);
    let mut rng = rng_stream(seed, 0x10f1);
    write_rows(&paths.nsw_treated, 297, 1.0, false, &mut rng)?;
    write_rows(&paths.nsw_control, 425, 0.0, false, &mut rng)?;
    write_rows(&paths.psid_controls, 2490, 0.0, true, &mut rng)?;
    Ok(paths)
}

fn write_rows(
    path: &Path,
    n: usize,
    treatment: f64,
    with_re74: bool,
    rng: &mut impl Rng,
) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| GaniceError::io(path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(f);
    for _ in 0..n {
        let age = rng.random_range(17..56) as f64;
        let education = rng.random_range(3..17) as f64;
        let black = f64::from(rng.random::<f64>() < if with_re74 { 0.25 } else { 0.8 });
        let hispanic = if black > 0.5 {
            0.0
        } else {
            f64::from(rng.random::<f64>() < 0.15)
        };
        let married = f64::from(rng.random::<f64>() < if with_re74 { 0.85 } else { 0.17 });
        let nodegree = f64::from(rng.random::<f64>() < 0.7);
        let earn = |rng: &mut dyn rand::RngCore, zero_p: f64, scale: f64| -> f64 {
            let r = rng;
            let u: f64 = r.random();
            if u < zero_p {
                0.0
            } else {
                let v: f64 = r.random::<f64>();
                (scale * (-(1.0 - v).ln())).min(60_000.0)
            }
        };
        let (zero_p, scale) = if with_re74 { (0.1, 16_000.0) } else { (0.3, 4_000.0) };
        let re74 = earn(rng, zero_p, scale);
        let re75 = earn(rng, zero_p, scale);
        let lift = if treatment > 0.5 { 1.35 } else { 1.0 };
        let re78 = earn(rng, zero_p * 0.9, scale * lift);
        let mut cols = vec![
            treatment, age, education, black, hispanic, married, nodegree,
        ];
        if with_re74 {
            cols.push(round2(re74));
        }
        cols.push(round2(re75));
        cols.push(round2(re78));
        let line: Vec<String> = cols.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(" ")).map_err(|e| GaniceError::io(path.display().to_string(), e))?;
    }
    Ok(())
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (tempfile::TempDir, JobsPaths) {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_synthetic_nber_fixture(dir.path(), 7).unwrap();
        (dir, paths)
    }

    #[test]
    fn fixture_parses_to_official_counts() {
        let (_dir, paths) = fixture();
        let b = load_jobs(&paths, 1).unwrap();
        assert_eq!(b.counts, (297, 425, 2490));
        assert_eq!(b.dataset.len(), 297 + 425 + 2490);
    }

    #[test]
    fn zero_earnings_map_to_zero_outcome() {
        assert_eq!(asinh_outcome(0.0), 0.0);
    }

    #[test]
    fn asinh_roundtrip_is_tight() {
        for re78 in [0.0, 12.5, 500.0, 9_930.05, 60_307.93] {
            let back = earnings_from_outcome(asinh_outcome(re78));
            assert!(
                (back - re78).abs() <= 1e-6 * re78.max(1.0),
                "{re78} -> {back}"
            );
        }
    }

    #[test]
    fn rct_holdout_is_nsw_only_and_disjoint_from_training() {
        let (_dir, paths) = fixture();
        let b = load_jobs(&paths, 3).unwrap();
        let rct = b.rct_rows();
        assert!(!rct.is_empty());
        for &i in &rct {
            assert_ne!(b.sources[i], JobsSource::Psid, "PSID unit in RCT holdout");
            assert_ne!(b.dataset.splits[i], Split::Train);
        }
        // both arms present in the holdout
        assert!(!b.rct_arm_outcomes(0).is_empty());
        assert!(!b.rct_arm_outcomes(1).is_empty());
        // psid test rows remain plain test
        let has_psid_test = (0..b.dataset.len())
            .any(|i| b.sources[i] == JobsSource::Psid && b.dataset.splits[i] == Split::Test);
        assert!(has_psid_test);
    }

    #[test]
    fn wrong_column_count_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nsw_treated.txt");
        std::fs::write(&p, "1 37 11 1 0 1 1 0 9930.05\n1 22 9 1 0\n").unwrap();
        let err = parse_file(&p, false).unwrap_err();
        match err {
            GaniceError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let paths = JobsPaths::in_dir(Path::new("/nonexistent-jobs-dir"));
        assert!(matches!(load_jobs(&paths, 0), Err(GaniceError::Io { .. })));
    }

    #[test]
    fn calibration_rows_are_nsw_validation() {
        let (_dir, paths) = fixture();
        let b = load_jobs(&paths, 5).unwrap();
        let cal = b.dataset.calibration_rows();
        assert!(!cal.is_empty());
        for &i in &cal {
            assert_ne!(b.sources[i], JobsSource::Psid);
            assert_eq!(b.dataset.splits[i], Split::Valid);
        }
    }
}
