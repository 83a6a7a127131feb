//! Benchmark data sources: semi-synthetic generators with known
//! interventional laws, a finite-state family for rate experiments, and
//! the real job-training data loader with leakage-free splits.

pub mod finite_state;
pub mod ihdp;
pub mod jobs;
pub mod synthetic;
pub mod tcga;

pub use finite_state::{finite_state_dgp, point_mass_data, FiniteStateBenchmark, FourierGenerator};
pub use ihdp::{ihdp_covariates, ihdp_sample, IhdpBenchmark, IhdpCoeffs};
pub use jobs::{asinh_outcome, earnings_from_outcome, load_jobs, write_synthetic_nber_fixture, JobsBenchmark, JobsPaths, JobsSource};
pub use synthetic::{score_projection, synthetic_covariates, top_principal_components, CovariateKind};
pub use tcga::{arm_probabilities, tcga_assign, tcga_sample, TcgaBenchmark, TcgaCoeffs};

use crate::error::{GaniceError, Result};
use crate::numeric::{hash_f64s, kahan_sum, Matrix};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    Valid,
    Test,
    RctHoldout,
}

/// Column standardization statistics, fitted on the training split only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardization {
    pub cols: Vec<usize>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardization {
    pub fn fit(x: &Matrix, rows: &[usize], cols: &[usize]) -> Self {
        let mut means = Vec::with_capacity(cols.len());
        let mut sds = Vec::with_capacity(cols.len());
        for &c in cols {
            let vals: Vec<f64> = rows.iter().map(|&r| x.get(r, c)).collect();
            let m = crate::numeric::mean(&vals);
            let sd = crate::numeric::variance(&vals).sqrt().max(1e-9);
            means.push(m);
            sds.push(sd);
        }
        Standardization {
            cols: cols.to_vec(),
            means,
            sds,
        }
    }

    /// Standardize the tracked columns of a copy of `x`.
    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (k, &c) in self.cols.iter().enumerate() {
                out.set(i, c, (x.get(i, c) - self.means[k]) / self.sds[k]);
            }
        }
        out
    }
}

/// A prepared benchmark dataset. `features` condition the generator,
/// `cell_coords` live in the partition cube, and `arms` key calibration
/// and residual pools.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Matrix,
    pub cell_coords: Matrix,
    pub arms: Vec<usize>,
    pub outcomes: Vec<f64>,
    pub splits: Vec<Split>,
    pub standardization: Standardization,
    /// Rows used for post-hoc quantile calibration; defaults to the
    /// validation split when absent.
    pub cal_rows: Option<Vec<usize>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn rows_in(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    pub fn calibration_rows(&self) -> Vec<usize> {
        match &self.cal_rows {
            Some(rows) => rows.clone(),
            None => self.rows_in(Split::Valid),
        }
    }

    /// Order-sensitive content hash used for shared-seed discipline checks.
    pub fn content_hash(&self) -> u64 {
        let mut parts = Vec::with_capacity(self.len() * 3);
        parts.extend(self.features.data().iter().copied());
        parts.extend(self.cell_coords.data().iter().copied());
        parts.extend(self.outcomes.iter().copied());
        parts.extend(self.arms.iter().map(|&a| a as f64));
        parts.extend(self.splits.iter().map(|&s| s as u8 as f64));
        hash_f64s(parts)
    }
}

/// One treatment-covariate evaluation state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateRecord {
    pub features: Vec<f64>,
    pub cell_coords: Vec<f64>,
    pub arm: usize,
}

/// Finite-support target design: the states interventional laws are
/// evaluated and generated at, with their masses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetDesign {
    pub states: Vec<StateRecord>,
    pub masses: Vec<f64>,
    pub kappa: Option<f64>,
    cumulative: Vec<f64>,
}

impl TargetDesign {
    pub fn new(states: Vec<StateRecord>, masses: Vec<f64>, kappa: Option<f64>) -> Result<Self> {
        if states.is_empty() || states.len() != masses.len() {
            return Err(GaniceError::Contract(
                "target design needs matching nonempty states and masses".into(),
            ));
        }
        let total = kahan_sum(masses.iter().copied());
        if (total - 1.0).abs() > 1e-9 || masses.iter().any(|&m| m < 0.0) {
            return Err(GaniceError::Contract(format!(
                "design masses must be nonnegative and sum to 1 (got {total})"
            )));
        }
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut run = 0.0;
        for &m in &masses {
            run += m;
            cumulative.push(run);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(TargetDesign {
            states,
            masses,
            kappa,
            cumulative,
        })
    }

    pub fn uniform(states: Vec<StateRecord>, kappa: Option<f64>) -> Result<Self> {
        let n = states.len();
        Self::new(states, vec![1.0 / n as f64; n], kappa)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn sample_index(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        self.cumulative.partition_point(|&c| c < u).min(self.len() - 1)
    }
}

/// Anything that can draw outcome samples conditionally on a state: fitted
/// models, oracle laws, plug-in baselines.
pub trait StateSampler {
    fn sample_state(&self, state: &StateRecord, n: usize, seed: u64) -> Vec<f64>;
}

/// Student-t draw with integer degrees of freedom, via the normal /
/// chi-square ratio.
pub fn student_t(rng: &mut impl Rng, nu: u32) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    let mut chi2 = 0.0;
    for _ in 0..nu {
        let g: f64 = StandardNormal.sample(rng);
        chi2 += g * g;
    }
    z / (chi2 / nu as f64).sqrt()
}

pub(crate) fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Stratified split by group label: within each group, `fracs.0` to train
/// and `fracs.1` to validation (floors), remainder to test.
pub fn stratified_split(
    groups: &[usize],
    fracs: (f64, f64),
    rng: &mut impl Rng,
) -> Vec<Split> {
    let mut by_group: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &g) in groups.iter().enumerate() {
        by_group.entry(g).or_default().push(i);
    }
    let mut splits = vec![Split::Test; groups.len()];
    for (_, mut idx) in by_group {
        shuffle(&mut idx, rng);
        let n = idx.len();
        let n_train = (fracs.0 * n as f64).floor() as usize;
        let n_valid = (fracs.1 * n as f64).floor() as usize;
        for (k, &i) in idx.iter().enumerate() {
            splits[i] = if k < n_train {
                Split::Train
            } else if k < n_train + n_valid {
                Split::Valid
            } else {
                Split::Test
            };
        }
    }
    splits
}

pub(crate) fn shuffle(idx: &mut [usize], rng: &mut impl Rng) {
    for i in (1..idx.len()).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng_stream;

    #[test]
    fn student_t_has_heavy_tails() {
        // excess kurtosis of t_5 is 6/(5-4) = 6; estimate should be well
        // above the normal value of 0
        let mut rng = rng_stream(2, 0);
        let draws: Vec<f64> = (0..200_000).map(|_| student_t(&mut rng, 5)).collect();
        let m = crate::numeric::mean(&draws);
        let var = crate::numeric::variance(&draws);
        let m4 = crate::numeric::mean(&draws.iter().map(|x| (x - m).powi(4)).collect::<Vec<_>>());
        let excess = m4 / (var * var) - 3.0;
        assert!(excess > 2.0, "excess kurtosis {excess}");
        // t_5 variance is nu/(nu-2) = 5/3
        assert!((var - 5.0 / 3.0).abs() < 0.25, "variance {var}");
    }

    #[test]
    fn stratified_split_partitions_groups() {
        let groups: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let mut rng = rng_stream(5, 5);
        let splits = stratified_split(&groups, (0.63, 0.27), &mut rng);
        let count = |s: Split, g: usize| {
            splits
                .iter()
                .zip(groups.iter())
                .filter(|(x, y)| **x == s && **y == g)
                .count()
        };
        for g in 0..2 {
            assert_eq!(count(Split::Train, g), 31);
            assert_eq!(count(Split::Valid, g), 13);
            assert_eq!(count(Split::Test, g), 6);
        }
    }

    #[test]
    fn design_sampling_follows_masses() {
        let states = (0..3)
            .map(|i| StateRecord {
                features: vec![i as f64],
                cell_coords: vec![0.5],
                arm: 0,
            })
            .collect();
        let d = TargetDesign::new(states, vec![0.1, 0.6, 0.3], None).unwrap();
        let mut rng = rng_stream(4, 4);
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            counts[d.sample_index(&mut rng)] += 1;
        }
        assert!((counts[1] as f64 / 30_000.0 - 0.6).abs() < 0.02);
    }

    #[test]
    fn standardization_uses_only_train_stats() {
        let x = Matrix::from_rows(vec![vec![1.0], vec![3.0], vec![100.0]]);
        let st = Standardization::fit(&x, &[0, 1], &[0]);
        assert_eq!(st.means[0], 2.0);
        let full = Standardization::fit(&x, &[0, 1, 2], &[0]);
        assert_ne!(st.means[0], full.means[0], "train stats differ from full");
        let z = st.apply(&x);
        assert!((z.get(0, 0) + z.get(1, 0)).abs() < 1e-12);
    }
}
