//! Sample-size rate study on the finite-state family: transport risk per
//! n, log-log slope, and a bootstrap interval.

use crate::dgp::{finite_state_dgp, Split, StateRecord, StateSampler};
use crate::error::{GaniceError, Result};
use crate::estimator::GaniceConfig;
use crate::eval::empirical_ew;
use crate::numeric::{mean, median, mix_seed, rng_stream};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateEstimator {
    /// The adversarial estimator itself.
    Ganice,
    /// Resamples the observed per-state outcomes (empirical-measure
    /// reference; its risk decays like the 1-D empirical transport rate).
    OracleResampler,
    /// Ignores the data beyond a global mean (flat risk reference).
    ConstantPredictor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateStudyConfig {
    pub n_grid: Vec<usize>,
    pub seeds_per_n: usize,
    pub states: usize,
    pub kappa: f64,
    pub beta: f64,
    pub estimator: RateEstimator,
    /// Estimator profile for the adversarial variant.
    #[serde(default)]
    pub ganice: Option<GaniceConfig>,
    pub b_eval: usize,
    pub base_seed: u64,
}

impl Default for RateStudyConfig {
    fn default() -> Self {
        RateStudyConfig {
            n_grid: vec![250, 1000, 4000],
            seeds_per_n: 5,
            states: 3,
            kappa: 0.8,
            beta: 1.0,
            estimator: RateEstimator::Ganice,
            ganice: None,
            b_eval: 500,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub n_grid: Vec<usize>,
    /// Risks per n over seeds.
    pub risks: Vec<Vec<f64>>,
    pub medians: Vec<f64>,
    pub slope: f64,
    pub slope_ci: (f64, f64),
}

struct Resampler {
    per_state: Vec<Vec<f64>>,
}

impl StateSampler for Resampler {
    fn sample_state(&self, state: &StateRecord, n: usize, seed: u64) -> Vec<f64> {
        let pool = &self.per_state[state.arm];
        let mut rng = rng_stream(seed, 0xb007);
        (0..n).map(|_| pool[rng.random_range(0..pool.len())]).collect()
    }
}

struct Constant(f64);

impl StateSampler for Constant {
    fn sample_state(&self, _state: &StateRecord, n: usize, _seed: u64) -> Vec<f64> {
        vec![self.0; n]
    }
}

pub fn run_rate_study(config: &RateStudyConfig) -> Result<RateReport> {
    if config.n_grid.len() < 3 {
        return Err(GaniceError::Config("rate study needs >= 3 sample sizes".into()));
    }
    if config.seeds_per_n == 0 {
        return Err(GaniceError::Config("seeds_per_n must be >= 1".into()));
    }
    let q = vec![1.0 / config.states as f64; config.states];

    let mut risks: Vec<Vec<f64>> = Vec::with_capacity(config.n_grid.len());
    for (ni, &n) in config.n_grid.iter().enumerate() {
        let mut row = Vec::with_capacity(config.seeds_per_n);
        for s in 0..config.seeds_per_n {
            let seed = mix_seed(config.base_seed, (ni * 1000 + s) as u64);
            let bench = finite_state_dgp(config.states, &q, config.kappa, config.beta, seed)?;
            let dataset = bench.sample_dataset(n, mix_seed(seed, 1))?;
            let design = bench.design()?;
            let oracle = bench.oracle();
            let indices: Vec<usize> = (0..design.len()).collect();
            let ew = match config.estimator {
                RateEstimator::Ganice => {
                    let mut cfg = config
                        .ganice
                        .clone()
                        .unwrap_or_else(GaniceConfig::finite_state_small);
                    cfg.seed = mix_seed(seed, 2);
                    let model = crate::estimator::train(&cfg, &dataset, &design)?.model;
                    empirical_ew(&model, &oracle, &design, &indices, config.b_eval, mix_seed(seed, 3))?
                }
                RateEstimator::OracleResampler => {
                    let mut per_state = vec![Vec::new(); config.states];
                    for i in dataset.rows_in(Split::Train) {
                        per_state[dataset.arms[i]].push(dataset.outcomes[i]);
                    }
                    if per_state.iter().any(Vec::is_empty) {
                        return Err(GaniceError::Contract(
                            "a state received no training data".into(),
                        ));
                    }
                    let sampler = Resampler { per_state };
                    empirical_ew(&sampler, &oracle, &design, &indices, config.b_eval, mix_seed(seed, 3))?
                }
                RateEstimator::ConstantPredictor => {
                    let train: Vec<f64> = dataset
                        .rows_in(Split::Train)
                        .iter()
                        .map(|&i| dataset.outcomes[i])
                        .collect();
                    let sampler = Constant(mean(&train));
                    empirical_ew(&sampler, &oracle, &design, &indices, config.b_eval, mix_seed(seed, 3))?
                }
            };
            row.push(ew);
        }
        risks.push(row);
    }

    let medians: Vec<f64> = risks.iter().map(|r| median(r)).collect();
    if medians.iter().any(|&m| m <= 0.0) {
        return Err(GaniceError::Contract(
            "zero risk encountered; log-log slope undefined".into(),
        ));
    }
    let slope = loglog_slope(&config.n_grid, &medians);

    // bootstrap over seeds within each n
    let mut rng = rng_stream(config.base_seed, 0xb00c);
    let mut slopes = Vec::with_capacity(200);
    for _ in 0..200 {
        let meds: Vec<f64> = risks
            .iter()
            .map(|row| {
                let draws: Vec<f64> = (0..row.len())
                    .map(|_| row[rng.random_range(0..row.len())])
                    .collect();
                median(&draws)
            })
            .collect();
        if meds.iter().all(|&m| m > 0.0) {
            slopes.push(loglog_slope(&config.n_grid, &meds));
        }
    }
    slopes.sort_by(f64::total_cmp);
    let ci = if slopes.is_empty() {
        (slope, slope)
    } else {
        (
            slopes[(slopes.len() as f64 * 0.025) as usize],
            slopes[((slopes.len() as f64 * 0.975) as usize).min(slopes.len() - 1)],
        )
    };

    Ok(RateReport {
        n_grid: config.n_grid.clone(),
        risks,
        medians,
        slope,
        slope_ci: ci,
    })
}

fn loglog_slope(ns: &[usize], medians: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = medians.iter().map(|&m| m.ln()).collect();
    let mx = mean(&xs);
    let my = mean(&ys);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
