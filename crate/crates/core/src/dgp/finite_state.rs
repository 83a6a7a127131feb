//! Finite-state family for rate experiments: per-state smooth latent
//! pushforward generators (truncated random Fourier series) with
//! controlled overlap between the observational and target designs.

use super::{Dataset, Standardization, StateRecord, StateSampler, TargetDesign};
use crate::error::{GaniceError, Result};
use crate::numeric::{rng_stream, Matrix};
use crate::transport::{ConditionalEnsemble, EmpiricalLaw};
use rand::Rng;
use serde::{Deserialize, Serialize};

const FOURIER_TERMS: usize = 16;

/// Smooth periodic map on the unit latent interval. Coefficients decay as
/// `k^-(beta + 1.5)`, so derivatives up to order ~(beta+1) stay bounded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourierGenerator {
    pub offset: f64,
    pub cos_coefs: Vec<f64>,
    pub sin_coefs: Vec<f64>,
}

impl FourierGenerator {
    pub fn draw(beta: f64, rng: &mut impl Rng) -> Self {
        let decay = beta + 1.5;
        let scale = 0.8;
        let mut cos_coefs = Vec::with_capacity(FOURIER_TERMS);
        let mut sin_coefs = Vec::with_capacity(FOURIER_TERMS);
        for k in 1..=FOURIER_TERMS {
            let s = scale * (k as f64).powf(-decay);
            cos_coefs.push(rng.random_range(-1.0..1.0) * s);
            sin_coefs.push(rng.random_range(-1.0..1.0) * s);
        }
        FourierGenerator {
            offset: rng.random_range(-0.5..0.5),
            cos_coefs,
            sin_coefs,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        let mut y = self.offset;
        for k in 1..=FOURIER_TERMS {
            let w = 2.0 * std::f64::consts::PI * k as f64 * u;
            y += self.cos_coefs[k - 1] * w.cos() + self.sin_coefs[k - 1] * w.sin();
        }
        y
    }

    /// Analytic Lipschitz bound: sum over terms of `2 pi k (|a_k| + |b_k|)`.
    pub fn lipschitz_bound(&self) -> f64 {
        (1..=FOURIER_TERMS)
            .map(|k| {
                2.0 * std::f64::consts::PI
                    * k as f64
                    * (self.cos_coefs[k - 1].abs() + self.sin_coefs[k - 1].abs())
            })
            .sum()
    }

    /// Analytic sup bound on |g|.
    pub fn sup_bound(&self) -> f64 {
        self.offset.abs()
            + self
                .cos_coefs
                .iter()
                .zip(self.sin_coefs.iter())
                .map(|(a, b)| a.abs() + b.abs())
                .sum::<f64>()
    }
}

/// Finite-state causal model: `M` states with target masses `q`,
/// observational masses `pi >= kappa q`, and true laws pushed forward from
/// a uniform latent by per-state smooth generators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteStateBenchmark {
    pub generators: Vec<FourierGenerator>,
    pub q: Vec<f64>,
    pub pi: Vec<f64>,
    pub kappa: f64,
}

/// Build the family. Observational masses are `kappa q + (1 - kappa)/M`,
/// which meets the overlap inequality by construction; `kappa = 1` forces
/// the designs to coincide.
pub fn finite_state_dgp(
    m_states: usize,
    q: &[f64],
    kappa: f64,
    beta: f64,
    seed: u64,
) -> Result<FiniteStateBenchmark> {
    if m_states == 0 || q.len() != m_states {
        return Err(GaniceError::Contract(format!(
            "need {m_states} masses, got {}",
            q.len()
        )));
    }
    if !(0.0 < kappa && kappa <= 1.0) {
        return Err(GaniceError::Contract(format!("kappa {kappa} outside (0,1]")));
    }
    let total: f64 = q.iter().sum();
    if (total - 1.0).abs() > 1e-9 || q.iter().any(|&x| x < 0.0) {
        return Err(GaniceError::Contract(format!(
            "target masses must be nonnegative and sum to 1 (got {total})"
        )));
    }
    if beta <= 0.0 {
        return Err(GaniceError::Contract("beta must be positive".into()));
    }
    let mut rng = rng_stream(seed, 0xf5_0e);
    let generators = (0..m_states)
        .map(|_| FourierGenerator::draw(beta, &mut rng))
        .collect();
    let pi: Vec<f64> = q
        .iter()
        .map(|&qj| kappa * qj + (1.0 - kappa) / m_states as f64)
        .collect();
    Ok(FiniteStateBenchmark {
        generators,
        q: q.to_vec(),
        pi,
        kappa,
    })
}

impl FiniteStateBenchmark {
    pub fn n_states(&self) -> usize {
        self.generators.len()
    }

    /// Embedding of state `j` into the partition cube.
    pub fn embed(&self, j: usize) -> f64 {
        (j as f64 + 0.5) / self.n_states() as f64
    }

    fn state_record(&self, j: usize) -> StateRecord {
        StateRecord {
            features: vec![self.embed(j)],
            cell_coords: vec![self.embed(j)],
            arm: j,
        }
    }

    /// Observational sample of size `n`: states from `pi`, outcome from
    /// the state's pushforward law.
    pub fn sample_dataset(&self, n: usize, seed: u64) -> Result<Dataset> {
        let m = self.n_states();
        let mut rng = rng_stream(seed, 0xf5_0b);
        let cum: Vec<f64> = self
            .pi
            .iter()
            .scan(0.0, |acc, &p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let mut arms = Vec::with_capacity(n);
        let mut outcomes = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random();
            let j = cum.partition_point(|&c| c < u).min(m - 1);
            arms.push(j);
            outcomes.push(self.generators[j].eval(rng.random()));
        }
        let features = Matrix::from_rows(arms.iter().map(|&j| vec![self.embed(j)]).collect());
        let mut split_rng = rng_stream(seed, 0xf5_0c);
        let splits = super::stratified_split(&arms, (0.7, 0.15), &mut split_rng);
        Ok(Dataset {
            features: features.clone(),
            cell_coords: features,
            arms,
            outcomes,
            splits,
            standardization: Standardization {
                cols: vec![],
                means: vec![],
                sds: vec![],
            },
            cal_rows: None,
        })
    }

    pub fn design(&self) -> Result<TargetDesign> {
        let states = (0..self.n_states()).map(|j| self.state_record(j)).collect();
        TargetDesign::new(states, self.q.clone(), Some(self.kappa))
    }

    pub fn oracle(&self) -> FiniteStateOracle<'_> {
        FiniteStateOracle { bench: self }
    }

    /// The true conditional ensemble, materialized with `draws` latent
    /// draws per state.
    pub fn true_ensemble(&self, draws: usize, seed: u64) -> Result<ConditionalEnsemble> {
        let mut states = Vec::new();
        let mut laws = Vec::new();
        for j in 0..self.n_states() {
            states.push(vec![self.embed(j)]);
            let mut rng = rng_stream(seed, 0xf5_10 + j as u64);
            laws.push(EmpiricalLaw::scalar(
                (0..draws).map(|_| self.generators[j].eval(rng.random())).collect(),
            ));
        }
        ConditionalEnsemble::new(states, laws, self.q.clone())
    }
}

pub struct FiniteStateOracle<'a> {
    bench: &'a FiniteStateBenchmark,
}

impl StateSampler for FiniteStateOracle<'_> {
    fn sample_state(&self, state: &StateRecord, n: usize, seed: u64) -> Vec<f64> {
        let g = &self.bench.generators[state.arm];
        let mut rng = rng_stream(seed, 0xf5_20 + state.arm as u64);
        (0..n).map(|_| g.eval(rng.random())).collect()
    }
}

/// Degenerate finite-state toy: each state's outcome law is a point mass
/// at its constant. Handy for recovery smoke checks.
pub fn point_mass_data(
    n: usize,
    consts: &[f64],
    seed: u64,
) -> Result<(Dataset, TargetDesign)> {
    let m = consts.len();
    if m == 0 || n < 2 * m {
        return Err(GaniceError::Contract(
            "need at least one state and a few rows per state".into(),
        ));
    }
    let embed = |j: usize| (j as f64 + 0.5) / m as f64;
    let mut rng = rng_stream(seed, 0xd17ac);
    let mut rows = Vec::with_capacity(n);
    let mut arms = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    for _ in 0..n {
        let j = rng.random_range(0..m);
        rows.push(vec![embed(j)]);
        arms.push(j);
        outcomes.push(consts[j]);
    }
    let features = Matrix::from_rows(rows);
    let mut split_rng = rng_stream(seed, 0xd17ad);
    let splits = super::stratified_split(&arms, (0.8, 0.1), &mut split_rng);
    let dataset = Dataset {
        features: features.clone(),
        cell_coords: features,
        arms,
        outcomes,
        splits,
        standardization: Standardization {
            cols: vec![],
            means: vec![],
            sds: vec![],
        },
        cal_rows: None,
    };
    let states = (0..m)
        .map(|j| StateRecord {
            features: vec![embed(j)],
            cell_coords: vec![embed(j)],
            arm: j,
        })
        .collect();
    let design = TargetDesign::uniform(states, None)?;
    Ok((dataset, design))
}
