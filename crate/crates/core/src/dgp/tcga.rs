//! TCGA-style dose-response benchmark: three treatment classes with a
//! continuous dosage, outcomes from a two-normal mixture around a
//! covariate- and dose-dependent response surface. Covariates come from
//! the synthetic expression-like generator; the causal law only sees them
//! through an 8-dimensional score vector.

use super::synthetic::{score_projection, synthetic_covariates, CovariateKind, RankMap};
use super::{dot, normal, stratified_split, Dataset, Split, Standardization, StateRecord, StateSampler, TargetDesign};
use crate::error::Result;
use crate::numeric::{logistic, rng_stream, Matrix};
use crate::transport::EmpiricalLaw;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

pub const SCORE_DIM: usize = 8;
pub const N_ARMS: usize = 3;
pub const DOSAGE_GRID: usize = 21;

pub const GAMMA_A: f64 = 1.0;
pub const ALPHA_D: f64 = 8.0;

/// Per-repetition coefficients for assignment and outcome laws, one set
/// per treatment arm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TcgaCoeffs {
    pub v: [Vec<f64>; N_ARMS],
    pub r: [Vec<f64>; N_ARMS],
    pub theta: [Vec<f64>; N_ARMS],
    pub q: [Vec<f64>; N_ARMS],
    pub s: [Vec<f64>; N_ARMS],
    pub u1: [Vec<f64>; N_ARMS],
    pub u2: [Vec<f64>; N_ARMS],
    pub lambda: [f64; N_ARMS],
    pub rho: [f64; N_ARMS],
    pub iota: [f64; N_ARMS],
}

impl TcgaCoeffs {
    pub fn draw(seed: u64) -> Self {
        let mut rng = rng_stream(seed, 0x7c6a);
        let dz = SCORE_DIM as f64;
        let mut triple = |sd: f64| -> [Vec<f64>; N_ARMS] {
            std::array::from_fn(|_| (0..SCORE_DIM).map(|_| sd / dz.sqrt() * normal(&mut rng)).collect())
        };
        let v = triple(0.9);
        let r = triple(1.0);
        let theta = triple(0.55);
        let q = triple(0.75);
        let s = triple(0.70);
        let u1 = triple(0.65);
        let u2 = triple(0.65);
        let lambda = std::array::from_fn(|_| rng.random_range(0.8..1.5));
        let rho = std::array::from_fn(|_| rng.random_range(-0.30..0.30));
        let iota = std::array::from_fn(|_| 0.12 * normal(&mut rng));
        TcgaCoeffs {
            v,
            r,
            theta,
            q,
            s,
            u1,
            u2,
            lambda,
            rho,
            iota,
        }
    }

    pub fn zeros() -> Self {
        let z: [Vec<f64>; N_ARMS] = std::array::from_fn(|_| vec![0.0; SCORE_DIM]);
        TcgaCoeffs {
            v: z.clone(),
            r: z.clone(),
            theta: z.clone(),
            q: z.clone(),
            s: z.clone(),
            u1: z.clone(),
            u2: z,
            lambda: [1.0; N_ARMS],
            rho: [0.0; N_ARMS],
            iota: [0.0; N_ARMS],
        }
    }

    /// Covariate-dependent optimal dosage of arm `a` (1-based arm ids).
    pub fn d_star(&self, z: &[f64], a: usize) -> f64 {
        logistic(dot(&self.r[a - 1], z))
    }

    /// Conditional mean response at (z, a, d).
    pub fn eta(&self, z: &[f64], a: usize, d: f64) -> f64 {
        let k = a - 1;
        let ds = self.d_star(z, a);
        self.iota[k] + dot(&self.theta[k], z) - self.lambda[k] * (d - ds) * (d - ds)
            + self.rho[k] * (2.0 * std::f64::consts::PI * d).sin()
    }

    pub fn mixture_params(&self, z: &[f64], a: usize, d: f64) -> TcgaMixture {
        let k = a - 1;
        TcgaMixture {
            mean: self.eta(z, a, d),
            pi: logistic(dot(&self.q[k], z) + 2.0 * d - 1.0),
            delta: 0.5 + 0.5 * (dot(&self.s[k], z) + d).tanh(),
            sigma1: 0.1 + 0.3 * logistic(dot(&self.u1[k], z) + d),
            sigma2: 0.2 + 0.5 * logistic(dot(&self.u2[k], z) - d),
        }
    }
}

/// Two-normal mixture with mean-preserving offsets: component means are
/// `mean + (1-pi) delta` and `mean - pi delta`, so the mixture mean is
/// `mean` exactly.
#[derive(Debug, Clone, Copy)]
pub struct TcgaMixture {
    pub mean: f64,
    pub pi: f64,
    pub delta: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl TcgaMixture {
    pub fn draw(&self, rng: &mut impl Rng) -> f64 {
        if rng.random::<f64>() < self.pi {
            self.mean + (1.0 - self.pi) * self.delta + self.sigma1 * normal(rng)
        } else {
            self.mean - self.pi * self.delta + self.sigma2 * normal(rng)
        }
    }

    pub fn variance(&self) -> f64 {
        self.pi * self.sigma1 * self.sigma1
            + (1.0 - self.pi) * self.sigma2 * self.sigma2
            + self.pi * (1.0 - self.pi) * self.delta * self.delta
    }
}

/// Draw `n_draws` outcomes from the dose-response law at (z, a, d).
pub fn tcga_sample(
    coeffs: &TcgaCoeffs,
    z: &[f64],
    a: usize,
    d: f64,
    n_draws: usize,
    seed: u64,
) -> Result<EmpiricalLaw> {
    if !(0.0..=1.0).contains(&d) {
        return Err(crate::error::GaniceError::Domain(format!(
            "dosage {d} outside [0,1]"
        )));
    }
    let mix = coeffs.mixture_params(z, a, d);
    let mut rng = rng_stream(seed, 0x7c_50 + a as u64);
    Ok(EmpiricalLaw::scalar(
        (0..n_draws).map(|_| mix.draw(&mut rng)).collect(),
    ))
}

/// Observational treatment and dosage assignment: softmax over arm scores
/// and a Beta dosage concentrated near the arm's optimal dose.
pub fn tcga_assign(coeffs: &TcgaCoeffs, z: &[f64], rng: &mut impl Rng) -> (usize, f64) {
    let scores: Vec<f64> = (0..N_ARMS)
        .map(|k| GAMMA_A * dot(&coeffs.v[k], z))
        .collect();
    let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - mx).exp()).collect();
    let z_norm: f64 = exps.iter().sum();
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut arm = N_ARMS;
    for (k, e) in exps.iter().enumerate() {
        acc += e / z_norm;
        if u < acc {
            arm = k + 1;
            break;
        }
    }
    if arm > N_ARMS {
        arm = N_ARMS;
    }
    let ds = coeffs.d_star(z, arm);
    let beta = Beta::new(1.0 + ALPHA_D * ds, 1.0 + ALPHA_D * (1.0 - ds)).expect("valid Beta");
    (arm, beta.sample(rng))
}

pub fn arm_probabilities(coeffs: &TcgaCoeffs, z: &[f64]) -> [f64; N_ARMS] {
    let scores: Vec<f64> = (0..N_ARMS)
        .map(|k| GAMMA_A * dot(&coeffs.v[k], z))
        .collect();
    let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - mx).exp()).collect();
    let total: f64 = exps.iter().sum();
    std::array::from_fn(|k| exps[k] / total)
}

/// One repetition of the TCGA-style benchmark at a configurable scale.
pub struct TcgaBenchmark {
    pub dataset: Dataset,
    pub design: TargetDesign,
    pub coeffs: TcgaCoeffs,
    pub scores: Matrix,
    design_states: Vec<(usize, usize, usize)>,
}

impl TcgaBenchmark {
    /// `n` units with `d` expression-like covariates. Dosage grid for the
    /// target design is the fixed 21-point grid.
    pub fn generate(n: usize, d: usize, seed: u64) -> Result<Self> {
        let x = synthetic_covariates(n, d, CovariateKind::TcgaLike, seed)?;
        // arbitrary split groups (no stratification variable yet): use a
        // single group, then standardize on train rows
        let groups = vec![0usize; n];
        let mut split_rng = rng_stream(seed, 0x7c_a2);
        let splits = stratified_split(&groups, (0.64, 0.16), &mut split_rng);
        let train_rows: Vec<usize> = (0..n).filter(|&i| splits[i] == Split::Train).collect();

        let cols: Vec<usize> = (0..d).collect();
        let standardization = Standardization::fit(&x, &train_rows, &cols);
        let xs = standardization.apply(&x);

        let proj = score_projection(d, SCORE_DIM, crate::numeric::mix_seed(seed, 0x7c_a3));
        let mut scores = Matrix::zeros(n, SCORE_DIM);
        for i in 0..n {
            for k in 0..SCORE_DIM {
                let zk: f64 = (0..d).map(|j| xs.get(i, j) * proj.get(j, k)).sum();
                scores.set(i, k, zk);
            }
        }

        let coeffs = TcgaCoeffs::draw(crate::numeric::mix_seed(seed, 0x7c_a4));

        let mut assign_rng = rng_stream(seed, 0x7c_a5);
        let mut arms = Vec::with_capacity(n);
        let mut doses = Vec::with_capacity(n);
        for i in 0..n {
            let (a, dd) = tcga_assign(&coeffs, scores.row(i), &mut assign_rng);
            arms.push(a);
            doses.push(dd);
        }

        let mut out_rng = rng_stream(seed, 0x7c_a6);
        let outcomes: Vec<f64> = (0..n)
            .map(|i| {
                coeffs
                    .mixture_params(scores.row(i), arms[i], doses[i])
                    .draw(&mut out_rng)
            })
            .collect();

        // generator features: scores, one-hot arm, dosage
        let features = Matrix::from_rows(
            (0..n)
                .map(|i| feature_vec(scores.row(i), arms[i], doses[i]))
                .collect(),
        );

        // cell map: leading score rank (resolution 0), arm coordinate,
        // dosage
        let rank1 = RankMap::fit(&train_rows.iter().map(|&i| scores.get(i, 0)).collect::<Vec<_>>());
        let cell_coords = Matrix::from_rows(
            (0..n)
                .map(|i| {
                    vec![
                        rank1.eval(scores.get(i, 0)),
                        arm_coord(arms[i]),
                        doses[i],
                    ]
                })
                .collect(),
        );

        let dataset = Dataset {
            features,
            cell_coords: cell_coords.clone(),
            arms: arms.clone(),
            outcomes,
            splits: splits.clone(),
            standardization,
            cal_rows: None,
        };

        // design: test units x arms x dosage grid
        let test_rows = dataset.rows_in(Split::Test);
        let mut states = Vec::new();
        let mut design_states = Vec::new();
        for &i in &test_rows {
            for a in 1..=N_ARMS {
                for g in 0..DOSAGE_GRID {
                    let dd = g as f64 / (DOSAGE_GRID - 1) as f64;
                    states.push(StateRecord {
                        features: feature_vec(scores.row(i), a, dd),
                        cell_coords: vec![rank1.eval(scores.get(i, 0)), arm_coord(a), dd],
                        arm: a,
                    });
                    design_states.push((i, a, g));
                }
            }
        }
        let design = TargetDesign::uniform(states, None)?;

        Ok(TcgaBenchmark {
            dataset,
            design,
            coeffs,
            scores,
            design_states,
        })
    }

    pub fn true_mean(&self, state: &StateRecord) -> f64 {
        let z = state_scores(state);
        let d = state_dose(state);
        self.coeffs.eta(z, state.arm, d)
    }

    pub fn oracle(&self) -> TcgaOracle<'_> {
        TcgaOracle { coeffs: &self.coeffs }
    }

    pub fn design_unit(&self, state_idx: usize) -> (usize, usize, usize) {
        self.design_states[state_idx]
    }
}

pub(crate) fn feature_vec(z: &[f64], arm: usize, dose: f64) -> Vec<f64> {
    let mut f = z.to_vec();
    for a in 1..=N_ARMS {
        f.push(if a == arm { 1.0 } else { 0.0 });
    }
    f.push(dose);
    f
}

pub(crate) fn arm_coord(arm: usize) -> f64 {
    (arm as f64 - 0.5) / N_ARMS as f64
}

fn state_scores(state: &StateRecord) -> &[f64] {
    &state.features[..SCORE_DIM]
}

fn state_dose(state: &StateRecord) -> f64 {
    *state.features.last().unwrap()
}

pub struct TcgaOracle<'a> {
    coeffs: &'a TcgaCoeffs,
}

impl StateSampler for TcgaOracle<'_> {
    fn sample_state(&self, state: &StateRecord, n: usize, seed: u64) -> Vec<f64> {
        let z = state_scores(state);
        let d = state_dose(state);
        tcga_sample(self.coeffs, z, state.arm, d, n, seed)
            .expect("dose from a valid state")
            .values()
            .to_vec()
    }
}
