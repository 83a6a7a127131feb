//! IHDP-style semi-synthetic benchmark: binary treatment, 25 covariates,
//! stochastic potential outcomes from a normal / Student-t mixture whose
//! conditional mean, mixing weight, offsets, and scales all depend on the
//! standardized covariates.

use super::synthetic::{top_principal_components, RankMap};
use super::{dot, normal, stratified_split, student_t, Dataset, Split, Standardization, StateRecord, StateSampler, TargetDesign};
use crate::error::Result;
use crate::numeric::{logistic, rng_stream, Matrix};
use crate::transport::EmpiricalLaw;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const IHDP_DIM: usize = 25;
pub const IHDP_CONTINUOUS: usize = 6;
pub const IHDP_N: usize = 747;

/// Marginal frequencies for the 19 binary covariates of the surrogate
/// covariate generator (fixed, chosen to resemble typical birth-cohort
/// indicator rates).
const BINARY_RATES: [f64; 19] = [
    0.515, 0.492, 0.134, 0.514, 0.262, 0.318, 0.419, 0.605, 0.112, 0.086, 0.383, 0.251, 0.091,
    0.132, 0.468, 0.247, 0.353, 0.166, 0.071,
];

/// Per-repetition outcome-law coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IhdpCoeffs {
    pub b0: Vec<f64>,
    pub b_tau: Vec<f64>,
    pub b_pi: [Vec<f64>; 2],
    pub b_delta: [Vec<f64>; 2],
    pub b_sigma1: [Vec<f64>; 2],
    pub b_sigma2: [Vec<f64>; 2],
    pub nu: u32,
}

impl IhdpCoeffs {
    /// b0, b_tau entries ~ N(0, 1/d); remainder ~ N(0, 2.5^2/d); nu = 5.
    pub fn draw(d: usize, seed: u64) -> Self {
        let mut rng = rng_stream(seed, 0x1dbc);
        let mut vec_with_sd = |sd: f64| -> Vec<f64> {
            (0..d).map(|_| sd * normal(&mut rng)).collect()
        };
        let sd_main = (1.0 / d as f64).sqrt();
        let sd_aux = 2.5 / (d as f64).sqrt();
        let b0 = vec_with_sd(sd_main);
        let b_tau = vec_with_sd(sd_main);
        let b_pi = [vec_with_sd(sd_aux), vec_with_sd(sd_aux)];
        let b_delta = [vec_with_sd(sd_aux), vec_with_sd(sd_aux)];
        let b_sigma1 = [vec_with_sd(sd_aux), vec_with_sd(sd_aux)];
        let b_sigma2 = [vec_with_sd(sd_aux), vec_with_sd(sd_aux)];
        IhdpCoeffs {
            b0,
            b_tau,
            b_pi,
            b_delta,
            b_sigma1,
            b_sigma2,
            nu: 5,
        }
    }

    pub fn zeros(d: usize) -> Self {
        let z = vec![0.0; d];
        IhdpCoeffs {
            b0: z.clone(),
            b_tau: z.clone(),
            b_pi: [z.clone(), z.clone()],
            b_delta: [z.clone(), z.clone()],
            b_sigma1: [z.clone(), z.clone()],
            b_sigma2: [z.clone(), z],
            nu: 5,
        }
    }

    pub fn m0(&self, x: &[f64]) -> f64 {
        (0.2 * dot(&self.b0, x)).exp() - 1.0
    }

    pub fn tau(&self, x: &[f64]) -> f64 {
        1.0 + 0.5 * dot(&self.b_tau, x).tanh()
    }

    /// Conditional mean of the potential outcome under arm `t`.
    pub fn mean(&self, x: &[f64], t: usize) -> f64 {
        match t {
            0 => self.m0(x),
            _ => self.m0(x) + self.tau(x),
        }
    }

    pub fn mixture_params(&self, x: &[f64], t: usize) -> IhdpMixture {
        let m = self.mean(x, t);
        let pi = logistic(dot(&self.b_pi[t], x));
        let delta = 0.5 + 0.5 * dot(&self.b_delta[t], x).tanh();
        let sigma1 = 0.2 + 0.3 * logistic(dot(&self.b_sigma1[t], x));
        let sigma2 = 0.3 + 0.5 * logistic(dot(&self.b_sigma2[t], x));
        IhdpMixture {
            mean: m,
            pi,
            delta,
            sigma1,
            sigma2,
            nu: self.nu,
        }
    }
}

/// Resolved mixture at one state: with probability `pi` a normal at
/// `mean + (1-pi) delta` with sd `sigma1`, otherwise a Student-t at
/// `mean - pi delta` with scale `sigma2`. The offsets cancel, so the
/// mixture mean equals `mean` exactly.
#[derive(Debug, Clone, Copy)]
pub struct IhdpMixture {
    pub mean: f64,
    pub pi: f64,
    pub delta: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub nu: u32,
}

impl IhdpMixture {
    pub fn draw(&self, rng: &mut impl Rng) -> f64 {
        if rng.random::<f64>() < self.pi {
            self.mean + (1.0 - self.pi) * self.delta + self.sigma1 * normal(rng)
        } else {
            self.mean - self.pi * self.delta + self.sigma2 * student_t(rng, self.nu)
        }
    }

    /// Analytic variance (normal component + t component + between-means).
    pub fn variance(&self) -> f64 {
        let t_var = self.sigma2 * self.sigma2 * self.nu as f64 / (self.nu as f64 - 2.0);
        self.pi * self.sigma1 * self.sigma1
            + (1.0 - self.pi) * t_var
            + self.pi * (1.0 - self.pi) * self.delta * self.delta
    }
}

/// Draw an empirical law of `n_draws` potential outcomes at (x, t).
pub fn ihdp_sample(
    coeffs: &IhdpCoeffs,
    x: &[f64],
    t: usize,
    n_draws: usize,
    seed: u64,
) -> EmpiricalLaw {
    let mix = coeffs.mixture_params(x, t);
    let mut rng = rng_stream(seed, 0x1d_50 + t as u64);
    EmpiricalLaw::scalar((0..n_draws).map(|_| mix.draw(&mut rng)).collect())
}

/// Surrogate covariate matrix: 6 continuous standard-normal columns
/// followed by 19 Bernoulli columns with the fixed rates above.
pub fn ihdp_covariates(n: usize, seed: u64) -> Matrix {
    let mut rng = rng_stream(seed, 0x1d_c0);
    let mut x = Matrix::zeros(n, IHDP_DIM);
    for i in 0..n {
        for j in 0..IHDP_CONTINUOUS {
            x.set(i, j, normal(&mut rng));
        }
        for (k, &p) in BINARY_RATES.iter().enumerate() {
            let v = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
            x.set(i, IHDP_CONTINUOUS + k, v);
        }
    }
    x
}

/// Confounded treatment assignment for the surrogate covariates; the
/// intercept targets roughly the 139/747 treated share of the original
/// sample.
fn assign_treatment(x: &Matrix, rng: &mut impl Rng) -> Vec<usize> {
    (0..x.rows())
        .map(|i| {
            let r = x.row(i);
            let score = 0.4 * r[0] - 0.3 * r[1] + 0.6 * r[6] - 0.5 * r[8] - 1.55;
            usize::from(rng.random::<f64>() < logistic(score))
        })
        .collect()
}

/// One repetition of the IHDP-style benchmark: covariates, confounded
/// assignment, leak-free stratified splits, standardized features, the
/// per-repetition outcome law, and the test-set target design.
pub struct IhdpBenchmark {
    pub dataset: Dataset,
    pub design: TargetDesign,
    pub coeffs: IhdpCoeffs,
    std_covariates: Matrix,
}

impl IhdpBenchmark {
    pub fn generate(n: usize, seed: u64) -> Result<Self> {
        let x = ihdp_covariates(n, seed);
        let mut rng = rng_stream(seed, 0x1d_a1);
        let arms = assign_treatment(&x, &mut rng);

        let mut split_rng = rng_stream(seed, 0x1d_a2);
        let splits = stratified_split(&arms, (0.63, 0.27), &mut split_rng);
        let train_rows: Vec<usize> = (0..n).filter(|&i| splits[i] == Split::Train).collect();

        let cont: Vec<usize> = (0..IHDP_CONTINUOUS).collect();
        let standardization = Standardization::fit(&x, &train_rows, &cont);
        let xs = standardization.apply(&x);

        let coeffs = IhdpCoeffs::draw(IHDP_DIM, crate::numeric::mix_seed(seed, 0x1d_a3));

        let mut out_rng = rng_stream(seed, 0x1d_a4);
        let outcomes: Vec<f64> = (0..n)
            .map(|i| coeffs.mixture_params(xs.row(i), arms[i]).draw(&mut out_rng))
            .collect();

        // cell map: two leading train-set principal coordinates (rank
        // mapped to [0,1]) plus the treatment coordinate
        let (comps, _) = top_principal_components(&xs, 2, &train_rows);
        let pc_scores: Vec<Vec<f64>> = (0..n)
            .map(|i| comps.iter().map(|c| dot(c, xs.row(i))).collect())
            .collect();
        let rank1 = RankMap::fit(&train_rows.iter().map(|&i| pc_scores[i][0]).collect::<Vec<_>>());
        let rank2 = RankMap::fit(&train_rows.iter().map(|&i| pc_scores[i][1]).collect::<Vec<_>>());
        let cell_coords = Matrix::from_rows(
            (0..n)
                .map(|i| {
                    vec![
                        rank1.eval(pc_scores[i][0]),
                        rank2.eval(pc_scores[i][1]),
                        arms[i] as f64,
                    ]
                })
                .collect(),
        );

        let features = Matrix::from_rows(
            (0..n)
                .map(|i| {
                    let mut f = xs.row(i).to_vec();
                    f.push(arms[i] as f64);
                    f
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

        // target design: test covariates crossed with both arms
        let mut states = Vec::new();
        for i in dataset.rows_in(Split::Test) {
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

        Ok(IhdpBenchmark {
            dataset,
            design,
            coeffs,
            std_covariates: xs,
        })
    }

    pub fn standardized_covariates(&self) -> &Matrix {
        &self.std_covariates
    }

    /// True conditional mean at a design state.
    pub fn true_mean(&self, state: &StateRecord) -> f64 {
        let d = IHDP_DIM;
        self.coeffs.mean(&state.features[..d], state.arm)
    }

    pub fn oracle(&self) -> IhdpOracle<'_> {
        IhdpOracle { coeffs: &self.coeffs }
    }
}

/// Samples the true interventional law at a state (covariates are the
/// leading feature block, the arm is the state's arm).
pub struct IhdpOracle<'a> {
    coeffs: &'a IhdpCoeffs,
}

impl StateSampler for IhdpOracle<'_> {
    fn sample_state(&self, state: &StateRecord, n: usize, seed: u64) -> Vec<f64> {
        let x = &state.features[..IHDP_DIM];
        ihdp_sample(self.coeffs, x, state.arm, n, seed)
            .values()
            .to_vec()
    }
}
