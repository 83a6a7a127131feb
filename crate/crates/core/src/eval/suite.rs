//! State-wise evaluation of fitted samplers against oracle laws, and the
//! arm-level variants used when only randomized holdout arms are
//! observable.

use super::metrics::{
    central_interval, energy_distance, expected_crps, ks_distance, lcvar, quantiles, ucvar,
};
use crate::dgp::{StateSampler, TargetDesign};
use crate::error::{GaniceError, Result};
use crate::estimator::pit_value;
use crate::numeric::{kahan_sum, mean, mix_seed, sorted};
use crate::transport::{w1_sorted, EmpiricalLaw};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Draws per state for transport / score / CDF distances.
    pub b_ew: usize,
    /// Draws per state for calibration, PIT, quantiles, and tails.
    pub b_cal: usize,
    pub quantile_levels: Vec<f64>,
    pub tail_levels: Vec<f64>,
    pub coverage_levels: Vec<f64>,
    pub pit_bins: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            b_ew: 1000,
            b_cal: 2000,
            quantile_levels: vec![0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95],
            tail_levels: vec![0.05, 0.10, 0.90, 0.95],
            coverage_levels: vec![0.50, 0.80, 0.90, 0.95],
            pit_bins: 10,
            seed: 0,
        }
    }
}

impl EvalOptions {
    pub fn smoke(seed: u64) -> Self {
        EvalOptions {
            b_ew: 250,
            b_cal: 500,
            seed,
            ..Default::default()
        }
    }
}

/// Per-state evaluation payload; aggregation happens separately so that
/// benchmark-specific pairings (arms, dosage grids) can reuse it.
#[derive(Debug, Clone)]
pub struct StateEval {
    pub state_idx: usize,
    pub mass: f64,
    pub w1: f64,
    pub crps: f64,
    pub energy: f64,
    pub ks: f64,
    pub q_model: Vec<f64>,
    pub q_oracle: Vec<f64>,
    pub tail_err_sum: f64,
    pub coverage_hits: Vec<usize>,
    pub widths: Vec<f64>,
    pub pit_counts: Vec<usize>,
    pub model_mean: f64,
}

/// Evaluate the model against the oracle at the selected design states.
pub fn evaluate_states(
    model: &dyn StateSampler,
    oracle: &dyn StateSampler,
    design: &TargetDesign,
    indices: &[usize],
    opts: &EvalOptions,
) -> Result<Vec<StateEval>> {
    if opts.b_ew < 2 || opts.b_cal < 2 {
        return Err(GaniceError::Contract("need at least 2 draws per state".into()));
    }
    let mut out = Vec::with_capacity(indices.len());
    for &si in indices {
        let state = &design.states[si];
        let m_all = model.sample_state(state, opts.b_cal, mix_seed(opts.seed, 2 * si as u64));
        let o_all = oracle.sample_state(state, opts.b_cal, mix_seed(opts.seed, 2 * si as u64 + 1));
        let m_ew = &m_all[..opts.b_ew.min(m_all.len())];
        let o_ew = &o_all[..opts.b_ew.min(o_all.len())];

        let w1 = w1_sorted(
            &EmpiricalLaw::scalar(m_ew.to_vec()),
            &EmpiricalLaw::scalar(o_ew.to_vec()),
        )?;
        let crps = expected_crps(m_ew, o_ew);
        let energy = energy_distance(m_ew, o_ew);
        let ks = ks_distance(m_ew, o_ew);

        let sm = sorted(&m_all);
        let so = sorted(&o_all);
        let q_model = quantiles(&sm, &opts.quantile_levels);
        let q_oracle = quantiles(&so, &opts.quantile_levels);

        let mut tail_err_sum = 0.0;
        for &alpha in &opts.tail_levels {
            tail_err_sum += (lcvar(&sm, alpha) - lcvar(&so, alpha)).abs()
                + (ucvar(&sm, alpha) - ucvar(&so, alpha)).abs();
        }

        let mut coverage_hits = Vec::with_capacity(opts.coverage_levels.len());
        let mut widths = Vec::with_capacity(opts.coverage_levels.len());
        for &c in &opts.coverage_levels {
            let (lo, hi) = central_interval(&sm, c);
            coverage_hits.push(o_all.iter().filter(|&&y| y >= lo && y <= hi).count());
            widths.push(hi - lo);
        }

        let mut pit_counts = vec![0usize; opts.pit_bins];
        for &y in &o_all {
            let u = pit_value(&sm, y);
            let bin = ((u * opts.pit_bins as f64) as usize).min(opts.pit_bins - 1);
            pit_counts[bin] += 1;
        }

        out.push(StateEval {
            state_idx: si,
            mass: design.masses[si],
            w1,
            crps,
            energy,
            ks,
            q_model,
            q_oracle,
            tail_err_sum,
            coverage_hits,
            widths,
            pit_counts,
            model_mean: mean(&m_all),
        });
    }
    Ok(out)
}

/// Probability-integral-transform histogram with independent control of
/// the predictive-CDF sample size; a large `b_model` suppresses the CDF
/// estimation noise so the histogram's chi-square behaves multinomially.
pub fn pit_histogram(
    model: &dyn StateSampler,
    oracle: &dyn StateSampler,
    design: &TargetDesign,
    indices: &[usize],
    b_model: usize,
    b_oracle: usize,
    bins: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; bins];
    for &si in indices {
        let state = &design.states[si];
        let m = sorted(&model.sample_state(state, b_model, mix_seed(seed, 2 * si as u64)));
        let o = oracle.sample_state(state, b_oracle, mix_seed(seed, 2 * si as u64 + 1));
        for &y in &o {
            let u = pit_value(&m, y);
            counts[((u * bins as f64) as usize).min(bins - 1)] += 1;
        }
    }
    Ok(counts)
}

/// Mass-weighted mean of a per-state quantity (masses renormalized over
/// the evaluated states).
pub fn weighted_mean(evals: &[StateEval], f: impl Fn(&StateEval) -> f64) -> f64 {
    let total: f64 = evals.iter().map(|e| e.mass).sum();
    kahan_sum(evals.iter().map(|e| e.mass * f(e))) / total
}

/// Target-design average of statewise W1 distances, the headline
/// distributional error.
pub fn empirical_ew(
    model: &dyn StateSampler,
    oracle: &dyn StateSampler,
    design: &TargetDesign,
    indices: &[usize],
    b: usize,
    seed: u64,
) -> Result<f64> {
    if b < 2 {
        return Err(GaniceError::Contract("need at least 2 draws per state".into()));
    }
    let mut terms = Vec::with_capacity(indices.len());
    let mut total_mass = 0.0;
    for &si in indices {
        let state = &design.states[si];
        let m = model.sample_state(state, b, mix_seed(seed, 2 * si as u64));
        let o = oracle.sample_state(state, b, mix_seed(seed, 2 * si as u64 + 1));
        let w1 = w1_sorted(&EmpiricalLaw::scalar(m), &EmpiricalLaw::scalar(o))?;
        terms.push(design.masses[si] * w1);
        total_mass += design.masses[si];
    }
    Ok(kahan_sum(terms.iter().copied()) / total_mass)
}

/// Aggregate integrated quantile error: root mean square over states and
/// levels of the model-oracle quantile gaps.
pub fn integrated_quantile_error(evals: &[StateEval]) -> f64 {
    let levels = evals[0].q_model.len() as f64;
    weighted_mean(evals, |e| {
        e.q_model
            .iter()
            .zip(e.q_oracle.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / levels
    })
    .sqrt()
}

/// Quantile treatment-effect error over paired states (treated, control):
/// rms over pairs and levels of the differenced quantile gaps. Pairs index
/// into `evals`.
pub fn qte_error(evals: &[StateEval], pairs: &[(usize, usize)]) -> f64 {
    let levels = evals[0].q_model.len();
    let mut terms = Vec::with_capacity(pairs.len());
    for &(i1, i0) in pairs {
        let (e1, e0) = (&evals[i1], &evals[i0]);
        let mut s = 0.0;
        for l in 0..levels {
            let model_qte = e1.q_model[l] - e0.q_model[l];
            let true_qte = e1.q_oracle[l] - e0.q_oracle[l];
            s += (model_qte - true_qte) * (model_qte - true_qte);
        }
        terms.push(s / levels as f64);
    }
    (kahan_sum(terms.iter().copied()) / pairs.len() as f64).sqrt()
}

/// Per-level mean absolute QTE error (for the quantile-level diagnostic
/// curves).
pub fn qte_abs_err_per_level(evals: &[StateEval], pairs: &[(usize, usize)]) -> Vec<f64> {
    let levels = evals[0].q_model.len();
    // average quantile treatment effects over units, then difference
    let mut model_qte = vec![0.0; levels];
    let mut true_qte = vec![0.0; levels];
    for &(i1, i0) in pairs {
        for l in 0..levels {
            model_qte[l] += (evals[i1].q_model[l] - evals[i0].q_model[l]) / pairs.len() as f64;
            true_qte[l] += (evals[i1].q_oracle[l] - evals[i0].q_oracle[l]) / pairs.len() as f64;
        }
    }
    (0..levels).map(|l| (model_qte[l] - true_qte[l]).abs()).collect()
}

/// Tail error: mean over states and tail levels of |LCVaR gap| + |UCVaR gap|.
pub fn tail_error(evals: &[StateEval], n_levels: usize) -> f64 {
    weighted_mean(evals, |e| e.tail_err_sum / n_levels as f64)
}

/// Pooled calibration error, per-level widths, and the PIT histogram.
pub fn calibration_summary(
    evals: &[StateEval],
    opts: &EvalOptions,
) -> (f64, Vec<f64>, Vec<f64>) {
    let n_states = evals.len() as f64;
    let b = opts.b_cal as f64;
    let mut cal_err = 0.0;
    let mut widths = vec![0.0; opts.coverage_levels.len()];
    for (k, &c) in opts.coverage_levels.iter().enumerate() {
        let cov: f64 =
            evals.iter().map(|e| e.coverage_hits[k] as f64).sum::<f64>() / (n_states * b);
        cal_err += (cov - c).abs() / opts.coverage_levels.len() as f64;
        widths[k] = evals.iter().map(|e| e.widths[k]).sum::<f64>() / n_states;
    }
    let mut pit = vec![0.0; opts.pit_bins];
    let total: usize = evals.iter().map(|e| e.pit_counts.iter().sum::<usize>()).sum();
    for e in evals {
        for (bin, &cnt) in e.pit_counts.iter().enumerate() {
            pit[bin] += cnt as f64 / total as f64;
        }
    }
    (cal_err, widths, pit)
}

/// Heterogeneous-effect metrics for binary treatments: mean squared
/// effect error and absolute average-effect error.
pub fn pehe_ate(model_tau: &[f64], true_tau: &[f64]) -> (f64, f64) {
    let n = model_tau.len() as f64;
    let pehe = kahan_sum(
        model_tau
            .iter()
            .zip(true_tau.iter())
            .map(|(a, b)| (a - b) * (a - b)),
    ) / n;
    let ate_err = (kahan_sum(model_tau.iter().copied()) / n
        - kahan_sum(true_tau.iter().copied()) / n)
        .abs();
    (pehe, ate_err)
}

/// Dose-response surfaces: conditional means per (unit, arm, grid dose).
#[derive(Debug, Clone)]
pub struct DoseSurface {
    pub units: usize,
    pub arms: usize,
    pub grid: Vec<f64>,
    /// means[unit][arm][dose index]
    pub means: Vec<f64>,
}

impl DoseSurface {
    pub fn get(&self, unit: usize, arm: usize, d: usize) -> f64 {
        self.means[(unit * self.arms + arm) * self.grid.len() + d]
    }
}

/// Mean integrated squared error, dosage policy error, and full policy
/// error of a model surface against the true one.
pub fn dose_point_metrics(model: &DoseSurface, truth: &DoseSurface) -> (f64, f64, f64) {
    assert_eq!(model.means.len(), truth.means.len());
    let (u, a, g) = (truth.units, truth.arms, truth.grid.len());
    let mut mise = 0.0;
    let mut dpe = 0.0;
    let mut pe = 0.0;
    for i in 0..u {
        let mut best_true = (0usize, 0usize, f64::NEG_INFINITY);
        let mut best_model = (0usize, 0usize, f64::NEG_INFINITY);
        for arm in 0..a {
            let mut arm_best_true = (0usize, f64::NEG_INFINITY);
            let mut arm_best_model = (0usize, f64::NEG_INFINITY);
            for d in 0..g {
                let mt = model.get(i, arm, d);
                let tt = truth.get(i, arm, d);
                mise += (mt - tt) * (mt - tt) / (u * a * g) as f64;
                if tt > arm_best_true.1 {
                    arm_best_true = (d, tt);
                }
                if mt > arm_best_model.1 {
                    arm_best_model = (d, mt);
                }
                if tt > best_true.2 {
                    best_true = (arm, d, tt);
                }
                if mt > best_model.2 {
                    best_model = (arm, d, mt);
                }
            }
            let gap = truth.get(i, arm, arm_best_true.0) - truth.get(i, arm, arm_best_model.0);
            dpe += gap * gap / (u * a) as f64;
        }
        pe += (truth.get(i, best_true.0, best_true.1)
            - truth.get(i, best_model.0, best_model.1))
            / u as f64;
    }
    (mise, dpe, pe)
}

/// Matched-arm policy value on a randomized holdout: treated-arm mean of
/// units the policy treats, weighted by the policy's treatment share,
/// plus the control-arm analogue. Empty matched arms fall back to the
/// randomized arm mean.
pub fn policy_value_rct(policy_treat: &[bool], arm: &[usize], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let p_treat = policy_treat.iter().filter(|&&p| p).count() as f64 / n;
    let arm_mean = |a: usize| -> f64 {
        let vals: Vec<f64> = (0..y.len()).filter(|&i| arm[i] == a).map(|i| y[i]).collect();
        mean(&vals)
    };
    let matched = |want_policy: bool, a: usize| -> f64 {
        let vals: Vec<f64> = (0..y.len())
            .filter(|&i| policy_treat[i] == want_policy && arm[i] == a)
            .map(|i| y[i])
            .collect();
        if vals.is_empty() {
            arm_mean(a)
        } else {
            mean(&vals)
        }
    };
    p_treat * matched(true, 1) + (1.0 - p_treat) * matched(false, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::StateRecord;
    use crate::numeric::rng_stream;
    use rand::Rng;

    struct GaussSampler {
        mean_scale: f64,
        sd: f64,
        shift: f64,
    }

    impl StateSampler for GaussSampler {
        fn sample_state(&self, state: &StateRecord, n: usize, seed: u64) -> Vec<f64> {
            let mut rng = rng_stream(seed, 0xe7a1);
            let m = self.mean_scale * state.features[0] + self.shift;
            (0..n)
                .map(|_| {
                    let z: f64 =
                        rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                    m + self.sd * z
                })
                .collect()
        }
    }

    fn toy_design(n_states: usize) -> TargetDesign {
        let states = (0..n_states)
            .map(|k| StateRecord {
                features: vec![k as f64 / n_states as f64],
                cell_coords: vec![(k as f64 + 0.5) / n_states as f64],
                arm: k % 2,
            })
            .collect();
        TargetDesign::uniform(states, None).unwrap()
    }

    #[test]
    fn perfect_model_with_shared_seed_scores_zero_ew() {
        let s = GaussSampler {
            mean_scale: 1.0,
            sd: 0.3,
            shift: 0.0,
        };
        let design = toy_design(4);
        let idx: Vec<usize> = (0..4).collect();
        // shared seed: the two samplers produce identical draws only with
        // identical seeds, so make both sides the model with equal seeds
        let mut terms = Vec::new();
        for &si in &idx {
            let a = s.sample_state(&design.states[si], 300, 5);
            let b = s.sample_state(&design.states[si], 300, 5);
            terms.push(
                w1_sorted(&EmpiricalLaw::scalar(a), &EmpiricalLaw::scalar(b)).unwrap(),
            );
        }
        assert!(terms.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn perfect_model_independent_seeds_within_self_distance() {
        let s = GaussSampler {
            mean_scale: 1.0,
            sd: 0.3,
            shift: 0.0,
        };
        let design = toy_design(3);
        let idx: Vec<usize> = (0..3).collect();
        let ew = empirical_ew(&s, &s, &design, &idx, 1000, 7).unwrap();
        // two-sample self W1 of N(., 0.3) at B = 1000: measure it directly
        let mut rng = rng_stream(1, 1);
        let mut self_d = Vec::new();
        for _ in 0..20 {
            let mut gauss = |n: usize| -> Vec<f64> {
                (0..n)
                    .map(|_| {
                        let z: f64 = rand_distr::Distribution::sample(
                            &rand_distr::StandardNormal,
                            &mut rng,
                        );
                        0.3 * z
                    })
                    .collect()
            };
            let a = gauss(1000);
            let b = gauss(1000);
            self_d
                .push(w1_sorted(&EmpiricalLaw::scalar(a), &EmpiricalLaw::scalar(b)).unwrap());
        }
        let bound = 2.0 * mean(&self_d);
        assert!(ew <= bound, "ew {ew} vs self-distance bound {bound}");
    }

    #[test]
    fn dirac_mismatch_gives_unit_ew() {
        struct Point(f64);
        impl StateSampler for Point {
            fn sample_state(&self, _s: &StateRecord, n: usize, _seed: u64) -> Vec<f64> {
                vec![self.0; n]
            }
        }
        let design = toy_design(2);
        let idx = [0usize, 1];
        let ew = empirical_ew(&Point(0.0), &Point(1.0), &design, &idx, 100, 0).unwrap();
        assert_eq!(ew, 1.0);
    }

    #[test]
    fn constant_shift_moves_every_distance_up() {
        let design = toy_design(4);
        let idx: Vec<usize> = (0..4).collect();
        let opts = EvalOptions {
            b_ew: 600,
            b_cal: 600,
            seed: 3,
            ..Default::default()
        };
        let truth = GaussSampler {
            mean_scale: 1.0,
            sd: 0.25,
            shift: 0.0,
        };
        let perfect = GaussSampler {
            mean_scale: 1.0,
            sd: 0.25,
            shift: 0.0,
        };
        let shifted = GaussSampler {
            mean_scale: 1.0,
            sd: 0.25,
            shift: 0.8,
        };
        let base = evaluate_states(&perfect, &truth, &design, &idx, &opts).unwrap();
        let off = evaluate_states(&shifted, &truth, &design, &idx, &opts).unwrap();
        let agg = |e: &[StateEval]| {
            (
                weighted_mean(e, |s| s.w1),
                weighted_mean(e, |s| s.crps),
                weighted_mean(e, |s| s.energy),
                weighted_mean(e, |s| s.ks),
            )
        };
        let (w_a, c_a, e_a, k_a) = agg(&base);
        let (w_b, c_b, e_b, k_b) = agg(&off);
        assert!(w_a < 0.05 && c_a < 0.2 && e_a < 0.05 && k_a < 0.1);
        assert!(w_b > w_a && c_b > c_a && e_b > e_a && k_b > k_a);
        // a 0.8 shift shows up as ~0.8 in W1
        assert!((w_b - 0.8).abs() < 0.05, "shifted W1 {w_b}");
    }

    #[test]
    fn constant_shift_iqe_is_the_shift() {
        let design = toy_design(3);
        let idx: Vec<usize> = (0..3).collect();
        let opts = EvalOptions {
            b_ew: 400,
            b_cal: 4000,
            seed: 9,
            ..Default::default()
        };
        let truth = GaussSampler {
            mean_scale: 0.5,
            sd: 0.3,
            shift: 0.0,
        };
        let shifted = GaussSampler {
            mean_scale: 0.5,
            sd: 0.3,
            shift: 0.6,
        };
        let evals = evaluate_states(&shifted, &truth, &design, &idx, &opts).unwrap();
        let iqe = integrated_quantile_error(&evals);
        assert!((iqe - 0.6).abs() < 0.05, "iqe {iqe}");
        // equal shift in both arms cancels in the QTE differencing
        let pairs = vec![(1usize, 0usize), (2, 1)];
        let qte = qte_error(&evals, &pairs);
        assert!(qte < 0.08, "qte after equal shifts {qte}");
    }

    #[test]
    fn calibration_of_true_sampler_is_tight_and_pit_uniform() {
        let design = toy_design(5);
        let idx: Vec<usize> = (0..5).collect();
        let opts = EvalOptions {
            b_ew: 400,
            b_cal: 2000,
            seed: 17,
            ..Default::default()
        };
        let truth = GaussSampler {
            mean_scale: 1.0,
            sd: 0.4,
            shift: 0.0,
        };
        let evals = evaluate_states(&truth, &truth, &design, &idx, &opts).unwrap();
        let (cal_err, widths, _) = calibration_summary(&evals, &opts);
        assert!(cal_err < 0.05, "cal_err {cal_err}");
        assert!(widths.windows(2).all(|w| w[0] <= w[1]), "widths increase");
        // chi-square over 10 bins below the 95% quantile (16.92, 9 dof);
        // a large predictive sample keeps the CDF noise negligible
        let counts = pit_histogram(&truth, &truth, &design, &idx, 20_000, 500, 10, 31).unwrap();
        let total: f64 = counts.iter().sum::<usize>() as f64;
        let expect = total / 10.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expect) * (c as f64 - expect) / expect)
            .sum();
        assert!(chi2 < 16.92, "pit chi2 {chi2}");
    }

    #[test]
    fn degenerate_predictive_has_zero_coverage() {
        let design = toy_design(2);
        let idx: Vec<usize> = (0..2).collect();
        let opts = EvalOptions {
            b_ew: 100,
            b_cal: 500,
            seed: 2,
            ..Default::default()
        };
        struct Dirac;
        impl StateSampler for Dirac {
            fn sample_state(&self, _s: &StateRecord, n: usize, _seed: u64) -> Vec<f64> {
                vec![0.123456; n]
            }
        }
        let truth = GaussSampler {
            mean_scale: 1.0,
            sd: 0.5,
            shift: 0.0,
        };
        let evals = evaluate_states(&Dirac, &truth, &design, &idx, &opts).unwrap();
        let (cal_err, _, _) = calibration_summary(&evals, &opts);
        let want = mean(&opts.coverage_levels);
        assert!((cal_err - want).abs() < 0.02, "cal_err {cal_err} vs {want}");
    }

    #[test]
    fn crps_propriety_margin() {
        // expected CRPS of the true law beats a mismatched predictive over
        // 20 states with a margin beyond 2 MC standard errors
        let design = toy_design(20);
        let idx: Vec<usize> = (0..20).collect();
        let opts = EvalOptions {
            b_ew: 2000,
            b_cal: 2000,
            seed: 21,
            ..Default::default()
        };
        let truth = GaussSampler {
            mean_scale: 1.0,
            sd: 0.3,
            shift: 0.0,
        };
        let wrong = GaussSampler {
            mean_scale: 1.0,
            sd: 0.9,
            shift: 0.25,
        };
        let good = evaluate_states(&truth, &truth, &design, &idx, &opts).unwrap();
        let bad = evaluate_states(&wrong, &truth, &design, &idx, &opts).unwrap();
        let g: Vec<f64> = good.iter().map(|e| e.crps).collect();
        let b: Vec<f64> = bad.iter().map(|e| e.crps).collect();
        let diff: Vec<f64> = g.iter().zip(&b).map(|(x, y)| y - x).collect();
        let m = mean(&diff);
        let se = (crate::numeric::variance(&diff) / diff.len() as f64).sqrt();
        assert!(m > 2.0 * se, "margin {m} vs 2se {}", 2.0 * se);
    }

    #[test]
    fn pehe_and_ate_on_perfect_means() {
        let tau_true = vec![1.0, 2.0, 3.0];
        let (pehe, ate) = pehe_ate(&tau_true, &tau_true);
        assert_eq!(pehe, 0.0);
        assert_eq!(ate, 0.0);
        let tau_model = vec![1.5, 2.5, 3.5];
        let (pehe, ate) = pehe_ate(&tau_model, &tau_true);
        assert!((pehe - 0.25).abs() < 1e-12);
        assert!((ate - 0.5).abs() < 1e-12);
    }

    #[test]
    fn oracle_policy_has_zero_policy_error() {
        let grid: Vec<f64> = (0..5).map(|k| k as f64 / 4.0).collect();
        let truth = DoseSurface {
            units: 3,
            arms: 2,
            grid: grid.clone(),
            means: (0..3 * 2 * 5).map(|k| (k as f64 * 0.7).sin()).collect(),
        };
        let (mise, dpe, pe) = dose_point_metrics(&truth, &truth);
        assert_eq!(mise, 0.0);
        assert_eq!(dpe, 0.0);
        assert_eq!(pe, 0.0);
    }

    #[test]
    fn policy_value_matches_hand_computation() {
        // 3 units: policy treats units 0 and 2; arms (1, 0, 0); outcomes
        // (10, 6, 4). Matched treated arm: unit 0 -> mean 10. Matched
        // control arm & policy=0: unit 1 -> 6. p_treat = 2/3.
        // Value = 2/3*10 + 1/3*6 = 8.6667
        let v = policy_value_rct(&[true, false, true], &[1, 0, 0], &[10.0, 6.0, 4.0]);
        assert!((v - (2.0 / 3.0 * 10.0 + 1.0 / 3.0 * 6.0)).abs() < 1e-12);
        // empty matched arm falls back to the randomized arm mean:
        // policy treats nobody, treated-arm mean = 10 (unused), control
        // arm over policy=0: units 1,2 -> mean 5; value = 0*10 + 1*5
        let v2 = policy_value_rct(&[false, false, false], &[1, 0, 0], &[10.0, 6.0, 4.0]);
        assert!((v2 - 5.0).abs() < 1e-12);
        // all treated: matched control arm empty -> fallback to control
        // arm mean 5; value = 1*10 + 0*5 = 10
        let v3 = policy_value_rct(&[true, true, true], &[1, 0, 0], &[10.0, 6.0, 4.0]);
        assert!((v3 - 10.0).abs() < 1e-12);
    }

    #[test]
    fn tail_error_detects_shift() {
        let design = toy_design(3);
        let idx: Vec<usize> = (0..3).collect();
        let opts = EvalOptions {
            b_ew: 400,
            b_cal: 4000,
            seed: 5,
            ..Default::default()
        };
        let truth = GaussSampler {
            mean_scale: 0.3,
            sd: 0.2,
            shift: 0.0,
        };
        let shifted = GaussSampler {
            mean_scale: 0.3,
            sd: 0.2,
            shift: 0.4,
        };
        let evals = evaluate_states(&shifted, &truth, &design, &idx, &opts).unwrap();
        let te = tail_error(&evals, opts.tail_levels.len());
        // both tails shift by 0.4, so |L| + |U| per level is about 0.8
        assert!((te - 0.8).abs() < 0.08, "tail err {te}");
    }
}
