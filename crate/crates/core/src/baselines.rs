//! Comparison methods: the residual plug-in distributional baseline and
//! the two objective-ablation variants of the adversarial estimator.

use crate::autodiff::{Activation, AdamState, MlpNet, Workspace};
use crate::dgp::{Dataset, Split, StateRecord, StateSampler, TargetDesign};
use crate::error::{GaniceError, Result};
use crate::estimator::{train, CellLayout, Conditioning, GaniceConfig, ObjectiveMode, TrainOutput};
use crate::numeric::{mix_seed, rng_stream};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PluginConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub steps: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Stratum definition for the residual pools.
    pub pool_conditioning: Conditioning,
    pub min_pool: u64,
    pub mc_target_size: usize,
    pub seed: u64,
}

impl Default for PluginConfig {
    fn default() -> Self {
        PluginConfig {
            hidden: vec![64, 64],
            activation: Activation::Relu,
            steps: 800,
            lr: 1e-3,
            batch_size: 128,
            pool_conditioning: Conditioning::Discrete,
            min_pool: 4,
            mc_target_size: 20_000,
            seed: 0,
        }
    }
}

/// Mean regressor plus pooled empirical residuals per stratum: turns a
/// point estimator into a predictive distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualPlugin {
    pub mean_net: MlpNet,
    pub layout: CellLayout,
    pub pools: Vec<Vec<f64>>,
}

pub fn fit_residual_plugin(
    config: &PluginConfig,
    dataset: &Dataset,
    design: &TargetDesign,
) -> Result<ResidualPlugin> {
    let train_rows = dataset.rows_in(Split::Train);
    if train_rows.is_empty() {
        return Err(GaniceError::Contract("empty training split".into()));
    }
    let layout = CellLayout::build(
        &config.pool_conditioning,
        dataset,
        &train_rows,
        design,
        config.min_pool,
        config.mc_target_size,
        mix_seed(config.seed, 0xb00),
    )?;

    let d_in = dataset.features.cols();
    let mut rng = rng_stream(config.seed, 0xb01);
    let mut widths = vec![d_in];
    widths.extend(&config.hidden);
    widths.push(1);
    let mut net = MlpNet::with_random_init(widths, config.activation, None, &mut rng)?;
    let mut opt = AdamState::new(net.param_count(), config.lr, 0.9, 0.999);
    let mut ws = Workspace::new();
    let mut grad = vec![0.0; net.param_count()];

    for _ in 0..config.steps {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for _ in 0..config.batch_size {
            let row = train_rows[rng.random_range(0..train_rows.len())];
            let pred = net.predict_ws(dataset.features.row(row), &mut ws)[0];
            let seed = 2.0 * (pred - dataset.outcomes[row]) / config.batch_size as f64;
            net.backprop_ws(&mut ws, &[seed], Some(&mut grad), None);
        }
        opt.step(&mut net.weights, &grad)?;
    }

    let mut pools = vec![Vec::new(); layout.n_groups];
    for &row in &train_rows {
        let cell = layout.locate(dataset.cell_coords.row(row))?;
        let pred = net.predict_ws(dataset.features.row(row), &mut ws)[0];
        pools[cell].push(dataset.outcomes[row] - pred);
    }
    // strata were merged so that every group with training mass has data;
    // leftover empty groups (no training rows at all) borrow the global pool
    let global: Vec<f64> = pools.iter().flatten().copied().collect();
    for pool in pools.iter_mut() {
        if pool.is_empty() {
            *pool = global.clone();
        }
    }
    Ok(ResidualPlugin {
        mean_net: net,
        layout,
        pools,
    })
}

impl ResidualPlugin {
    pub fn predict_mean(&self, state: &StateRecord) -> f64 {
        let mut ws = Workspace::new();
        self.mean_net.predict_ws(&state.features, &mut ws)[0]
    }

    /// Mean prediction plus bootstrap residuals from the state's stratum.
    pub fn sample(&self, state: &StateRecord, n: usize, seed: u64) -> Result<Vec<f64>> {
        let cell = self.layout.locate(&state.cell_coords)?;
        let pool = &self.pools[cell];
        let mean = self.predict_mean(state);
        let mut rng = rng_stream(seed, 0xb10);
        Ok((0..n)
            .map(|_| mean + pool[rng.random_range(0..pool.len())])
            .collect())
    }
}

impl StateSampler for ResidualPlugin {
    fn sample_state(&self, state: &StateRecord, n: usize, seed: u64) -> Vec<f64> {
        self.sample(state, n, seed).expect("state in plugin support")
    }
}

/// Pooled ablation: identical architecture and optimizer, but one joint
/// critic on (state features, outcome) and plain batch means.
pub fn train_pooled_ablation(
    config: &GaniceConfig,
    dataset: &Dataset,
    design: &TargetDesign,
) -> Result<TrainOutput> {
    let mut cfg = config.clone();
    cfg.objective = ObjectiveMode::PooledJoint;
    train(&cfg, dataset, design)
}

/// No-cell-normalization ablation: statewise critics are kept but cell
/// means are replaced by raw-count-weighted batch means.
pub fn train_no_cellnorm_ablation(
    config: &GaniceConfig,
    dataset: &Dataset,
    design: &TargetDesign,
) -> Result<TrainOutput> {
    let mut cfg = config.clone();
    cfg.objective = ObjectiveMode::RawCountWeighted;
    train(&cfg, dataset, design)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::Standardization;
    use crate::numeric::Matrix;

    fn linear_dataset(n: usize, slope: f64, noise: f64, seed: u64) -> (Dataset, TargetDesign) {
        let mut rng = rng_stream(seed, 0x11e);
        let mut feats = Vec::new();
        let mut outcomes = Vec::new();
        let mut arms = Vec::new();
        for _ in 0..n {
            let x: f64 = rng.random_range(-1.0..1.0);
            let eps: f64 = rng.random_range(-noise..noise.max(1e-12));
            feats.push(vec![x]);
            outcomes.push(slope * x + eps);
            arms.push(0usize);
        }
        let features = Matrix::from_rows(feats);
        let cell_coords = Matrix::from_rows(
            (0..n)
                .map(|i| vec![(features.get(i, 0) + 1.0) / 2.0])
                .collect(),
        );
        let mut split_rng = rng_stream(seed, 0x11f);
        let splits = crate::dgp::stratified_split(&arms, (0.8, 0.1), &mut split_rng);
        let states = (0..8)
            .map(|k| {
                let x = -0.9 + 1.8 * k as f64 / 7.0;
                StateRecord {
                    features: vec![x],
                    cell_coords: vec![(x + 1.0) / 2.0],
                    arm: 0,
                }
            })
            .collect();
        let design = TargetDesign::uniform(states, None).unwrap();
        let dataset = Dataset {
            features,
            cell_coords,
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
        (dataset, design)
    }

    fn plugin_cfg() -> PluginConfig {
        PluginConfig {
            pool_conditioning: Conditioning::Dyadic(vec![1]),
            min_pool: 4,
            steps: 600,
            ..Default::default()
        }
    }

    #[test]
    fn zero_noise_data_gives_point_mass_plugin() {
        let (dataset, design) = linear_dataset(400, 1.5, 0.0, 1);
        let plugin = fit_residual_plugin(&plugin_cfg(), &dataset, &design).unwrap();
        let spread: f64 = plugin
            .pools
            .iter()
            .flatten()
            .fold(0.0f64, |m, &r| m.max(r.abs()));
        assert!(spread < 0.1, "residual spread {spread}");
        let draws = plugin.sample(&design.states[3], 200, 5).unwrap();
        let sd = crate::numeric::variance(&draws).sqrt();
        assert!(sd < 0.1, "plug-in law sd {sd}");
    }

    #[test]
    fn fitted_mean_recovers_slope() {
        let (dataset, design) = linear_dataset(600, 2.0, 0.05, 2);
        let plugin = fit_residual_plugin(&plugin_cfg(), &dataset, &design).unwrap();
        // least-squares oracle on the training rows
        let rows = dataset.rows_in(Split::Train);
        let xs: Vec<f64> = rows.iter().map(|&i| dataset.features.get(i, 0)).collect();
        let ys: Vec<f64> = rows.iter().map(|&i| dataset.outcomes[i]).collect();
        let mx = crate::numeric::mean(&xs);
        let my = crate::numeric::mean(&ys);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let ls_slope = sxy / sxx;
        // model slope via a central difference of the fitted mean
        let s_hi = StateRecord {
            features: vec![0.5],
            cell_coords: vec![0.75],
            arm: 0,
        };
        let s_lo = StateRecord {
            features: vec![-0.5],
            cell_coords: vec![0.25],
            arm: 0,
        };
        let model_slope = (plugin.predict_mean(&s_hi) - plugin.predict_mean(&s_lo)) / 1.0;
        let rel = (model_slope - ls_slope).abs() / ls_slope.abs();
        assert!(rel < 0.05, "slope {model_slope} vs LS {ls_slope}");
    }

    #[test]
    fn pools_partition_training_rows() {
        let (dataset, design) = linear_dataset(300, 1.0, 0.3, 3);
        let plugin = fit_residual_plugin(&plugin_cfg(), &dataset, &design).unwrap();
        let n_train = dataset.rows_in(Split::Train).len();
        let pooled: usize = plugin.pools.iter().map(Vec::len).sum();
        assert_eq!(pooled, n_train);
    }

    #[test]
    fn plugin_spread_matches_pool_and_is_deterministic() {
        let (dataset, design) = linear_dataset(500, 1.0, 0.4, 4);
        let plugin = fit_residual_plugin(&plugin_cfg(), &dataset, &design).unwrap();
        let state = &design.states[4];
        let cell = plugin.layout.locate(&state.cell_coords).unwrap();
        let pool_sd = crate::numeric::variance(&plugin.pools[cell]).sqrt();
        let draws = plugin.sample(state, 4000, 9).unwrap();
        let draw_sd = crate::numeric::variance(&draws).sqrt();
        assert!(
            (draw_sd - pool_sd).abs() < 0.12 * pool_sd.max(0.05),
            "draw sd {draw_sd} vs pool sd {pool_sd}"
        );
        let again = plugin.sample(state, 4000, 9).unwrap();
        assert_eq!(draws, again);
    }

    #[test]
    fn pooled_ablation_trains_on_the_toy() {
        let (dataset, design) = crate::dgp::point_mass_data(200, &[-0.8, 0.6], 5).unwrap();
        let mut cfg = GaniceConfig::finite_state_small();
        cfg.adversarial_steps = 30;
        cfg.pretrain_steps = 50;
        cfg.seed = 2;
        let out = train_pooled_ablation(&cfg, &dataset, &design).unwrap();
        assert_eq!(out.model.critics.len(), 1);
        let d = out.model.sample(&design.states[0], 20, 1);
        assert!(d.iter().all(|y| y.is_finite()));
        // determinism
        let out2 = train_pooled_ablation(&cfg, &dataset, &design).unwrap();
        assert_eq!(out.model.generator.weights, out2.model.generator.weights);
    }

    #[test]
    fn no_cellnorm_ablation_trains_on_the_toy() {
        let (dataset, design) = crate::dgp::point_mass_data(200, &[-0.8, 0.6], 6).unwrap();
        let mut cfg = GaniceConfig::finite_state_small();
        cfg.adversarial_steps = 30;
        cfg.pretrain_steps = 50;
        cfg.seed = 3;
        let out = train_no_cellnorm_ablation(&cfg, &dataset, &design).unwrap();
        assert!(out.model.critics.len() >= 2, "statewise critics kept");
    }
}
