//! Trained conditional generator with its per-cell critics, stratification
//! layout, anchoring, and optional post-hoc adjustments.

use super::calibration::CalibrationTables;
use super::config::Conditioning;
use crate::autodiff::{MlpNet, Workspace};
use crate::dgp::{Dataset, StateRecord, StateSampler, TargetDesign};
use crate::error::{GaniceError, Result};
use crate::numeric::rng_stream;
use crate::partition::{merge_small_cells, CellAccount, DyadicPartition, MergeMap, Resolution};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Stratification of states into critic cells: either one cell per
/// distinct design state or merged dyadic cells, with the target masses
/// and observed training counts per (dense) cell group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellLayout {
    pub conditioning: Conditioning,
    pub partition: Option<DyadicPartition>,
    pub merge: Option<MergeMap>,
    dense_of_raw: Vec<usize>,
    pub n_groups: usize,
    /// Target mass per dense group (sums to 1).
    pub q: Vec<f64>,
    /// Observed training count per dense group.
    pub n_obs: Vec<u64>,
    discrete_states: Vec<Vec<f64>>,
}

impl CellLayout {
    /// Build the layout from the training rows and the target design.
    /// Dyadic masses are estimated by Monte Carlo draws from the design;
    /// cells under `min_cell_size` observed points merge into their
    /// nearest adequate neighbor.
    pub fn build(
        conditioning: &Conditioning,
        dataset: &Dataset,
        train_rows: &[usize],
        design: &TargetDesign,
        min_cell_size: u64,
        mc_target_size: usize,
        seed: u64,
    ) -> Result<Self> {
        match conditioning {
            Conditioning::Discrete => {
                let mut discrete_states: Vec<Vec<f64>> = Vec::new();
                let mut q = Vec::new();
                for (s, &mass) in design.states.iter().zip(design.masses.iter()) {
                    match discrete_states.iter().position(|c| c == &s.cell_coords) {
                        Some(k) => q[k] += mass,
                        None => {
                            discrete_states.push(s.cell_coords.clone());
                            q.push(mass);
                        }
                    }
                }
                let n_groups = discrete_states.len();
                let mut n_obs = vec![0u64; n_groups];
                for &i in train_rows {
                    let coords = dataset.cell_coords.row(i);
                    let k = discrete_states
                        .iter()
                        .position(|c| c.as_slice() == coords)
                        .ok_or_else(|| {
                            GaniceError::Contract(format!(
                                "training state {coords:?} not in the discrete design support"
                            ))
                        })?;
                    n_obs[k] += 1;
                }
                Ok(CellLayout {
                    conditioning: conditioning.clone(),
                    partition: None,
                    merge: None,
                    dense_of_raw: (0..n_groups).collect(),
                    n_groups,
                    q,
                    n_obs,
                    discrete_states,
                })
            }
            Conditioning::Dyadic(depths) => {
                if depths.len() != dataset.cell_coords.cols() {
                    return Err(GaniceError::Shape(format!(
                        "resolution dim {} vs cell coordinates {}",
                        depths.len(),
                        dataset.cell_coords.cols()
                    )));
                }
                let partition = DyadicPartition::new(Resolution::new(depths.clone())?);
                let cells = partition.cell_count();
                let mut account = CellAccount::empty(cells);
                // target masses from Monte Carlo draws of design states
                let mut rng = rng_stream(seed, 0xce11);
                for _ in 0..mc_target_size {
                    let s = &design.states[design.sample_index(&mut rng)];
                    account.q[partition.locate_linear(&s.cell_coords)?] += 1.0;
                }
                account.q.iter_mut().for_each(|v| *v /= mc_target_size as f64);
                for &i in train_rows {
                    account.n_obs[partition.locate_linear(dataset.cell_coords.row(i))?] += 1;
                }
                let (merge, merged) = merge_small_cells(&partition, &account, min_cell_size)?;
                let (dense_of_raw, n_groups) = merge.dense();
                let mut q = vec![0.0; n_groups];
                let mut n_obs = vec![0u64; n_groups];
                for (g, &rep) in merge.groups().iter().enumerate() {
                    q[g] = merged.q[rep];
                    n_obs[g] = merged.n_obs[rep];
                }
                // exact renormalization of the MC masses
                let total: f64 = q.iter().sum();
                if total > 0.0 {
                    q.iter_mut().for_each(|v| *v /= total);
                    let fix = 1.0 - q.iter().sum::<f64>();
                    q[0] += fix;
                }
                Ok(CellLayout {
                    conditioning: conditioning.clone(),
                    partition: Some(partition),
                    merge: Some(merge),
                    dense_of_raw,
                    n_groups,
                    q,
                    n_obs,
                    discrete_states: Vec::new(),
                })
            }
        }
    }

    /// Dense cell-group id of a point in cell-coordinate space.
    pub fn locate(&self, cell_coords: &[f64]) -> Result<usize> {
        match &self.conditioning {
            Conditioning::Discrete => self
                .discrete_states
                .iter()
                .position(|c| c.as_slice() == cell_coords)
                .ok_or_else(|| {
                    GaniceError::Contract(format!(
                        "state {cell_coords:?} not in the discrete support"
                    ))
                }),
            Conditioning::Dyadic(_) => {
                let raw = self
                    .partition
                    .as_ref()
                    .expect("dyadic layout has a partition")
                    .locate_linear(cell_coords)?;
                Ok(self.dense_of_raw[raw])
            }
        }
    }
}

/// One per-step training-curve record.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub step: usize,
    pub objective: f64,
    pub critic_loss: f64,
    pub gp_term: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub generator: MlpNet,
    pub critics: Vec<MlpNet>,
    pub layout: CellLayout,
    pub anchor: f64,
    pub output_bound: f64,
    pub latent_dim: usize,
    pub calibration: Option<CalibrationTables>,
    /// Per-arm zero-outcome atom matched from training data.
    pub zero_mass: Option<Vec<f64>>,
}

impl TrainedModel {
    /// Raw generator pushforward draws at a state (no calibration, no
    /// zero-mass matching).
    pub fn raw_sample(&self, state: &StateRecord, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_stream(seed, 0x5a_3e);
        let mut ws = Workspace::new();
        let mut input = Vec::with_capacity(state.features.len() + self.latent_dim);
        (0..n)
            .map(|_| {
                input.clear();
                input.extend_from_slice(&state.features);
                for _ in 0..self.latent_dim {
                    input.push(rng.random::<f64>());
                }
                self.generator.predict_ws(&input, &mut ws)[0]
            })
            .collect()
    }

    /// Conditional draws with calibration and zero-mass matching applied.
    pub fn sample(&self, state: &StateRecord, n: usize, seed: u64) -> Vec<f64> {
        let mut draws = self.raw_sample(state, n, seed);
        if let Some(cal) = &self.calibration {
            cal.apply(state.arm, &mut draws);
        }
        if let Some(zm) = &self.zero_mass {
            if let Some(&frac) = zm.get(state.arm) {
                let k = (frac * n as f64).floor() as usize;
                if k > 0 {
                    // replace the lowest k draws by the zero atom
                    let mut idx: Vec<usize> = (0..n).collect();
                    idx.sort_by(|&a, &b| draws[a].total_cmp(&draws[b]));
                    for &i in idx.iter().take(k) {
                        draws[i] = 0.0;
                    }
                }
            }
        }
        draws
    }

    /// Conditional mean estimated from generated samples.
    pub fn predict_mean(&self, state: &StateRecord, draws: usize, seed: u64) -> f64 {
        crate::numeric::mean(&self.sample(state, draws, seed))
    }

    /// Anchored critic value of the cell's critic.
    pub fn critic_value(&self, cell: usize, y: f64) -> f64 {
        let mut ws = Workspace::new();
        let d = self.critics[cell].predict_ws(&[y], &mut ws)[0];
        let mut ws2 = Workspace::new();
        let d0 = self.critics[cell].predict_ws(&[self.anchor], &mut ws2)[0];
        d - d0
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let js = serde_json::to_string_pretty(self)?;
        std::fs::write(path, js).map_err(|e| GaniceError::io(path.display().to_string(), e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GaniceError::io(path.display().to_string(), e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

impl StateSampler for TrainedModel {
    fn sample_state(&self, state: &StateRecord, n: usize, seed: u64) -> Vec<f64> {
        self.sample(state, n, seed)
    }
}
