//! Training configuration with per-benchmark presets.

use crate::autodiff::Activation;
use crate::error::{GaniceError, Result};
use serde::{Deserialize, Serialize};

/// How states are stratified into critic cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conditioning {
    /// One cell per distinct design state (finite conditioning).
    Discrete,
    /// Anisotropic dyadic partition of the cell coordinates.
    Dyadic(Vec<u32>),
}

/// Which empirical objective the adversarial phase optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveMode {
    /// Target-mass weighted, cell-normalized averages.
    Stratified,
    /// Keeps per-cell critics but weights cells by raw batch counts
    /// instead of target masses (the no-cell-normalization ablation).
    RawCountWeighted,
    /// Single critic on (state features, outcome) joint pairs with plain
    /// batch means (the pooled ablation).
    PooledJoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub samples_per_obs: usize,
    pub grid_size: usize,
    pub blend: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            samples_per_obs: 12,
            grid_size: 256,
            blend: 0.75,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GaniceConfig {
    pub latent_dim: usize,
    pub gen_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub gen_activation: Activation,
    pub critic_activation: Activation,
    pub adversarial_steps: usize,
    pub critic_steps: usize,
    pub pretrain_steps: usize,
    /// Pretraining learning rate; None reuses `gen_lr`.
    pub pretrain_lr: Option<f64>,
    /// Factual mean-squared weight during pretraining; None reuses
    /// `mse_weight`. Kept separate so the location fit can outweigh the
    /// dispersion-building transport term early.
    pub pretrain_mse_weight: Option<f64>,
    pub batch_size: usize,
    pub gen_lr: f64,
    pub critic_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gp_weight: f64,
    /// Interpolated points per critic update (split across cells).
    pub gp_batch: usize,
    /// Final learning-rate fraction reached linearly over the
    /// adversarial phase (1.0 keeps the rates constant).
    pub lr_decay_to: f64,
    pub conditioning: Conditioning,
    pub objective: ObjectiveMode,
    pub min_cell_size: u64,
    /// Monte Carlo draws from the target design used to estimate cell
    /// masses.
    pub mc_target_size: usize,
    /// Weight of the per-cell sorted-transport generator regularizer.
    pub lambda_trans: f64,
    pub crps_weight: f64,
    pub crps_samples: usize,
    pub mse_weight: f64,
    pub mse_samples: usize,
    pub calibration: Option<CalibrationConfig>,
    /// Match the training zero-outcome mass per arm when sampling.
    pub match_zero_mass: bool,
    /// Independent seeds; the model with the best validation factual
    /// transport error is kept.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for GaniceConfig {
    fn default() -> Self {
        GaniceConfig {
            latent_dim: 4,
            gen_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            gen_activation: Activation::Relu,
            critic_activation: Activation::Tanh,
            adversarial_steps: 300,
            critic_steps: 1,
            pretrain_steps: 300,
            pretrain_lr: None,
            pretrain_mse_weight: None,
            batch_size: 128,
            gen_lr: 2e-4,
            critic_lr: 1e-4,
            beta1: 0.0,
            beta2: 0.9,
            gp_weight: 10.0,
            gp_batch: 64,
            lr_decay_to: 1.0,
            conditioning: Conditioning::Discrete,
            objective: ObjectiveMode::Stratified,
            min_cell_size: 4,
            mc_target_size: 20_000,
            lambda_trans: 1.0,
            crps_weight: 0.0,
            crps_samples: 6,
            mse_weight: 1.0,
            mse_samples: 2,
            calibration: None,
            match_zero_mass: false,
            restarts: 1,
            seed: 0,
        }
    }
}

impl GaniceConfig {
    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("latent_dim", self.latent_dim),
            ("adversarial_steps", self.adversarial_steps.max(1)),
            ("critic_steps", self.critic_steps),
            ("batch_size", self.batch_size),
            ("crps_samples", self.crps_samples),
            ("mse_samples", self.mse_samples),
            ("restarts", self.restarts),
            ("mc_target_size", self.mc_target_size),
        ];
        for (name, v) in positives {
            if v == 0 {
                return Err(GaniceError::Config(format!("{name} must be positive")));
            }
        }
        if self.gen_hidden.is_empty() || self.critic_hidden.is_empty() {
            return Err(GaniceError::Config("hidden widths must be nonempty".into()));
        }
        if self.min_cell_size == 0 {
            return Err(GaniceError::Config("min_cell_size must be positive".into()));
        }
        if !(0.0 < self.lr_decay_to && self.lr_decay_to <= 1.0) {
            return Err(GaniceError::Config(format!(
                "lr_decay_to {} outside (0,1]",
                self.lr_decay_to
            )));
        }
        if let Some(c) = &self.calibration {
            if !(0.0..=1.0).contains(&c.blend) {
                return Err(GaniceError::Config(format!(
                    "calibration blend {} outside [0,1]",
                    c.blend
                )));
            }
            if c.samples_per_obs < 2 || c.grid_size < 2 {
                return Err(GaniceError::Config(
                    "calibration needs >= 2 samples per observation and grid >= 2".into(),
                ));
            }
        }
        if self.critic_activation == crate::autodiff::Activation::Relu && self.gp_weight > 0.0 {
            return Err(GaniceError::Config(
                "relu critics cannot carry a gradient penalty".into(),
            ));
        }
        Ok(())
    }

    /// Binary-treatment benchmark profile (25-covariate surrogate).
    pub fn ihdp_paper() -> Self {
        GaniceConfig {
            latent_dim: 4,
            gen_hidden: vec![128, 128],
            critic_hidden: vec![128, 128],
            adversarial_steps: 520,
            critic_steps: 1,
            pretrain_steps: 800,
            pretrain_lr: Some(5e-4),
            pretrain_mse_weight: Some(6.0),
            conditioning: Conditioning::Dyadic(vec![1, 1, 1]),
            min_cell_size: 6,
            mc_target_size: 50_000,
            lambda_trans: 1.0,
            crps_weight: 10.0,
            crps_samples: 6,
            mse_weight: 1.0,
            mse_samples: 2,
            calibration: Some(CalibrationConfig::default()),
            restarts: 4,
            ..Default::default()
        }
    }

    /// Dose-response benchmark profile.
    pub fn tcga_paper() -> Self {
        GaniceConfig {
            latent_dim: 4,
            gen_hidden: vec![96, 96],
            critic_hidden: vec![96, 96],
            adversarial_steps: 620,
            critic_steps: 2,
            pretrain_steps: 1600,
            pretrain_lr: Some(5e-4),
            pretrain_mse_weight: Some(6.0),
            conditioning: Conditioning::Dyadic(vec![0, 2, 3]),
            min_cell_size: 4,
            mc_target_size: 45_000,
            lambda_trans: 0.6,
            crps_weight: 10.0,
            crps_samples: 6,
            mse_weight: 8.0,
            mse_samples: 6,
            ..Default::default()
        }
    }

    /// Job-training benchmark profile.
    pub fn jobs_paper() -> Self {
        GaniceConfig {
            latent_dim: 4,
            gen_hidden: vec![96, 96],
            critic_hidden: vec![96, 96],
            adversarial_steps: 220,
            critic_steps: 3,
            pretrain_steps: 420,
            pretrain_lr: Some(5e-4),
            pretrain_mse_weight: Some(6.0),
            conditioning: Conditioning::Dyadic(vec![1, 1, 1]),
            min_cell_size: 4,
            mc_target_size: 40_000,
            lambda_trans: 5.0,
            crps_weight: 4.0,
            crps_samples: 6,
            mse_weight: 1.0,
            mse_samples: 2,
            calibration: Some(CalibrationConfig::default()),
            match_zero_mass: true,
            ..Default::default()
        }
    }

    /// Small finite-state profile for rate experiments and toys.
    pub fn finite_state_small() -> Self {
        GaniceConfig {
            latent_dim: 1,
            gen_hidden: vec![32, 32],
            critic_hidden: vec![32, 32],
            gen_lr: 3e-3,
            critic_lr: 1e-3,
            adversarial_steps: 300,
            pretrain_steps: 300,
            conditioning: Conditioning::Discrete,
            mc_target_size: 4_000,
            lambda_trans: 5.0,
            crps_weight: 8.0,
            crps_samples: 6,
            mse_weight: 1.0,
            mse_samples: 4,
            gp_batch: 32,
            lr_decay_to: 0.05,
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for c in [
            GaniceConfig::default(),
            GaniceConfig::ihdp_paper(),
            GaniceConfig::tcga_paper(),
            GaniceConfig::jobs_paper(),
            GaniceConfig::finite_state_small(),
        ] {
            c.validate().unwrap();
        }
    }

    #[test]
    fn bad_blend_is_rejected() {
        let mut c = GaniceConfig::default();
        c.calibration = Some(CalibrationConfig {
            blend: 1.5,
            ..Default::default()
        });
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_roundtrips_through_json() {
        let c = GaniceConfig::ihdp_paper();
        let js = serde_json::to_string(&c).unwrap();
        let back: GaniceConfig = serde_json::from_str(&js).unwrap();
        assert_eq!(back.adversarial_steps, c.adversarial_steps);
        assert_eq!(back.conditioning, c.conditioning);
    }
}
