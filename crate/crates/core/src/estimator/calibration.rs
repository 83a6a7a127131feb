//! Post-hoc residual quantile calibration: per-arm monotone
//! quantile-to-quantile maps on a fixed level grid, learned from the
//! validation split and blended with the raw draws when sampling.
//!
//! The map sends the model's pooled arm quantiles onto the observed arm
//! quantiles, so an over-confident (too narrow) or shifted predictive law
//! is stretched and recentered where the validation data demand it.

use crate::error::Result;
use crate::numeric::{quantile_sorted, sorted};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmTable {
    /// Model pooled quantiles at the grid levels (ascending).
    pub from: Vec<f64>,
    /// Observed quantiles at the same levels (nondecreasing).
    pub to: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationTables {
    pub blend: f64,
    pub arms: Vec<Option<ArmTable>>,
}

impl ArmTable {
    /// Fit from pooled model draws and observed outcomes of one arm.
    /// The grid is coarsened (with a warning) when validation is smaller
    /// than the requested grid.
    pub fn fit(model_pool: &[f64], observed: &[f64], grid_size: usize) -> Result<ArmTable> {
        let g = grid_size.min(observed.len()).max(2);
        if g < grid_size {
            log::warn!(
                "calibration grid coarsened from {grid_size} to {g}: only {} validation points",
                observed.len()
            );
        }
        let sm = sorted(model_pool);
        let so = sorted(observed);
        let mut from = Vec::with_capacity(g);
        let mut to = Vec::with_capacity(g);
        for k in 0..g {
            let alpha = (k as f64 + 0.5) / g as f64;
            from.push(quantile_sorted(&sm, alpha));
            to.push(quantile_sorted(&so, alpha));
        }
        // isotonic guard: both legs must be nondecreasing
        for k in 1..g {
            if from[k] < from[k - 1] {
                from[k] = from[k - 1];
            }
            if to[k] < to[k - 1] {
                to[k] = to[k - 1];
            }
        }
        Ok(ArmTable { from, to })
    }

    /// Monotone piecewise-linear quantile transfer; beyond the grid the
    /// map continues as a pure shift.
    pub fn transfer(&self, y: f64) -> f64 {
        let n = self.from.len();
        if y <= self.from[0] {
            return y + (self.to[0] - self.from[0]);
        }
        if y >= self.from[n - 1] {
            return y + (self.to[n - 1] - self.from[n - 1]);
        }
        let k = self.from.partition_point(|&x| x < y) - 1;
        let span = self.from[k + 1] - self.from[k];
        let t = if span > 0.0 { (y - self.from[k]) / span } else { 0.0 };
        self.to[k] + t * (self.to[k + 1] - self.to[k])
    }

    /// Sup deviation of the map from the identity over its grid.
    pub fn identity_deviation(&self) -> f64 {
        self.from
            .iter()
            .zip(self.to.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl CalibrationTables {
    /// Blend each draw with its calibrated image.
    pub fn apply(&self, arm: usize, draws: &mut [f64]) {
        let Some(Some(table)) = self.arms.get(arm) else {
            return;
        };
        if self.blend == 0.0 {
            return;
        }
        for y in draws.iter_mut() {
            *y = self.blend * table.transfer(*y) + (1.0 - self.blend) * *y;
        }
    }
}

/// Fraction of predictive draws at or below the observation (PIT with a
/// half-weight tie convention).
pub fn pit_value(draws: &[f64], y: f64) -> f64 {
    let below = draws.iter().filter(|&&d| d < y).count() as f64;
    let ties = draws.iter().filter(|&&d| d == y).count() as f64;
    (below + 0.5 * ties) / draws.len() as f64
}
