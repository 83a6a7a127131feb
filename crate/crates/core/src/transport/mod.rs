//! Exact and empirical Wasserstein machinery: sorted 1-D distances, an
//! exact small-support transport solver, statewise extended distances, and
//! finite-resolution conditional IPMs.

mod ensemble;
mod exact;
mod sorted;

pub use ensemble::{
    ew1, ew_dominates_joint_check, finite_resolution_ipm, BaseMetric, ConditionalEnsemble,
};
pub use exact::{ot_exact_small, ot_exact_with_cost, TransportCost, TransportPlan};
pub use sorted::{energy_distance_weighted, ks_distance_weighted, w1_sorted, KantorovichPotential};

use crate::error::{GaniceError, Result};
use crate::numeric::kahan_sum;
use serde::{Deserialize, Serialize};

/// Weighted collection of outcome samples: the carrier of every empirical
/// law in the crate. Samples are stored flat, row-major, `dim` per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalLaw {
    samples: Vec<f64>,
    dim: usize,
    weights: Option<Vec<f64>>,
}

impl EmpiricalLaw {
    pub fn scalar(samples: Vec<f64>) -> Self {
        assert!(!samples.is_empty(), "empirical law needs samples");
        EmpiricalLaw {
            samples,
            dim: 1,
            weights: None,
        }
    }

    pub fn scalar_weighted(samples: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::multivariate_weighted(samples, 1, Some(weights))
    }

    pub fn multivariate(samples: Vec<f64>, dim: usize) -> Result<Self> {
        Self::multivariate_weighted(samples, dim, None)
    }

    pub fn multivariate_weighted(
        samples: Vec<f64>,
        dim: usize,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        if dim == 0 || samples.is_empty() || samples.len() % dim != 0 {
            return Err(GaniceError::Contract(format!(
                "samples ({}) must be a nonempty multiple of dim ({dim})",
                samples.len()
            )));
        }
        if let Some(w) = &weights {
            if w.len() != samples.len() / dim {
                return Err(GaniceError::Shape("weights length != sample count".into()));
            }
            if w.iter().any(|&x| x < 0.0) {
                return Err(GaniceError::Contract("negative weight".into()));
            }
            let total = kahan_sum(w.iter().copied());
            if (total - 1.0).abs() > 1e-12 {
                return Err(GaniceError::Contract(format!(
                    "weights sum to {total}, expected 1"
                )));
            }
        }
        Ok(EmpiricalLaw {
            samples,
            dim,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires nonempty
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.len() as f64,
        }
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    /// Scalar values; panics unless `dim == 1`.
    pub fn values(&self) -> &[f64] {
        assert_eq!(self.dim, 1, "scalar access on dim {} law", self.dim);
        &self.samples
    }

    /// Weighted mean of scalar values.
    pub fn mean(&self) -> f64 {
        kahan_sum((0..self.len()).map(|i| self.weight(i) * self.values()[i]))
    }

    /// (value, weight) pairs sorted ascending by value; weights of tied
    /// values are kept separate.
    pub fn sorted_atoms(&self) -> Vec<(f64, f64)> {
        let mut atoms: Vec<(f64, f64)> = (0..self.len())
            .map(|i| (self.values()[i], self.weight(i)))
            .collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        atoms
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum()
}
