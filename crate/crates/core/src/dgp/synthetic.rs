//! Synthetic covariate generators standing in for the raw benchmark
//! files, plus the fixed orthonormal projection to low-dimensional scores.

use super::normal;
use crate::error::{GaniceError, Result};
use crate::numeric::{rng_stream, Matrix};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovariateKind {
    /// Independent standard normal columns.
    GaussianStd,
    /// Nonnegative rows normalized to unit l2 norm, mimicking scaled
    /// expression profiles.
    TcgaLike,
}

pub fn synthetic_covariates(n: usize, d: usize, kind: CovariateKind, seed: u64) -> Result<Matrix> {
    if n < 2 || d == 0 {
        return Err(GaniceError::Contract(format!(
            "need n >= 2 and d >= 1 (got n={n}, d={d})"
        )));
    }
    let mut rng = rng_stream(seed, 0xc0_f1);
    let mut x = Matrix::zeros(n, d);
    match kind {
        CovariateKind::GaussianStd => {
            for i in 0..n {
                for j in 0..d {
                    x.set(i, j, normal(&mut rng));
                }
            }
        }
        CovariateKind::TcgaLike => {
            for i in 0..n {
                let mut norm2 = 0.0;
                for j in 0..d {
                    let v: f64 = normal(&mut rng);
                    let v = v.abs();
                    x.set(i, j, v);
                    norm2 += v * v;
                }
                let inv = 1.0 / norm2.sqrt().max(1e-12);
                for j in 0..d {
                    x.set(i, j, x.get(i, j) * inv);
                }
            }
        }
    }
    Ok(x)
}

/// Fixed random projection with orthonormal columns (Gram-Schmidt on a
/// seeded Gaussian matrix), used to map covariates to score vectors.
pub fn score_projection(d: usize, dz: usize, seed: u64) -> Matrix {
    assert!(dz <= d, "score dim must not exceed covariate dim");
    let mut rng = rng_stream(seed, 0x9c_0e);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dz);
    while cols.len() < dz {
        let mut v: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
        for u in &cols {
            let proj: f64 = v.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
            for (vi, ui) in v.iter_mut().zip(u.iter()) {
                *vi -= proj * ui;
            }
        }
        let norm: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|a| *a /= norm);
        cols.push(v);
    }
    let mut q = Matrix::zeros(d, dz);
    for (k, col) in cols.iter().enumerate() {
        for j in 0..d {
            q.set(j, k, col[j]);
        }
    }
    q
}

/// Leading principal directions of the rows of `x` (power iteration with
/// deflation on the centered data). Returns (components, explained
/// variances); components have unit norm.
pub fn top_principal_components(x: &Matrix, k: usize, rows: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = x.cols();
    let n = rows.len();
    assert!(n >= 2, "PCA needs at least two rows");
    let mut means = vec![0.0; d];
    for &r in rows {
        for j in 0..d {
            means[j] += x.get(r, j);
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);

    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|&r| (0..d).map(|j| x.get(r, j) - means[j]).collect())
        .collect();

    let mut comps: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut vars = Vec::with_capacity(k);
    for c in 0..k {
        let mut v: Vec<f64> = (0..d)
            .map(|j| if j % (c + 2) == 0 { 1.0 } else { 0.3 })
            .collect();
        normalize(&mut v);
        let mut lambda = 0.0;
        for _ in 0..300 {
            // w = (X^T X / (n-1)) v computed as two passes
            let mut w = vec![0.0; d];
            for row in &centered {
                let s: f64 = row.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                for (wj, rj) in w.iter_mut().zip(row.iter()) {
                    *wj += s * rj;
                }
            }
            w.iter_mut().for_each(|a| *a /= (n - 1) as f64);
            // keep the iterate orthogonal to previously found components
            for pc in &comps {
                let s: f64 = pc.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
                for (wj, pj) in w.iter_mut().zip(pc.iter()) {
                    *wj -= s * pj;
                }
            }
            let new_lambda: f64 = w.iter().map(|a| a * a).sum::<f64>().sqrt();
            if new_lambda < 1e-12 {
                break;
            }
            w.iter_mut().for_each(|a| *a /= new_lambda);
            let delta: f64 = w
                .iter()
                .zip(v.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            v = w;
            lambda = new_lambda;
            if delta < 1e-12 {
                break;
            }
        }
        comps.push(v);
        vars.push(lambda);
    }
    (comps, vars)
}

fn normalize(v: &mut [f64]) {
    let n: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
    v.iter_mut().for_each(|a| *a /= n);
}

/// Empirical rank map fitted on reference values: maps a value to its
/// mid-rank in (0, 1), clamped to [0, 1]. Used to place unbounded
/// coordinates on the partition cube.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankMap {
    sorted_ref: Vec<f64>,
}

impl RankMap {
    pub fn fit(values: &[f64]) -> Self {
        RankMap {
            sorted_ref: crate::numeric::sorted(values),
        }
    }

    pub fn eval(&self, v: f64) -> f64 {
        let n = self.sorted_ref.len();
        let lo = self.sorted_ref.partition_point(|&x| x < v);
        let hi = self.sorted_ref.partition_point(|&x| x <= v);
        ((lo + hi) as f64 / 2.0 / n as f64).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_columns_are_roughly_standard() {
        let x = synthetic_covariates(4000, 3, CovariateKind::GaussianStd, 1).unwrap();
        for j in 0..3 {
            let col = x.column(j);
            assert!(crate::numeric::mean(&col).abs() < 0.06);
            assert!((crate::numeric::variance(&col).sqrt() - 1.0).abs() < 0.06);
        }
    }

    #[test]
    fn fixed_seed_reproduces() {
        let a = synthetic_covariates(10, 4, CovariateKind::TcgaLike, 7).unwrap();
        let b = synthetic_covariates(10, 4, CovariateKind::TcgaLike, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tcga_like_rows_are_nonnegative_unit_norm() {
        let x = synthetic_covariates(20, 15, CovariateKind::TcgaLike, 3).unwrap();
        for i in 0..20 {
            let row = x.row(i);
            assert!(row.iter().all(|&v| v >= 0.0));
            let n2: f64 = row.iter().map(|v| v * v).sum();
            assert!((n2 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_n_is_rejected() {
        assert!(synthetic_covariates(1, 3, CovariateKind::GaussianStd, 0).is_err());
    }

    #[test]
    fn projection_is_orthonormal() {
        let q = score_projection(40, 8, 11);
        for a in 0..8 {
            for b in 0..8 {
                let dot: f64 = (0..40).map(|j| q.get(j, a) * q.get(j, b)).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-9, "gram[{a}][{b}] = {dot}");
            }
        }
    }

    #[test]
    fn pca_recovers_dominant_direction() {
        // rows concentrated along (1, 1)/sqrt(2) with small noise
        let mut rng = crate::numeric::rng_stream(9, 9);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let t: f64 = super::normal(&mut rng) * 3.0;
                let e1: f64 = super::normal(&mut rng) * 0.1;
                let e2: f64 = super::normal(&mut rng) * 0.1;
                vec![t / 2f64.sqrt() + e1, t / 2f64.sqrt() + e2]
            })
            .collect();
        let x = Matrix::from_rows(rows);
        let idx: Vec<usize> = (0..200).collect();
        let (comps, vars) = top_principal_components(&x, 1, &idx);
        let c = &comps[0];
        let align = (c[0] * (1.0 / 2f64.sqrt()) + c[1] * (1.0 / 2f64.sqrt())).abs();
        assert!(align > 0.99, "alignment {align}");
        assert!(vars[0] > 5.0);
    }

    #[test]
    fn rank_map_is_monotone_into_unit_interval() {
        let rm = RankMap::fit(&[3.0, 1.0, 2.0, 2.0]);
        assert_eq!(rm.eval(0.0), 0.0);
        assert_eq!(rm.eval(10.0), 1.0);
        let mid = rm.eval(2.0);
        assert!(rm.eval(1.0) < mid && mid < rm.eval(3.0));
    }
}
