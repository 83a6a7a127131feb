//! Sample-based distributional metric primitives. All pairwise terms use
//! distinct-pair (unbiased) averaging; empirical quantiles are type 1.

use crate::numeric::{kahan_sum, quantile_sorted, sorted};

/// Mean |a_i - b_j| over all cross pairs, O((n+m) log) via sorting and
/// prefix sums.
pub fn mean_abs_cross(a: &[f64], b: &[f64]) -> f64 {
    let sa = sorted(a);
    let sb = sorted(b);
    let mut prefix = Vec::with_capacity(sb.len() + 1);
    prefix.push(0.0);
    let mut run = 0.0;
    for &v in &sb {
        run += v;
        prefix.push(run);
    }
    let total_b: f64 = run;
    let m = sb.len() as f64;
    let mut total = 0.0;
    for &x in &sa {
        let k = sb.partition_point(|&v| v <= x);
        let below = prefix[k];
        let above = total_b - below;
        total += x * k as f64 - below + (above - x * (m - k as f64));
    }
    total / (sa.len() as f64 * m)
}

/// Mean |a_i - a_j| over distinct pairs, O(n log n).
pub fn mean_abs_within(a: &[f64]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let s = sorted(a);
    let sum: f64 = kahan_sum(
        s.iter()
            .enumerate()
            .map(|(k, &v)| v * (2.0 * k as f64 - (n as f64 - 1.0))),
    );
    2.0 * sum / (n as f64 * (n as f64 - 1.0))
}

/// Sample continuous ranked probability score of a predictive sample
/// against one observation.
pub fn crps(samples: &[f64], y: f64) -> f64 {
    let e_abs: f64 = samples.iter().map(|&s| (s - y).abs()).sum::<f64>() / samples.len() as f64;
    e_abs - 0.5 * mean_abs_within(samples)
}

/// Expected CRPS of the predictive sample under an oracle sample:
/// the mean of `crps(model, y)` over oracle draws.
pub fn expected_crps(model: &[f64], oracle: &[f64]) -> f64 {
    mean_abs_cross(model, oracle) - 0.5 * mean_abs_within(model)
}

/// Energy distance between two scalar samples (distinct-pair estimator).
pub fn energy_distance(a: &[f64], b: &[f64]) -> f64 {
    2.0 * mean_abs_cross(a, b) - mean_abs_within(a) - mean_abs_within(b)
}

/// Kolmogorov-Smirnov discrepancy between two empirical samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let sa = sorted(a);
    let sb = sorted(b);
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut sup = 0.0f64;
    while ia < sa.len() || ib < sb.len() {
        let za = sa.get(ia).copied().unwrap_or(f64::INFINITY);
        let zb = sb.get(ib).copied().unwrap_or(f64::INFINITY);
        let z = za.min(zb);
        while ia < sa.len() && sa[ia] == z {
            ia += 1;
        }
        while ib < sb.len() && sb[ib] == z {
            ib += 1;
        }
        let fa = ia as f64 / sa.len() as f64;
        let fb = ib as f64 / sb.len() as f64;
        sup = sup.max((fa - fb).abs());
    }
    sup
}

/// Type-1 empirical quantiles of a sample at the given levels.
pub fn quantiles(samples: &[f64], levels: &[f64]) -> Vec<f64> {
    let s = sorted(samples);
    levels.iter().map(|&a| quantile_sorted(&s, a)).collect()
}

/// Lower conditional tail mean: E[Y | Y <= Q(alpha)].
pub fn lcvar(sorted_samples: &[f64], alpha: f64) -> f64 {
    let q = quantile_sorted(sorted_samples, alpha);
    let tail: Vec<f64> = sorted_samples.iter().copied().take_while(|&v| v <= q).collect();
    crate::numeric::mean(&tail)
}

/// Upper conditional tail mean: E[Y | Y >= Q(alpha)].
pub fn ucvar(sorted_samples: &[f64], alpha: f64) -> f64 {
    let q = quantile_sorted(sorted_samples, alpha);
    let tail: Vec<f64> = sorted_samples
        .iter()
        .copied()
        .skip_while(|&v| v < q)
        .collect();
    crate::numeric::mean(&tail)
}

/// Central predictive interval at nominal coverage c.
pub fn central_interval(sorted_samples: &[f64], c: f64) -> (f64, f64) {
    (
        quantile_sorted(sorted_samples, (1.0 - c) / 2.0),
        quantile_sorted(sorted_samples, (1.0 + c) / 2.0),
    )
}
