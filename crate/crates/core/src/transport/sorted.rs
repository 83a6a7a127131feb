//! Closed-form 1-D transport from sorted samples, plus the exact
//! Kantorovich potential between two scalar empirical laws.

use super::EmpiricalLaw;
use crate::error::{GaniceError, Result};
use crate::numeric::kahan_sum;

/// 1-D Wasserstein-1 distance between two scalar empirical laws.
///
/// Unweighted laws with equal counts use the sorted-difference mean; the
/// general case integrates |F_a^-1 - F_b^-1| over quantile levels by
/// merging the two sorted supports.
pub fn w1_sorted(a: &EmpiricalLaw, b: &EmpiricalLaw) -> Result<f64> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(GaniceError::Contract(format!(
            "w1_sorted needs scalar laws (dims {} and {}), route p>1 through the exact solver",
            a.dim(),
            b.dim()
        )));
    }
    if !a.is_weighted() && !b.is_weighted() && a.len() == b.len() {
        let mut xs = a.values().to_vec();
        let mut ys = b.values().to_vec();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        return Ok(kahan_sum(xs.iter().zip(ys.iter()).map(|(x, y)| (x - y).abs())) / n);
    }
    Ok(w1_quantile_integral(&a.sorted_atoms(), &b.sorted_atoms()))
}

fn cumulative(atoms: &[(f64, f64)]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(atoms.len());
    let mut s = 0.0;
    let mut c = 0.0;
    for &(_, w) in atoms {
        let y = w - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    let total = s;
    let mut run = 0.0;
    for &(_, w) in atoms {
        run += w;
        cum.push(run / total);
    }
    if let Some(last) = cum.last_mut() {
        *last = 1.0;
    }
    cum
}

fn w1_quantile_integral(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let ca = cumulative(a);
    let cb = cumulative(b);
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut level = 0.0;
    let mut terms = Vec::with_capacity(a.len() + b.len());
    while ia < a.len() && ib < b.len() {
        let next = ca[ia].min(cb[ib]);
        terms.push((next - level) * (a[ia].0 - b[ib].0).abs());
        level = next;
        if ca[ia] <= next {
            ia += 1;
        }
        if cb[ib] <= next {
            ib += 1;
        }
    }
    kahan_sum(terms)
}

/// Optimal anchored 1-Lipschitz potential for the 1-D pair `(a, b)`:
/// piecewise linear with slopes in {-1, 0, +1}, flat outside the merged
/// support, and zero at the anchor. Its expectation gap under `(a, b)`
/// equals `w1_sorted(a, b)` exactly.
#[derive(Debug, Clone)]
pub struct KantorovichPotential {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl KantorovichPotential {
    pub fn for_pair(a: &EmpiricalLaw, b: &EmpiricalLaw, anchor: f64) -> Result<Self> {
        if a.dim() != 1 || b.dim() != 1 {
            return Err(GaniceError::Contract("potential needs scalar laws".into()));
        }
        let aa = a.sorted_atoms();
        let bb = b.sorted_atoms();
        // merged distinct support
        let mut knots: Vec<f64> = aa.iter().chain(bb.iter()).map(|&(v, _)| v).collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();

        // CDF difference just right of each knot decides the slope there
        let mut fa = 0.0;
        let mut fb = 0.0;
        let (mut ia, mut ib) = (0usize, 0usize);
        let mut values = vec![0.0; knots.len()];
        for (k, &z) in knots.iter().enumerate() {
            while ia < aa.len() && aa[ia].0 <= z {
                fa += aa[ia].1;
                ia += 1;
            }
            while ib < bb.len() && bb[ib].0 <= z {
                fb += bb[ib].1;
                ib += 1;
            }
            if k + 1 < knots.len() {
                // expectation gap integrates f'(t) (F_b - F_a)(t) dt, so the
                // optimal slope follows the sign of F_b - F_a
                let diff = fb - fa;
                let slope = if diff > 1e-15 {
                    1.0
                } else if diff < -1e-15 {
                    -1.0
                } else {
                    0.0
                };
                values[k + 1] = values[k] + slope * (knots[k + 1] - z);
            }
        }
        let mut pot = KantorovichPotential { knots, values };
        let at_anchor = pot.eval(anchor);
        pot.values.iter_mut().for_each(|v| *v -= at_anchor);
        Ok(pot)
    }

    /// Piecewise-linear evaluation; constant extension outside the knots.
    pub fn eval(&self, y: f64) -> f64 {
        let n = self.knots.len();
        if y <= self.knots[0] {
            return self.values[0];
        }
        if y >= self.knots[n - 1] {
            return self.values[n - 1];
        }
        let k = match self.knots.binary_search_by(|p| p.total_cmp(&y)) {
            Ok(i) => return self.values[i],
            Err(i) => i - 1,
        };
        let t = (y - self.knots[k]) / (self.knots[k + 1] - self.knots[k]);
        self.values[k] + t * (self.values[k + 1] - self.values[k])
    }
}

/// Energy distance between two weighted discrete laws (full double sums:
/// this is the exact distance between the discrete measures, not the
/// sample-based estimator used for model evaluation).
pub fn energy_distance_weighted(a: &EmpiricalLaw, b: &EmpiricalLaw) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(GaniceError::Shape("dimension mismatch".into()));
    }
    let cross = pair_sum(a, b);
    let within_a = pair_sum(a, a);
    let within_b = pair_sum(b, b);
    Ok(2.0 * cross - within_a - within_b)
}

fn pair_sum(a: &EmpiricalLaw, b: &EmpiricalLaw) -> f64 {
    let mut terms = Vec::with_capacity(a.len() * b.len());
    for i in 0..a.len() {
        let wi = a.weight(i);
        for j in 0..b.len() {
            terms.push(wi * b.weight(j) * super::euclid(a.sample(i), b.sample(j)));
        }
    }
    kahan_sum(terms)
}

/// Kolmogorov-Smirnov discrepancy between two weighted scalar laws.
pub fn ks_distance_weighted(a: &EmpiricalLaw, b: &EmpiricalLaw) -> Result<f64> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(GaniceError::Contract("ks needs scalar laws".into()));
    }
    let aa = a.sorted_atoms();
    let bb = b.sorted_atoms();
    let (mut ia, mut ib) = (0usize, 0usize);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut sup = 0.0f64;
    while ia < aa.len() || ib < bb.len() {
        let za = aa.get(ia).map_or(f64::INFINITY, |p| p.0);
        let zb = bb.get(ib).map_or(f64::INFINITY, |p| p.0);
        let z = za.min(zb);
        while ia < aa.len() && aa[ia].0 == z {
            fa += aa[ia].1;
            ia += 1;
        }
        while ib < bb.len() && bb[ib].0 == z {
            fb += bb[ib].1;
            ib += 1;
        }
        sup = sup.max((fa - fb).abs());
    }
    Ok(sup.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Minimum-cost perfect matching by permutation enumeration.
    fn assignment_oracle(xs: &[f64], ys: &[f64]) -> f64 {
        fn perms(k: usize, ys: &mut Vec<f64>, xs: &[f64], best: &mut f64) {
            if k == ys.len() {
                let cost: f64 = xs.iter().zip(ys.iter()).map(|(a, b)| (a - b).abs()).sum();
                if cost < *best {
                    *best = cost;
                }
                return;
            }
            for i in k..ys.len() {
                ys.swap(k, i);
                perms(k + 1, ys, xs, best);
                ys.swap(k, i);
            }
        }
        let mut best = f64::INFINITY;
        let mut ys = ys.to_vec();
        perms(0, &mut ys, xs, &mut best);
        best / xs.len() as f64
    }

    #[test]
    fn uniform_shift() {
        let a = EmpiricalLaw::scalar(vec![0.0, 1.0]);
        let b = EmpiricalLaw::scalar(vec![0.5, 1.5]);
        assert!((w1_sorted(&a, &b).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn identical_laws_are_at_zero() {
        let a = EmpiricalLaw::scalar(vec![0.3, -1.0, 2.0]);
        assert_eq!(w1_sorted(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn matches_assignment_oracle() {
        let mut rng = crate::numeric::rng_stream(17, 0);
        for _ in 0..30 {
            let xs: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let ys: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let want = assignment_oracle(&xs, &ys);
            let got = w1_sorted(&EmpiricalLaw::scalar(xs), &EmpiricalLaw::scalar(ys)).unwrap();
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn weighted_path_agrees_with_replication() {
        // weights k/n equal replicating atoms k times under uniform weights
        let a = EmpiricalLaw::scalar_weighted(vec![0.0, 1.0], vec![0.25, 0.75]).unwrap();
        let a_rep = EmpiricalLaw::scalar(vec![0.0, 1.0, 1.0, 1.0]);
        let b = EmpiricalLaw::scalar_weighted(vec![-1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let b_rep = EmpiricalLaw::scalar(vec![-1.0, -1.0, 2.0, 2.0]);
        let w = w1_sorted(&a, &b).unwrap();
        let w_rep = w1_sorted(&a_rep, &b_rep).unwrap();
        assert!((w - w_rep).abs() < 1e-12, "{w} vs {w_rep}");
    }

    #[test]
    fn unequal_counts_use_quantile_integration() {
        let a = EmpiricalLaw::scalar(vec![0.0, 1.0, 2.0]);
        let b = EmpiricalLaw::scalar(vec![0.5, 1.5]);
        // replicate to common grid of 6
        let a6 = EmpiricalLaw::scalar(vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0]);
        let b6 = EmpiricalLaw::scalar(vec![0.5, 0.5, 0.5, 1.5, 1.5, 1.5]);
        let got = w1_sorted(&a, &b).unwrap();
        let want = w1_sorted(&a6, &b6).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn potential_reproduces_w1_as_expectation_gap() {
        let mut rng = crate::numeric::rng_stream(23, 5);
        for trial in 0..40 {
            let n = 2 + (trial % 5);
            let m = 2 + (trial % 4);
            let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..3.0)).collect();
            let ys: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..3.0)).collect();
            let wa: Vec<f64> = {
                let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
                let s: f64 = raw.iter().sum();
                let mut w: Vec<f64> = raw.iter().map(|x| x / s).collect();
                let fix = 1.0 - w.iter().sum::<f64>();
                w[0] += fix;
                w
            };
            let a = EmpiricalLaw::scalar_weighted(xs.clone(), wa).unwrap();
            let b = EmpiricalLaw::scalar(ys.clone());
            let w1 = w1_sorted(&a, &b).unwrap();
            let pot = KantorovichPotential::for_pair(&a, &b, 0.0).unwrap();
            let ea: f64 = (0..a.len()).map(|i| a.weight(i) * pot.eval(a.values()[i])).sum();
            let eb: f64 = (0..b.len()).map(|i| b.weight(i) * pot.eval(b.values()[i])).sum();
            assert!(((ea - eb) - w1).abs() < 1e-10, "{} vs {}", ea - eb, w1);
            assert!(pot.eval(0.0).abs() < 1e-12, "anchored at 0");
        }
    }

    #[test]
    fn potential_is_one_lipschitz() {
        let mut rng = crate::numeric::rng_stream(29, 2);
        let xs: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pot = KantorovichPotential::for_pair(
            &EmpiricalLaw::scalar(xs),
            &EmpiricalLaw::scalar(ys),
            0.3,
        )
        .unwrap();
        let mut prev_y = -2.0;
        let mut prev_v = pot.eval(prev_y);
        for k in 1..400 {
            let y = -2.0 + k as f64 * 0.01;
            let v = pot.eval(y);
            assert!((v - prev_v).abs() <= (y - prev_y).abs() + 1e-12);
            prev_y = y;
            prev_v = v;
        }
    }

    #[test]
    fn energy_distance_on_diracs() {
        let a = EmpiricalLaw::scalar(vec![0.0]);
        let b = EmpiricalLaw::scalar(vec![1.0]);
        assert!((energy_distance_weighted(&a, &b).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(energy_distance_weighted(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a = EmpiricalLaw::scalar(vec![0.1, 0.4]);
        let b = EmpiricalLaw::scalar(vec![3.0, 4.0]);
        assert_eq!(ks_distance_weighted(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_distance_weighted(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn ks_matches_bruteforce_grid() {
        let mut rng = crate::numeric::rng_stream(41, 3);
        let xs: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = EmpiricalLaw::scalar(xs.clone());
        let b = EmpiricalLaw::scalar(ys.clone());
        let got = ks_distance_weighted(&a, &b).unwrap();
        let mut grid: Vec<f64> = xs.iter().chain(ys.iter()).cloned().collect();
        grid.sort_by(f64::total_cmp);
        let want = grid
            .iter()
            .map(|&z| {
                let fa = xs.iter().filter(|&&x| x <= z).count() as f64 / xs.len() as f64;
                let fb = ys.iter().filter(|&&y| y <= z).count() as f64 / ys.len() as f64;
                (fa - fb).abs()
            })
            .fold(0.0f64, f64::max);
        assert!((got - want).abs() < 1e-12);
    }
}
