//! Cell-normalized averages and the stratified empirical objectives.
//!
//! Critics are anchored: every evaluation is `D(y) - D(y0)`, so empty
//! cells fall back to an exact zero on the empty side. Within-cell sums
//! run in sorted order, which makes the objective value invariant to
//! permutations of the supplied samples bit for bit.

use crate::error::{GaniceError, Result};
use crate::numeric::kahan_sum;

/// Anchored mean of a critic over a cell's observed outcomes; the anchor
/// value itself when the cell is empty (identically zero after anchoring).
pub fn cell_obs_average(samples: &[f64], critic: impl FnMut(f64) -> f64, anchor: f64) -> f64 {
    cell_average(samples, critic, anchor)
}

/// Mirror of [`cell_obs_average`] over generated draws in a cell.
pub fn cell_gen_average(samples: &[f64], critic: impl FnMut(f64) -> f64, anchor: f64) -> f64 {
    cell_average(samples, critic, anchor)
}

fn cell_average(samples: &[f64], mut critic: impl FnMut(f64) -> f64, anchor: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let base = critic(anchor);
    let mut vals: Vec<f64> = samples.iter().map(|&y| critic(y) - base).collect();
    vals.sort_by(f64::total_cmp);
    kahan_sum(vals.iter().copied()) / samples.len() as f64
}

/// Stratified objective over per-cell batches: the mass-weighted sum of
/// anchored observed-minus-generated cell averages. Works for both the
/// finite-state and the finite-resolution form; cells are whatever the
/// caller stratified by.
pub fn stratified_objective<C>(
    obs_cells: &[Vec<f64>],
    gen_cells: &[Vec<f64>],
    masses: &[f64],
    mut critics: C,
    anchor: f64,
) -> Result<f64>
where
    C: FnMut(usize, f64) -> f64,
{
    if obs_cells.len() != gen_cells.len() || obs_cells.len() != masses.len() {
        return Err(GaniceError::Shape(format!(
            "cells: obs {}, gen {}, masses {}",
            obs_cells.len(),
            gen_cells.len(),
            masses.len()
        )));
    }
    let total = kahan_sum(masses.iter().copied());
    if (total - 1.0).abs() > 1e-9 {
        return Err(GaniceError::Contract(format!(
            "cell masses sum to {total}, expected 1"
        )));
    }
    let mut terms = Vec::with_capacity(masses.len());
    for (c, &q) in masses.iter().enumerate() {
        if q == 0.0 {
            continue;
        }
        let obs = cell_obs_average(&obs_cells[c], |y| critics(c, y), anchor);
        let gen = cell_gen_average(&gen_cells[c], |y| critics(c, y), anchor);
        terms.push(q * (obs - gen));
    }
    Ok(kahan_sum(terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{w1_sorted, EmpiricalLaw, KantorovichPotential};
    use rand::Rng;

    #[test]
    fn empty_cell_contributes_anchor_zero() {
        assert_eq!(cell_obs_average(&[], |y| 3.0 * y + 2.0, 0.7), 0.0);
    }

    #[test]
    fn constant_critic_is_zero_after_anchoring() {
        assert_eq!(cell_obs_average(&[1.0, 2.0], |_| 5.0, 0.0), 0.0);
    }

    #[test]
    fn centered_mean_example() {
        // D(y) = y - y0 with y0 = 2 over {1, 2, 3}: anchored mean 0
        let v = cell_obs_average(&[1.0, 2.0, 3.0], |y| y - 2.0, 2.0);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn objective_zero_when_generated_equals_observed() {
        let obs = vec![vec![0.3, -1.0], vec![2.0, 2.5, 2.1]];
        let gen = obs.clone();
        let v = stratified_objective(&obs, &gen, &[0.4, 0.6], |_, y| y.sin(), 0.0).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn single_cell_reduces_to_unconditional_gap() {
        let obs = vec![vec![1.0, 3.0]];
        let gen = vec![vec![0.0, 2.0]];
        let v = stratified_objective(&obs, &gen, &[1.0], |_, y| y, 0.5).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hand_computed_two_state_instance() {
        // linear critics D_0(y) = y, D_1(y) = 2y, anchor 0
        // state 0: q=0.3, obs {1,2} -> 1.5, gen {0} -> 0.0; gap 1.5
        // state 1: q=0.7, obs {1} -> 2, gen {2,4} -> 6; gap -4
        // total = 0.3*1.5 + 0.7*(-4) = 0.45 - 2.8 = -2.35
        let obs = vec![vec![1.0, 2.0], vec![1.0]];
        let gen = vec![vec![0.0], vec![2.0, 4.0]];
        let critics = |c: usize, y: f64| if c == 0 { y } else { 2.0 * y };
        let v = stratified_objective(&obs, &gen, &[0.3, 0.7], critics, 0.0).unwrap();
        assert!((v + 2.35).abs() < 1e-12);
    }

    #[test]
    fn mass_normalization_is_enforced() {
        let obs = vec![vec![1.0]];
        let gen = vec![vec![2.0]];
        assert!(matches!(
            stratified_objective(&obs, &gen, &[0.5], |_, y| y, 0.0),
            Err(GaniceError::Contract(_))
        ));
    }

    #[test]
    fn anchor_invariance() {
        // adding a constant to a critic changes nothing
        let obs = vec![vec![0.1, 0.9, 0.4]];
        let gen = vec![vec![0.2, 0.3]];
        let v1 = stratified_objective(&obs, &gen, &[1.0], |_, y| y.cos(), 0.3).unwrap();
        let v2 = stratified_objective(&obs, &gen, &[1.0], |_, y| y.cos() + 17.0, 0.3).unwrap();
        // exact up to the one-ulp rounding of the shifted critic values
        assert!((v1 - v2).abs() <= 1e-14 * v1.abs().max(1.0), "{v1} vs {v2}");
    }

    #[test]
    fn permutation_invariance_is_bitwise() {
        let obs = vec![vec![0.3, -0.5, 0.8, 0.1]];
        let gen = vec![vec![1.3, 0.2, -0.9]];
        let v1 = stratified_objective(&obs, &gen, &[1.0], |_, y| y.tanh(), 0.0).unwrap();
        let obs_p = vec![vec![0.8, 0.3, 0.1, -0.5]];
        let gen_p = vec![vec![-0.9, 1.3, 0.2]];
        let v2 = stratified_objective(&obs_p, &gen_p, &[1.0], |_, y| y.tanh(), 0.0).unwrap();
        assert_eq!(v1.to_bits(), v2.to_bits());
    }

    #[test]
    fn mass_linearity_of_cell_contributions() {
        // scaling one cell's mass (before renormalizing) scales its term
        let obs = vec![vec![1.0, 2.0], vec![5.0]];
        let gen = vec![vec![0.5], vec![4.0]];
        let critic = |_: usize, y: f64| y;
        let base = stratified_objective(&obs, &gen, &[0.5, 0.5], critic, 0.0).unwrap();
        let scaled = stratified_objective(&obs, &gen, &[0.25, 0.75], critic, 0.0).unwrap();
        // per-cell gaps: cell0 = 1.0, cell1 = 1.0
        assert!((base - 1.0).abs() < 1e-12);
        assert!((scaled - 1.0).abs() < 1e-12);
        let tilted = stratified_objective(&obs, &gen, &[1.0, 0.0], critic, 0.0).unwrap();
        assert!((tilted - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_potentials_recover_mass_weighted_w1() {
        // substitute the exact per-cell Kantorovich potential for the
        // critic: the objective must equal the mass-weighted sorted-W1 sum
        let mut rng = crate::numeric::rng_stream(55, 0);
        for _ in 0..25 {
            let cells = 1 + rng.random_range(0..4);
            let mut obs = Vec::new();
            let mut gen = Vec::new();
            let mut masses = Vec::new();
            for _ in 0..cells {
                let n = 2 + rng.random_range(0..6);
                let m = 2 + rng.random_range(0..6);
                obs.push((0..n).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>());
                gen.push((0..m).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>());
                masses.push(rng.random_range(0.1..1.0));
            }
            let total: f64 = masses.iter().sum();
            masses.iter_mut().for_each(|m| *m /= total);
            let fix = 1.0 - masses.iter().sum::<f64>();
            masses[0] += fix;

            let anchor = 0.25;
            let pots: Vec<KantorovichPotential> = (0..cells)
                .map(|c| {
                    KantorovichPotential::for_pair(
                        &EmpiricalLaw::scalar(obs[c].clone()),
                        &EmpiricalLaw::scalar(gen[c].clone()),
                        anchor,
                    )
                    .unwrap()
                })
                .collect();
            let objective =
                stratified_objective(&obs, &gen, &masses, |c, y| pots[c].eval(y), anchor).unwrap();
            let want: f64 = (0..cells)
                .map(|c| {
                    masses[c]
                        * w1_sorted(
                            &EmpiricalLaw::scalar(obs[c].clone()),
                            &EmpiricalLaw::scalar(gen[c].clone()),
                        )
                        .unwrap()
                })
                .sum();
            assert!(
                (objective - want).abs() < 1e-9,
                "objective {objective} vs w1 sum {want}"
            );
        }
    }
}
