//! Statewise (extended) Wasserstein distances over conditional ensembles
//! and the finite-resolution conditional IPM.

use super::{
    energy_distance_weighted, ks_distance_weighted, ot_exact_small, w1_sorted, EmpiricalLaw,
    TransportCost,
};
use crate::error::{GaniceError, Result};
use crate::numeric::kahan_sum;
use crate::partition::DyadicPartition;

/// Family of conditional outcome laws attached to states, with the state
/// masses of the shared conditioning marginal.
#[derive(Debug, Clone)]
pub struct ConditionalEnsemble {
    states: Vec<Vec<f64>>,
    laws: Vec<EmpiricalLaw>,
    masses: Vec<f64>,
}

impl ConditionalEnsemble {
    pub fn new(states: Vec<Vec<f64>>, laws: Vec<EmpiricalLaw>, masses: Vec<f64>) -> Result<Self> {
        if states.len() != laws.len() || states.len() != masses.len() || states.is_empty() {
            return Err(GaniceError::Contract(
                "states, laws and masses must be nonempty and of equal length".into(),
            ));
        }
        if masses.iter().any(|&m| m < 0.0) {
            return Err(GaniceError::Contract("negative state mass".into()));
        }
        let total = kahan_sum(masses.iter().copied());
        if (total - 1.0).abs() > 1e-9 {
            return Err(GaniceError::Contract(format!(
                "state masses sum to {total}, expected 1"
            )));
        }
        Ok(ConditionalEnsemble {
            states,
            laws,
            masses,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i]
    }

    pub fn law(&self, i: usize) -> &EmpiricalLaw {
        &self.laws[i]
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    fn check_shared_marginal(&self, other: &Self) -> Result<()> {
        if self.len() != other.len()
            || self
                .states
                .iter()
                .zip(other.states.iter())
                .any(|(a, b)| a != b)
        {
            return Err(GaniceError::Contract(
                "diagonal coupling undefined: ensembles have different state lists".into(),
            ));
        }
        if self
            .masses
            .iter()
            .zip(other.masses.iter())
            .any(|(a, b)| (a - b).abs() > 1e-9)
        {
            return Err(GaniceError::Contract(
                "ensembles must share state masses".into(),
            ));
        }
        Ok(())
    }
}

fn statewise_w1(a: &EmpiricalLaw, b: &EmpiricalLaw) -> Result<f64> {
    if a.dim() == 1 {
        w1_sorted(a, b)
    } else {
        Ok(ot_exact_small(a, b, TransportCost::Euclidean)?.value)
    }
}

/// Extended Wasserstein-1 distance between two ensembles sharing the same
/// conditioning marginal: the mass-weighted sum of statewise W1 distances.
pub fn ew1(p: &ConditionalEnsemble, r: &ConditionalEnsemble) -> Result<f64> {
    p.check_shared_marginal(r)?;
    let mut terms = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        if p.mass(i) == 0.0 {
            continue;
        }
        terms.push(p.mass(i) * statewise_w1(p.law(i), r.law(i))?);
    }
    Ok(kahan_sum(terms))
}

/// Extended distance together with the ordinary joint transport cost under
/// the product metric (l1 on states plus Euclidean on outcomes). The joint
/// value never exceeds the extended one; callers assert it.
pub fn ew_dominates_joint_check(
    p: &ConditionalEnsemble,
    r: &ConditionalEnsemble,
) -> Result<(f64, f64)> {
    p.check_shared_marginal(r)?;
    let ew = ew1(p, r)?;
    let state_dim = p.state(0).len();
    let (pa, pw) = joint_atoms(p);
    let (ra, rw) = joint_atoms(r);
    if pw.len() > 16 || rw.len() > 16 {
        return Err(GaniceError::Capacity(format!(
            "joint supports {}x{} exceed 16 atoms per side",
            pw.len(),
            rw.len()
        )));
    }
    let dim = state_dim + p.law(0).dim();
    let a = EmpiricalLaw::multivariate_weighted(pa, dim, Some(pw))?;
    let b = EmpiricalLaw::multivariate_weighted(ra, dim, Some(rw))?;
    let joint = ot_exact_small(&a, &b, TransportCost::Product { state_dim })?.value;
    Ok((ew, joint))
}

fn joint_atoms(e: &ConditionalEnsemble) -> (Vec<f64>, Vec<f64>) {
    let mut flat = Vec::new();
    let mut weights = Vec::new();
    for i in 0..e.len() {
        let law = e.law(i);
        for k in 0..law.len() {
            flat.extend_from_slice(e.state(i));
            flat.extend_from_slice(law.sample(k));
            weights.push(e.mass(i) * law.weight(k));
        }
    }
    // exact renormalization against accumulated rounding
    let total = kahan_sum(weights.iter().copied());
    weights.iter_mut().for_each(|w| *w /= total);
    let fix = 1.0 - kahan_sum(weights.iter().copied());
    weights[0] += fix;
    (flat, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseMetric {
    W1,
    Energy,
    Ks,
}

/// Finite-resolution conditional IPM: pool each ensemble's samples into
/// mass-weighted cell mixtures and sum cellwise base-metric distances
/// weighted by the reference cell masses (taken from `p`).
///
/// Cells with reference mass but no mass in `r` compare against the anchor
/// Dirac; cells without reference mass contribute nothing.
pub fn finite_resolution_ipm(
    p: &ConditionalEnsemble,
    r: &ConditionalEnsemble,
    partition: &DyadicPartition,
    base: BaseMetric,
    anchor: f64,
) -> Result<f64> {
    let cells = partition.cell_count();
    let p_cells = pool_cells(p, partition, cells)?;
    let r_cells = pool_cells(r, partition, cells)?;
    let mut terms = Vec::with_capacity(cells);
    for c in 0..cells {
        let Some((q_c, p_law)) = &p_cells[c] else {
            continue;
        };
        let anchor_law;
        let r_law = match &r_cells[c] {
            Some((_, law)) => law,
            None => {
                anchor_law = EmpiricalLaw::scalar(vec![anchor]);
                &anchor_law
            }
        };
        let d = match base {
            BaseMetric::W1 => w1_sorted(p_law, r_law)?,
            BaseMetric::Energy => energy_distance_weighted(p_law, r_law)?,
            BaseMetric::Ks => ks_distance_weighted(p_law, r_law)?,
        };
        terms.push(q_c * d);
    }
    Ok(kahan_sum(terms))
}

type PooledCells = Vec<Option<(f64, EmpiricalLaw)>>;

fn pool_cells(
    e: &ConditionalEnsemble,
    partition: &DyadicPartition,
    cells: usize,
) -> Result<PooledCells> {
    let mut vals: Vec<Vec<f64>> = vec![Vec::new(); cells];
    let mut wts: Vec<Vec<f64>> = vec![Vec::new(); cells];
    let mut mass = vec![0.0f64; cells];
    for i in 0..e.len() {
        if e.mass(i) == 0.0 {
            continue;
        }
        let c = partition.locate_linear(e.state(i))?;
        let law = e.law(i);
        if law.dim() != 1 {
            return Err(GaniceError::Contract(
                "finite-resolution IPM pools scalar outcome laws".into(),
            ));
        }
        mass[c] += e.mass(i);
        for k in 0..law.len() {
            vals[c].push(law.values()[k]);
            wts[c].push(e.mass(i) * law.weight(k));
        }
    }
    let mut out: PooledCells = Vec::with_capacity(cells);
    for c in 0..cells {
        if vals[c].is_empty() {
            out.push(None);
            continue;
        }
        let total = kahan_sum(wts[c].iter().copied());
        wts[c].iter_mut().for_each(|w| *w /= total);
        let fix = 1.0 - kahan_sum(wts[c].iter().copied());
        wts[c][0] += fix;
        out.push(Some((
            mass[c],
            EmpiricalLaw::scalar_weighted(std::mem::take(&mut vals[c]), std::mem::take(&mut wts[c]))?,
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirac(v: f64) -> EmpiricalLaw {
        EmpiricalLaw::scalar(vec![v])
    }

    #[test]
    fn two_state_half_mass_example() {
        let states = vec![vec![0.2], vec![0.8]];
        let p = ConditionalEnsemble::new(
            states.clone(),
            vec![dirac(0.0), dirac(0.0)],
            vec![0.5, 0.5],
        )
        .unwrap();
        let r =
            ConditionalEnsemble::new(states, vec![dirac(0.0), dirac(1.0)], vec![0.5, 0.5]).unwrap();
        assert!((ew1(&p, &r).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn identical_ensembles_at_zero() {
        let e = ConditionalEnsemble::new(
            vec![vec![0.1], vec![0.9]],
            vec![dirac(1.0), dirac(-1.0)],
            vec![0.3, 0.7],
        )
        .unwrap();
        assert_eq!(ew1(&e, &e).unwrap(), 0.0);
        let (ew, joint) = ew_dominates_joint_check(&e, &e).unwrap();
        assert!(ew.abs() < 1e-12 && joint.abs() < 1e-10);
    }

    #[test]
    fn mismatched_states_are_rejected() {
        let p =
            ConditionalEnsemble::new(vec![vec![0.1]], vec![dirac(0.0)], vec![1.0]).unwrap();
        let r =
            ConditionalEnsemble::new(vec![vec![0.2]], vec![dirac(0.0)], vec![1.0]).unwrap();
        assert!(matches!(ew1(&p, &r), Err(GaniceError::Contract(_))));
    }

    #[test]
    fn ew1_matches_per_state_assignment() {
        use rand::Rng;
        let mut rng = crate::numeric::rng_stream(3, 3);
        let states: Vec<Vec<f64>> = (0..3).map(|i| vec![0.1 + 0.3 * i as f64]).collect();
        let masses = vec![0.2, 0.5, 0.3];
        let mk = |rng: &mut rand_chacha::ChaCha12Rng| -> Vec<EmpiricalLaw> {
            (0..3)
                .map(|_| {
                    EmpiricalLaw::scalar((0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
                })
                .collect()
        };
        let pl = mk(&mut rng);
        let rl = mk(&mut rng);
        let p = ConditionalEnsemble::new(states.clone(), pl.clone(), masses.clone()).unwrap();
        let r = ConditionalEnsemble::new(states, rl.clone(), masses.clone()).unwrap();
        let got = ew1(&p, &r).unwrap();
        let want: f64 = (0..3)
            .map(|i| masses[i] * w1_sorted(&pl[i], &rl[i]).unwrap())
            .sum();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn single_state_joint_equals_ew() {
        // one shared state: product cost degenerates to outcome cost
        let states = vec![vec![0.4]];
        let p = ConditionalEnsemble::new(
            states.clone(),
            vec![EmpiricalLaw::scalar(vec![0.0, 2.0])],
            vec![1.0],
        )
        .unwrap();
        let r = ConditionalEnsemble::new(
            states,
            vec![EmpiricalLaw::scalar(vec![1.0, 3.0])],
            vec![1.0],
        )
        .unwrap();
        let (ew, joint) = ew_dominates_joint_check(&p, &r).unwrap();
        assert!((ew - joint).abs() < 1e-9, "ew {ew} vs joint {joint}");
    }

    #[test]
    fn joint_never_exceeds_ew_on_random_instances() {
        use rand::Rng;
        let mut rng = crate::numeric::rng_stream(19, 4);
        for _ in 0..50 {
            let states = vec![vec![rng.random::<f64>()], vec![rng.random::<f64>()]];
            let mass0 = rng.random_range(0.2..0.8);
            let mk = |rng: &mut rand_chacha::ChaCha12Rng| {
                vec![
                    EmpiricalLaw::scalar((0..3).map(|_| rng.random_range(-1.0..1.0)).collect()),
                    EmpiricalLaw::scalar((0..4).map(|_| rng.random_range(-1.0..1.0)).collect()),
                ]
            };
            let p = ConditionalEnsemble::new(states.clone(), mk(&mut rng), vec![mass0, 1.0 - mass0])
                .unwrap();
            let r = ConditionalEnsemble::new(states.clone(), mk(&mut rng), vec![mass0, 1.0 - mass0])
                .unwrap();
            let (ew, joint) = ew_dominates_joint_check(&p, &r).unwrap();
            assert!(joint <= ew + 1e-9, "joint {joint} > ew {ew}");
        }
    }

    #[test]
    fn resolution_zero_ipm_is_unconditional_w1() {
        let states = vec![vec![0.2], vec![0.7]];
        let masses = vec![0.5, 0.5];
        let p = ConditionalEnsemble::new(
            states.clone(),
            vec![dirac(0.0), dirac(2.0)],
            masses.clone(),
        )
        .unwrap();
        let r =
            ConditionalEnsemble::new(states, vec![dirac(1.0), dirac(3.0)], masses).unwrap();
        let part = DyadicPartition::from_depths(vec![0]).unwrap();
        let got = finite_resolution_ipm(&p, &r, &part, BaseMetric::W1, 0.0).unwrap();
        // pooled mixtures {0,2} vs {1,3} with equal weights: W1 = 1
        assert!((got - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_ensembles_zero_for_all_resolutions() {
        let e = ConditionalEnsemble::new(
            vec![vec![0.1], vec![0.6], vec![0.9]],
            vec![dirac(0.3), dirac(-0.3), dirac(1.0)],
            vec![0.3, 0.3, 0.4],
        )
        .unwrap();
        for m in [0u32, 1, 2, 3] {
            for base in [BaseMetric::W1, BaseMetric::Energy, BaseMetric::Ks] {
                let part = DyadicPartition::from_depths(vec![m]).unwrap();
                let v = finite_resolution_ipm(&e, &e, &part, base, 0.0).unwrap();
                assert!(v.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_cell_hand_instance() {
        // states 0.25 and 0.75 with m = 1: one state per cell
        let states = vec![vec![0.25], vec![0.75]];
        let masses = vec![0.4, 0.6];
        let pl = vec![
            EmpiricalLaw::scalar(vec![0.0, 1.0]),
            EmpiricalLaw::scalar(vec![2.0]),
        ];
        let rl = vec![
            EmpiricalLaw::scalar(vec![0.5, 1.5]),
            EmpiricalLaw::scalar(vec![2.5]),
        ];
        let p = ConditionalEnsemble::new(states.clone(), pl.clone(), masses.clone()).unwrap();
        let r = ConditionalEnsemble::new(states, rl.clone(), masses.clone()).unwrap();
        let part = DyadicPartition::from_depths(vec![1]).unwrap();
        let got = finite_resolution_ipm(&p, &r, &part, BaseMetric::W1, 0.0).unwrap();
        let want = masses[0] * w1_sorted(&pl[0], &rl[0]).unwrap()
            + masses[1] * w1_sorted(&pl[1], &rl[1]).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn coarsening_is_monotone_in_resolution() {
        // shared per-state supports: coarser partitions can only lose
        // discrepancy, and the statewise value is the ceiling
        use rand::Rng;
        let mut rng = crate::numeric::rng_stream(47, 0);
        for _ in 0..20 {
            let states: Vec<Vec<f64>> = (0..4).map(|_| vec![rng.random::<f64>()]).collect();
            let masses = vec![0.25; 4];
            let mk = |rng: &mut rand_chacha::ChaCha12Rng| -> Vec<EmpiricalLaw> {
                (0..4)
                    .map(|_| {
                        EmpiricalLaw::scalar((0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
                    })
                    .collect()
            };
            let p = ConditionalEnsemble::new(states.clone(), mk(&mut rng), masses.clone()).unwrap();
            let r = ConditionalEnsemble::new(states.clone(), mk(&mut rng), masses).unwrap();
            let full = ew1(&p, &r).unwrap();
            let mut prev = 0.0;
            for m in 0..=4u32 {
                let part = DyadicPartition::from_depths(vec![m]).unwrap();
                let v = finite_resolution_ipm(&p, &r, &part, BaseMetric::W1, 0.0).unwrap();
                assert!(v + 1e-10 >= prev, "not monotone at m={m}: {v} < {prev}");
                assert!(v <= full + 1e-10, "m={m}: {v} exceeds statewise {full}");
                prev = v;
            }
        }
    }
}
