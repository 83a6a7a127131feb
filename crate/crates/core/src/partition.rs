//! Anisotropic dyadic partitions of the conditioning cube, cell accounting,
//! small-cell merging, and the boundary-layer / soft-gate quantities.

use crate::error::{GaniceError, Result};
use crate::numeric::kahan_sum;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Per-coordinate dyadic depth. Cell `j`-side length is `2^-m[j]`, and the
/// total cell count is `2^(m[0]+...+m[d-1])`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub m: Vec<u32>,
}

impl Resolution {
    pub fn new(m: Vec<u32>) -> Result<Self> {
        let total: u32 = m.iter().sum();
        if total > 30 {
            return Err(GaniceError::Capacity(format!(
                "resolution |m|_1 = {total} exceeds 30 (2^{total} cells)"
            )));
        }
        Ok(Resolution { m })
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn total_depth(&self) -> u32 {
        self.m.iter().sum()
    }

    pub fn cell_count(&self) -> usize {
        1usize << self.total_depth()
    }
}

/// Dyadic partition of `[0,1]^d` into axis-aligned rectangles. The final
/// interval in each coordinate is closed on the right, so `w_j = 1` lands
/// in the last cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicPartition {
    pub resolution: Resolution,
}

impl DyadicPartition {
    pub fn new(resolution: Resolution) -> Self {
        DyadicPartition { resolution }
    }

    pub fn from_depths(m: Vec<u32>) -> Result<Self> {
        Ok(DyadicPartition::new(Resolution::new(m)?))
    }

    pub fn dim(&self) -> usize {
        self.resolution.dim()
    }

    pub fn cell_count(&self) -> usize {
        self.resolution.cell_count()
    }

    /// Per-coordinate cell index of a point.
    pub fn locate(&self, w: &[f64]) -> Result<Vec<usize>> {
        if w.len() != self.dim() {
            return Err(GaniceError::Shape(format!(
                "point dim {} vs partition dim {}",
                w.len(),
                self.dim()
            )));
        }
        let mut idx = Vec::with_capacity(w.len());
        for (j, (&x, &mj)) in w.iter().zip(self.resolution.m.iter()).enumerate() {
            if !(0.0..=1.0).contains(&x) {
                return Err(GaniceError::Domain(format!(
                    "coordinate {j} = {x} outside [0,1]"
                )));
            }
            let cells = 1usize << mj;
            let k = ((x * cells as f64).floor() as usize).min(cells - 1);
            idx.push(k);
        }
        Ok(idx)
    }

    /// Linear cell id (mixed-radix over coordinates).
    pub fn locate_linear(&self, w: &[f64]) -> Result<usize> {
        Ok(self.linear_index(&self.locate(w)?))
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        let mut lin = 0usize;
        for (&k, &mj) in idx.iter().zip(self.resolution.m.iter()) {
            lin = (lin << mj) | k;
        }
        lin
    }

    pub fn index_vector(&self, mut lin: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.dim()];
        for j in (0..self.dim()).rev() {
            let mj = self.resolution.m[j];
            idx[j] = lin & ((1usize << mj) - 1);
            lin >>= mj;
        }
        idx
    }
}

/// Sampling design over the conditioning cube.
pub enum Design<'a> {
    Uniform,
    Empirical(&'a [Vec<f64>]),
}

/// Per-cell target masses and observational / generated counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellAccount {
    pub q: Vec<f64>,
    pub n_obs: Vec<u64>,
    pub m_gen: Vec<u64>,
}

impl CellAccount {
    pub fn empty(cells: usize) -> Self {
        CellAccount {
            q: vec![0.0; cells],
            n_obs: vec![0; cells],
            m_gen: vec![0; cells],
        }
    }

    pub fn cell_count(&self) -> usize {
        self.q.len()
    }

    pub fn total_mass(&self) -> f64 {
        kahan_sum(self.q.iter().copied())
    }
}

/// Target cell masses under a design: exact `2^-|m|` for the uniform
/// design, normalized counts for an empirical one.
pub fn cell_masses(partition: &DyadicPartition, design: &Design) -> Result<CellAccount> {
    let cells = partition.cell_count();
    let mut acc = CellAccount::empty(cells);
    match design {
        Design::Uniform => {
            let q = 1.0 / cells as f64;
            acc.q.iter_mut().for_each(|v| *v = q);
        }
        Design::Empirical(states) => {
            if states.is_empty() {
                return Err(GaniceError::Contract("empty empirical design".into()));
            }
            let w = 1.0 / states.len() as f64;
            for s in *states {
                acc.q[partition.locate_linear(s)?] += w;
            }
        }
    }
    Ok(acc)
}

/// Map from original cell id to merged-group representative cell id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeMap {
    pub group_of: Vec<usize>,
}

impl MergeMap {
    pub fn identity(cells: usize) -> Self {
        MergeMap {
            group_of: (0..cells).collect(),
        }
    }

    /// Distinct group representatives, ascending.
    pub fn groups(&self) -> Vec<usize> {
        let mut g = self.group_of.clone();
        g.sort_unstable();
        g.dedup();
        g
    }

    /// Dense reindexing: cell id -> compact group index.
    pub fn dense(&self) -> (Vec<usize>, usize) {
        let groups = self.groups();
        let mut pos = vec![usize::MAX; self.group_of.len()];
        for (k, &g) in groups.iter().enumerate() {
            pos[g] = k;
        }
        let dense = self.group_of.iter().map(|&g| pos[g]).collect();
        (dense, groups.len())
    }
}

/// Merge cells whose observed count is below `min_size` into their nearest
/// adequate neighbor by l1 index distance, ties to the lower linear index.
/// With no adequate cell at all, everything collapses into cell 0.
/// Masses and counts of a group add up; totals are conserved exactly.
pub fn merge_small_cells(
    partition: &DyadicPartition,
    account: &CellAccount,
    min_size: u64,
) -> Result<(MergeMap, CellAccount)> {
    if min_size < 1 {
        return Err(GaniceError::Contract("min_size must be >= 1".into()));
    }
    let cells = account.cell_count();
    let adequate: Vec<usize> = (0..cells).filter(|&c| account.n_obs[c] >= min_size).collect();

    let mut group_of = vec![0usize; cells];
    if adequate.is_empty() {
        // single-cell fallback
    } else {
        let idx_vecs: Vec<Vec<usize>> = (0..cells).map(|c| partition.index_vector(c)).collect();
        for c in 0..cells {
            if account.n_obs[c] >= min_size {
                group_of[c] = c;
                continue;
            }
            let mut best = adequate[0];
            let mut best_d = usize::MAX;
            for &a in &adequate {
                let d: usize = idx_vecs[c]
                    .iter()
                    .zip(idx_vecs[a].iter())
                    .map(|(&x, &y)| x.abs_diff(y))
                    .sum();
                if d < best_d || (d == best_d && a < best) {
                    best = a;
                    best_d = d;
                }
            }
            group_of[c] = best;
        }
    }

    let mut merged = CellAccount::empty(cells);
    for c in 0..cells {
        let g = group_of[c];
        merged.q[g] += account.q[c];
        merged.n_obs[g] += account.n_obs[c];
        merged.m_gen[g] += account.m_gen[c];
    }
    Ok((MergeMap { group_of }, merged))
}

/// Design mass of the delta-neighborhood of internal cell boundaries.
/// Uniform design: exact by inclusion-exclusion over coordinates.
/// Empirical design: fraction of points within delta of some boundary.
pub fn boundary_layer_mass(
    partition: &DyadicPartition,
    delta: f64,
    design: &Design,
) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(GaniceError::Contract(format!("delta {delta} outside (0,1]")));
    }
    match design {
        Design::Uniform => {
            let mut survive = 1.0;
            for &mj in &partition.resolution.m {
                survive *= 1.0 - covered_length(mj, delta);
            }
            Ok(1.0 - survive)
        }
        Design::Empirical(states) => {
            if states.is_empty() {
                return Err(GaniceError::Contract("empty empirical design".into()));
            }
            let hits = states
                .iter()
                .filter(|s| point_near_boundary(partition, s, delta))
                .count();
            Ok(hits as f64 / states.len() as f64)
        }
    }
}

/// Lebesgue measure within [0,1] of the delta-neighborhood of the internal
/// dyadic planes at depth m (planes at i 2^-m, i = 1..2^m - 1).
fn covered_length(m: u32, delta: f64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let h = 0.5f64.powi(m as i32);
    let planes = (1u64 << m) - 1;
    if 2.0 * delta >= h {
        // intervals overlap: cover [h - delta, 1 - h + delta] clipped
        return ((1.0 - h + delta).min(1.0) - (h - delta).max(0.0)).clamp(0.0, 1.0);
    }
    let mut total = 0.0;
    for i in 1..=planes {
        let c = i as f64 * h;
        total += (c + delta).min(1.0) - (c - delta).max(0.0);
    }
    total
}

fn point_near_boundary(partition: &DyadicPartition, w: &[f64], delta: f64) -> bool {
    for (&x, &mj) in w.iter().zip(partition.resolution.m.iter()) {
        if mj == 0 {
            continue;
        }
        let h = 0.5f64.powi(mj as i32);
        let planes = 1u64 << mj;
        // nearest internal plane in this coordinate
        let i = (x / h).round().clamp(1.0, (planes - 1) as f64);
        if (x - i * h).abs() <= delta {
            return true;
        }
    }
    false
}

/// Pointwise soft routing weights over the cells of a partition.
pub trait Gates {
    /// Gate vector at a point; must be nonnegative and sum to 1.
    fn eval(&self, w: &[f64]) -> Vec<f64>;
}

/// Hard indicator gates.
pub struct IndicatorGates<'a>(pub &'a DyadicPartition);

impl Gates for IndicatorGates<'_> {
    fn eval(&self, w: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.0.cell_count()];
        g[self.0.locate_linear(w).expect("in-domain point")] = 1.0;
        g
    }
}

/// Softmax gates over negative squared distance to cell centers, with a
/// temperature; tau -> 0 recovers the hard indicators almost everywhere.
pub struct SoftmaxGates<'a> {
    pub partition: &'a DyadicPartition,
    pub temperature: f64,
    centers: Vec<Vec<f64>>,
}

impl<'a> SoftmaxGates<'a> {
    pub fn new(partition: &'a DyadicPartition, temperature: f64) -> Self {
        let centers = (0..partition.cell_count())
            .map(|c| {
                partition
                    .index_vector(c)
                    .iter()
                    .zip(partition.resolution.m.iter())
                    .map(|(&k, &mj)| (k as f64 + 0.5) * 0.5f64.powi(mj as i32))
                    .collect()
            })
            .collect();
        SoftmaxGates {
            partition,
            temperature,
            centers,
        }
    }
}

impl Gates for SoftmaxGates<'_> {
    fn eval(&self, w: &[f64]) -> Vec<f64> {
        let scores: Vec<f64> = self
            .centers
            .iter()
            .map(|c| {
                let d2: f64 = c.iter().zip(w.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                -d2 / self.temperature
            })
            .collect();
        let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - mx).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.iter().map(|e| e / z).collect()
    }
}

/// Monte Carlo estimate of the integrated gate-indicator discrepancy
/// (the transfer quantity eta), with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct GateDiscrepancy {
    pub eta: f64,
    pub std_err: f64,
    pub n_mc: usize,
}

pub fn soft_gate_discrepancy(
    partition: &DyadicPartition,
    gates: &dyn Gates,
    design: &Design,
    n_mc: usize,
    seed: u64,
) -> Result<GateDiscrepancy> {
    if n_mc < 2 {
        return Err(GaniceError::Contract("n_mc must be >= 2".into()));
    }
    let mut rng = crate::numeric::rng_stream(seed, 0xb0_dada);
    let mut draws = Vec::with_capacity(n_mc);
    for t in 0..n_mc {
        let w: Vec<f64> = match design {
            Design::Uniform => (0..partition.dim()).map(|_| rng.random::<f64>()).collect(),
            Design::Empirical(states) => states[t % states.len()].clone(),
        };
        draws.push(point_gate_gap(partition, gates, &w)?);
    }
    let eta = crate::numeric::mean(&draws);
    let var = crate::numeric::variance(&draws);
    Ok(GateDiscrepancy {
        eta,
        std_err: (var / n_mc as f64).sqrt(),
        n_mc,
    })
}

/// Sum_k |gamma_k(w) - 1{w in C_k}| at one point, with normalization check.
pub fn point_gate_gap(partition: &DyadicPartition, gates: &dyn Gates, w: &[f64]) -> Result<f64> {
    let g = gates.eval(w);
    if g.len() != partition.cell_count() {
        return Err(GaniceError::Shape(format!(
            "gate vector length {} vs {} cells",
            g.len(),
            partition.cell_count()
        )));
    }
    let total: f64 = kahan_sum(g.iter().copied());
    if g.iter().any(|&x| x < 0.0) || (total - 1.0).abs() > 1e-6 {
        return Err(GaniceError::Contract(format!(
            "gates must be nonnegative and sum to 1 (got {total})"
        )));
    }
    let hard = partition.locate_linear(w)?;
    let gap = g
        .iter()
        .enumerate()
        .map(|(k, &v)| if k == hard { (v - 1.0).abs() } else { v })
        .sum();
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_floor_arithmetic() {
        let p = DyadicPartition::from_depths(vec![1, 2]).unwrap();
        assert_eq!(p.locate(&[0.3, 0.7]).unwrap(), vec![0, 2]);
    }

    #[test]
    fn right_closure_of_last_interval() {
        let p = DyadicPartition::from_depths(vec![3]).unwrap();
        assert_eq!(p.locate(&[1.0]).unwrap(), vec![7]);
    }

    #[test]
    fn cell_count_is_two_to_total_depth() {
        let p = DyadicPartition::from_depths(vec![1, 1, 1]).unwrap();
        assert_eq!(p.cell_count(), 8);
    }

    #[test]
    fn out_of_domain_is_rejected() {
        let p = DyadicPartition::from_depths(vec![1]).unwrap();
        assert!(matches!(p.locate(&[1.2]), Err(GaniceError::Domain(_))));
    }

    #[test]
    fn linear_index_roundtrip() {
        let p = DyadicPartition::from_depths(vec![2, 1, 3]).unwrap();
        for c in 0..p.cell_count() {
            assert_eq!(p.linear_index(&p.index_vector(c)), c);
        }
    }

    #[test]
    fn uniform_masses_are_exact() {
        let p = DyadicPartition::from_depths(vec![2]).unwrap();
        let acc = cell_masses(&p, &Design::Uniform).unwrap();
        assert_eq!(acc.q, vec![0.25; 4]);
    }

    #[test]
    fn empirical_mass_concentrates() {
        let p = DyadicPartition::from_depths(vec![1, 1]).unwrap();
        let states = vec![vec![0.1, 0.1], vec![0.2, 0.3], vec![0.4, 0.05]];
        let acc = cell_masses(&p, &Design::Empirical(&states)).unwrap();
        assert_eq!(acc.q[0], 1.0);
        assert_eq!(acc.total_mass(), 1.0);
    }

    #[test]
    fn empirical_masses_concentrate_binomially() {
        // 1000 uniform points on a 2x2 grid: each mass within 0.25 +- 3 sigma
        let p = DyadicPartition::from_depths(vec![1, 1]).unwrap();
        let mut rng = crate::numeric::rng_stream(99, 1);
        let states: Vec<Vec<f64>> = (0..1000)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let acc = cell_masses(&p, &Design::Empirical(&states)).unwrap();
        let sigma = (0.25f64 * 0.75 / 1000.0).sqrt();
        for &q in &acc.q {
            assert!((q - 0.25).abs() <= 3.0 * sigma + 0.02, "q = {q}");
        }
    }

    #[test]
    fn merge_identity_when_all_adequate() {
        let p = DyadicPartition::from_depths(vec![1, 1]).unwrap();
        let mut acc = CellAccount::empty(4);
        acc.n_obs = vec![5, 6, 7, 8];
        acc.q = vec![0.25; 4];
        let (map, merged) = merge_small_cells(&p, &acc, 4).unwrap();
        assert_eq!(map, MergeMap::identity(4));
        assert_eq!(merged.n_obs, acc.n_obs);
    }

    #[test]
    fn merge_tie_goes_to_lower_index() {
        // cells 0,1,2 on a line; middle cell empty, both neighbors adequate
        let p = DyadicPartition::from_depths(vec![2]).unwrap();
        let mut acc = CellAccount::empty(4);
        acc.n_obs = vec![10, 0, 10, 10];
        acc.q = vec![0.25; 4];
        let (map, _) = merge_small_cells(&p, &acc, 4).unwrap();
        assert_eq!(map.group_of[1], 0, "tie between cells 0 and 2 -> lower");
    }

    #[test]
    fn merge_conserves_totals() {
        let p = DyadicPartition::from_depths(vec![2, 1]).unwrap();
        let mut rng = crate::numeric::rng_stream(5, 0);
        let mut acc = CellAccount::empty(8);
        for c in 0..8 {
            acc.n_obs[c] = rng.random_range(0..7);
            acc.q[c] = 0.125;
        }
        let total_n: u64 = acc.n_obs.iter().sum();
        let (map, merged) = merge_small_cells(&p, &acc, 4).unwrap();
        assert_eq!(merged.n_obs.iter().sum::<u64>(), total_n);
        assert!((merged.q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for g in map.groups() {
            assert!(merged.n_obs[g] >= 4 || map.groups().len() == 1);
        }
    }

    #[test]
    fn merge_fallback_when_nothing_adequate() {
        let p = DyadicPartition::from_depths(vec![1]).unwrap();
        let mut acc = CellAccount::empty(2);
        acc.n_obs = vec![1, 1];
        acc.q = vec![0.5, 0.5];
        let (map, _) = merge_small_cells(&p, &acc, 4).unwrap();
        assert_eq!(map.groups().len(), 1);
    }

    #[test]
    fn boundary_mass_single_plane() {
        let p = DyadicPartition::from_depths(vec![1]).unwrap();
        let m = boundary_layer_mass(&p, 0.1, &Design::Uniform).unwrap();
        assert!((m - 0.2).abs() < 1e-12);
    }

    #[test]
    fn boundary_mass_zero_resolution() {
        let p = DyadicPartition::from_depths(vec![0, 0, 0]).unwrap();
        let m = boundary_layer_mass(&p, 0.3, &Design::Uniform).unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn boundary_mass_inclusion_exclusion() {
        // m = (1,1), delta = 0.05: 1 - 0.9^2 = 0.19, checked against MC
        let p = DyadicPartition::from_depths(vec![1, 1]).unwrap();
        let exact = boundary_layer_mass(&p, 0.05, &Design::Uniform).unwrap();
        assert!((exact - 0.19).abs() < 1e-12);
        let mut rng = crate::numeric::rng_stream(31, 7);
        let pts: Vec<Vec<f64>> = (0..1_000_000)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let mc = boundary_layer_mass(&p, 0.05, &Design::Empirical(&pts)).unwrap();
        assert!((mc - 0.19).abs() < 0.003, "mc = {mc}");
    }

    #[test]
    fn boundary_mass_upper_bound() {
        for m in [vec![1, 2], vec![3], vec![2, 2, 1]] {
            let p = DyadicPartition::from_depths(m.clone()).unwrap();
            for delta in [0.01, 0.05, 0.2] {
                let mass = boundary_layer_mass(&p, delta, &Design::Uniform).unwrap();
                let bound: f64 = m.iter().map(|&mj| 2.0 * delta * (1u64 << mj) as f64).sum();
                assert!(mass <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn hard_gates_have_zero_discrepancy() {
        let p = DyadicPartition::from_depths(vec![1, 1]).unwrap();
        let gates = IndicatorGates(&p);
        let d = soft_gate_discrepancy(&p, &gates, &Design::Uniform, 500, 3).unwrap();
        assert_eq!(d.eta, 0.0);
    }

    #[test]
    fn uniform_gates_closed_form() {
        // gamma_k = 1/K everywhere: per point gap = (1 - 1/K) + (K-1)/K = 2(K-1)/K
        struct Flat(usize);
        impl Gates for Flat {
            fn eval(&self, _w: &[f64]) -> Vec<f64> {
                vec![1.0 / self.0 as f64; self.0]
            }
        }
        let p = DyadicPartition::from_depths(vec![1, 1]).unwrap();
        let k = p.cell_count();
        let d = soft_gate_discrepancy(&p, &Flat(k), &Design::Uniform, 200, 3).unwrap();
        let want = 2.0 * (k as f64 - 1.0) / k as f64;
        assert!((d.eta - want).abs() < 1e-12);
    }

    #[test]
    fn softmax_gates_sharpen_monotonically() {
        let p = DyadicPartition::from_depths(vec![2]).unwrap();
        let mut prev = f64::INFINITY;
        for tau in [0.5, 0.1, 0.02, 0.001] {
            let gates = SoftmaxGates::new(&p, tau);
            let d = soft_gate_discrepancy(&p, &gates, &Design::Uniform, 4000, 11).unwrap();
            assert!(d.eta <= prev + 1e-9, "eta not decreasing at tau={tau}");
            prev = d.eta;
        }
        assert!(prev < 0.05, "cold gates should be nearly hard, eta={prev}");
    }

    #[test]
    fn gate_normalization_is_enforced() {
        struct Bad;
        impl Gates for Bad {
            fn eval(&self, _w: &[f64]) -> Vec<f64> {
                vec![0.7, 0.7]
            }
        }
        let p = DyadicPartition::from_depths(vec![1]).unwrap();
        assert!(matches!(
            soft_gate_discrepancy(&p, &Bad, &Design::Uniform, 10, 0),
            Err(GaniceError::Contract(_))
        ));
    }
}
