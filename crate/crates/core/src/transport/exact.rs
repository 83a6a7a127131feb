//! Exact optimal transport on small supports via the transportation
//! simplex (northwest-corner start, potential pricing, cycle pivots).
//! Supplies are perturbed by ~1e-13 to rule out degenerate cycling; the
//! induced value and marginal errors are far below the 1e-8 tolerance the
//! solver is tested at.

use super::EmpiricalLaw;
use crate::error::{GaniceError, Result};
use crate::numeric::Matrix;

pub const MAX_SUPPORT: usize = 64;

#[derive(Debug, Clone, Copy)]
pub enum TransportCost {
    /// Euclidean distance between outcome vectors.
    Euclidean,
    /// Product metric on concatenated (state, outcome) atoms: l1 on the
    /// leading `state_dim` coordinates plus Euclidean on the rest.
    Product { state_dim: usize },
}

#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub value: f64,
    /// Coupling matrix, rows indexed by `a`, columns by `b`.
    pub plan: Matrix,
}

/// Exact OT between two empirical laws with support sizes <= 64.
pub fn ot_exact_small(
    a: &EmpiricalLaw,
    b: &EmpiricalLaw,
    cost: TransportCost,
) -> Result<TransportPlan> {
    if a.dim() != b.dim() {
        return Err(GaniceError::Shape(format!(
            "law dims {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let (n, m) = (a.len(), b.len());
    if n > MAX_SUPPORT || m > MAX_SUPPORT {
        return Err(GaniceError::Capacity(format!(
            "support sizes {n}x{m} exceed {MAX_SUPPORT}"
        )));
    }
    let mut c = Matrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let (x, y) = (a.sample(i), b.sample(j));
            let d = match cost {
                TransportCost::Euclidean => super::euclid(x, y),
                TransportCost::Product { state_dim } => {
                    super::l1(&x[..state_dim], &y[..state_dim])
                        + super::euclid(&x[state_dim..], &y[state_dim..])
                }
            };
            c.set(i, j, d);
        }
    }
    let wa: Vec<f64> = (0..n).map(|i| a.weight(i)).collect();
    let wb: Vec<f64> = (0..m).map(|j| b.weight(j)).collect();
    ot_exact_with_cost(&c, &wa, &wb)
}

/// Exact transportation problem for an explicit cost matrix and marginals.
pub fn ot_exact_with_cost(cost: &Matrix, a: &[f64], b: &[f64]) -> Result<TransportPlan> {
    let (n, m) = (cost.rows(), cost.cols());
    if a.len() != n || b.len() != m {
        return Err(GaniceError::Shape("marginal lengths vs cost matrix".into()));
    }
    if n > MAX_SUPPORT || m > MAX_SUPPORT {
        return Err(GaniceError::Capacity(format!(
            "support sizes {n}x{m} exceed {MAX_SUPPORT}"
        )));
    }
    if a.iter().chain(b.iter()).any(|&w| w < 0.0) {
        return Err(GaniceError::Contract("negative marginal weight".into()));
    }
    let sum_a: f64 = a.iter().sum();
    let sum_b: f64 = b.iter().sum();
    if sum_a <= 0.0 || sum_b <= 0.0 || ((sum_a / sum_b) - 1.0).abs() > 1e-9 {
        return Err(GaniceError::Contract(format!(
            "unbalanced marginals: {sum_a} vs {sum_b}"
        )));
    }

    // Perturb supplies to make every basic solution nondegenerate.
    let delta = 1e-13 / (n as f64 + 1.0);
    let mut supply: Vec<f64> = a
        .iter()
        .enumerate()
        .map(|(i, &w)| w + delta * (i + 1) as f64)
        .collect();
    let extra: f64 = delta * (n * (n + 1) / 2) as f64 + (sum_a - sum_b);
    let mut demand: Vec<f64> = b.to_vec();
    demand[m - 1] += extra;

    let mut alloc = vec![0.0f64; n * m];
    let mut basic = vec![false; n * m];

    // northwest corner start
    {
        let (mut i, mut j) = (0usize, 0usize);
        let mut rem_s = supply.clone();
        let mut rem_d = demand.clone();
        loop {
            let x = rem_s[i].min(rem_d[j]);
            alloc[i * m + j] = x;
            basic[i * m + j] = true;
            rem_s[i] -= x;
            rem_d[j] -= x;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if rem_s[i] <= rem_d[j] && i < n - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; m];
    let max_iter = 200 * (n + m) * (n + m);
    let mut iter = 0usize;
    loop {
        iter += 1;
        if iter > max_iter {
            return Err(GaniceError::Contract(
                "transportation simplex failed to converge".into(),
            ));
        }
        solve_potentials(cost, &basic, n, m, &mut u, &mut v)?;

        // entering arc: most negative reduced cost
        let mut best = -1e-11;
        let mut enter = None;
        for i in 0..n {
            for j in 0..m {
                if basic[i * m + j] {
                    continue;
                }
                let rc = cost.get(i, j) - u[i] - v[j];
                if rc < best {
                    best = rc;
                    enter = Some((i, j));
                }
            }
        }
        let Some((ei, ej)) = enter else { break };

        let cycle = find_cycle(&basic, n, m, ei, ej)?;
        // odd positions in the cycle lose mass
        let mut theta = f64::INFINITY;
        let mut leave = None;
        for (pos, &(i, j)) in cycle.iter().enumerate() {
            if pos % 2 == 1 && alloc[i * m + j] < theta {
                theta = alloc[i * m + j];
                leave = Some((i, j));
            }
        }
        let (li, lj) = leave.expect("cycle has a leaving arc");
        for (pos, &(i, j)) in cycle.iter().enumerate() {
            if pos % 2 == 0 {
                alloc[i * m + j] += theta;
            } else {
                alloc[i * m + j] -= theta;
            }
        }
        basic[ei * m + ej] = true;
        basic[li * m + lj] = false;
        alloc[li * m + lj] = 0.0;
    }

    // strip the perturbation from reported marginals by tiny clamping
    for x in alloc.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let value = crate::numeric::kahan_sum(
        (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| alloc[i * m + j] * cost.get(i, j)),
    );
    supply.clear();
    Ok(TransportPlan {
        value,
        plan: Matrix::from_flat(alloc, n, m),
    })
}

/// Solve u_i + v_j = c_ij over the basis tree (BFS from row 0, u_0 = 0).
fn solve_potentials(
    cost: &Matrix,
    basic: &[bool],
    n: usize,
    m: usize,
    u: &mut [f64],
    v: &mut [f64],
) -> Result<()> {
    let mut u_set = vec![false; n];
    let mut v_set = vec![false; m];
    u[0] = 0.0;
    u_set[0] = true;
    let mut queue = vec![(true, 0usize)];
    while let Some((is_row, k)) = queue.pop() {
        if is_row {
            for j in 0..m {
                if basic[k * m + j] && !v_set[j] {
                    v[j] = cost.get(k, j) - u[k];
                    v_set[j] = true;
                    queue.push((false, j));
                }
            }
        } else {
            for i in 0..n {
                if basic[i * m + k] && !u_set[i] {
                    u[i] = cost.get(i, k) - v[k];
                    u_set[i] = true;
                    queue.push((true, i));
                }
            }
        }
    }
    if u_set.iter().any(|&s| !s) || v_set.iter().any(|&s| !s) {
        return Err(GaniceError::Contract(
            "disconnected transportation basis".into(),
        ));
    }
    Ok(())
}

/// Unique alternating cycle created by adding arc (ei, ej) to the basis
/// tree. Returned as arcs starting with the entering one; signs alternate.
fn find_cycle(basic: &[bool], n: usize, m: usize, ei: usize, ej: usize) -> Result<Vec<(usize, usize)>> {
    // DFS for a path from column ej back to row ei along basis arcs
    // nodes: rows 0..n, cols n..n+m
    let mut parent_arc: Vec<Option<(usize, usize)>> = vec![None; n + m];
    let mut visited = vec![false; n + m];
    let start = n + ej;
    visited[start] = true;
    let mut stack = vec![start];
    while let Some(node) = stack.pop() {
        if node == ei {
            break;
        }
        if node < n {
            let i = node;
            for j in 0..m {
                if basic[i * m + j] && !visited[n + j] {
                    visited[n + j] = true;
                    parent_arc[n + j] = Some((i, j));
                    stack.push(n + j);
                }
            }
        } else {
            let j = node - n;
            for i in 0..n {
                if basic[i * m + j] && !visited[i] {
                    visited[i] = true;
                    parent_arc[i] = Some((i, j));
                    stack.push(i);
                }
            }
        }
    }
    if !visited[ei] {
        return Err(GaniceError::Contract("no cycle through entering arc".into()));
    }
    // walk back from row ei to column ej
    let mut arcs = vec![(ei, ej)];
    let mut node = ei;
    while node != n + ej {
        let (i, j) = parent_arc[node].expect("path arc");
        arcs.push((i, j));
        node = if node == i { n + j } else { i };
    }
    Ok(arcs)
}
