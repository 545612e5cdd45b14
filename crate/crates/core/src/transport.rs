//! Exact transportation problems over rationals.
//!
//! [`solve`] runs successive shortest paths (Bellman-Ford on the residual graph);
//! [`brute_force`] enumerates every basic solution and serves as an oracle.

use num_traits::Zero;

use crate::Q;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plan {
    pub cost: Q,
    /// `(row, column, mass)` with positive mass, sorted.
    pub flows: Vec<(usize, usize, Q)>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    /// Total supply and total demand.
    #[error("marginals differ: supply {}, demand {}", .0.0, .0.1)]
    Marginals(Box<(Q, Q)>),
    #[error("negative marginal entry")]
    Negative,
    #[error("cost matrix shape mismatch")]
    Shape,
}

struct Edge {
    to: usize,
    cap: Option<Q>,
    cost: Q,
    rev: usize,
}

fn add_edge(g: &mut [Vec<Edge>], a: usize, b: usize, cap: Option<Q>, cost: Q) {
    let ra = g[b].len();
    let rb = g[a].len();
    g[a].push(Edge { to: b, cap, cost: cost.clone(), rev: ra });
    g[b].push(Edge { to: a, cap: Some(Q::zero()), cost: -cost, rev: rb });
}

fn validate(supply: &[Q], demand: &[Q], cost: &[Vec<Q>]) -> Result<(), TransportError> {
    if cost.len() != supply.len() || cost.iter().any(|r| r.len() != demand.len()) {
        return Err(TransportError::Shape);
    }
    if supply.iter().chain(demand).any(|x| *x < Q::zero()) {
        return Err(TransportError::Negative);
    }
    let s: Q = supply.iter().fold(Q::zero(), |a, b| a + b);
    let d: Q = demand.iter().fold(Q::zero(), |a, b| a + b);
    if s != d {
        return Err(TransportError::Marginals(Box::new((s, d))));
    }
    Ok(())
}

/// Minimum-cost plan moving `supply` onto `demand` at unit costs `cost[i][j]`.
pub fn solve(supply: &[Q], demand: &[Q], cost: &[Vec<Q>]) -> Result<Plan, TransportError> {
    validate(supply, demand, cost)?;
    let (m, n) = (supply.len(), demand.len());
    let (src, sink) = (0, m + n + 1);
    let mut g: Vec<Vec<Edge>> = (0..m + n + 2).map(|_| Vec::new()).collect();
    for (i, s) in supply.iter().enumerate() {
        add_edge(&mut g, src, 1 + i, Some(s.clone()), Q::zero());
    }
    for (i, row) in cost.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            add_edge(&mut g, 1 + i, 1 + m + j, None, c.clone());
        }
    }
    for (j, d) in demand.iter().enumerate() {
        add_edge(&mut g, 1 + m + j, sink, Some(d.clone()), Q::zero());
    }
    let open = |e: &Edge| e.cap.as_ref().is_none_or(|c| *c > Q::zero());
    loop {
        let mut dist: Vec<Option<Q>> = vec![None; g.len()];
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; g.len()];
        dist[src] = Some(Q::zero());
        for _ in 0..g.len() {
            let mut changed = false;
            for u in 0..g.len() {
                let Some(du) = dist[u].clone() else { continue };
                for (k, e) in g[u].iter().enumerate() {
                    if !open(e) {
                        continue;
                    }
                    let nd = &du + &e.cost;
                    if dist[e.to].as_ref().is_none_or(|d| nd < *d) {
                        dist[e.to] = Some(nd);
                        prev[e.to] = Some((u, k));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink].is_none() {
            break;
        }
        let mut bottleneck: Option<Q> = None;
        let mut v = sink;
        while let Some((u, k)) = prev[v] {
            if let Some(c) = &g[u][k].cap {
                if bottleneck.as_ref().is_none_or(|b| c < b) {
                    bottleneck = Some(c.clone());
                }
            }
            v = u;
        }
        let f = bottleneck.expect("source arcs are finite");
        let mut v = sink;
        while let Some((u, k)) = prev[v] {
            if let Some(c) = g[u][k].cap.as_mut() {
                *c -= &f;
            }
            let (to, rev) = (g[u][k].to, g[u][k].rev);
            if let Some(c) = g[to][rev].cap.as_mut() {
                *c += &f;
            }
            v = u;
        }
    }
    let mut flows = Vec::new();
    let mut total = Q::zero();
    for i in 0..m {
        for e in &g[1 + i] {
            if e.to > m && e.to <= m + n {
                let back = &g[e.to][e.rev];
                let f = back.cap.clone().unwrap_or_else(Q::zero);
                if f > Q::zero() {
                    total += &f * &e.cost;
                    flows.push((i, e.to - 1 - m, f));
                }
            }
        }
    }
    flows.sort();
    Ok(Plan { cost: total, flows })
}

/// Minimum over all basic feasible solutions, enumerated via spanning trees of the cell graph.
pub fn brute_force(supply: &[Q], demand: &[Q], cost: &[Vec<Q>]) -> Result<Q, TransportError> {
    validate(supply, demand, cost)?;
    let (m, n) = (supply.len(), demand.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let k = m + n - 1;
    let mut best: Option<Q> = None;
    let mut chosen = Vec::with_capacity(k);
    combos(&cells, k, 0, &mut chosen, &mut |basis| {
        if let Some(flows) = basic_solution(supply, demand, basis) {
            let c = basis.iter().zip(&flows).fold(Q::zero(), |a, (&(i, j), f)| a + f * &cost[i][j]);
            if best.as_ref().is_none_or(|b| c < *b) {
                best = Some(c);
            }
        }
    });
    Ok(best.expect("a feasible basis always exists"))
}

fn combos(cells: &[(usize, usize)], k: usize, from: usize, chosen: &mut Vec<(usize, usize)>, f: &mut impl FnMut(&[(usize, usize)])) {
    if chosen.len() == k {
        f(chosen);
        return;
    }
    let need = k - chosen.len();
    for idx in from..cells.len() {
        if cells.len() - idx < need {
            break;
        }
        chosen.push(cells[idx]);
        combos(cells, k, idx + 1, chosen, f);
        chosen.pop();
    }
}

/// Solves the basis by leaf elimination; `None` if it is not a spanning tree or is infeasible.
fn basic_solution(supply: &[Q], demand: &[Q], basis: &[(usize, usize)]) -> Option<Vec<Q>> {
    let m = supply.len();
    let vertices = m + demand.len();
    let mut rest: Vec<Q> = supply.iter().chain(demand).cloned().collect();
    let mut alive = vec![true; basis.len()];
    let mut flows = vec![Q::zero(); basis.len()];
    for _ in 0..basis.len() {
        let mut degree = vec![0usize; vertices];
        for (e, &(i, j)) in basis.iter().enumerate() {
            if alive[e] {
                degree[i] += 1;
                degree[m + j] += 1;
            }
        }
        let leaf = basis.iter().enumerate().find_map(|(e, &(i, j))| {
            if !alive[e] {
                None
            } else if degree[i] == 1 {
                Some((e, i, m + j))
            } else if degree[m + j] == 1 {
                Some((e, m + j, i))
            } else {
                None
            }
        })?;
        let (e, leaf_v, other) = leaf;
        let f = rest[leaf_v].clone();
        if f < Q::zero() {
            return None;
        }
        rest[leaf_v] = Q::zero();
        rest[other] -= &f;
        flows[e] = f;
        alive[e] = false;
    }
    if rest.iter().all(|r| r.is_zero()) {
        Some(flows)
    } else {
        None
    }
}

/// Checks that `plan` has the given marginals and cost.
pub fn verify(supply: &[Q], demand: &[Q], cost: &[Vec<Q>], plan: &Plan) -> bool {
    let mut rows = vec![Q::zero(); supply.len()];
    let mut cols = vec![Q::zero(); demand.len()];
    let mut total = Q::zero();
    for (i, j, f) in &plan.flows {
        rows[*i] += f;
        cols[*j] += f;
        total += f * &cost[*i][*j];
    }
    rows == supply && cols == demand && total == plan.cost
}
