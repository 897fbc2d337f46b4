//! Size-constrained assignment of points to clusters as a minimum-cost flow.
//!
//! The flow network is `point → cluster → sink`: every point supplies one
//! unit, point-to-cluster arcs carry the assignment cost, and the arc from
//! each cluster to the sink carries between `lower` and `upper` units.
//!
//! With unit supplies the residual network collapses to the `K` cluster
//! nodes plus the sink: moving point `q` from cluster `a` to cluster `b` is
//! an arc `a → b` of cost `c(q, b) − c(q, a)`, and only the cheapest such
//! `q` matters. The sink contributes `a → sink` while `a` may still grow and
//! `sink → a` while it may shrink. A feasible flow is optimal exactly when
//! this residual graph has no negative cycle, so the solver starts from any
//! feasible assignment and cancels negative cycles found by Bellman-Ford.

use crate::error::{Error, Result};

/// Result of a constrained assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub labels: Vec<u32>,
    pub cost: f64,
}

/// A cycle of the predecessor graph, listed against the arc direction.
fn pred_cycle(pred: &[usize]) -> Option<Vec<usize>> {
    let mut state = vec![0u8; pred.len()];
    for start in 0..pred.len() {
        let mut path = Vec::new();
        let mut v = start;
        while v != usize::MAX && state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = pred[v];
        }
        if v != usize::MAX && state[v] == 1 {
            let at = path.iter().position(|&u| u == v).expect("node is on the current path");
            return Some(path[at..].to_vec());
        }
        path.iter().for_each(|&u| state[u] = 2);
    }
    None
}

fn check(costs: &[f64], k: usize, lower: usize, upper: usize) -> Result<usize> {
    if k == 0 || costs.len() % k != 0 {
        return Err(Error::Config(format!(
            "cost matrix of length {} is not a multiple of {k} clusters",
            costs.len()
        )));
    }
    let n = costs.len() / k;
    if lower > upper || k * lower > n || n > k * upper {
        return Err(Error::Config(format!(
            "no assignment of {n} points into {k} clusters sized in [{lower}, {upper}]"
        )));
    }
    if let Some(i) = costs.iter().position(|c| !c.is_finite()) {
        return Err(Error::Validation(format!("non-finite assignment cost at entry {i}")));
    }
    Ok(n)
}

/// Minimum-cost assignment of `n` points to `k` clusters with every cluster
/// size in `[lower, upper]`. `costs` is row-major `n × k`.
pub fn constrained_assignment(costs: &[f64], k: usize, lower: usize, upper: usize) -> Result<Assignment> {
    let n = check(costs, k, lower, upper)?;
    let mut labels = vec![0u32; n];
    let mut fill = vec![0usize; k];
    // Cheapest cluster with room, in point order.
    for (q, label) in labels.iter_mut().enumerate() {
        let row = &costs[q * k..(q + 1) * k];
        let a = (0..k)
            .filter(|&a| fill[a] < upper)
            .min_by(|&x, &y| row[x].total_cmp(&row[y]))
            .expect("total capacity covers every point");
        *label = a as u32;
        fill[a] += 1;
    }
    // Top up clusters below the lower bound with the cheapest donations.
    while let Some(a) = (0..k).find(|&a| fill[a] < lower) {
        let mut best: Option<(f64, usize)> = None;
        for (q, &b) in labels.iter().enumerate() {
            let b = b as usize;
            if b == a || fill[b] <= lower {
                continue;
            }
            let delta = costs[q * k + a] - costs[q * k + b];
            if best.is_none_or(|(d, _)| delta < d) {
                best = Some((delta, q));
            }
        }
        let (_, q) = best.expect("a cluster above its lower bound can donate");
        fill[labels[q] as usize] -= 1;
        labels[q] = a as u32;
        fill[a] += 1;
    }
    improve_assignment(costs, k, lower, upper, labels)
}

/// Optimizes a feasible assignment by cancelling negative cycles.
pub fn improve_assignment(
    costs: &[f64],
    k: usize,
    lower: usize,
    upper: usize,
    mut labels: Vec<u32>,
) -> Result<Assignment> {
    let n = check(costs, k, lower, upper)?;
    if labels.len() != n || labels.iter().any(|&a| a as usize >= k) {
        return Err(Error::Structure("starting assignment does not match the cost matrix".into()));
    }
    let mut fill = vec![0usize; k];
    labels.iter().for_each(|&a| fill[a as usize] += 1);
    if fill.iter().any(|&f| f < lower || f > upper) {
        return Err(Error::Structure("starting assignment violates the size band".into()));
    }
    let scale = costs.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let tol = 1e-12 * scale;
    let sink = k;
    let nodes = k + 1;
    // transfer[a * k + b] = (cost, point) of the cheapest move a → b.
    let mut transfer: Vec<(f64, u32)> = vec![(f64::INFINITY, u32::MAX); k * k];
    let mut dist = vec![0.0f64; nodes];
    let mut pred = vec![usize::MAX; nodes];
    loop {
        transfer.fill((f64::INFINITY, u32::MAX));
        for (q, &a) in labels.iter().enumerate() {
            let a = a as usize;
            let row = &costs[q * k..(q + 1) * k];
            for b in 0..k {
                if b == a {
                    continue;
                }
                let delta = row[b] - row[a];
                let t = &mut transfer[a * k + b];
                if delta < t.0 {
                    *t = (delta, q as u32);
                }
            }
        }
        let arc = |a: usize, b: usize| -> Option<f64> {
            if a == b {
                None
            } else if b == sink {
                (fill[a] < upper).then_some(0.0)
            } else if a == sink {
                (fill[b] > lower).then_some(0.0)
            } else {
                let t = transfer[a * k + b];
                (t.1 != u32::MAX).then_some(t.0)
            }
        };
        // Bellman-Ford from a virtual source joined to every node.
        dist.fill(0.0);
        pred.fill(usize::MAX);
        let mut last = None;
        for _ in 0..nodes {
            last = None;
            for a in 0..nodes {
                for b in 0..nodes {
                    if let Some(w) = arc(a, b) {
                        if dist[a] + w < dist[b] - tol {
                            dist[b] = dist[a] + w;
                            pred[b] = a;
                            last = Some(b);
                        }
                    }
                }
            }
            if last.is_none() {
                break;
            }
        }
        if last.is_none() {
            break;
        }
        let Some(mut cycle) = pred_cycle(&pred) else {
            break;
        };
        cycle.reverse();
        let edges: Vec<(usize, usize)> = (0..cycle.len()).map(|i| (cycle[i], cycle[(i + 1) % cycle.len()])).collect();
        let weight: f64 = edges.iter().map(|&(a, b)| arc(a, b).expect("cycle arcs exist")).sum();
        if weight >= -tol {
            break;
        }
        let moves: Vec<(usize, usize, usize)> = edges
            .iter()
            .filter(|&&(a, b)| a != sink && b != sink)
            .map(|&(a, b)| (transfer[a * k + b].1 as usize, a, b))
            .collect();
        for (q, a, b) in moves {
            labels[q] = b as u32;
            fill[a] -= 1;
            fill[b] += 1;
        }
    }
    let cost = labels.iter().enumerate().map(|(q, &a)| costs[q * k + a as usize]).sum();
    Ok(Assignment { labels, cost })
}
