//! Eigenvector centrality on the undirected conditional call graph.

use std::collections::{BTreeMap, BTreeSet};

use crate::prepass::{CallMap, FunctionRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenParams {
    pub iterations: usize,
    pub damping: f64,
}

impl Default for EigenParams {
    fn default() -> Self {
        EigenParams { iterations: 50, damping: 0.15 }
    }
}

/// Symmetric adjacency lists: `adj[i]` holds (j, multiplicity) sorted by j.
/// Each distinct (caller, callee definition, rendered pc) edge adds one in
/// both directions. Self-calls are dropped.
pub fn call_graph(records: &[FunctionRecord], calls: &CallMap) -> Vec<Vec<(usize, f64)>> {
    let mut edges = BTreeSet::new();
    for (caller, out) in calls.by_caller.iter().enumerate() {
        for e in out {
            for &callee in calls.definitions.get(&e.callee).map_or(&[][..], |v| v.as_slice()) {
                if callee != caller {
                    edges.insert((caller, callee, e.call_pc.to_string()));
                }
            }
        }
    }
    let mut adj: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); records.len()];
    for (a, b, _) in edges {
        *adj[a].entry(b).or_default() += 1.0;
        *adj[b].entry(a).or_default() += 1.0;
    }
    adj.into_iter().map(|m| m.into_iter().collect()).collect()
}

fn step(adj: &[Vec<(usize, f64)>], x: &[f64], x0: f64, damping: f64) -> Vec<f64> {
    let mut y: Vec<f64> =
        adj.iter().map(|row| row.iter().map(|&(j, w)| w * x[j]).sum::<f64>() + damping * x0).collect();
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut y {
        *v /= norm;
    }
    y
}

/// Power iteration `x <- normalize(A x + damping x0)` with uniform unit
/// `x0`; returns the vector after every iteration. Empty when the graph has
/// no edges.
pub fn iterates(adj: &[Vec<(usize, f64)>], params: EigenParams) -> Vec<Vec<f64>> {
    let n = adj.len();
    if adj.iter().all(Vec::is_empty) {
        return Vec::new();
    }
    let x0 = 1.0 / (n as f64).sqrt();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(params.iterations);
    let mut x = vec![x0; n];
    for _ in 0..params.iterations {
        x = step(adj, &x, x0, params.damping);
        out.push(x.clone());
    }
    out
}

/// Final scores indexed like `records`; all zeros without edges.
pub fn eigenvector_centrality(records: &[FunctionRecord], calls: &CallMap, params: EigenParams) -> Vec<f64> {
    power_iteration(&call_graph(records, calls), params)
}

/// Same as the last of `iterates`, without keeping the history.
pub fn power_iteration(adj: &[Vec<(usize, f64)>], params: EigenParams) -> Vec<f64> {
    let n = adj.len();
    if adj.iter().all(Vec::is_empty) {
        return vec![0.0; n];
    }
    let x0 = 1.0 / (n as f64).sqrt();
    let mut x = vec![x0; n];
    for _ in 0..params.iterations {
        x = step(adj, &x, x0, params.damping);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn undirected(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            adj[a].push((b, 1.0));
            adj[b].push((a, 1.0));
        }
        adj
    }

    #[test]
    fn no_edges_all_zero() {
        assert_eq!(power_iteration(&undirected(3, &[]), EigenParams::default()), vec![0.0; 3]);
        assert!(iterates(&undirected(3, &[]), EigenParams::default()).is_empty());
    }

    #[test]
    fn mutual_pair_is_symmetric() {
        let x = power_iteration(&undirected(2, &[(0, 1)]), EigenParams::default());
        assert!((x[0] - x[1]).abs() < 1e-12);
    }

    #[test]
    fn history_ends_at_result() {
        let adj = undirected(4, &[(0, 1), (0, 2), (0, 3)]);
        let p = EigenParams { iterations: 20, damping: 0.15 };
        let hist = iterates(&adj, p);
        assert_eq!(hist.len(), 20);
        assert_eq!(hist.last().unwrap(), &power_iteration(&adj, p));
    }
}
