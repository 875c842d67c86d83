//! Independent reference computations for integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};

use itergraph::{generate_power_law_graph, generate_seed_labels, Graph, RipState, StateMap, VertexId};

/// Hop distances from `source` by breadth-first search; `None` when unreachable.
pub fn bfs_depths(graph: &Graph<f64>, source: VertexId) -> BTreeMap<VertexId, Option<u64>> {
    let mut depth: BTreeMap<VertexId, Option<u64>> = graph.vertices().iter().map(|&v| (v, None)).collect();
    let mut queue = VecDeque::from([source]);
    depth.insert(source, Some(0));
    while let Some(v) = queue.pop_front() {
        let d = depth[&v].unwrap();
        for e in graph.out_edges(v) {
            let slot = depth.get_mut(&e.target).unwrap();
            if slot.is_none() {
                *slot = Some(d + 1);
                queue.push_back(e.target);
            }
        }
    }
    depth
}

/// Dense Jacobi iteration of weighted-mean label propagation over in-edges,
/// written directly from the update rule rather than through the vertex-program API.
pub fn rip_reference(graph: &Graph<f64>, classes: usize, clamp: bool, iterations: usize) -> BTreeMap<VertexId, Vec<f64>> {
    let ids = graph.vertices();
    let pos = |v: VertexId| ids.binary_search(&v).unwrap();
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ids.len()];
    for (i, &u) in ids.iter().enumerate() {
        for e in graph.out_edges(u) {
            if e.weight > 0.0 {
                incoming[pos(e.target)].push((i, e.weight));
            }
        }
    }
    let seeds = graph.seed_labels();
    let mut labels: Vec<Vec<f64>> = ids
        .iter()
        .map(|v| seeds.get(v).cloned().unwrap_or_else(|| vec![1.0 / classes as f64; classes]))
        .collect();
    for _ in 0..iterations {
        let next: Vec<Vec<f64>> = (0..ids.len())
            .map(|v| {
                if incoming[v].is_empty() || (clamp && seeds.contains_key(&ids[v])) {
                    return labels[v].clone();
                }
                let total: f64 = incoming[v].iter().map(|&(_, w)| w).sum();
                (0..classes)
                    .map(|c| incoming[v].iter().map(|&(u, w)| w * labels[u][c]).sum::<f64>() / total)
                    .collect()
            })
            .collect();
        labels = next;
    }
    ids.iter().copied().zip(labels).collect()
}

pub fn max_label_diff(a: &StateMap<RipState<f64>>, b: &StateMap<RipState<f64>>) -> f64 {
    assert_eq!(a.len(), b.len(), "state maps cover different vertex sets");
    a.iter()
        .flat_map(|(v, s)| {
            let other = &b[v].value.likelihood;
            s.value.likelihood.iter().zip(other).map(|(x, y)| (x - y).abs())
        })
        .fold(0.0, f64::max)
}

pub fn max_reference_diff(states: &StateMap<RipState<f64>>, reference: &BTreeMap<VertexId, Vec<f64>>) -> f64 {
    assert_eq!(states.len(), reference.len());
    states
        .iter()
        .flat_map(|(v, s)| s.value.likelihood.iter().zip(&reference[v]).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

pub fn power_law(n: usize, avg: f64, seed: u64) -> Graph<f64> {
    generate_power_law_graph(n, avg, 2.2, seed).unwrap()
}

pub fn seeded(n: usize, avg: f64, classes: usize, seed: u64) -> Graph<f64> {
    let g = power_law(n, avg, seed);
    let labels = generate_seed_labels(&g, classes, 0.1, seed).unwrap();
    g.with_seed_labels(labels).unwrap().0
}

/// The vertex with the most out-edges, so SSSP reaches a large part of the graph.
pub fn hub(graph: &Graph<f64>) -> VertexId {
    graph
        .iter()
        .max_by_key(|(v, e)| (e.len(), std::cmp::Reverse(*v)))
        .map(|(v, _)| v)
        .unwrap()
}
