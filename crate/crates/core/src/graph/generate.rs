//! Deterministic synthetic graphs with a heavy-tailed in-degree distribution.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Graph, GraphBuilder, GraphError, SeedLabels, VertexId};
use crate::scalar::Scalar;

/// Edge weights are drawn uniformly from this range.
pub const WEIGHT_RANGE: (f64, f64) = (0.05, 1.0);

/// Chung-Lu style directed graph on ids `0..n`.
///
/// Each vertex receives a popularity rank from a seeded permutation; the
/// target of every edge is drawn with probability proportional to
/// `rank^(-1/(exponent-1))`, which gives an in-degree tail with the
/// requested power-law exponent. Sources are uniform. Self loops and
/// duplicate pairs are redrawn, so the graph has exactly
/// `round(n * target_avg_degree)` edges.
pub fn generate_power_law_graph<S: Scalar>(
    n: usize,
    target_avg_degree: f64,
    exponent: f64,
    seed: u64,
) -> Result<Graph<S>, GraphError> {
    if n < 2 {
        return Err(GraphError::InvalidParameter(format!("n must be at least 2, got {n}")));
    }
    if !(target_avg_degree >= 1.0) || target_avg_degree > (n - 1) as f64 / 2.0 {
        return Err(GraphError::InvalidParameter(format!(
            "target average degree {target_avg_degree} must lie in [1, (n-1)/2]"
        )));
    }
    if !(exponent > 1.0) || !exponent.is_finite() {
        return Err(GraphError::InvalidParameter(format!(
            "exponent must be greater than 1, got {exponent}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<VertexId> = (0..n as VertexId).collect();
    order.shuffle(&mut rng);
    let mut popularity = vec![0.0f64; n];
    let decay = 1.0 / (exponent - 1.0);
    for (rank, &v) in order.iter().enumerate() {
        popularity[v as usize] = ((rank + 1) as f64).powf(-decay);
    }
    let targets = WeightedIndex::new(&popularity)
        .map_err(|e| GraphError::InvalidParameter(format!("popularity weights: {e}")))?;

    let num_edges = (n as f64 * target_avg_degree).round() as usize;
    let mut seen: HashSet<(VertexId, VertexId)> = HashSet::with_capacity(num_edges);
    let mut builder = GraphBuilder::with_capacity(n, num_edges);
    for v in 0..n as VertexId {
        builder.add_vertex(v);
    }
    let max_attempts = num_edges.saturating_mul(50);
    let mut attempts = 0;
    while seen.len() < num_edges {
        attempts += 1;
        if attempts > max_attempts {
            return Err(GraphError::InvalidParameter(format!(
                "could not place {num_edges} distinct edges on {n} vertices"
            )));
        }
        let src = rng.random_range(0..n as VertexId);
        let dst = targets.sample(&mut rng) as VertexId;
        if src == dst || !seen.insert((src, dst)) {
            continue;
        }
        let w = rng.random_range(WEIGHT_RANGE.0..=WEIGHT_RANGE.1);
        builder.add_edge(src, dst, S::from_f64(w).expect("weight fits scalar"));
    }
    Ok(builder.build())
}

/// One-hot seed labels for a random `fraction` of the graph's vertices.
pub fn generate_seed_labels<S: Scalar>(
    graph: &Graph<S>,
    num_classes: usize,
    fraction: f64,
    seed: u64,
) -> Result<SeedLabels<S>, GraphError> {
    if num_classes < 2 {
        return Err(GraphError::InvalidParameter(format!(
            "num_classes must be at least 2, got {num_classes}"
        )));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(GraphError::InvalidParameter(format!(
            "labelled fraction {fraction} outside [0, 1]"
        )));
    }
    // Distinct stream from the structure generator for the same seed.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1abe_1000_0000);
    let mut seeds = SeedLabels::new();
    for &v in graph.vertices() {
        if rng.random_bool(fraction) {
            let class = rng.random_range(0..num_classes);
            let mut label = vec![S::zero(); num_classes];
            label[class] = S::one();
            seeds.insert(v, label);
        }
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::graph_stats;

    #[test]
    fn same_seed_same_bytes() {
        let a: Graph<f64> = generate_power_law_graph(1000, 4.0, 2.5, 42).unwrap();
        let b: Graph<f64> = generate_power_law_graph(1000, 4.0, 2.5, 42).unwrap();
        let (mut ta, mut tb) = (Vec::new(), Vec::new());
        a.write_edge_list(&mut ta).unwrap();
        b.write_edge_list(&mut tb).unwrap();
        assert_eq!(ta, tb);
        let c: Graph<f64> = generate_power_law_graph(1000, 4.0, 2.5, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn average_degree_and_heavy_tail_over_seeds() {
        for seed in 0..10 {
            let g: Graph<f64> = generate_power_law_graph(10_000, 4.0, 2.5, seed).unwrap();
            let s = graph_stats(&g);
            assert!((3.6..=4.4).contains(&s.avg_out_degree), "seed {seed}: {s:?}");
            assert!(s.max_in_degree as f64 >= 5.0 * s.avg_out_degree, "seed {seed}: {s:?}");
        }
    }

    #[test]
    fn tele_like_profile() {
        let g: Graph<f64> = generate_power_law_graph(20_000, 4.83, 2.2, 7).unwrap();
        let s = graph_stats(&g);
        assert!((s.avg_out_degree - 4.83).abs() / 4.83 < 0.1, "{s:?}");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate_power_law_graph::<f64>(1, 4.0, 2.5, 0).is_err());
        assert!(generate_power_law_graph::<f64>(100, 0.5, 2.5, 0).is_err());
        assert!(generate_power_law_graph::<f64>(100, 4.0, 1.0, 0).is_err());
        assert!(generate_power_law_graph::<f64>(100, 4.0, f64::NAN, 0).is_err());
    }

    #[test]
    fn seed_labels_are_one_hot() {
        let g: Graph<f64> = generate_power_law_graph(2000, 3.0, 2.5, 1).unwrap();
        let seeds = generate_seed_labels(&g, 3, 0.1, 1).unwrap();
        assert!(seeds.len() > 100 && seeds.len() < 300, "{}", seeds.len());
        for label in seeds.values() {
            assert_eq!(label.iter().filter(|&&p| p == 1.0).count(), 1);
            assert_eq!(label.iter().sum::<f64>(), 1.0);
        }
    }
}
