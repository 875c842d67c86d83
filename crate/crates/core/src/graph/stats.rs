use serde::Serialize;

use super::Graph;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GraphStats {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub avg_out_degree: f64,
    pub max_in_degree: usize,
}

pub fn graph_stats<S: Scalar>(g: &Graph<S>) -> GraphStats {
    let mut in_degree = vec![0usize; g.num_vertices()];
    for (_, edges) in g.iter() {
        for e in edges {
            let idx = g.index_of(e.target).expect("edge targets are graph vertices");
            in_degree[idx] += 1;
        }
    }
    let num_nodes = g.num_vertices();
    let num_edges = g.num_edges();
    GraphStats {
        num_nodes,
        num_edges,
        avg_out_degree: if num_nodes == 0 {
            0.0
        } else {
            num_edges as f64 / num_nodes as f64
        },
        max_in_degree: in_degree.into_iter().max().unwrap_or(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_of_four() {
        let g: Graph<f64> = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)].into_iter().collect();
        let s = graph_stats(&g);
        assert_eq!((s.num_nodes, s.num_edges, s.avg_out_degree, s.max_in_degree), (4, 3, 0.75, 1));
    }

    #[test]
    fn star_into_center() {
        let g: Graph<f64> = (1..=10).map(|leaf| (leaf, 0, 1.0)).collect();
        assert_eq!(graph_stats(&g).max_in_degree, 10);
    }
}
