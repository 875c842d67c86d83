//! Immutable directed graph with weighted adjacency and optional seed labels.

mod generate;
mod load;
mod partition;
mod stats;

use std::collections::BTreeMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::scalar::Scalar;

pub use generate::{generate_power_law_graph, generate_seed_labels};
pub use load::{load_edge_list, load_seed_labels, write_edge_list, write_seed_labels};
pub use partition::{hash_partition, PartitionId};
pub use stats::{graph_stats, GraphStats};

pub type VertexId = u64;

/// Label-likelihood vectors keyed by vertex.
pub type SeedLabels<S> = BTreeMap<VertexId, Vec<S>>;

/// Sum tolerance for stored label vectors.
pub const LABEL_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("input contains no edges")]
    Empty,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge<S> {
    pub target: VertexId,
    pub weight: S,
}

/// Directed graph in compressed sparse row form.
///
/// Vertex ids may be sparse; they are kept sorted and each vertex's
/// adjacency is sorted by target id.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph<S> {
    ids: Vec<VertexId>,
    offsets: Vec<usize>,
    edges: Vec<Edge<S>>,
    seed_labels: SeedLabels<S>,
}

impl<S: Scalar> Graph<S> {
    pub fn num_vertices(&self) -> usize {
        self.ids.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// All vertex ids in ascending order.
    pub fn vertices(&self) -> &[VertexId] {
        &self.ids
    }

    pub fn index_of(&self, id: VertexId) -> Option<usize> {
        // Dense id spaces hit the fast path.
        match self.ids.get(id as usize) {
            Some(&found) if found == id => Some(id as usize),
            _ => self.ids.binary_search(&id).ok(),
        }
    }

    pub fn contains(&self, id: VertexId) -> bool {
        self.index_of(id).is_some()
    }

    /// Outgoing edges of the vertex at dense index `index`.
    pub fn edges_at(&self, index: usize) -> &[Edge<S>] {
        &self.edges[self.offsets[index]..self.offsets[index + 1]]
    }

    /// Outgoing edges of `id`; empty for unknown ids.
    pub fn out_edges(&self, id: VertexId) -> &[Edge<S>] {
        self.index_of(id).map_or(&[], |i| self.edges_at(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (VertexId, &[Edge<S>])> + '_ {
        self.ids
            .iter()
            .enumerate()
            .map(move |(i, &id)| (id, self.edges_at(i)))
    }

    pub fn seed_labels(&self) -> &SeedLabels<S> {
        &self.seed_labels
    }

    /// Attaches seed labels, dropping entries for ids not in the graph.
    ///
    /// Returns the new graph and the number of ignored entries.
    pub fn with_seed_labels(mut self, seeds: SeedLabels<S>) -> Result<(Self, usize), GraphError> {
        let mut ignored = 0;
        let mut kept = SeedLabels::new();
        let mut width = None;
        for (id, label) in seeds {
            if !self.contains(id) {
                ignored += 1;
                continue;
            }
            validate_label(&label).map_err(|m| {
                GraphError::InvalidParameter(format!("seed label for vertex {id}: {m}"))
            })?;
            if *width.get_or_insert(label.len()) != label.len() {
                return Err(GraphError::InvalidParameter(format!(
                    "seed label for vertex {id} has {} classes, expected {}",
                    label.len(),
                    width.unwrap_or_default()
                )));
            }
            kept.insert(id, label);
        }
        if ignored > 0 {
            log::warn!("ignored {ignored} seed labels for vertices not in the graph");
        }
        self.seed_labels = kept;
        Ok((self, ignored))
    }

    /// Writes the edge list in the text format accepted by [`load_edge_list`].
    pub fn write_edge_list<W: Write>(&self, out: W) -> io::Result<()> {
        write_edge_list(self, out)
    }
}

fn validate_label<S: Scalar>(label: &[S]) -> Result<(), String> {
    if label.is_empty() {
        return Err("empty label vector".into());
    }
    let mut sum = 0.0;
    for p in label {
        let p = p.to_f64().unwrap_or(f64::NAN);
        if !(0.0..=1.0).contains(&p) {
            return Err(format!("component {p} outside [0, 1]"));
        }
        sum += p;
    }
    // f32 labels cannot meet the f64 tolerance, so scale it to the type's precision.
    let tolerance = LABEL_SUM_TOLERANCE.max(S::epsilon().to_f64().unwrap_or(0.0) * 8.0);
    if (sum - 1.0).abs() > tolerance {
        return Err(format!("components sum to {sum}"));
    }
    Ok(())
}

/// Accumulates vertices and edges; duplicate `(source, target)` pairs keep the last weight.
#[derive(Debug, Default)]
pub struct GraphBuilder<S> {
    vertices: Vec<VertexId>,
    edges: Vec<(VertexId, VertexId, S)>,
}

impl<S: Scalar> GraphBuilder<S> {
    pub fn new() -> Self {
        Self {
            vertices: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn with_capacity(vertices: usize, edges: usize) -> Self {
        Self {
            vertices: Vec::with_capacity(vertices),
            edges: Vec::with_capacity(edges),
        }
    }

    pub fn add_vertex(&mut self, id: VertexId) -> &mut Self {
        self.vertices.push(id);
        self
    }

    pub fn add_edge(&mut self, source: VertexId, target: VertexId, weight: S) -> &mut Self {
        self.edges.push((source, target, weight));
        self
    }

    /// Builds the graph; sink-only vertices get empty adjacency lists.
    pub fn build(self) -> Graph<S> {
        let GraphBuilder {
            mut vertices,
            mut edges,
        } = self;
        vertices.reserve(edges.len() * 2);
        for &(s, t, _) in &edges {
            vertices.push(s);
            vertices.push(t);
        }
        vertices.sort_unstable();
        vertices.dedup();

        // Stable sort keeps insertion order among duplicates, so the last one wins.
        edges.sort_by_key(|&(s, t, _)| (s, t));
        let mut deduped: Vec<(VertexId, VertexId, S)> = Vec::with_capacity(edges.len());
        for edge in edges {
            match deduped.last_mut() {
                Some(last) if last.0 == edge.0 && last.1 == edge.1 => *last = edge,
                _ => deduped.push(edge),
            }
        }

        let mut offsets = Vec::with_capacity(vertices.len() + 1);
        offsets.push(0);
        let mut cursor = 0;
        for &id in &vertices {
            while cursor < deduped.len() && deduped[cursor].0 == id {
                cursor += 1;
            }
            offsets.push(cursor);
        }
        let edges = deduped
            .into_iter()
            .map(|(_, target, weight)| Edge { target, weight })
            .collect();

        Graph {
            ids: vertices,
            offsets,
            edges,
            seed_labels: SeedLabels::new(),
        }
    }
}

impl<S: Scalar> FromIterator<(VertexId, VertexId, S)> for Graph<S> {
    fn from_iter<I: IntoIterator<Item = (VertexId, VertexId, S)>>(iter: I) -> Self {
        let mut builder = GraphBuilder::new();
        for (s, t, w) in iter {
            builder.add_edge(s, t, w);
        }
        builder.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sink_vertices_are_materialized() {
        let g: Graph<f64> = [(0, 1, 1.0), (1, 2, 1.0)].into_iter().collect();
        assert_eq!(g.vertices(), &[0, 1, 2]);
        assert!(g.out_edges(2).is_empty());
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn duplicate_edges_keep_last_weight() {
        let g: Graph<f64> = [(0, 1, 1.0), (0, 2, 3.0), (0, 1, 0.25)].into_iter().collect();
        assert_eq!(
            g.out_edges(0),
            &[
                Edge { target: 1, weight: 0.25 },
                Edge { target: 2, weight: 3.0 }
            ]
        );
    }

    #[test]
    fn sparse_ids_are_addressable() {
        let g: Graph<f64> = [(1_000_000, 7, 1.0), (7, 42, 2.0)].into_iter().collect();
        assert_eq!(g.index_of(42), Some(1));
        assert_eq!(g.index_of(8), None);
        assert_eq!(g.out_edges(7)[0].target, 42);
    }

    #[test]
    fn seed_attachment_drops_unknown_ids() {
        let g: Graph<f64> = [(0, 1, 1.0)].into_iter().collect();
        let seeds = SeedLabels::from([(1, vec![1.0, 0.0]), (9, vec![0.0, 1.0])]);
        let (g, ignored) = g.with_seed_labels(seeds).unwrap();
        assert_eq!(ignored, 1);
        assert_eq!(g.seed_labels().len(), 1);
    }

    #[test]
    fn seed_attachment_rejects_ragged_widths() {
        let g: Graph<f64> = [(0, 1, 1.0)].into_iter().collect();
        let seeds = SeedLabels::from([(0, vec![1.0, 0.0]), (1, vec![0.5, 0.25, 0.25])]);
        assert!(g.with_seed_labels(seeds).is_err());
    }
}
