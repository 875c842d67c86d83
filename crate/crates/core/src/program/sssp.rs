//! Unweighted single-source shortest paths (hop counts).

use std::fmt;
use std::marker::PhantomData;

use super::{ProgramError, VertexProgram, VertexState};
use crate::codec::{CodecError, Wire};
use crate::graph::{Edge, Graph, VertexId};
use crate::scalar::Scalar;

/// Hop distance; `Distance::INFINITY` marks unreached vertices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Distance(pub u64);

impl Distance {
    pub const INFINITY: Distance = Distance(u64::MAX);

    pub fn is_finite(self) -> bool {
        self != Self::INFINITY
    }

    pub fn finite(self) -> Option<u64> {
        self.is_finite().then_some(self.0)
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.finite() {
            Some(d) => write!(f, "{d}"),
            None => f.write_str("inf"),
        }
    }
}

impl Wire for Distance {
    fn encode(&self, out: &mut Vec<u8>) {
        self.0.encode(out)
    }
    fn decode(input: &mut &[u8]) -> Result<Self, CodecError> {
        u64::decode(input).map(Distance)
    }
    fn encoded_len(&self) -> usize {
        8
    }
}

/// Shortest-path program; edge weights are ignored.
#[derive(Clone, Copy, Debug)]
pub struct Sssp<S = f64> {
    source: VertexId,
    _weight: PhantomData<fn() -> S>,
}

impl<S> Sssp<S> {
    pub fn new(source: VertexId) -> Self {
        Self {
            source,
            _weight: PhantomData,
        }
    }

    pub fn source(&self) -> VertexId {
        self.source
    }
}

impl<S: Scalar> VertexProgram for Sssp<S> {
    type Weight = S;
    type State = Distance;
    type Message = Distance;

    fn name(&self) -> &'static str {
        "sssp"
    }

    fn validate(&self, graph: &Graph<S>) -> Result<(), ProgramError> {
        if graph.contains(self.source) {
            Ok(())
        } else {
            Err(ProgramError::UnknownSource(self.source))
        }
    }

    fn init(&self, vertex: VertexId, _graph: &Graph<S>) -> VertexState<Distance> {
        if vertex == self.source {
            VertexState::new(Distance(0), true)
        } else {
            VertexState::new(Distance::INFINITY, false)
        }
    }

    fn apply(&self, state: &Distance, messages: &[Distance]) -> (Distance, bool) {
        match messages.iter().min() {
            // Ties do not reactivate: only a strictly shorter path counts.
            Some(&best) if best < *state => (best, true),
            _ => (*state, false),
        }
    }

    fn emit(
        &self,
        _vertex: VertexId,
        state: &Distance,
        edges: &[Edge<S>],
        out: &mut Vec<(VertexId, Distance)>,
    ) {
        if let Some(d) = state.finite() {
            let next = Distance(d + 1);
            out.extend(edges.iter().map(|e| (e.target, next)));
        }
    }

    fn has_combiner(&self) -> bool {
        true
    }

    fn combine(&self, a: &Distance, b: &Distance) -> Distance {
        *a.min(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    const INF: Distance = Distance::INFINITY;

    fn program() -> Sssp<f64> {
        Sssp::new(0)
    }

    #[test]
    fn init_source_and_others() {
        let g: Graph<f64> = [(0, 1, 1.0)].into_iter().collect();
        let p = program();
        assert_eq!(p.init(0, &g), VertexState::new(Distance(0), true));
        assert_eq!(p.init(1, &g), VertexState::new(INF, false));
        assert!(p.validate(&g).is_ok());
        assert_eq!(
            Sssp::<f64>::new(5).validate(&g),
            Err(ProgramError::UnknownSource(5))
        );
    }

    #[test]
    fn single_vertex_graph() {
        let mut b = crate::graph::GraphBuilder::<f64>::new();
        b.add_vertex(3);
        let g = b.build();
        let p = Sssp::<f64>::new(3);
        assert!(p.validate(&g).is_ok());
        assert_eq!(p.init(3, &g).value, Distance(0));
    }

    #[test]
    fn apply_takes_strict_minimum() {
        let p = program();
        assert_eq!(p.apply(&INF, &[Distance(3), Distance(5)]), (Distance(3), true));
        assert_eq!(p.apply(&Distance(2), &[Distance(4)]), (Distance(2), false));
        assert_eq!(p.apply(&Distance(5), &[Distance(5)]), (Distance(5), false));
        assert_eq!(p.apply(&Distance(5), &[]), (Distance(5), false));
    }

    #[test]
    fn emit_increments_along_every_edge() {
        let p = program();
        let edges = [Edge { target: 4, weight: 1.0 }, Edge { target: 9, weight: 1.0 }];
        let mut out = Vec::new();
        p.emit(1, &Distance(2), &edges, &mut out);
        assert_eq!(out, vec![(4, Distance(3)), (9, Distance(3))]);

        out.clear();
        p.emit(1, &INF, &edges, &mut out);
        assert!(out.is_empty());
        p.emit(1, &Distance(0), &[], &mut out);
        assert!(out.is_empty());
    }

    #[test]
    fn combine_is_min_in_every_order() {
        let p = program();
        assert_eq!(p.combine(&Distance(3), &Distance(5)), Distance(3));
        assert_eq!(p.combine(&Distance(7), &Distance(7)), Distance(7));
        let values = [Distance(5), Distance(3), Distance(7)];
        for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let ordered: Vec<Distance> = perm.iter().map(|&i| values[i]).collect();
            assert_eq!(super::super::combine_all(&p, &ordered), Some(Distance(3)));
        }
    }

    #[test]
    fn display_and_wire() {
        assert_eq!(Distance(4).to_string(), "4");
        assert_eq!(INF.to_string(), "inf");
        assert_eq!(Distance::from_bytes(&INF.to_bytes()).unwrap(), INF);
    }
}
