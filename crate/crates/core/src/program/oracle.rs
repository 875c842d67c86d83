//! Single-threaded synchronous reference execution.

use super::{StateMap, VertexProgram, VertexState};
use crate::graph::{Graph, VertexId};

/// Jacobi-style stepper: each step computes every emission from the
/// previous states, then every apply.
pub struct Sequential<'g, P: VertexProgram> {
    graph: &'g Graph<P::Weight>,
    program: &'g P,
    states: Vec<VertexState<P::State>>,
    iteration: usize,
}

impl<'g, P: VertexProgram> Sequential<'g, P> {
    pub fn new(graph: &'g Graph<P::Weight>, program: &'g P) -> Self {
        let states = graph
            .vertices()
            .iter()
            .map(|&v| program.init(v, graph))
            .collect();
        Self {
            graph,
            program,
            states,
            iteration: 0,
        }
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Runs one iteration; returns the number of vertices active afterwards.
    pub fn step(&mut self) -> usize {
        let g = self.graph;
        let mut inboxes: Vec<Vec<P::Message>> = vec![Vec::new(); g.num_vertices()];
        let mut out: Vec<(VertexId, P::Message)> = Vec::new();
        // Sources are visited in ascending id order, so every inbox ends up
        // sorted by source id without an explicit sort.
        for (idx, (&id, state)) in g.vertices().iter().zip(&self.states).enumerate() {
            if !self.program.emits(state) {
                continue;
            }
            out.clear();
            self.program.emit(id, &state.value, g.edges_at(idx), &mut out);
            for (dest, msg) in out.drain(..) {
                let d = g
                    .index_of(dest)
                    .expect("messages are addressed to graph vertices");
                inboxes[d].push(msg);
            }
        }
        let mut active = 0;
        for (state, inbox) in self.states.iter_mut().zip(&inboxes) {
            let (value, activated) = self.program.apply(&state.value, inbox);
            *state = VertexState::new(value, activated);
            active += usize::from(activated);
        }
        self.iteration += 1;
        active
    }

    pub fn states(&self) -> StateMap<P::State> {
        self.graph
            .vertices()
            .iter()
            .copied()
            .zip(self.states.iter().cloned())
            .collect()
    }
}

/// Runs `iterations` synchronous iterations and returns every vertex's state.
pub fn sequential_oracle<P: VertexProgram>(
    graph: &Graph<P::Weight>,
    program: &P,
    iterations: usize,
) -> StateMap<P::State> {
    let mut runner = Sequential::new(graph, program);
    for _ in 0..iterations {
        runner.step();
    }
    runner.states()
}
