//! Engine-neutral vertex programs.
//!
//! Every engine runs the same iteration: vertices that are active (or all
//! vertices, for always-active programs) emit messages from their current
//! state; every vertex then applies the messages addressed to it, in
//! ascending source-id order, producing its next state and activation flag.

mod oracle;
mod rip;
mod sssp;

use std::collections::BTreeMap;
use std::fmt::{Debug, Display};

use thiserror::Error;

use crate::codec::Wire;
use crate::graph::{Edge, Graph, VertexId};
use crate::scalar::Scalar;

pub use oracle::{sequential_oracle, Sequential};
pub use rip::{Likelihood, Rip, RipMessage, RipState};
pub use sssp::{Distance, Sssp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProgramError {
    #[error("source vertex {0} is not in the graph")]
    UnknownSource(VertexId),
    #[error("label propagation needs at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("seed label for vertex {vertex} has {found} classes, expected {expected}")]
    SeedWidth {
        vertex: VertexId,
        found: usize,
        expected: usize,
    },
}

/// Algorithm payload plus activation flag.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexState<T> {
    pub value: T,
    pub active: bool,
}

impl<T> VertexState<T> {
    pub fn new(value: T, active: bool) -> Self {
        Self { value, active }
    }
}

/// Final per-vertex states returned by engines and the oracle.
pub type StateMap<T> = BTreeMap<VertexId, VertexState<T>>;

pub trait VertexProgram: Send + Sync {
    type Weight: Scalar;
    type State: Wire + Clone + Debug + Display + PartialEq + Send + Sync;
    type Message: Wire + Clone + Debug + Send + Sync;

    /// Short identifier used in metrics, e.g. `sssp`.
    fn name(&self) -> &'static str;

    /// Checks the program's configuration against the graph before a run.
    fn validate(&self, _graph: &Graph<Self::Weight>) -> Result<(), ProgramError> {
        Ok(())
    }

    fn init(&self, vertex: VertexId, graph: &Graph<Self::Weight>) -> VertexState<Self::State>;

    /// Computes the next state from `messages`, which arrive sorted by source id.
    ///
    /// Returns the new value and whether the vertex is active next iteration.
    /// With no messages a non-always-active program must return the state
    /// unchanged and inactive.
    fn apply(&self, state: &Self::State, messages: &[Self::Message]) -> (Self::State, bool);

    fn emit(
        &self,
        vertex: VertexId,
        state: &Self::State,
        edges: &[Edge<Self::Weight>],
        out: &mut Vec<(VertexId, Self::Message)>,
    );

    /// Always-active programs emit from every vertex every iteration and never halt.
    fn always_active(&self) -> bool {
        false
    }

    fn has_combiner(&self) -> bool {
        false
    }

    /// Merges two payloads for the same destination. Must be commutative
    /// and associative; only called when [`has_combiner`](Self::has_combiner) is true.
    fn combine(&self, _a: &Self::Message, _b: &Self::Message) -> Self::Message {
        unimplemented!("{} has no combiner", self.name())
    }

    fn emits(&self, state: &VertexState<Self::State>) -> bool {
        state.active || self.always_active()
    }
}

/// Folds a run of same-destination messages (already in canonical order) into one.
pub fn combine_all<P: VertexProgram>(program: &P, messages: &[P::Message]) -> Option<P::Message> {
    let (first, rest) = messages.split_first()?;
    Some(rest.iter().fold(first.clone(), |acc, m| program.combine(&acc, m)))
}
