//! Iterative vertex-centric graph processing on three engines: classic
//! MapReduce, MapReduce with a map-side join, and bulk synchronous parallel.
//!
//! Engines share one [`VertexProgram`] abstraction and a simulated cluster
//! (worker pool, disk-backed DFS, byte ledgers), so their results can be
//! compared exactly and their costs measured side by side.
//!
//! ```
//! use itergraph::{run_engine, EngineKind, GraphF64, RunOptions, Sssp};
//!
//! let graph: GraphF64 = [(0, 1, 1.0), (1, 2, 1.0)].into_iter().collect();
//! let out = run_engine(EngineKind::Bsp, &graph, &Sssp::new(0), &RunOptions::new(10, 2)).unwrap();
//! assert_eq!(out.states[&2].value.0, 2);
//! ```

pub mod cluster;
pub mod codec;
pub mod engine;
pub mod experiment;
pub mod graph;
pub mod metrics;
pub mod program;
pub mod scalar;

pub use cluster::{CostModel, TransferLedger};
pub use engine::{run_engine, EngineError, EngineKind, RunOptions, RunOutput};
pub use graph::{
    generate_power_law_graph, generate_seed_labels, graph_stats, hash_partition, load_edge_list, load_seed_labels,
    Edge, Graph, GraphBuilder, GraphError, GraphStats, PartitionId, SeedLabels, VertexId,
};
pub use metrics::{export_csv, fit_linear, mean_iteration_time, IterationMetrics, LinearFit, RunMetrics};
pub use program::{
    sequential_oracle, Distance, Likelihood, Rip, RipMessage, RipState, Sssp, StateMap, VertexProgram, VertexState,
};
pub use scalar::Scalar;

pub type GraphF32 = Graph<f32>;
pub type GraphF64 = Graph<f64>;
pub type SsspF32 = Sssp<f32>;
pub type SsspF64 = Sssp<f64>;
pub type RipF32 = Rip<f32>;
pub type RipF64 = Rip<f64>;
pub type LinearFitF64 = LinearFit<f64>;
