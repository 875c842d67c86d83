//! The three execution engines and the options they share.
//!
//! Every engine produces one metrics row per iteration. Row 0 is the first
//! iteration and also carries setup work (initial DFS write, MR2 input split,
//! BSP partition load), so the first-iteration cost stays visible.

mod bsp;
mod mr;
mod mr2;
pub mod records;
mod shuffle;

use std::fmt;
use std::io;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{CostModel, DfsError, PhaseError, PoolError, SimulatedDfs, TransferLedger, WorkerPool};
use crate::graph::Graph;
use crate::metrics::{IterationMetrics, RunMetrics};
use crate::program::{ProgramError, StateMap, VertexProgram};

pub use bsp::{bsp_load, bsp_run, BspCluster, BspLoad, BspPartition, SuperstepOutcome};
pub use mr::{mr_map_partition, mr_run, mr_write_initial, MapStats};
pub use mr2::{mr2_map_join, mr2_run, mr2_split_inputs, SplitInput};

/// Environment variable naming the directory under which run directories are created.
pub const DFS_ROOT_ENV: &str = "ITERGRAPH_DFS_ROOT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Mr,
    Mr2,
    Bsp,
}

impl EngineKind {
    pub const ALL: [EngineKind; 3] = [EngineKind::Mr, EngineKind::Mr2, EngineKind::Bsp];

    pub fn as_str(self) -> &'static str {
        match self {
            EngineKind::Mr => "mr",
            EngineKind::Mr2 => "mr2",
            EngineKind::Bsp => "bsp",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mr" => Ok(EngineKind::Mr),
            "mr2" => Ok(EngineKind::Mr2),
            "bsp" => Ok(EngineKind::Bsp),
            other => Err(format!("unknown engine '{other}' (expected mr, mr2 or bsp)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Iterations (MR, MR2) or maximum supersteps (BSP).
    pub iterations: usize,
    /// Worker threads; also the partition, mapper and reducer count.
    pub workers: usize,
    pub combiner: bool,
    /// Stop MR and MR2 early once no vertex is active. BSP always halts.
    pub halt_when_quiescent: bool,
    /// BSP resident-memory budget in bytes; `None` is unlimited.
    pub memory_budget: Option<u64>,
    pub cost: CostModel,
    /// Parent directory for the run's DFS directory. Falls back to
    /// `ITERGRAPH_DFS_ROOT`, then the system temp directory.
    pub dfs_root: Option<PathBuf>,
    /// Keep the DFS directory and every iteration's files after the run.
    pub keep_intermediate: bool,
    /// Buffered messages per mapper before a sorted run is spilled.
    pub spill_threshold: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            iterations: 10,
            workers: 1,
            combiner: false,
            halt_when_quiescent: false,
            memory_budget: None,
            cost: CostModel::default(),
            dfs_root: None,
            keep_intermediate: false,
            spill_threshold: 1 << 18,
        }
    }
}

impl RunOptions {
    pub fn new(iterations: usize, workers: usize) -> Self {
        Self {
            iterations,
            workers,
            ..Self::default()
        }
    }

    pub fn with_combiner(mut self, on: bool) -> Self {
        self.combiner = on;
        self
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput<T> {
    pub states: StateMap<T>,
    pub metrics: RunMetrics,
    /// One-time transfers outside the iteration rows (MR2 split, BSP load).
    pub setup: TransferLedger,
    /// The DFS directory, when it was kept.
    pub dfs_dir: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error("graph needs an estimated {required} bytes of worker memory, budget is {budget}")]
    Capacity { required: u64, budget: u64 },
    #[error("engine fault: {0}")]
    Fault(String),
    #[error(transparent)]
    Dfs(#[from] DfsError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error("cannot prepare DFS directory: {0}")]
    Io(#[from] io::Error),
}

impl From<PhaseError<EngineError>> for EngineError {
    fn from(e: PhaseError<EngineError>) -> Self {
        e.source
    }
}

/// Runs `program` on `graph` with the chosen engine.
pub fn run_engine<P: VertexProgram>(
    kind: EngineKind,
    graph: &Graph<P::Weight>,
    program: &P,
    opts: &RunOptions,
) -> Result<RunOutput<P::State>, EngineError> {
    match kind {
        EngineKind::Mr => mr_run(graph, program, opts),
        EngineKind::Mr2 => mr2_run(graph, program, opts),
        EngineKind::Bsp => bsp_run(graph, program, opts),
    }
}

pub(crate) fn check_options<P: VertexProgram>(
    graph: &Graph<P::Weight>,
    program: &P,
    opts: &RunOptions,
) -> Result<(), EngineError> {
    if opts.iterations == 0 {
        return Err(EngineError::Config("iterations must be at least 1".into()));
    }
    if opts.workers == 0 {
        return Err(EngineError::Config("workers must be at least 1".into()));
    }
    if opts.spill_threshold == 0 {
        return Err(EngineError::Config("spill threshold must be at least 1".into()));
    }
    if opts.combiner && !program.has_combiner() {
        return Err(EngineError::Config(format!("{} has no combiner", program.name())));
    }
    program.validate(graph)?;
    Ok(())
}

/// A run's private DFS directory; removed on drop unless kept.
pub(crate) struct Workspace {
    pub dfs: SimulatedDfs,
    dir: Option<tempfile::TempDir>,
    keep: bool,
}

impl Workspace {
    pub fn open(opts: &RunOptions) -> Result<Self, EngineError> {
        let base = opts
            .dfs_root
            .clone()
            .or_else(|| std::env::var_os(DFS_ROOT_ENV).map(PathBuf::from))
            .unwrap_or_else(std::env::temp_dir);
        std::fs::create_dir_all(&base)?;
        let dir = tempfile::Builder::new().prefix("itergraph-").tempdir_in(&base)?;
        let dfs = SimulatedDfs::new(dir.path(), opts.cost)?;
        Ok(Self {
            dfs,
            dir: Some(dir),
            keep: opts.keep_intermediate,
        })
    }

    /// Hands the directory over to the caller if it is being kept.
    pub fn finish(mut self) -> Option<PathBuf> {
        let dir = self.dir.take()?;
        if self.keep {
            Some(dir.keep())
        } else {
            None
        }
    }
}

pub(crate) fn run_phase<T, R, F>(pool: &WorkerPool, tasks: Vec<T>, f: F) -> Result<Vec<R>, EngineError>
where
    T: Send,
    R: Send,
    F: Fn(usize, T) -> Result<R, EngineError> + Sync,
{
    Ok(pool.run_phase(tasks, f)?)
}

/// Measures one iteration: wall time plus DFS counter deltas.
pub(crate) struct IterationClock {
    started: Instant,
    read: u64,
    written: u64,
}

impl IterationClock {
    pub fn start(dfs: Option<&SimulatedDfs>) -> Self {
        Self {
            started: Instant::now(),
            read: dfs.map_or(0, SimulatedDfs::read_bytes),
            written: dfs.map_or(0, SimulatedDfs::write_bytes),
        }
    }

    pub fn finish(
        self,
        dfs: Option<&SimulatedDfs>,
        iteration: usize,
        ledger: TransferLedger,
        active_vertices: u64,
    ) -> IterationMetrics {
        IterationMetrics {
            iteration,
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
            msg_count: ledger.msg_count,
            msg_bytes: ledger.msg_bytes,
            structure_bytes: ledger.structure_bytes,
            dfs_read_bytes: dfs.map_or(0, SimulatedDfs::read_bytes) - self.read,
            dfs_write_bytes: dfs.map_or(0, SimulatedDfs::write_bytes) - self.written,
            active_vertices,
        }
    }
}

pub(crate) fn empty_metrics<P: VertexProgram>(kind: EngineKind, program: &P, opts: &RunOptions) -> RunMetrics {
    RunMetrics {
        run_id: String::new(),
        engine: kind.to_string(),
        algorithm: program.name().to_string(),
        dataset: String::new(),
        num_workers: opts.workers,
        iterations: Vec::new(),
        total_wall_ms: 0.0,
    }
}
