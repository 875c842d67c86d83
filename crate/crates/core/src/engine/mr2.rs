//! MapReduce with a map-side join.
//!
//! The input is split once into structure files (adjacency) and state files,
//! both partitioned by `hash_partition` and sorted by id. Each mapper merges
//! its structure and state files record by record and emits only messages;
//! reducers stream the previous state file alongside the message groups so
//! vertices without messages are carried forward.

use std::time::Instant;

use super::records::{structure_record_bytes, StateRecord, StructureRecord};
use super::shuffle::{MapOutput, RunMerger, ShuffleWriter};
use super::{
    check_options, empty_metrics, run_phase, EngineError, EngineKind, IterationClock, RunOptions, RunOutput,
    Workspace,
};
use crate::cluster::{DfsFile, Envelope, SimulatedDfs, TransferLedger, WorkerPool};
use crate::graph::{hash_partition, Graph, VertexId};
use crate::program::{StateMap, VertexProgram, VertexState};

const STRUCTURE: &str = "structure";
const STATE: &str = "state";

/// The split input: one structure file and one initial state file per partition.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitInput {
    pub structure: Vec<DfsFile>,
    pub state: Vec<DfsFile>,
    /// Serialized size of all structure records.
    pub structure_bytes: u64,
}

/// Writes the structure and initial state files under iteration 0.
pub fn mr2_split_inputs<P: VertexProgram>(
    pool: &WorkerPool,
    dfs: &SimulatedDfs,
    graph: &Graph<P::Weight>,
    program: &P,
    num_partitions: usize,
) -> Result<SplitInput, EngineError> {
    let bytes = run_phase(pool, (0..num_partitions).collect(), |_, part| {
        let mut structure = dfs.create(&DfsFile::new(0, STRUCTURE, part))?;
        let mut state = dfs.create(&DfsFile::new(0, STATE, part))?;
        let mut bytes = 0;
        for (id, edges) in graph.iter() {
            if hash_partition(id, num_partitions).index() != part {
                continue;
            }
            bytes += structure_record_bytes(edges);
            structure.append(&StructureRecord {
                id,
                edges: edges.to_vec(),
            })?;
            let VertexState { value, active } = program.init(id, graph);
            state.append(&StateRecord {
                id,
                state: value,
                active,
            })?;
        }
        structure.finish()?;
        state.finish()?;
        Ok(bytes)
    })?;
    Ok(SplitInput {
        structure: (0..num_partitions).map(|p| DfsFile::new(0, STRUCTURE, p)).collect(),
        state: (0..num_partitions).map(|p| DfsFile::new(0, STATE, p)).collect(),
        structure_bytes: bytes.into_iter().sum(),
    })
}

/// Map task: joins partition `mapper`'s structure file with its state file
/// from iteration `iteration - 1`. Returns the number of messages emitted.
pub fn mr2_map_join<P: VertexProgram>(
    dfs: &SimulatedDfs,
    program: &P,
    opts: &RunOptions,
    iteration: usize,
    mapper: usize,
) -> Result<u64, EngineError> {
    map_task(dfs, program, opts, iteration, mapper).map(|out| out.messages_emitted)
}

fn map_task<P: VertexProgram>(
    dfs: &SimulatedDfs,
    program: &P,
    opts: &RunOptions,
    iteration: usize,
    mapper: usize,
) -> Result<MapOutput, EngineError> {
    let mut structure = dfs.open(&DfsFile::new(0, STRUCTURE, mapper))?;
    let mut states = dfs.open(&DfsFile::new(iteration - 1, STATE, mapper))?;
    let mut shuffle = ShuffleWriter::new(
        dfs,
        program,
        opts.combiner,
        iteration,
        mapper,
        opts.workers,
        opts.spill_threshold,
    );
    let mut out: Vec<(VertexId, P::Message)> = Vec::new();
    loop {
        let adjacency = structure.next_record::<StructureRecord<P::Weight>>()?;
        let state = states.next_record::<StateRecord<P::State>>()?;
        let (adjacency, state) = match (adjacency, state) {
            (None, None) => break,
            (Some(a), Some(s)) if a.id == s.id => (a, s),
            (a, s) => {
                return Err(EngineError::Fault(format!(
                    "map-side join of partition {mapper} out of step: structure has {}, state has {}",
                    a.map_or("end of file".into(), |r| format!("vertex {}", r.id)),
                    s.map_or("end of file".into(), |r| format!("vertex {}", r.id)),
                )))
            }
        };
        if state.active || program.always_active() {
            out.clear();
            program.emit(state.id, &state.state, &adjacency.edges, &mut out);
            for (dest, payload) in out.drain(..) {
                shuffle.push_message(Envelope {
                    dest,
                    source: state.id,
                    payload,
                })?;
            }
        }
    }
    drop(structure);
    drop(states);
    shuffle.finish()
}

fn reduce_task<P: VertexProgram>(
    dfs: &SimulatedDfs,
    program: &P,
    iteration: usize,
    reducer: usize,
    runs: &[DfsFile],
) -> Result<u64, EngineError> {
    let mut merger = RunMerger::<P>::open(dfs, runs)?;
    let mut previous = dfs.open(&DfsFile::new(iteration - 1, STATE, reducer))?;
    let mut writer = dfs.create(&DfsFile::new(iteration, STATE, reducer))?;
    let mut active = 0;
    let mut group = merger.next_group()?;
    while let Some(mut vertex) = previous.next_record::<StateRecord<P::State>>()? {
        let messages = match &group {
            Some(g) if g.key < vertex.id => {
                return Err(EngineError::Fault(format!(
                    "message for unknown vertex {} at reducer {reducer}",
                    g.key
                )))
            }
            Some(g) if g.key == vertex.id => {
                if g.vertex.is_some() {
                    return Err(EngineError::Fault(format!("vertex record for {} in a message-only shuffle", g.key)));
                }
                group.take().map(|g| g.messages).unwrap_or_default()
            }
            _ => Vec::new(),
        };
        if group.is_none() {
            group = merger.next_group()?;
        }
        let (state, on) = program.apply(&vertex.state, &messages);
        vertex.state = state;
        vertex.active = on;
        active += u64::from(on);
        writer.append(&vertex)?;
    }
    if let Some(g) = group {
        return Err(EngineError::Fault(format!(
            "message for unknown vertex {} at reducer {reducer}",
            g.key
        )));
    }
    writer.finish()?;
    Ok(active)
}

fn run_job<P: VertexProgram>(
    pool: &WorkerPool,
    dfs: &SimulatedDfs,
    program: &P,
    opts: &RunOptions,
    iteration: usize,
) -> Result<(TransferLedger, u64), EngineError> {
    let p = opts.workers;
    let maps = run_phase(pool, (0..p).collect(), |_, m| map_task(dfs, program, opts, iteration, m))?;

    let mut inputs: Vec<(Vec<DfsFile>, TransferLedger)> = vec![(Vec::new(), TransferLedger::default()); p];
    for out in maps {
        for (r, (runs, ledger)) in out.runs.into_iter().zip(out.ledgers).enumerate() {
            inputs[r].0.extend(runs);
            inputs[r].1 += ledger;
        }
    }
    let total: TransferLedger = inputs.iter().map(|(_, l)| *l).sum();
    let spills: Vec<DfsFile> = inputs.iter().flat_map(|(runs, _)| runs.iter().cloned()).collect();

    let active = run_phase(pool, inputs, |r, (runs, ledger)| {
        opts.cost.charge_network(ledger.msg_bytes + ledger.structure_bytes);
        reduce_task(dfs, program, iteration, r, &runs)
    })?;

    if !opts.keep_intermediate {
        for file in &spills {
            dfs.remove(file)?;
        }
        // Iteration 0 also holds the structure files, which live for the whole run.
        for r in 0..p {
            dfs.remove(&DfsFile::new(iteration - 1, STATE, r))?;
        }
        if iteration > 1 {
            dfs.remove_iteration(iteration - 1)?;
        }
    }
    Ok((total, active.into_iter().sum()))
}

fn read_states<P: VertexProgram>(
    dfs: &SimulatedDfs,
    iteration: usize,
    partitions: usize,
) -> Result<StateMap<P::State>, EngineError> {
    let mut states = StateMap::new();
    for p in 0..partitions {
        let mut reader = dfs.open(&DfsFile::new(iteration, STATE, p))?;
        while let Some(v) = reader.next_record::<StateRecord<P::State>>()? {
            states.insert(v.id, VertexState::new(v.state, v.active));
        }
    }
    Ok(states)
}

pub fn mr2_run<P: VertexProgram>(
    graph: &Graph<P::Weight>,
    program: &P,
    opts: &RunOptions,
) -> Result<RunOutput<P::State>, EngineError> {
    check_options(graph, program, opts)?;
    let run_started = Instant::now();
    let workspace = Workspace::open(opts)?;
    let dfs = &workspace.dfs;
    let pool = WorkerPool::new(opts.workers)?;
    let p = opts.workers;
    let mut metrics = empty_metrics(EngineKind::Mr2, program, opts);

    let mut setup_clock = Some(IterationClock::start(Some(dfs)));
    let split = mr2_split_inputs(&pool, dfs, graph, program, p)?;

    let mut last = 0;
    for k in 1..=opts.iterations {
        let clock = setup_clock.take().unwrap_or_else(|| IterationClock::start(Some(dfs)));
        let (ledger, active) = run_job(&pool, dfs, program, opts, k)?;
        metrics.iterations.push(clock.finish(Some(dfs), k - 1, ledger, active));
        last = k;
        log::debug!("mr2 iteration {k}: {active} active, {} messages", ledger.msg_count);
        if opts.halt_when_quiescent && active == 0 && !program.always_active() {
            break;
        }
    }
    let states = read_states::<P>(dfs, last, p)?;
    metrics.total_wall_ms = run_started.elapsed().as_secs_f64() * 1e3;
    Ok(RunOutput {
        states,
        metrics,
        setup: TransferLedger {
            structure_bytes: split.structure_bytes,
            ..TransferLedger::default()
        },
        dfs_dir: workspace.finish(),
    })
}
