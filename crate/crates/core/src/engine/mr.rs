//! Classic MapReduce: one map/shuffle/reduce job per iteration.
//!
//! Mappers read full vertex records, emit messages and re-emit each vertex
//! (state plus adjacency) so the reducer can rebuild it. All shuffled bytes
//! count as network traffic because mappers and reducers are assumed to sit
//! on different hosts.

use std::time::Instant;

use super::records::VertexRecord;
use super::shuffle::{MapOutput, RunMerger, ShuffleWriter};
use super::{
    check_options, empty_metrics, run_phase, EngineError, EngineKind, IterationClock, RunOptions, RunOutput,
    Workspace,
};
use crate::cluster::{DfsFile, Envelope, SimulatedDfs, TransferLedger, WorkerPool};
use crate::graph::{hash_partition, Graph, VertexId};
use crate::program::{StateMap, VertexProgram, VertexState};

pub(crate) const VERTICES: &str = "vertices";

/// Record counts from one map task.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MapStats {
    pub messages: u64,
    pub vertex_records: u64,
}

impl MapStats {
    pub fn records(&self) -> u64 {
        self.messages + self.vertex_records
    }
}

/// Writes `<0>/vertices-<partition>.bin`, sorted by id; returns active vertex count.
pub fn mr_write_initial<P: VertexProgram>(
    dfs: &SimulatedDfs,
    graph: &Graph<P::Weight>,
    program: &P,
    partition: usize,
    num_partitions: usize,
) -> Result<u64, EngineError> {
    let mut writer = dfs.create(&DfsFile::new(0, VERTICES, partition))?;
    let mut active = 0;
    for (id, edges) in graph.iter() {
        if hash_partition(id, num_partitions).index() != partition {
            continue;
        }
        let VertexState { value, active: on } = program.init(id, graph);
        active += u64::from(on);
        writer.append(&VertexRecord {
            id,
            state: value,
            active: on,
            edges: edges.to_vec(),
        })?;
    }
    writer.finish()?;
    Ok(active)
}

/// Map task for `iteration` (1-based) over partition `mapper`'s vertex file.
pub fn mr_map_partition<P: VertexProgram>(
    dfs: &SimulatedDfs,
    program: &P,
    opts: &RunOptions,
    iteration: usize,
    mapper: usize,
) -> Result<MapStats, EngineError> {
    map_task(dfs, program, opts, iteration, mapper).map(|out| MapStats {
        messages: out.messages_emitted,
        vertex_records: out.vertex_records,
    })
}

fn map_task<P: VertexProgram>(
    dfs: &SimulatedDfs,
    program: &P,
    opts: &RunOptions,
    iteration: usize,
    mapper: usize,
) -> Result<MapOutput, EngineError> {
    let mut reader = dfs.open(&DfsFile::new(iteration - 1, VERTICES, mapper))?;
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
    while let Some(vertex) = reader.next_record::<VertexRecord<P::State, P::Weight>>()? {
        if vertex.active || program.always_active() {
            out.clear();
            program.emit(vertex.id, &vertex.state, &vertex.edges, &mut out);
            for (dest, payload) in out.drain(..) {
                shuffle.push_message(Envelope {
                    dest,
                    source: vertex.id,
                    payload,
                })?;
            }
        }
        shuffle.push_vertex(vertex)?;
    }
    drop(reader);
    shuffle.finish()
}

fn reduce_task<P: VertexProgram>(
    dfs: &SimulatedDfs,
    program: &P,
    iteration: usize,
    reducer: usize,
    num_reducers: usize,
    runs: &[DfsFile],
) -> Result<u64, EngineError> {
    let mut merger = RunMerger::<P>::open(dfs, runs)?;
    let mut writer = dfs.create(&DfsFile::new(iteration, VERTICES, reducer))?;
    let mut active = 0;
    while let Some(group) = merger.next_group()? {
        if hash_partition(group.key, num_reducers).index() != reducer {
            return Err(EngineError::Fault(format!(
                "key {} reached reducer {reducer}",
                group.key
            )));
        }
        let Some(mut vertex) = group.vertex else {
            return Err(EngineError::Fault(format!(
                "vertex {} received messages but its record is missing",
                group.key
            )));
        };
        let (state, on) = program.apply(&vertex.state, &group.messages);
        vertex.state = state;
        vertex.active = on;
        active += u64::from(on);
        writer.append(&vertex)?;
    }
    writer.finish()?;
    Ok(active)
}

/// Runs one map/shuffle/reduce job. Returns the job's transfer totals and the active count.
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
        reduce_task(dfs, program, iteration, r, p, &runs)
    })?;

    if !opts.keep_intermediate {
        for file in &spills {
            dfs.remove(file)?;
        }
        dfs.remove_iteration(iteration - 1)?;
    }
    Ok((total, active.into_iter().sum()))
}

pub(crate) fn read_vertex_states<P: VertexProgram>(
    dfs: &SimulatedDfs,
    iteration: usize,
    partitions: usize,
) -> Result<StateMap<P::State>, EngineError> {
    let mut states = StateMap::new();
    for p in 0..partitions {
        let mut reader = dfs.open(&DfsFile::new(iteration, VERTICES, p))?;
        while let Some(v) = reader.next_record::<VertexRecord<P::State, P::Weight>>()? {
            states.insert(v.id, VertexState::new(v.state, v.active));
        }
    }
    Ok(states)
}

pub fn mr_run<P: VertexProgram>(
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
    let mut metrics = empty_metrics(EngineKind::Mr, program, opts);

    let mut setup_clock = Some(IterationClock::start(Some(dfs)));
    run_phase(&pool, (0..p).collect(), |_, part| {
        mr_write_initial(dfs, graph, program, part, p)
    })?;

    let mut last = 0;
    for k in 1..=opts.iterations {
        let clock = setup_clock.take().unwrap_or_else(|| IterationClock::start(Some(dfs)));
        let (ledger, active) = run_job(&pool, dfs, program, opts, k)?;
        metrics.iterations.push(clock.finish(Some(dfs), k - 1, ledger, active));
        last = k;
        log::debug!("mr iteration {k}: {active} active, {} messages", ledger.msg_count);
        if opts.halt_when_quiescent && active == 0 && !program.always_active() {
            break;
        }
    }
    let states = read_vertex_states::<P>(dfs, last, p)?;
    metrics.total_wall_ms = run_started.elapsed().as_secs_f64() * 1e3;
    Ok(RunOutput {
        states,
        metrics,
        setup: TransferLedger::default(),
        dfs_dir: workspace.finish(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::CostModel;
    use crate::program::{sequential_oracle, Distance, Rip, Sssp};

    fn dfs() -> (tempfile::TempDir, SimulatedDfs) {
        let dir = tempfile::tempdir().unwrap();
        let dfs = SimulatedDfs::new(dir.path(), CostModel::default()).unwrap();
        (dir, dfs)
    }

    fn chain() -> Graph<f64> {
        [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)].into_iter().collect()
    }

    #[test]
    fn active_vertex_emits_messages_and_itself() {
        let g: Graph<f64> = [(0, 1, 1.0), (0, 2, 1.0)].into_iter().collect();
        let (_d, dfs) = dfs();
        let program = Sssp::new(0);
        mr_write_initial(&dfs, &g, &program, 0, 1).unwrap();
        let opts = RunOptions::new(1, 1);
        let stats = mr_map_partition(&dfs, &program, &opts, 1, 0).unwrap();
        // Vertex 0: two messages plus itself; vertices 1 and 2 are inactive.
        assert_eq!(stats, MapStats { messages: 2, vertex_records: 3 });
    }

    #[test]
    fn inactive_vertex_emits_only_itself() {
        let g: Graph<f64> = [(5, 6, 1.0)].into_iter().collect();
        let (_d, dfs) = dfs();
        let program = Sssp::new(6);
        mr_write_initial(&dfs, &g, &program, 0, 1).unwrap();
        let stats = mr_map_partition(&dfs, &program, &RunOptions::new(1, 1), 1, 0).unwrap();
        assert_eq!(stats.records(), 2);
        assert_eq!(stats.messages, 0);
    }

    #[test]
    fn rip_vertex_emits_out_degree_plus_one() {
        let g = crate::generate_power_law_graph::<f64>(200, 3.0, 2.2, 4).unwrap();
        let (_d, dfs) = dfs();
        let program = Rip::new(2);
        mr_write_initial(&dfs, &g, &program, 0, 1).unwrap();
        let stats = mr_map_partition(&dfs, &program, &RunOptions::new(1, 1), 1, 0).unwrap();
        assert_eq!(stats.records(), (g.num_edges() + g.num_vertices()) as u64);
    }

    #[test]
    fn chain_distances() {
        for workers in [1, 2, 3] {
            let out = mr_run(&chain(), &Sssp::new(0), &RunOptions::new(10, workers)).unwrap();
            let d: Vec<u64> = out.states.values().map(|s| s.value.0).collect();
            assert_eq!(d, vec![0, 1, 2, 3]);
            assert_eq!(out.metrics.iterations.len(), 10);
            assert!(out.metrics.iterations.iter().all(|i| i.structure_bytes > 0));
        }
    }

    #[test]
    fn matches_oracle_each_iteration() {
        let g = crate::generate_power_law_graph::<f64>(100, 3.0, 2.2, 11).unwrap();
        let program = Sssp::new(g.vertices()[0]);
        for k in 1..6 {
            let out = mr_run(&g, &program, &RunOptions::new(k, 2)).unwrap();
            assert_eq!(out.states, sequential_oracle(&g, &program, k), "iteration {k}");
        }
    }

    #[test]
    fn reducer_applies_min() {
        let (_d, dfs) = dfs();
        let program = Sssp::<f64>::new(1);
        let runs = vec![DfsFile::new(1, "spill-m0-s0", 0)];
        type R = super::super::records::ShuffleRecord<Distance, f64, Distance>;
        let records: Vec<R> = vec![
            R::Vertex(VertexRecord { id: 0, state: Distance::INFINITY, active: false, edges: vec![] }),
            R::Message(Envelope { dest: 0, source: 1, payload: Distance(4) }),
            R::Message(Envelope { dest: 0, source: 2, payload: Distance(6) }),
        ];
        dfs.write_records(&runs[0], &records).unwrap();
        assert_eq!(reduce_task(&dfs, &program, 1, 0, 1, &runs).unwrap(), 1);
        let states = read_vertex_states::<Sssp>(&dfs, 1, 1).unwrap();
        assert_eq!(states[&0], VertexState::new(Distance(4), true));
    }

    #[test]
    fn message_without_vertex_record_is_a_fault() {
        let (_d, dfs) = dfs();
        let runs = vec![DfsFile::new(1, "spill-m0-s0", 0)];
        type R = super::super::records::ShuffleRecord<Distance, f64, Distance>;
        dfs.write_records(&runs[0], &[R::Message(Envelope { dest: 9, source: 1, payload: Distance(1) })])
            .unwrap();
        let err = reduce_task(&dfs, &Sssp::<f64>::new(1), 1, 0, 1, &runs).unwrap_err();
        assert!(err.to_string().contains("vertex 9"), "{err}");
    }

    #[test]
    fn missing_input_names_the_file() {
        let (_d, dfs) = dfs();
        let err = mr_map_partition(&dfs, &Sssp::<f64>::new(0), &RunOptions::new(1, 2), 3, 1).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("2/vertices-1.bin"), "{text}");
    }

    #[test]
    fn structure_survives_every_iteration() {
        let g = crate::generate_power_law_graph::<f64>(300, 3.0, 2.2, 5).unwrap();
        let parent = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            keep_intermediate: true,
            dfs_root: Some(parent.path().into()),
            ..RunOptions::new(4, 3)
        };
        let out = mr_run(&g, &Rip::new(3), &opts).unwrap();
        let dir = out.dfs_dir.unwrap();
        let dfs = SimulatedDfs::new(&dir, CostModel::default()).unwrap();
        let expected: Vec<(VertexId, Vec<_>)> = g.iter().map(|(v, e)| (v, e.to_vec())).collect();
        for k in 0..=4 {
            let mut seen = Vec::new();
            for p in 0..3 {
                for v in dfs.read_records::<VertexRecord<_, f64>>(&DfsFile::new(k, VERTICES, p)).unwrap() {
                    let _: &crate::program::RipState<f64> = &v.state;
                    seen.push((v.id, v.edges));
                }
            }
            seen.sort_by_key(|(id, _)| *id);
            assert_eq!(seen, expected, "iteration {k}");
        }
    }

    #[test]
    fn dfs_write_bytes_match_files_on_disk() {
        let g = crate::generate_power_law_graph::<f64>(200, 3.0, 2.2, 6).unwrap();
        let parent = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            keep_intermediate: true,
            dfs_root: Some(parent.path().into()),
            ..RunOptions::new(2, 2)
        };
        let out = mr_run(&g, &Sssp::new(g.vertices()[0]), &opts).unwrap();
        let dir = out.dfs_dir.unwrap();
        // Iteration 2 (row 1) wrote its spills and vertex files into directory 2.
        let on_disk: u64 = std::fs::read_dir(dir.join("2"))
            .unwrap()
            .map(|e| e.unwrap().metadata().unwrap().len())
            .sum();
        assert_eq!(out.metrics.iterations[1].dfs_write_bytes, on_disk);
    }
}
