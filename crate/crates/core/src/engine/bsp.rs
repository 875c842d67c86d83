//! Bulk synchronous parallel engine.
//!
//! The graph is loaded once into worker-resident partitions. A superstep has
//! two phases separated by barriers: every emitting vertex sends messages,
//! which are bucketed and combined per source partition; after the exchange
//! each partition groups its inbox by vertex and applies it. Only vertices that are active or
//! received messages are computed, the rest stay halted.

use std::time::Instant;

use super::records::structure_record_bytes;
use super::shuffle::combine_sorted;
use super::{check_options, empty_metrics, run_phase, EngineError, EngineKind, IterationClock, RunOptions, RunOutput};
use crate::cluster::{canonicalize, CostModel, Envelope, TransferLedger, WorkerPool};
use crate::codec::Wire;
use crate::graph::{hash_partition, Edge, Graph, PartitionId, VertexId};
use crate::program::{StateMap, VertexProgram, VertexState};

/// Vertices owned by one worker, with their states and adjacency in CSR form.
pub struct BspPartition<P: VertexProgram> {
    id: PartitionId,
    ids: Vec<VertexId>,
    states: Vec<P::State>,
    active: Vec<bool>,
    offsets: Vec<usize>,
    edges: Vec<Edge<P::Weight>>,
    /// Emptied message buffers handed back by receivers, one per destination
    /// partition, so steady-state supersteps allocate nothing large.
    spare: Vec<Vec<Envelope<P::Message>>>,
    scratch: ApplyScratch<P::Message>,
}

struct ApplyScratch<M> {
    slots: Vec<usize>,
    starts: Vec<usize>,
    next: Vec<usize>,
    /// Inbox positions as (chunk, index), grouped by destination.
    order: Vec<(u32, u32)>,
    messages: Vec<M>,
}

impl<M> Default for ApplyScratch<M> {
    fn default() -> Self {
        Self {
            slots: Vec::new(),
            starts: Vec::new(),
            next: Vec::new(),
            order: Vec::new(),
            messages: Vec::new(),
        }
    }
}

impl<P: VertexProgram> BspPartition<P> {
    pub fn id(&self) -> PartitionId {
        self.id
    }

    /// Resident vertex ids, ascending.
    pub fn vertices(&self) -> &[VertexId] {
        &self.ids
    }

    pub fn state(&self, vertex: VertexId) -> Option<VertexState<P::State>> {
        let i = self.ids.binary_search(&vertex).ok()?;
        Some(VertexState::new(self.states[i].clone(), self.active[i]))
    }

    fn edges_at(&self, i: usize) -> &[Edge<P::Weight>] {
        &self.edges[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Emission phase: messages from every emitting vertex, bucketed by
    /// destination partition and combined per bucket if asked.
    fn emit(&mut self, program: &P, combine: bool, partitions: usize) -> Outbox<P::Message> {
        let mut buckets = std::mem::take(&mut self.spare);
        buckets.resize_with(partitions, Vec::new);
        let mut out = Vec::new();
        for (i, &id) in self.ids.iter().enumerate() {
            if !(self.active[i] || program.always_active()) {
                continue;
            }
            out.clear();
            program.emit(id, &self.states[i], self.edges_at(i), &mut out);
            for (dest, payload) in out.drain(..) {
                buckets[hash_partition(dest, partitions).index()].push(Envelope { dest, source: id, payload });
            }
        }
        if combine {
            for bucket in &mut buckets {
                canonicalize(bucket);
                *bucket = combine_sorted(program, std::mem::take(bucket));
            }
        }
        let mut ledger = TransferLedger::default();
        let mut remote_bytes = vec![0; partitions];
        for (to, bucket) in buckets.iter().enumerate() {
            ledger.msg_count += bucket.len() as u64;
            if to != self.id.index() {
                remote_bytes[to] = bucket.iter().map(|m| m.wire_len() as u64).sum();
                ledger.msg_bytes += remote_bytes[to];
            }
        }
        Outbox {
            buckets,
            remote_bytes,
            ledger,
        }
    }

    /// Apply phase. `inbox` holds one chunk per source partition, in
    /// partition order and each in emission order, so a stable grouping by
    /// destination followed by a per-vertex sort by source yields
    /// `(dest, source)` order. Returns the active count.
    fn apply(&mut self, program: &P, inbox: &[Vec<Envelope<P::Message>>]) -> Result<u64, EngineError> {
        let ApplyScratch {
            slots,
            starts,
            next,
            order,
            messages,
        } = &mut self.scratch;
        slots.clear();
        starts.clear();
        starts.resize(self.ids.len() + 1, 0);
        for m in inbox.iter().flatten() {
            let slot = self
                .ids
                .binary_search(&m.dest)
                .map_err(|_| unknown_destination(m.dest, self.id))?;
            starts[slot + 1] += 1;
            slots.push(slot);
        }
        for i in 1..starts.len() {
            starts[i] += starts[i - 1];
        }
        next.clear();
        next.extend_from_slice(starts);
        order.clear();
        order.resize(slots.len(), (0, 0));
        let positions = inbox
            .iter()
            .enumerate()
            .flat_map(|(c, chunk)| (0..chunk.len()).map(move |k| (c as u32, k as u32)));
        for (&slot, position) in slots.iter().zip(positions) {
            order[next[slot]] = position;
            next[slot] += 1;
        }

        let mut active = 0;
        let at = |(c, k): (u32, u32)| &inbox[c as usize][k as usize];
        for i in 0..self.ids.len() {
            let group = &mut order[starts[i]..starts[i + 1]];
            group.sort_by_key(|&p| at(p).source);
            messages.clear();
            messages.extend(group.iter().map(|&p| at(p).payload.clone()));
            if self.active[i] || program.always_active() || !messages.is_empty() {
                let (state, on) = program.apply(&self.states[i], messages);
                self.states[i] = state;
                self.active[i] = on;
            }
            active += u64::from(self.active[i]);
        }
        Ok(active)
    }
}

/// One partition's outgoing messages for a superstep.
struct Outbox<M> {
    buckets: Vec<Vec<Envelope<M>>>,
    /// Bytes per destination partition; zero for the sender's own bucket.
    remote_bytes: Vec<u64>,
    ledger: TransferLedger,
}

fn unknown_destination(dest: VertexId, partition: PartitionId) -> EngineError {
    EngineError::Fault(format!(
        "message for vertex {dest}, which partition {} does not hold",
        partition.index()
    ))
}

/// Partitions after loading, with the one-time transfer they cost.
pub struct BspLoad<P: VertexProgram> {
    pub partitions: Vec<BspPartition<P>>,
    /// Serialized size of the graph structure moved into worker memory.
    pub structure_bytes: u64,
    /// Estimated resident bytes, including the factor 2 headroom for inboxes.
    pub estimated_bytes: u64,
}

/// Loads `graph` into `num_partitions` resident partitions.
///
/// Fails with [`EngineError::Capacity`] when the estimated resident size
/// exceeds `memory_budget`.
pub fn bsp_load<P: VertexProgram>(
    graph: &Graph<P::Weight>,
    program: &P,
    num_partitions: usize,
    memory_budget: Option<u64>,
) -> Result<BspLoad<P>, EngineError> {
    if num_partitions == 0 {
        return Err(EngineError::Config("at least one partition is needed".into()));
    }
    let initial: Vec<VertexState<P::State>> = graph.vertices().iter().map(|&v| program.init(v, graph)).collect();
    let mut structure_bytes = 0;
    let mut resident = 0;
    for ((_, edges), state) in graph.iter().zip(&initial) {
        let record = structure_record_bytes(edges);
        structure_bytes += record;
        resident += record + state.value.encoded_len() as u64 + 1;
    }
    let estimated_bytes = resident * 2;
    if let Some(budget) = memory_budget {
        if estimated_bytes > budget {
            return Err(EngineError::Capacity {
                required: estimated_bytes,
                budget,
            });
        }
    }

    let mut partitions: Vec<BspPartition<P>> = (0..num_partitions)
        .map(|p| BspPartition {
            id: PartitionId(p),
            ids: Vec::new(),
            states: Vec::new(),
            active: Vec::new(),
            offsets: vec![0],
            edges: Vec::new(),
            spare: Vec::new(),
            scratch: ApplyScratch::default(),
        })
        .collect();
    for ((id, edges), state) in graph.iter().zip(initial) {
        let part = &mut partitions[hash_partition(id, num_partitions).index()];
        part.ids.push(id);
        part.states.push(state.value);
        part.active.push(state.active);
        part.edges.extend_from_slice(edges);
        part.offsets.push(part.edges.len());
    }
    Ok(BspLoad {
        partitions,
        structure_bytes,
        estimated_bytes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuperstepOutcome {
    pub superstep: usize,
    pub active_vertices: u64,
    pub messages_sent: u64,
    /// No vertex is active and nothing is in flight.
    pub halted: bool,
    pub ledger: TransferLedger,
}

/// Resident partitions plus the worker pool that computes them.
pub struct BspCluster<'p, P: VertexProgram> {
    program: &'p P,
    pool: WorkerPool,
    partitions: Vec<BspPartition<P>>,
    combiner: bool,
    cost: CostModel,
    superstep: usize,
}

impl<'p, P: VertexProgram> BspCluster<'p, P> {
    pub fn new(load: BspLoad<P>, program: &'p P, combiner: bool, cost: CostModel) -> Result<Self, EngineError> {
        if combiner && !program.has_combiner() {
            return Err(EngineError::Config(format!("{} has no combiner", program.name())));
        }
        Ok(Self {
            program,
            pool: WorkerPool::new(load.partitions.len())?,
            partitions: load.partitions,
            combiner,
            cost,
            superstep: 0,
        })
    }

    pub fn partitions(&self) -> &[BspPartition<P>] {
        &self.partitions
    }

    /// Supersteps run so far.
    pub fn supersteps(&self) -> usize {
        self.superstep
    }

    pub fn superstep(&mut self) -> Result<SuperstepOutcome, EngineError> {
        let n = self.partitions.len();
        let program = self.program;
        let combine = self.combiner;
        let started = Instant::now();

        let emitted = run_phase(&self.pool, self.partitions.iter_mut().collect(), |_, part| {
            Ok(part.emit(program, combine, n))
        })?;

        // Barrier: exchange outboxes.
        let mut ledger = TransferLedger::default();
        let mut inboxes: Vec<(Vec<Vec<Envelope<P::Message>>>, u64)> = (0..n).map(|_| (Vec::new(), 0)).collect();
        for outbox in emitted {
            ledger += outbox.ledger;
            for (dest, (bucket, bytes)) in outbox.buckets.into_iter().zip(outbox.remote_bytes).enumerate() {
                inboxes[dest].1 += bytes;
                inboxes[dest].0.push(bucket);
            }
        }

        let exchanged = Instant::now();
        let cost = self.cost;
        let tasks: Vec<_> = self.partitions.iter_mut().zip(inboxes).collect();
        let applied = run_phase(&self.pool, tasks, |_, (part, (inbox, incoming_bytes))| {
            cost.charge_network(incoming_bytes);
            part.apply(program, &inbox).map(|active| (active, inbox))
        })?;
        let mut active = 0;
        for (dest, (count, chunks)) in applied.into_iter().enumerate() {
            active += count;
            // Hand the emptied buffers back to their senders.
            for (source, mut chunk) in chunks.into_iter().enumerate() {
                chunk.clear();
                let spare = &mut self.partitions[source].spare;
                spare.resize_with(n, Vec::new);
                spare[dest] = chunk;
            }
        }
        log::trace!(
            "bsp superstep {}: emit+exchange {:?}, apply {:?}",
            self.superstep,
            exchanged - started,
            exchanged.elapsed()
        );

        let outcome = SuperstepOutcome {
            superstep: self.superstep,
            active_vertices: active,
            messages_sent: ledger.msg_count,
            halted: active == 0 && !program.always_active(),
            ledger,
        };
        self.superstep += 1;
        Ok(outcome)
    }

    pub fn states(&self) -> StateMap<P::State> {
        let mut states = StateMap::new();
        for part in &self.partitions {
            for (i, &id) in part.ids.iter().enumerate() {
                states.insert(id, VertexState::new(part.states[i].clone(), part.active[i]));
            }
        }
        states
    }
}

/// Runs supersteps until every vertex has halted or `opts.iterations` is reached.
pub fn bsp_run<P: VertexProgram>(
    graph: &Graph<P::Weight>,
    program: &P,
    opts: &RunOptions,
) -> Result<RunOutput<P::State>, EngineError> {
    check_options(graph, program, opts)?;
    let run_started = Instant::now();
    let mut metrics = empty_metrics(EngineKind::Bsp, program, opts);

    let mut setup_clock = Some(IterationClock::start(None));
    let load = bsp_load(graph, program, opts.workers, opts.memory_budget)?;
    let setup = TransferLedger {
        structure_bytes: load.structure_bytes,
        ..TransferLedger::default()
    };
    opts.cost.charge_network(load.structure_bytes);
    let mut cluster = BspCluster::new(load, program, opts.combiner, opts.cost)?;

    for k in 0..opts.iterations {
        let clock = setup_clock.take().unwrap_or_else(|| IterationClock::start(None));
        let outcome = cluster.superstep()?;
        let mut ledger = outcome.ledger;
        if k == 0 {
            ledger += setup;
        }
        metrics.iterations.push(clock.finish(None, k, ledger, outcome.active_vertices));
        log::debug!(
            "bsp superstep {k}: {} active, {} messages",
            outcome.active_vertices,
            outcome.messages_sent
        );
        if outcome.halted {
            break;
        }
    }
    let states = cluster.states();
    metrics.total_wall_ms = run_started.elapsed().as_secs_f64() * 1e3;
    Ok(RunOutput {
        states,
        metrics,
        setup,
        dfs_dir: None,
    })
}
