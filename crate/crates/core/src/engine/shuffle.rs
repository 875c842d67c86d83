//! External-sort shuffle shared by the two MapReduce engines.
//!
//! Mappers buffer messages per reducer and spill them as sorted runs;
//! MR mappers also stream their vertex records into one sorted run per
//! reducer. Reducers k-way merge their runs by `(key, tag, source)`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::records::{adjacency_bytes, encode_message, ShuffleRecord, VertexRecord};
use super::EngineError;
use crate::codec::Wire;
use crate::cluster::{canonicalize, DfsFile, Envelope, RecordReader, RecordWriter, SimulatedDfs, TransferLedger};
use crate::graph::{hash_partition, VertexId};
use crate::program::VertexProgram;

type Record<P> = ShuffleRecord<<P as VertexProgram>::State, <P as VertexProgram>::Weight, <P as VertexProgram>::Message>;

/// Everything one mapper handed to the shuffle.
#[derive(Debug, Default)]
pub(crate) struct MapOutput {
    /// Sorted runs per reducer, in creation order.
    pub runs: Vec<Vec<DfsFile>>,
    /// Shuffled bytes per destination reducer.
    pub ledgers: Vec<TransferLedger>,
    pub messages_emitted: u64,
    pub vertex_records: u64,
}

pub(crate) struct ShuffleWriter<'a, P: VertexProgram> {
    dfs: &'a SimulatedDfs,
    program: &'a P,
    combine: bool,
    iteration: usize,
    mapper: usize,
    threshold: usize,
    buffers: Vec<Vec<Envelope<P::Message>>>,
    buffered: usize,
    spills: usize,
    vertex_runs: Vec<Option<RecordWriter>>,
    out: MapOutput,
}

impl<'a, P: VertexProgram> ShuffleWriter<'a, P> {
    pub fn new(
        dfs: &'a SimulatedDfs,
        program: &'a P,
        combine: bool,
        iteration: usize,
        mapper: usize,
        reducers: usize,
        threshold: usize,
    ) -> Self {
        Self {
            dfs,
            program,
            combine,
            iteration,
            mapper,
            threshold,
            buffers: (0..reducers).map(|_| Vec::new()).collect(),
            buffered: 0,
            spills: 0,
            vertex_runs: (0..reducers).map(|_| None).collect(),
            out: MapOutput {
                runs: vec![Vec::new(); reducers],
                ledgers: vec![TransferLedger::default(); reducers],
                ..MapOutput::default()
            },
        }
    }

    fn reducers(&self) -> usize {
        self.buffers.len()
    }

    pub fn push_message(&mut self, message: Envelope<P::Message>) -> Result<(), EngineError> {
        let r = hash_partition(message.dest, self.reducers()).index();
        self.buffers[r].push(message);
        self.buffered += 1;
        self.out.messages_emitted += 1;
        if self.buffered >= self.threshold {
            self.spill()?;
        }
        Ok(())
    }

    /// Self-emits a vertex record. Records must arrive in ascending id order.
    pub fn push_vertex(&mut self, record: VertexRecord<P::State, P::Weight>) -> Result<(), EngineError> {
        let r = hash_partition(record.id, self.reducers()).index();
        if self.vertex_runs[r].is_none() {
            let file = DfsFile::new(self.iteration, format!("self-m{}", self.mapper), r);
            self.vertex_runs[r] = Some(self.dfs.create(&file)?);
            self.out.runs[r].push(file);
        }
        self.out.ledgers[r].structure_bytes += adjacency_bytes(&record.edges);
        self.out.vertex_records += 1;
        let writer = self.vertex_runs[r].as_mut().expect("created above");
        writer.append(&Record::<P>::Vertex(record))?;
        Ok(())
    }

    fn spill(&mut self) -> Result<(), EngineError> {
        let seq = self.spills;
        self.spills += 1;
        let mut order = Vec::new();
        let mut bytes = Vec::new();
        for r in 0..self.reducers() {
            if self.buffers[r].is_empty() {
                continue;
            }
            let file = DfsFile::new(self.iteration, format!("spill-m{}-s{}", self.mapper, seq), r);
            let mut writer = self.dfs.create(&file)?;
            let ledger = &mut self.out.ledgers[r];
            let mut write = |m: &Envelope<P::Message>| {
                ledger.msg_count += 1;
                ledger.msg_bytes += m.wire_len() as u64;
                bytes.clear();
                encode_message(m, &mut bytes);
                writer.append_raw(&bytes)
            };
            if self.combine {
                let mut buffer = std::mem::take(&mut self.buffers[r]);
                canonicalize(&mut buffer);
                for m in &combine_sorted(self.program, buffer) {
                    write(m)?;
                }
            } else {
                // Sort compact keys rather than whole messages; the index
                // makes keys unique, so the order equals a stable sort.
                let buffer = &mut self.buffers[r];
                order.clear();
                order.extend(buffer.iter().enumerate().map(|(i, m)| (m.dest, m.source, i as u32)));
                order.sort_unstable();
                for &(_, _, i) in &order {
                    write(&buffer[i as usize])?;
                }
                buffer.clear();
            }
            writer.finish()?;
            self.out.runs[r].push(file);
        }
        self.buffered = 0;
        Ok(())
    }

    pub fn finish(mut self) -> Result<MapOutput, EngineError> {
        if self.buffered > 0 {
            self.spill()?;
        }
        for writer in self.vertex_runs.iter_mut().filter_map(Option::take) {
            writer.finish()?;
        }
        Ok(self.out)
    }
}

/// Collapses runs of equal destination in a canonically sorted buffer. The
/// combined message keeps the smallest source id of its group.
pub(crate) fn combine_sorted<P: VertexProgram>(
    program: &P,
    sorted: Vec<Envelope<P::Message>>,
) -> Vec<Envelope<P::Message>> {
    let mut out: Vec<Envelope<P::Message>> = Vec::with_capacity(sorted.len());
    for m in sorted {
        match out.last_mut() {
            Some(last) if last.dest == m.dest => last.payload = program.combine(&last.payload, &m.payload),
            _ => out.push(m),
        }
    }
    out
}

/// All records a reducer holds for one key.
pub(crate) struct Group<P: VertexProgram> {
    pub key: VertexId,
    pub vertex: Option<VertexRecord<P::State, P::Weight>>,
    pub messages: Vec<P::Message>,
}

type SortKey = (VertexId, u8, VertexId);

/// K-way merge over sorted runs.
pub(crate) struct RunMerger<P: VertexProgram> {
    readers: Vec<RecordReader>,
    pending: Vec<Option<Record<P>>>,
    last: Vec<Option<SortKey>>,
    heads: BinaryHeap<Reverse<(SortKey, usize)>>,
    buf: Vec<u8>,
}

impl<P: VertexProgram> RunMerger<P> {
    pub fn open(dfs: &SimulatedDfs, runs: &[DfsFile]) -> Result<Self, EngineError> {
        let readers = runs.iter().map(|f| dfs.open(f)).collect::<Result<Vec<_>, _>>()?;
        let n = readers.len();
        let mut merger = Self {
            readers,
            pending: (0..n).map(|_| None).collect(),
            last: vec![None; n],
            heads: BinaryHeap::with_capacity(n),
            buf: Vec::new(),
        };
        for run in 0..n {
            merger.advance(run)?;
        }
        Ok(merger)
    }

    fn advance(&mut self, run: usize) -> Result<(), EngineError> {
        let reader = &mut self.readers[run];
        if !reader.next_raw(&mut self.buf)? {
            return Ok(());
        }
        let record = Record::<P>::from_bytes(&self.buf).map_err(|e| reader.codec_error(e))?;
        let key = record.sort_key();
        if self.last[run].is_some_and(|prev| key < prev) {
            return Err(EngineError::Fault(format!(
                "unsorted shuffle run {}: key {} after {}",
                reader.path().display(),
                key.0,
                self.last[run].map_or(0, |k| k.0)
            )));
        }
        self.last[run] = Some(key);
        self.pending[run] = Some(record);
        self.heads.push(Reverse((key, run)));
        Ok(())
    }

    fn pop(&mut self) -> Result<Option<Record<P>>, EngineError> {
        let Some(Reverse((_, run))) = self.heads.pop() else {
            return Ok(None);
        };
        let record = self.pending[run].take().expect("head has a pending record");
        self.advance(run)?;
        Ok(Some(record))
    }

    fn peek_key(&self) -> Option<VertexId> {
        self.heads.peek().map(|Reverse(((key, _, _), _))| *key)
    }

    pub fn next_group(&mut self) -> Result<Option<Group<P>>, EngineError> {
        let Some(key) = self.peek_key() else {
            return Ok(None);
        };
        let mut group = Group {
            key,
            vertex: None,
            messages: Vec::new(),
        };
        while self.peek_key() == Some(key) {
            match self.pop()?.expect("peeked") {
                ShuffleRecord::Vertex(v) => {
                    if group.vertex.replace(v).is_some() {
                        return Err(EngineError::Fault(format!("vertex {key} was emitted twice")));
                    }
                }
                ShuffleRecord::Message(m) => group.messages.push(m.payload),
            }
        }
        Ok(Some(group))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::CostModel;
    use crate::graph::Edge;
    use crate::program::{Distance, Sssp};

    fn dfs() -> (tempfile::TempDir, SimulatedDfs) {
        let dir = tempfile::tempdir().unwrap();
        let dfs = SimulatedDfs::new(dir.path(), CostModel::default()).unwrap();
        (dir, dfs)
    }

    fn msg(dest: VertexId, source: VertexId, d: u64) -> Envelope<Distance> {
        Envelope { dest, source, payload: Distance(d) }
    }

    fn drain(merger: &mut RunMerger<Sssp>) -> Vec<(VertexId, bool, Vec<u64>)> {
        let mut out = Vec::new();
        while let Some(g) = merger.next_group().unwrap() {
            out.push((g.key, g.vertex.is_some(), g.messages.iter().map(|m| m.0).collect()));
        }
        out
    }

    #[test]
    fn spills_merge_back_in_key_order() {
        let (_d, dfs) = dfs();
        let program = Sssp::<f64>::new(0);
        // Threshold 2 forces several spills per reducer.
        let mut w = ShuffleWriter::new(&dfs, &program, false, 1, 0, 2, 2);
        for (dest, src, d) in [(5, 0, 9), (2, 0, 4), (3, 1, 7), (2, 1, 6), (4, 3, 1), (5, 3, 2)] {
            w.push_message(msg(dest, src, d)).unwrap();
        }
        for id in [0u64, 2, 4] {
            w.push_vertex(VertexRecord { id, state: Distance::INFINITY, active: false, edges: vec![] })
                .unwrap();
        }
        let out = w.finish().unwrap();
        assert_eq!(out.messages_emitted, 6);
        assert_eq!(out.vertex_records, 3);
        assert_eq!(out.ledgers[0].msg_count + out.ledgers[1].msg_count, 6);
        assert_eq!(out.ledgers[0].structure_bytes, 3);

        let mut even = RunMerger::<Sssp>::open(&dfs, &out.runs[0]).unwrap();
        assert_eq!(
            drain(&mut even),
            vec![(0, true, vec![]), (2, true, vec![4, 6]), (4, true, vec![1])]
        );
        let mut odd = RunMerger::<Sssp>::open(&dfs, &out.runs[1]).unwrap();
        assert_eq!(drain(&mut odd), vec![(3, false, vec![7]), (5, false, vec![9, 2])]);
    }

    #[test]
    fn combining_keeps_lowest_source() {
        let program = Sssp::<f64>::new(0);
        let combined = combine_sorted(&program, vec![msg(1, 2, 5), msg(1, 4, 3), msg(2, 3, 8)]);
        assert_eq!(combined, vec![msg(1, 2, 3), msg(2, 3, 8)]);
    }

    #[test]
    fn empty_shuffle_has_no_groups() {
        let (_d, dfs) = dfs();
        let program = Sssp::<f64>::new(0);
        let out = ShuffleWriter::new(&dfs, &program, true, 1, 0, 3, 10).finish().unwrap();
        assert!(out.runs.iter().all(Vec::is_empty));
        let mut merger = RunMerger::<Sssp>::open(&dfs, &[]).unwrap();
        assert!(merger.next_group().unwrap().is_none());
    }

    #[test]
    fn unsorted_run_is_a_fault() {
        let (_d, dfs) = dfs();
        let file = DfsFile::new(1, "spill-m0-s0", 0);
        let records: Vec<Record<Sssp>> = vec![
            ShuffleRecord::Message(msg(4, 0, 1)),
            ShuffleRecord::Message(msg(2, 0, 1)),
        ];
        dfs.write_records(&file, &records).unwrap();
        let mut merger = RunMerger::<Sssp>::open(&dfs, &[file]).unwrap();
        let err = loop {
            match merger.next_group() {
                Ok(Some(_)) => continue,
                Ok(None) => panic!("unsorted run accepted"),
                Err(e) => break e,
            }
        };
        assert!(matches!(err, EngineError::Fault(ref m) if m.contains("unsorted")), "{err}");
    }

    #[test]
    fn duplicate_vertex_record_is_a_fault() {
        let (_d, dfs) = dfs();
        let rec = VertexRecord { id: 1, state: Distance(0), active: true, edges: vec![Edge { target: 1, weight: 1.0 }] };
        let a = DfsFile::new(1, "self-m0", 0);
        let b = DfsFile::new(1, "self-m1", 0);
        dfs.write_records(&a, &[Record::<Sssp>::Vertex(rec.clone())]).unwrap();
        dfs.write_records(&b, &[Record::<Sssp>::Vertex(rec)]).unwrap();
        let mut merger = RunMerger::<Sssp>::open(&dfs, &[a, b]).unwrap();
        assert!(matches!(merger.next_group(), Err(EngineError::Fault(_))));
    }
}
