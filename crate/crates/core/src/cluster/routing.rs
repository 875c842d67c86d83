use super::TransferLedger;
use crate::codec::Wire;
use crate::graph::{hash_partition, VertexId};

/// A message in flight. `source` orders messages before they are applied.
#[derive(Clone, Debug, PartialEq)]
pub struct Envelope<M> {
    pub dest: VertexId,
    pub source: VertexId,
    pub payload: M,
}

impl<M: Wire> Envelope<M> {
    /// Accounted size: destination id, source id, payload.
    pub fn wire_len(&self) -> usize {
        16 + self.payload.encoded_len()
    }
}

/// Splits messages by destination partition.
///
/// Each bucket is sorted by `(dest, source)`. A message whose source and
/// destination share a partition is delivered locally and adds nothing to
/// `msg_bytes`; `msg_count` counts every message.
pub fn route_messages<M: Wire>(
    messages: Vec<Envelope<M>>,
    num_partitions: usize,
) -> (Vec<Vec<Envelope<M>>>, TransferLedger) {
    let mut buckets: Vec<Vec<Envelope<M>>> = (0..num_partitions).map(|_| Vec::new()).collect();
    let mut ledger = TransferLedger::default();
    for m in messages {
        let to = hash_partition(m.dest, num_partitions);
        ledger.msg_count += 1;
        if hash_partition(m.source, num_partitions) != to {
            ledger.msg_bytes += m.wire_len() as u64;
        }
        buckets[to.index()].push(m);
    }
    for bucket in &mut buckets {
        canonicalize(bucket);
    }
    (buckets, ledger)
}

/// Stable sort by `(dest, source)`.
pub fn canonicalize<M>(messages: &mut [Envelope<M>]) {
    messages.sort_by_key(|m| (m.dest, m.source));
}
