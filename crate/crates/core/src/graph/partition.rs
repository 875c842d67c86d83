use super::VertexId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PartitionId(pub usize);

impl PartitionId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Assigns a vertex to one of `num_partitions` hosts.
///
/// The function is `id mod num_partitions`. This is the wire-stable
/// contract: every engine, file layout and external tool must agree on it.
///
/// # Panics
///
/// Panics if `num_partitions` is zero.
#[inline]
pub fn hash_partition(v: VertexId, num_partitions: usize) -> PartitionId {
    assert!(num_partitions >= 1, "num_partitions must be at least 1");
    PartitionId((v % num_partitions as u64) as usize)
}
