//! Simulated cluster substrate: worker pool, DFS, message routing and
//! transfer accounting.

mod dfs;
mod ledger;
mod pool;
mod routing;

pub use dfs::{DfsError, DfsFile, RecordReader, RecordWriter, SimulatedDfs, HEADER_LEN};
pub use ledger::{CostModel, TransferLedger};
pub use pool::{PhaseError, PoolError, WorkerPool};
pub use routing::{canonicalize, route_messages, Envelope};
