use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Message and structure traffic accumulated by one worker or one phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferLedger {
    pub msg_count: u64,
    pub msg_bytes: u64,
    /// Serialized adjacency data that crossed a phase boundary.
    pub structure_bytes: u64,
}

impl TransferLedger {
    pub fn merge(&mut self, other: &TransferLedger) {
        *self += *other;
    }
}

impl Add for TransferLedger {
    type Output = TransferLedger;
    fn add(self, rhs: TransferLedger) -> TransferLedger {
        TransferLedger {
            msg_count: self.msg_count + rhs.msg_count,
            msg_bytes: self.msg_bytes + rhs.msg_bytes,
            structure_bytes: self.structure_bytes + rhs.structure_bytes,
        }
    }
}

impl AddAssign for TransferLedger {
    fn add_assign(&mut self, rhs: TransferLedger) {
        *self = *self + rhs;
    }
}

impl Sum for TransferLedger {
    fn sum<I: Iterator<Item = TransferLedger>>(iter: I) -> Self {
        iter.fold(TransferLedger::default(), Add::add)
    }
}

const MIB: f64 = 1024.0 * 1024.0;

/// Injected delays that emulate slower networks and disks. Timing only:
/// results never depend on it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub network_secs_per_mib: f64,
    pub disk_secs_per_mib: f64,
}

impl CostModel {
    pub fn is_free(&self) -> bool {
        self.network_secs_per_mib <= 0.0 && self.disk_secs_per_mib <= 0.0
    }

    pub fn network_delay(&self, bytes: u64) -> Duration {
        delay(self.network_secs_per_mib, bytes)
    }

    pub fn disk_delay(&self, bytes: u64) -> Duration {
        delay(self.disk_secs_per_mib, bytes)
    }

    pub fn charge_network(&self, bytes: u64) {
        sleep(self.network_delay(bytes));
    }

    pub fn charge_disk(&self, bytes: u64) {
        sleep(self.disk_delay(bytes));
    }
}

fn delay(secs_per_mib: f64, bytes: u64) -> Duration {
    if secs_per_mib <= 0.0 || !secs_per_mib.is_finite() {
        return Duration::ZERO;
    }
    Duration::from_secs_f64(secs_per_mib * bytes as f64 / MIB)
}

fn sleep(d: Duration) {
    if !d.is_zero() {
        std::thread::sleep(d);
    }
}
