//! Configuration, snapshots and CSV tables.

pub mod config;
pub mod ovf;
pub mod tables;

pub use ovf::{read_snapshot, write_snapshot, Snapshot};
pub use tables::{CsvObserver, SnapshotObserver};
