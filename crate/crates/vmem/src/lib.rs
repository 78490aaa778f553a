//! File formats, snapshots and the command-line driver for the surfel view memory.

pub mod cli;
pub mod error;
pub mod formats;
pub mod fsio;
pub mod images;
pub mod memory;
pub mod report;
pub mod snapshot;

pub use error::{Result, VmemError};
pub use memory::Memory;
pub use snapshot::{load_snapshot, save_snapshot, save_snapshot_with, SaveOptions};
