//! Surfel-indexed view memory for camera-conditioned scene exploration.
//!
//! Stored views are indexed by the oriented disks (surfels) they observed.
//! Retrieval renders the surfels from the upcoming cameras and picks the
//! views that observed most of what is visible. The crate is `no_std` with
//! `alloc`; file formats and the command line live in the `vmem` crate.

#![no_std]

extern crate alloc;

pub mod error;
pub mod geometry;
pub mod harness;
pub mod math;
pub mod octree;
pub mod raster;
pub mod registration;
pub mod retrieval;
pub mod store;
pub mod world;

pub use error::{Error, Result};
pub use geometry::{Camera, CameraPose, Intrinsics, PointMap, Quaternion};
pub use math::Vec3;
pub use retrieval::{read_memory, RetrievalConfig, Strategy};
pub use store::{MergeConfig, RgbImage, Surfel, SurfelStore, View, WriteReport};
