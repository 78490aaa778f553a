//! Owned memory handle: the write/read/save/load surface used by foreign bindings.

use std::path::Path;

use vmem_core::geometry::{Camera, PointMap};
use vmem_core::{read_memory, MergeConfig, RetrievalConfig, RgbImage, SurfelStore, View, WriteReport};

use crate::error::Result;
use crate::snapshot::{load_snapshot, save_snapshot};

#[derive(Debug, Clone)]
pub struct Memory {
    store: SurfelStore,
    retrieval: RetrievalConfig,
}

impl Memory {
    pub fn new(merge: MergeConfig, retrieval: RetrievalConfig) -> Result<Self> {
        retrieval.validate()?;
        Ok(Self {
            store: SurfelStore::new(merge)?,
            retrieval,
        })
    }

    pub fn store(&self) -> &SurfelStore {
        &self.store
    }

    pub fn retrieval(&self) -> &RetrievalConfig {
        &self.retrieval
    }

    pub fn surfel_count(&self) -> usize {
        self.store.len()
    }

    /// Writes a batch of frames under consecutive indices starting at the
    /// store's next frame. An empty batch is a no-op.
    pub fn write(&mut self, images: Vec<RgbImage>, cameras: &[Camera], pointmaps: &[PointMap]) -> Result<WriteReport> {
        if images.is_empty() && cameras.is_empty() && pointmaps.is_empty() {
            return Ok(WriteReport::default());
        }
        if images.len() != cameras.len() {
            return Err(vmem_core::Error::CountMismatch {
                views: cameras.len(),
                pointmaps: images.len(),
            }
            .into());
        }
        let first = self.store.next_frame();
        let views = images
            .into_iter()
            .zip(cameras)
            .enumerate()
            .map(|(i, (image, &camera))| View {
                frame_index: first + i as u32,
                image,
                camera,
            })
            .collect();
        Ok(self.store.write_views(views, pointmaps)?)
    }

    /// Context views for the target cameras, best first.
    pub fn read(&self, targets: &[Camera]) -> Result<Vec<&View>> {
        Ok(read_memory(&self.store, targets, &self.retrieval)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_snapshot(&self.store, &self.retrieval, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (store, retrieval) = load_snapshot(path)?;
        Ok(Self { store, retrieval })
    }
}
