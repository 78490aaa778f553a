//! The surfel-indexed view memory.
//!
//! A [`SurfelStore`] keeps oriented disks (surfels), each tagged with the
//! sorted set of frame indices that observed it, an octree over the surfel
//! centers, and the table of stored views. Writing converts point maps to
//! surfels and merges them into the store; view NMS then drops the images
//! of views that have a newer near-duplicate.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{
    compute_normal, compute_radius, downsample_pointmap, Camera, PointMap, PoseSimilarity,
};
use crate::math::Vec3;
use crate::octree::{Octree, OctreeConfig};

/// Oriented disk with the frame indices that observed it (sorted, unique).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Surfel {
    pub position: Vec3,
    pub normal: Vec3,
    pub radius: f64,
    pub views: Vec<u32>,
}

impl Surfel {
    pub fn new(position: Vec3, normal: Vec3, radius: f64, frame: u32) -> Self {
        Self {
            position,
            normal,
            radius,
            views: alloc::vec![frame],
        }
    }

    pub fn validate(&self) -> core::result::Result<(), String> {
        if !self.position.is_finite() {
            return Err("non-finite position".into());
        }
        let n = self.normal.norm();
        if !((n - 1.0).abs() <= 1e-6) {
            return Err(format!("normal not unit (norm {n})"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(format!("radius {} not positive", self.radius));
        }
        if self.views.is_empty() {
            return Err("empty view index set".into());
        }
        if self.views.windows(2).any(|w| w[0] >= w[1]) {
            return Err("view indices not strictly ascending".into());
        }
        if self.views[0] == 0 {
            return Err("frame index 0".into());
        }
        Ok(())
    }

    fn add_view(&mut self, frame: u32) {
        if let Err(pos) = self.views.binary_search(&frame) {
            self.views.insert(pos, frame);
        }
    }
}

/// 8-bit RGB image, row-major, 3 bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: alloc::vec![0; width as usize * height as usize * 3],
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// An image and the camera that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub frame_index: u32,
    pub image: RgbImage,
    pub camera: Camera,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MergeConfig {
    /// Merge distance as a multiple of the smaller surfel radius.
    pub merge_distance_scale: f64,
    /// Minimum normal cosine for two surfels to merge.
    pub normal_cos_threshold: f64,
    pub view_nms_rot_deg: f64,
    /// Translation threshold for view NMS as a fraction of `scene_diagonal`.
    pub view_nms_trans: f64,
    /// Point-map scale factor.
    pub sigma: f64,
    /// Radius blend factor.
    pub alpha: f64,
    /// World-space length that relative translation thresholds refer to.
    pub scene_diagonal: f64,
}

impl Default for MergeConfig {
    fn default() -> Self {
        Self {
            merge_distance_scale: 1.0,
            normal_cos_threshold: 0.866,
            view_nms_rot_deg: 15.0,
            view_nms_trans: 0.05,
            sigma: 0.03,
            alpha: 0.2,
            scene_diagonal: 1.0,
        }
    }
}

impl MergeConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.merge_distance_scale) {
            return Err(Error::param("merge_distance_scale", "must be positive"));
        }
        // Values above 1 are allowed: they disable merging.
        if !(self.normal_cos_threshold > -1.0) || self.normal_cos_threshold.is_nan() {
            return Err(Error::param("normal_cos_threshold", "must exceed -1"));
        }
        if !(self.view_nms_rot_deg >= 0.0) {
            return Err(Error::param("view_nms_rot_deg", "must be nonnegative"));
        }
        if !(self.view_nms_trans >= 0.0) {
            return Err(Error::param("view_nms_trans", "must be nonnegative"));
        }
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return Err(Error::param("sigma", "must lie in (0, 1]"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::param("alpha", "must lie in (0, 1]"));
        }
        if !pos(self.scene_diagonal) {
            return Err(Error::param("scene_diagonal", "must be positive"));
        }
        Ok(())
    }

    pub fn pose_similarity(&self) -> PoseSimilarity {
        PoseSimilarity::from_degrees(
            self.view_nms_rot_deg,
            self.view_nms_trans * self.scene_diagonal,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeOutcome {
    Merged(u32),
    Inserted(u32),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WriteReport {
    pub candidates: usize,
    pub surfels_added: usize,
    pub surfels_merged: usize,
    pub discarded_views: Vec<u32>,
    pub surfels_removed: usize,
}

/// Plain-data image of a store, the unit of persistence.
#[derive(Debug, Clone, PartialEq)]
pub struct MemorySnapshot {
    pub config: MergeConfig,
    pub octree: OctreeConfig,
    pub next_frame: u32,
    pub surfels: Vec<Surfel>,
    pub views: Vec<View>,
    /// Pose records of views whose images were dropped by NMS.
    pub discarded: Vec<(u32, Camera)>,
}

#[derive(Debug, Clone)]
pub struct SurfelStore {
    config: MergeConfig,
    surfels: Vec<Surfel>,
    octree: Octree,
    views: BTreeMap<u32, View>,
    discarded: BTreeMap<u32, Camera>,
    next_frame: u32,
}

impl SurfelStore {
    pub fn new(config: MergeConfig) -> Result<Self> {
        Self::with_octree(config, OctreeConfig::default())
    }

    pub fn with_octree(config: MergeConfig, octree: OctreeConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            surfels: Vec::new(),
            octree: Octree::new(octree),
            views: BTreeMap::new(),
            discarded: BTreeMap::new(),
            next_frame: 1,
        })
    }

    pub fn config(&self) -> &MergeConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.surfels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfels.is_empty()
    }

    pub fn surfels(&self) -> &[Surfel] {
        &self.surfels
    }

    pub fn surfel(&self, id: u32) -> &Surfel {
        &self.surfels[id as usize]
    }

    pub fn octree(&self) -> &Octree {
        &self.octree
    }

    pub fn next_frame(&self) -> u32 {
        self.next_frame
    }

    /// Views whose images are still held, keyed by frame index.
    pub fn views(&self) -> &BTreeMap<u32, View> {
        &self.views
    }

    pub fn view(&self, frame: u32) -> Option<&View> {
        self.views.get(&frame)
    }

    /// Pose records of NMS-discarded views.
    pub fn discarded(&self) -> &BTreeMap<u32, Camera> {
        &self.discarded
    }

    /// Camera of any frame ever written, retained or discarded.
    pub fn camera_of(&self, frame: u32) -> Option<&Camera> {
        self.views
            .get(&frame)
            .map(|v| &v.camera)
            .or_else(|| self.discarded.get(&frame))
    }

    /// Surfel ids with `|p - center| <= radius`, ascending.
    pub fn radius_query(&self, center: Vec3, radius: f64) -> Vec<u32> {
        self.octree.radius_query(center, radius)
    }

    /// Merges `candidate` into the nearest compatible surfel or appends it.
    pub fn insert_or_merge(&mut self, candidate: Surfel) -> MergeOutcome {
        let kappa = self.config.merge_distance_scale;
        let theta = self.config.normal_cos_threshold;
        let mut best: Option<(f64, u32)> = None;
        self.octree
            .for_each_within(candidate.position, kappa * candidate.radius, |id, d2| {
                let existing = &self.surfels[id as usize];
                let d = kappa * existing.radius.min(candidate.radius);
                if d2 > d * d || existing.normal.dot(candidate.normal) <= theta {
                    return;
                }
                let better = match best {
                    None => true,
                    Some((bd, bid)) => d2 < bd || (d2 == bd && id < bid),
                };
                if better {
                    best = Some((d2, id));
                }
            });
        match best {
            Some((_, id)) => {
                let target = &mut self.surfels[id as usize];
                for &f in &candidate.views {
                    target.add_view(f);
                }
                MergeOutcome::Merged(id)
            }
            None => {
                let id = self.octree.push(candidate.position);
                debug_assert_eq!(id as usize, self.surfels.len());
                self.surfels.push(candidate);
                MergeOutcome::Inserted(id)
            }
        }
    }

    /// Candidate surfels for one view: one per valid interior pixel of the
    /// downsampled point map that yields a normal and radius.
    pub fn surfels_from_pointmap(&self, frame: u32, camera: &Camera, pm: &PointMap) -> Result<Vec<Surfel>> {
        let ds = downsample_pointmap(pm, self.config.sigma)?;
        // Focal length of the downsampled grid.
        let focal = camera.intrinsics.focal * ds.width as f64 / pm.width as f64;
        let center = camera.pose.center();
        let rot = camera.pose.rotation_matrix();
        let mut out = Vec::new();
        for v in 1..ds.height.saturating_sub(1) {
            for u in 1..ds.width.saturating_sub(1) {
                let Some(p) = ds.get(u, v) else { continue };
                let Ok(normal) = compute_normal(&ds, u, v, center) else {
                    continue;
                };
                let depth = rot.tr_mul_vec(p - center).z;
                let Ok(radius) = compute_radius(depth, focal, normal, p, center, self.config.alpha)
                else {
                    continue;
                };
                out.push(Surfel::new(p, normal, radius, frame));
            }
        }
        Ok(out)
    }

    fn validate_batch(&self, views: &[View], pointmaps: &[PointMap]) -> Result<()> {
        if views.len() != pointmaps.len() {
            return Err(Error::CountMismatch {
                views: views.len(),
                pointmaps: pointmaps.len(),
            });
        }
        for (i, (view, pm)) in views.iter().zip(pointmaps).enumerate() {
            let f = view.frame_index;
            if f == 0 {
                return Err(Error::InvalidView {
                    frame: f,
                    reason: "frame indices start at 1".into(),
                });
            }
            if self.views.contains_key(&f)
                || self.discarded.contains_key(&f)
                || views[..i].iter().any(|o| o.frame_index == f)
            {
                return Err(Error::FrameCollision(f));
            }
            let k = &view.camera.intrinsics;
            k.validate()?;
            let bad = |reason: String| Error::InvalidView { frame: f, reason };
            if view.image.width != k.width
                || view.image.height != k.height
                || view.image.data.len() != k.pixel_count() * 3
            {
                return Err(bad(format!(
                    "image {}x{} does not match intrinsics {}x{}",
                    view.image.width, view.image.height, k.width, k.height
                )));
            }
            if pm.width != k.width as usize || pm.height != k.height as usize {
                return Err(bad(format!(
                    "point map {}x{} does not match intrinsics {}x{}",
                    pm.width, pm.height, k.width, k.height
                )));
            }
            pm.validate()?;
        }
        Ok(())
    }

    /// Writes a batch of new views with their world-frame point maps, then
    /// runs view NMS against the batch.
    pub fn write_views(&mut self, views: Vec<View>, pointmaps: &[PointMap]) -> Result<WriteReport> {
        self.validate_batch(&views, pointmaps)?;
        let mut report = WriteReport::default();
        let mut new_frames = Vec::with_capacity(views.len());
        for (view, pm) in views.into_iter().zip(pointmaps) {
            let frame = view.frame_index;
            let candidates = self.surfels_from_pointmap(frame, &view.camera, pm)?;
            report.candidates += candidates.len();
            for c in candidates {
                match self.insert_or_merge(c) {
                    MergeOutcome::Merged(_) => report.surfels_merged += 1,
                    MergeOutcome::Inserted(_) => report.surfels_added += 1,
                }
            }
            self.next_frame = self.next_frame.max(frame + 1);
            self.views.insert(frame, view);
            new_frames.push(frame);
        }
        let discarded = self.nms_against(&new_frames);
        report.surfels_removed = self.discard(&discarded);
        report.discarded_views = discarded;
        Ok(report)
    }

    /// Frames among the retained views that have a newer pose-similar view,
    /// checking only pairs that involve at least one of `new_frames`.
    fn nms_against(&self, new_frames: &[u32]) -> Vec<u32> {
        let sim = self.config.pose_similarity();
        let mut out = Vec::new();
        for (&f, view) in &self.views {
            let suppressed = new_frames.iter().any(|&n| {
                n > f && sim.similar(&view.camera.pose, &self.views[&n].camera.pose)
            });
            if suppressed {
                out.push(f);
            }
        }
        out
    }

    /// Full pairwise view NMS: every retained view with a newer pose-similar
    /// retained view is discarded. Returns the discarded frames, ascending.
    pub fn view_nms_on_write(&mut self) -> Vec<u32> {
        let sim = self.config.pose_similarity();
        let frames: Vec<(u32, Camera)> = self.views.iter().map(|(&f, v)| (f, v.camera)).collect();
        let discarded: Vec<u32> = frames
            .iter()
            .filter(|(f, cam)| {
                frames
                    .iter()
                    .any(|(g, other)| g > f && sim.similar(&cam.pose, &other.pose))
            })
            .map(|(f, _)| *f)
            .collect();
        self.discard(&discarded);
        discarded
    }

    /// Drops images of `frames`, strips them from every surfel and removes
    /// surfels left without views. Returns the number of removed surfels.
    fn discard(&mut self, frames: &[u32]) -> usize {
        if frames.is_empty() {
            return 0;
        }
        for f in frames {
            if let Some(v) = self.views.remove(f) {
                self.discarded.insert(*f, v.camera);
            }
        }
        let before = self.surfels.len();
        for s in &mut self.surfels {
            s.views.retain(|v| frames.binary_search(v).is_err());
        }
        self.surfels.retain(|s| !s.views.is_empty());
        let removed = before - self.surfels.len();
        if removed > 0 {
            self.rebuild_octree();
        }
        removed
    }

    fn rebuild_octree(&mut self) {
        self.octree = Octree::build(*self.octree.config(), self.surfels.iter().map(|s| s.position));
    }

    /// Checks every structural invariant of the store.
    pub fn check_invariants(&self) -> core::result::Result<(), String> {
        if self.octree.len() != self.surfels.len() || !self.octree.check_consistency() {
            return Err("octree out of sync with surfel list".into());
        }
        for (i, s) in self.surfels.iter().enumerate() {
            s.validate().map_err(|e| format!("surfel {i}: {e}"))?;
            if self.octree.position(i as u32) != s.position {
                return Err(format!("surfel {i}: octree position mismatch"));
            }
            if let Some(f) = s.views.iter().find(|f| !self.views.contains_key(f)) {
                return Err(format!("surfel {i}: frame {f} not in view table"));
            }
        }
        if let Some(f) = self.views.keys().find(|f| self.discarded.contains_key(f)) {
            return Err(format!("frame {f} both retained and discarded"));
        }
        let max_frame = self
            .views
            .keys()
            .chain(self.discarded.keys())
            .max()
            .copied()
            .unwrap_or(0);
        if self.next_frame <= max_frame {
            return Err(format!("next_frame {} not past frame {max_frame}", self.next_frame));
        }
        Ok(())
    }

    pub fn snapshot(&self) -> MemorySnapshot {
        MemorySnapshot {
            config: self.config,
            octree: *self.octree.config(),
            next_frame: self.next_frame,
            surfels: self.surfels.clone(),
            views: self.views.values().cloned().collect(),
            discarded: self.discarded.iter().map(|(&f, c)| (f, *c)).collect(),
        }
    }

    /// Rebuilds a store from a snapshot, validating every invariant.
    pub fn restore(snapshot: MemorySnapshot) -> Result<Self> {
        snapshot.config.validate()?;
        let mut views = BTreeMap::new();
        for v in snapshot.views {
            v.camera.intrinsics.validate()?;
            let f = v.frame_index;
            if views.insert(f, v).is_some() {
                return Err(Error::InvalidSnapshot(format!("duplicate view record {f}")));
            }
        }
        let discarded: BTreeMap<u32, Camera> = snapshot.discarded.into_iter().collect();
        let store = Self {
            config: snapshot.config,
            octree: Octree::build(snapshot.octree, snapshot.surfels.iter().map(|s| s.position)),
            surfels: snapshot.surfels,
            views,
            discarded,
            next_frame: snapshot.next_frame,
        };
        store
            .check_invariants()
            .map_err(Error::InvalidSnapshot)?;
        Ok(store)
    }
}
