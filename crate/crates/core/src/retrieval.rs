//! Reading from the memory: pick the `K` stored views most relevant to a
//! batch of target cameras.
//!
//! The surfel strategy renders the store from the averaged target pose,
//! counts for every frame index how many pixels show a surfel observed by
//! that frame, and keeps the most frequent frames after pose NMS. Three
//! baselines rank views by recency, camera distance, or frustum overlap.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{average_pose, translation_distance, Camera, PoseSimilarity, MIN_DEPTH};
use crate::raster::{rasterize_ids, IdImage, EMPTY};
use crate::store::{SurfelStore, View};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Strategy {
    Vmem,
    Temporal,
    CameraDistance,
    Fov,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Vmem,
        Strategy::Temporal,
        Strategy::CameraDistance,
        Strategy::Fov,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Vmem => "vmem",
            Strategy::Temporal => "temporal",
            Strategy::CameraDistance => "camdist",
            Strategy::Fov => "fov",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vmem" => Ok(Strategy::Vmem),
            "temporal" => Ok(Strategy::Temporal),
            "camdist" | "camera_distance" => Ok(Strategy::CameraDistance),
            "fov" => Ok(Strategy::Fov),
            other => Err(Error::param(
                "strategy",
                alloc::format!("unknown strategy `{other}` (expected vmem, temporal, camdist or fov)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RetrievalConfig {
    pub k: usize,
    pub render_width: u32,
    pub render_height: u32,
    pub nms_rot_deg: f64,
    /// Fraction of the store's scene diagonal.
    pub nms_trans: f64,
    pub strategy: Strategy,
    /// Side of the pixel grid sampled by the field-of-view baseline.
    pub fov_grid: u32,
    /// Number of depth levels sampled by the field-of-view baseline.
    pub fov_depths: u32,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k: 4,
            render_width: 128,
            render_height: 128,
            nms_rot_deg: 15.0,
            nms_trans: 0.05,
            strategy: Strategy::Vmem,
            fov_grid: 16,
            fov_depths: 8,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        if self.render_width < 8 || self.render_height < 8 {
            return Err(Error::param("render_width/render_height", "must be at least 8"));
        }
        if !(self.nms_rot_deg >= 0.0) || !(self.nms_trans >= 0.0) {
            return Err(Error::param("nms_rot_deg/nms_trans", "must be nonnegative"));
        }
        if self.fov_grid == 0 || self.fov_depths < 2 {
            return Err(Error::param("fov_grid/fov_depths", "need at least 1 pixel and 2 depths"));
        }
        Ok(())
    }

    pub fn pose_similarity(&self, scene_diagonal: f64) -> PoseSimilarity {
        PoseSimilarity::from_degrees(self.nms_rot_deg, self.nms_trans * scene_diagonal)
    }
}

/// Average pose of the targets with the first target's intrinsics.
pub fn average_camera(targets: &[Camera]) -> Result<Camera> {
    let first = targets.first().ok_or(Error::EmptyPoseSet)?;
    let poses: Vec<_> = targets.iter().map(|c| c.pose).collect();
    Ok(Camera::new(average_pose(&poses)?, first.intrinsics))
}

/// Per-frame pixel counts: a pixel votes for every index of its nearest surfel.
pub fn frame_votes(image: &IdImage, store: &SurfelStore) -> BTreeMap<u32, u64> {
    let mut per_surfel: BTreeMap<u32, u64> = BTreeMap::new();
    for &id in &image.ids {
        if id != EMPTY {
            *per_surfel.entry(id).or_default() += 1;
        }
    }
    let mut votes: BTreeMap<u32, u64> = BTreeMap::new();
    for (id, n) in per_surfel {
        for &f in &store.surfel(id).views {
            *votes.entry(f).or_default() += n;
        }
    }
    votes
}

/// Frames ordered by descending vote count, ties to the higher frame index.
fn ranked(votes: &BTreeMap<u32, u64>) -> Vec<(u32, u64)> {
    let mut v: Vec<(u32, u64)> = votes.iter().map(|(&f, &n)| (f, n)).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(b.0.cmp(&a.0)));
    v
}

/// Top-`k` frames by pixel frequency after greedy pose NMS.
pub fn vote_topk(image: &IdImage, store: &SurfelStore, k: usize, cfg: &RetrievalConfig) -> Vec<u32> {
    let votes = frame_votes(image, store);
    let sim = cfg.pose_similarity(store.config().scene_diagonal);
    let mut kept: Vec<u32> = Vec::new();
    for (frame, _) in ranked(&votes) {
        if kept.len() == k {
            break;
        }
        let Some(cam) = store.camera_of(frame) else { continue };
        let suppressed = kept.iter().any(|&o| {
            store
                .camera_of(o)
                .is_some_and(|oc| sim.similar(&cam.pose, &oc.pose))
        });
        if !suppressed {
            kept.push(frame);
        }
    }
    kept
}

/// Frame indices selected by the surfel strategy.
pub fn vmem_frames(store: &SurfelStore, targets: &[Camera], cfg: &RetrievalConfig) -> Result<Vec<u32>> {
    if targets.is_empty() {
        return Err(Error::EmptyPoseSet);
    }
    let avg = average_camera(targets)?;
    if store.is_empty() {
        return Ok(store.views().keys().rev().take(cfg.k).copied().collect());
    }
    let cam = avg.with_resolution(cfg.render_width, cfg.render_height);
    let image = rasterize_ids(store, &cam);
    if store.views().len() <= cfg.k {
        // Every stored view fits: return all of them, voted frames first.
        let votes = frame_votes(&image, store);
        let mut out: Vec<u32> = ranked(&votes).into_iter().map(|(f, _)| f).collect();
        out.extend(store.views().keys().rev().filter(|f| !votes.contains_key(f)));
        return Ok(out);
    }
    Ok(vote_topk(&image, store, cfg.k, cfg))
}

/// The `k` most recent stored views.
pub fn baseline_temporal(store: &SurfelStore, k: usize) -> Vec<u32> {
    store.views().keys().rev().take(k).copied().collect()
}

/// The `k` stored views whose camera centers are nearest the averaged target center.
pub fn baseline_camera_distance(store: &SurfelStore, targets: &[Camera], k: usize) -> Result<Vec<u32>> {
    let c = average_camera(targets)?.pose.center();
    let mut scored: Vec<(u32, f64)> = store
        .views()
        .iter()
        .map(|(&f, v)| (f, translation_distance(v.camera.pose.center(), c)))
        .collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
    Ok(scored.into_iter().take(k).map(|(f, _)| f).collect())
}

/// Frustum sample points of `camera`: a `grid × grid` pixel lattice at
/// `depths` camera-frame depths spaced evenly in `[0.1, far]`.
pub fn frustum_samples(camera: &Camera, grid: u32, depths: u32, far: f64) -> Vec<crate::math::Vec3> {
    let k = &camera.intrinsics;
    let near = 0.1;
    let mut out = Vec::with_capacity((grid * grid * depths) as usize);
    for j in 0..grid {
        let v = (j as f64 + 0.5) / grid as f64 * k.height as f64;
        for i in 0..grid {
            let u = (i as f64 + 0.5) / grid as f64 * k.width as f64;
            for d in 0..depths {
                let z = near + (far - near) * d as f64 / (depths - 1) as f64;
                out.push(camera.unproject(u, v, z));
            }
        }
    }
    out
}

/// Number of `samples` that land inside `camera`'s image with positive depth.
pub fn frustum_hits(camera: &Camera, samples: &[crate::math::Vec3]) -> usize {
    let k = &camera.intrinsics;
    let rot = camera.pose.rotation_matrix();
    let c = camera.pose.center();
    samples
        .iter()
        .filter(|&&p| {
            let pc = rot.tr_mul_vec(p - c);
            if pc.z <= MIN_DEPTH {
                return false;
            }
            let u = k.focal * pc.x / pc.z + k.cx;
            let v = k.focal * pc.y / pc.z + k.cy;
            u >= 0.0 && u < k.width as f64 && v >= 0.0 && v < k.height as f64
        })
        .count()
}

/// Frustum-overlap scores in `[0, 1]` for every stored view.
pub fn fov_scores(store: &SurfelStore, targets: &[Camera], cfg: &RetrievalConfig) -> Result<Vec<(u32, f64)>> {
    if targets.is_empty() {
        return Err(Error::EmptyPoseSet);
    }
    let avg = average_camera(targets)?;
    let far = store.config().scene_diagonal.max(0.2);
    let samples = frustum_samples(&avg, cfg.fov_grid, cfg.fov_depths, far);
    let n = samples.len() as f64;
    Ok(store
        .views()
        .iter()
        .map(|(&f, v)| (f, frustum_hits(&v.camera, &samples) as f64 / n))
        .collect())
}

/// The `k` stored views with the largest frustum overlap with the averaged target.
pub fn baseline_fov(store: &SurfelStore, targets: &[Camera], cfg: &RetrievalConfig) -> Result<Vec<u32>> {
    let mut scored = fov_scores(store, targets, cfg)?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(b.0.cmp(&a.0)));
    Ok(scored.into_iter().take(cfg.k).map(|(f, _)| f).collect())
}

/// Frame indices chosen by the configured strategy.
pub fn retrieve_frames(store: &SurfelStore, targets: &[Camera], cfg: &RetrievalConfig) -> Result<Vec<u32>> {
    cfg.validate()?;
    if targets.is_empty() {
        return Err(Error::EmptyPoseSet);
    }
    match cfg.strategy {
        Strategy::Vmem => vmem_frames(store, targets, cfg),
        Strategy::Temporal => Ok(baseline_temporal(store, cfg.k)),
        Strategy::CameraDistance => baseline_camera_distance(store, targets, cfg.k),
        Strategy::Fov => baseline_fov(store, targets, cfg),
    }
}

/// Context views for the target cameras under the configured strategy.
pub fn read_memory<'a>(store: &'a SurfelStore, targets: &[Camera], cfg: &RetrievalConfig) -> Result<Vec<&'a View>> {
    Ok(retrieve_frames(store, targets, cfg)?
        .into_iter()
        .filter_map(|f| store.view(f))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraPose, Intrinsics, Quaternion};
    use crate::math::Vec3;
    use crate::store::{MergeConfig, RgbImage, Surfel};

    fn cam_at(x: f64) -> Camera {
        Camera::new(
            CameraPose::new(Quaternion::IDENTITY, Vec3::new(x, 0.0, 0.0)),
            Intrinsics::centered(32.0, 32, 32).unwrap(),
        )
    }

    /// Store holding view records only; write-side NMS is disabled so
    /// pose-similar frames survive.
    fn store_with_views(frames: &[(u32, Camera)]) -> SurfelStore {
        let mut s = SurfelStore::new(MergeConfig {
            scene_diagonal: 10.0,
            view_nms_trans: 0.0,
            ..MergeConfig::default()
        })
        .unwrap();
        let views: Vec<View> = frames
            .iter()
            .map(|&(f, camera)| View {
                frame_index: f,
                image: RgbImage::new(32, 32),
                camera,
            })
            .collect();
        let pms: Vec<_> = frames
            .iter()
            .map(|_| crate::geometry::PointMap::new(32, 32))
            .collect();
        s.write_views(views, &pms).unwrap();
        s
    }

    /// One surfel per `(frame, pixels)` entry, covering that many pixels.
    fn voted_store(frames: &[(u32, Camera)], pixels: &[(u32, usize)]) -> (SurfelStore, IdImage) {
        let mut s = store_with_views(frames);
        let total: usize = pixels.iter().map(|p| p.1).sum();
        let mut img = IdImage::empty(total as u32, 1);
        let mut px = 0;
        for (i, &(f, n)) in pixels.iter().enumerate() {
            s.insert_or_merge(Surfel::new(Vec3::new(i as f64 * 10.0, 0.0, 5.0), Vec3::Z, 0.1, f));
            for _ in 0..n {
                img.ids[px] = i as u32;
                img.depth[px] = 1.0;
                px += 1;
            }
        }
        (s, img)
    }

    #[test]
    fn votes_rank_by_frequency() {
        let frames = [(1, cam_at(0.0)), (3, cam_at(5.0))];
        let (s, img) = voted_store(&frames, &[(3, 10), (1, 4)]);
        assert_eq!(vote_topk(&img, &s, 2, &RetrievalConfig::default()), [3, 1]);
    }

    #[test]
    fn equal_votes_prefer_recent() {
        let frames = [(1, cam_at(0.0)), (2, cam_at(5.0))];
        let (s, img) = voted_store(&frames, &[(1, 4), (2, 4)]);
        assert_eq!(vote_topk(&img, &s, 2, &RetrievalConfig::default()), [2, 1]);
    }

    #[test]
    fn nms_drops_similar_runner_up() {
        // frames 4 and 5 sit 0.1 apart (< 0.05 · 10) with equal rotation
        let frames = [(1, cam_at(8.0)), (4, cam_at(0.1)), (5, cam_at(0.0))];
        let (s, img) = voted_store(&frames, &[(5, 10), (4, 9), (1, 3)]);
        assert_eq!(vote_topk(&img, &s, 2, &RetrievalConfig::default()), [5, 1]);
    }

    #[test]
    fn temporal_takes_most_recent() {
        let frames: Vec<(u32, Camera)> = (1..=10).map(|f| (f, cam_at(f as f64))).collect();
        let s = store_with_views(&frames);
        assert_eq!(baseline_temporal(&s, 4), [10, 9, 8, 7]);
        assert_eq!(baseline_temporal(&s, 40).len(), 10);
    }

    #[test]
    fn camera_distance_ranks_nearest_then_recent() {
        let frames = [(1, cam_at(1.0)), (2, cam_at(3.0)), (3, cam_at(2.0))];
        let s = store_with_views(&frames);
        assert_eq!(baseline_camera_distance(&s, &[cam_at(0.0)], 2).unwrap(), [1, 3]);
        let ring = [(1, cam_at(1.0)), (2, cam_at(-1.0)), (3, cam_at(1.0))];
        let s = store_with_views(&ring);
        assert_eq!(baseline_camera_distance(&s, &[cam_at(0.0)], 2).unwrap(), [3, 2]);
    }

    #[test]
    fn fov_identity_and_opposite() {
        let back = Camera::new(
            CameraPose::new(Quaternion::from_axis_angle(Vec3::Y, core::f64::consts::PI), Vec3::ZERO),
            Intrinsics::centered(32.0, 32, 32).unwrap(),
        );
        let frames = [(1, cam_at(0.0)), (2, back)];
        let s = store_with_views(&frames);
        let scores = fov_scores(&s, &[cam_at(0.0)], &RetrievalConfig::default()).unwrap();
        assert_eq!(scores, [(1, 1.0), (2, 0.0)]);
        assert_eq!(baseline_fov(&s, &[cam_at(0.0)], &RetrievalConfig::default()).unwrap()[0], 1);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("nearest".parse::<Strategy>().is_err());
    }
}
