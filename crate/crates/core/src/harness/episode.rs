use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{Camera, CameraPose, PointMap};
use crate::registration::register_rigid;
use crate::retrieval::{retrieve_frames, RetrievalConfig};
use crate::store::{MergeConfig, SurfelStore, View, WriteReport};
use crate::world::{self, perturb_depth, render, NoiseParams, RenderOutput, Scene};

use super::trajectory::Trajectory;

/// Millisecond timer used for step timings.
pub trait Clock {
    fn now_ms(&self) -> f64;
}

/// Clock that always reads zero; keeps logs reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&self) -> f64 {
        0.0
    }
}

/// Source of context frames for each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Retriever {
    /// The memory's own `read_memory` under the configured strategy.
    Memory,
    /// Ground-truth ranking: retained views by mean overlap with the targets.
    RelevanceOracle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpisodeConfig {
    pub retrieval: RetrievalConfig,
    pub merge: MergeConfig,
    pub noise: NoiseParams,
    pub retriever: Retriever,
    /// Ray grid side used by the coverage oracle.
    pub oracle_grid: u32,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            retrieval: RetrievalConfig::default(),
            merge: MergeConfig::default(),
            noise: NoiseParams::NONE,
            retriever: Retriever::Memory,
            oracle_grid: world::DEFAULT_GRID,
        }
    }
}

impl EpisodeConfig {
    pub fn label(&self) -> &'static str {
        match self.retriever {
            Retriever::Memory => self.retrieval.strategy.name(),
            Retriever::RelevanceOracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub step: usize,
    pub frames: Vec<u32>,
    pub retrieved: Vec<u32>,
    /// Coverage of each generated frame by the retrieved views, same order as `frames`.
    pub coverage: Vec<f64>,
    /// Poses recovered by registering each frame's camera-frame geometry onto its written point map.
    pub realized: Vec<CameraPose>,
    pub surfel_count: usize,
    pub retained_views: usize,
    pub write: WriteReport,
    pub retrieval_ms: f64,
    pub write_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpisodeLog {
    pub scene: alloc::string::String,
    pub trajectory: alloc::string::String,
    pub config: EpisodeConfig,
    pub input_realized: CameraPose,
    pub input_surfels: usize,
    pub steps: Vec<StepRecord>,
}

impl EpisodeLog {
    /// Generated frame indices in order.
    pub fn frames(&self) -> impl Iterator<Item = u32> + '_ {
        self.steps.iter().flat_map(|s| s.frames.iter().copied())
    }
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub log: EpisodeLog,
    pub store: SurfelStore,
}

/// Aborted episode: the log up to the failing step plus the cause.
#[derive(Debug, Clone)]
pub struct EpisodeFailure {
    pub partial: EpisodeLog,
    pub error: Error,
}

impl core::fmt::Display for EpisodeFailure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "episode aborted after {} steps: {}", self.partial.steps.len(), self.error)
    }
}

/// Frame index of trajectory camera `i`; the input view is frame 1.
pub fn frame_of(i: usize) -> u32 {
    i as u32 + 1
}

/// Stride of the pixel subsample used for pose registration.
const REGISTRATION_STRIDE: usize = 8;

/// Pose that maps clean camera-frame geometry onto the written point map.
fn realized_pose(clean: &RenderOutput, written: &PointMap, camera: &Camera) -> CameraPose {
    let w = written.width;
    let local = Camera::new(CameraPose::IDENTITY, camera.intrinsics);
    let mut src = Vec::new();
    let mut dst = Vec::new();
    for y in (0..written.height).step_by(REGISTRATION_STRIDE) {
        for x in (0..w).step_by(REGISTRATION_STRIDE) {
            let i = y * w + x;
            if let Some(p) = written.get(x, y) {
                src.push(local.unproject(x as f64 + 0.5, y as f64 + 0.5, clean.depth[i]));
                dst.push(p);
            }
        }
    }
    register_rigid(&src, &dst).unwrap_or(camera.pose)
}

/// Renders frame `frame` as the stand-in generator output.
fn generate(scene: &Scene, camera: &Camera, noise: &NoiseParams, frame: u32) -> (View, PointMap, CameraPose) {
    let clean = render(scene, camera);
    let out = perturb_depth(&clean, camera, noise, frame);
    let realized = realized_pose(&clean, &out.pointmap, camera);
    let view = View {
        frame_index: frame,
        image: out.rgb,
        camera: *camera,
    };
    (view, out.pointmap, realized)
}

fn oracle_frames(scene: &Scene, store: &SurfelStore, targets: &[Camera], cfg: &EpisodeConfig) -> Result<Vec<u32>> {
    let frames: Vec<u32> = store.views().keys().copied().collect();
    let cams: Vec<Camera> = store.views().values().map(|v| v.camera).collect();
    let mut score = alloc::vec![0.0; frames.len()];
    for t in targets {
        let ranked = match world::relevance_oracle(scene, t, &cams, cfg.oracle_grid) {
            Ok(r) => r,
            Err(Error::BlindTarget) => continue,
            Err(e) => return Err(e),
        };
        for (i, s) in ranked {
            score[i] += s;
        }
    }
    let mut order: Vec<usize> = (0..frames.len()).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(frames[b].cmp(&frames[a])));
    Ok(order.into_iter().take(cfg.retrieval.k).map(|i| frames[i]).collect())
}

/// Coverage of `target` by the cameras of `frames`; a blind target counts as fully covered.
fn frame_coverage(scene: &Scene, store: &SurfelStore, target: &Camera, frames: &[u32], grid: u32) -> Result<f64> {
    let chosen: Vec<Camera> = frames.iter().filter_map(|&f| store.camera_of(f).copied()).collect();
    match world::coverage(scene, target, &chosen, grid) {
        Err(Error::BlindTarget) => Ok(1.0),
        other => other,
    }
}

/// Runs the read → generate → write loop over `trajectory`.
pub fn run_exploration(
    scene: &Scene,
    trajectory: &Trajectory,
    config: &EpisodeConfig,
    clock: &dyn Clock,
) -> core::result::Result<Episode, EpisodeFailure> {
    let mut cfg = *config;
    cfg.merge.scene_diagonal = scene.diagonal();
    let mut log = EpisodeLog {
        scene: scene.name().into(),
        trajectory: trajectory.name.clone(),
        config: cfg,
        input_realized: CameraPose::IDENTITY,
        input_surfels: 0,
        steps: Vec::new(),
    };
    let fail = |log: &EpisodeLog, error: Error| EpisodeFailure {
        partial: log.clone(),
        error,
    };
    let setup = trajectory
        .validate()
        .and_then(|_| cfg.retrieval.validate())
        .and_then(|_| cfg.noise.validate())
        .and_then(|_| SurfelStore::new(cfg.merge));
    let mut store = setup.map_err(|e| fail(&log, e))?;

    let (view, pm, realized) = generate(scene, &trajectory.cameras[0], &cfg.noise, 1);
    store.write_views(alloc::vec![view], &[pm]).map_err(|e| fail(&log, e))?;
    log.input_realized = realized;
    log.input_surfels = store.len();

    for (s, range) in trajectory.steps().enumerate() {
        let targets = &trajectory.cameras[range.clone()];
        let t0 = clock.now_ms();
        let retrieved = match cfg.retriever {
            Retriever::Memory => retrieve_frames(&store, targets, &cfg.retrieval),
            Retriever::RelevanceOracle => oracle_frames(scene, &store, targets, &cfg),
        }
        .map_err(|e| fail(&log, e))?;
        let retrieval_ms = clock.now_ms() - t0;

        let mut coverage = Vec::with_capacity(targets.len());
        for t in targets {
            coverage.push(frame_coverage(scene, &store, t, &retrieved, cfg.oracle_grid).map_err(|e| fail(&log, e))?);
        }

        let mut views = Vec::with_capacity(targets.len());
        let mut pms = Vec::with_capacity(targets.len());
        let mut realized = Vec::with_capacity(targets.len());
        for (i, cam) in range.clone().zip(targets) {
            let (v, pm, r) = generate(scene, cam, &cfg.noise, frame_of(i));
            views.push(v);
            pms.push(pm);
            realized.push(r);
        }
        let t1 = clock.now_ms();
        let write = store.write_views(views, &pms).map_err(|e| fail(&log, e))?;
        let write_ms = clock.now_ms() - t1;

        log.steps.push(StepRecord {
            step: s + 1,
            frames: range.map(frame_of).collect(),
            retrieved,
            coverage,
            realized,
            surfel_count: store.len(),
            retained_views: store.views().len(),
            write,
            retrieval_ms,
            write_ms,
        });
    }
    Ok(Episode { log, store })
}

/// Checks that `log` was produced from `trajectory`.
pub fn check_log(log: &EpisodeLog, scene: &Scene, trajectory: &Trajectory) -> Result<()> {
    if log.scene != scene.name() {
        return Err(Error::LogMismatch(format!("log scene `{}` vs `{}`", log.scene, scene.name())));
    }
    let expected: Vec<Vec<u32>> = trajectory
        .steps()
        .map(|r| r.map(frame_of).collect())
        .collect();
    let got: Vec<&Vec<u32>> = log.steps.iter().map(|s| &s.frames).collect();
    if got.len() != expected.len() || got.iter().zip(&expected).any(|(a, b)| *a != b) {
        return Err(Error::LogMismatch(format!(
            "log has {} steps, trajectory `{}` implies {}",
            got.len(),
            trajectory.name,
            expected.len()
        )));
    }
    for s in &log.steps {
        if s.coverage.len() != s.frames.len() || s.realized.len() != s.frames.len() {
            return Err(Error::LogMismatch(format!("step {} has ragged records", s.step)));
        }
    }
    Ok(())
}
