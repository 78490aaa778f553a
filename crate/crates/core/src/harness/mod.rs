//! Exploration episodes, the cycle protocol and evaluation metrics.

mod episode;
mod metrics;
mod trajectory;

use alloc::vec::Vec;

pub use episode::{
    check_log, frame_of, run_exploration, Clock, Episode, EpisodeConfig, EpisodeFailure, EpisodeLog, NoClock, Retriever,
    StepRecord,
};
pub use metrics::{outbound_matches, pose_errors, score_episode, FrameMetrics, MetricsReport};
pub use trajectory::{
    corridor_lap, cycle_protocol, default_intrinsics, trajectory_preset, two_rooms_crossing, two_rooms_tour, yaw_camera, Trajectory,
    Waypoint, EYE_HEIGHT, TRAJECTORY_PRESETS,
};

use crate::retrieval::Strategy;
use crate::world::Scene;

/// Episode configurations for every `(strategy, k)` pair, strategies outermost.
pub fn ablation_grid(base: &EpisodeConfig, strategies: &[Strategy], k_values: &[usize]) -> Vec<EpisodeConfig> {
    let mut out = Vec::with_capacity(strategies.len() * k_values.len());
    for &s in strategies {
        for &k in k_values {
            let mut c = *base;
            c.retrieval.strategy = s;
            c.retrieval.k = k;
            c.retriever = Retriever::Memory;
            out.push(c);
        }
    }
    out
}

/// Runs and scores one episode.
pub fn run_and_score(
    scene: &Scene,
    trajectory: &Trajectory,
    config: &EpisodeConfig,
    stride: usize,
) -> crate::Result<MetricsReport> {
    let episode = run_exploration(scene, trajectory, config, &NoClock).map_err(|f| f.error)?;
    score_episode(&episode.log, scene, trajectory, stride)
}

/// Sequential ablation over the strategy × k grid.
pub fn run_ablation(
    scene: &Scene,
    trajectory: &Trajectory,
    base: &EpisodeConfig,
    strategies: &[Strategy],
    k_values: &[usize],
    stride: usize,
) -> crate::Result<Vec<MetricsReport>> {
    ablation_grid(base, strategies, k_values)
        .iter()
        .map(|c| run_and_score(scene, trajectory, c, stride))
        .collect()
}
