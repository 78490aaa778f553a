//! Run configuration, episode drivers and report files.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use vmem_core::harness::{
    ablation_grid, run_exploration, score_episode, Clock, EpisodeConfig, EpisodeLog, MetricsReport, Trajectory,
};
use vmem_core::world::{NoiseParams, Scene};
use vmem_core::{MergeConfig, RetrievalConfig, Strategy};

use crate::error::{Result, VmemError};
use crate::fsio::write_atomic;
use crate::formats::write_json;

/// Every knob of a CLI run, echoed into each report.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub scene: String,
    pub traj: String,
    pub strategies: Vec<String>,
    pub k: Vec<usize>,
    pub m: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub noise_sigma: f64,
    pub dropout: f64,
    pub seed: u64,
    pub stride: usize,
    pub size: u32,
    pub out: String,
}

impl RunConfig {
    pub fn parsed_strategies(&self) -> Result<Vec<Strategy>> {
        self.strategies
            .iter()
            .map(|s| s.parse::<Strategy>().map_err(|e| VmemError::Config(e.to_string())))
            .collect()
    }

    /// Episode configuration shared by every run of this invocation.
    pub fn base_episode(&self) -> Result<EpisodeConfig> {
        let cfg = EpisodeConfig {
            retrieval: RetrievalConfig {
                k: self.k.first().copied().unwrap_or(4),
                strategy: self.parsed_strategies()?.first().copied().unwrap_or(Strategy::Vmem),
                ..RetrievalConfig::default()
            },
            merge: MergeConfig {
                sigma: self.sigma,
                alpha: self.alpha,
                ..MergeConfig::default()
            },
            noise: NoiseParams {
                depth_sigma_rel: self.noise_sigma,
                dropout_prob: self.dropout,
                seed: self.seed,
            },
            ..EpisodeConfig::default()
        };
        let as_config = |e: vmem_core::Error| VmemError::Config(e.to_string());
        cfg.merge.validate().map_err(as_config)?;
        cfg.noise.validate().map_err(as_config)?;
        for &k in &self.k {
            RetrievalConfig { k, ..cfg.retrieval }.validate().map_err(as_config)?;
        }
        if self.k.is_empty() || self.strategies.is_empty() {
            return Err(VmemError::Config("need at least one strategy and one k".into()));
        }
        Ok(cfg)
    }
}

/// Wall clock measured from construction.
pub struct InstantClock(Instant);

impl Default for InstantClock {
    fn default() -> Self {
        Self(Instant::now())
    }
}

impl Clock for InstantClock {
    fn now_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

/// Runs the strategy × k grid in parallel; results keep grid order.
pub fn run_ablation_parallel(
    scene: &Scene,
    trajectory: &Trajectory,
    base: &EpisodeConfig,
    strategies: &[Strategy],
    k_values: &[usize],
    stride: usize,
) -> Result<Vec<MetricsReport>> {
    ablation_grid(base, strategies, k_values)
        .par_iter()
        .map(|cfg| {
            let clock = InstantClock::default();
            let episode = run_exploration(scene, trajectory, cfg, &clock)
                .map_err(|f| VmemError::Runtime(format!("{} k={}: {f}", cfg.label(), cfg.retrieval.k)))?;
            Ok(score_episode(&episode.log, scene, trajectory, stride)?)
        })
        .collect()
}

#[derive(Serialize)]
struct FrameRow<'a> {
    strategy: &'a str,
    k: usize,
    scene: &'a str,
    trajectory: &'a str,
    frame: u32,
    step: usize,
    coverage: f64,
    r_dist: f64,
    t_dist: f64,
    revisit_hit: Option<bool>,
    retrieved: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub strategy: String,
    pub k: usize,
    pub scene: String,
    pub trajectory: String,
    pub stride: usize,
    pub frames: usize,
    pub mean_coverage: f64,
    pub revisit_recall: Option<f64>,
    pub far_revisit_recall: Option<f64>,
    pub mean_r_dist: f64,
    pub mean_t_dist: f64,
}

impl Aggregate {
    pub fn of(r: &MetricsReport) -> Self {
        Self {
            strategy: r.strategy.clone(),
            k: r.k,
            scene: r.scene.clone(),
            trajectory: r.trajectory.clone(),
            stride: r.stride,
            frames: r.frames.len(),
            mean_coverage: r.mean_coverage,
            revisit_recall: r.revisit_recall,
            far_revisit_recall: r.far_revisit_recall,
            mean_r_dist: r.mean_r_dist,
            mean_t_dist: r.mean_t_dist,
        }
    }
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| VmemError::Runtime(e.to_string()))?;
    }
    w.into_inner().map_err(|e| VmemError::Runtime(e.to_string()))
}

/// One CSV row per scored frame per report.
pub fn write_frames_csv(reports: &[MetricsReport], path: &Path) -> Result<()> {
    let rows = reports.iter().flat_map(|r| {
        r.frames.iter().map(move |f| FrameRow {
            strategy: &r.strategy,
            k: r.k,
            scene: &r.scene,
            trajectory: &r.trajectory,
            frame: f.frame,
            step: f.step,
            coverage: f.coverage,
            r_dist: f.r_dist,
            t_dist: f.t_dist,
            revisit_hit: f.revisit_hit,
            retrieved: f.retrieved.iter().map(u32::to_string).collect::<Vec<_>>().join(";"),
        })
    });
    write_atomic(path, &csv_bytes(rows)?)
}

/// One CSV row per report.
pub fn write_summary_csv(reports: &[MetricsReport], path: &Path) -> Result<()> {
    write_atomic(path, &csv_bytes(reports.iter().map(Aggregate::of))?)
}

#[derive(Serialize)]
struct WithConfig<'a, T: Serialize> {
    run_config: &'a RunConfig,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_metrics_json(report: &MetricsReport, run: &RunConfig, path: &Path) -> Result<()> {
    write_json(path, &WithConfig { run_config: run, body: report })
}

pub fn write_log_json(log: &EpisodeLog, run: &RunConfig, path: &Path) -> Result<()> {
    write_json(path, &WithConfig { run_config: run, body: log })
}

#[derive(Serialize)]
struct AblationJson<'a> {
    run_config: &'a RunConfig,
    runs: Vec<AggregateWithConfig>,
}

#[derive(Serialize)]
struct AggregateWithConfig {
    #[serde(flatten)]
    aggregate: Aggregate,
    config: EpisodeConfig,
}

pub fn write_ablation_json(reports: &[MetricsReport], run: &RunConfig, path: &Path) -> Result<()> {
    let runs = reports
        .iter()
        .map(|r| AggregateWithConfig {
            aggregate: Aggregate::of(r),
            config: r.config,
        })
        .collect();
    write_json(path, &AblationJson { run_config: run, runs })
}
