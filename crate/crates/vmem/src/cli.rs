//! `vmem` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use vmem_core::harness::{cycle_protocol, run_exploration, score_episode, Trajectory};
use vmem_core::raster::rasterize_ids;
use vmem_core::retrieval::retrieve_frames;
use vmem_core::Strategy;

use crate::error::{Result, VmemError};
use crate::formats::{load_scene, load_trajectory, snapshot_json, write_json, CameraRecord};
use crate::images::{dump_frame, dump_id_image};
use crate::report::{
    run_ablation_parallel, write_ablation_json, write_frames_csv, write_log_json, write_metrics_json,
    write_summary_csv, InstantClock, RunConfig,
};
use crate::snapshot::{load_snapshot, save_snapshot, save_snapshot_with, SaveOptions};

#[derive(Debug, Parser)]
#[command(name = "vmem", version, about = "Surfel-indexed view memory: exploration runs, ablations and snapshot tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one exploration episode and score it.
    Explore(RunArgs),
    /// Like `explore`, on the trajectory followed by its reverse.
    Cycle(RunArgs),
    /// Run every strategy × k combination and write a comparison table.
    Ablate(AblateArgs),
    /// Inspect or convert a memory snapshot.
    Snapshot(SnapshotArgs),
    /// Rasterize surfel ids of a snapshot from a camera.
    RenderDebug(RenderArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scene preset name or scene JSON file.
    #[arg(long)]
    scene: String,
    /// Trajectory JSON file or `preset:NAME`.
    #[arg(long)]
    traj: String,
    /// vmem, temporal, camdist or fov.
    #[arg(long, value_delimiter = ',', default_value = "vmem")]
    strategy: Vec<String>,
    /// Context views per step.
    #[arg(long, value_delimiter = ',', default_value = "4")]
    k: Vec<usize>,
    /// Target views per step [default: 4, or the trajectory file's step_size].
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0.03)]
    sigma: f64,
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    /// Relative depth noise of generated frames.
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    /// Point-map dropout probability of generated frames.
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Score every n-th generated frame.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Image side for preset trajectories.
    #[arg(long, default_value_t = 288)]
    size: u32,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Evaluate on the cycle of the trajectory.
    #[arg(long)]
    cycle: bool,
}

#[derive(Debug, Args)]
struct SnapshotArgs {
    /// Snapshot file.
    path: PathBuf,
    /// Write a JSON export here.
    #[arg(long)]
    to_json: Option<PathBuf>,
    /// Re-save the snapshot here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// With --out, write images as PNG files into this directory.
    #[arg(long, requires = "out")]
    frames_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    snapshot: PathBuf,
    /// Camera as a JSON object or a file holding one (trajectory camera format).
    #[arg(long, conflicts_with = "traj")]
    camera: Option<String>,
    /// Take the camera from this trajectory instead.
    #[arg(long, requires = "index")]
    traj: Option<String>,
    /// Camera index within --traj.
    #[arg(long)]
    index: Option<usize>,
    /// Image side for preset trajectories.
    #[arg(long, default_value_t = 288)]
    size: u32,
    /// Output PNG of the false-color id image.
    #[arg(long)]
    out: PathBuf,
    /// Also dump the retrieved context frames into this directory.
    #[arg(long)]
    frames_out: Option<PathBuf>,
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("vmem: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Explore(a) => explore(&a, "explore", false),
        Command::Cycle(a) => explore(&a, "cycle", true),
        Command::Ablate(a) => ablate(&a),
        Command::Snapshot(a) => snapshot(&a),
        Command::RenderDebug(a) => render_debug(&a),
    }
}

fn run_config(a: &RunArgs, command: &str) -> RunConfig {
    RunConfig {
        command: command.into(),
        scene: a.scene.clone(),
        traj: a.traj.clone(),
        strategies: a.strategy.clone(),
        k: a.k.clone(),
        m: a.m.unwrap_or(4),
        sigma: a.sigma,
        alpha: a.alpha,
        noise_sigma: a.noise_sigma,
        dropout: a.dropout,
        seed: a.seed,
        stride: a.stride,
        size: a.size,
        out: a.out.display().to_string(),
    }
}

fn prepare(a: &RunArgs, command: &str, cycle: bool) -> Result<(RunConfig, vmem_core::world::Scene, Trajectory)> {
    let scene = load_scene(&a.scene, a.seed)?;
    let mut traj = load_trajectory(&a.traj, a.m, a.size)?;
    if cycle {
        traj = cycle_protocol(&traj).map_err(|e| VmemError::Config(e.to_string()))?;
    }
    let mut run = run_config(a, command);
    run.m = traj.step_size;
    if a.stride == 0 {
        return Err(VmemError::Config("--stride must be at least 1".into()));
    }
    Ok((run, scene, traj))
}

fn explore(a: &RunArgs, command: &str, cycle: bool) -> Result<()> {
    let (run, scene, traj) = prepare(a, command, cycle)?;
    if run.strategies.len() != 1 || run.k.len() != 1 {
        return Err(VmemError::Config(format!(
            "`{command}` takes a single --strategy and --k; use `ablate` for grids"
        )));
    }
    let cfg = run.base_episode()?;
    let out = &a.out;
    let clock = InstantClock::default();
    let episode = match run_exploration(&scene, &traj, &cfg, &clock) {
        Ok(e) => e,
        Err(failure) => {
            write_log_json(&failure.partial, &run, &out.join("episode_log.json"))?;
            return Err(VmemError::Runtime(failure.to_string()));
        }
    };
    let report = score_episode(&episode.log, &scene, &traj, run.stride)?;
    write_log_json(&episode.log, &run, &out.join("episode_log.json"))?;
    write_metrics_json(&report, &run, &out.join("metrics.json"))?;
    write_frames_csv(std::slice::from_ref(&report), &out.join("frames.csv"))?;
    save_snapshot(&episode.store, &cfg.retrieval, &out.join("memory.vmem"))?;
    eprintln!(
        "{} k={} on {} / {}: mean coverage {:.3}, {} surfels, {} views retained",
        report.strategy,
        report.k,
        report.scene,
        report.trajectory,
        report.mean_coverage,
        episode.store.len(),
        episode.store.views().len()
    );
    Ok(())
}

fn ablate(a: &AblateArgs) -> Result<()> {
    let (run, scene, traj) = prepare(&a.run, "ablate", a.cycle)?;
    let base = run.base_episode()?;
    let strategies: Vec<Strategy> = run.parsed_strategies()?;
    let reports = run_ablation_parallel(&scene, &traj, &base, &strategies, &run.k, run.stride)?;
    let out = &a.run.out;
    write_frames_csv(&reports, &out.join("ablation.csv"))?;
    write_summary_csv(&reports, &out.join("ablation_summary.csv"))?;
    write_ablation_json(&reports, &run, &out.join("ablation.json"))?;
    for r in &reports {
        eprintln!("{:>8} k={:<3} mean coverage {:.3}", r.strategy, r.k, r.mean_coverage);
    }
    Ok(())
}

fn snapshot(a: &SnapshotArgs) -> Result<()> {
    let (store, retrieval) = load_snapshot(&a.path)?;
    println!(
        "{}: {} surfels, {} retained views, {} discarded views, next frame {}",
        a.path.display(),
        store.len(),
        store.views().len(),
        store.discarded().len(),
        store.next_frame()
    );
    if let Some(p) = &a.to_json {
        write_json(p, &snapshot_json(&store, &retrieval))?;
    }
    if let Some(p) = &a.out {
        let options = SaveOptions {
            frames_dir: a.frames_dir.clone(),
        };
        save_snapshot_with(&store, &retrieval, p, &options)?;
    }
    Ok(())
}

fn parse_camera(arg: &str) -> Result<vmem_core::Camera> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| VmemError::Config(format!("cannot read camera file {arg}: {e}")))?
    };
    let rec: CameraRecord =
        serde_json::from_str(&text).map_err(|e| VmemError::Config(format!("camera {arg}: {e}")))?;
    rec.to_camera().map_err(|e| VmemError::Config(format!("camera {arg}: {e}")))
}

fn render_debug(a: &RenderArgs) -> Result<()> {
    let camera = match (&a.camera, &a.traj, a.index) {
        (Some(c), _, _) => parse_camera(c)?,
        (None, Some(t), Some(i)) => {
            let traj = load_trajectory(t, None, a.size)?;
            *traj.cameras.get(i).ok_or_else(|| {
                VmemError::Config(format!("--index {i} out of range ({} cameras)", traj.len()))
            })?
        }
        _ => return Err(VmemError::Config("need --camera or --traj with --index".into())),
    };
    let (store, retrieval) = load_snapshot(&a.snapshot)?;
    let cam = camera.with_resolution(retrieval.render_width, retrieval.render_height);
    let image = rasterize_ids(&store, &cam);
    dump_id_image(&image, &store, &a.out)?;
    let frames = retrieve_frames(&store, &[camera], &retrieval)?;
    eprintln!(
        "{} of {} pixels covered; retrieved {:?}",
        image.covered_pixels(),
        image.ids.len(),
        frames
    );
    if let Some(dir) = &a.frames_out {
        for f in frames {
            if let Some(v) = store.view(f) {
                dump_frame(&v.image, &Path::new(dir).join(format!("frame_{f:06}.png")))?;
            }
        }
    }
    Ok(())
}
