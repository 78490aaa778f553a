//! JSON formats for scenes, trajectories and snapshot exports.

use std::path::Path;

use serde::{Deserialize, Serialize};
use vmem_core::geometry::{Camera, CameraPose, Intrinsics, Quaternion};
use vmem_core::harness::{default_intrinsics, trajectory_preset, Trajectory, TRAJECTORY_PRESETS};
use vmem_core::world::{preset, Scene, SceneSpec, PRESETS};
use vmem_core::{RetrievalConfig, SurfelStore, Vec3};

use crate::error::{Result, VmemError};
use crate::fsio::write_atomic;

/// One camera of a trajectory file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    /// `(w, x, y, z)`, normalized on load.
    pub quaternion: [f64; 4],
    pub translation: [f64; 3],
    pub focal: f64,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cy: Option<f64>,
}

impl CameraRecord {
    pub fn from_camera(c: &Camera) -> Self {
        let q = c.pose.rotation;
        let k = c.intrinsics;
        let centered = k.cx == k.width as f64 * 0.5 && k.cy == k.height as f64 * 0.5;
        Self {
            quaternion: [q.w, q.x, q.y, q.z],
            translation: c.pose.translation.to_array(),
            focal: k.focal,
            width: k.width,
            height: k.height,
            cx: (!centered).then_some(k.cx),
            cy: (!centered).then_some(k.cy),
        }
    }

    pub fn to_camera(&self) -> vmem_core::Result<Camera> {
        let [w, x, y, z] = self.quaternion;
        let rotation = Quaternion::new(w, x, y, z)?;
        let t = Vec3::from_array(self.translation);
        if !t.is_finite() {
            return Err(vmem_core::Error::param("translation", "must be finite"));
        }
        let cx = self.cx.unwrap_or(self.width as f64 * 0.5);
        let cy = self.cy.unwrap_or(self.height as f64 * 0.5);
        let k = Intrinsics::new(self.focal, cx, cy, self.width, self.height)?;
        Ok(Camera::new(CameraPose::new(rotation, t), k))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<usize>,
    pub cameras: Vec<CameraRecord>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TrajectoryInput {
    Object(TrajectoryFile),
    Bare(Vec<CameraRecord>),
}

const PRESET_PREFIX: &str = "preset:";

fn read_text(path: &Path, what: &str) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| VmemError::Config(format!("cannot read {what} file {}: {e}", path.display())))
}

/// Loads `preset:NAME` or a trajectory JSON file. `step_size` overrides the
/// file's value; preset cameras use `size`×`size` images.
pub fn load_trajectory(arg: &str, step_size: Option<usize>, size: u32) -> Result<Trajectory> {
    let m = step_size.unwrap_or(4);
    if let Some(name) = arg.strip_prefix(PRESET_PREFIX) {
        if size == 0 {
            return Err(VmemError::Config("image size must be positive".into()));
        }
        return trajectory_preset(name, default_intrinsics(size), m).map_err(|e| {
            VmemError::Config(format!("{e}; presets: {}", TRAJECTORY_PRESETS.join(", ")))
        });
    }
    let path = Path::new(arg);
    let text = read_text(path, "trajectory")?;
    let input: TrajectoryInput = serde_json::from_str(&text)
        .map_err(|e| VmemError::Config(format!("trajectory file {}: {e}", path.display())))?;
    let file = match input {
        TrajectoryInput::Object(f) => f,
        TrajectoryInput::Bare(cameras) => TrajectoryFile {
            name: None,
            step_size: None,
            cameras,
        },
    };
    let cameras = file
        .cameras
        .iter()
        .enumerate()
        .map(|(i, c)| {
            c.to_camera()
                .map_err(|e| VmemError::Config(format!("trajectory file {}: camera {i}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let name = file
        .name
        .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    Trajectory::new(&name, cameras, step_size.or(file.step_size).unwrap_or(4))
        .map_err(|e| VmemError::Config(format!("trajectory file {}: {e}", path.display())))
}

pub fn save_trajectory(t: &Trajectory, path: &Path) -> Result<()> {
    let file = TrajectoryFile {
        name: Some(t.name.clone()),
        step_size: Some(t.step_size),
        cameras: t.cameras.iter().map(CameraRecord::from_camera).collect(),
    };
    write_json(path, &file)
}

/// Loads a preset scene (`NAME` or `preset:NAME`) or a scene JSON file.
pub fn load_scene(arg: &str, seed: u64) -> Result<Scene> {
    let name = arg.strip_prefix(PRESET_PREFIX).unwrap_or(arg);
    if arg.starts_with(PRESET_PREFIX) || PRESETS.contains(&name) {
        return preset(name, seed).map_err(|e| VmemError::Config(e.to_string()));
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(VmemError::Config(format!(
            "scene `{arg}` is neither a preset ({}) nor an existing file",
            PRESETS.join(", ")
        )));
    }
    let text = read_text(path, "scene")?;
    let spec: SceneSpec = serde_json::from_str(&text)
        .map_err(|e| VmemError::Config(format!("scene file {}: {e}", path.display())))?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Scene::build_named(spec, &stem).map_err(|e| VmemError::Config(format!("scene file {}: {e}", path.display())))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| VmemError::Runtime(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[derive(Serialize)]
struct SurfelJson<'a> {
    position: [f64; 3],
    normal: [f64; 3],
    radius: f64,
    views: &'a [u32],
}

#[derive(Serialize)]
struct ViewJson {
    frame: u32,
    camera: CameraRecord,
    /// `"retained"` or `"discarded"`.
    status: &'static str,
}

#[derive(Serialize)]
struct SnapshotJson<'a> {
    merge: vmem_core::MergeConfig,
    octree: vmem_core::octree::OctreeConfig,
    retrieval: &'a RetrievalConfig,
    next_frame: u32,
    surfels: Vec<SurfelJson<'a>>,
    views: Vec<ViewJson>,
}

/// Debug JSON export of a store; images are summarized, not embedded.
pub fn snapshot_json(store: &SurfelStore, retrieval: &RetrievalConfig) -> serde_json::Value {
    let mut views: Vec<ViewJson> = store
        .views()
        .values()
        .map(|v| ViewJson {
            frame: v.frame_index,
            camera: CameraRecord::from_camera(&v.camera),
            status: "retained",
        })
        .chain(store.discarded().iter().map(|(&f, c)| ViewJson {
            frame: f,
            camera: CameraRecord::from_camera(c),
            status: "discarded",
        }))
        .collect();
    views.sort_by_key(|v| v.frame);
    let doc = SnapshotJson {
        merge: *store.config(),
        octree: *store.octree().config(),
        retrieval,
        next_frame: store.next_frame(),
        surfels: store
            .surfels()
            .iter()
            .map(|s| SurfelJson {
                position: s.position.to_array(),
                normal: s.normal.to_array(),
                radius: s.radius,
                views: &s.views,
            })
            .collect(),
        views,
    };
    serde_json::to_value(doc).expect("plain data serializes")
}
