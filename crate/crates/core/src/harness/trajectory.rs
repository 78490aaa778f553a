use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{Camera, CameraPose, Intrinsics, Quaternion};
use crate::math::{self, Vec3};

/// Ordered camera path consumed `step_size` cameras per generation step,
/// after the first camera (the input view).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub name: String,
    pub cameras: Vec<Camera>,
    pub step_size: usize,
    /// Index of the turning camera when built by [`cycle_protocol`].
    pub cycle_turn: Option<usize>,
}

impl Trajectory {
    pub fn new(name: impl Into<String>, cameras: Vec<Camera>, step_size: usize) -> Result<Self> {
        let t = Self {
            name: name.into(),
            cameras,
            step_size,
            cycle_turn: None,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cameras.is_empty() {
            return Err(Error::InvalidTrajectory("trajectory has no cameras".into()));
        }
        if self.step_size == 0 {
            return Err(Error::InvalidTrajectory("step size must be positive".into()));
        }
        for (i, c) in self.cameras.iter().enumerate() {
            c.intrinsics
                .validate()
                .map_err(|e| Error::InvalidTrajectory(format!("camera {i}: {e}")))?;
            if !c.pose.translation.is_finite() {
                return Err(Error::InvalidTrajectory(format!("camera {i}: non-finite translation")));
            }
        }
        if let Some(turn) = self.cycle_turn {
            if 2 * turn + 1 != self.cameras.len() {
                return Err(Error::InvalidTrajectory(format!(
                    "cycle turn {turn} inconsistent with length {}",
                    self.cameras.len()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    /// Camera index ranges of the generation steps (the input camera excluded).
    pub fn steps(&self) -> impl Iterator<Item = core::ops::Range<usize>> + '_ {
        (1..self.cameras.len())
            .step_by(self.step_size)
            .map(move |s| s..(s + self.step_size).min(self.cameras.len()))
    }

    pub fn step_count(&self) -> usize {
        self.steps().count()
    }

    pub fn with_intrinsics(mut self, k: Intrinsics) -> Self {
        for c in &mut self.cameras {
            c.intrinsics = k;
        }
        self
    }
}

/// `[c0, …, c(L-1)]` followed by `[c(L-2), …, c0]`: length `2L - 1`.
pub fn cycle_protocol(t: &Trajectory) -> Result<Trajectory> {
    let l = t.cameras.len();
    if l < 2 {
        return Err(Error::InvalidTrajectory(format!(
            "cycle needs at least 2 cameras, got {l}"
        )));
    }
    let mut cameras = t.cameras.clone();
    cameras.extend(t.cameras[..l - 1].iter().rev().copied());
    Ok(Trajectory {
        name: format!("{}_cycle", t.name),
        cameras,
        step_size: t.step_size,
        cycle_turn: Some(l - 1),
    })
}

/// Camera at `eye` looking horizontally at `yaw_deg` (z up, yaw from +x toward +y),
/// pitched down by `pitch_deg`.
pub fn yaw_camera(eye: Vec3, yaw_deg: f64, pitch_deg: f64, k: Intrinsics) -> Camera {
    let (yaw, pitch) = (yaw_deg.to_radians(), pitch_deg.to_radians());
    let forward = Vec3::new(
        math::cos(yaw) * math::cos(pitch),
        math::sin(yaw) * math::cos(pitch),
        -math::sin(pitch),
    );
    let rotation = Quaternion::look_rotation(forward, Vec3::Z).expect("forward is never vertical here");
    Camera::new(CameraPose::new(rotation, eye), k)
}

/// Waypoint `(x, y, yaw_deg)` at eye height.
pub type Waypoint = (f64, f64, f64);

pub const EYE_HEIGHT: f64 = 1.5;

fn from_waypoints(name: &str, points: &[Waypoint], k: Intrinsics, step_size: usize) -> Result<Trajectory> {
    let cameras = points
        .iter()
        .map(|&(x, y, yaw)| yaw_camera(Vec3::new(x, y, EYE_HEIGHT), yaw, 0.0, k))
        .collect();
    Trajectory::new(name, cameras, step_size)
}

/// Full turn in place starting at `start_yaw`, `n` cameras.
fn pan(out: &mut Vec<Waypoint>, x: f64, y: f64, start_yaw: f64, n: usize) {
    for i in 0..n {
        out.push((x, y, start_yaw + 360.0 * i as f64 / n as f64));
    }
}

/// Straight move from the last waypoint to `(x, y)` in `n` cameras, facing along the path.
fn walk(out: &mut Vec<Waypoint>, x: f64, y: f64, n: usize) {
    let &(x0, y0, _) = out.last().expect("walk needs a start");
    let yaw = math::atan2(y - y0, x - x0).to_degrees();
    for i in 1..=n {
        let t = i as f64 / n as f64;
        out.push((x0 + (x - x0) * t, y0 + (y - y0) * t, yaw));
    }
}

/// Four cameras per heading along a 1.5 m line through `(x, y)`, facing along the line.
fn cross(out: &mut Vec<Waypoint>, x: f64, y: f64, headings: &[f64]) {
    for &yaw in headings {
        let (s, c) = (math::sin(yaw.to_radians()), math::cos(yaw.to_radians()));
        for i in 0..4 {
            let o = -0.75 + 0.5 * i as f64;
            out.push((x + c * o, y + s * o, yaw));
        }
    }
}

/// Names of built-in outbound trajectories.
pub const TRAJECTORY_PRESETS: [&str; 3] = ["two_rooms_tour", "two_rooms_crossing", "corridor_lap"];

/// Outbound tour of the two-room scene: a pan in room A, a walk through the
/// doorway, a pan in room B.
pub fn two_rooms_tour(k: Intrinsics, step_size: usize) -> Result<Trajectory> {
    let mut w = Vec::new();
    pan(&mut w, 2.0, 2.0, 0.0, 12);
    pan(&mut w, 1.2, 1.2, 15.0, 12);
    w.push((2.6, 2.0, 0.0));
    walk(&mut w, 5.4, 2.0, 4);
    pan(&mut w, 6.0, 2.0, 180.0, 12);
    pan(&mut w, 6.8, 2.8, 195.0, 12);
    from_waypoints("two_rooms_tour", &w, k, step_size)
}

/// Short walks in four headings at two spots per room, away from the doorway
/// axis, joined by a walk through the doorway.
pub fn two_rooms_crossing(k: Intrinsics, step_size: usize) -> Result<Trajectory> {
    const SPOTS: [(f64, f64); 2] = [(2.0, 1.1), (2.0, 2.9)];
    let mut w = Vec::new();
    for (x, y) in SPOTS {
        cross(&mut w, x, y, &[180.0, 90.0, 0.0, 270.0]);
    }
    for i in 0..3 {
        w.push((3.3 + 0.7 * i as f64, 2.0, 0.0));
    }
    for (x, y) in SPOTS {
        cross(&mut w, 8.0 - x, y, &[0.0, 270.0, 180.0, 90.0]);
    }
    from_waypoints("two_rooms_crossing", &w, k, step_size)
}

/// One counter-clockwise lap along the center line of the loop corridor.
pub fn corridor_lap(k: Intrinsics, step_size: usize) -> Result<Trajectory> {
    let mut w = alloc::vec![(1.0, 1.0, 0.0)];
    walk(&mut w, 9.0, 1.0, 10);
    walk(&mut w, 9.0, 7.0, 8);
    walk(&mut w, 1.0, 7.0, 10);
    walk(&mut w, 1.0, 1.6, 7);
    from_waypoints("corridor_lap", &w, k, step_size)
}

pub fn trajectory_preset(name: &str, k: Intrinsics, step_size: usize) -> Result<Trajectory> {
    match name {
        "two_rooms_tour" => two_rooms_tour(k, step_size),
        "two_rooms_crossing" => two_rooms_crossing(k, step_size),
        "corridor_lap" => corridor_lap(k, step_size),
        other => Err(Error::InvalidTrajectory(format!(
            "unknown trajectory preset `{other}` (expected one of {TRAJECTORY_PRESETS:?})"
        ))),
    }
}

/// Default episode intrinsics: 60° horizontal field of view.
pub fn default_intrinsics(size: u32) -> Intrinsics {
    Intrinsics::from_hfov(60f64.to_radians(), size, size).expect("valid size")
}

impl core::fmt::Display for Trajectory {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{} ({} cameras, M={})", self.name, self.len(), self.step_size)
    }
}
