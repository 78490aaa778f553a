//! Cameras, rotations and point-map primitives.
//!
//! Conventions: poses are camera-to-world, the camera frame is right-handed
//! with +z forward, +x right and +y down. Pixel coordinates start at the
//! top-left image corner and pixel `(i, j)` has its center at `(i + 0.5, j + 0.5)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, Mat3, Vec3};

/// Unit quaternion `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Builds a unit quaternion from possibly unnormalized components.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = math::sqrt(w * w + x * x + y * y + z * z);
        if !(n.is_finite() && n > 1e-12) {
            return Err(Error::InvalidGeometry("zero or non-finite quaternion"));
        }
        Ok(Self {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let axis = axis.normalize();
        let (s, c) = (math::sin(angle * 0.5), math::cos(angle * 0.5));
        Self {
            w: c,
            x: axis.x * s,
            y: axis.y * s,
            z: axis.z * s,
        }
    }

    /// Rotation whose columns are the given orthonormal axes.
    pub fn from_matrix(m: &Mat3) -> Self {
        let r = &m.rows;
        let tr = m.trace();
        let (w, x, y, z);
        if tr > 0.0 {
            let s = math::sqrt(tr + 1.0) * 2.0;
            w = 0.25 * s;
            x = (r[2][1] - r[1][2]) / s;
            y = (r[0][2] - r[2][0]) / s;
            z = (r[1][0] - r[0][1]) / s;
        } else if r[0][0] > r[1][1] && r[0][0] > r[2][2] {
            let s = math::sqrt(1.0 + r[0][0] - r[1][1] - r[2][2]) * 2.0;
            w = (r[2][1] - r[1][2]) / s;
            x = 0.25 * s;
            y = (r[0][1] + r[1][0]) / s;
            z = (r[0][2] + r[2][0]) / s;
        } else if r[1][1] > r[2][2] {
            let s = math::sqrt(1.0 + r[1][1] - r[0][0] - r[2][2]) * 2.0;
            w = (r[0][2] - r[2][0]) / s;
            x = (r[0][1] + r[1][0]) / s;
            y = 0.25 * s;
            z = (r[1][2] + r[2][1]) / s;
        } else {
            let s = math::sqrt(1.0 + r[2][2] - r[0][0] - r[1][1]) * 2.0;
            w = (r[1][0] - r[0][1]) / s;
            x = (r[0][2] + r[2][0]) / s;
            y = (r[1][2] + r[2][1]) / s;
            z = 0.25 * s;
        }
        Self::new(w, x, y, z).unwrap_or(Self::IDENTITY)
    }

    /// Camera orientation looking along `forward` with `up` roughly opposite to image +y.
    pub fn look_rotation(forward: Vec3, up: Vec3) -> Result<Self> {
        let z = forward
            .try_normalize(1e-12)
            .ok_or(Error::InvalidGeometry("zero forward vector"))?;
        let x = z
            .cross(up)
            .try_normalize(1e-12)
            .ok_or(Error::InvalidGeometry("forward parallel to up"))?;
        let y = z.cross(x);
        Ok(Self::from_matrix(&Mat3::from_cols(x, y, z)))
    }

    #[inline]
    pub fn dot(&self, o: &Quaternion) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn negated(&self) -> Quaternion {
        Quaternion {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// Hamilton product `self * o`.
    pub fn mul(&self, o: &Quaternion) -> Quaternion {
        Quaternion {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    pub fn to_matrix(&self) -> Mat3 {
        let Quaternion { w, x, y, z } = *self;
        Mat3::from_rows([
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ])
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        self.to_matrix().mul_vec(v)
    }
}

/// Camera-to-world rigid transform. `translation` is the camera center.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CameraPose {
    pub rotation: Quaternion,
    pub translation: Vec3,
}

impl CameraPose {
    pub const IDENTITY: CameraPose = CameraPose {
        rotation: Quaternion::IDENTITY,
        translation: Vec3::ZERO,
    };

    pub fn new(rotation: Quaternion, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Pose at `eye` looking towards `target`; world `up` is used to fix roll.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Result<Self> {
        Ok(Self::new(Quaternion::look_rotation(target - eye, up)?, eye))
    }

    #[inline]
    pub fn center(&self) -> Vec3 {
        self.translation
    }

    pub fn rotation_matrix(&self) -> Mat3 {
        self.rotation.to_matrix()
    }

    /// Camera forward axis (+z of the camera frame) in world coordinates.
    pub fn forward(&self) -> Vec3 {
        self.rotation_matrix().col(2)
    }

    pub fn to_world(&self, p_cam: Vec3) -> Vec3 {
        self.rotation_matrix().mul_vec(p_cam) + self.translation
    }

    pub fn to_camera(&self, p_world: Vec3) -> Vec3 {
        self.rotation_matrix().tr_mul_vec(p_world - self.translation)
    }
}

/// Pinhole intrinsics with square pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Intrinsics {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(focal: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = Self {
            focal,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Principal point at the image center.
    pub fn centered(focal: f64, width: u32, height: u32) -> Result<Self> {
        Self::new(focal, width as f64 * 0.5, height as f64 * 0.5, width, height)
    }

    /// Intrinsics for a given horizontal field of view in radians.
    pub fn from_hfov(hfov: f64, width: u32, height: u32) -> Result<Self> {
        let focal = width as f64 * 0.5 / libm::tan(hfov * 0.5);
        Self::centered(focal, width, height)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal.is_finite() && self.focal > 0.0) {
            return Err(Error::param("focal", "must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::param("width/height", "must be at least 1"));
        }
        let inside = |c: f64, n: u32| c.is_finite() && c >= 0.0 && c <= n as f64;
        if !inside(self.cx, self.width) || !inside(self.cy, self.height) {
            return Err(Error::param("principal_point", "outside image bounds"));
        }
        Ok(())
    }

    /// Same field of view at a different resolution. Focal length follows the
    /// horizontal scale factor.
    pub fn rescaled(&self, width: u32, height: u32) -> Intrinsics {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Intrinsics {
            focal: self.focal * sx,
            cx: self.cx * sx,
            cy: self.cy * sy,
            width,
            height,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Camera {
    pub pose: CameraPose,
    pub intrinsics: Intrinsics,
}

/// A ray with unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Pixel position and camera-frame depth of a projected point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// Depths at or below this are treated as behind the camera.
pub const MIN_DEPTH: f64 = 1e-9;

impl Camera {
    pub fn new(pose: CameraPose, intrinsics: Intrinsics) -> Self {
        Self { pose, intrinsics }
    }

    /// Pinhole projection; `None` when the point is behind the camera.
    pub fn project(&self, point: Vec3) -> Option<Projection> {
        project_camera_point(&self.intrinsics, self.pose.to_camera(point))
    }

    /// World ray through a continuous pixel position.
    pub fn ray_through_pixel(&self, u: f64, v: f64) -> Ray {
        ray_from_rotation(&self.pose, &self.pose.rotation_matrix(), &self.intrinsics, u, v)
    }

    /// World point at camera-frame depth `depth` along the ray through `(u, v)`.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        let k = &self.intrinsics;
        let p_cam = Vec3::new((u - k.cx) / k.focal * depth, (v - k.cy) / k.focal * depth, depth);
        self.pose.to_world(p_cam)
    }

    /// Rays through every pixel center in row-major order.
    pub fn pixel_rays(&self) -> Vec<Ray> {
        let rot = self.pose.rotation_matrix();
        let k = &self.intrinsics;
        let mut rays = Vec::with_capacity(k.pixel_count());
        for j in 0..k.height {
            for i in 0..k.width {
                rays.push(ray_from_rotation(
                    &self.pose,
                    &rot,
                    k,
                    i as f64 + 0.5,
                    j as f64 + 0.5,
                ));
            }
        }
        rays
    }

    /// Same pose with intrinsics rescaled to a new resolution.
    pub fn with_resolution(&self, width: u32, height: u32) -> Camera {
        Camera::new(self.pose, self.intrinsics.rescaled(width, height))
    }
}

#[inline]
pub(crate) fn project_camera_point(k: &Intrinsics, p_cam: Vec3) -> Option<Projection> {
    if p_cam.z <= MIN_DEPTH {
        return None;
    }
    Some(Projection {
        u: k.focal * p_cam.x / p_cam.z + k.cx,
        v: k.focal * p_cam.y / p_cam.z + k.cy,
        depth: p_cam.z,
    })
}

#[inline]
fn ray_from_rotation(pose: &CameraPose, rot: &Mat3, k: &Intrinsics, u: f64, v: f64) -> Ray {
    let d_cam = Vec3::new((u - k.cx) / k.focal, (v - k.cy) / k.focal, 1.0);
    Ray {
        origin: pose.translation,
        direction: rot.mul_vec(d_cam).normalize(),
    }
}

/// Per-pixel world points with a validity mask, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMap {
    pub width: usize,
    pub height: usize,
    pub points: Vec<Vec3>,
    pub valid: Vec<bool>,
}

impl PointMap {
    /// All-invalid map.
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            points: vec![Vec3::ZERO; width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Option<Vec3>) -> Self {
        let mut pm = Self::new(width, height);
        for v in 0..height {
            for u in 0..width {
                if let Some(p) = f(u, v) {
                    pm.set(u, v, p);
                }
            }
        }
        pm
    }

    /// Point at column `u`, row `v`, if valid.
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Option<Vec3> {
        if u >= self.width || v >= self.height {
            return None;
        }
        let i = v * self.width + u;
        self.valid[i].then(|| self.points[i])
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, p: Vec3) {
        let i = v * self.width + u;
        self.points[i] = p;
        self.valid[i] = p.is_finite();
    }

    #[inline]
    pub fn invalidate(&mut self, u: usize, v: usize) {
        self.valid[v * self.width + u] = false;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&b| b).count()
    }

    /// Checks sizes and that every valid point is finite.
    pub fn validate(&self) -> Result<()> {
        let n = self.width * self.height;
        if self.points.len() != n || self.valid.len() != n {
            return Err(Error::InvalidGeometry("point map buffer size mismatch"));
        }
        if self
            .points
            .iter()
            .zip(&self.valid)
            .any(|(p, &ok)| ok && !p.is_finite())
        {
            return Err(Error::InvalidGeometry("non-finite point inside validity mask"));
        }
        Ok(())
    }
}

/// Mean translation and hemisphere-aligned normalized quaternion mean.
pub fn average_pose(poses: &[CameraPose]) -> Result<CameraPose> {
    let first = poses.first().ok_or(Error::EmptyPoseSet)?;
    let q1 = first.rotation;
    let (mut w, mut x, mut y, mut z) = (0.0, 0.0, 0.0, 0.0);
    let mut t = Vec3::ZERO;
    for pose in poses {
        let q = if pose.rotation.dot(&q1) < 0.0 {
            pose.rotation.negated()
        } else {
            pose.rotation
        };
        w += q.w;
        x += q.x;
        y += q.y;
        z += q.z;
        t += pose.translation;
    }
    let norm = math::sqrt(w * w + x * x + y * y + z * z);
    if norm < 1e-9 {
        return Err(Error::AntipodalRotationSet);
    }
    let rotation = Quaternion {
        w: w / norm,
        x: x / norm,
        y: y / norm,
        z: z / norm,
    };
    Ok(CameraPose::new(rotation, t / poses.len() as f64))
}

/// Geodesic angle between two rotations, `arccos((tr(R_a R_bᵀ) - 1) / 2)`.
pub fn rotation_distance(a: &Quaternion, b: &Quaternion) -> f64 {
    let rel = a.to_matrix().mul_mat(&b.to_matrix().transpose());
    let c = (0.5 * (rel.trace() - 1.0)).clamp(-1.0, 1.0);
    math::acos(c)
}

#[inline]
pub fn translation_distance(a: Vec3, b: Vec3) -> f64 {
    (b - a).norm()
}

/// Pose-similarity thresholds shared by write-side and retrieval-side NMS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSimilarity {
    pub max_rotation_rad: f64,
    pub max_translation: f64,
}

impl PoseSimilarity {
    pub fn from_degrees(max_rotation_deg: f64, max_translation: f64) -> Self {
        Self {
            max_rotation_rad: max_rotation_deg.to_radians(),
            max_translation,
        }
    }

    pub fn similar(&self, a: &CameraPose, b: &CameraPose) -> bool {
        translation_distance(a.translation, b.translation) < self.max_translation
            && rotation_distance(&a.rotation, &b.rotation) < self.max_rotation_rad
    }
}

/// Camera-facing unit normal from the four axis neighbours of `(u, v)`.
pub fn compute_normal(pm: &PointMap, u: usize, v: usize, camera_center: Vec3) -> Result<Vec3> {
    if u == 0 || v == 0 {
        return Err(Error::DegenerateNormal);
    }
    let (Some(right), Some(left), Some(down), Some(up), Some(p)) = (
        pm.get(u + 1, v),
        pm.get(u - 1, v),
        pm.get(u, v + 1),
        pm.get(u, v - 1),
        pm.get(u, v),
    ) else {
        return Err(Error::DegenerateNormal);
    };
    let n = (right - left).cross(down - up);
    let norm = n.norm();
    if !(norm >= 1e-12) {
        return Err(Error::DegenerateNormal);
    }
    let n = n / norm;
    Ok(if n.dot(camera_center - p) < 0.0 { -n } else { n })
}

/// Surfel radius `(depth / 2f) / (alpha + (1 - alpha)|n·d̂|)` with `d̂` the unit
/// viewing direction from the camera center to `point`.
pub fn compute_radius(
    depth: f64,
    focal: f64,
    normal: Vec3,
    point: Vec3,
    camera_center: Vec3,
    alpha: f64,
) -> Result<f64> {
    if !(depth > 0.0 && depth.is_finite()) || !(focal > 0.0 && focal.is_finite()) {
        return Err(Error::InvalidGeometry("nonpositive depth or focal"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param("alpha", "must lie in (0, 1]"));
    }
    let view = (point - camera_center)
        .try_normalize(1e-300)
        .ok_or(Error::InvalidGeometry("point coincides with camera center"))?;
    let cos = math::abs(normal.dot(view)).min(1.0);
    Ok((0.5 * depth / focal) / (alpha + (1.0 - alpha) * cos))
}

/// Output side length for a source side and scale factor.
pub fn downsampled_len(len: usize, sigma: f64) -> usize {
    (math::round(len as f64 * sigma) as usize).max(3)
}

/// Nearest-pixel subsampling to `max(3, round(len·sigma))` per side.
pub fn downsample_pointmap(pm: &PointMap, sigma: f64) -> Result<PointMap> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::param("sigma", "must lie in (0, 1]"));
    }
    if pm.width == 0 || pm.height == 0 {
        return Err(Error::InvalidGeometry("empty point map"));
    }
    let w = downsampled_len(pm.width, sigma);
    let h = downsampled_len(pm.height, sigma);
    let src_index = |i: usize, out: usize, src: usize| {
        let s = math::floor((i as f64 + 0.5) * src as f64 / out as f64) as usize;
        s.min(src - 1)
    };
    let mut out = PointMap::new(w, h);
    for v in 0..h {
        let sv = src_index(v, h, pm.height);
        for u in 0..w {
            let su = src_index(u, w, pm.width);
            let si = sv * pm.width + su;
            let di = v * w + u;
            out.points[di] = pm.points[si];
            out.valid[di] = pm.valid[si];
        }
    }
    Ok(out)
}
