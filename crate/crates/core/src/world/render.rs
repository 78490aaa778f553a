use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{Camera, PointMap};
use crate::math::{self, Vec3};
use crate::store::RgbImage;

use super::scene::Scene;

/// Ground-truth frame of a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub rgb: RgbImage,
    /// Camera-frame z of the hit, `+inf` on background pixels.
    pub depth: Vec<f64>,
    pub pointmap: PointMap,
}

/// Renders RGB, depth and a world-frame point map by nearest-hit ray casting.
pub fn render(scene: &Scene, camera: &Camera) -> RenderOutput {
    let k = camera.intrinsics;
    let (w, h) = (k.width as usize, k.height as usize);
    let mut rgb = RgbImage::new(k.width, k.height);
    let mut depth = vec![f64::INFINITY; w * h];
    let mut pointmap = PointMap::new(w, h);
    let forward = camera.pose.forward();
    for (i, ray) in camera.pixel_rays().iter().enumerate() {
        if let Some(hit) = scene.intersect(ray) {
            let (x, y) = (i % w, i / w);
            depth[i] = hit.t * ray.direction.dot(forward);
            pointmap.set(x, y, ray.at(hit.t));
            rgb.put_pixel(x as u32, y as u32, scene.color_of(&hit));
        }
    }
    RenderOutput {
        rgb,
        depth,
        pointmap,
    }
}

/// Depth-noise model applied to rendered frames.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseParams {
    /// Standard deviation of the multiplicative Gaussian depth factor.
    pub depth_sigma_rel: f64,
    /// Probability that a pixel is dropped from the point map.
    pub dropout_prob: f64,
    pub seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self::NONE
    }
}

impl NoiseParams {
    pub const NONE: NoiseParams = NoiseParams {
        depth_sigma_rel: 0.0,
        dropout_prob: 0.0,
        seed: 0,
    };

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.depth_sigma_rel >= 0.0 && self.depth_sigma_rel.is_finite()) {
            return Err(crate::Error::param("depth_sigma_rel", "must be a finite value ≥ 0"));
        }
        if !(self.dropout_prob >= 0.0 && self.dropout_prob < 1.0) {
            return Err(crate::Error::param("dropout_prob", "must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.depth_sigma_rel == 0.0 && self.dropout_prob == 0.0
    }
}

#[inline]
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Uniform in `(0, 1)` keyed by `(seed, frame, pixel, stream)`.
#[inline]
fn uniform(seed: u64, frame: u32, pixel: usize, stream: u64) -> f64 {
    let h = mix(mix(mix(seed ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03)) ^ frame as u64) ^ pixel as u64);
    ((h >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Standard normal draw keyed by `(seed, frame, pixel)` (Box–Muller).
pub fn gaussian(seed: u64, frame: u32, pixel: usize) -> f64 {
    let u1 = uniform(seed, frame, pixel, 1);
    let u2 = uniform(seed, frame, pixel, 2);
    math::sqrt(-2.0 * math::ln(u1)) * math::cos(core::f64::consts::TAU * u2)
}

/// Applies multiplicative depth noise and pixel dropout. The point map is
/// recomputed from the noisy depth along each pixel's original ray.
pub fn perturb_depth(out: &RenderOutput, camera: &Camera, noise: &NoiseParams, frame: u32) -> RenderOutput {
    if noise.is_zero() {
        return out.clone();
    }
    let mut res = out.clone();
    let center = camera.pose.center();
    let w = out.pointmap.width;
    for i in 0..out.depth.len() {
        if !out.pointmap.valid[i] {
            continue;
        }
        let (x, y) = (i % w, i / w);
        if noise.dropout_prob > 0.0 && uniform(noise.seed, frame, i, 3) < noise.dropout_prob {
            res.pointmap.invalidate(x, y);
            res.depth[i] = f64::INFINITY;
            continue;
        }
        let factor = 1.0 + noise.depth_sigma_rel * gaussian(noise.seed, frame, i);
        if factor <= 0.0 {
            res.pointmap.invalidate(x, y);
            res.depth[i] = f64::INFINITY;
            continue;
        }
        res.depth[i] = out.depth[i] * factor;
        let p = out.pointmap.points[i];
        res.pointmap.set(x, y, center + (p - center) * factor);
    }
    res
}

/// Largest distance between the point map and the unprojected depth map.
pub fn unprojection_error(out: &RenderOutput, camera: &Camera) -> f64 {
    let w = out.pointmap.width;
    let mut worst: f64 = 0.0;
    for i in 0..out.depth.len() {
        if let Some(p) = out.pointmap.get(i % w, i / w) {
            let q: Vec3 = camera.unproject((i % w) as f64 + 0.5, (i / w) as f64 + 0.5, out.depth[i]);
            worst = worst.max(q.distance(p));
        }
    }
    worst
}
