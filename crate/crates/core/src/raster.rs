//! Splat rendering of surfel ids.
//!
//! Coverage is defined by ray–disk intersection at pixel centers: a pixel is
//! covered by a surfel when the pixel ray meets the surfel's plane at a
//! positive ray parameter within the surfel radius of its center. The pixel
//! keeps the covering surfel with the smallest camera-frame depth, lower id
//! on ties. [`rasterize_ids`] bounds each disk in screen space before running
//! the exact test; [`raycast_ids_oracle`] runs the test for every pixel and
//! every surfel.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{Camera, Ray};
use crate::math::{self, Vec3};
use crate::store::{Surfel, SurfelStore};

/// Marker for pixels no surfel covers.
pub const EMPTY: u32 = u32::MAX;

/// Nearest-surfel id and hit depth per pixel, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IdImage {
    pub width: u32,
    pub height: u32,
    pub ids: Vec<u32>,
    pub depth: Vec<f64>,
}

impl IdImage {
    pub fn empty(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            ids: vec![EMPTY; n],
            depth: vec![f64::INFINITY; n],
        }
    }

    /// Surfel id and depth at pixel `(x, y)`.
    pub fn get(&self, x: u32, y: u32) -> Option<(u32, f64)> {
        let i = y as usize * self.width as usize + x as usize;
        (self.ids[i] != EMPTY).then(|| (self.ids[i], self.depth[i]))
    }

    pub fn covered_pixels(&self) -> usize {
        self.ids.iter().filter(|&&id| id != EMPTY).count()
    }

    /// Frame indices voted by pixel `(x, y)`: the nearest surfel's index set.
    pub fn views_at<'a>(&self, store: &'a SurfelStore, x: u32, y: u32) -> &'a [u32] {
        match self.get(x, y) {
            Some((id, _)) => &store.surfel(id).views,
            None => &[],
        }
    }
}

/// Ray parameter of the ray–disk hit, if any.
#[inline]
pub fn ray_disk_hit(ray: &Ray, center: Vec3, normal: Vec3, radius: f64) -> Option<f64> {
    let denom = normal.dot(ray.direction);
    if math::abs(denom) < 1e-12 {
        return None;
    }
    let t = normal.dot(center - ray.origin) / denom;
    if !(t > 0.0) {
        return None;
    }
    if ray.at(t).distance_squared(center) <= radius * radius {
        Some(t)
    } else {
        None
    }
}

/// Pixel rays plus the forward component of each direction, which converts
/// ray parameters to camera-frame depth.
struct PixelRays {
    rays: Vec<Ray>,
    forward: Vec<f64>,
}

impl PixelRays {
    fn new(camera: &Camera) -> Self {
        let rays = camera.pixel_rays();
        let fwd = camera.pose.forward();
        let forward = rays.iter().map(|r| r.direction.dot(fwd)).collect();
        Self { rays, forward }
    }

    #[inline]
    fn test(&self, pixel: usize, s: &Surfel, id: u32, img: &mut IdImage) {
        if let Some(t) = ray_disk_hit(&self.rays[pixel], s.position, s.normal, s.radius) {
            let depth = t * self.forward[pixel];
            if depth < img.depth[pixel] {
                img.depth[pixel] = depth;
                img.ids[pixel] = id;
            }
        }
    }
}

/// Renders surfel ids as seen by `camera` (at its own resolution).
pub fn rasterize_ids(store: &SurfelStore, camera: &Camera) -> IdImage {
    rasterize_surfels(store.surfels(), camera)
}

pub fn rasterize_surfels(surfels: &[Surfel], camera: &Camera) -> IdImage {
    let k = camera.intrinsics;
    let (w, h) = (k.width as i64, k.height as i64);
    let mut img = IdImage::empty(k.width, k.height);
    if surfels.is_empty() {
        return img;
    }
    let rays = PixelRays::new(camera);
    let rot = camera.pose.rotation_matrix();
    let origin = camera.pose.center();
    let sides = frustum_sides(camera);

    for (id, s) in surfels.iter().enumerate() {
        let pc = rot.tr_mul_vec(s.position - origin);
        let r = s.radius;
        if pc.z + r <= 0.0 || sides.iter().any(|n| n.dot(pc) < -r) {
            continue;
        }
        let (x0, x1, y0, y1) = if pc.z - r > 1e-6 * r.max(1.0) {
            let (umin, umax) = sphere_extent(pc.x, pc.z, r);
            let (vmin, vmax) = sphere_extent(pc.y, pc.z, r);
            // one pixel of slack against rounding in the bound itself
            let lo = |m: f64, c: f64| math::floor(k.focal * m + c - 0.5) as i64 - 1;
            let hi = |m: f64, c: f64| math::floor(k.focal * m + c - 0.5) as i64 + 2;
            (
                lo(umin, k.cx).max(0),
                hi(umax, k.cx).min(w - 1),
                lo(vmin, k.cy).max(0),
                hi(vmax, k.cy).min(h - 1),
            )
        } else {
            (0, w - 1, 0, h - 1)
        };
        if x0 > x1 || y0 > y1 {
            continue;
        }
        for y in y0..=y1 {
            let row = (y * w) as usize;
            for x in x0..=x1 {
                rays.test(row + x as usize, s, id as u32, &mut img);
            }
        }
    }
    img
}

/// Inward unit normals of the four side planes of the view frustum in the
/// camera frame, widened by one pixel on each side.
fn frustum_sides(camera: &Camera) -> [Vec3; 4] {
    let k = &camera.intrinsics;
    let (u0, u1) = (-1.0, k.width as f64 + 1.0);
    let (v0, v1) = (-1.0, k.height as f64 + 1.0);
    [
        Vec3::new(k.focal, 0.0, k.cx - u0),
        Vec3::new(-k.focal, 0.0, u1 - k.cx),
        Vec3::new(0.0, k.focal, k.cy - v0),
        Vec3::new(0.0, -k.focal, v1 - k.cy),
    ]
    .map(Vec3::normalize)
}

/// Range of `a/z` over a sphere with center `(a, z)` and radius `r`, `z > r`.
#[inline]
fn sphere_extent(a: f64, z: f64, r: f64) -> (f64, f64) {
    let den = z * z - r * r;
    let root = r * math::sqrt((a * a + den).max(0.0));
    let m1 = (a * z - root) / den;
    let m2 = (a * z + root) / den;
    (m1.min(m2), m1.max(m2))
}

/// Exhaustive per-pixel reference renderer.
pub fn raycast_ids_oracle(store: &SurfelStore, camera: &Camera) -> IdImage {
    raycast_surfels_oracle(store.surfels(), camera)
}

pub fn raycast_surfels_oracle(surfels: &[Surfel], camera: &Camera) -> IdImage {
    let k = camera.intrinsics;
    let mut img = IdImage::empty(k.width, k.height);
    let rays = PixelRays::new(camera);
    for pixel in 0..rays.rays.len() {
        for (id, s) in surfels.iter().enumerate() {
            rays.test(pixel, s, id as u32, &mut img);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraPose, Intrinsics};

    fn camera() -> Camera {
        Camera::new(CameraPose::IDENTITY, Intrinsics::centered(64.0, 64, 64).unwrap())
    }

    fn facing(z: f64, r: f64) -> Surfel {
        Surfel::new(Vec3::new(0.0, 0.0, z), Vec3::new(0.0, 0.0, -1.0), r, 1)
    }

    #[test]
    fn axial_surfel_hits_principal_pixel() {
        let img = rasterize_surfels(&[facing(2.0, 0.1)], &camera());
        let (id, depth) = img.get(32, 32).unwrap();
        assert_eq!(id, 0);
        assert!((depth - 2.0).abs() < 1e-3);
    }

    #[test]
    fn nearer_surfel_occludes() {
        let img = rasterize_surfels(&[facing(3.0, 0.5), facing(2.0, 0.1)], &camera());
        assert_eq!(img.get(32, 32).unwrap().0, 1);
        assert_eq!(img, raycast_surfels_oracle(&[facing(3.0, 0.5), facing(2.0, 0.1)], &camera()));
    }

    #[test]
    fn edge_on_surfel_covers_nothing() {
        let s = Surfel::new(Vec3::new(0.0, 0.0, 2.0), Vec3::X, 0.5, 1);
        let img = rasterize_surfels(core::slice::from_ref(&s), &camera());
        assert_eq!(img.covered_pixels(), 0);
        assert_eq!(raycast_surfels_oracle(&[s], &camera()).covered_pixels(), 0);
    }

    #[test]
    fn equal_depth_prefers_lower_id() {
        let img = rasterize_surfels(&[facing(2.0, 0.1), facing(2.0, 0.1)], &camera());
        assert_eq!(img.get(32, 32).unwrap().0, 0);
    }

    #[test]
    fn surfel_straddling_camera_plane_matches_oracle() {
        let s = [
            Surfel::new(Vec3::new(0.0, 0.3, 0.05), Vec3::new(0.0, 1.0, 0.2).normalize(), 2.0, 1),
            Surfel::new(Vec3::new(0.0, 0.0, -1.0), Vec3::Z, 0.5, 1),
        ];
        assert_eq!(rasterize_surfels(&s, &camera()), raycast_surfels_oracle(&s, &camera()));
    }
}
