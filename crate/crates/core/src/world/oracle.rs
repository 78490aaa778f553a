//! Brute-force visibility ground truth.
//!
//! A camera's visible surface is the set of surface samples its grid rays hit
//! first. Each sample carries the world point of the first ray that produced
//! it. A sample counts as seen by another camera when that point projects
//! inside the other camera's image in front of it and the segment back to
//! the camera center is unobstructed.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{Camera, Ray};
use crate::math::{self, Vec3};

use super::scene::{Hit, Scene};

/// Default number of samples per scene diagonal.
pub const SAMPLES_PER_DIAGONAL: f64 = 256.0;

/// Default oracle grid resolution (rays per image side).
pub const DEFAULT_GRID: u32 = 48;

const Q_BITS: u32 = 20;
const Q_MAX: u64 = (1 << Q_BITS) - 1;

/// Visible surface samples of one camera, keyed by sample id.
pub type VisibleSet = BTreeMap<u64, Vec3>;

/// Global surface-sample id of a hit: primitive, face and quantized surface coordinates.
pub fn sample_id(hit: &Hit, pitch: f64) -> u64 {
    let q = |x: f64| (math::floor(x / pitch).max(0.0) as u64).min(Q_MAX);
    ((hit.primitive as u64) << (2 * Q_BITS + 3))
        | ((hit.face as u64) << (2 * Q_BITS))
        | (q(hit.s) << Q_BITS)
        | q(hit.u)
}

pub fn sample_pitch(scene: &Scene) -> f64 {
    scene.diagonal() / SAMPLES_PER_DIAGONAL
}

/// Samples hit by a `grid`×`grid` ray bundle through `camera`'s image.
pub fn visibility_oracle(scene: &Scene, camera: &Camera, grid: u32) -> VisibleSet {
    let pitch = sample_pitch(scene);
    let cam = camera.with_resolution(grid, grid);
    let mut out = VisibleSet::new();
    for ray in cam.pixel_rays() {
        if let Some(hit) = scene.intersect(&ray) {
            out.entry(sample_id(&hit, pitch)).or_insert_with(|| ray.at(hit.t));
        }
    }
    out
}

/// Whether `point` (on a scene surface) is visible from `camera`.
pub fn sees(scene: &Scene, camera: &Camera, point: Vec3) -> bool {
    let Some(p) = camera.project(point) else {
        return false;
    };
    let k = &camera.intrinsics;
    if !(p.u >= 0.0 && p.u < k.width as f64 && p.v >= 0.0 && p.v < k.height as f64) {
        return false;
    }
    let origin = camera.pose.center();
    let to = point - origin;
    let dist = to.norm();
    if dist == 0.0 {
        return false;
    }
    let ray = Ray {
        origin,
        direction: to / dist,
    };
    scene.first_hit_distance(&ray) >= dist - 1e-6 * dist.max(1.0)
}

/// Fraction of `target` samples seen by `camera`.
fn overlap(scene: &Scene, target: &VisibleSet, camera: &Camera) -> f64 {
    let seen = target.values().filter(|&&p| sees(scene, camera, p)).count();
    seen as f64 / target.len() as f64
}

/// Past cameras ranked by overlap with the target's visible surface,
/// descending, later cameras first on ties. Entries are `(index, score)`.
pub fn relevance_oracle(scene: &Scene, target: &Camera, past: &[Camera], grid: u32) -> Result<Vec<(usize, f64)>> {
    let visible = visibility_oracle(scene, target, grid);
    if visible.is_empty() {
        return Err(Error::BlindTarget);
    }
    let mut scores: Vec<(usize, f64)> = past
        .iter()
        .enumerate()
        .map(|(i, c)| (i, overlap(scene, &visible, c)))
        .collect();
    scores.sort_by(|a, b| b.1.total_cmp(&a.1).then(b.0.cmp(&a.0)));
    Ok(scores)
}

/// Fraction of the target's visible surface seen by at least one of `chosen`.
pub fn coverage(scene: &Scene, target: &Camera, chosen: &[Camera], grid: u32) -> Result<f64> {
    let visible = visibility_oracle(scene, target, grid);
    if visible.is_empty() {
        return Err(Error::BlindTarget);
    }
    let seen = visible
        .values()
        .filter(|&&p| chosen.iter().any(|c| sees(scene, c, p)))
        .count();
    Ok(seen as f64 / visible.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraPose, Intrinsics};
    use crate::world::scene::two_rooms;

    fn cam(eye: [f64; 3], target: [f64; 3]) -> Camera {
        let pose = CameraPose::look_at(Vec3::from_array(eye), Vec3::from_array(target), Vec3::Z).unwrap();
        Camera::new(pose, Intrinsics::from_hfov(core::f64::consts::FRAC_PI_2, 64, 64).unwrap())
    }

    #[test]
    fn facing_away_from_everything_is_empty() {
        let scene = crate::world::scene::preset("unit_box", 0).unwrap();
        let c = cam([0.5, 5.0, 0.5], [0.5, 10.0, 0.5]);
        assert!(visibility_oracle(&scene, &c, 32).is_empty());
        assert_eq!(relevance_oracle(&scene, &c, &[c], 32).unwrap_err(), Error::BlindTarget);
    }

    #[test]
    fn identical_cameras_score_one() {
        let scene = two_rooms(0).unwrap();
        let a = cam([1.0, 1.0, 1.5], [3.0, 3.0, 1.0]);
        assert_eq!(visibility_oracle(&scene, &a, 32), visibility_oracle(&scene, &a, 32));
        let other = cam([3.0, 3.0, 1.5], [1.0, 1.0, 1.0]);
        let ranked = relevance_oracle(&scene, &a, &[other, a], 32).unwrap();
        assert_eq!(ranked[0], (1, 1.0));
    }

    #[test]
    fn room_a_camera_sees_no_room_b_only_surface() {
        let scene = two_rooms(0).unwrap();
        let a = cam([3.0, 2.0, 1.5], [0.0, 2.0, 1.5]);
        let vis = visibility_oracle(&scene, &a, 64);
        assert!(!vis.is_empty());
        assert!(vis.values().all(|p| p.x <= 4.0 + 1e-9));
        let b = cam([5.0, 2.0, 1.5], [8.0, 2.0, 1.5]);
        let ranked = relevance_oracle(&scene, &a, &[b], 64).unwrap();
        assert_eq!(ranked[0].1, 0.0);
    }

    #[test]
    fn nested_views_rank_by_containment() {
        let scene = two_rooms(0).unwrap();
        let target = cam([1.0, 2.0, 1.5], [0.0, 2.0, 1.5]);
        // same direction, progressively closer to the wall: narrower footprints
        let a = cam([1.0, 2.0, 1.5], [0.0, 2.0, 1.5]);
        let b = cam([0.6, 2.0, 1.5], [0.0, 2.0, 1.5]);
        let c = cam([0.3, 2.0, 1.5], [0.0, 2.0, 1.5]);
        let ranked = relevance_oracle(&scene, &target, &[c, b, a], 48).unwrap();
        let order: Vec<usize> = ranked.iter().map(|r| r.0).collect();
        assert_eq!(order, [2, 1, 0]);
        assert!(ranked[0].1 > ranked[1].1 && ranked[1].1 > ranked[2].1);
    }

    #[test]
    fn coverage_of_union() {
        let scene = two_rooms(0).unwrap();
        let target = cam([2.0, 2.0, 1.5], [0.0, 2.0, 1.5]);
        assert_eq!(coverage(&scene, &target, &[target], 32).unwrap(), 1.0);
        let away = cam([2.0, 2.0, 1.5], [4.0, 2.0, 1.5]);
        let c = coverage(&scene, &target, &[away], 32).unwrap();
        assert!(c < 0.05, "{c}");
    }
}
