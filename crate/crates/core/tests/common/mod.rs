#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use vmem_core::geometry::{Camera, CameraPose, Intrinsics, Quaternion};
use vmem_core::{Surfel, Vec3};

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn unit_vec(r: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_pose(r: &mut ChaCha8Rng, spread: f64) -> CameraPose {
    let q = Quaternion::from_axis_angle(unit_vec(r), r.gen_range(0.0..std::f64::consts::PI));
    let t = Vec3::new(
        r.gen_range(-spread..spread),
        r.gen_range(-spread..spread),
        r.gen_range(-spread..spread),
    );
    CameraPose::new(q, t)
}

pub fn camera(pose: CameraPose, size: u32) -> Camera {
    Camera::new(pose, Intrinsics::from_hfov(60f64.to_radians(), size, size).unwrap())
}

/// Surfels scattered in front of `cam`, some sharing positions to exercise ties.
pub fn surfels_in_view(r: &mut ChaCha8Rng, cam: &Camera, n: usize) -> Vec<Surfel> {
    let mut out: Vec<Surfel> = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 && r.gen_bool(0.05) {
            let mut dup = out[r.gen_range(0..out.len())].clone();
            dup.views = vec![i as u32 + 1];
            out.push(dup);
            continue;
        }
        let local = Vec3::new(r.gen_range(-1.5..1.5), r.gen_range(-1.5..1.5), r.gen_range(0.5..4.0));
        let p = cam.pose.to_world(local);
        out.push(Surfel::new(p, unit_vec(r), r.gen_range(0.005..0.3), i as u32 + 1));
    }
    out
}
