mod common;

use rand::Rng;
use vmem_core::raster::{ray_disk_hit, rasterize_surfels, raycast_surfels_oracle, EMPTY};
use vmem_core::Vec3;

#[test]
fn rasterizer_matches_raycast_on_random_scenes() {
    for seed in 0..20 {
        let mut r = common::rng(seed);
        let cam = common::camera(common::random_pose(&mut r, 3.0), 48);
        let n = r.gen_range(1..800);
        let surfels = common::surfels_in_view(&mut r, &cam, n);
        let fast = rasterize_surfels(&surfels, &cam);
        let slow = raycast_surfels_oracle(&surfels, &cam);
        let mismatches = fast.ids.iter().zip(&slow.ids).filter(|(a, b)| a != b).count();
        assert_eq!(mismatches, 0, "seed {seed}: {mismatches} mismatched pixels");
        assert!(fast.covered_pixels() > 0, "seed {seed}: nothing covered");
    }
}

#[test]
fn depth_ties_go_to_lower_id() {
    let cam = common::camera(vmem_core::CameraPose::IDENTITY, 16);
    let s = vmem_core::Surfel::new(Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.0, 0.0, -1.0), 0.5, 1);
    let mut t = s.clone();
    t.views = vec![2];
    let pair = [s, t];
    let img = rasterize_surfels(&pair, &cam);
    assert!(img.covered_pixels() > 0);
    assert!(img.ids.iter().all(|&id| id == 0 || id == EMPTY));
    assert_eq!(img, raycast_surfels_oracle(&pair, &cam));
}

#[test]
fn ray_disk_hit_respects_radius_and_orientation() {
    let ray = vmem_core::geometry::Ray {
        origin: Vec3::ZERO,
        direction: Vec3::Z,
    };
    let c = Vec3::new(0.3, 0.0, 5.0);
    assert!(ray_disk_hit(&ray, c, Vec3::Z, 0.31).is_some());
    assert!(ray_disk_hit(&ray, c, Vec3::Z, 0.29).is_none());
    // either side of the disk
    assert!(ray_disk_hit(&ray, c, -Vec3::Z, 0.31).is_some());
    // edge-on
    assert!(ray_disk_hit(&ray, c, Vec3::X, 10.0).is_none());
    // behind the origin
    assert!(ray_disk_hit(&ray, -c, Vec3::Z, 1.0).is_none());
}

#[test]
fn disks_behind_and_straddling_the_camera() {
    for seed in 0..20 {
        let mut r = common::rng(100 + seed);
        let cam = common::camera(common::random_pose(&mut r, 2.0), 40);
        let surfels: Vec<vmem_core::Surfel> = (0..400)
            .map(|i| {
                let local = Vec3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-0.4..0.6));
                vmem_core::Surfel::new(cam.pose.to_world(local), common::unit_vec(&mut r), r.gen_range(0.01..0.5), i + 1)
            })
            .collect();
        let fast = rasterize_surfels(&surfels, &cam);
        assert_eq!(fast, raycast_surfels_oracle(&surfels, &cam), "seed {seed}");
    }
}
