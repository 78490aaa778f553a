#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vmem_core::harness::{default_intrinsics, yaw_camera, EYE_HEIGHT};
use vmem_core::world::{render, two_rooms};
use vmem_core::{Camera, MergeConfig, SurfelStore, Vec3, View};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_camera(r: &mut ChaCha8Rng, size: u32) -> Camera {
    let eye = Vec3::new(r.gen_range(0.4..7.6), r.gen_range(0.4..3.6), EYE_HEIGHT + r.gen_range(-0.3..0.3));
    yaw_camera(eye, r.gen_range(0.0..360.0), r.gen_range(-20.0..20.0), default_intrinsics(size))
}

/// Store built by writing `views` random two-room frames one at a time.
pub fn random_store(seed: u64, views: usize, size: u32, sigma: f64) -> SurfelStore {
    let scene = two_rooms(seed).unwrap();
    let mut r = rng(seed);
    let mut store = SurfelStore::new(MergeConfig {
        sigma,
        scene_diagonal: scene.diagonal(),
        ..MergeConfig::default()
    })
    .unwrap();
    for _ in 0..views {
        let camera = random_camera(&mut r, size);
        let out = render(&scene, &camera);
        let view = View {
            frame_index: store.next_frame(),
            image: out.rgb,
            camera,
        };
        store.write_views(vec![view], &[out.pointmap]).unwrap();
    }
    store
}

/// Observational equality of two stores.
pub fn assert_same_store(a: &SurfelStore, b: &SurfelStore) {
    assert_eq!(a.config(), b.config());
    assert_eq!(a.next_frame(), b.next_frame());
    assert_eq!(a.surfels(), b.surfels());
    assert_eq!(a.views(), b.views());
    assert_eq!(a.discarded(), b.discarded());
}
