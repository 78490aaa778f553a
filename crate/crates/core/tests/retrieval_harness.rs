mod common;

use std::collections::HashMap;

use rand::Rng;
use vmem_core::harness::*;
use vmem_core::raster::rasterize_ids;
use vmem_core::retrieval::{baseline_camera_distance, retrieve_frames, vote_topk};
use vmem_core::world::{preset, render, two_rooms, Scene};
use vmem_core::{Camera, MergeConfig, RetrievalConfig, Strategy, SurfelStore, Vec3, View};

fn cam(x: f64, y: f64, yaw: f64, size: u32) -> Camera {
    yaw_camera(Vec3::new(x, y, EYE_HEIGHT), yaw, 0.0, default_intrinsics(size))
}

fn store_for(scene: &Scene) -> SurfelStore {
    SurfelStore::new(MergeConfig { scene_diagonal: scene.diagonal(), ..MergeConfig::default() }).unwrap()
}

fn write(store: &mut SurfelStore, scene: &Scene, frame: u32, camera: Camera) -> vmem_core::WriteReport {
    let out = render(scene, &camera);
    let view = View { frame_index: frame, image: out.rgb, camera };
    store.write_views(vec![view], &[out.pointmap]).unwrap()
}

#[test]
fn vote_topk_matches_brute_force() {
    let scene = two_rooms(0).unwrap();
    let mut r = common::rng(3);
    let cfg = RetrievalConfig::default();
    for trial in 0..5 {
        let mut store = store_for(&scene);
        for f in 1..=12 {
            let c = cam(r.gen_range(0.5..7.5), r.gen_range(0.5..3.5), r.gen_range(0.0..360.0), 96);
            write(&mut store, &scene, f, c);
        }
        let target = cam(r.gen_range(0.5..7.5), r.gen_range(0.5..3.5), r.gen_range(0.0..360.0), 128);
        let image = rasterize_ids(&store, &target);

        let mut votes: HashMap<u32, u64> = HashMap::new();
        for y in 0..image.height {
            for x in 0..image.width {
                for &f in image.views_at(&store, x, y) {
                    *votes.entry(f).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(u32, u64)> = votes.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(b.0.cmp(&a.0)));
        let sim = cfg.pose_similarity(scene.diagonal());
        for k in [1, 2, 4, 8] {
            let mut kept: Vec<u32> = Vec::new();
            for &(f, _) in &ranked {
                if kept.len() == k {
                    break;
                }
                let p = store.camera_of(f).unwrap().pose;
                if !kept.iter().any(|&o| sim.similar(&p, &store.camera_of(o).unwrap().pose)) {
                    kept.push(f);
                }
            }
            assert_eq!(vote_topk(&image, &store, k, &cfg), kept, "trial {trial} k {k}");
        }
    }
}

#[test]
fn rewriting_identical_view_keeps_surfel_count() {
    let scene = two_rooms(0).unwrap();
    let mut store = store_for(&scene);
    let c = cam(1.5, 2.0, 30.0, 256);
    write(&mut store, &scene, 1, c);
    let n = store.len();
    assert!(n > 0);
    let report = write(&mut store, &scene, 2, c);
    assert_eq!(report.surfels_added, 0);
    assert_eq!(store.len(), n);
    assert_eq!(report.discarded_views, vec![1]);
    assert!(store.surfels().iter().all(|s| s.views == vec![2]));
    store.check_invariants().unwrap();
}

#[test]
fn pose_similar_views_collapse_to_newest() {
    let scene = two_rooms(0).unwrap();
    let mut store = store_for(&scene);
    write(&mut store, &scene, 1, cam(1.5, 2.0, 30.0, 128));
    write(&mut store, &scene, 2, cam(1.55, 2.0, 35.0, 128));
    write(&mut store, &scene, 3, cam(1.6, 2.05, 40.0, 128));
    assert_eq!(store.views().keys().copied().collect::<Vec<_>>(), vec![3]);
    assert_eq!(store.discarded().keys().copied().collect::<Vec<_>>(), vec![1, 2]);
    store.check_invariants().unwrap();
}

#[test]
fn occluded_nearer_view_loses_to_same_room_view() {
    let scene = two_rooms(0).unwrap();
    let target = cam(1.2, 3.0, 180.0, 128);
    let room_a = cam(3.5, 1.0, 150.0, 256);
    let room_b = cam(4.15, 3.0, 180.0, 256);
    let c = target.pose.center();
    assert!(room_b.pose.center().distance(c) < room_a.pose.center().distance(c));

    let mut store = store_for(&scene);
    write(&mut store, &scene, 1, room_a);
    write(&mut store, &scene, 2, room_b);
    let cfg = RetrievalConfig { k: 1, ..RetrievalConfig::default() };
    assert_eq!(retrieve_frames(&store, &[target], &cfg).unwrap(), vec![1]);
    assert_eq!(baseline_camera_distance(&store, &[target], 2).unwrap(), vec![2, 1]);
}

#[test]
fn episodes_are_deterministic_and_consistent() {
    let scene = preset("two_rooms", 0).unwrap();
    let traj = trajectory_preset("two_rooms_tour", default_intrinsics(96), 4).unwrap();
    let mut cfg = EpisodeConfig::default();
    cfg.noise.depth_sigma_rel = 0.02;
    cfg.noise.dropout_prob = 0.05;
    cfg.noise.seed = 9;
    let a = run_exploration(&scene, &traj, &cfg, &NoClock).unwrap();
    let b = run_exploration(&scene, &traj, &cfg, &NoClock).unwrap();
    assert_eq!(a.log, b.log);
    check_log(&a.log, &scene, &traj).unwrap();
    a.store.check_invariants().unwrap();
    let frames: Vec<u32> = a.log.frames().collect();
    assert_eq!(frames, (2..=traj.len() as u32).collect::<Vec<_>>());
    for s in &a.log.steps {
        assert!(s.retrieved.len() <= cfg.retrieval.k);
        assert!(s.coverage.iter().all(|c| (0.0..=1.0).contains(c)));
    }
    let wrong = trajectory_preset("two_rooms_crossing", default_intrinsics(96), 4).unwrap();
    assert!(check_log(&a.log, &scene, &wrong).is_err());
}

#[test]
fn noise_free_episode_has_negligible_pose_error() {
    let scene = preset("corridor_loop", 0).unwrap();
    let traj = trajectory_preset("corridor_lap", default_intrinsics(64), 4).unwrap();
    let r = run_and_score(&scene, &traj, &EpisodeConfig::default(), 1).unwrap();
    assert!(r.mean_r_dist < 1e-6 && r.mean_t_dist < 1e-6, "{} {}", r.mean_r_dist, r.mean_t_dist);
    assert_eq!(r.revisit_recall, None);
}

#[test]
fn cycle_far_half_is_outside_temporal_window() {
    let scene = preset("corridor_loop", 0).unwrap();
    let traj = cycle_protocol(&trajectory_preset("corridor_lap", default_intrinsics(48), 4).unwrap()).unwrap();
    let matches = outbound_matches(&traj, scene.diagonal());
    let turn = traj.cycle_turn.unwrap();
    assert_eq!(matches.len(), turn);
    for (j, m, far) in matches {
        assert_eq!(m, 2 * turn - j);
        if far {
            assert!(j - m > 4 * 4);
        }
    }
}

#[test]
fn ablation_grid_order() {
    let g = ablation_grid(&EpisodeConfig::default(), &Strategy::ALL, &[4, 17]);
    let labels: Vec<(&str, usize)> = g.iter().map(|c| (c.label(), c.retrieval.k)).collect();
    assert_eq!(labels[0], ("vmem", 4));
    assert_eq!(labels[1], ("vmem", 17));
    assert_eq!(labels.len(), 8);
}
