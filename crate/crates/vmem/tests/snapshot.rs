mod common;

use rand::Rng;
use vmem::snapshot::{from_bytes, to_bytes, MAGIC};
use vmem::{load_snapshot, save_snapshot, save_snapshot_with, SaveOptions, VmemError};
use vmem_core::{MergeConfig, RetrievalConfig, Strategy, SurfelStore, Vec3};

fn retrieval() -> RetrievalConfig {
    RetrievalConfig {
        k: 17,
        strategy: Strategy::Fov,
        ..RetrievalConfig::default()
    }
}

fn snapshot_err(r: vmem::Result<impl std::fmt::Debug>) -> String {
    match r {
        Err(VmemError::Snapshot(m)) => m,
        other => panic!("expected snapshot error, got {other:?}"),
    }
}

#[test]
fn empty_store_round_trips() {
    let store = SurfelStore::new(MergeConfig::default()).unwrap();
    let bytes = to_bytes(&store, &retrieval()).unwrap();
    assert_eq!(&bytes[..4], MAGIC);
    let (back, cfg) = from_bytes(&bytes, std::path::Path::new(".")).unwrap();
    common::assert_same_store(&store, &back);
    assert_eq!(cfg, retrieval());
}

#[test]
fn random_stores_round_trip_with_query_equivalence() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..4 {
        let store = common::random_store(seed, 12, 64, 0.25);
        assert!(store.len() > 300, "only {} surfels", store.len());
        let path = dir.path().join(format!("s{seed}.vmem"));
        save_snapshot(&store, &retrieval(), &path).unwrap();
        let (back, cfg) = load_snapshot(&path).unwrap();
        common::assert_same_store(&store, &back);
        assert_eq!(cfg, retrieval());
        let mut r = common::rng(seed + 100);
        for _ in 0..50 {
            let c = Vec3::new(r.gen_range(0.0..8.0), r.gen_range(0.0..4.0), r.gen_range(0.0..3.0));
            let rad = r.gen_range(0.0..1.5);
            assert_eq!(store.radius_query(c, rad), back.radius_query(c, rad));
        }
        // saving the restored store reproduces the file
        assert_eq!(to_bytes(&back, &cfg).unwrap(), std::fs::read(&path).unwrap());
    }
}

#[test]
fn external_frames_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let store = common::random_store(9, 6, 48, 0.2);
    let path = dir.path().join("m.vmem");
    let opts = SaveOptions {
        frames_dir: Some("frames".into()),
    };
    save_snapshot_with(&store, &retrieval(), &path, &opts).unwrap();
    let pngs = std::fs::read_dir(dir.path().join("frames")).unwrap().count();
    assert_eq!(pngs, store.views().len());
    let inline_len = to_bytes(&store, &retrieval()).unwrap().len() as u64;
    assert!(std::fs::metadata(&path).unwrap().len() < inline_len);
    let (back, _) = load_snapshot(&path).unwrap();
    common::assert_same_store(&store, &back);
}

#[test]
fn discarded_views_survive_as_tombstones() {
    let scene = vmem_core::world::two_rooms(0).unwrap();
    let mut store = SurfelStore::new(MergeConfig {
        scene_diagonal: scene.diagonal(),
        ..MergeConfig::default()
    })
    .unwrap();
    let cam = |yaw: f64| {
        vmem_core::harness::yaw_camera(Vec3::new(2.0, 2.0, 1.5), yaw, 0.0, vmem_core::harness::default_intrinsics(64))
    };
    for (f, yaw) in [(1, 0.0), (2, 5.0), (3, 90.0)] {
        let out = vmem_core::world::render(&scene, &cam(yaw));
        let v = vmem_core::View {
            frame_index: f,
            image: out.rgb,
            camera: cam(yaw),
        };
        store.write_views(vec![v], &[out.pointmap]).unwrap();
    }
    assert_eq!(store.discarded().len(), 1);
    let (back, _) = from_bytes(&to_bytes(&store, &retrieval()).unwrap(), std::path::Path::new(".")).unwrap();
    common::assert_same_store(&store, &back);
}

#[test]
fn truncation_names_the_section() {
    let store = common::random_store(1, 3, 32, 0.3);
    let bytes = to_bytes(&store, &retrieval()).unwrap();
    let base = std::path::Path::new(".");
    let config_end = 6 + 7 * 8 + 16 + 4 * 3 + 16 + 1 + 8 + 4;
    let cases = [(5, "header"), (20, "config"), (config_end + 3, "surfels"), (bytes.len() - 1, "views")];
    for (cut, section) in cases {
        let msg = snapshot_err(from_bytes(&bytes[..cut], base));
        assert!(msg.contains(&format!("incomplete {section} section")), "cut {cut}: {msg}");
    }
}

#[test]
fn bad_magic_and_version_fail_closed() {
    let store = SurfelStore::new(MergeConfig::default()).unwrap();
    let mut bytes = to_bytes(&store, &retrieval()).unwrap();
    let base = std::path::Path::new(".");
    let mut wrong = bytes.clone();
    wrong[0] = b'X';
    assert_eq!(snapshot_err(from_bytes(&wrong, base)), "bad snapshot header");
    bytes[4] = 9;
    assert!(snapshot_err(from_bytes(&bytes, base)).contains("unsupported snapshot version 9"));
    let mut trailing = to_bytes(&store, &retrieval()).unwrap();
    trailing.push(0);
    assert!(snapshot_err(from_bytes(&trailing, base)).contains("trailing"));
}

#[test]
fn invalid_records_are_named() {
    let store = common::random_store(2, 2, 32, 0.3);
    let bytes = to_bytes(&store, &retrieval()).unwrap();
    let config_end = 6 + 7 * 8 + 16 + 4 * 3 + 16 + 1 + 8 + 4;
    let surfels_start = config_end + 8;
    // radius of surfel 0 set to -1
    let mut bad = bytes.clone();
    bad[surfels_start + 48..surfels_start + 56].copy_from_slice(&(-1.0f64).to_le_bytes());
    let msg = snapshot_err(from_bytes(&bad, std::path::Path::new(".")));
    assert!(msg.starts_with("surfel 0:"), "{msg}");
}

#[test]
fn missing_file_is_io_error() {
    let err = load_snapshot(std::path::Path::new("/definitely/not/here.vmem")).unwrap_err();
    assert!(matches!(err, VmemError::Io { .. }));
    assert!(err.to_string().contains("/definitely/not/here.vmem"));
}
