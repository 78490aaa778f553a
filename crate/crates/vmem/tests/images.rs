mod common;

use std::collections::HashSet;

use vmem::images::{decode_png, dump_frame, dump_id_image, encode_png, palette};
use vmem_core::raster::{rasterize_ids, IdImage};
use vmem_core::{MergeConfig, Surfel, SurfelStore, Vec3};

#[test]
fn empty_id_image_is_black() {
    let dir = tempfile::tempdir().unwrap();
    let store = SurfelStore::new(MergeConfig::default()).unwrap();
    let path = dir.path().join("e.png");
    dump_id_image(&IdImage::empty(16, 8), &store, &path).unwrap();
    let img = decode_png(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!((img.width, img.height), (16, 8));
    assert!(img.data.iter().all(|&b| b == 0));
}

#[test]
fn two_frames_give_three_colors_and_stable_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = SurfelStore::new(MergeConfig::default()).unwrap();
    store.insert_or_merge(Surfel::new(Vec3::new(-0.5, 0.0, 3.0), Vec3::new(0.0, 0.0, -1.0), 0.4, 1));
    store.insert_or_merge(Surfel::new(Vec3::new(0.5, 0.0, 3.0), Vec3::new(0.0, 0.0, -1.0), 0.4, 2));
    let cam = vmem_core::Camera::new(
        vmem_core::CameraPose::IDENTITY,
        vmem_core::Intrinsics::centered(32.0, 64, 64).unwrap(),
    );
    let ids = rasterize_ids(&store, &cam);
    let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
    dump_id_image(&ids, &store, &a).unwrap();
    dump_id_image(&ids, &store, &b).unwrap();
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let img = decode_png(&bytes).unwrap();
    let colors: HashSet<[u8; 3]> = img.data.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
    assert_eq!(colors.len(), 3);
    assert!(colors.contains(&[0, 0, 0]) && colors.contains(&palette(1)) && colors.contains(&palette(2)));
}

#[test]
fn palette_never_black_and_mostly_distinct() {
    let colors: HashSet<[u8; 3]> = (1..2000).map(palette).collect();
    assert!(!colors.contains(&[0, 0, 0]));
    assert!(colors.len() > 1990);
}

#[test]
fn frames_round_trip_losslessly() {
    let dir = tempfile::tempdir().unwrap();
    let scene = vmem_core::world::two_rooms(0).unwrap();
    let mut r = common::rng(4);
    let out = vmem_core::world::render(&scene, &common::random_camera(&mut r, 40));
    let path = dir.path().join("f.png");
    dump_frame(&out.rgb, &path).unwrap();
    assert_eq!(decode_png(&std::fs::read(&path).unwrap()).unwrap(), out.rgb);
    assert_eq!(decode_png(&encode_png(&out.rgb).unwrap()).unwrap(), out.rgb);
}
