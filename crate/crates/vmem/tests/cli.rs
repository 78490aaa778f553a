use std::path::Path;
use std::process::Command;

use vmem::formats::{load_trajectory, save_trajectory};

fn vmem(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_vmem")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn strip_timings(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.remove("retrieval_ms");
            m.remove("write_ms");
            m.remove("out");
            m.values_mut().for_each(strip_timings);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_timings),
        _ => {}
    }
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn explore_writes_reports_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("loop.json");
    let t = load_trajectory("preset:two_rooms_tour", Some(4), 64).unwrap();
    save_trajectory(&t, &traj).unwrap();
    let runs: Vec<_> = ["a", "b"].iter().map(|n| dir.path().join(n)).collect();
    for out in &runs {
        let (code, err) = vmem(&[
            "explore", "--scene", "two_rooms", "--traj", traj.to_str().unwrap(), "--k", "4",
            "--noise-sigma", "0.02", "--seed", "5", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{err}");
    }
    for f in ["frames.csv", "memory.vmem"] {
        assert_eq!(std::fs::read(runs[0].join(f)).unwrap(), std::fs::read(runs[1].join(f)).unwrap(), "{f}");
    }
    let metrics = json(&runs[0].join("metrics.json"));
    assert_eq!(metrics["run_config"]["k"], serde_json::json!([4]));
    assert_eq!(metrics["run_config"]["noise_sigma"], serde_json::json!(0.02));
    let frames = metrics["frames"].as_array().unwrap().len();
    assert_eq!(frames, t.len() - 1);
    let mut logs: Vec<_> = runs.iter().map(|r| json(&r.join("episode_log.json"))).collect();
    assert!(logs[0]["run_config"].is_object());
    logs.iter_mut().for_each(strip_timings);
    assert_eq!(logs[0], logs[1]);
    let csv_rows = std::fs::read_to_string(runs[0].join("frames.csv")).unwrap().lines().count();
    assert_eq!(csv_rows, frames + 1);
}

#[test]
fn ablate_emits_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("abl");
    let (code, err) = vmem(&[
        "ablate", "--scene", "two_rooms", "--traj", "preset:two_rooms_crossing", "--size", "48",
        "--strategy", "vmem,temporal,camdist,fov", "--k", "4,17", "--cycle", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let summary = std::fs::read_to_string(out.join("ablation_summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 9);
    assert!(lines[1].starts_with("vmem,4,"));
    assert!(lines[8].starts_with("fov,17,"));
    let doc = json(&out.join("ablation.json"));
    assert_eq!(doc["runs"].as_array().unwrap().len(), 8);
    assert!(doc["runs"][0]["revisit_recall"].is_number());
    let per_frame = std::fs::read_to_string(out.join("ablation.csv")).unwrap().lines().count();
    let frames = doc["runs"][0]["frames"].as_u64().unwrap() as usize;
    assert_eq!(per_frame, 8 * frames + 1);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = out.to_str().unwrap();
    let (code, err) = vmem(&["explore", "--scene", "two_rooms", "--traj", "missing/loop.json", "--out", o]);
    assert_eq!(code, 1);
    assert!(err.contains("missing/loop.json"), "{err}");
    let (code, _) = vmem(&["explore", "--scene", "two_rooms", "--traj", "preset:corridor_lap", "--strategy", "magic", "--out", o]);
    assert_eq!(code, 1);
    let (code, err) = vmem(&["explore", "--scene", "two_rooms", "--traj", "preset:corridor_lap", "--sigma", "0", "--out", o]);
    assert_eq!(code, 1);
    assert!(err.contains("sigma"), "{err}");
    let (code, err) = vmem(&["explore", "--bogus-flag"]);
    assert_eq!(code, 1);
    assert!(err.contains("Usage"), "{err}");
    let (code, _) = vmem(&["frobnicate"]);
    assert_eq!(code, 1);
    let (code, _) = vmem(&["--help"]);
    assert_eq!(code, 0);
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.vmem");
    std::fs::write(&bad, b"NOPE").unwrap();
    let (code, err) = vmem(&["snapshot", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("bad snapshot header"), "{err}");
}

#[test]
fn snapshot_and_render_debug_commands() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let (code, err) = vmem(&[
        "cycle", "--scene", "corridor_loop", "--traj", "preset:corridor_lap", "--size", "64", "--out",
        run.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let snap = run.join("memory.vmem");
    let json_out = dir.path().join("snap.json");
    let resaved = dir.path().join("ext/m.vmem");
    let (code, err) = vmem(&[
        "snapshot", snap.to_str().unwrap(), "--to-json", json_out.to_str().unwrap(), "--out",
        resaved.to_str().unwrap(), "--frames-dir", "frames",
    ]);
    assert_eq!(code, 0, "{err}");
    let doc = json(&json_out);
    assert!(!doc["surfels"].as_array().unwrap().is_empty());
    assert!(doc["views"].as_array().unwrap().iter().any(|v| v["status"] == "discarded"));
    assert!(dir.path().join("ext/frames").is_dir());

    let png = dir.path().join("ids.png");
    let frames = dir.path().join("ctx");
    let (code, err) = vmem(&[
        "render-debug", "--snapshot", resaved.to_str().unwrap(), "--traj", "preset:corridor_lap", "--size", "64",
        "--index", "3", "--out", png.to_str().unwrap(), "--frames-out", frames.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let img = image::open(&png).unwrap().to_rgb8();
    assert_eq!((img.width(), img.height()), (128, 128));
    assert!(img.pixels().any(|p| p.0 != [0, 0, 0]));
    assert!(std::fs::read_dir(&frames).unwrap().count() >= 1);
}
