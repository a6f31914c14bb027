use std::path::Path;
use std::process::{Command, Output};

use hdradar::format::{TensorData, TensorFile};

fn hdradar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdradar")).args(args).env_remove("RDNET_SEED").output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = hdradar(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn empty_scene_gives_an_all_zero_range_doppler_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.json");
    std::fs::write(&scene, r#"{"noise_sigma": 0.0, "seed": 0, "targets": []}"#).unwrap();
    let (adc, rd) = (dir.path().join("adc.rdt"), dir.path().join("rd.rdt"));
    ok(&["simulate", "--scene", p(&scene), "--out", p(&adc)]);
    ok(&["dsp", "--in", p(&adc), "--out", p(&rd)]);
    let t = TensorFile::read(&rd).unwrap();
    assert_eq!(t.dims, [128, 64, 2]);
    match t.data {
        TensorData::Complex64(v) => assert!(v.iter().all(|z| z.re == 0.0 && z.im == 0.0)),
        other => panic!("unexpected dtype {:?}", other.dtype()),
    }
}

#[test]
fn point_target_round_trip_with_point_cloud_and_conv_check() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.json");
    std::fs::write(
        &scene,
        r#"{"noise_sigma": 0.0, "seed": 0, "targets": [{"range": 6.0, "velocity": 1.0, "azimuth": 10.0, "elevation": 0.0, "amplitude": 1.0}]}"#,
    )
    .unwrap();
    let [adc, rd, cloud, ra, din] = ["adc.rdt", "rd.rdt", "cloud.csv", "ra.rdt", "din.rdt"].map(|f| dir.path().join(f));
    ok(&["simulate", "--scene", p(&scene), "--out", p(&adc)]);
    ok(&["dsp", "--in", p(&adc), "--out", p(&rd), "--pointcloud", p(&cloud), "--ra", p(&ra)]);
    let csv = std::fs::read_to_string(&cloud).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "range_m,doppler_mps,azimuth_deg,elevation_deg,power");
    assert_eq!(lines.len(), 2, "{csv}");
    let range: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
    assert!((range - 6.0).abs() <= 0.1);
    assert_eq!(TensorFile::read(&ra).unwrap().dims, [128, 128]);

    let stdout = ok(&["deinterleave", "--in", p(&rd), "--out", p(&din), "--check-conv"]);
    assert!(stdout.contains("conv-equivalence max_abs_diff="), "{stdout}");
    assert_eq!(TensorFile::read(&din).unwrap().dims, [16, 128, 64]);
}

#[test]
fn flops_reproduces_the_published_cube_cost() {
    let out = ok(&["flops", "--preset", "paper", "--b-a", "900", "--b-e", "11"]);
    let cube = out.lines().find(|l| l.starts_with("rad-cube")).expect("rad-cube row");
    assert!(cube.contains("498.28"), "{out}");
    assert!(out.lines().any(|l| l.starts_with("ra-map") && l.contains("45.30")), "{out}");
}

#[test]
fn dataset_train_eval_chain() {
    let dir = tempfile::tempdir().unwrap();
    let [data, model, report, dets] = ["data", "model", "report.json", "dets.csv"].map(|f| dir.path().join(f));
    ok(&["dataset", "--frames", "4", "--seed", "3", "--out", p(&data)]);
    ok(&["train", "--dataset", p(&data), "--epochs", "1", "--out", p(&model)]);
    assert!(model.join("train_log.csv").exists());
    let stdout = ok(&["eval", "--model", p(&model), "--dataset", p(&data), "--report", p(&report), "--detections", p(&dets)]);
    assert!(stdout.starts_with("AP "), "{stdout}");
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    for key in ["ap", "ar", "f1", "range_mae", "angle_mae", "miou"] {
        assert!(r.get(key).is_some(), "missing {key} in {r}");
    }
    assert!(std::fs::read_to_string(&dets).unwrap().starts_with("frame_id,range_m,azimuth_deg,score"));
}

#[test]
fn seed_override_makes_datasets_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let make = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_hdradar"))
            .args(["dataset", "--frames", "2", "--seed", seed, "--out", p(&out)])
            .env("RDNET_SEED", "42")
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out.join("frame_00001.scene.json")).unwrap()
    };
    assert_eq!(make("a", "1"), make("b", "2"));
}

#[test]
fn ablate_reports_one_row_per_width() {
    let dir = tempfile::tempdir().unwrap();
    let [data, out] = ["data", "ablate.csv"].map(|f| dir.path().join(f));
    ok(&["dataset", "--frames", "2", "--seed", "5", "--out", p(&data)]);
    ok(&["ablate", "--channels", "8,16", "--dataset", p(&data), "--out", p(&out)]);
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "channels,f1,ap,ar,pre_encoder_bytes");
    let bytes: Vec<u64> = lines[1..].iter().map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(bytes, [8 * 128 * 64 * 4, 16 * 128 * 64 * 4]);
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let mut cfg: serde_json::Value = serde_json::from_str(&hdradar::RadarConfig::toy().to_json_string()).unwrap();
    cfg["doppler_shift"] = serde_json::json!(100.0);
    std::fs::write(&bad, cfg.to_string()).unwrap();
    let out = hdradar(&["flops", "--config", p(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("hdradar: error[validation]"));

    let missing = dir.path().join("missing.rdt");
    let out = hdradar(&["dsp", "--in", p(&missing), "--out", p(&dir.path().join("x.rdt"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("hdradar: error[io]"));

    let out = hdradar(&["--threads", "0", "flops"]);
    assert_eq!(out.status.code(), Some(2));
}
