use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pcd_core::integration::object_bounding_box;
use pcd_core::io::{load_gray, save_gray_png, write_qmap};
use pcd_core::pcd::{compute_crack_map, crack_artifact_score};
use pcd_core::qa_models::squared_error_map;
use pcd_core::synth::{carve, random_fissures, ShadedDisc};
use pcd_core::{GrayFrame, PcdConfig, Raster};

fn pcd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcd"))
        .args(args)
        .env("RUST_LOG", "info")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn cracked(size: usize, seed: u64) -> (GrayFrame, GrayFrame) {
    let disc = ShadedDisc::centered(size, size, size as f64 * 0.4);
    let r: GrayFrame = disc.render(size, size);
    let f = random_fissures(&disc, 4, size as f64 * 0.2, 3.0, seed);
    let (d, _) = carve(&r, &f, disc.bg);
    (r, d)
}

/// Writes the pair and returns the paths of the reloaded (8-bit) frames.
fn write_pair(dir: &Path, r: &GrayFrame, d: &GrayFrame) -> (PathBuf, PathBuf) {
    let (rp, dp) = (dir.join("ref.png"), dir.join("dist.png"));
    save_gray_png(r, &rp).unwrap();
    save_gray_png(d, &dp).unwrap();
    (rp, dp)
}

fn write_sequence(dir: &Path, frames: &[GrayFrame]) {
    fs::create_dir_all(dir).unwrap();
    for (i, f) in frames.iter().enumerate() {
        save_gray_png(f, dir.join(format!("{i:04}.png"))).unwrap();
    }
}

fn field(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in {line:?}"))
        .parse()
        .unwrap()
}

#[test]
fn detect_identical_frames() {
    let tmp = tempfile::tempdir().unwrap();
    let (r, _) = cracked(40, 1);
    let (rp, _) = write_pair(tmp.path(), &r, &r);
    let o = pcd(&["detect", s(&rp), s(&rp)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "CAS=0.000000");
}

#[test]
fn detect_map_matches_library() {
    let tmp = tempfile::tempdir().unwrap();
    let (r, d) = cracked(48, 2);
    let (rp, dp) = write_pair(tmp.path(), &r, &d);
    let (r, d): (GrayFrame, GrayFrame) = (load_gray(&rp).unwrap(), load_gray(&dp).unwrap());
    for extra in [&[][..], &["--no-contrast", "--no-laplacian", "--t1", "0.3"][..]] {
        let map_path = tmp.path().join("map.png");
        let mut args = vec!["detect", s(&rp), s(&dp), "--out", s(&map_path)];
        args.extend_from_slice(extra);
        let o = pcd(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

        let cfg = if extra.is_empty() {
            PcdConfig::default()
        } else {
            PcdConfig {
                t1: 0.3,
                contrast_modulation: false,
                laplacian_modulation: false,
                ..PcdConfig::default()
            }
        };
        let want = compute_crack_map(&r, &d, &cfg).unwrap();
        assert_eq!(
            stdout(&o).trim(),
            format!("CAS={:.6}", crack_artifact_score(&want).unwrap())
        );
        let got: GrayFrame = load_gray(&map_path).unwrap();
        for (a, b) in got.data().iter().zip(want.data()) {
            assert_eq!(*a > 0.0, *b > 0.5);
            assert_eq!((a * 255.0).round(), (b * 255.0).round());
        }
    }
}

#[test]
fn detect_crop_uses_bounding_box() {
    let tmp = tempfile::tempdir().unwrap();
    let (r, d) = cracked(48, 3);
    let (rp, dp) = write_pair(tmp.path(), &r, &d);
    let map_path = tmp.path().join("map.png");
    assert!(pcd(&["detect", s(&rp), s(&dp), "--crop", "--out", s(&map_path)]).status.success());
    let (r, d): (GrayFrame, GrayFrame) = (load_gray(&rp).unwrap(), load_gray(&dp).unwrap());
    let rect = object_bounding_box(&r, &d, r.get(0, 0), 0.02).unwrap();
    let map: GrayFrame = load_gray(&map_path).unwrap();
    assert_eq!(map.dims(), (rect.width(), rect.height()));
    assert!(rect.width() < 48);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let (r, _) = cracked(32, 1);
    let small = GrayFrame::constant(16, 16, 0.5).unwrap();
    let (rp, sp) = write_pair(tmp.path(), &r, &small);
    let missing = tmp.path().join("missing.png");

    assert_eq!(pcd(&["detect", s(&rp), s(&sp)]).status.code(), Some(2));
    assert_eq!(pcd(&["detect", s(&rp), s(&missing)]).status.code(), Some(1));
    assert_eq!(pcd(&["detect", s(&rp), s(&rp), "--t1", "-1"]).status.code(), Some(2));
    assert_eq!(pcd(&["detect", s(&rp), s(&rp), "--window-size", "4"]).status.code(), Some(2));

    let empty = tmp.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    assert_eq!(pcd(&["score", s(&empty), s(&empty)]).status.code(), Some(1));

    let bad_manifest = tmp.path().join("m.csv");
    fs::write(&bad_manifest, "id,ref,dist\n").unwrap();
    let out_dir = tmp.path().join("rep");
    assert_eq!(
        pcd(&["evaluate", s(&bad_manifest), "--out-dir", s(&out_dir)]).status.code(),
        Some(2)
    );
}

#[test]
fn evaluate_with_constant_predictions_exits_numerical() {
    let tmp = tempfile::tempdir().unwrap();
    let (r, _) = cracked(32, 1);
    let mut manifest = String::from("stimulus_id,ref_dir,dist_dir,mos\n");
    for k in 0..4 {
        write_sequence(&tmp.path().join(format!("s{k}")), &[r.clone()]);
        manifest.push_str(&format!("s{k},s{k},s{k},{k}\n"));
    }
    let mp = tmp.path().join("m.csv");
    fs::write(&mp, manifest).unwrap();
    let out_dir = tmp.path().join("rep");
    let o = pcd(&["evaluate", s(&mp), "--out-dir", s(&out_dir), "--metric", "cas"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(out_dir.join("report.csv").is_file());
}

#[test]
fn score_identical_sequences() {
    let tmp = tempfile::tempdir().unwrap();
    let (r, _) = cracked(32, 4);
    let dir = tmp.path().join("seq");
    write_sequence(&dir, &[r.clone(), r]);
    let o = pcd(&["score", s(&dir), s(&dir), "--metric", "ssim", "--stride", "1"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let line = out.lines().next().unwrap();
    assert!(line.starts_with("metric=ssim "));
    assert_eq!(field(line, "base"), field(line, "enhanced"));
    assert_eq!(field(line, "cas"), 0.0);
}

#[test]
fn score_stride_samples_every_tenth_frame() {
    let tmp = tempfile::tempdir().unwrap();
    let frames: Vec<_> = (0..30).map(|i| cracked(24, i).1).collect();
    let refs: Vec<_> = (0..30).map(|i| cracked(24, i).0).collect();
    write_sequence(&tmp.path().join("r"), &refs);
    write_sequence(&tmp.path().join("d"), &frames);
    let o = pcd(&["score", s(&tmp.path().join("r")), s(&tmp.path().join("d")), "--metric", "lumapsnr"]);
    assert!(o.status.success());
    let log = String::from_utf8_lossy(&o.stderr);
    assert_eq!(log.matches("scored frame").count(), 3, "{log}");
    for i in [0, 10, 20] {
        assert!(log.contains(&format!("scored frame {i}\n")), "{log}");
    }
}

#[test]
fn score_lumapsnr_penalizes_cracks() {
    let tmp = tempfile::tempdir().unwrap();
    let (r, d) = cracked(48, 5);
    write_sequence(&tmp.path().join("r"), &[r]);
    write_sequence(&tmp.path().join("d"), &[d]);
    let o = pcd(&["score", s(&tmp.path().join("r")), s(&tmp.path().join("d")), "--metric", "all"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<_> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    let psnr = lines.iter().find(|l| l.starts_with("metric=lumapsnr")).unwrap();
    assert!(field(psnr, "enhanced") < field(psnr, "base"), "{psnr}");
    assert!(field(psnr, "cas") > 0.0);
}

#[test]
fn config_file_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let (r, d) = cracked(48, 6);
    let (rp, dp) = write_pair(tmp.path(), &r, &d);
    let cfg = tmp.path().join("pcd.conf");
    // A huge threshold in the file silences the detector ...
    fs::write(&cfg, "# detector\nt1 = 1e6\n").unwrap();
    let o = pcd(&["--config", s(&cfg), "detect", s(&rp), s(&dp)]);
    assert_eq!(stdout(&o).trim(), "CAS=0.000000");
    // ... and an explicit flag overrides it.
    let o = pcd(&["detect", s(&rp), s(&dp), "--config", s(&cfg), "--t1", "0.75"]);
    let plain = pcd(&["detect", s(&rp), s(&dp)]);
    assert_eq!(stdout(&o), stdout(&plain));
    assert_ne!(stdout(&plain).trim(), "CAS=0.000000");

    fs::write(&cfg, "nonsense = 1\n").unwrap();
    assert_eq!(pcd(&["--config", s(&cfg), "detect", s(&rp), s(&dp)]).status.code(), Some(2));
}

#[test]
fn ablate_writes_four_maps() {
    let tmp = tempfile::tempdir().unwrap();
    let (r, d) = cracked(40, 7);
    let (rp, dp) = write_pair(tmp.path(), &r, &d);
    let out_dir = tmp.path().join("abl");
    let o = pcd(&["ablate", s(&rp), s(&dp), s(&out_dir)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 4);
    for name in ["full", "no_contrast", "no_laplacian", "neither"] {
        let m: GrayFrame = load_gray(out_dir.join(format!("{name}.png"))).unwrap();
        assert_eq!(m.dims(), (40, 40));
    }
}

#[test]
fn bench_single_iteration() {
    let o = pcd(&["bench", "--width", "64", "--height", "48", "--iterations", "1"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1);
    assert!(out.contains("size=64x48 iterations=1 "));
    assert!(field(out.trim(), "median_ms") >= 0.0);
}

#[test]
fn pool_external_map() {
    let tmp = tempfile::tempdir().unwrap();
    let (r, d) = cracked(40, 8);
    let (rp, dp) = write_pair(tmp.path(), &r, &d);
    let (r, d): (GrayFrame, GrayFrame) = (load_gray(&rp).unwrap(), load_gray(&dp).unwrap());
    let q = squared_error_map(&r, &d).unwrap();
    let qp = tmp.path().join("e.qmap");
    write_qmap(&q, &qp).unwrap();
    let o = pcd(&["pool", s(&qp), s(&rp), s(&dp)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let line = stdout(&o);
    // QMAP stores f32, so compare loosely.
    assert!((field(line.trim(), "mean") - q.mean()).abs() < 1e-6);
    assert!(field(line.trim(), "pooled") > field(line.trim(), "mean"));
}

#[test]
fn baseline_thresholds_quality_map() {
    let tmp = tempfile::tempdir().unwrap();
    let (r, d) = cracked(40, 9);
    let (rp, dp) = write_pair(tmp.path(), &r, &d);
    let loose = pcd(&["baseline", s(&rp), s(&dp), "--model", "ssim", "--threshold", "0.99"]);
    let tight = pcd(&["baseline", s(&rp), s(&dp), "--model", "ssim", "--threshold", "0.5"]);
    assert!(loose.status.success() && tight.status.success());
    assert!(field(stdout(&loose).trim(), "flagged") >= field(stdout(&tight).trim(), "flagged"));
    assert_eq!(
        pcd(&["baseline", s(&rp), s(&dp), "--model", "vif", "--threshold", "0.5"]).status.code(),
        Some(2)
    );
}
