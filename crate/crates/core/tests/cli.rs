use std::fs;
use std::path::{Path, PathBuf};

use rotdet::dataio::{read_box_csv_path, read_fmap_path, read_manifest, write_box_csv_path, write_fmap_path, ClassMap};
use rotdet::kernels::FeatureMap;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("rotdet").chain(args.iter().copied());
    let code = rotdet::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn iou_identical_boxes() {
    let (code, out, _) = run(&[
        "iou", "--a", "0", "0", "4", "2", "0.3", "--b", "0", "0", "4", "2", "0.3",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), "1.000000");
}

#[test]
fn iou_degrees_and_negative_values() {
    let (code, out, _) = run(&[
        "iou",
        "--a",
        "-1",
        "-1",
        "2",
        "2",
        "0",
        "--b",
        "-1",
        "-1",
        "2",
        "2",
        "90",
        "--degrees",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), "1.000000");
}

#[test]
fn usage_errors() {
    let (code, out, err) = run(&["frobnicate"]);
    assert_ne!(code, 0);
    assert!(out.is_empty());
    assert!(err.contains("Usage"), "{err}");

    let (code, _, err) = run(&["iou", "--a", "0", "0", "4", "2"]);
    assert_ne!(code, 0);
    assert!(!err.is_empty());

    let (code, _, err) = run(&["iou", "--a", "0", "0", "0", "2", "0", "--b", "0", "0", "1", "1", "0"]);
    assert_ne!(code, 0);
    assert!(err.starts_with("error:"), "{err}");

    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("selftest"));
}

#[test]
fn tile_manifest_lines() {
    let (code, out, _) = run(&[
        "tile", "--width", "1848", "--height", "1848", "--patch", "1024", "--stride", "824",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 4);
    let tiles = read_manifest(out.as_bytes()).unwrap();
    assert_eq!(tiles[3].x_off, 824);
    assert_eq!(tiles[3].y_off, 824);
}

#[test]
fn eval_fixture() {
    let (code, out, err) = run(&[
        "eval",
        "--dets",
        p(&fixture("ap_dets.csv")),
        "--gt",
        p(&fixture("ap_gt.txt")),
        "--iou",
        "0.5",
        "--interp",
        "allpoint",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("plane\t0.833333"), "{out}");
    assert!(out.contains("mAP\t0.833333"), "{out}");

    let (code, out, _) = run(&[
        "eval",
        "--dets",
        p(&fixture("ap_dets.csv")),
        "--gt",
        p(&fixture("ap_gt.txt")),
        "--interp",
        "11point",
    ]);
    assert_eq!(code, 0);
    let map: f64 = out.lines().last().unwrap().split('\t').nth(1).unwrap().parse().unwrap();
    assert!((map - 0.8333).abs() <= 0.05);
}

#[test]
fn encode_decode_round_trip() {
    let (code, out, _) = run(&[
        "encode", "--mode", "local", "--ref", "10", "10", "8", "4", "0.2", "--target", "12", "9", "9", "5", "0.4",
    ]);
    assert_eq!(code, 0);
    let code_vals: Vec<&str> = out.split_whitespace().collect();
    assert_eq!(code_vals.len(), 5);
    let mut args = vec![
        "decode", "--mode", "local", "--ref", "10", "10", "8", "4", "0.2", "--code",
    ];
    args.extend(code_vals.iter().copied());
    let (code, out, _) = run(&args);
    assert_eq!(code, 0);
    let got: Vec<f64> = out.split_whitespace().map(|s| s.parse().unwrap()).collect();
    for (g, w) in got.iter().zip([12.0, 9.0, 9.0, 5.0, 0.4]) {
        assert!((g - w).abs() < 1e-6, "{out}");
    }

    let (code, out, _) = run(&[
        "encode", "--mode", "hdelta", "--ref", "0", "0", "4", "4", "--target", "0", "0", "4", "4",
    ]);
    assert_eq!(code, 0);
    assert!(out.split_whitespace().all(|v| v.parse::<f64>().unwrap() == 0.0));

    let (code, out, _) = run(&[
        "encode",
        "--mode",
        "transform",
        "--ref",
        "0",
        "0",
        "4",
        "4",
        "--target",
        "0",
        "0",
        "4",
        "4",
        "0",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), "1.000000000 0.000000000 0.000000000 1.000000000");

    let (code, _, _) = run(&[
        "encode", "--mode", "hdelta", "--ref", "0", "0", "4", "4", "1", "--target", "0", "0", "4", "4",
    ]);
    assert_ne!(code, 0);
}

#[test]
fn nms_and_synth_and_merge() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["synth", "--seed", "7", "--out-dir", p(dir.path()), "--count", "20"]);
    assert_eq!(code, 0, "{err}");
    let first = fs::read(dir.path().join("dets.csv")).unwrap();
    let other = dir.path().join("again");
    run(&["synth", "--seed", "7", "--out-dir", p(&other), "--count", "20"]);
    assert_eq!(first, fs::read(other.join("dets.csv")).unwrap());
    assert_eq!(
        fs::read(dir.path().join("gt.txt")).unwrap(),
        fs::read(other.join("gt.txt")).unwrap()
    );

    let kept = dir.path().join("kept.csv");
    let (code, _, _) = run(&[
        "nms",
        "--in",
        p(&dir.path().join("dets.csv")),
        "--iou",
        "0.1",
        "--out",
        p(&kept),
    ]);
    assert_eq!(code, 0);
    let mut c = ClassMap::new();
    assert!(!read_box_csv_path(&kept, &mut c).unwrap().is_empty());

    // one tile file per manifest entry, every tile carrying the same detection
    let manifest = dir.path().join("tiles.jsonl");
    let (code, _, _) = run(&[
        "tile",
        "--width",
        "1848",
        "--height",
        "1848",
        "--source",
        "img",
        "--out",
        p(&manifest),
    ]);
    assert_eq!(code, 0);
    let tiles = read_manifest(fs::read(&manifest).unwrap().as_slice()).unwrap();
    let tile_dir = dir.path().join("tiles");
    fs::create_dir(&tile_dir).unwrap();
    let mut classes = ClassMap::new();
    let ship = classes.intern("ship");
    for t in &tiles {
        let b = rotdet::RotatedBox::new(900.0 - t.x_off as f64, 900.0 - t.y_off as f64, 30.0, 10.0, 0.2).unwrap();
        let d = rotdet::Detection::new(b, 0.8, ship).unwrap();
        write_box_csv_path(tile_dir.join(format!("{}.csv", t.tile_id)), &[d], &classes).unwrap();
    }
    let merged = dir.path().join("merged.csv");
    let (code, _, err) = run(&[
        "merge",
        "--manifest",
        p(&manifest),
        "--dets-dir",
        p(&tile_dir),
        "--nms",
        "0.1",
        "--out",
        p(&merged),
    ]);
    assert_eq!(code, 0, "{err}");
    let out = read_box_csv_path(&merged, &mut ClassMap::new()).unwrap();
    assert_eq!(out.len(), 1);
    assert!((out[0].rbox.cx - 900.0).abs() < 1e-9);

    fs::write(tile_dir.join("bogus.csv"), "label,score,cx,cy,w,h,theta\n").unwrap();
    let (code, _, err) = run(&["merge", "--manifest", p(&manifest), "--dets-dir", p(&tile_dir)]);
    assert_ne!(code, 0);
    assert!(err.contains("bogus"), "{err}");
}

#[test]
fn align_and_centerpool_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.fmap");
    write_fmap_path(&input, &FeatureMap::new(16, 16, 2, vec![1.5; 512]).unwrap()).unwrap();
    let out = dir.path().join("out.fmap");
    let (code, _, err) = run(&[
        "align",
        "--fmap",
        p(&input),
        "--box",
        "8",
        "8",
        "6",
        "4",
        "-0.5",
        "--k",
        "7",
        "--ks",
        "2",
        "--out",
        p(&out),
    ]);
    assert_eq!(code, 0, "{err}");
    let a = read_fmap_path(&out).unwrap();
    assert_eq!((a.height(), a.width(), a.channels()), (7, 7, 2));
    assert!(a.data().iter().all(|&v| v == 1.5));

    let pooled = dir.path().join("pool.fmap");
    let (code, _, _) = run(&["centerpool", "--fmap", p(&input), "--out", p(&pooled)]);
    assert_eq!(code, 0);
    assert!(read_fmap_path(&pooled).unwrap().data().iter().all(|&v| v == 3.0));

    let (code, _, err) = run(&[
        "align",
        "--fmap",
        p(&dir.path().join("missing.fmap")),
        "--box",
        "1",
        "1",
        "1",
        "1",
        "0",
        "--out",
        p(&out),
    ]);
    assert_ne!(code, 0);
    assert!(err.contains("missing.fmap"), "{err}");
}

#[test]
fn anchors_csv() {
    let (code, out, _) = run(&[
        "anchors",
        "--shapes",
        "2x3",
        "--scales",
        "32",
        "--ratios",
        "1",
        "--strides",
        "4",
    ]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "cx,cy,w,h");
    assert_eq!(lines.len(), 1 + 6);
    assert_eq!(lines[1], "2,2,32,32");
}

#[test]
fn selftest_passes() {
    let (code, out, _) = run(&["selftest"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.lines().filter(|l| l.starts_with("PASS")).count() >= 10);
}
