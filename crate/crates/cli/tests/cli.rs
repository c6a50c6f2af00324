use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use imfdiag_core::ceemdan::ImfSet;
use imfdiag_core::experiments::{read_duration_rows, read_param_rows};
use imfdiag_core::metrics::Metrics;
use imfdiag_core::mscnn::Mscnn;

const TINY: [&str; 10] = ["--nr", "2", "--k", "3", "--max-iter", "50", "--snr-flag", "1", "--epsilon", "0.2"];

fn imfdiag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imfdiag")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = imfdiag(args);
    assert!(out.status.success(), "{args:?}\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn signal(n: usize, damaged: bool, seed: u64) -> Vec<f64> {
    let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
    (0..n)
        .map(|i| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let noise = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            let t = i as f64 / 40_000.0;
            let spike = if damaged && i % 97 < 3 { 3.0 } else { 0.0 };
            (std::f64::consts::TAU * 120.0 * t).sin() + 0.3 * noise + spike
        })
        .collect()
}

/// Three healthy and three damaged 1600-sample CSV channels plus a manifest.
fn corpus(dir: &Path) -> PathBuf {
    let mut manifest = String::from("path,channel_id,condition\n");
    for r in 0..6u64 {
        let damaged = r % 2 == 1;
        let name = format!("rec{r}.csv");
        let text: String = signal(1600, damaged, r + 1).iter().map(|v| format!("{v}\n")).collect();
        fs::write(dir.join(&name), text).unwrap();
        manifest.push_str(&format!("{name},AN3,{}\n", if damaged { "damaged" } else { "healthy" }));
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, manifest).unwrap();
    path
}

#[test]
fn decompose_writes_imf_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    let x = signal(500, true, 3);
    fs::write(&input, x.iter().map(|v| format!("{v}\n")).collect::<String>()).unwrap();
    let output = dir.path().join("imfs.csv");
    let mut args = vec!["decompose", "--input", s(&input), "--seed", "4", "--output", s(&output)];
    args.extend(TINY);
    ok(&args);
    let set = ImfSet::load(&output).unwrap();
    assert_eq!(set.k(), 3);
    assert_eq!(set.source_length(), 500);
    let back = set.reconstruct();
    let err = back.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 1e-9, "{err}");

    // same seed, same bytes
    let again = dir.path().join("again.csv");
    let mut args = vec!["decompose", "--input", s(&input), "--seed", "4", "--output", s(&again)];
    args.extend(TINY);
    ok(&args);
    assert_eq!(fs::read(&output).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn preprocess_train_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path());
    let cache = dir.path().join("cache");
    let mut args = vec![
        "preprocess", "--manifest", s(&manifest), "--window-len", "200", "--windows-per-record", "4", "--seed", "5",
        "--cache-dir", s(&cache),
    ];
    args.extend(TINY);
    ok(&args);

    let ckpt = dir.path().join("model/mscnn.ckpt");
    let report = dir.path().join("report");
    let train = [
        "train", "--cache-dir", s(&cache), "--lr", "1e-3", "--max-epochs", "2", "--patience", "2", "--seed", "6",
        "--checkpoint", s(&ckpt), "--report", s(&report),
    ];
    let out = ok(&train);
    assert!(String::from_utf8_lossy(&out.stdout).contains("f1"));
    let model = Mscnn::load(&ckpt).unwrap();
    assert_eq!((model.spec.k_branches, model.spec.input_len), (3, 200));
    for f in ["metrics.csv", "history.csv", "loss.svg"] {
        assert!(report.join(f).exists(), "{f}");
    }
    let trained = Metrics::load(&report.join("metrics.csv")).unwrap();
    assert_eq!(trained.n(), 6);

    let eval_dir = dir.path().join("eval");
    ok(&["evaluate", "--cache-dir", s(&cache), "--checkpoint", s(&ckpt), "--report", s(&eval_dir)]);
    let m = Metrics::load(&eval_dir.join("metrics.csv")).unwrap();
    assert_eq!((m.tp, m.fp, m.tn, m.fn_), (trained.tp, trained.fp, trained.tn, trained.fn_));
    assert!(!eval_dir.join("loss.svg").exists());

    let all_dir = dir.path().join("all");
    ok(&["evaluate", "--cache-dir", s(&cache), "--checkpoint", s(&ckpt), "--report", s(&all_dir), "--all"]);
    assert_eq!(Metrics::load(&all_dir.join("metrics.csv")).unwrap().n(), 24);

    // serial and parallel runs train the same model
    let serial_ckpt = dir.path().join("serial.ckpt");
    let mut serial = train.to_vec();
    serial[12] = s(&serial_ckpt);
    serial.push("--serial");
    ok(&serial);
    assert_eq!(fs::read(&ckpt).unwrap(), fs::read(&serial_ckpt).unwrap());
}

#[test]
fn param_sweep_from_grid_file() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path());
    let grid = dir.path().join("grid.csv");
    fs::write(&grid, "nr,max_iter,snr_flag,epsilon,k\n2,50,1,0.2,3\n3,50,0,0.2,3\n").unwrap();
    let report = dir.path().join("sweep");
    let args = [
        "sweep", "params", "--manifest", s(&manifest), "--window-len", "200", "--windows-per-record", "4", "--grid",
        s(&grid), "--lr", "1e-3", "--max-epochs", "1", "--patience", "1", "--report", s(&report),
    ];
    let out = ok(&args);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
    let rows = read_param_rows(&report.join("params.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.val_accuracy.is_some()));
    assert_eq!((rows[1].nr, rows[1].snr_flag), (3, 0));
    assert!(fs::read_to_string(report.join("sweep.svg")).unwrap().starts_with("<svg"));

    // completed cells are not recomputed
    ok(&args);
    assert_eq!(read_param_rows(&report.join("params.csv")).unwrap(), rows);
}

#[test]
fn duration_sweep_writes_table_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path());
    let report = dir.path().join("durations");
    let mut args = vec![
        "sweep", "duration", "--manifest", s(&manifest), "--windows-per-record", "4", "--durations", "0.005,0.0075",
        "--lr", "1e-3", "--max-epochs", "1", "--patience", "1", "--report", s(&report),
    ];
    args.extend(TINY);
    ok(&args);
    let rows = read_duration_rows(&report.join("durations.csv")).unwrap();
    assert_eq!(rows.iter().map(|r| r.window_len).collect::<Vec<_>>(), vec![200, 300]);
    assert!(rows.iter().all(|r| r.f1.is_some()));
    assert!(report.join("sweep.svg").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(imfdiag(&["--version"]).status.code(), Some(0));
    assert_eq!(imfdiag(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(imfdiag(&["frobnicate"]).status.code(), Some(1));

    let missing = dir.path().join("missing.csv");
    let out = imfdiag(&["preprocess", "--manifest", s(&missing), "--cache-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));

    let garbage = dir.path().join("bad.ckpt");
    fs::write(&garbage, b"not a checkpoint").unwrap();
    let bad_grid = dir.path().join("grid.csv");
    fs::write(&bad_grid, "0,50,1\n").unwrap();
    let out = imfdiag(&["sweep", "params", "--manifest", s(&missing), "--grid", s(&bad_grid), "--report", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    let out = imfdiag(&["evaluate", "--cache-dir", s(dir.path()), "--checkpoint", s(&garbage), "--report", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));

    let manifest = corpus(dir.path());
    let cache = dir.path().join("cache");
    let mut args = vec![
        "preprocess", "--manifest", s(&manifest), "--window-len", "200", "--windows-per-record", "4", "--cache-dir",
        s(&cache),
    ];
    args.extend(TINY);
    ok(&args);
    let ckpt = dir.path().join("m.ckpt");
    let report = dir.path().join("r");
    let train = |extra: &[&str]| {
        let mut a = vec!["train", "--cache-dir", s(&cache), "--checkpoint", s(&ckpt), "--report", s(&report), "--max-epochs", "2", "--patience", "2"];
        a.extend(extra);
        imfdiag(&a).status.code()
    };
    assert_eq!(train(&["--train-frac", "1.5"]), Some(1));
    assert_eq!(train(&["--lr", "1e300"]), Some(3));
}
