//! End-to-end runs of the `gwl` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gwl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = gwl(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(args: &[&str]) -> i32 {
    gwl(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

fn synth(dir: &Path, days: &str, seed: &str) {
    ok(&["synth", "--days", days, "--seed", seed, "--out", s(dir)]);
}

#[test]
fn synth_is_seeded() {
    let t = tempfile::tempdir().unwrap();
    let (a, b, c) = (t.path().join("a"), t.path().join("b"), t.path().join("c"));
    synth(&a, "60", "4");
    synth(&b, "60", "4");
    synth(&c, "60", "5");
    for f in ["fields.txt", "labels.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    assert_ne!(
        fs::read(a.join("fields.txt")).unwrap(),
        fs::read(c.join("fields.txt")).unwrap()
    );
    let labels = fs::read_to_string(a.join("labels.txt")).unwrap();
    assert_eq!(labels.lines().filter(|l| !l.starts_with('#')).count(), 60);
    assert!(labels.contains("# seed=4"));
}

#[test]
fn exit_codes() {
    let t = tempfile::tempdir().unwrap();
    let out = s(t.path());
    assert_eq!(code(&["synth", "--days", "0", "--out", out]), 2);
    assert_eq!(code(&["synth", "--start", "1900-13-01", "--out", out]), 2);
    assert_eq!(code(&["predict", "--fields", "x"]), 2);

    let cfg = t.path().join("run.cfg");
    fs::write(&cfg, "days=10\nlearning-rate=0.1\n").unwrap();
    assert_eq!(code(&["synth", "--config", s(&cfg), "--out", out]), 2);

    let missing = t.path().join("missing.txt");
    assert_eq!(code(&["smooth", "--probs", s(&missing), "--out", out]), 5);

    let bad = t.path().join("bad.txt");
    fs::write(&bad, "PROBS 7\n1900-01-01 0.5 0.5\n").unwrap();
    assert_eq!(
        code(&[
            "smooth",
            "--probs",
            s(&bad),
            "--out",
            s(&t.path().join("l.txt"))
        ]),
        3
    );

    let d = t.path().join("d");
    synth(&d, "40", "1");
    let short = t.path().join("short.txt");
    let labels = fs::read_to_string(d.join("labels.txt")).unwrap();
    fs::write(
        &short,
        labels.lines().take(20).collect::<Vec<_>>().join("\n"),
    )
    .unwrap();
    let (fields, model) = (d.join("fields.txt"), t.path().join("m.ckpt"));
    let args = [
        "train",
        "--fields",
        s(&fields),
        "--labels",
        s(&short),
        "--out",
        s(&model),
    ];
    assert_eq!(code(&args), 3);
}

#[test]
fn config_file_supplies_settings() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("run.cfg");
    fs::write(&cfg, "# synthetic run\ndays=30\nseed=9\nno-blend=true\n").unwrap();
    let a = t.path().join("a");
    ok(&["synth", "--config", s(&cfg), "--out", s(&a)]);
    let labels = fs::read_to_string(a.join("labels.txt")).unwrap();
    assert!(labels.contains("# no-blend=true"));
    assert_eq!(body(&labels).lines().count(), 30);
    // Flags win over the file.
    let b = t.path().join("b");
    ok(&["synth", "--config", s(&cfg), "--days", "12", "--out", s(&b)]);
    assert_eq!(
        body(&fs::read_to_string(b.join("labels.txt")).unwrap())
            .lines()
            .count(),
        12
    );
}

#[test]
fn train_predict_smooth_round_trip() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("d");
    synth(&d, "730", "3");
    let model = t.path().join("m.ckpt");
    let fields = d.join("fields.txt");
    ok(&[
        "train",
        "--fields",
        s(&fields),
        "--labels",
        s(&d.join("labels.txt")),
        "--epochs",
        "1",
        "--val-years",
        "1",
        "--out",
        s(&model),
    ]);
    let history = fs::read_to_string(t.path().join("m.ckpt.history.csv")).unwrap();
    assert_eq!(body(&history).lines().count(), 2);

    let probs = t.path().join("p.txt");
    ok(&[
        "predict",
        "--model",
        s(&model),
        "--fields",
        s(&fields),
        "--out",
        s(&probs),
    ]);
    let again = t.path().join("p2.txt");
    ok(&[
        "predict",
        "--model",
        s(&model),
        "--fields",
        s(&fields),
        "--out",
        s(&again),
    ]);
    assert_eq!(fs::read(&probs).unwrap(), fs::read(&again).unwrap());

    let labels = t.path().join("s.txt");
    ok(&[
        "smooth",
        "--probs",
        s(&probs),
        "--out",
        s(&labels),
        "--passes",
        "1",
    ]);
    let report = fs::read_to_string(t.path().join("s.txt.report.txt")).unwrap();
    assert!(report.contains("passes=1"));
    assert_eq!(
        body(&fs::read_to_string(&labels).unwrap()).lines().count(),
        730
    );
}

#[test]
fn smoothing_constant_probabilities() {
    let t = tempfile::tempdir().unwrap();
    let probs = t.path().join("p.txt");
    let mut text = String::from("PROBS 7\n");
    for day in 1..=20 {
        text.push_str(&format!("1900-01-{day:02} 0.1 0.1 0.4 0.1 0.1 0.1 0.1\n"));
    }
    fs::write(&probs, text).unwrap();
    let out = t.path().join("l.txt");
    let report = t.path().join("r.txt");
    ok(&[
        "smooth",
        "--probs",
        s(&probs),
        "--out",
        s(&out),
        "--report",
        s(&report),
    ]);
    let labels = body(&fs::read_to_string(&out).unwrap());
    assert_eq!(labels.lines().count(), 20);
    assert!(labels.lines().all(|l| l.ends_with(",HFA")), "{labels}");
    let report = fs::read_to_string(&report).unwrap();
    assert!(
        report.contains("converged=true") && report.contains("passes=1"),
        "{report}"
    );
}

#[test]
fn report_rebuilds_evaluate_tables() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("d");
    synth(&d, "1461", "6");
    let ev = t.path().join("ev");
    ok(&[
        "evaluate",
        "--fields",
        s(&d.join("fields.txt")),
        "--labels",
        s(&d.join("labels.txt")),
        "--outer-folds",
        "2",
        "--inner-folds",
        "2",
        "--epochs",
        "1",
        "--budget",
        "0",
        "--out",
        s(&ev),
    ]);
    let rep = t.path().join("rep");
    ok(&[
        "report",
        "--records",
        s(&ev.join("records.csv")),
        "--out",
        s(&rep),
    ]);
    assert_eq!(
        body(&fs::read_to_string(ev.join("table1.csv")).unwrap()),
        body(&fs::read_to_string(rep.join("table1.csv")).unwrap())
    );
    let table2 = body(&fs::read_to_string(rep.join("table2.csv")).unwrap());
    assert_eq!(table2.lines().count(), 2);
    assert!(table2
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("Smoothed network,"));
}
