//! End-to-end tests of the `gt` binary: exit codes, JSON summaries,
//! artifact files, config precedence, and run.json replay.

use std::path::Path;
use std::process::{Command, Output};

fn gt(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gt"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn summary(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "expected success, stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is valid JSON")
}

#[test]
fn no_arguments_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gt(&[], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gt(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gt(&["gt", "-i", "missing.csv", "--eps", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn gen_tjunction_writes_401_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = gt(&["gen", "tjunction", "-o", "t.csv"], dir.path());
    let s = summary(&out);
    assert_eq!(s["dataset"]["n"], 401);
    let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    // Header plus 401 data rows.
    assert_eq!(text.lines().count(), 402);
    assert!(dir.path().join("t.labels.csv").exists());
    assert!(dir.path().join("t.json").exists());
}

#[test]
fn pipeline_transform_then_cluster_yields_k_clusters() {
    let dir = tempfile::tempdir().unwrap();
    summary(&gt(&["gen", "tjunction", "-o", "t.csv"], dir.path()));
    let s = summary(&gt(
        &["gt", "-i", "t.csv", "--eps", "10", "--lambda", "5", "--iters", "2", "-o", "tj"],
        dir.path(),
    ));
    assert_eq!(s["n_in"], 401);
    let s = summary(&gt(
        &["cluster", "-i", "tj.dist.csv", "--k", "4", "-o", "labels.csv"],
        dir.path(),
    ));
    let sizes = s["cluster_sizes"].as_array().unwrap();
    assert_eq!(sizes.len(), 4);
    assert!(sizes.iter().all(|v| v.as_u64().unwrap() > 0));
    let text = std::fs::read_to_string(dir.path().join("labels.csv")).unwrap();
    assert_eq!(text.lines().count(), 402);
}

#[test]
fn run_json_replay_reproduces_artifacts_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    summary(&gt(&["gen", "spiral", "--seed", "3", "-o", "s.csv"], dir.path()));
    summary(&gt(
        &["gt", "-i", "s.csv", "--eps", "4", "--iters", "1", "--variant", "v2", "-o", "run1"],
        dir.path(),
    ));
    let first = std::fs::read(dir.path().join("run1.final.csv")).unwrap();
    let first_dist = std::fs::read(dir.path().join("run1.dist.csv")).unwrap();
    // Replay from the recorded configuration alone.
    summary(&gt(&["gt", "--config", "run1.run.json"], dir.path()));
    assert_eq!(std::fs::read(dir.path().join("run1.final.csv")).unwrap(), first);
    assert_eq!(std::fs::read(dir.path().join("run1.dist.csv")).unwrap(), first_dist);
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    summary(&gt(&["gen", "tjunction", "-o", "t.csv"], dir.path()));
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"input": "t.csv", "output": "a", "eps": 10.0, "lambda": 5.0, "iters": 1}"#,
    )
    .unwrap();
    let s = summary(&gt(&["gt", "--config", "cfg.json"], dir.path()));
    assert_eq!(s["lambda"], 5.0);
    // Same config, lambda overridden on the command line.
    let s = summary(&gt(
        &["gt", "--config", "cfg.json", "--lambda", "0", "-o", "b"],
        dir.path(),
    ));
    assert_eq!(s["lambda"], 0.0);
    let a = std::fs::read(dir.path().join("a.final.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.final.csv")).unwrap();
    assert_ne!(a, b, "lambda must change the transform output");
}

#[test]
fn trajectory_emission_writes_per_iteration_files() {
    let dir = tempfile::tempdir().unwrap();
    summary(&gt(&["gen", "tjunction", "-o", "t.csv"], dir.path()));
    summary(&gt(
        &[
            "gt", "-i", "t.csv", "--eps", "10", "--iters", "2", "-o", "tr", "--emit-csv",
            "--emit-dist", "--emit-svg",
        ],
        dir.path(),
    ));
    for k in 0..=2 {
        assert!(dir.path().join(format!("tr.iter{k}.csv")).exists());
        assert!(dir.path().join(format!("tr.iter{k}.dist.csv")).exists());
    }
    let svg = std::fs::read_to_string(dir.path().join("tr.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn mean_shift_matches_lambda_zero_transform() {
    let dir = tempfile::tempdir().unwrap();
    summary(&gt(&["gen", "tjunction", "-o", "t.csv"], dir.path()));
    summary(&gt(&["ms", "-i", "t.csv", "--eps", "10", "--iters", "1", "-o", "m.csv"], dir.path()));
    summary(&gt(
        &["gt", "-i", "t.csv", "--eps", "10", "--lambda", "0", "--iters", "1", "-o", "z"],
        dir.path(),
    ));
    // Same points up to accumulation-order rounding.
    let parse = |name: &str| -> Vec<f64> {
        std::fs::read_to_string(dir.path().join(name))
            .unwrap()
            .lines()
            .skip(1)
            .flat_map(|l| l.split(',').map(|f| f.parse::<f64>().unwrap()).collect::<Vec<_>>())
            .collect()
    };
    let ms = parse("m.csv");
    let zt = parse("z.final.csv");
    assert_eq!(ms.len(), zt.len());
    for (a, b) in ms.iter().zip(&zt) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn wt_and_mds_compose() {
    let dir = tempfile::tempdir().unwrap();
    // Two tight blobs of 20 points each; small enough for exact transport.
    let mut csv = String::from("x1,x2\n");
    for i in 0..20 {
        csv.push_str(&format!("{},{}\n", 0.01 * i as f64, 0.02 * i as f64));
        csv.push_str(&format!("{},{}\n", 5.0 + 0.01 * i as f64, 0.02 * i as f64));
    }
    std::fs::write(dir.path().join("c.csv"), csv).unwrap();
    let s = summary(&gt(
        &["wt", "-i", "c.csv", "--eps", "0.5", "--p", "2", "--iters", "1", "-o", "w"],
        dir.path(),
    ));
    assert_eq!(s["p"], 2);
    let s = summary(&gt(
        &["mds", "-i", "w.dist.csv", "--dims", "2", "-o", "coords.csv", "--emit-svg"],
        dir.path(),
    ));
    assert_eq!(s["dims"], 2);
    assert!(dir.path().join("coords.svg").exists());
}

#[test]
fn segment_writes_ppm_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    // 8x8 gray image, two flat halves.
    let mut pgm = String::from("P2\n8 8\n255\n");
    for row in 0..8 {
        let v = if row < 4 { 40 } else { 220 };
        pgm.push_str(&format!("{}\n", vec![v.to_string(); 8].join(" ")));
    }
    std::fs::write(dir.path().join("img.pgm"), pgm).unwrap();
    let s = summary(&gt(
        &[
            "segment", "-i", "img.pgm", "-o", "out.ppm", "--eps-s", "3", "--eps-r", "20",
            "--lambda", "0",
        ],
        dir.path(),
    ));
    assert_eq!(s["clusters"], 2);
    assert!(dir.path().join("out.ppm").exists());
    let labels = std::fs::read_to_string(dir.path().join("out.labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 65);
}

#[test]
fn embed_reports_baseline_and_boosted_scores() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("vec.txt"),
        "cat 1 0 0\ndog 0.95 0.05 0\ncar 0 0 1\nroad 0 0.1 1\n",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("corpus.txt"),
        "cat dog cat dog car road car road cat dog car road ".repeat(20),
    )
    .unwrap();
    std::fs::write(dir.path().join("bench.tsv"), "cat\tdog\t9.0\ncar\troad\t7.5\ncat\tcar\t1.0\n")
        .unwrap();
    let s = summary(&gt(
        &[
            "embed", "--embeddings", "vec.txt", "--corpus", "corpus.txt", "--benchmark",
            "bench.tsv", "--min-count", "1", "--window", "2", "-o", "report.json",
        ],
        dir.path(),
    ));
    let report = s["report"].as_array().unwrap();
    assert_eq!(report.len(), 1);
    assert_eq!(report[0]["covered"], 3);
    assert!(report[0]["rho_baseline"].is_number() && report[0]["rho_gt"].is_number());
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn bench_rejects_too_few_repetitions_and_reports_rows() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"reps": 2}"#).unwrap();
    let out = gt(&["bench", "--config", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"reps": 3, "sizes": [40], "methods": ["gt:full", "gt:v2", "ms"], "eps": 0.4}"#,
    )
    .unwrap();
    let s = summary(&gt(&["bench", "--config", "cfg.json", "-o", "bench.json"], dir.path()));
    assert_eq!(s["rows"].as_array().unwrap().len(), 3);
    assert!(dir.path().join("bench.json").exists());
}
