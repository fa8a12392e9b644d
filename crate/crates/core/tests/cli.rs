use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kernel_tsne::dataio::{load_csv, read_report_json, LabelColumn};
use kernel_tsne::metrics::trustworthiness;

fn ktsne(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ktsne")).args(args).output().unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_small(dir: &Path, n: usize) -> std::path::PathBuf {
    let path = dir.join("blobs.csv");
    ok(&ktsne(&["gen-data", "--n", &n.to_string(), "--d", "10", "--out", s(&path)]));
    path
}

#[test]
fn gen_data_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("blobs.csv");
    ok(&ktsne(&["gen-data", "--out", s(&out)]));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 101);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2000);
    assert!(rows.iter().all(|r| r.split(',').count() == 101));

    let again = dir.path().join("again.csv");
    ok(&ktsne(&["gen-data", "--out", s(&again)]));
    assert_eq!(text, fs::read_to_string(&again).unwrap());
}

#[test]
fn gen_data_one_row_per_label() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ten.csv");
    ok(&ktsne(&["gen-data", "--n", "10", "--clusters", "10", "--out", s(&out)]));
    let d = load_csv(&out, Some(&LabelColumn::parse("label"))).unwrap();
    let mut labels = d.labels.unwrap();
    labels.sort_unstable();
    assert_eq!(labels, (0..10).collect::<Vec<i64>>());
}

#[test]
fn reduce_writes_three_outputs_and_resolved_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = ktsne(&[
        "reduce", "--dataset", "synthetic", "--subsample", "300", "--variant", "e2e", "--kernel", "rbf", "--gamma",
        "0.01", "--perplexity", "30", "--seed", "7", "--iters", "300", "--out-dir", s(dir.path()),
    ]);
    ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("final KL") && stdout.contains("wall time"));
    for f in ["embedding.csv", "manifest.json", "scatter.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let svg = fs::read_to_string(dir.path().join("scatter.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 300);

    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["learning_rate"], 50.0);
    assert_eq!(m["config"]["alpha"], 1.0);
    assert_eq!(m["config"]["variant"], "e2e");
    assert_eq!(m["config"]["kernel"]["gamma"], 0.01);
    assert_eq!(m["dataset"]["n"], 300);
    for key in ["affinity_secs", "loop_secs", "low_dim_affinity_secs", "per_iteration_secs", "total_secs"] {
        assert!(m["timing"][key].is_f64(), "{key}");
    }
}

#[test]
fn plain_and_linear_kernel_csvs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), 120);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let common = ["--input", s(&data), "--perplexity", "15", "--iters", "300", "--seed", "4"];
    ok(&ktsne(&[&["reduce", "--variant", "plain", "--out-dir", s(&a)], &common[..]].concat()));
    ok(&ktsne(&[&["reduce", "--variant", "kernel", "--kernel", "linear", "--out-dir", s(&b)], &common[..]].concat()));
    assert_eq!(fs::read(a.join("embedding.csv")).unwrap(), fs::read(b.join("embedding.csv")).unwrap());
}

#[test]
fn reduce_notices_and_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), 60);
    let out = ktsne(&[
        "reduce", "--input", s(&data), "--variant", "e2e", "--perplexity", "10", "--iters", "30", "--out-dir",
        s(&dir.path().join("o1")),
    ]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("using rbf"));
    let out = ktsne(&[
        "reduce", "--input", s(&data), "--variant", "kernel", "--kernel", "linear", "--gamma", "2", "--perplexity",
        "10", "--iters", "30", "--out-dir", s(&dir.path().join("o2")),
    ]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--gamma is ignored"));
}

#[test]
fn reduce_error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ktsne(&["reduce", "--input", "/definitely/not/here.csv", "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/definitely/not/here.csv"));

    // Student-t gradients shrink with distance, so a huge step only crosses
    // the divergence bound when enough points push at once.
    let out = ktsne(&[
        "reduce", "--dataset", "synthetic", "--subsample", "500", "--learning-rate", "1e9", "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));

    assert_eq!(ktsne(&["reduce", "--perplexity", "abc"]).status.code(), Some(1));
    assert_eq!(ktsne(&["reduce", "--dataset", "synthetic", "--perplexity", "0.5"]).status.code(), Some(1));
}

#[test]
fn trust_scores_identity_and_rejects_bad_k() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), 80);
    let report = dir.path().join("r.json");
    ok(&ktsne(&[
        "trust", "--data", s(&data), "--embedding", s(&data), "--k-list", "5,10,30", "--out", s(&report),
    ]));
    let r = read_report_json(&report).unwrap();
    assert_eq!(r.scores, vec![1.0, 1.0, 1.0]);
    assert_eq!(r.repeats, 3);

    let out = ktsne(&["trust", "--data", s(&data), "--embedding", s(&data), "--k-list", "5,40", "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k = 40"));
}

#[test]
fn trust_with_repeats_on_blobs() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ok(&ktsne(&[
        "reduce", "--dataset", "synthetic", "--subsample", "200", "--iters", "300", "--perplexity", "20", "--out-dir",
        s(&run),
    ]));
    let data = dir.path().join("data.csv");
    ok(&ktsne(&["gen-data", "--out", s(&data)]));
    // the reduce run subsampled; score it against the same subsample
    let full = load_csv(&data, Some(&LabelColumn::parse("label"))).unwrap().subsample(200, 0).unwrap();
    let sub = dir.path().join("sub.csv");
    kernel_tsne::dataio::write_dataset_csv(&full, &sub).unwrap();
    let report = dir.path().join("r.json");
    ok(&ktsne(&[
        "trust", "--data", s(&sub), "--embedding", s(&run.join("embedding.csv")), "--k-list", "5,10",
        "--subsample", "120", "--repeats", "3", "--out", s(&report),
    ]));
    let r = read_report_json(&report).unwrap();
    assert_eq!((r.repeats, r.n), (3, 120));
    assert!(r.scores.iter().all(|&v| v > 0.9 && v <= 1.0));
}

#[test]
fn trust_rejects_row_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen_small(dir.path(), 40);
    let b = dir.path().join("b.csv");
    ok(&ktsne(&["gen-data", "--n", "30", "--d", "10", "--out", s(&b)]));
    let out = ktsne(&["trust", "--data", s(&a), "--embedding", s(&b), "--k-list", "5", "--out", s(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn one_cell_grid_matches_reduce_then_trust() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), 150);
    let (grid, run) = (dir.path().join("grid"), dir.path().join("run"));
    ok(&ktsne(&[
        "grid-search", "--input", s(&data), "--gammas", "0.05", "--perplexities", "20", "--metric-k", "10", "--iters",
        "300", "--out-dir", s(&grid),
    ]));
    ok(&ktsne(&[
        "reduce", "--input", s(&data), "--variant", "e2e", "--kernel", "rbf", "--gamma", "0.05", "--perplexity", "20",
        "--iters", "300", "--out-dir", s(&run),
    ]));
    assert_eq!(fs::read(grid.join("best_embedding.csv")).unwrap(), fs::read(run.join("embedding.csv")).unwrap());

    let x = load_csv(&data, Some(&LabelColumn::parse("label"))).unwrap();
    let y = load_csv(run.join("embedding.csv"), Some(&LabelColumn::parse("label"))).unwrap();
    let t = trustworthiness(x.x.view(), y.x.view(), 10).unwrap();
    let report = dir.path().join("t.json");
    ok(&ktsne(&[
        "trust", "--data", s(&data), "--embedding", s(&run.join("embedding.csv")), "--k-list", "10", "--repeats", "1",
        "--out", s(&report),
    ]));
    let results: serde_json::Value = serde_json::from_str(&fs::read_to_string(grid.join("grid_results.json")).unwrap()).unwrap();
    let grid_score = results["rows"][0]["trustworthiness"].as_f64().unwrap();
    assert_eq!(grid_score, t);
    assert_eq!(read_report_json(&report).unwrap().scores[0], t);
}

#[test]
fn default_grid_has_35_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = ktsne(&[
        "grid-search", "--dataset", "synthetic", "--subsample", "300", "--iters", "40", "--jobs", "4", "--out-dir",
        s(dir.path()),
    ]);
    ok(&out);
    let csv = fs::read_to_string(dir.path().join("grid_results.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 35);
    assert!(dir.path().join("best_embedding.csv").exists());
    // ranks ascend and scores never increase down the table
    let scores: Vec<f64> = rows
        .iter()
        .filter(|r| r.contains(",ok,"))
        .map(|r| r.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn grid_results_do_not_depend_on_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), 100);
    let run = |jobs: &str, out: &Path| {
        ok(&ktsne(&[
            "grid-search", "--input", s(&data), "--variant", "kernel", "--gammas", "0.01,0.1", "--perplexities",
            "10,20", "--metric-k", "10", "--iters", "60", "--jobs", jobs, "--out-dir", s(out),
        ]));
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("grid_results.json")).unwrap()).unwrap();
        v["rows"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| (r["cell"].to_string(), r["trustworthiness"].to_string()))
            .collect::<Vec<_>>()
    };
    assert_eq!(run("1", &dir.path().join("a")), run("4", &dir.path().join("b")));
}

#[test]
fn diverging_cell_is_marked_failed() {
    let dir = tempfile::tempdir().unwrap();
    let out = ktsne(&[
        "grid-search", "--dataset", "synthetic", "--subsample", "500", "--variant", "kernel", "--gammas", "0.001,0.01",
        "--perplexities", "10,30", "--metric-k", "10", "--iters", "60", "--cell-learning-rate", "0.001:30:1e9",
        "--out-dir", s(dir.path()),
    ]);
    ok(&out);
    let csv = fs::read_to_string(dir.path().join("grid_results.csv")).unwrap();
    let failed: Vec<&str> = csv.lines().filter(|l| l.contains(",failed,")).collect();
    assert_eq!(failed.len(), 1, "{csv}");
    assert!(failed[0].starts_with("4,0.001,30.0,failed"), "{}", failed[0]);
    assert!(failed[0].contains("diverged"));
}
