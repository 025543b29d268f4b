use std::path::Path;
use std::process::{Command, Output};

use kds::config::RunConfig;
use kds::metrics::Metrics;

fn kds(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kds"))
        .args(args)
        .env_remove("KDS_OUTPUT_ROOT")
        .output()
        .expect("spawn kds")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_cfg(dir: &Path) -> RunConfig {
    RunConfig::parse(&std::fs::read_to_string(dir.join("config.cfg")).unwrap()).unwrap()
}

fn moons(dir: &Path, n: usize) {
    let o = kds(&["generate", "--dataset", "two-moons", "--n", &n.to_string(), "--seed", "3", "--out", p(dir)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn missing_data_file_exits_2_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.csv");
    let o = kds(&["fit", "--data", p(&missing), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("nope.csv"), "{}", stderr(&o));
}

#[test]
fn bad_flag_is_usage_error() {
    assert_eq!(code(&kds(&["fit", "--no-such-flag"])), 2);
    assert_eq!(code(&kds(&["verify", "--suite", "nonsense"])), 2);
}

#[test]
fn fit_echoes_flags_and_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    moons(&data, 120);
    let out = tmp.path().join("fit");
    let o = kds(&[
        "fit", "--data", p(&data.join("data.csv")), "--labels", p(&data.join("labels.csv")),
        "--m", "24", "--lambda", "5.0", "--T", "15", "--epochs", "3", "--batch-size", "64",
        "--deterministic", "--out", p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cfg = read_cfg(&out);
    assert_eq!(cfg.get::<usize>("m").unwrap(), 24);
    assert_eq!(cfg.get::<f64>("lambda").unwrap(), 5.0);
    assert_eq!(cfg.get::<usize>("T").unwrap(), 15);
    assert!(cfg.get::<bool>("deterministic").unwrap());
    for f in ["atoms.csv", "codes.csv", "loss_history.csv", "metrics.json", "pred_labels.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let atoms = kds::io::read_data(&out.join("atoms.csv")).unwrap();
    assert_eq!((atoms.rows(), atoms.cols()), (2, 24));
    let codes = kds::io::read_codes(&out.join("codes.csv")).unwrap();
    assert_eq!((codes.rows(), codes.cols()), (24, 120));
    let m = Metrics::from_json(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m.epochs, Some(3));
    assert!(m.acc.unwrap() >= 0.5);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    moons(&data, 60);
    let cfg_path = tmp.path().join("run.cfg");
    std::fs::write(&cfg_path, "# small run\nm = 8\nlambda = 0.5\nepochs = 2\n").unwrap();
    let out = tmp.path().join("fit");
    let o = kds(&[
        "fit", "--config", p(&cfg_path), "--data", p(&data.join("data.csv")), "--lambda", "2.0", "--out", p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cfg = read_cfg(&out);
    assert_eq!(cfg.get::<usize>("m").unwrap(), 8);
    assert_eq!(cfg.get::<f64>("lambda").unwrap(), 2.0);
    assert_eq!(cfg.get::<usize>("epochs").unwrap(), 2);
    // Unlabelled fit: no clustering, metrics keep nulls.
    assert!(!out.join("pred_labels.csv").exists());
    let m = Metrics::from_json(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert!(m.acc.is_none() && m.seconds_cluster.is_none());

    std::fs::write(&cfg_path, "bogus_key = 1\n").unwrap();
    let o = kds(&["fit", "--config", p(&cfg_path), "--data", p(&data.join("data.csv")), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bogus_key"), "{}", stderr(&o));
}

#[test]
fn lambda_sweep_writes_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    moons(&data, 60);
    let out = tmp.path().join("sweep");
    let o = kds(&[
        "fit", "--data", p(&data.join("data.csv")), "--labels", p(&data.join("labels.csv")), "--m", "6",
        "--epochs", "2", "--lambda-sweep", "0.5,2.0", "--out", p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_object().unwrap().len(), 2);
    assert!(summary["best"].is_string());
    assert!(out.join("none_lambda0.5").join("metrics.json").exists());
}

#[test]
fn cluster_modes_and_truth_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = tmp.path().join("gen");
    let o = kds(&["generate", "--dataset", "delaunay", "--n", "300", "--seed", "5", "--out", p(&gen)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["data.csv", "labels.csv", "true_codes.csv", "atoms.csv", "atom_labels.csv", "triangles.csv"] {
        assert!(gen.join(f).exists(), "{f}");
    }
    let codes = p(&gen.join("true_codes.csv")).to_string();
    let truth = p(&gen.join("labels.csv")).to_string();
    for mode in ["quadratic", "normalized"] {
        let out = tmp.path().join(mode);
        let o = kds(&["cluster", "--codes", &codes, "--truth", &truth, "--k", "2", "--mode", mode, "--out", p(&out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert_eq!(read_cfg(&out).raw("mode"), Some(mode));
        let m = Metrics::from_json(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
        assert_eq!(m.acc, Some(1.0), "{mode}");
        let pred = kds::io::read_labels(&out.join("pred_labels.csv")).unwrap();
        assert_eq!(pred.len(), 300 + 12);
    }
    let short = tmp.path().join("short.csv");
    std::fs::write(&short, "0\n1\n").unwrap();
    let o = kds(&["cluster", "--codes", &codes, "--truth", p(&short), "--out", p(&tmp.path().join("x"))]);
    assert_eq!(code(&o), 2);
    let o = kds(&["cluster", "--codes", &codes, "--k", "50", "--out", p(&tmp.path().join("y"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn single_size_benchmark_skips_slopes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bench");
    std::fs::create_dir_all(&out).unwrap();
    std::fs::write(out.join("slopes.json"), "stale").unwrap();
    let o = kds(&[
        "benchmark", "--n", "200", "--train-n", "200", "--epochs", "2", "--m", "8", "--repeats", "1",
        "--out", p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("benchmark.csv").exists());
    assert!(out.join("timing.svg").exists() && out.join("timing_loglog.svg").exists());
    assert!(!out.join("slopes.json").exists());
    let csv = std::fs::read_to_string(out.join("benchmark.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(csv.lines().next().unwrap(), kds::bench::CSV_HEADER);
}

#[test]
fn benchmark_with_three_sizes_fits_slopes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bench");
    let o = kds(&[
        "benchmark", "--n", "300,600,1200", "--train-n", "200", "--epochs", "2", "--m", "8", "--repeats", "1",
        "--out", p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s: kds::bench::Slopes = serde_json::from_str(&std::fs::read_to_string(out.join("slopes.json")).unwrap()).unwrap();
    assert_eq!(s.n, vec![300, 600, 1200]);
    assert!(s.encode_slope.is_finite() && s.cluster_slope.is_finite());
}

#[test]
fn verify_runs_a_suite() {
    let o = kds(&["verify", "--suite", "theorem1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("PASS theorem1"));
}

#[test]
fn generate_rejects_unknown_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let o = kds(&["generate", "--dataset", "spirals", "--out", p(tmp.path())]);
    assert_eq!(code(&o), 2);
    let o = kds(&["generate", "--dataset", "two-moons", "--delta", "0.2", "--out", p(tmp.path())]);
    assert_eq!(code(&o), 2);
}

#[test]
fn default_output_root_comes_from_env() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_kds"))
        .args(["generate", "--dataset", "circle", "--n", "50"])
        .env("KDS_OUTPUT_ROOT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(tmp.path().join("generate").join("data.csv").exists());
}
