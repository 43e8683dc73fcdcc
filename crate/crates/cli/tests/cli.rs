use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nnmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nnmc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn nnmc_threads(threads: usize, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nnmc"))
        .env("RAYON_NUM_THREADS", threads.to_string())
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn gen_sample_solve_pipeline_recovers_a_low_rank_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let (a, meta, obs, b, res) = (
        path(dir.path(), "a.csv"),
        path(dir.path(), "meta.json"),
        path(dir.path(), "obs.txt"),
        path(dir.path(), "b.csv"),
        path(dir.path(), "result.json"),
    );
    let out = nnmc(&[
        "gen", "--m", "20", "--n", "24", "--r", "2", "--spectrum", "flat", "--top", "1", "--seed", "3",
        "--out-matrix", &a, "--out-meta", &meta,
    ]);
    assert!(out.status.success());
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(&meta).unwrap()).unwrap();
    assert_eq!(meta["epsilon"], 0.0);
    assert_eq!(meta["spec"]["m"], 20);

    let out = nnmc(&["sample", "--matrix", &a, "--count", "400", "--seed", "5", "--out", &obs]);
    assert!(out.status.success());
    let first = std::fs::read_to_string(&obs).unwrap();
    assert!(first.starts_with("20 24 400\n"));

    let out = nnmc(&[
        "solve", "--obs", &obs, "--lambda", "auto", "--eps", "0", "--r", "2", "--out-b", &b,
        "--out-result", &res,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let result: Value = serde_json::from_str(&std::fs::read_to_string(&res).unwrap()).unwrap();
    assert_eq!(result["converged"], true);
    assert!(result["kkt"]["tangent_gap"].as_f64().unwrap() < 1e-3);

    let read = |p: &str| -> Vec<f64> {
        std::fs::read_to_string(p)
            .unwrap()
            .split([',', '\n'])
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().unwrap())
            .collect()
    };
    let (av, bv) = (read(&a), read(&b));
    let err: f64 = av.iter().zip(&bv).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = av.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(err / norm < 1e-3, "relative error {}", err / norm);
}

#[test]
fn solve_prints_result_and_rejects_bad_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let obs = path(dir.path(), "obs.txt");
    std::fs::write(&obs, "2 2 3\n1 1 1.0\n1 1 1.0\n2 2 4.0\n").unwrap();
    let v = json(&nnmc(&["solve", "--obs", &obs, "--lambda", "100"]));
    assert_eq!(v["lambda"], 100.0);
    assert_eq!(v["objective"], 0.5 * (2.0 + 16.0));

    assert_eq!(nnmc(&["solve", "--obs", &obs, "--lambda", "-1"]).status.code(), Some(1));
    assert_eq!(nnmc(&["solve", "--obs", &obs, "--lambda", "auto"]).status.code(), Some(1));
    assert_eq!(nnmc(&["solve", "--obs", "/nonexistent/obs.txt", "--lambda", "1"]).status.code(), Some(1));
}

#[test]
fn coherence_of_a_generated_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let a = path(dir.path(), "a.csv");
    let gen = nnmc(&[
        "gen", "--m", "30", "--n", "30", "--r", "3", "--eps", "0.2", "--seed", "1", "--out-matrix", &a,
    ]);
    let meta = json(&gen);
    let v = json(&nnmc(&["coherence", "--matrix", &a, "--r", "3", "--beta", "2"]));
    let mu0 = v["mu0"].as_f64().unwrap();
    assert!((mu0 - meta["coherence"]["mu0"].as_f64().unwrap()).abs() < 1e-8);
    assert!((v["epsilon"].as_f64().unwrap() - 0.2).abs() < 1e-10);
    assert!(v["required_sample_size"].as_f64().unwrap() > 0.0);
    assert_eq!(nnmc(&["coherence", "--matrix", &a, "--r", "31"]).status.code(), Some(1));
}

#[test]
fn bounds_reports_the_worked_values() {
    let v = json(&nnmc(&[
        "bounds", "--m", "100", "--n", "100", "--r", "5", "--omega", "5000", "--beta", "2", "--eps", "1",
        "--lambda", "0.1", "--perp-norm", "0",
    ]));
    let perp = v["thm1_perp"].as_f64().unwrap();
    assert!((perp - 55.895).abs() < 1e-3, "{perp}");
    assert!((v["cor1_perp"].as_f64().unwrap() - 50.43).abs() < 1e-2);
    assert_eq!(v["constants_are_unity"], true);
    assert!(v["measured_perp"].is_null());
}

#[test]
fn verify_exit_codes_follow_the_suite_outcome() {
    let pass = nnmc(&["verify", "--suite", "lemma1", "--trials", "20", "--seed", "4"]);
    let v = json(&pass);
    assert_eq!(v["suite"], "lemma1");
    assert_eq!(v["passed"], true);

    // At 40×40 and |Ω| = 800 the sampled deviation exceeds one half.
    let fail = nnmc(&["verify", "--suite", "thm2", "--trials", "3", "--seed", "4"]);
    assert_eq!(fail.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&fail.stdout).unwrap();
    assert_eq!(v["passed"], false);
}

#[test]
fn invalid_arguments_exit_with_one() {
    assert_eq!(nnmc(&["verify", "--suite", "lemma9"]).status.code(), Some(1));
    assert_eq!(nnmc(&["gen", "--m", "10"]).status.code(), Some(1));
    assert_eq!(nnmc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(nnmc(&["bounds", "--m", "0", "--n", "5", "--r", "1", "--omega", "9", "--eps", "0.1"]).status.code(), Some(1));
    assert_eq!(nnmc(&["--help"]).status.code(), Some(0));
}

#[test]
fn sweep_outputs_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = path(dir.path(), "spec.json");
    std::fs::write(
        &spec,
        r#"{"m": 20, "n": 20, "r": 2, "spectrum": {"kind": "flat", "top": 1.0},
            "tail": {"kind": "gaussian_scaled", "epsilon_target": 0.05}, "seed": 9}"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for threads in [1, 4] {
        let csv = path(dir.path(), &format!("sweep{threads}.csv"));
        let out = nnmc_threads(threads, &[
            "sweep", "--spec", &spec, "--omega-grid", "150,300", "--trials", "3", "--seed", "2", "--out", &csv,
        ]);
        let summary = json(&out);
        assert_eq!(summary["cells"].as_array().unwrap().len(), 2);
        let sidecar = std::fs::read(Path::new(&csv).with_extension("json")).unwrap();
        outputs.push((std::fs::read(&csv).unwrap(), sidecar, out.stdout));
    }
    assert_eq!(outputs[0], outputs[1]);
    let csv = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    assert!(csv.lines().next().unwrap().contains("omega_size"));
}
