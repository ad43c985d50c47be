use std::path::Path;
use std::process::{Command, Output};

use rmra::io;

fn rmra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmra"))
        .args(args)
        .env_remove("RMRA_OUT")
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn toy_compose_writes_closed_form_spectra() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = tmp.path().join("gen");
    let out = tmp.path().join("out");
    assert!(rmra(&["gen", "toy-spd", "--out", p(&gen)]).status.success());
    let o = rmra(&[
        "compose",
        p(&gen.join("M1.rmra")),
        p(&gen.join("M2.rmra")),
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let s = io::read_csv(&out.join("S_eigenvalues.csv")).unwrap();
    let want = [1.0, 0.2, 0.005f64.sqrt(), 0.005f64.sqrt()];
    for (k, w) in want.iter().enumerate() {
        assert!((s[(k, 0)] - w).abs() < 1e-12);
    }
    let f = io::read_csv(&out.join("F_eigenvalues.csv")).unwrap();
    let top = 0.5 * 0.005f64.sqrt() * 50f64.ln();
    assert!((f[(0, 0)].abs() - top).abs() < 1e-12);
    assert!((f[(1, 0)].abs() - top).abs() < 1e-12);
    assert!(f[(0, 0)] * f[(1, 0)] < 0.0);

    let manifest: serde_json::Value = io::read_json(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest["command"], "compose");
    assert_eq!(manifest["route"], "spd");
}

#[test]
fn indefinite_input_is_a_numerical_error() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.csv");
    std::fs::write(&a, "1.0,2.0\n2.0,1.0\n").unwrap();
    let o = rmra(&["compose", p(&a), p(&a), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn validation_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"seed": 3, "sede": 4}"#).unwrap();
    let o = rmra(&["gen", "toy-spd", "--config", p(&cfg), "--out", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(1));

    let o = rmra(&["gen", "toy-spd", "--bandwidth-scale", "-2", "--out", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(1));

    let o = rmra(&["compose", "--p", "0.5"]);
    assert_eq!(o.status.code(), Some(1));

    let missing = tmp.path().join("nope.rmra");
    let o = rmra(&["compose", p(&missing), p(&missing), "--out", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(1));

    // six operators do not form a dyadic tree
    let ops = tmp.path().join("ops");
    std::fs::create_dir_all(&ops).unwrap();
    for k in 0..6 {
        io::write_matrix(&ops.join(format!("W_{k}.rmra")), &nalgebra::DMatrix::identity(3, 3)).unwrap();
    }
    let o = rmra(&["tree", p(&ops), "--out", p(&tmp.path().join("t"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains('4'));
}

#[test]
fn config_file_and_env_out() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"seed": 5, "tori": {"n": 30, "r": 2.0, "big_r": 7.0, "outer_r": 15.0, "seed": 5, "variant": "common"}}"#).unwrap();
    let out = tmp.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_rmra"))
        .args(["gen", "tori-common", "--config", p(&cfg)])
        .env("RMRA_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let x1 = io::read_csv(&out.join("X1.csv")).unwrap();
    assert_eq!(x1.shape(), (30, 4));
}

#[test]
fn gyre_to_clusters_and_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let d = |s: &str| tmp.path().join(s);
    let run = |args: &[&str]| {
        let o = rmra(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    };
    run(&["gen", "gyre", "--n", "50", "--t", "4", "--seed", "2", "--out", p(&d("gen"))]);
    assert_eq!(std::fs::read_dir(d("gen/frames")).unwrap().count(), 4);
    run(&["kernel", p(&d("gen/frames")), "--bandwidth-scale", "0.5", "--out", p(&d("k"))]);
    run(&["tree", p(&d("k")), "--m", "3", "--out", p(&d("tree"))]);

    let manifest: serde_json::Value = io::read_json(&d("tree/tree/manifest.json")).unwrap();
    assert_eq!(manifest["T"], 4);
    assert_eq!(manifest["nodes"].as_array().unwrap().len(), 3);
    for name in ["S_L1_t1.rmra", "F_L1_t2.rmra", "S_L2_t1.rmra", "F_L2_t1.rmra"] {
        assert!(d("tree/tree").join(name).is_file(), "{name}");
    }

    run(&["cluster", p(&d("tree/embeddings/S_L2_t1.csv")), "--k", "2", "--out", p(&d("c"))]);
    let labels = std::fs::read_to_string(d("c/labels.csv")).unwrap();
    assert!(labels.starts_with("id,label\n"));
    assert_eq!(labels.lines().count(), 51);

    run(&[
        "plotdata",
        "--embedding",
        p(&d("tree/embeddings/S_L2_t1.csv")),
        "--points",
        p(&d("gen/frames")),
        "--count",
        "2",
        "--out",
        p(&d("plot")),
    ]);
    let first = std::fs::read_to_string(d("plot/plot_frame_0001.csv")).unwrap();
    assert!(first.starts_with("id,x,y,value\n"));
    assert!(d("plot/plot_frame_0004.csv").is_file());
}

#[test]
fn verify_toy_suite_reports_json() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rmra(&["verify", "--suite", "toy", "--out", p(tmp.path())]);
    assert!(o.status.success());
    let reports: Vec<rmra::verify::Report> = io::read_json(&tmp.path().join("report.json")).unwrap();
    assert_eq!(reports.len(), 2);
    assert!(reports.iter().all(|r| r.pass));
}
