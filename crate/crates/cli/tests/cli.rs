use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn infhs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infhs")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = infhs(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(args: &[&str]) -> i32 {
    infhs(args).status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_shape(path: &Path) -> (usize, usize) {
    let text = fs::read_to_string(path).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    (rows.len(), rows[0].split(',').count())
}

#[test]
fn simulate_writes_documented_shapes_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&["simulate", "--out", d.to_str().unwrap(), "--n", "50", "--p", "500", "--p0", "30", "--scenario", "main_G3", "--seed", "1"]);
    }
    assert_eq!(csv_shape(&a.join("y.csv")), (50, 1));
    assert_eq!(csv_shape(&a.join("X.csv")), (50, 501));
    assert_eq!(csv_shape(&a.join("Z_1.csv")), (500, 1));
    assert!(!a.join("Z_2.csv").exists());
    let truth = json(&a.join("truth.json"));
    assert_eq!(truth["beta"].as_array().unwrap().len(), 501);
    assert_eq!(truth["support"].as_array().unwrap().len(), 30);
    for f in ["y.csv", "X.csv", "Z_1.csv", "truth.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let bad = dir.path().join("bad");
    assert_eq!(code(&["simulate", "--out", bad.to_str().unwrap(), "--p0", "600", "--p", "500"]), 2);
    assert_eq!(code(&["simulate", "--out", bad.to_str().unwrap(), "--scenario", "G7"]), 2);
}

#[test]
fn fit_round_trips_simulated_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let d = data.to_str().unwrap();
    ok(&["simulate", "--out", d, "--n", "40", "--p", "60", "--p0", "25", "--scenario", "main_G3", "--seed", "2"]);

    let vb = dir.path().join("vb");
    ok(&["fit", "--data", d, "--out", vb.to_str().unwrap(), "--engine", "vb"]);
    let fit = json(&vb.join("fit.json"));
    assert_eq!(fit["beta_mean"].as_array().unwrap().len(), 61);
    assert_eq!(fit["inclusion"].as_array().unwrap().len(), 60);
    let iterations = fit["vb"]["iterations"].as_u64().unwrap() as usize;
    assert_eq!(csv_shape(&vb.join("elbo.csv")), (iterations + 1, 4));

    let gs = dir.path().join("gs");
    ok(&["fit", "--data", d, "--out", gs.to_str().unwrap(), "--engine", "gibbs", "--B", "5000", "--bn", "2500", "--save-draws"]);
    let fit = json(&gs.join("fit.json"));
    assert_eq!(fit["gibbs"]["retained"], 2500);
    // header plus one line per retained draw
    assert_eq!(csv_shape(&gs.join("draws.csv")).0, 2501);

    let x = dir.path().join("x");
    let xs = x.to_str().unwrap();
    assert_eq!(code(&["fit", "--data", d, "--out", xs, "--engine", "gibbs", "--task", "probit"]), 2);
    assert_eq!(code(&["fit", "--data", dir.path().join("none").to_str().unwrap(), "--out", xs]), 4);
    // a linear response is not a valid probit response
    assert_eq!(code(&["fit", "--data", d, "--out", xs, "--task", "probit"]), 2);
}

#[test]
fn config_file_sets_run_lengths_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let d = data.to_str().unwrap();
    ok(&["simulate", "--out", d, "--n", "30", "--p", "10", "--p0", "3", "--seed", "3"]);
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"gibbs": {"iterations": 400, "burn_in": 100}, "hyper": {"q": 5.0}}"#).unwrap();
    let out = dir.path().join("out");
    let c = cfg.to_str().unwrap();
    ok(&["fit", "--data", d, "--out", out.to_str().unwrap(), "--engine", "gibbs", "--config", c]);
    assert_eq!(json(&out.join("fit.json"))["gibbs"]["retained"], 300);
    ok(&["fit", "--data", d, "--out", out.to_str().unwrap(), "--engine", "gibbs", "--config", c, "--bn", "350"]);
    assert_eq!(json(&out.join("fit.json"))["gibbs"]["retained"], 50);
    fs::write(&cfg, r#"{"gibbs": {"sweeps": 10}}"#).unwrap();
    assert_eq!(code(&["fit", "--data", d, "--out", out.to_str().unwrap(), "--config", c]), 2);
}

#[test]
fn select_threshold_and_dss() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let d = data.to_str().unwrap();
    ok(&["simulate", "--out", d, "--n", "60", "--p", "20", "--p0", "5", "--seed", "4"]);
    let fit = dir.path().join("fit");
    ok(&["fit", "--data", d, "--out", fit.to_str().unwrap()]);
    let f = fit.join("fit.json");
    let f = f.to_str().unwrap();

    let thr = dir.path().join("thr");
    ok(&["select", "--fit", f, "--out", thr.to_str().unwrap(), "--threshold", "0.9"]);
    let s = json(&thr.join("selection.json"));
    let scores: Vec<f64> = s["scores"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let selected: Vec<bool> = s["selected"].as_array().unwrap().iter().map(|v| v.as_bool().unwrap()).collect();
    assert_eq!(selected.len(), 20);
    assert!(scores.iter().zip(&selected).all(|(&sc, &sel)| sel == (sc > 0.9)));

    let dss = dir.path().join("dss");
    ok(&["select", "--fit", f, "--data", d, "--method", "dss", "--grid", "0.05", "--out", dss.to_str().unwrap()]);
    assert_eq!(json(&dss.join("selection.json"))["dss_lambda"], 0.05);
    ok(&["select", "--fit", f, "--data", d, "--method", "dss", "--out", dss.to_str().unwrap()]);
    assert!(json(&dss.join("selection.json"))["dss_lambda"].as_f64().unwrap() > 0.0);

    let x = dir.path().join("x");
    let xs = x.to_str().unwrap();
    assert_eq!(code(&["select", "--fit", dir.path().join("missing.json").to_str().unwrap(), "--out", xs]), 4);
    assert_eq!(code(&["select", "--fit", f, "--method", "dss", "--out", xs]), 2);
}

#[test]
fn benchmark_table_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench");
    let o = out.to_str().unwrap();
    ok(&[
        "benchmark", "--out", o, "--scenarios", "main_G0..main_G4", "--n", "30", "--p", "120", "--p0", "25",
        "--replicates", "5", "--max-iter", "50",
    ]);
    assert_eq!(csv_shape(&out.join("auc_by_scenario.csv")), (26, 4));
    assert!(!out.join("gs_vs_vb_mse.csv").exists());

    ok(&[
        "benchmark", "--out", o, "--scenarios", "appendix_G0,appendix_G3", "--engines", "vb,gibbs", "--n", "30",
        "--p", "12", "--p0", "4", "--replicates", "2", "--B", "200", "--bn", "100",
    ]);
    assert_eq!(csv_shape(&out.join("auc_by_scenario.csv")), (9, 4));
    assert_eq!(csv_shape(&out.join("gs_vs_vb_mse.csv")), (5, 3));
    assert_eq!(csv_shape(&out.join("sd_comparison.csv")), (1 + 2 * 2 * 13, 5));

    assert_eq!(code(&["benchmark", "--out", o, "--replicates", "0"]), 2);
    assert_eq!(code(&["benchmark", "--out", o, "--engines", "gibbs", "--task", "probit"]), 2);
}
