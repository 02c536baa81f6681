use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_labelnoise"));
    c.env_remove("LABELNOISE_SEED");
    c
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("bad json ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn error_record(out: &Output) -> serde_json::Value {
    let err = String::from_utf8_lossy(&out.stderr);
    let line = err.lines().last().unwrap();
    serde_json::from_str(line).unwrap()
}

#[test]
fn noisy_data_with_many_anchors_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let gen = run(
        &["generate", "--n", "2000", "--seed", "3", "--beta", "0.2", "--out", "d.csv", "--anchors", "a.csv", "--k", "16"],
        p,
    );
    assert!(gen.status.success());
    let test = run(&["test", "--data", "d.csv", "--anchors", "a.csv", "--out", "r.json"], p);
    assert!(test.status.success());
    let report = stdout_json(&test);
    assert_eq!(report["reject"], true);
    assert_eq!(report["k"], 16);
    assert!(String::from_utf8_lossy(&test.stderr).starts_with("reject H0"));

    // the written report re-serializes byte for byte
    let text = std::fs::read_to_string(p.join("r.json")).unwrap();
    let parsed: labelnoise::TestReport = serde_json::from_str(&text).unwrap();
    assert_eq!(format!("{}\n", serde_json::to_string_pretty(&parsed).unwrap()), text);
}

#[test]
fn clean_data_is_mostly_retained() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let mut retained = 0;
    for seed in 0..20 {
        let s = seed.to_string();
        let gen = run(&["generate", "--n", "1000", "--seed", &s, "--out", "d.csv", "--anchors", "a.csv", "--k", "4"], p);
        assert!(gen.status.success());
        let test = run(&["test", "--data", "d.csv", "--anchors", "a.csv"], p);
        assert!(test.status.success());
        if stdout_json(&test)["reject"] == false {
            retained += 1;
        }
    }
    // 95% nominal; 16 of 20 is the lower 2% binomial tail
    assert!(retained >= 16, "retained {retained} of 20");
}

#[test]
fn commands_are_deterministic_in_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for name in ["x", "y"] {
        let out = format!("{name}.csv");
        let anchors = format!("{name}_a.csv");
        let gen = run(&["generate", "--n", "300", "--seed", "11", "--out", &out, "--anchors", &anchors, "--k", "3", "--delta", "0.05"], p);
        assert!(gen.status.success());
    }
    assert_eq!(std::fs::read(p.join("x.csv")).unwrap(), std::fs::read(p.join("y.csv")).unwrap());
    assert_eq!(std::fs::read(p.join("x_a.csv")).unwrap(), std::fs::read(p.join("y_a.csv")).unwrap());
    assert_eq!(std::fs::read_to_string(p.join("x_a.csv.meta")).unwrap(), "delta=5.0000000000000003e-2\n");

    // the seed can come from the environment
    let env = bin()
        .args(["generate", "--n", "300", "--out", "z.csv"])
        .env("LABELNOISE_SEED", "11")
        .current_dir(p)
        .output()
        .unwrap();
    assert!(env.status.success());
    assert_eq!(std::fs::read(p.join("x.csv")).unwrap(), std::fs::read(p.join("z.csv")).unwrap());
}

#[test]
fn power_at_equal_rates_is_the_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["power", "--alpha", "0.1", "--beta", "0.1", "--v", "0.1", "--v-tilde", "0.1", "--level", "0.05", "--sweep", "c.csv"], dir.path());
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!((v["power"].as_f64().unwrap() - 0.05).abs() < 1e-12);
    let curve = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert_eq!(curve.lines().count(), 92);
    assert!(curve.starts_with("beta_minus_alpha,power_k1,power_k2,power_k4,power_k8,power_k16,power_k32"));

    let bad = run(&["power", "--alpha", "0.6", "--beta", "0.5", "--v", "0.1", "--v-tilde", "0.1"], dir.path());
    assert_eq!(bad.status.code(), Some(3));
    assert_eq!(error_record(&bad)["error"], "invalid_parameter");
}

#[test]
fn power_from_model_matches_the_manual_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(run(&["generate", "--n", "800", "--seed", "5", "--beta", "0.1", "--out", "d.csv", "--anchors", "a.csv", "--k", "5"], p).status.success());
    assert!(run(&["fit", "--data", "d.csv", "--out", "m.json"], p).status.success());
    let out = run(&["power", "--alpha", "0", "--beta", "0.1", "--from-model", "m.json", "--anchors", "a.csv"], p);
    assert!(out.status.success());
    let v = stdout_json(&out);

    let model: labelnoise::FittedModel = serde_json::from_str(&std::fs::read_to_string(p.join("m.json")).unwrap()).unwrap();
    let anchors = labelnoise::AnchorSet::load(&p.join("a.csv")).unwrap();
    let (_, var) = labelnoise::anchor_mean_and_variance(&model, &anchors).unwrap();
    let quad = model.quad_form(&anchors.mean_point()).unwrap();
    let vt = labelnoise::alternative_variance(0.0, 0.1, quad).unwrap();
    let expected = labelnoise::power(0.0, 0.1, var, vt, 0.05).unwrap();
    assert_eq!(v["v"].as_f64().unwrap(), var);
    assert_eq!(v["power"].as_f64().unwrap(), expected);
}

#[test]
fn prior_test_modes() {
    let dir = tempfile::tempdir().unwrap();
    let z = run(&["prior-test", "--n", "100", "--k-pos", "60", "--pi0", "0.5", "--method", "z"], dir.path());
    assert!(z.status.success());
    assert!((stdout_json(&z)["z"].as_f64().unwrap() - 2.0).abs() < 1e-12);

    let guard = run(&["prior-test", "--n", "20", "--k-pos", "10", "--pi0", "0.5", "--method", "z"], dir.path());
    assert_eq!(guard.status.code(), Some(11));

    assert!(run(&["generate", "--n", "400", "--seed", "1", "--out", "d.csv"], dir.path()).status.success());
    let from_data = run(&["prior-test", "--data", "d.csv", "--pi0", "0.5"], dir.path());
    assert!(from_data.status.success());
    let v = stdout_json(&from_data);
    assert_eq!(v["n"], 400);
    assert_eq!(v["method"], "exact_binomial");
}

#[test]
fn input_errors_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(run(&["generate", "--n", "200", "--seed", "2", "--out", "d.csv"], p).status.success());

    std::fs::write(p.join("empty.csv"), "").unwrap();
    let empty = run(&["test", "--data", "d.csv", "--anchors", "empty.csv"], p);
    assert_eq!(empty.status.code(), Some(7));
    assert_eq!(error_record(&empty)["error"], "invalid_anchors");

    std::fs::write(p.join("wide.csv"), "f1,f2,f3\n0,0,0\n").unwrap();
    let wide = run(&["test", "--data", "d.csv", "--anchors", "wide.csv"], p);
    assert_eq!(wide.status.code(), Some(5));

    std::fs::write(p.join("junk.csv"), "f1,f2,label\n0.1,zz,1\n0.3,0.2,-1\n0.2,0.1,1\n").unwrap();
    let junk = run(&["fit", "--data", "junk.csv"], p);
    assert_eq!(junk.status.code(), Some(12));
    assert_eq!(error_record(&junk)["error"], "parse");

    std::fs::write(p.join("sep.csv"), "x,label\n-2,-1\n-1,-1\n1,1\n2,1\n").unwrap();
    let sep = run(&["fit", "--data", "sep.csv"], p);
    assert_eq!(sep.status.code(), Some(8));
    assert!(run(&["fit", "--data", "sep.csv", "--ridge-fallback"], p).status.success());

    let missing = run(&["fit", "--data", "nope.csv"], p);
    assert_eq!(missing.status.code(), Some(14));

    let codes: std::collections::BTreeSet<_> = [7, 5, 12, 8, 14].into_iter().collect();
    assert_eq!(codes.len(), 5);
}

#[test]
fn simulate_writes_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "n_grid = [400]\nnoise_gaps = [[0.0, 0.2]]\nk_grid = [1, 4]\ndelta_grid = [0.0]\nruns = 5\n";
    std::fs::write(dir.path().join("cfg.toml"), cfg).unwrap();
    let out = run(&["simulate", "--config", "cfg.toml", "--out", "sim", "--seed", "4"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["cells"].as_array().unwrap().len(), 2);
    assert_eq!(v["config"]["root_seed"], 4);
    let cells = std::fs::read_to_string(dir.path().join("sim/cells.csv")).unwrap();
    assert_eq!(cells.lines().count(), 3);

    let bad = run(&["simulate", "--out", "sim2", "--runs", "0"], dir.path());
    assert_eq!(bad.status.code(), Some(3));
}
