use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_remaug"));
    c.env_remove("REMAUG_SEED");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SCENARIO: &str = r#"{
  "grid": {"origin_x": 0, "origin_y": 0, "cell_size": 10, "n_rows": 4, "n_cols": 4},
  "transmitters": [{"x": 20, "y": 20, "height": 30, "p_t": 43, "freq_mhz": 900}],
  "prop": {"intercept_db": 40, "exponent": 3, "shadow_sigma_db": 6, "decorr_dist_m": 50},
  "seed": 1
}"#;

fn setup() -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().to_path_buf();
    fs::write(p.join("sc.json"), SCENARIO).unwrap();
    (dir, p)
}

fn generate(p: &Path) {
    let o = run(p, &["generate", "sc.json", "-o", "truth.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn generate_writes_grid_and_sidecar() {
    let (_d, p) = setup();
    generate(&p);
    let csv = fs::read_to_string(p.join("truth.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().all(|l| l.split(',').count() == 4));
    assert!(!csv.contains('\r'));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("truth.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["grid"]["n_rows"], 4);
    assert_eq!(meta["scenario"]["seed"], 1);
    assert_eq!(meta["tool"], "remaug");
    assert!(meta.get("wall_time_s").is_none());
}

#[test]
fn load_and_rewrite_is_identical() {
    let (_d, p) = setup();
    generate(&p);
    let o = run(&p, &["mask", "truth.csv", "--fraction", "1.0", "-o", "copy.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read(p.join("truth.csv")).unwrap(),
        fs::read(p.join("copy.csv")).unwrap()
    );
}

#[test]
fn malformed_json_reports_location() {
    let (_d, p) = setup();
    fs::write(p.join("bad.json"), "{\n  \"grid\": [1,\n").unwrap();
    let o = run(&p, &["generate", "bad.json", "-o", "x.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

#[test]
fn seed_precedence() {
    let (_d, p) = setup();
    let seed_of = |args: &[&str], env: Option<&str>| {
        let mut c = bin();
        c.current_dir(&p).args(args);
        if let Some(e) = env {
            c.env("REMAUG_SEED", e);
        }
        let o = c.output().unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let meta: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(p.join("s.meta.json")).unwrap()).unwrap();
        meta["scenario"]["seed"].as_u64().unwrap()
    };
    assert_eq!(seed_of(&["generate", "sc.json", "-o", "s.csv"], None), 1);
    assert_eq!(seed_of(&["generate", "sc.json", "-o", "s.csv"], Some("7")), 7);
    assert_eq!(
        seed_of(&["--seed", "9", "generate", "sc.json", "-o", "s.csv"], Some("7")),
        9
    );
}

#[test]
fn reconstruct_paths() {
    let (_d, p) = setup();
    generate(&p);
    let o = run(
        &p,
        &["mask", "truth.csv", "--fraction", "0.5", "-o", "obs.csv", "--samples-out", "s.csv"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let before = fs::read(p.join("obs.csv")).unwrap();

    let o = run(&p, &["reconstruct", "--input", "obs.csv", "--method", "kriging", "-o", "k.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let k = fs::read_to_string(p.join("k.csv")).unwrap();
    assert!(!k.contains("nan"));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("k.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["method"]["method"], "kriging");
    assert_eq!(meta["reconstruction"]["details"]["kind"], "kriging");

    let o = run(&p, &["reconstruct", "--input", "obs.csv", "--method", "GAN", "-o", "g.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("advisory label, not implemented"));

    let o = run(&p, &["reconstruct", "--input", "obs.csv", "--method", "bogus", "-o", "g.csv"]);
    assert_eq!(code(&o), 2);

    let o = run(
        &p,
        &["reconstruct", "--input", "obs.csv", "--method", "idw", "--param", "pow=2", "-o", "g.csv"],
    );
    assert_eq!(code(&o), 2);

    let o = run(
        &p,
        &["reconstruct", "--input", "obs.csv", "--method", "SPLINES", "-o", "t.csv", "--timing"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("t.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["method"]["method"], "tps");
    assert!(meta["wall_time_s"].is_number());

    // CRLF sample input
    let crlf = fs::read_to_string(p.join("s.csv")).unwrap().replace('\n', "\r\n");
    fs::write(p.join("s_crlf.csv"), crlf).unwrap();
    let o = run(
        &p,
        &[
            "reconstruct", "--samples", "s_crlf.csv", "--scenario", "sc.json", "--method", "idw",
            "-o", "i.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o2 = run(
        &p,
        &["reconstruct", "--input", "obs.csv", "--method", "idw", "-o", "i2.csv"],
    );
    assert_eq!(code(&o2), 0);
    assert_eq!(
        fs::read(p.join("i.csv")).unwrap(),
        fs::read(p.join("i2.csv")).unwrap()
    );

    let o = run(&p, &["reconstruct", "--input", "obs.csv", "--method", "rss", "-o", "r.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    assert_eq!(fs::read(p.join("obs.csv")).unwrap(), before);
}

#[test]
fn natural_neighbor_outside_hull() {
    let (_d, p) = setup();
    generate(&p);
    // keep only the four inner bins
    let truth = fs::read_to_string(p.join("truth.csv")).unwrap();
    let sparse: Vec<String> = truth
        .lines()
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .enumerate()
                .map(|(j, v)| {
                    if j == i || j + i == 3 || (i == 1 && j == 1) || (i == 2 && j == 2) {
                        v.to_string()
                    } else {
                        "nan".to_string()
                    }
                })
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    fs::write(p.join("sp.csv"), sparse.join("\n") + "\n").unwrap();
    fs::copy(p.join("truth.meta.json"), p.join("sp.meta.json")).unwrap();
    let o = run(
        &p,
        &["reconstruct", "--input", "sp.csv", "--method", "natural_neighbor", "-o", "nn.csv"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    let nn = fs::read_to_string(p.join("nn.csv")).unwrap();
    assert!(nn.contains("nan"));
    let o = run(
        &p,
        &[
            "reconstruct", "--input", "sp.csv", "--method", "natural_neighbor", "--strict", "-o",
            "nn.csv",
        ],
    );
    assert_eq!(code(&o), 1);
}

fn bench_config(methods: &str, seeds: &str, assertions: &str) -> String {
    format!(
        r#"{{
  "scenario": {{
    "grid": {{"origin_x": 0, "origin_y": 0, "cell_size": 10, "n_rows": 20, "n_cols": 20}},
    "transmitters": [{{"x": 100, "y": 100, "height": 30, "p_t": 43, "freq_mhz": 900}}],
    "prop": {{"intercept_db": 40, "exponent": 3, "shadow_sigma_db": 6, "decorr_dist_m": 100}},
    "seed": 3
  }},
  "mask": {{"kind": "UniformRandom", "fraction": 0.2, "seed": 4}},
  "methods": {methods},
  "seeds": {seeds},
  "assertions": {assertions}
}}"#
    )
}

#[test]
fn benchmark_exit_codes() {
    let (_d, p) = setup();
    fs::write(p.join("empty.json"), bench_config("[]", "[1]", "[]")).unwrap();
    let o = run(&p, &["benchmark", "empty.json", "-o", "r.json"]);
    assert_eq!(code(&o), 2);

    let methods = r#"[{"method": "kriging"}, {"method": "nearest"}]"#;
    fs::write(
        p.join("one.json"),
        bench_config(methods, "[1]", r#"[{"ordering": ["kriging", "nearest"]}]"#),
    )
    .unwrap();
    let o = run(&p, &["benchmark", "one.json", "-o", "r.json", "--csv", "r.csv"]);
    assert_eq!(code(&o), 0, "{}{}", stderr(&o), String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["aggregates"][0]["rmse"]["std"], 0.0);
    let csv = fs::read_to_string(p.join("r.csv")).unwrap();
    assert!(csv.starts_with("method,seed,metric,value\n"));
    assert!(csv.contains("kriging,1,rmse,"));

    fs::write(
        p.join("bad.json"),
        bench_config(methods, "[1, 2]", r#"[{"ordering": ["nearest", "kriging"]}]"#),
    )
    .unwrap();
    let o = run(&p, &["benchmark", "bad.json", "-o", "r2.json"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn select_command() {
    let (_d, p) = setup();
    fs::write(p.join("f.json"), r#"{"new_unseen_scenario": true}"#).unwrap();
    let o = run(&p, &["select", "f.json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["methods"], serde_json::json!(["SIMULATOR", "TESTBED"]));

    fs::write(p.join("e.json"), "{}").unwrap();
    let o = run(&p, &["select", "e.json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(!v["methods"].as_array().unwrap().is_empty());

    fs::write(p.join("b.json"), r#"{"bogus": 1}"#).unwrap();
    let o = run(&p, &["select", "b.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("new_unseen_scenario"));
}
