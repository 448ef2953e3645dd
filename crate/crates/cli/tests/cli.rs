use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn graph() -> Value {
    let e = |id: u32, parent: u32, child: u32| json!({ "id": id, "parent": parent, "child": child, "length": 1.0 });
    json!({ "T": 2.0, "edges": [e(1, 0, 1), e(2, 1, 2), e(3, 1, 3), e(4, 2, 4), e(5, 2, 5)] })
}

fn reference_weights() -> Value {
    json!({ "root": { "a": 1, "b": 2, "c": -7 }, "margin": 0 })
}

fn inverse_modes() -> Value {
    let bv = ["0", "3", "4", "5"];
    let mut modes = vec![json!({ "m": 0, "boundary": { "0": 1.0, "3": 1.0, "4": 1.0, "5": 1.0 } })];
    for m in 2..=5u32 {
        let w = m as f64 * std::f64::consts::PI / 2.0;
        let amps =
            [0.2 / w, 0.1 * (m as f64).cos() / w, 0.15 * (2.0 * m as f64).sin() / w, (-0.1 + 0.05 * m as f64) / w];
        let boundary: serde_json::Map<String, Value> =
            bv.iter().zip(amps).map(|(k, a)| (k.to_string(), json!(a))).collect();
        modes.push(json!({ "m": m, "boundary": boundary }));
    }
    Value::Array(modes)
}

fn inverse_scenario() -> Value {
    json!({
        "graph": graph(),
        "seed": 7,
        "grid": { "nodes_per_edge": 21 },
        "problem": { "modes": inverse_modes() },
        "forward": { "n_time": 81, "observe_root": true, "min_abs_z": 0.5 },
        "invert": { "n_param": 2, "M": 0.5, "max_iter": 500,
                    "truth": [0.3, -0.2, 0.1, 0.4, -0.3, 0.2, 0.0, -0.4, 0.25, 0.15] },
        "stability": { "n_pairs": 6, "M": 0.5, "min_abs_z": 0.5 }
    })
}

fn carleman_scenario() -> Value {
    json!({
        "graph": graph(),
        "weights": reference_weights(),
        "grid": { "nodes_per_edge": 21 },
        "problem": { "potential": 0.0, "modes": [{ "m": 1, "source": { "kind": "sin", "shift": 0.5 } }] },
        "carleman": { "s_grid": [1.0, 2.0, 4.0, 6.0, 8.0, 10.0], "n_time": 401, "proof_s": [1.0] }
    })
}

struct Run {
    dir: tempfile::TempDir,
}

impl Run {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn scenario(&self, name: &str, value: &Value) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, serde_json::to_string_pretty(value).unwrap()).unwrap();
        p
    }

    fn exec(&self, command: &str, scenario: &Path, out: &str, extra: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_tree-carleman"))
            .arg(command)
            .arg("--scenario")
            .arg(scenario)
            .arg("--out")
            .arg(self.path(out))
            .args(extra)
            .output()
            .unwrap()
    }

    fn json(&self, path: &str) -> Value {
        serde_json::from_str(&std::fs::read_to_string(self.path(path)).unwrap()).unwrap()
    }
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn weights_reproduce_the_worked_example() {
    let run = Run::new();
    let s = run.scenario("s.json", &json!({ "graph": graph(), "weights": reference_weights() }));
    let out = run.exec("weights", &s, "out", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = run.json("out/weights.json");
    assert_eq!(doc["pass"], json!(true));
    assert_eq!(doc["version"], json!(env!("CARGO_PKG_VERSION")));
    assert_eq!(doc["scenario_sha256"].as_str().unwrap().len(), 64);
    let polys = doc["polys"].as_array().unwrap();
    for (edge, abc) in
        [(2, [[1, 4], [3, 2], [-23, 4]]), (3, [[1, 4], [3, 2], [-23, 4]]), (4, [[1, 16], [1, 1], [-4, 1]])]
    {
        let p = &polys[edge - 1];
        assert_eq!([p["a"].clone(), p["b"].clone(), p["c"].clone()], abc.map(|v| json!(v)));
    }
}

#[test]
fn graph_file_is_resolved_relative_to_the_scenario() {
    let run = Run::new();
    std::fs::write(run.path("g.json"), graph().to_string()).unwrap();
    let s = run.scenario("s.json", &json!({ "graph": "g.json", "weights": reference_weights() }));
    assert_eq!(run.exec("weights", &s, "out", &[]).status.code(), Some(0));
}

#[test]
fn nonpositive_root_slope_is_invalid_input() {
    let run = Run::new();
    let s = run.scenario("s.json", &json!({ "graph": graph(), "weights": { "root": { "a": 1, "b": 0, "c": -7 } } }));
    let out = run.exec("weights", &s, "out", &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert!(err["message"].as_str().unwrap().contains("root derivative condition"), "{err}");
}

#[test]
fn missing_graph_file_is_io_error() {
    let run = Run::new();
    let s = run.scenario("s.json", &json!({ "graph": "nowhere.json" }));
    let out = run.exec("weights", &s, "out", &[]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], json!("input not found"));
    let out = run.exec("weights", &run.path("absent.json"), "out", &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn empty_sweep_is_invalid_input() {
    let run = Run::new();
    let mut sc = carleman_scenario();
    sc["carleman"]["s_grid"] = json!([]);
    let out = run.exec("carleman", &run.scenario("s.json", &sc), "out", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("empty sweep"));
}

#[test]
fn reference_carleman_scenario_passes() {
    let run = Run::new();
    let out = run.exec("carleman", &run.scenario("s.json", &carleman_scenario()), "out", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(run.json("out/certificate.json")["pass"], json!(true));
    let csv = std::fs::read_to_string(run.path("out/carleman.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# tree-carleman"));
    assert_eq!(lines.next().unwrap(), "s,lhs,rhs_data,B_theorem1,B_corollary,ratio,flagged");
    assert_eq!(lines.count(), 6);
}

#[test]
fn injected_weight_violation_fails_with_certificate() {
    let run = Run::new();
    let mut sc = carleman_scenario();
    let p = |edge: u32, a: [i64; 2], b: [i64; 2], c: [i64; 2]| json!({ "edge": edge, "a": a, "b": b, "c": c });
    sc["weights"] = json!({ "polys": [
        p(1, [1, 1], [2, 1], [-7, 1]),
        p(2, [1, 4], [3, 2], [-23, 4]),
        p(3, [1, 4], [3, 2], [-22, 4]),
        p(4, [1, 16], [1, 1], [-4, 1]),
        p(5, [1, 16], [1, 1], [-4, 1]),
    ] });
    sc["carleman"]["refine"] = json!(false);
    let out = run.exec("carleman", &run.scenario("s.json", &sc), "out", &[]);
    assert_eq!(out.status.code(), Some(3));
    let cert = run.json("out/certificate.json");
    assert_eq!(cert["pass"], json!(false));
    assert!(cert["checks"].as_array().unwrap().iter().any(|c| c["name"] == json!("weights.ValueContinuity")));
}

#[test]
fn inverse_crime_reconstruction_is_accurate() {
    let run = Run::new();
    let out = run.exec("invert", &run.scenario("s.json", &inverse_scenario()), "out", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = run.json("out/summary.json");
    assert!(summary["relative_error"].as_f64().unwrap() <= 1e-3, "{summary}");
    assert!(run.path("out/observations.csv").exists());
}

#[test]
fn reconstruction_from_observation_file() {
    let run = Run::new();
    let mut sc = inverse_scenario();
    sc["problem"]["potential"] = json!(0.1);
    sc["invert"]["n_param"] = json!(1);
    sc["invert"]["truth"] = json!([0.1, 0.1, 0.1, 0.1, 0.1]);
    sc["invert"]["observations"] = json!("obs/observations.csv");
    std::fs::create_dir_all(run.path("obs")).unwrap();
    // synthesize with a constant potential, then invert with one parameter per edge
    let fwd = run.scenario("fwd.json", &sc);
    assert_eq!(run.exec("forward", &fwd, "obs", &[]).status.code(), Some(0));
    let out = run.exec("invert", &fwd, "inv", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run.json("inv/summary.json")["relative_error"].as_f64().unwrap() < 1e-3);
}

#[test]
fn stability_is_deterministic_and_handles_zero_pairs() {
    let run = Run::new();
    let s = run.scenario("s.json", &inverse_scenario());
    assert_eq!(run.exec("stability", &s, "a", &[]).status.code(), Some(0));
    assert_eq!(run.exec("stability", &s, "b", &["--threads", "1"]).status.code(), Some(0));
    for f in ["summary.json", "stability.csv"] {
        assert_eq!(
            std::fs::read(run.path(&format!("a/{f}"))).unwrap(),
            std::fs::read(run.path(&format!("b/{f}"))).unwrap()
        );
    }
    let summary = run.json("a/summary.json");
    assert_eq!(summary["n_pairs"], json!(6));
    assert!(summary["empirical_C"].as_f64().unwrap().is_finite());
    assert_eq!(run.exec("stability", &s, "c", &["--seed", "8"]).status.code(), Some(0));
    assert_ne!(run.json("c/summary.json")["empirical_C"], summary["empirical_C"]);

    let mut sc = inverse_scenario();
    sc["stability"]["n_pairs"] = json!(0);
    let out = run.exec("stability", &run.scenario("z.json", &sc), "z", &[]);
    assert_eq!(out.status.code(), Some(0));
    let summary = run.json("z/summary.json");
    assert_eq!(summary["empirical_C"], Value::Null);
    assert_eq!(summary["n_pairs"], json!(0));
}

#[test]
fn noisy_forward_needs_and_uses_the_seed() {
    let run = Run::new();
    let mut sc = inverse_scenario();
    sc["forward"]["noise"] = json!(0.01);
    let s = run.scenario("s.json", &sc);
    assert_eq!(run.exec("forward", &s, "a", &[]).status.code(), Some(0));
    assert_eq!(run.exec("forward", &s, "b", &[]).status.code(), Some(0));
    let read = |d: &str| std::fs::read(run.path(&format!("{d}/observations.csv"))).unwrap();
    assert_eq!(read("a"), read("b"));
    sc.as_object_mut().unwrap().remove("seed");
    let out = run.exec("forward", &run.scenario("t.json", &sc), "c", &[]);
    assert_eq!(out.status.code(), Some(2));
}
