use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_greenforge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("bad JSON ({e}): {text}"))
}

fn error_line(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(text.trim_end().lines().count(), 1, "error must be one line: {text}");
    serde_json::from_str(text.trim()).unwrap()
}

fn write_spec(dir: &Path, body: &str) -> String {
    let path = dir.join("spec.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn criterion_power_p2_holds() {
    let out = run(&["criterion", "--weight", "power:0", "--p", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["classification"], "holds");
    assert_eq!(v["weight"], "power:0");
    let trace = v["trace"].as_array().unwrap();
    assert_eq!(trace.len(), 40);
    for pt in trace {
        let (r, f) = (pt["r"].as_f64().unwrap(), pt["F"].as_f64().unwrap());
        assert!((f / (1.0 / r).ln() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn criterion_writes_profile_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("profile.csv");
    let out = run(&["criterion", "--weight", "power:1", "--p", "2.5", "--profile-out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["classification"], "fails");
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("log2_r,log2_mu"));
    for line in lines {
        let (t, m) = line.split_once(',').unwrap();
        let (t, m): (f64, f64) = (t.parse().unwrap(), m.parse().unwrap());
        // μ(B_r) = 2π r³ / 3 for w = |x|.
        assert!((m - ((2.0 * PI / 3.0).log2() + 3.0 * t)).abs() < 1e-10);
    }
}

#[test]
fn capacity_closed_form_and_errors() {
    let out = run(&["capacity", "--weight", "power:0", "--p", "2", "--r", "0.1", "--R", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["value"].as_f64().unwrap() / (2.0 * PI / 10f64.ln()) - 1.0).abs() < 1e-14);
    assert_eq!(v["method"], "closed_form");

    let out = run(&["capacity", "--weight", "power:0", "--p", "1", "--r", "0.1", "--R", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let e = error_line(&out);
    assert_eq!(e["error"]["kind"], "domain");
    assert_eq!(e["error"]["exit_code"], 2);

    for args in [
        &["capacity", "--weight", "powr:0", "--p", "2", "--r", "0.1", "--R", "1"][..],
        &["capacity", "--weight", "osc:3,2,4,5", "--p", "2", "--r", "0.1", "--R", "1"],
        &["capacity", "--weight", "power:0", "--p", "2"],
        &["capacity", "--weight", "power:0", "--p", "two", "--r", "0.1", "--R", "1"],
        &["nonsense"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        error_line(&out);
    }
}

#[test]
fn oscillating_weight_at_extreme_radii() {
    // 1e-300 is still far above alpha_21 = 2^(-4^21).
    let out = run(&["capacity", "--weight", "osc:2,3,4,5", "--p", "2", "--r", "1e-300", "--R", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["criterion", "--weight", "osc:2,3,4,5", "--p", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["classification"], "holds");
    assert_eq!(v["singleton_capacity"], "zero");
}

#[test]
fn solve_ring_writes_reloadable_field() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{"weight":"power:0","p":2,"norm":"euclid","grid":{"M":16,"N":16,"r0":0.1,"R":1},"bc":{"type":"ring"}}"#,
    );
    let field = dir.path().join("u.csv");
    let out = run(&["solve", "--spec", &spec, "--field-out", field.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let e = v["energy"].as_f64().unwrap();
    assert!((e / (2.0 * PI / 10f64.ln()) - 1.0).abs() < 0.02, "{e}");
    assert!(v["iterations"].as_u64().unwrap() > 0);

    // The dump reloads into an identical field, so a second dump is byte-identical.
    let loaded = greenforge::io::load_field(&field).unwrap();
    let mut again = Vec::new();
    greenforge::io::write_field_csv(&loaded, &mut again).unwrap();
    assert_eq!(again, std::fs::read(&field).unwrap());
    assert_eq!(loaded.grid().rings(), 17);
    assert_eq!(loaded.grid().angles(), 16);

    // Dirichlet data from the dump reproduces the same energy.
    let spec = write_spec(
        dir.path(),
        &format!(
            r#"{{"weight":"power:0","p":2,"norm":"euclid","grid":{{"M":16,"N":16,"r0":0.1,"R":1}},"bc":{{"type":"dirichlet","field":{:?}}}}}"#,
            field.to_str().unwrap()
        ),
    );
    let out = run(&["solve", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!((json(&out)["energy"].as_f64().unwrap() / e - 1.0).abs() < 1e-6);
}

#[test]
fn solve_rejects_bad_specs() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        r#"{"weight":"power:0","p":2,"norm":"euclid","grid":{"M":16,"N":16,"r0":0.1,"R":1},"bc":{"type":"ring"},"extra":1}"#,
        r#"{"weight":"power:0","p":2,"norm":"taxicab","grid":{"M":16,"N":16,"r0":0.1,"R":1},"bc":{"type":"ring"}}"#,
        r#"{"weight":"power:0","p":1.01,"norm":"euclid","grid":{"M":16,"N":16,"r0":0.1,"R":1},"bc":{"type":"ring"}}"#,
        r#"{"weight":"power:0","p":2,"norm":"euclid","grid":{"M":4,"N":16,"r0":0.1,"R":1},"bc":{"type":"ring"}}"#,
        r#"{"weight":"power:0","p":2,"norm":"euclid","grid":{"M":16,"N":16,"r0":0.1,"R":1},"bc":{"type":"dirichlet","field":"/nonexistent.csv"}}"#,
        "not json",
    ] {
        let spec = write_spec(dir.path(), body);
        let out = run(&["solve", "--spec", &spec]);
        assert_eq!(out.status.code(), Some(2), "{body}");
        error_line(&out);
    }
    let out = run(&["solve", "--spec", "/nonexistent/spec.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{"weight":"power:0","p":2,"norm":"euclid","grid":{"M":32,"N":16,"r0":0.01,"R":1},"bc":{"type":"ring"},"tol":1e-15,"max_iterations":3}"#,
    );
    let out = run(&["solve", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_line(&out)["error"]["kind"], "numerical");
}

#[test]
fn output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{"weight":"power:0.5","p":1.5,"norm":"finsler","grid":{"M":24,"N":16,"r0":0.2,"R":1},"bc":{"type":"ring"},"schedule":[4,8]}"#,
    );
    let outputs: Vec<Vec<u8>> = ["1", "3", "1"]
        .iter()
        .map(|t| {
            let out = bin().env("GREENFORGE_THREADS", t).args(["solve", "--spec", &spec]).output().unwrap();
            assert_eq!(out.status.code(), Some(0));
            out.stdout
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn harnack_constants_and_probe() {
    let out = run(&["harnack", "--A", "2", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["constants"]["C0"].as_f64().unwrap() - 4.0).abs() < 1e-12);
    assert!((v["constants"]["alpha_exp"].as_f64().unwrap() - 2f64.ln() / 50f64.ln()).abs() < 1e-15);
    assert!(v["decay"].is_null());

    let out = run(&["harnack", "--A", "1", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(2));

    // A positive radial field probed off-center.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    let grid = greenforge::finsler::PolarGrid::new(0.05, 1.0, 32, 32).unwrap();
    let field = greenforge::finsler::ScalarField::from_fn(grid, |r, th| 2.0 + r * th.cos()).unwrap();
    greenforge::io::save_field(&field, &path).unwrap();
    let out = run(&["harnack", "--A", "3", "--lambda", "2", "--probe", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let pts = v["decay"]["points"].as_array().unwrap();
    assert_eq!(pts.len(), 3);
    assert_eq!(v["decay"]["monotone"], true);
    assert!(v["decay"]["exponent"].as_f64().unwrap() > 0.0);
    assert_eq!(v["bound"].as_array().unwrap().len(), 3);
}

#[test]
fn green_eval_matches_closed_form() {
    let out = run(&["green", "eval", "--p", "1.5", "--R", "1", "--profile", "triangle", "--r", "0.3", "--theta", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    // a_p = 1 and f(1) = 1.
    let exact = (1.0 / 0.3 - 1.0) * 1f64.exp();
    assert!((v["value"].as_f64().unwrap() / exact - 1.0).abs() < 1e-12);
    let out = run(&["green", "eval", "--p", "2.5", "--r", "0.3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn green_normalize_small_grid() {
    let out = run(&["green", "normalize", "--p", "1.5", "--R", "1", "--n", "16", "--m", "32"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!((v["A"].as_f64().unwrap() * 4.0 * PI * PI - 1.0).abs() < 0.02);
    assert_eq!(v["levels"].as_array().unwrap().len(), 3);
}

#[test]
fn comparison_witness_exit_code_tracks_acceptance() {
    let out = run(&["witness", "comparison", "--p", "2", "--alpha", "1", "--n", "32", "--m", "32"]);
    let v = json(&out);
    let accepted = v["accepted"].as_bool().unwrap();
    assert_eq!(out.status.code(), Some(if accepted { 0 } else { 3 }));
    assert_eq!(v["equality_rays"], serde_json::json!([0]));
    for c in v["checks"].as_array().unwrap() {
        assert!(c["name"].is_string() && c["value"].is_number() && c["bound"].is_number());
    }
}

#[test]
fn witness_out_of_range_is_a_domain_error() {
    let out = run(&["witness", "nonuniqueness", "--p", "2.5"]);
    assert_eq!(out.status.code(), Some(2));
    error_line(&out);
}

#[test]
fn report_subset_is_deterministic() {
    let run_report = || {
        let out = run(&["report", "--only", "5,7"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let mut v = json(&out);
        assert_eq!(v["passed"], true);
        v.as_object_mut().unwrap().remove("timing");
        v
    };
    let (a, b) = (run_report(), run_report());
    assert_eq!(a, b);
    assert_eq!(a["criteria"].as_array().unwrap().len(), 2);
    let out = run(&["report", "--only", "11"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn json_reports_are_byte_identical() {
    let args = ["criterion", "--weight", "osc:2,3,4,5", "--p", "4"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}
