//! End-to-end tests of the `wflat` binary: exit codes, file formats, and
//! determinism of the scan output.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn wflat(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wflat"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_csv(dir: &Path, name: &str, rows: &[(f64, f64, f64)]) {
    let mut body = String::from("x0,x1,w\n");
    for (x, y, w) in rows {
        body.push_str(&format!("{x},{y},{w}\n"));
    }
    fs::write(dir.join(name), body).unwrap();
}

#[test]
fn gen_graph_writes_the_requested_csv() {
    let tmp = TempDir::new().unwrap();
    let out = wflat(
        tmp.path(),
        &["gen", "graph", "--n", "1", "--d", "2", "--lip", "0.3", "--res", "256", "-o", "g.csv"],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = fs::read_to_string(tmp.path().join("g.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x0,x1,w");
    assert_eq!(lines.len(), 257, "header plus one row per sample site");
    for row in &lines[1..] {
        let fields: Vec<f64> = row.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields.len(), 3);
        assert!(fields[2] > 0.0, "weights are positive: {row}");
    }
}

#[test]
fn mass_mismatch_exits_with_the_computation_code() {
    let tmp = TempDir::new().unwrap();
    write_csv(tmp.path(), "a.csv", &[(0.0, 0.0, 0.6), (1.0, 0.0, 0.4)]);
    write_csv(tmp.path(), "b.csv", &[(0.5, 0.5, 0.5)]);
    let out = wflat(tmp.path(), &["transport", "--p", "2", "a.csv", "b.csv"]);
    assert_eq!(code(&out), 2, "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("MassMismatch"), "stderr: {}", stderr(&out));
}

#[test]
fn transport_reports_the_exact_cost_between_singletons() {
    let tmp = TempDir::new().unwrap();
    write_csv(tmp.path(), "a.csv", &[(0.0, 0.0, 1.0)]);
    write_csv(tmp.path(), "b.csv", &[(3.0, 4.0, 1.0)]);
    let out = wflat(tmp.path(), &["transport", "--p", "2", "a.csv", "b.csv"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let v = stdout_json(&out);
    assert!((v["cost"].as_f64().unwrap() - 5.0).abs() < 1e-12);
    assert!((v["source_mass"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["pairs"].as_array().unwrap().len(), 1);
    assert_eq!(v["config"]["command"], "transport");
}

#[test]
fn invalid_exponent_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    write_csv(tmp.path(), "a.csv", &[(0.0, 0.0, 1.0)]);
    let out = wflat(tmp.path(), &["transport", "--p", "3", "a.csv", "a.csv"]);
    assert_eq!(code(&out), 1, "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("--p must be 1 or 2"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = wflat(tmp.path(), &["frobnicate"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn help_exits_cleanly() {
    let tmp = TempDir::new().unwrap();
    let out = wflat(tmp.path(), &["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["gen", "transport", "coeff", "scan", "localize", "knothe"] {
        assert!(text.contains(sub), "help lists {sub}");
    }
}

#[test]
fn missing_input_file_is_a_computation_error() {
    let tmp = TempDir::new().unwrap();
    let out = wflat(tmp.path(), &["scan", "nope.csv", "--depth", "2:3"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nope.csv"));
}

#[test]
fn cantor_generation_is_capped() {
    let tmp = TempDir::new().unwrap();
    let out = wflat(tmp.path(), &["gen", "cantor", "--generation", "9"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("at most 8"));
}

#[test]
fn scan_emits_one_line_per_evaluated_cube_plus_summary() {
    let tmp = TempDir::new().unwrap();
    let gen = wflat(
        tmp.path(),
        &["gen", "graph", "--n", "1", "--d", "2", "--lip", "0.3", "--res", "64", "-o", "g.csv"],
    );
    assert_eq!(code(&gen), 0, "stderr: {}", stderr(&gen));
    let out = wflat(
        tmp.path(),
        &["scan", "g.csv", "--p", "2", "--depth", "2:4", "-o", "report.jsonl", "--csv", "report.csv"],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let text = fs::read_to_string(tmp.path().join("report.jsonl")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let (data, tail): (Vec<&&str>, Vec<&&str>) =
        lines.iter().partition(|l| l.starts_with("{\"id\""));
    assert_eq!(tail.len(), 1, "exactly one summary line");
    let summary: Value = serde_json::from_str(tail[0]).unwrap();
    let evaluated = summary["summary"]["evaluated"].as_u64().unwrap() as usize;
    assert_eq!(data.len(), evaluated, "one line per evaluated cube");
    assert_eq!(summary["summary"]["depth"], "2:4");
    for line in &data {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v["alpha2"].as_f64().unwrap() >= 0.0);
        assert!(v["beta2"].as_f64().unwrap() >= 0.0);
        assert!(v["mass"].as_f64().unwrap() > 0.0);
    }

    // The CSV mirror carries the same records.
    let csv_text = fs::read_to_string(tmp.path().join("report.csv")).unwrap();
    let csv_lines: Vec<&str> = csv_text.lines().collect();
    assert_eq!(csv_lines[0], "id,alpha2,beta2,mass");
    assert_eq!(csv_lines.len() - 1, evaluated);
}

#[test]
fn repeated_scans_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let gen = wflat(
        tmp.path(),
        &["gen", "graph", "--n", "1", "--d", "2", "--lip", "0.2", "--res", "64", "-o", "g.csv"],
    );
    assert_eq!(code(&gen), 0);
    let args = ["scan", "g.csv", "--p", "2", "--depth", "2:4", "--jobs", "2", "-o", "r.jsonl"];
    assert_eq!(code(&wflat(tmp.path(), &args)), 0);
    let first = fs::read(tmp.path().join("r.jsonl")).unwrap();
    assert_eq!(code(&wflat(tmp.path(), &args)), 0);
    let second = fs::read(tmp.path().join("r.jsonl")).unwrap();
    assert_eq!(first, second, "identical invocations produce identical bytes");
}

#[test]
fn scan_records_do_not_depend_on_the_job_count() {
    let tmp = TempDir::new().unwrap();
    let gen = wflat(
        tmp.path(),
        &["gen", "graph", "--n", "1", "--d", "2", "--lip", "0.2", "--res", "64", "-o", "g.csv"],
    );
    assert_eq!(code(&gen), 0);
    let run = |jobs: &str, out: &str| {
        let st = wflat(
            tmp.path(),
            &["scan", "g.csv", "--p", "2", "--depth", "2:4", "--jobs", jobs, "-o", out],
        );
        assert_eq!(code(&st), 0, "stderr: {}", stderr(&st));
        fs::read_to_string(tmp.path().join(out)).unwrap()
    };
    let serial = run("1", "serial.jsonl");
    let parallel = run("4", "parallel.jsonl");
    let datum = |text: &str| -> Vec<String> {
        text.lines().filter(|l| l.starts_with("{\"id\"")).map(str::to_owned).collect()
    };
    assert_eq!(datum(&serial), datum(&parallel), "record lines and their order match");

    // The summaries agree on everything except the run provenance.
    let strip = |text: &str| -> Value {
        let line = text.lines().find(|l| !l.starts_with("{\"id\"")).unwrap();
        let mut v: Value = serde_json::from_str(line).unwrap();
        v["summary"].as_object_mut().unwrap().remove("config");
        v
    };
    assert_eq!(strip(&serial), strip(&parallel));
}

#[test]
fn coefficient_report_names_the_witness() {
    let tmp = TempDir::new().unwrap();
    let gen = wflat(
        tmp.path(),
        &["gen", "graph", "--n", "1", "--d", "2", "--lip", "0.3", "--res", "128", "-o", "g.csv"],
    );
    assert_eq!(code(&gen), 0);
    let out = wflat(
        tmp.path(),
        &["coeff", "alpha", "g.csv", "--p", "2", "--center", "0.5,0", "--radius", "0.2"],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["kind"], "alpha_p");
    assert_eq!(v["p"], 2.0);
    assert!(v["value"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["plane"]["base"].as_array().unwrap().len(), 2);
    assert_eq!(v["plane"]["frame"].as_array().unwrap().len(), 1);
    assert!(v["c_bl"].as_f64().unwrap() > 0.0);
    assert!(v["spacing"].as_f64().unwrap() > 0.0);
}

#[test]
fn beta_inf_variants_are_exposed() {
    let tmp = TempDir::new().unwrap();
    write_csv(
        tmp.path(),
        "m.csv",
        &[(-0.5, 0.0, 1.0), (-0.25, 0.01, 1.0), (0.0, 0.0, 1.0), (0.25, -0.01, 1.0), (0.5, 0.0, 1.0)],
    );
    for kind in ["beta-inf", "b-beta-inf"] {
        let out = wflat(
            tmp.path(),
            &["coeff", kind, "m.csv", "--center", "0,0", "--radius", "0.5"],
        );
        assert_eq!(code(&out), 0, "{kind} stderr: {}", stderr(&out));
        let v = stdout_json(&out);
        assert!(v["p"].is_null(), "sup coefficients have no finite exponent");
        assert!(v["value"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn json_measures_flow_through_every_reader() {
    let tmp = TempDir::new().unwrap();
    let gen = wflat(
        tmp.path(),
        &["gen", "density", "--res", "6", "--seed", "7", "-o", "m.json"],
    );
    assert_eq!(code(&gen), 0, "stderr: {}", stderr(&gen));
    let parsed: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(parsed["dim"], 2);
    assert_eq!(parsed["points"].as_array().unwrap().len(), 36);

    let out = wflat(tmp.path(), &["transport", "--p", "1", "m.json", "m.json"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let v = stdout_json(&out);
    assert!(v["cost"].as_f64().unwrap().abs() < 1e-12, "self-transport is free");

    let out = wflat(
        tmp.path(),
        &["coeff", "beta", "m.json", "--p", "2", "--center", "0.5,0.5", "--radius", "0.4"],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
}

#[test]
fn localize_and_knothe_report_their_constants() {
    let tmp = TempDir::new().unwrap();
    let out = wflat(
        tmp.path(),
        &["localize", "--p", "2", "--trials", "4", "--seed", "11", "--res", "6"],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["records"].as_array().unwrap().len(), 4);
    assert!(v["c_loc"].as_f64().unwrap().is_finite());

    let out = wflat(
        tmp.path(),
        &["knothe", "--res", "8", "--hmax", "0.2", "--seed", "5"],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let v = stdout_json(&out);
    assert!(v["marginal_error"].as_f64().unwrap() < 1e-9);
    assert!(v["max_displacement"].as_f64().unwrap() >= 0.0);
    assert!(v["hsup"].as_f64().unwrap() <= 0.2 + 1e-12);
}
