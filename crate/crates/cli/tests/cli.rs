use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name)
}

fn netred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netred")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn check_toggle_lists_both_stable_states() {
    let o = netred(&["check", data("toggle.model").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.matches("(stable)").count(), 2, "{out}");
    assert!(out.contains("orthant signature (+,-,+,-)"), "{out}");
    assert!(out.contains("p1=1.557300e-1"), "{out}");
}

#[test]
fn check_decay_is_trivially_monotone() {
    let o = netred(&["check", data("decay.model").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("x=0.000000e0"), "{out}");
    assert!(out.contains("monotone: yes"));
}

#[test]
fn check_prints_odd_cycle_witness() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(
        dir.path(),
        "ring.model",
        "species a = 1\nspecies b = 1\nspecies c = 1\n\
         ode a = -a + 1/(1 + c)\node b = -b + 1/(1 + a)\node c = -c + 1/(1 + b)\n",
    );
    let o = netred(&["check", &model]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("monotone: no"), "{out}");
    assert!(out.contains("odd negative cycle"), "{out}");
}

#[test]
fn parse_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "bad.model", "species x = 1\node x = -x +\n");
    let o = netred(&["check", &model]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    let o = netred(&["check", "/nonexistent/model"]);
    assert_eq!(o.status.code(), Some(1));
    let o = netred(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    let cfg = write(dir.path(), "bad.cfg", &format!("model {}\nregion r = p1 zz : 1\n", data("toggle.model").display()));
    let o = netred(&["reduce", "-c", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("zz"));
}

#[test]
fn reduce_writes_verifiable_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("toggle.json");
    let o = netred(&["reduce", "-c", data("toggle.cfg").to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("region gene2"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let variants = json["variants"].as_array().unwrap();
    assert_eq!(variants.len(), 3);
    let c = &variants[1];
    assert_eq!(c["variant"], "c");
    assert_eq!(c["reduced_metzler"], true);
    assert_eq!(c["reduced_hurwitz"], true);
    let sigma = c["regions"][0]["sigma"].as_array().unwrap();
    let bound = c["error_bound"].as_f64().unwrap();
    assert!((bound - 2.0 * sigma[1].as_f64().unwrap()).abs() < 1e-12);
    let o = netred(&["verify", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("PASS").count(), 3);
}

#[test]
fn single_species_region_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "one.cfg", &format!("model {}\nregion r = m1 : 1\n", data("toggle.model").display()));
    let o = netred(&["reduce", "-c", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let v = &json["variants"][0];
    assert_eq!(v["regions"][0]["sigma"].as_array().unwrap().len(), 1);
    assert_eq!(v["a_t"].as_array().unwrap().len(), 4);
    assert_eq!(v["error_bound"], 0.0);
    assert_eq!(v["hinf_error"], 0.0);
}

#[test]
fn reduction_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "drift.model", "species x = 1\nspecies y = 1\node x = 1\node y = -y\n");
    let cfg = write(dir.path(), "drift.cfg", "model drift.model\nregion r = x y : 1\n");
    let o = netred(&["reduce", "-c", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("steady state"), "{}", stderr(&o));
}

#[test]
fn simulate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let o = netred(&[
        "simulate",
        "-c",
        data("toggle.cfg").to_str().unwrap(),
        "--method",
        "reduction",
        "--variant",
        "c",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,p1,p2,m1,m2,y1,y2");
    assert_eq!(lines.len(), 2002);
    assert!(lines[1].starts_with("0.0000000000000000e0,"));
    let last: Vec<f64> = lines[2001].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], 50.0);
}

#[test]
fn simulation_failures_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "blowup.model", "species x = 1\node x = x^2\n");
    let cfg = write(dir.path(), "blowup.cfg", "model blowup.model\nhorizon 5\n");
    let out = dir.path().join("x.csv");
    let o = netred(&["simulate", "-c", &cfg, "--method", "full", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("full"));
}

#[test]
fn compare_reproduces_ordering_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table.csv");
    let traces = dir.path().join("traces");
    let o = netred(&[
        "compare",
        "-c",
        data("toggle.cfg").to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--traces",
        traces.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("method,L1,L2,Linf,seconds"));
    let l2 = |label: &str| -> f64 {
        let row = csv.lines().find(|l| l.starts_with(&format!("{label},"))).unwrap();
        row.split(',').nth(2).unwrap().parse().unwrap()
    };
    assert!(l2("reduction:c") < l2("reduction:d"));
    assert!(l2("reduction:d") < l2("reduction:b"));
    assert!(l2("qssa") < 2.0 * l2("reduction:b"));
    assert!(l2("reduction:c") < l2("truncation:c"));
    let trace = std::fs::read_to_string(traces.join("reduction_c.csv")).unwrap();
    assert!(trace.starts_with("t,e1,e2\n"));
    assert_eq!(trace.lines().count(), 2002);
}

#[test]
fn compare_full_only_has_timing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table.csv");
    let o = netred(&[
        "compare",
        "-c",
        data("toggle.cfg").to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--methods",
        "full",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("full,,,,"));
}

#[test]
fn compare_reports_error_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "noqssa.cfg",
        &format!("model {}\nmethods full qssa reduction\nregion r = p2 m2 : 1\n", data("toggle.model").display()),
    );
    let out = dir.path().join("table.csv");
    let o = netred(&["compare", "-c", &cfg, "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.contains("qssa,ERROR,ERROR,ERROR,"), "{csv}");
    assert!(csv.lines().any(|l| l.starts_with("reduction:default,") && !l.contains("ERROR")));
}

#[test]
fn selftest_runs_seeded_suites() {
    let o = netred(&["selftest", "--seed", "3", "--cases", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("PASS").count(), 6);
}

#[test]
fn runs_are_reproducible() {
    let cfg = data("toggle.cfg");
    let a = netred(&["reduce", "-c", cfg.to_str().unwrap()]);
    let b = netred(&["reduce", "-c", cfg.to_str().unwrap()]);
    assert_eq!(a.stdout, b.stdout);
}
