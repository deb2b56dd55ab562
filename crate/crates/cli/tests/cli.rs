use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hjb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hjb"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn systems_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/systems"))
}

#[test]
fn synthesize_van_der_pol() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("vdp.json");
    let path = systems_dir().join("van_der_pol.toml");
    let o = hjb(&[
        "synthesize",
        "--system",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("u = -x2\n"), "{}", stdout(&o));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(json["u"], "-x2");
    assert_eq!(json["case"], "CaseII");
}

#[test]
fn wrong_structure_for_the_requested_case() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("coupled.toml");
    fs::write(
        &file,
        "order = 2\nf1 = \"x2\"\nf2 = \"-x1 + x2\"\nb = 1\nr = 1\n[cost]\ng = \"x1\"\nQ2 = \"x2^2\"\n",
    )
    .unwrap();
    let o = hjb(&["synthesize", "--system", file.to_str().unwrap(), "--case", "I"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("f2 not free of x1"), "{}", stderr(&o));
}

#[test]
fn parse_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.toml");
    fs::write(&file, "order = 2\nf1 = \"x2 +\"\nf2 = \"0\"\nb = 1\nr = 1\n").unwrap();
    let o = hjb(&["synthesize", "--system", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(64));
    assert!(stderr(&o).contains("f1"), "{}", stderr(&o));
    assert_eq!(hjb(&["verify"]).status.code(), Some(64));
    let o = hjb(&["verify", "--example", "van_der_pol", "--domain", "x1=2:-2,x2=-1:1"]);
    assert_eq!(o.status.code(), Some(64));
    assert_eq!(hjb(&["synthesize", "--example", "no_such"]).status.code(), Some(64));
}

#[test]
fn automatic_case_selection() {
    let o = hjb(&["synthesize", "--example", "unicycle"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("case: CaseIII\n"), "{}", stdout(&o));
}

#[test]
fn verify_exit_codes() {
    let o = hjb(&["verify", "--example", "van_der_pol"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).ends_with("overall: pass\n"));
    let o = hjb(&["verify", "--example", "double_integrator"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = hjb(&["verify", "--example", "unicycle"]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("radially_unbounded")).unwrap();
    assert!(line.contains("FAIL"), "{line}");
}

#[test]
fn verify_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = hjb(&["verify", "--example", "mass_spring", "--seed", "7", "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&a).unwrap()).unwrap();
    assert_eq!(json["seed"], 7);
    assert_eq!(json["overall"], "pass");
}

#[test]
fn simulate_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ms.csv");
    let svg = dir.path().join("ms.svg");
    let o = hjb(&[
        "simulate",
        "--example",
        "mass_spring",
        "--x0",
        "1,0",
        "--tmax",
        "20",
        "--stride",
        "100",
        "--out",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x1,x2,u,L,cumcost"));
    let last: Vec<f64> = text
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    assert!(last[1].abs() < 0.5 && last[2].abs() < 0.1, "{last:?}");
    assert!(fs::read_to_string(&svg).unwrap().contains("<polyline"));
}

#[test]
fn simulate_several_unicycle_runs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("uni.csv");
    let svg = dir.path().join("uni.svg");
    let o = hjb(&[
        "simulate",
        "--example",
        "unicycle",
        "--x0",
        "0,9.42477796076938",
        "--x0",
        "-2,1",
        "--out",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("uni_0.csv").exists());
    assert!(dir.path().join("uni_1.csv").exists());
    let plot = fs::read_to_string(&svg).unwrap();
    assert_eq!(plot.matches("<polyline").count(), 2);
    assert!(plot.contains("#d62728"), "minimizer marks are drawn");
}

#[test]
fn simulate_rejects_wrong_dimension() {
    let o = hjb(&["simulate", "--example", "mass_spring", "--x0", "1,0,0"]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn simulate_reports_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("unstable.toml");
    fs::write(
        &file,
        "order = 2\nf1 = \"x2\"\nf2 = \"0\"\nb = -1\nr = 1\n[cost]\nq1 = 1\nq2 = 1\n",
    )
    .unwrap();
    let o = hjb(&["simulate", "--system", file.to_str().unwrap(), "--x0", "1,0"]);
    assert_eq!(o.status.code(), Some(4), "{}{}", stdout(&o), stderr(&o));
    assert!(stderr(&o).contains("diverged"), "{}", stderr(&o));
}

#[test]
fn examples_list() {
    let o = hjb(&["examples", "list"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 10);
    assert!(text.lines().all(|l| l.split_whitespace().count() > 1));
}

#[test]
fn examples_run_all() {
    let o = hjb(&["examples", "run-all"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).ends_with("10/10 match\n"));
}

#[test]
fn tampered_registry_shows_a_diff() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["van_der_pol.toml", "mass_spring.toml"] {
        fs::copy(systems_dir().join(name), dir.path().join(name)).unwrap();
    }
    let vdp = dir.path().join("van_der_pol.toml");
    let text = fs::read_to_string(&vdp).unwrap().replace("V = \"x1^2 + x2^2\"", "V = \"x1^2 + 2*x2^2\"");
    fs::write(&vdp, text).unwrap();
    let o = hjb(&["examples", "run-all", "--registry", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("V: MISMATCH"), "{out}");
    assert!(out.contains("- expected: x1^2 + 2*x2^2"), "{out}");
    assert!(out.contains("+ actual:   x1^2 + x2^2"), "{out}");
    assert!(out.ends_with("1/2 match\n"), "{out}");
}
