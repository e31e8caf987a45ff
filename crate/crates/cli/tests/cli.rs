use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_smoothsec"));
    c.env_remove("SMOOTHSEC_OUT_DIR");
    c
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"))
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_scenario(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("s.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn passing_run_exits_zero_and_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = run(&scenario("interval_kink"), &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.json", "timings.json", "sigma.csv", "tau.csv", "homotopy.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let r = report(&out);
    assert_eq!(r["status"], "passed");
    assert_eq!(r["cover"]["K"], 1);
    assert_eq!(r["settings"]["grid_space"], 129);
    let tau = std::fs::read_to_string(out.join("tau.csv")).unwrap();
    assert_eq!(tau.lines().next(), Some("chart_id,x0,v0"));
    assert_eq!(tau.lines().count(), 130);
    let hom = std::fs::read_to_string(out.join("homotopy.csv")).unwrap();
    assert_eq!(hom.lines().next(), Some("t,chart_id,x0,v0"));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&run(&scenario("mobius_kink"), &a, &[])), 0);
    assert_eq!(code(&run(&scenario("mobius_kink"), &b, &[])), 0);
    for f in ["report.json", "sigma.csv", "tau.csv", "homotopy.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn failing_certificate_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    // without the h0 override the radius falls below the certificate step
    let text = std::fs::read_to_string(scenario("interval_double_kink")).unwrap();
    let cut = text.find("[radius_schedule]").unwrap();
    let cfg = write_scenario(tmp.path(), &text[..cut]);
    let out = tmp.path().join("o");
    assert_eq!(code(&run(&cfg, &out, &[])), 1);
    let r = report(&out);
    assert_eq!(r["status"], "failed");
    let smooth = r["certificates"].as_array().unwrap().iter().find(|c| c["name"] == "smoothness").unwrap();
    assert_eq!(smooth["passed"], false);
}

#[test]
fn pipeline_error_exits_one_with_the_message_in_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("interval_kink")).unwrap().replace("width = 0.05", "width = 1e-15");
    let cfg = write_scenario(tmp.path(), &text);
    let out = tmp.path().join("o");
    assert_eq!(code(&run(&cfg, &out, &[])), 1);
    let r = report(&out);
    assert_eq!(r["status"], "error");
    assert!(r["error"].as_str().unwrap().contains("tube"), "{}", r["error"]);
}

#[test]
fn malformed_scenarios_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(scenario("interval_kink")).unwrap();
    let cases = [
        base.replace("schema_version = 1", "schema_version = 9"),
        base.replace("task = \"smooth_section\"", "task = \"paint\""),
        base.replace("hi = [0.75]", "hi = [0.75, 0.2]"),
        base.replace("lo = [0.25]", "lo = [0.8]"),
        base.replace("[grid]", "[grid]\nspacing = 3"),
        "not toml at all [".to_string(),
    ];
    for text in cases {
        let cfg = write_scenario(tmp.path(), &text);
        let out = tmp.path().join("never");
        let o = run(&cfg, &out, &[]);
        assert_eq!(code(&o), 2, "{text}\n{}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists());
    }
    assert_eq!(code(&run(&tmp.path().join("missing.toml"), &tmp.path().join("x"), &[])), 2);
}

#[test]
fn grid_override_replaces_the_resolutions() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    assert_eq!(code(&run(&scenario("interval_smooth"), &out, &["--grid-override", "65,9"])), 0);
    let r = report(&out);
    assert_eq!(r["settings"]["grid_space"], 65);
    assert_eq!(r["settings"]["grid_time"], 9);
    assert_eq!(std::fs::read_to_string(out.join("sigma.csv")).unwrap().lines().count(), 66);
    let o = run(&scenario("interval_smooth"), &tmp.path().join("p"), &["--grid-override", "65,x"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin().arg("run").arg(scenario("interval_smooth")).env("SMOOTHSEC_OUT_DIR", tmp.path()).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("interval_smooth").join("report.json").is_file());
}

#[test]
fn list_catalog_names_every_entry() {
    let o = bin().arg("list-catalog").output().unwrap();
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for id in [
        "interval", "square", "circle", "torus", "cylinder", "trivial_line", "mobius_line", "circle_fibre", "abs_kink",
        "double_kink", "mobius_kink", "kinked_map", "winding", "ramp", "straight", "kinked",
    ] {
        assert!(text.contains(id), "{id}");
    }
}
