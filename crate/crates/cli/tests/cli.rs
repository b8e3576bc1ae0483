use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn gbeam(dir: &Path, config: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_gbeam"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    (o, out)
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn error_report(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("stderr is not JSON: {}", String::from_utf8_lossy(&o.stderr)))
}

/// Leaves nothing but the config file behind.
fn assert_clean(dir: &Path) {
    let names: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec!["run.cfg"], "leftover artifacts: {names:?}");
}

#[test]
fn malformed_config_fails_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = gbeam(dir.path(), "command = qoi\nrun.eps = [1/40,\n", &[]);
    assert_eq!(o.status.code(), Some(2));
    let r = error_report(&o);
    assert_eq!(r["error"], "ConfigParseError");
    assert_eq!(r["line"], 2);
    assert_clean(dir.path());
}

#[test]
fn unknown_key_and_bad_value_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = gbeam(dir.path(), "command = qoi\nqoi.knd = space\n", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_report(&o)["field"], "qoi.knd");

    let (o, _) = gbeam(dir.path(), "command = qoi\n", &["--override", "run.eps=[0]"]);
    let r = error_report(&o);
    assert_eq!(r["field"], "run.eps");
    assert!(r.get("line").is_none());
    assert_clean(dir.path());
}

#[test]
fn unknown_figure_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = gbeam(dir.path(), "command = reproduce-figure\nfigure = fig7\n", &[]);
    assert!(!o.status.success());
    assert!(error_report(&o)["message"].as_str().unwrap().contains("unknown figure"));
    assert_clean(dir.path());
}

#[test]
fn engine_errors_leave_no_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    // The second point lies outside the parameter range; the first CSV must not survive.
    let (o, _) = gbeam(dir.path(), "command = snapshot\nscenario.y = [1.75, 3.5]\nsnapshot.t = 0.5\nrun.eps = 1/40\n", &[]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_report(&o)["error"], "EngineError");
    assert_clean(dir.path());
}

#[test]
fn validate_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = gbeam(dir.path(), "command = validate\nscenario.name = preset_2d\nvalidate.samples = 20\n", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("validation.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(manifest(&out)["scenario"], "preset_2d(abs)");
}

#[test]
fn qoi_is_deterministic_and_hashed() {
    let cfg = "command = qoi\nscenario.phase = linear\nscenario.y = [1.6, 1.9]\nrun.eps = [1/40, 1/80]\nqoi.t = 1\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (oa, out_a) = gbeam(a.path(), cfg, &["--workers", "1"]);
    let (ob, out_b) = gbeam(b.path(), cfg, &["--workers", "2"]);
    assert!(oa.status.success() && ob.status.success(), "{}", String::from_utf8_lossy(&oa.stderr));
    let csv_a = fs::read(out_a.join("qoi.csv")).unwrap();
    assert_eq!(csv_a, fs::read(out_b.join("qoi.csv")).unwrap());

    let text = String::from_utf8(csv_a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "scenario,kind,p,alpha_abs,epsilon,y1,t,value,err_est");
    assert_eq!(lines.len(), 5);
    for l in &lines[1..] {
        let v: f64 = l.split(',').nth(7).unwrap().parse().unwrap();
        assert!(v > 0.0 && v.is_finite());
    }

    let m = manifest(&out_a);
    let hash = m["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert_eq!(m, manifest(&out_b));
    let files = m["files"].as_array().unwrap();
    assert!(files.iter().any(|f| f["path"] == "qoi.csv" && f["config_hash"] == hash));

    // Overrides change the hash.
    let c = tempfile::tempdir().unwrap();
    let (oc, out_c) = gbeam(c.path(), cfg, &["--override", "qoi.t = 1.5"]);
    assert!(oc.status.success());
    assert_ne!(manifest(&out_c)["config_hash"], m["config_hash"]);
}

#[test]
fn snapshot_emits_one_csv_per_parameter_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "command = snapshot\nscenario.name = preset_2d\nscenario.phase = abs\nrun.eps = 1/30\n\
               scenario.r = [0, 0.5, 1]\nsnapshot.t = 1\nsnapshot.h = 0.1\n";
    let (o, out) = gbeam(dir.path(), cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    let csvs: Vec<&str> = m["files"].as_array().unwrap().iter().filter_map(|f| f["path"].as_str()).filter(|p| p.ends_with(".csv")).collect();
    assert_eq!(csvs.len(), 3);
    let text = fs::read_to_string(out.join(csvs[0])).unwrap();
    assert!(text.starts_with("x1,x2,re,im,abs\n"));
    let peak = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(peak > 0.3, "peak |u| = {peak}");
}

#[test]
fn fit_reports_scaling_per_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "command = fit\nscenario.phase = quadratic\nsweep.lo = [1.6]\nsweep.hi = [1.7]\nsweep.points = 5\n\
               sweep.sigma = [0, 1]\nsweep.h_y = 1e-3\n";
    let (o, out) = gbeam(dir.path(), cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fits: Value = serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    let fits = fits.as_array().unwrap();
    assert_eq!(fits.len(), 2);
    assert_eq!(fits[0]["class"], "bounded");
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("epsilon,c1,y1,sigma,value\n"));
    // 5 values and 3 interior first derivatives (the end stencils leave the range) per epsilon.
    assert_eq!(sweep.lines().count(), 1 + 3 * 8);
}

#[test]
fn figure_one_bundle_has_three_panels() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = gbeam(dir.path(), "command = reproduce-figure\nfigure = fig1\n", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    let layout = &m["layout"];
    assert_eq!(layout["figure"], "fig1");
    assert_eq!((layout["rows"].as_u64(), layout["cols"].as_u64()), (Some(1), Some(3)));
    let hash = m["config_hash"].as_str().unwrap();
    for p in layout["panels"].as_array().unwrap() {
        let csv = p["csv"].as_str().unwrap();
        assert!(out.join(csv).exists());
        assert!(m["files"].as_array().unwrap().iter().any(|f| f["path"] == csv && f["config_hash"] == hash));
    }
}

#[test]
fn rerun_into_existing_directory_replaces_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "command = qoi\nrun.eps = 1/40\nscenario.y = 1.75\n";
    let (o1, out) = gbeam(dir.path(), cfg, &[]);
    let (o2, _) = gbeam(dir.path(), cfg, &[]);
    assert!(o1.status.success() && o2.status.success());
    let mut names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, vec!["manifest.json", "qoi.csv"]);
    let mut top: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    top.sort();
    assert_eq!(top, vec!["out", "run.cfg"]);
}
