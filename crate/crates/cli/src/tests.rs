use std::fs;
use std::path::Path;

use clap::Parser;

use crate::{run, Cli};

/// Runs one command line in-process; errors become `(exit status, message)`.
fn qwsearch(args: &[&str]) -> Result<(), (i32, String)> {
    let cli = Cli::try_parse_from(std::iter::once("qwsearch").chain(args.iter().copied()))
        .map_err(|e| (e.exit_code(), e.to_string()))?;
    run(cli.command).map(|_| ()).map_err(|e| (e.exit_code(), e.to_string()))
}

fn code(result: Result<(), (i32, String)>) -> Option<i32> {
    result.err().map(|(c, _)| c)
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{}: {e}", dir.join(name).display()))
}

#[test]
fn gap_scan_writes_curve_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("gs");
    qwsearch(&[
        "gap-scan", "--model", "cavity", "--jc", "10", "--n", "256", "--target", "20",
        "--out", out.to_str().unwrap(),
    ])
    .unwrap();
    let csv = read(&out, "gap_curve.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("eta,gap,E0,E1,ov_s0,ov_s1,ov_w0,ov_w1"));
    let best = lines
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[0], f[1])
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    // the coarse grid is 7% wide per step around 2540
    assert!((best.0 / 2540.0 - 1.0).abs() < 0.05, "{best:?}");

    let manifest: serde_json::Value = serde_json::from_str(&read(&out, "manifest.json")).unwrap();
    for key in ["version", "command", "params", "seed", "outputs"] {
        assert!(manifest.get(key).is_some(), "{key}");
    }
    assert_eq!(manifest["command"], "gap-scan");
    assert_eq!(manifest["outputs"][0], "gap_curve.csv");
}

#[test]
fn usage_errors_write_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bad");
    let o_str = out.to_str().unwrap();
    for args in [
        vec!["gap-scan", "--model", "cavity", "--n", "64", "--eta-grid", "1:10:0:log", "--out", o_str],
        vec!["gap-scan", "--model", "cavity", "--n", "64", "--kappa", "0.1", "--out", o_str],
        vec!["gap-scan", "--model", "power-law", "--n", "64", "--out", o_str],
        vec!["gap-scan", "--model", "cavity", "--n", "64", "--target", "65", "--out", o_str],
        vec!["search", "--model", "cavity", "--n", "64:128:3:log", "--out", o_str],
        vec!["sweep", "--model", "cavity", "--paper-defaults", "--target", "20", "--out", o_str],
        vec!["noise", "--model", "free-space", "--n", "32", "--dephasing", "-1", "--out", o_str],
    ] {
        assert_eq!(code(qwsearch(&args)), Some(2), "{args:?}");
    }
    assert!(!out.exists());
}

#[test]
fn capacity_guard_exit_status() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cap");
    let (status, message) = qwsearch(&[
        "noise", "--model", "cavity", "--n", "300", "--method", "lindblad", "--out", out.to_str().unwrap(),
    ])
    .unwrap_err();
    assert_eq!(status, 3);
    assert!(message.contains("master equation"), "{message}");
    let o = qwsearch(&["cross-validate", "--model", "cavity", "--n", "65", "--out", out.to_str().unwrap()]);
    assert_eq!(code(o), Some(3));
    assert!(!out.exists());
}

#[test]
fn reruns_and_replays_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    let run = |dir: &Path| {
        qwsearch(&[
            "noise", "--model", "free-space", "--n", "24", "--target", "8", "--dephasing", "1",
            "--trajectories", "16", "--seed", "7", "--out", dir.to_str().unwrap(),
        ])
    };
    run(&a).unwrap();
    run(&b).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&read(&a, "manifest.json")).unwrap();
    let mut names: Vec<String> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert!(names.contains(&"noise.csv".to_string()));
    for name in &names {
        assert_eq!(read(&a, name), read(&b, name), "{name}");
    }

    names.push("manifest.json".into());
    let first: Vec<String> = names.iter().map(|n| read(&a, n)).collect();
    run(&a).unwrap();
    assert!(qwsearch(&["replay", c.join("manifest.json").to_str().unwrap()]).is_err());
    qwsearch(&["replay", a.join("manifest.json").to_str().unwrap()]).unwrap();
    for (name, before) in names.iter().zip(&first) {
        assert_eq!(&read(&a, name), before, "{name}");
    }
    qwsearch(&["replay", a.join("manifest.json").to_str().unwrap(), "--out", c.to_str().unwrap()]).unwrap();
    for name in &names[..names.len() - 1] {
        assert_eq!(read(&a, name), read(&c, name), "{name}");
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let one = tmp.path().join("one");
    let many = tmp.path().join("many");
    for (dir, w) in [(&one, "1"), (&many, "3")] {
        qwsearch(&[
            "cross-validate", "--model", "waveguide-gap", "--kappa", "0.001", "--n", "20", "--target", "8",
            "--dephasing", "1", "--trajectories", "40", "--workers", w, "--out", dir.to_str().unwrap(),
        ])
        .unwrap();
    }
    for name in ["comparison.json", "me_trace.csv", "eff_trace.csv"] {
        assert_eq!(read(&one, name), read(&many, name), "{name}");
    }
}

#[test]
fn search_and_sweep_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let s = tmp.path().join("s");
    qwsearch(&["search", "--model", "cavity", "--paper-defaults", "--n", "64", "--out", s.to_str().unwrap()]).unwrap();
    let res: serde_json::Value = serde_json::from_str(&read(&s, "search_result.json")).unwrap();
    let obj = res.as_object().unwrap();
    assert_eq!(obj.len(), 4);
    let (t, eta, eta_t) = (obj["t_opt"].as_f64().unwrap(), obj["eta"].as_f64().unwrap(), obj["eta_t"].as_f64().unwrap());
    assert!((eta * t - eta_t).abs() <= 1e-12 * eta_t);
    assert!(read(&s, "fidelity_trace.csv").starts_with("t,fidelity\n"));

    let w = tmp.path().join("w");
    qwsearch(&["sweep", "--model", "cavity", "--n", "40:80:3:lin", "--fit", "--out", w.to_str().unwrap()]).unwrap();
    let csv = read(&w, "scaling.csv");
    assert!(csv.starts_with("n,eta_opt,gap_min,t_gap,t_opt,f_max,eta_t\n"));
    assert_eq!(csv.lines().count(), 4);
    let fit: serde_json::Value = serde_json::from_str(&read(&w, "fit.json")).unwrap();
    let keys: Vec<&String> = fit.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["a", "b", "r2"]);
}
