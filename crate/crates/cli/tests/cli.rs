use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

const STEP: &str = "domain = \"interval(0,1)\"\nlambda = 0.1\ndatum = \"step(0.5)\"\n";

fn lingrowth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lingrowth"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(dir: &Path, command: &str, config: &Path, out: &str) -> (Output, PathBuf) {
    let out = dir.join(out);
    let o = lingrowth(&[
        command,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    (o, out)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Rows of a CSV without quoted commas, keyed by header.
fn table(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| {
            header
                .iter()
                .map(|h| h.to_string())
                .zip(l.split(',').map(str::to_string))
                .collect()
        })
        .collect()
}

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

#[test]
fn solve_reproduces_the_step_plateaus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "step.toml", STEP);
    let (o, out) = run(dir.path(), "solve", &cfg, "run");
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = table(&out.join("solution.csv"));
    assert_eq!(rows.len(), 256);
    assert!((num(&rows[0], "value") - 0.2).abs() < 1e-3);
    assert!((num(&rows[255], "value") - 0.8).abs() < 1e-3);
    let jumps = table(&out.join("jumps.csv"));
    assert_eq!(jumps.len(), 1);
    assert!((num(&jumps[0], "location") - 0.5).abs() < 1.0 / 256.0);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "solve");
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert!(artifacts.iter().any(|a| a["file"] == "report.json"));
    for a in artifacts {
        let bytes = fs::read(out.join(a["file"].as_str().unwrap())).unwrap();
        let digest: String = Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        assert_eq!(a["sha256"].as_str().unwrap(), digest);
        assert_eq!(a["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
}

#[test]
fn csv_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "bump.toml",
        "domain = \"square\"\ncells = 24\nlambda = 0.05\ndatum = \"bump\"\n",
    );
    let (a, out_a) = run(dir.path(), "solve", &cfg, "a");
    let (b, out_b) = run(dir.path(), "solve", &cfg, "b");
    assert!(a.status.success() && b.status.success());
    for file in ["solution.csv", "stages.csv"] {
        assert_eq!(
            fs::read(out_a.join(file)).unwrap(),
            fs::read(out_b.join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn nonconvex_verify_is_refused_without_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "l.toml",
        "domain = \"l_shape\"\ncells = 16\nlambda = 0.1\ndatum = \"bump\"\n",
    );
    let (o, _) = run(dir.path(), "verify", &cfg, "refused");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("domain not convex"), "{}", stderr(&o));

    let out = dir.path().join("demo");
    let o = lingrowth(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--allow-nonconvex-demo",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("reports.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.ends_with(",true")));
}

#[test]
fn sweep_follows_the_two_level_formula() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{STEP}cells = 128\n[sweep]\nlambdas = [0.05, 0.15, 0.3]\n");
    let cfg = config(dir.path(), "sweep.toml", &text);
    let (o, out) = run(dir.path(), "sweep", &cfg, "sweep");
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = table(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 3);
    let tol = 2.0 / 128.0 + 1e-3;
    for r in &rows {
        let lambda = num(r, "lambda");
        let oracle = (1.0 - 4.0 * lambda).max(0.0);
        assert!((num(r, "jump_height") - oracle).abs() <= tol, "{r:?}");
        assert!((num(r, "expected") - oracle).abs() < 1e-12);
    }
}

#[test]
fn plot_data_total_variation_decays_linearly() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{STEP}cells = 128\n[flow]\nt_final = 0.2\nsteps = 4\n");
    let cfg = config(dir.path(), "flow.toml", &text);
    let (o, out) = run(dir.path(), "flow", &cfg, "flow");
    assert!(o.status.success(), "{}", stderr(&o));
    let o = lingrowth(&["emit-plot-data", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let tv = fs::read_to_string(out.join("tv.dat")).unwrap();
    let points: Vec<(f64, f64)> = tv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let mut it = l.split_whitespace().map(|v| v.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    assert_eq!(points.len(), 5);
    for (t, v) in points {
        assert!(
            (v - (1.0 - 4.0 * t)).abs() <= 2.0 / 128.0 + 1e-3,
            "t={t} tv={v}"
        );
    }
    assert!(fs::read_to_string(out.join("manifest.json"))
        .unwrap()
        .contains("tv.dat"));
}

#[test]
fn non_convergence_keeps_the_best_iterate() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{STEP}[schedule]\neps0 = 1e-9\nfactor = 0.5\nsteps = 1\ntol = 1e-300\n");
    let cfg = config(dir.path(), "strict.toml", &text);
    let (o, out) = run(dir.path(), "solve", &cfg, "strict");
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert_eq!(table(&out.join("best_iterate.csv")).len(), 256);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn missing_artifacts_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = lingrowth(&["emit-plot-data", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing artifact"));
    let gone = dir.path().join("absent");
    let o = lingrowth(&["emit-plot-data", "--out", gone.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_configs_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "bad.toml", &STEP.replace("0.1", "-0.1"));
    let (o, _) = run(dir.path(), "solve", &cfg, "bad");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lambda"), "{}", stderr(&o));
    let cfg = config(dir.path(), "typo.toml", &format!("{STEP}lamda = 1\n"));
    let (o, _) = run(dir.path(), "solve", &cfg, "typo");
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_lingrowth"))
        .args([
            "verify",
            "--suite",
            "trace",
            "--out",
            dir.path().join("t").to_str().unwrap(),
        ])
        .env("LINGROWTH_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn headers_match_the_schema() {
    let schema: toml::Table = toml::from_str(include_str!("../schema.toml")).unwrap();
    let artifacts = schema["artifacts"].as_table().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{STEP}cells = 64\nweights = [\"abs\", \"square\", \"shifted(1)\"]\n[flow]\nt_final = 0.05\nsteps = 2\n[sweep]\nlambdas = [0.1]\n");
    let cfg = config(dir.path(), "all.toml", &text);
    let mut checked = 0;
    for command in ["solve", "flow", "verify", "sweep"] {
        let (o, out) = run(dir.path(), command, &cfg, command);
        assert!(o.status.success(), "{command}: {}", stderr(&o));
        for (file, spec) in artifacts {
            if spec["command"].as_str() != Some(command) || !out.join(file).exists() {
                continue;
            }
            let expected: Vec<String> = spec["columns"]
                .as_array()
                .unwrap()
                .iter()
                .flat_map(|c| match c.as_str().unwrap() {
                    "psi_*" => vec![
                        "psi_abs".into(),
                        "psi_square".into(),
                        "psi_shifted(1)".into(),
                    ],
                    c => vec![c.to_string()],
                })
                .collect();
            let text = fs::read_to_string(out.join(file)).unwrap();
            let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
            assert_eq!(header, expected, "{file}");
            checked += 1;
        }
    }
    assert_eq!(checked, 8);
}
