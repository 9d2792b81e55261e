use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repso() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_repso"));
    c.env_remove("REPSO_OUTPUT_DIR");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_twice_gives_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    let mut traces = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("trace{k}.csv"));
        let o = repso().args(["run", "--config"]).arg(config("sphere.json")).arg("--trace").arg(&out).output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        traces.push(fs::read(&out).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
    assert!(traces[0].starts_with(b"iteration,best_objective,diversity\n"));

    let other = dir.path().join("other.csv");
    let o = repso().args(["run", "--seed", "43", "--config"]).arg(config("sphere.json")).arg("--trace").arg(&other).output().unwrap();
    assert!(o.status.success());
    assert_ne!(fs::read(&other).unwrap(), traces[0]);
}

#[test]
fn classical_config_stops_on_search_length() {
    let dir = tempfile::tempdir().unwrap();
    let o = repso().arg("--output-dir").arg(dir.path()).args(["run", "--config"]).arg(config("cpso_equiv.json")).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("termination: SearchLength"), "{text}");
    assert!(text.contains("iterations: 100"), "{text}");
    let trace = fs::read_to_string(dir.path().join("cpso_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 102);
}

#[test]
fn t_max_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = repso()
        .arg("--output-dir")
        .arg(dir.path())
        .args(["run", "--t-max", "7", "--config"])
        .arg(config("cpso_equiv.json"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("iterations: 7"));
}

#[test]
fn missing_problem_name_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"problem": {"dimension": 3}, "swarm": {"size": 5}, "termination": {"t_max": 10}}"#).unwrap();
    let o = repso().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("problem"), "{}", stderr(&o));
    assert!(stderr(&o).contains("name"), "{}", stderr(&o));
}

#[test]
fn unknown_problem_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"problem": {"name": "nope", "dimension": 3}, "swarm": {"size": 5}, "termination": {"t_max": 10}}"#).unwrap();
    let o = repso().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("problem.name"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_fails() {
    let o = repso().args(["run", "--config", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn analyze_default_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.csv");
    let o = repso().args(["analyze", "--omega", "-1:2", "--phi", "0:5", "--res", "300", "--out"]).arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("cells: 90000"), "{text}");
    assert!(text.contains("triangle_vertices"), "{text}");
    let csv = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 90001);
    assert_eq!(lines[0], "omega,phi,rate,kind,convergent");
    let mut min_rate = f64::INFINITY;
    for row in &lines[1..] {
        let f: Vec<&str> = row.split(',').collect();
        let omega: f64 = f[0].parse().unwrap();
        let rate: f64 = f[2].parse().unwrap();
        min_rate = min_rate.min(rate);
        if omega >= 1.0 {
            assert_eq!(f[4], "false", "{row}");
        }
        // Cells on an edge are decided by the exact triangle test, not by
        // the rounded magnitude.
        if (rate - 1.0).abs() > 1e-12 {
            assert_eq!(f[4] == "true", rate < 1.0, "{row}");
        }
    }
    // The exact point (0, 1) is off this grid; the nearest cells are still fast.
    assert!(min_rate < 0.06, "{min_rate}");

    // Row nearest (0, 1) against the roots of r² − (1 + ω − φ) r + ω at its
    // exact coordinates.
    let nearest = lines[1..]
        .iter()
        .map(|row| row.split(',').map(str::to_owned).collect::<Vec<_>>())
        .min_by(|a, b| {
            let d = |r: &Vec<String>| {
                let (w, f): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
                w * w + (f - 1.0) * (f - 1.0)
            };
            d(a).total_cmp(&d(b))
        })
        .unwrap();
    let (omega, phi, rate): (f64, f64, f64) = (nearest[0].parse().unwrap(), nearest[1].parse().unwrap(), nearest[2].parse().unwrap());
    let sum = 1.0 + omega - phi;
    let disc = sum * sum - 4.0 * omega;
    let expected = if disc < 0.0 { omega.sqrt() } else { (sum.abs() + disc.sqrt()) / 2.0 };
    assert!((omega - 1.0 / 299.0).abs() < 1e-12 && (phi - 1.0 - 1.0 / 299.0).abs() < 1e-12, "{nearest:?}");
    assert!((rate - expected).abs() < 1e-12, "{rate} vs {expected}");
}

#[test]
fn analyze_rejects_bad_ranges() {
    let o = repso().args(["analyze", "--omega", "2:1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = repso().args(["analyze", "--res", "1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn init_preview_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("init.csv");
    let o = repso().args(["init-preview", "--config"]).arg(config("constrained.json")).arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "particle,x1_0,x1_1,x1_2,x1_3,x0_0,x0_1,x0_2,x0_3,xm_0,xm_1,xm_2,xm_3");
    assert_eq!(lines.len(), 13);
    for row in &lines[1..] {
        let v: Vec<f64> = row.split(',').skip(1).map(|t| t.parse().unwrap()).collect();
        assert_eq!(v.len(), 12);
        assert!(v.iter().all(|x| (-100.0..=100.0).contains(x)));
    }
}

#[test]
fn init_preview_simultaneous_lhs_is_stratified() {
    // 5 particles × 3 samples from one 15-stratum design.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    fs::write(
        &path,
        r#"{
          "problem": {"name": "sphere", "dimension": 3},
          "swarm": {"size": 5, "seed": 11},
          "init": {"method": "latin_hypercube", "condition": "two_positions_one_memory", "relation": {"kind": "simultaneous"}},
          "termination": {"t_max": 10}
        }"#,
    )
    .unwrap();
    let out = dir.path().join("init.csv");
    let o = repso().args(["init-preview", "--config"]).arg(&path).arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<f64>> = csv.lines().skip(1).map(|r| r.split(',').skip(1).map(|t| t.parse().unwrap()).collect()).collect();
    for j in 0..3 {
        let mut hits = [0u32; 15];
        for r in &rows {
            for s in 0..3 {
                let t = (r[s * 3 + j] + 100.0) / 200.0;
                hits[((t * 15.0) as usize).min(14)] += 1;
            }
        }
        assert!(hits.iter().all(|&h| h == 1), "dimension {j}: {hits:?}");
    }
}

#[test]
fn list_problems_names_the_builtins() {
    let o = repso().args(["list-problems", "--dimension", "3"]).output().unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["sphere", "rastrigin", "rosenbrock", "constrained_sphere"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{text}");
    }
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = repso()
        .env("REPSO_OUTPUT_DIR", dir.path())
        .args(["run", "--t-max", "5", "--config"])
        .arg(config("constrained.json"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let files: Vec<String> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert!(files.iter().any(|f| f.ends_with(".csv")), "{files:?}");
    assert!(files.len() >= 2, "trace and dump expected: {files:?}");
}

#[test]
fn init_preview_stagnation_roles_coincide() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    fs::write(
        &path,
        r#"{"problem": {"name": "rastrigin", "dimension": 2}, "swarm": {"size": 5, "seed": 3}, "termination": {"t_max": 10}}"#,
    )
    .unwrap();
    let out = dir.path().join("init.csv");
    let o = repso().args(["init-preview", "--config"]).arg(&path).arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|r| r.split(',').collect()).collect();
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert_eq!(r[1..3], r[3..5]);
        assert_eq!(r[1..3], r[5..7]);
    }
}
