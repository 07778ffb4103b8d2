use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lindblad_hosc::analytic::force_free_solution;
use lindblad_hosc::cli::{COMPARISON_HEADER, TRAJECTORY_HEADER};
use lindblad_hosc::fock::{build_ladder_ops, DensityMatrix};
use lindblad_hosc::lindblad::{ForceSpec, OscillatorParams};

const BASE: &str = "\
omega = 1
mu = 0.3
nu = 0.1
N = 40
";

fn run_cli(dir: &Path, config: &str, out: &str) -> Output {
    let path = dir.join("run.cfg");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_lindblad-hosc"))
        .arg(&path)
        .arg("--out")
        .arg(dir.join(out))
        .arg("--quiet")
        .output()
        .unwrap()
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn summary_value(dir: &Path, key: &str) -> f64 {
    let text = fs::read_to_string(dir.join("summary.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no `{key}` in summary:\n{text}"))
        .parse()
        .unwrap()
}

#[test]
fn analytic_run_writes_trajectory_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{BASE}mode = analytic\nforce = zero\ninitial = vacuum\nt_max = 10\nn_steps = 200\n");
    let out = run_cli(dir.path(), &cfg, "out");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let traj = dir.path().join("out/trajectory.csv");
    let text = fs::read_to_string(&traj).unwrap();
    assert_eq!(text.lines().next().unwrap(), TRAJECTORY_HEADER);
    let data = rows(&traj);
    assert_eq!(data.len(), 201);
    assert_eq!(data[0][0], 0.0);
    assert_eq!(data[200][0], 10.0);
    assert!(!dir.path().join("out/comparison.csv").exists());
    assert_eq!(summary_value(&dir.path().join("out"), "exit_code"), 0.0);
}

#[test]
fn unforced_analytic_run_follows_force_free_formula() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{BASE}mode = analytic\nforce = zero\ninitial = thermal-coherent(0.6+0.2i, 0.2)\nt_max = 6\nn_steps = 12\n");
    let out = run_cli(dir.path(), &cfg, "out");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let ops = build_ladder_ops(40).unwrap();
    let p = OscillatorParams::new(1.0, 0.3, 0.1, ForceSpec::Zero).unwrap();
    let rho0 = DensityMatrix::thermal_coherent(lindblad_hosc::C64::new(0.6, 0.2), 0.2, &ops).unwrap();
    for row in rows(&dir.path().join("out/trajectory.csv")) {
        let rho = force_free_solution(&rho0, &p, row[0], &ops).unwrap();
        let mean_a = (&ops.lower * rho.matrix()).trace();
        assert!((row[1] - mean_a.re).abs() < 1e-14 && (row[2] - mean_a.im).abs() < 1e-14);
    }
}

#[test]
fn identical_configs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{BASE}mode = analytic\nforce = harmonic\nf0 = 0.2\nOmega = 0.9\ninitial = coherent(0.5)\nt_max = 5\nn_steps = 50\n"
    );
    assert_eq!(run_cli(dir.path(), &cfg, "a").status.code(), Some(0));
    assert_eq!(run_cli(dir.path(), &cfg, "b").status.code(), Some(0));
    for file in ["trajectory.csv", "summary.txt"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
}

#[test]
fn compare_mode_agrees_with_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{BASE}mode = compare\nforce = harmonic\nf0 = 0.2\nOmega = 0.9\ninitial = vacuum\nt_max = 10\nn_steps = 50\n"
    );
    let out = run_cli(dir.path(), &cfg, "out");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let path = dir.path().join("out/comparison.csv");
    assert_eq!(fs::read_to_string(&path).unwrap().lines().next().unwrap(), COMPARISON_HEADER);
    let data = rows(&path);
    assert_eq!(data.len(), 51);
    assert!(data.iter().all(|r| r[1] <= 1e-6));
    assert!(summary_value(&dir.path().join("out"), "max_abs_diff") <= 1e-6);
}

#[test]
fn compare_mode_with_vectorized_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "omega = 1\nmu = 0.3\nnu = 0.1\nN = 12\nmode = compare\noracle = vectorized\nforce = harmonic\nf0 = 0.1\n\
               Omega = 0.9\ninitial = vacuum\nt_max = 1\nn_steps = 10\ntail_tol = 1e-6\n";
    let out = run_cli(dir.path(), cfg, "out");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(summary_value(&dir.path().join("out"), "max_abs_diff") <= 1e-6);
}

#[test]
fn limit_cycle_mode_reaches_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{BASE}mode = limit-cycle\nforce = harmonic\nf0 = 0.2\nOmega = 0.9\ninitial = coherent(1)\nt_max = 400\nn_steps = 100\n"
    );
    let out = run_cli(dir.path(), &cfg, "out");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(summary_value(&dir.path().join("out"), "limit_cycle_trace_distance") <= 1e-4);
}

#[test]
fn short_limit_cycle_run_is_a_tolerance_breach() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{BASE}mode = limit-cycle\nforce = harmonic\nf0 = 0.2\nOmega = 0.9\ninitial = coherent(1)\nt_max = 5\nn_steps = 10\n"
    );
    assert_eq!(run_cli(dir.path(), &cfg, "out").status.code(), Some(5));
}

#[test]
fn config_error_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "mode = analytic\nomega = 1\nmu = 0.1\nnu = 0.3\nforce = zero\ninitial = vacuum\nN = 10\nt_max = 1\nn_steps = 5\n";
    let out = run_cli(dir.path(), cfg, "out");
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("requires mu > nu") && err.contains("line 4"), "{err}");
}

#[test]
fn missing_config_file_is_a_config_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_lindblad-hosc")).arg("/nonexistent/run.cfg").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn small_truncation_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "mode = analytic\nomega = 1\nmu = 0.3\nnu = 0.1\nforce = zero\ninitial = coherent(1.5)\nN = 5\nt_max = 1\nn_steps = 5\n";
    let out = run_cli(dir.path(), cfg, "out");
    assert_eq!(out.status.code(), Some(4));
    assert!(dir.path().join("out/trajectory.csv").exists());
}

#[test]
fn tight_compare_tolerance_exits_with_five() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{BASE}mode = compare\nforce = harmonic\nf0 = 0.2\nOmega = 0.9\ninitial = vacuum\nt_max = 2\nn_steps = 4\ncompare_tol = 1e-30\n"
    );
    assert_eq!(run_cli(dir.path(), &cfg, "out").status.code(), Some(5));
}

#[test]
fn failed_integration_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{BASE}mode = oracle-direct\nforce = harmonic\nf0 = 0.2\nOmega = 0.9\ninitial = vacuum\nt_max = 2\nn_steps = 4\n\
         rtol = 1e-300\natol = 1e-300\n"
    );
    let out = run_cli(dir.path(), &cfg, "out");
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sampled_force_file_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("t,f\n");
    for k in 0..=40 {
        let t = 0.1 * k as f64;
        csv.push_str(&format!("{t},{}\n", 0.2 * (0.9 * t).cos()));
    }
    fs::write(dir.path().join("force.csv"), csv).unwrap();
    let cfg = format!(
        "{BASE}mode = compare\nforce = sampled-file\nforce_file = force.csv\ninitial = vacuum\nt_max = 4\nn_steps = 8\n"
    );
    let out = run_cli(dir.path(), &cfg, "out");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn long_analytic_run_reports_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{BASE}mode = analytic\nforce = harmonic\nf0 = 0.2\nOmega = 0.9\ninitial = vacuum\nt_max = 400\nn_steps = 4\n"
    );
    let out = run_cli(dir.path(), &cfg, "out");
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot be represented"));
}
