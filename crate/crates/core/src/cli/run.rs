//! Executes a [`RunConfig`] and writes its output files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::analytic::{assemble_general_solution, limit_cycle_density};
use crate::error::{Error, Result};
use crate::fock::{build_ladder_ops, DensityMatrix, FockOperators, Tolerances};
use crate::lindblad::{self, ForceSpec};
use crate::observables::{report, trace_distance, ObservableReport};
use crate::ode::uniform_grid;
use crate::superop::evolve_vectorized;

use super::config::{InitialState, Mode, OracleKind, RunConfig};

pub const TRAJECTORY_HEADER: &str = "t,re_mean_a,im_mean_a,mean_n,purity,trace_err,min_eig,tail_pop";
pub const COMPARISON_HEADER: &str = "t,max_abs_diff,trace_distance";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    TruncationOverflow,
    ToleranceBreach,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::TruncationOverflow => 4,
            RunStatus::ToleranceBreach => 5,
        }
    }
}

/// Exit code for a run that failed before producing output.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => 1,
        Error::Integration { .. } | Error::Quadrature { .. } => 3,
        Error::Truncation(_) => 4,
        _ => 2,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub final_report: ObservableReport,
    pub max_tail_pop: f64,
    pub max_abs_diff: Option<f64>,
    pub limit_cycle_distance: Option<f64>,
    /// One line per breached tolerance.
    pub breaches: Vec<String>,
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

pub fn initial_density(initial: &InitialState, ops: &FockOperators) -> Result<DensityMatrix> {
    match *initial {
        InitialState::Vacuum => DensityMatrix::vacuum(ops.dim),
        InitialState::Coherent(z) => Ok(DensityMatrix::coherent(z, ops)),
        InitialState::Thermal(u) => DensityMatrix::thermal(u, ops.dim),
        InitialState::ThermalCoherent(z, u) => DensityMatrix::thermal_coherent(z, u, ops),
        InitialState::Fock(n) => DensityMatrix::fock_state(ops.dim, n),
    }
}

fn analytic_states(rho0: &DensityMatrix, config: &RunConfig, grid: &[f64], ops: &FockOperators) -> Result<Vec<DensityMatrix>> {
    grid.iter().map(|&t| assemble_general_solution(rho0, &config.params, t, ops)).collect()
}

fn oracle_states(rho0: &DensityMatrix, config: &RunConfig, grid: &[f64], kind: OracleKind) -> Result<Vec<DensityMatrix>> {
    let traj = match kind {
        OracleKind::Direct => lindblad::integrate(rho0, &config.params, grid, &config.control)?,
        OracleKind::Vectorized => evolve_vectorized(rho0, &config.params, grid, &config.control)?,
    };
    Ok(traj.states)
}

fn check_physical(reports: &[ObservableReport], tol: &Tolerances, label: &str, breaches: &mut Vec<String>) {
    let worst = |f: fn(&ObservableReport) -> f64| reports.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let trace = worst(|r| r.trace_err);
    let herm = worst(|r| r.herm_defect);
    let neg = worst(|r| -r.min_eig);
    if trace > tol.trace_tol {
        breaches.push(format!("{label}: trace error {trace:e} exceeds trace_tol {:e}", tol.trace_tol));
    }
    if herm > tol.herm_tol {
        breaches.push(format!("{label}: Hermiticity defect {herm:e} exceeds herm_tol {:e}", tol.herm_tol));
    }
    if neg > tol.pos_tol {
        breaches.push(format!("{label}: eigenvalue {:e} below -pos_tol", -neg));
    }
}

fn write_trajectory(path: &Path, reports: &[ObservableReport]) -> Result<()> {
    let mut out = String::with_capacity(reports.len() * 200);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for r in reports {
        let row = [r.t, r.mean_a.re, r.mean_a.im, r.mean_n, r.purity, r.trace_err, r.min_eig, r.tail_pop];
        out.push_str(&row.iter().map(|&x| fmt(x)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Runs `config`, writing `trajectory.csv`, `summary.txt` and, in compare
/// mode, `comparison.csv` into `out_dir`.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let ops = build_ladder_ops(config.dim)?;
    let rho0 = initial_density(&config.initial, &ops)?;
    let grid = uniform_grid(config.t_max, config.n_steps);
    let mut breaches = Vec::new();

    let states = match config.mode {
        Mode::Analytic | Mode::Compare => analytic_states(&rho0, config, &grid, &ops)?,
        Mode::OracleDirect => oracle_states(&rho0, config, &grid, OracleKind::Direct)?,
        Mode::OracleVectorized => oracle_states(&rho0, config, &grid, OracleKind::Vectorized)?,
        // the assembled solution needs |χ(t)|² ≪ N, which fails at limit-cycle times
        Mode::LimitCycle => oracle_states(&rho0, config, &grid, config.oracle.unwrap_or(OracleKind::Direct))?,
    };
    let reports: Vec<ObservableReport> = grid.iter().zip(&states).map(|(&t, rho)| report(rho, &ops, t)).collect();
    check_physical(&reports, &config.tolerances, "trajectory", &mut breaches);
    write_trajectory(&out_dir.join("trajectory.csv"), &reports)?;
    let mut max_tail_pop = reports.iter().map(|r| r.tail_pop).fold(f64::NEG_INFINITY, f64::max);

    let mut max_abs_diff = None;
    if config.mode == Mode::Compare {
        let kind = config.oracle.unwrap_or(OracleKind::Direct);
        let oracle = oracle_states(&rho0, config, &grid, kind)?;
        let oracle_reports: Vec<ObservableReport> =
            grid.iter().zip(&oracle).map(|(&t, rho)| report(rho, &ops, t)).collect();
        check_physical(&oracle_reports, &config.tolerances, "oracle", &mut breaches);
        max_tail_pop = oracle_reports.iter().map(|r| r.tail_pop).fold(max_tail_pop, f64::max);

        let mut csv = format!("{COMPARISON_HEADER}\n");
        let mut worst = 0.0f64;
        for ((&t, a), b) in grid.iter().zip(&states).zip(&oracle) {
            let diff = a.max_abs_diff(b);
            worst = worst.max(diff);
            let _ = writeln!(csv, "{},{},{}", fmt(t), fmt(diff), fmt(trace_distance(a, b)?));
        }
        let path = out_dir.join("comparison.csv");
        fs::write(&path, csv).map_err(|e| io_err(&path, e))?;
        if worst > config.compare_tol {
            breaches.push(format!("max_abs_diff {worst:e} exceeds compare_tol {:e}", config.compare_tol));
        }
        max_abs_diff = Some(worst);
    }

    let mut limit_cycle_distance = None;
    if config.mode == Mode::LimitCycle {
        let (f0, omega_drive) = match *config.params.force() {
            ForceSpec::Harmonic { f0, omega_drive } => (f0, omega_drive),
            _ => (0.0, 0.0),
        };
        let target = limit_cycle_density(f0, omega_drive, &config.params, config.t_max, &ops);
        let d = trace_distance(states.last().expect("grid is non-empty"), &target)?;
        if d > config.limit_cycle_tol {
            breaches.push(format!("limit-cycle trace distance {d:e} exceeds limit_cycle_tol {:e}", config.limit_cycle_tol));
        }
        limit_cycle_distance = Some(d);
    }

    let status = if max_tail_pop > config.tolerances.tail_tol {
        breaches.push(format!(
            "tail population {max_tail_pop:e} exceeds tail_tol {:e}; increase N",
            config.tolerances.tail_tol
        ));
        RunStatus::TruncationOverflow
    } else if breaches.is_empty() {
        RunStatus::Ok
    } else {
        RunStatus::ToleranceBreach
    };

    let outcome = RunOutcome {
        status,
        final_report: *reports.last().expect("grid is non-empty"),
        max_tail_pop,
        max_abs_diff,
        limit_cycle_distance,
        breaches,
    };
    write_summary(&out_dir.join("summary.txt"), config, &outcome)?;
    Ok(outcome)
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Analytic => "analytic",
        Mode::OracleDirect => "oracle-direct",
        Mode::OracleVectorized => "oracle-vectorized",
        Mode::Compare => "compare",
        Mode::LimitCycle => "limit-cycle",
    }
}

fn write_summary(path: &Path, config: &RunConfig, o: &RunOutcome) -> Result<()> {
    let r = &o.final_report;
    let mut s = String::new();
    let _ = writeln!(s, "mode = {}", mode_name(config.mode));
    let _ = writeln!(s, "N = {}", config.dim);
    let _ = writeln!(s, "exit_code = {}", o.status.exit_code());
    let _ = writeln!(s, "t_final = {}", fmt(r.t));
    let _ = writeln!(s, "re_mean_a = {}", fmt(r.mean_a.re));
    let _ = writeln!(s, "im_mean_a = {}", fmt(r.mean_a.im));
    let _ = writeln!(s, "mean_n = {}", fmt(r.mean_n));
    let _ = writeln!(s, "purity = {}", fmt(r.purity));
    let _ = writeln!(s, "trace_err = {}", fmt(r.trace_err));
    let _ = writeln!(s, "herm_defect = {}", fmt(r.herm_defect));
    let _ = writeln!(s, "min_eig = {}", fmt(r.min_eig));
    let _ = writeln!(s, "tail_pop = {}", fmt(r.tail_pop));
    let _ = writeln!(s, "max_tail_pop = {}", fmt(o.max_tail_pop));
    if let Some(d) = o.max_abs_diff {
        let _ = writeln!(s, "max_abs_diff = {}", fmt(d));
    }
    if let Some(d) = o.limit_cycle_distance {
        let _ = writeln!(s, "limit_cycle_trace_distance = {}", fmt(d));
    }
    for b in &o.breaches {
        let _ = writeln!(s, "# breach: {b}");
    }
    fs::write(path, s).map_err(|e| io_err(path, e))
}
