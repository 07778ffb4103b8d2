//! Embedded Dormand–Prince 5(4) integrator for complex matrix ODEs.
//!
//! Column vectors are handled as `n×1` matrices so the master-equation and
//! Liouville-space oracles share one stepper and one set of tolerance
//! semantics.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// First trial step; estimated from the initial slope when `None`.
    pub h_init: Option<f64>,
    pub h_max: f64,
    /// Steps below this (or below rounding of `t`) abort the integration.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: None,
            h_max: f64::INFINITY,
            h_min: 1e-14,
            max_steps: 5_000_000,
        }
    }
}

impl StepControl {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }
}

/// Data about one accepted step, handed to the step observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Time at the end of the step.
    pub t: f64,
    pub h: f64,
    /// Max-abs of the embedded error estimate.
    pub local_error: f64,
}

#[derive(Debug, Clone)]
pub struct OdeOutput {
    /// State at every grid point, starting with the initial value.
    pub states: Vec<CMatrix>,
    pub accepted: usize,
    pub rejected: usize,
    /// Sum of the accepted local error estimates.
    pub error_estimate: f64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

fn add_scaled(acc: &mut CMatrix, a: f64, k: &CMatrix) {
    acc.zip_apply(k, |x, v| *x += v * a);
}

fn combine(y: &CMatrix, h: f64, terms: &[(f64, &CMatrix)]) -> CMatrix {
    let mut out = y.clone();
    for &(coef, k) in terms {
        if coef != 0.0 {
            add_scaled(&mut out, h * coef, k);
        }
    }
    out
}

fn weighted_rms(err: &CMatrix, y: &CMatrix, y_new: &CMatrix, control: &StepControl) -> f64 {
    let mut sum = 0.0;
    for ((e, a), b) in err.iter().zip(y.iter()).zip(y_new.iter()) {
        let scale = control.atol + control.rtol * a.norm().max(b.norm());
        sum += (e.norm() / scale).powi(2);
    }
    (sum / err.len() as f64).sqrt()
}

fn initial_step<F>(rhs: &mut F, t0: f64, y0: &CMatrix, f0: &CMatrix, control: &StepControl) -> f64
where
    F: FnMut(f64, &CMatrix) -> CMatrix,
{
    let norm = |m: &CMatrix| {
        let mut s = 0.0;
        for (v, y) in m.iter().zip(y0.iter()) {
            s += (v.norm() / (control.atol + control.rtol * y.norm())).powi(2);
        }
        (s / m.len() as f64).sqrt()
    };
    let d0 = norm(y0);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = combine(y0, h0, &[(1.0, f0)]);
    let f1 = rhs(t0 + h0, &y1);
    let d2 = norm(&(f1 - f0)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    (100.0 * h0).min(h1).min(control.h_max)
}

/// Integrates `dy/dt = rhs(t, y)` and returns the state at every point of
/// `grid`, which must be strictly increasing and start at the initial time.
///
/// Steps are shortened to land exactly on grid points. `on_step` sees every
/// accepted step.
pub fn dopri5<F, O>(
    mut rhs: F,
    y0: &CMatrix,
    grid: &[f64],
    control: &StepControl,
    mut on_step: O,
) -> Result<OdeOutput>
where
    F: FnMut(f64, &CMatrix) -> CMatrix,
    O: FnMut(&StepInfo, &CMatrix),
{
    validate_grid(grid)?;
    let mut t = grid[0];
    let mut y = y0.clone();
    let mut states = Vec::with_capacity(grid.len());
    states.push(y.clone());

    let mut out = OdeOutput { states: Vec::new(), accepted: 0, rejected: 0, error_estimate: 0.0 };
    if grid.len() == 1 {
        out.states = states;
        return Ok(out);
    }

    let mut k1 = rhs(t, &y);
    let mut h = match control.h_init {
        Some(h) => h.min(control.h_max),
        None => initial_step(&mut rhs, t, &y, &k1, control),
    };
    let mut last_rejected = false;

    for &t_next in &grid[1..] {
        while t < t_next {
            if out.accepted + out.rejected >= control.max_steps {
                return Err(Error::Integration { t, reason: format!("exceeded {} steps", control.max_steps) });
            }
            let min_step = control.h_min.max(16.0 * f64::EPSILON * t.abs());
            if h < min_step {
                return Err(Error::Integration { t, reason: format!("step size underflow (h = {h:e})") });
            }
            let remaining = t_next - t;
            let clipped = h >= remaining;
            let step = if clipped { remaining } else { h };

            let k2 = rhs(t + C2 * step, &combine(&y, step, &[(A21, &k1)]));
            let k3 = rhs(t + C3 * step, &combine(&y, step, &[(A31, &k1), (A32, &k2)]));
            let k4 = rhs(t + C4 * step, &combine(&y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = rhs(
                t + C5 * step,
                &combine(&y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = rhs(
                t + step,
                &combine(&y, step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y_new = combine(&y, step, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = rhs(t + step, &y_new);

            let mut err = k1.clone() * C64::new(step * E1, 0.0);
            for (coef, k) in [(E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)] {
                add_scaled(&mut err, step * coef, k);
            }
            let err_norm = weighted_rms(&err, &y, &y_new, control);

            if !err_norm.is_finite() {
                out.rejected += 1;
                h = step * FAC_MIN;
                last_rejected = true;
                continue;
            }

            let fac = if err_norm == 0.0 { FAC_MAX } else { SAFETY * err_norm.powf(-0.2) };
            if err_norm <= 1.0 {
                t = if clipped { t_next } else { t + step };
                y = y_new;
                k1 = k7;
                out.accepted += 1;
                let local_error = err.iter().fold(0.0f64, |m, z| m.max(z.norm()));
                out.error_estimate += local_error;
                on_step(&StepInfo { t, h: step, local_error }, &y);

                let fac = if last_rejected { fac.min(1.0) } else { fac };
                let proposal = step * fac.clamp(FAC_MIN, FAC_MAX);
                // a clipped step says nothing about the natural step length
                h = if clipped { proposal.max(h) } else { proposal };
                h = h.min(control.h_max);
                last_rejected = false;
            } else {
                out.rejected += 1;
                h = step * fac.clamp(FAC_MIN, 1.0);
                last_rejected = true;
            }
        }
        states.push(y.clone());
    }
    out.states = states;
    Ok(out)
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Shape("time grid is empty".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Shape("time grid contains non-finite values".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Shape("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `n_steps + 1` equally spaced points on `[0, t_max]`.
pub fn uniform_grid(t_max: f64, n_steps: usize) -> Vec<f64> {
    (0..=n_steps).map(|k| t_max * k as f64 / n_steps as f64).collect()
}
