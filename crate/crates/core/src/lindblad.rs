//! Direct integration of the master equation
//!
//! ```text
//! dρ/dt = −i[H, ρ] + (μ/2)(2aρa† − a†aρ − ρa†a) + (ν/2)(2a†ρa − aa†ρ − ρaa†)
//! H     = ω(a†a + 1/2) − f(t)(a† + a)
//! ```
//!
//! on truncated `N×N` matrices. This is the reference the closed-form
//! solution is checked against, so it deliberately shares nothing with the
//! disentangling machinery.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{CMatrix, DensityMatrix, FockOperators, Tolerances};
use crate::ode::{self, StepControl};

const I: C64 = C64::new(0.0, 1.0);

/// Real driving force `f(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ForceSpec {
    Zero,
    /// `f(t) = f0·cos(Ω t)`.
    Harmonic { f0: f64, omega_drive: f64 },
    Sampled(SampledForce),
}

/// Linearly interpolated samples; held constant outside the sampled range.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledForce {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl SampledForce {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidParams(format!(
                "{} sample times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidParams("sampled force needs at least 2 points".into()));
        }
        if times.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("sampled force contains non-finite values".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams("sample times must be strictly increasing".into()));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let w = (t - t0) / (t1 - t0);
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }
}

impl ForceSpec {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            ForceSpec::Zero => 0.0,
            ForceSpec::Harmonic { f0, omega_drive } => f0 * (omega_drive * t).cos(),
            ForceSpec::Sampled(s) => s.value(t),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ForceSpec::Zero => true,
            ForceSpec::Harmonic { f0, .. } => *f0 == 0.0,
            ForceSpec::Sampled(s) => s.values.iter().all(|&v| v == 0.0),
        }
    }
}

/// Oscillator frequency, loss rate `μ`, pump rate `ν` and drive.
///
/// `γ = (μ−ν)/2` and `γ' = (μ+ν)/2` are always derived on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorParams {
    omega: f64,
    mu: f64,
    nu: f64,
    force: ForceSpec,
}

impl OscillatorParams {
    pub fn new(omega: f64, mu: f64, nu: f64, force: ForceSpec) -> Result<Self> {
        if !(omega.is_finite() && mu.is_finite() && nu.is_finite()) {
            return Err(Error::InvalidParams("omega, mu and nu must be finite".into()));
        }
        if omega <= 0.0 {
            return Err(Error::InvalidParams(format!("requires omega > 0, got {omega}")));
        }
        if nu < 0.0 {
            return Err(Error::InvalidParams(format!("requires nu >= 0, got {nu}")));
        }
        if mu <= nu {
            return Err(Error::InvalidParams(format!("requires mu > nu, got mu = {mu}, nu = {nu}")));
        }
        if let ForceSpec::Harmonic { f0, omega_drive } = force {
            if !f0.is_finite() || !omega_drive.is_finite() || omega_drive < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "harmonic drive needs finite f0 and Omega >= 0, got f0 = {f0}, Omega = {omega_drive}"
                )));
            }
        }
        Ok(Self { omega, mu, nu, force })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn force(&self) -> &ForceSpec {
        &self.force
    }

    /// Dissipation constant `(μ−ν)/2`.
    pub fn gamma(&self) -> f64 {
        0.5 * (self.mu - self.nu)
    }

    /// Diffusion constant `(μ+ν)/2`.
    pub fn gamma_prime(&self) -> f64 {
        0.5 * (self.mu + self.nu)
    }

    pub fn with_force(&self, force: ForceSpec) -> Result<Self> {
        Self::new(self.omega, self.mu, self.nu, force)
    }
}

pub fn hamiltonian(params: &OscillatorParams, t: f64, ops: &FockOperators) -> CMatrix {
    let f = params.force.value(t);
    let half = &ops.identity * C64::new(0.5, 0.0);
    (&ops.number + half) * C64::new(params.omega, 0.0) - ops.position_like() * C64::new(f, 0.0)
}

/// Right-hand side of the master equation, term by term with dense products.
pub fn lindblad_rhs(rho: &DensityMatrix, params: &OscillatorParams, t: f64, ops: &FockOperators) -> Result<CMatrix> {
    if rho.dim() != ops.dim {
        return Err(Error::Shape(format!("state has dimension {}, operators {}", rho.dim(), ops.dim)));
    }
    let r = rho.matrix();
    let h = hamiltonian(params, t, ops);
    let (a, ad) = (&ops.lower, &ops.raise);
    let ada = ad * a;
    let aad = a * ad;

    let coherent = (&h * r - r * &h) * (-I);
    let loss = (a * r * ad * C64::new(2.0, 0.0) - &ada * r - r * &ada) * C64::new(0.5 * params.mu, 0.0);
    let pump = (ad * r * a * C64::new(2.0, 0.0) - &aad * r - r * &aad) * C64::new(0.5 * params.nu, 0.0);
    Ok(coherent + loss + pump)
}

/// The same generator evaluated entrywise from the ladder structure, in
/// `O(N²)` per call. Used inside the integrator.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    dim: usize,
    omega: f64,
    mu: f64,
    nu: f64,
    force: ForceSpec,
    sqrt: Vec<f64>,
    /// Diagonal of the truncated `a a†`; its last entry is 0.
    aad: Vec<f64>,
}

impl LindbladGenerator {
    pub fn new(params: &OscillatorParams, dim: usize) -> Self {
        Self {
            dim,
            omega: params.omega,
            mu: params.mu,
            nu: params.nu,
            force: params.force.clone(),
            sqrt: (0..=dim).map(|i| (i as f64).sqrt()).collect(),
            aad: (0..dim).map(|i| if i + 1 < dim { (i + 1) as f64 } else { 0.0 }).collect(),
        }
    }

    pub fn apply(&self, t: f64, rho: &CMatrix) -> CMatrix {
        let n = self.dim;
        let f = self.force.value(t);
        let s = &self.sqrt;
        CMatrix::from_fn(n, n, |i, j| {
            let r = rho[(i, j)];
            // [(a + a†), ρ]
            let mut x_rho = C64::new(0.0, 0.0);
            if i + 1 < n {
                x_rho += rho[(i + 1, j)] * s[i + 1];
            }
            if i >= 1 {
                x_rho += rho[(i - 1, j)] * s[i];
            }
            let mut rho_x = C64::new(0.0, 0.0);
            if j >= 1 {
                rho_x += rho[(i, j - 1)] * s[j];
            }
            if j + 1 < n {
                rho_x += rho[(i, j + 1)] * s[j + 1];
            }
            let comm = r * (self.omega * (i as f64 - j as f64)) - (x_rho - rho_x) * f;

            let mut loss = -r * (0.5 * (i + j) as f64);
            if i + 1 < n && j + 1 < n {
                loss += rho[(i + 1, j + 1)] * (s[i + 1] * s[j + 1]);
            }
            let mut pump = -r * (0.5 * (self.aad[i] + self.aad[j]));
            if i >= 1 && j >= 1 {
                pump += rho[(i - 1, j - 1)] * (s[i] * s[j]);
            }
            -I * comm + loss * self.mu + pump * self.nu
        })
    }
}

/// Per-step record kept by the integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostic {
    pub t: f64,
    pub h: f64,
    pub trace_error: f64,
    pub herm_defect: f64,
    pub local_error: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub diagnostics: Vec<StepDiagnostic>,
    pub rejected_steps: usize,
    /// Sum of the local error estimates of all accepted steps.
    pub error_estimate: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    pub fn max_tail_population(&self) -> f64 {
        self.states.iter().map(DensityMatrix::tail_population).fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn warn_on_tail(&self, tail_tol: f64) {
        let tail = self.max_tail_population();
        if tail > tail_tol {
            log::warn!("truncation: tail population reached {tail:e} (tolerance {tail_tol:e})");
        }
    }
}

pub(crate) fn check_grid_starts_at_zero(t_grid: &[f64]) -> Result<()> {
    ode::validate_grid(t_grid)?;
    if t_grid[0] != 0.0 {
        return Err(Error::Shape(format!("time grid must start at 0, starts at {}", t_grid[0])));
    }
    Ok(())
}

pub(crate) fn step_diagnostic(info: &ode::StepInfo, rho: &CMatrix) -> StepDiagnostic {
    StepDiagnostic {
        t: info.t,
        h: info.h,
        trace_error: (rho.trace() - C64::new(1.0, 0.0)).norm(),
        herm_defect: crate::fock::hermiticity_defect(rho),
        local_error: info.local_error,
    }
}

/// Integrates the master equation from `rho0` and samples it on `t_grid`.
///
/// No renormalization is applied; trace drift is visible in the
/// diagnostics.
pub fn integrate(
    rho0: &DensityMatrix,
    params: &OscillatorParams,
    t_grid: &[f64],
    control: &StepControl,
) -> Result<Trajectory> {
    check_grid_starts_at_zero(t_grid)?;
    let gen = LindbladGenerator::new(params, rho0.dim());
    let mut diagnostics = Vec::new();
    let out = ode::dopri5(
        |t, rho| gen.apply(t, rho),
        rho0.matrix(),
        t_grid,
        control,
        |info, rho| diagnostics.push(step_diagnostic(info, rho)),
    )?;
    let traj = Trajectory {
        times: t_grid.to_vec(),
        states: out.states.into_iter().map(DensityMatrix::from_matrix_unchecked).collect(),
        diagnostics,
        rejected_steps: out.rejected,
        error_estimate: out.error_estimate,
    };
    traj.warn_on_tail(Tolerances::default().tail_tol);
    Ok(traj)
}
