//! Closed-form solution of the damped, driven oscillator.
//!
//! The dissipative part of the Liouville generator is an element of
//! su(1,1) and disentangles into `e^{d₊K̂₊}·e^{d₀K̂₀}·e^{d₋K̂₋}`. The force
//! enters only through the displacement `χ(t)` and the normalization `δ(t)`.
//! Back in operator form the state at time `t` is
//!
//! ```text
//! ρ(t) = (e^δ/λ) Σⱼ (d₊ʲ/j!) a†ʲ e^{(−iωt−ln λ)n} [Σₖ (d₋ᵏ/k!) aᵏ ρ_f a†ᵏ] e^{(iωt−ln λ)n} aʲ
//! ρ_f  = D(χ)·ρ(0)·D(χ)†
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{
    displacement, exp_hermitian, sandwich_lower, sandwich_raise, CMatrix, DensityMatrix, FockOperators, Tolerances,
};
use crate::lindblad::{ForceSpec, OscillatorParams, SampledForce};
use crate::quadrature::{integrate, integrate_piecewise, QuadratureControl};
use crate::superop::{interior_indices, SuperOperatorSet};

const I: C64 = C64::new(0.0, 1.0);

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be finite and non-negative, got {t}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Disentangling coefficients

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SCoefficients {
    pub t: f64,
    pub d_plus: f64,
    pub d_minus: f64,
    pub d_zero: f64,
    /// `λ = e^{−d₀}`.
    pub lambda: f64,
}

impl SCoefficients {
    /// Both sides of `e^{d₀} + (1−d₊)d₋e^{−d₀} = (1−d₊)e^{−d₀}`, each of
    /// which should equal `e^{γt}`.
    pub fn consistency_pair(&self) -> (f64, f64) {
        let e0 = self.d_zero.exp();
        let lhs = e0 + (1.0 - self.d_plus) * self.d_minus / e0;
        let rhs = (1.0 - self.d_plus) / e0;
        (lhs, rhs)
    }
}

/// `λ = cosh γt + (γ'/γ) sinh γt`, `d₊ = ν sinh γt/(γλ)`, `d₋ = μ sinh γt/(γλ)`.
///
/// Evaluated with `e^{γt}` factored out so large `t` does not overflow.
pub fn s_coefficients(params: &OscillatorParams, t: f64) -> SCoefficients {
    let g = params.gamma();
    let gp = params.gamma_prime();
    let decay = (-2.0 * g * t).exp();
    let one_minus = -(-2.0 * g * t).exp_m1();
    // λ·e^{−γt} and sinh(γt)·e^{−γt}
    let lambda_red = 0.5 * (1.0 + decay) + (gp / g) * 0.5 * one_minus;
    let sinh_over_lambda = 0.5 * one_minus / lambda_red;
    let d_zero = -(g * t) - lambda_red.ln();
    SCoefficients {
        t,
        d_plus: params.nu() * sinh_over_lambda / g,
        d_minus: params.mu() * sinh_over_lambda / g,
        d_zero,
        lambda: (g * t).exp() * lambda_red,
    }
}

/// Which Liouville indices enter a residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// Levels `j, k ≤ N−2`.
    Interior,
    Full,
}

fn real_super_generators(m: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let a = DMatrix::<f64>::from_fn(m, m, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 });
    let ad = a.transpose();
    let n = &ad * &a;
    let id = DMatrix::<f64>::identity(m, m);
    let k0 = n.kronecker(&id) + id.kronecker(&n) + DMatrix::<f64>::identity(m * m, m * m);
    (k0, ad.kronecker(&ad), a.kronecker(&a))
}

fn disentangled_product(params: &OscillatorParams, t: f64, sops: &SuperOperatorSet) -> CMatrix {
    let s = s_coefficients(params, t);
    let left = (&sops.k_plus * C64::new(s.d_plus, 0.0)).exp();
    let right = (&sops.k_minus * C64::new(s.d_minus, 0.0)).exp();
    let middle = CMatrix::from_diagonal(&sops.k0.diagonal().map(|k| (k * s.d_zero).exp()));
    left * middle * right
}

fn projected_residual(diff: impl Fn(usize, usize) -> f64, indices: &[usize]) -> f64 {
    let mut worst = 0.0f64;
    for &r in indices {
        for &c in indices {
            worst = worst.max(diff(r, c));
        }
    }
    worst
}

/// Max-norm of `e^{d₊K̂₊}e^{d₀K̂₀}e^{d₋K̂₋} − exp(t(μK̂₋ + νK̂₊ − γ'K̂₀))` on the
/// interior levels.
///
/// The reference exponential is taken in a space three times larger than
/// `sops.dim` and restricted back, so it stands in for the untruncated
/// operator. The product side needs no padding: `K̂₊` never maps out of the
/// upper levels and `K̂₋` never maps into them, so its low block is exact.
pub fn verify_us_factorization(params: &OscillatorParams, t: f64, sops: &SuperOperatorSet) -> f64 {
    let n = sops.dim;
    let m = 3 * n;
    let (k0, kp, km) = real_super_generators(m);
    let reference = (km * (t * params.mu()) + kp * (t * params.nu()) - k0 * (t * params.gamma_prime())).exp();
    let product = disentangled_product(params, t, sops);
    let embed = |idx: usize| (idx / n) * m + idx % n;
    projected_residual(
        |r, c| (product[(r, c)] - reference[(embed(r), embed(c))]).norm(),
        &interior_indices(n),
    )
}

/// Same residual against the exponential of the truncated generators
/// themselves, which is wrong near the boundary.
pub fn us_truncation_residual(
    params: &OscillatorParams,
    t: f64,
    sops: &SuperOperatorSet,
    projection: Projection,
) -> f64 {
    let gen = &sops.k_minus * C64::new(t * params.mu(), 0.0) + &sops.k_plus * C64::new(t * params.nu(), 0.0)
        - &sops.k0 * C64::new(t * params.gamma_prime(), 0.0);
    let reference = gen.exp();
    let product = disentangled_product(params, t, sops);
    let indices = match projection {
        Projection::Interior => interior_indices(sops.dim),
        Projection::Full => (0..sops.dim * sops.dim).collect(),
    };
    projected_residual(|r, c| (product[(r, c)] - reference[(r, c)]).norm(), &indices)
}

// ---------------------------------------------------------------------------
// Force integrals

fn chi_control() -> QuadratureControl {
    QuadratureControl { abs_tol: 1e-13, max_intervals: 20_000 }
}

fn growth(params: &OscillatorParams) -> C64 {
    C64::new(params.gamma(), params.omega())
}

/// `∫_0^t f(s)·e^{z s} ds` for the piecewise-linear interpolant, in closed
/// form on each linear piece.
fn sampled_exponential_integral(force: &SampledForce, z: C64, t: f64) -> C64 {
    let mut nodes = vec![0.0];
    nodes.extend(force.times().iter().copied().filter(|&s| s > 0.0 && s < t));
    nodes.push(t);
    let mut total = C64::new(0.0, 0.0);
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = b - a;
        if len <= 0.0 {
            continue;
        }
        let p = force.value(a);
        let q = (force.value(b) - p) / len;
        let ezl = (z * len).exp();
        let e0 = (ezl - 1.0) / z;
        let e1 = (ezl * len - e0) / z;
        total += (z * a).exp() * (e0 * p + e1 * q);
    }
    total
}

/// `χ(t) = i∫_0^t f(s)·e^{(γ+iω)s} ds` by quadrature.
///
/// Smooth forces use adaptive Gauss–Kronrod; sampled forces integrate their
/// interpolant exactly.
pub fn chi_quadrature(params: &OscillatorParams, t: f64) -> Result<C64> {
    check_time(t)?;
    let z = growth(params);
    match params.force() {
        ForceSpec::Zero => Ok(C64::new(0.0, 0.0)),
        ForceSpec::Sampled(s) => Ok(I * sampled_exponential_integral(s, z, t)),
        force => {
            let r = integrate(|s| (z * s).exp() * force.value(s), 0.0, t, &chi_control())?;
            Ok(I * r.value)
        }
    }
}

/// Closed form of `χ(t)` for `f(t) = f0·cos(Ωt)`.
pub fn chi_harmonic(f0: f64, omega_drive: f64, params: &OscillatorParams, t: f64) -> C64 {
    let g = params.gamma();
    let w = params.omega();
    let up = (C64::new(g, w + omega_drive) * t).exp() - 1.0;
    let down = (C64::new(g, w - omega_drive) * t).exp() - 1.0;
    (up / C64::new(w + omega_drive, -g) + down / C64::new(w - omega_drive, -g)) * (0.5 * f0)
}

/// `χ(t)` by the fastest exact route for the force at hand.
pub fn chi(params: &OscillatorParams, t: f64) -> Result<C64> {
    match params.force() {
        ForceSpec::Harmonic { f0, omega_drive } => {
            check_time(t)?;
            Ok(chi_harmonic(*f0, *omega_drive, params, t))
        }
        _ => chi_quadrature(params, t),
    }
}

/// `δ(t) = γt + i∫_0^t f(χ*e^{(γ+iω)s} − χe^{(γ−iω)s}) ds − |χ(t)|²`.
///
/// The inner `χ(s)` is itself computed by quadrature at every outer node.
pub fn delta_quadrature(params: &OscillatorParams, t: f64) -> Result<f64> {
    check_time(t)?;
    let g = params.gamma();
    if params.force().is_zero() {
        return Ok(g * t);
    }
    let z = growth(params);
    let force = params.force();
    let mut inner_error = None;
    let integrand = |s: f64| {
        let chi_s = match chi_quadrature(params, s) {
            Ok(v) => v,
            Err(e) => {
                inner_error.get_or_insert(e);
                C64::new(0.0, 0.0)
            }
        };
        let w = (z * s).exp();
        I * force.value(s) * (chi_s.conj() * w - chi_s * w.conj())
    };
    let control = QuadratureControl { abs_tol: 1e-12, max_intervals: 20_000 };
    let value = match force {
        ForceSpec::Sampled(sampled) => {
            let mut nodes = vec![0.0];
            nodes.extend(sampled.times().iter().copied().filter(|&s| s > 0.0 && s < t));
            nodes.push(t);
            integrate_piecewise(integrand, &nodes, &control)?.value
        }
        _ => integrate(integrand, 0.0, t, &control)?.value,
    };
    if let Some(e) = inner_error {
        return Err(e);
    }
    let residue = value.im.abs();
    if residue > 1e-12 {
        return Err(Error::Domain(format!("δ integrand has imaginary residue {residue:e}")));
    }
    let chi_t = chi_quadrature(params, t)?;
    Ok(g * t + value.re - chi_t.norm_sqr())
}

/// Closed form `δ = γt + Re J − |χ|²` for `f(t) = f0·cos(Ωt)`.
pub fn delta_harmonic(f0: f64, omega_drive: f64, params: &OscillatorParams, t: f64) -> f64 {
    let g = params.gamma();
    if f0 == 0.0 {
        return g * t;
    }
    let w = params.omega();
    let big = omega_drive;
    let chi_t = chi_harmonic(f0, big, params, t);
    let gm = C64::new(g, -big);
    let gp = C64::new(g, big);
    let term_minus = ((gm * (2.0 * t)).exp() - 1.0) / (C64::new(g, w - big) * gm);
    let term_plus = ((gp * (2.0 * t)).exp() - 1.0) / (C64::new(g, w + big) * gp);
    let wg = C64::new(w, -g);
    let pole = wg * 4.0 / (wg * wg - big * big);
    let ramp = I * (2.0 * g * t).exp_m1() / (2.0 * g);
    let j = (term_minus + term_plus - pole * ramp) * (0.25 * f0 * f0) - pole * chi_t.conj() * (0.5 * f0);
    g * t + j.re - chi_t.norm_sqr()
}

/// `δ(t)` by the fastest exact route for the force at hand.
pub fn delta(params: &OscillatorParams, t: f64) -> Result<f64> {
    match params.force() {
        ForceSpec::Zero => {
            check_time(t)?;
            Ok(params.gamma() * t)
        }
        ForceSpec::Harmonic { f0, omega_drive } => {
            check_time(t)?;
            Ok(delta_harmonic(*f0, *omega_drive, params, t))
        }
        ForceSpec::Sampled(_) => delta_quadrature(params, t),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RCoefficients {
    pub t: f64,
    /// `−iωt`.
    pub g1: C64,
    pub chi: C64,
    /// `δ + |χ|²`.
    pub g6: f64,
    pub delta: f64,
}

pub fn r_coefficients(params: &OscillatorParams, t: f64) -> Result<RCoefficients> {
    let chi = chi(params, t)?;
    let delta = delta(params, t)?;
    Ok(RCoefficients {
        t,
        g1: C64::new(0.0, -params.omega() * t),
        chi,
        g6: delta + chi.norm_sqr(),
        delta,
    })
}

/// The four drive coefficients, each from its own integral of
/// `c(s) = −f(s)e^{γs}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GCoefficients {
    pub g2: C64,
    pub g3: C64,
    pub g4: C64,
    pub g5: C64,
}

pub fn g_coefficients_by_quadrature(params: &OscillatorParams, t: f64) -> Result<GCoefficients> {
    check_time(t)?;
    let g = params.gamma();
    let w = params.omega();
    let force = params.force();
    let control = chi_control();
    let c = |s: f64| -force.value(s) * (g * s).exp();
    let rotating = |sign: f64| integrate(|s| C64::from_polar(c(s), sign * w * s), 0.0, t, &control);
    let minus = rotating(-1.0)?.value;
    let plus = rotating(1.0)?.value;
    Ok(GCoefficients {
        g2: -I * minus,
        g3: -I * plus,
        g4: I * plus,
        g5: I * minus,
    })
}

// ---------------------------------------------------------------------------
// Operator-form solution

fn check_dims(rho0: &DensityMatrix, ops: &FockOperators) -> Result<()> {
    if rho0.dim() != ops.dim {
        return Err(Error::Shape(format!(
            "state has dimension {} but operators have {}",
            rho0.dim(),
            ops.dim
        )));
    }
    Ok(())
}

/// `prefactor·Σⱼ (d₊ʲ/j!) a†ʲ E₁ [Σₖ (d₋ᵏ/k!) aᵏ X a†ᵏ] E₂ aʲ`.
///
/// Every step acts entrywise with the same coefficient on `(i, j)` and
/// `(j, i)`, so a Hermitian `x` gives an exactly Hermitian result.
fn disentangled_sum(x: &CMatrix, s: &SCoefficients, omega_t: f64, prefactor: f64) -> CMatrix {
    let n = x.nrows();
    let mut inner = x.clone();
    if s.d_minus != 0.0 {
        let mut term = x.clone();
        for k in 1..n {
            term = sandwich_lower(&term) * C64::new(s.d_minus / k as f64, 0.0);
            inner += &term;
        }
    }
    let log_lambda = s.lambda.ln();
    let middle = CMatrix::from_fn(n, n, |i, j| {
        let scale = (-(log_lambda * (i + j) as f64)).exp();
        inner[(i, j)] * (C64::from_polar(1.0, -omega_t * (i as f64 - j as f64)) * scale)
    });
    let mut outer = middle.clone();
    if s.d_plus != 0.0 {
        let mut term = middle;
        for j in 1..n {
            term = sandwich_raise(&term) * C64::new(s.d_plus / j as f64, 0.0);
            outer += &term;
        }
    }
    outer * C64::new(prefactor, 0.0)
}

fn warn_on_tail(rho: &DensityMatrix) {
    let tail = rho.tail_population();
    let tol = Tolerances::default().tail_tol;
    if tail > tol {
        log::warn!("truncation: tail population {tail:e} exceeds {tol:e}");
    }
}

/// Force-free evolution `(e^{γt}/λ) Σⱼ … ρ(0) …` without any displacement.
pub fn force_free_solution(
    rho0: &DensityMatrix,
    params: &OscillatorParams,
    t: f64,
    ops: &FockOperators,
) -> Result<DensityMatrix> {
    check_time(t)?;
    check_dims(rho0, ops)?;
    let s = s_coefficients(params, t);
    let prefactor = (params.gamma() * t).exp() / s.lambda;
    let out = DensityMatrix::from_matrix_unchecked(disentangled_sum(rho0.matrix(), &s, params.omega() * t, prefactor));
    warn_on_tail(&out);
    Ok(out)
}

/// General driven solution at time `t`.
///
/// The displaced initial state is symmetrized before the sums, which only
/// removes rounding asymmetry from the dense products. `|χ(t)|` grows like
/// `e^{γt}`, so the intermediate `D(χ)ρ(0)D(χ)†` needs `|χ|² ≪ N`; beyond
/// that the result is garbage or overflows, and overflow is reported as
/// [`Error::Truncation`].
pub fn assemble_general_solution(
    rho0: &DensityMatrix,
    params: &OscillatorParams,
    t: f64,
    ops: &FockOperators,
) -> Result<DensityMatrix> {
    check_time(t)?;
    check_dims(rho0, ops)?;
    let s = s_coefficients(params, t);
    let r = r_coefficients(params, t)?;
    let displaced = if r.chi == C64::new(0.0, 0.0) {
        rho0.matrix().clone()
    } else {
        let d = displacement(r.chi, ops);
        let m = &d * rho0.matrix() * d.adjoint();
        (&m + m.adjoint()) * C64::new(0.5, 0.0)
    };
    let prefactor = r.delta.exp() / s.lambda;
    let out = disentangled_sum(&displaced, &s, params.omega() * t, prefactor);
    if !out.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Truncation(format!(
            "displacement |χ| = {:.3e} at t = {t} cannot be represented in {} levels",
            r.chi.norm(),
            ops.dim
        )));
    }
    let out = DensityMatrix::from_matrix_unchecked(out);
    warn_on_tail(&out);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Thermal coherent states

/// `ρ = D(α)·(1−u)uⁿ·D(α)†`, with the redundant parametrizations kept in sync.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalCoherentState {
    pub alpha: C64,
    /// `ln u`.
    pub sigma: f64,
    pub u: f64,
    /// `1 − u`.
    pub b: f64,
    /// `b·α`.
    pub beta: C64,
    /// Partition function `1/b`.
    pub z: f64,
}

impl ThermalCoherentState {
    pub fn new(alpha: C64, u: f64) -> Result<Self> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("thermal weight u = {u} must lie in (0, 1)")));
        }
        let b = 1.0 - u;
        Ok(Self { alpha, sigma: u.ln(), u, b, beta: alpha * b, z: 1.0 / b })
    }

    pub fn to_density(&self, ops: &FockOperators) -> Result<DensityMatrix> {
        DensityMatrix::thermal_coherent(self.alpha, self.u, ops)
    }
}

/// Solution of `u̇ = ν − (μ+ν)u + μu²`.
///
/// With fixed points `r = ν/μ` and `1`, the ratio `(u−r)/(u−1)` decays as
/// `e^{−2γt}`.
pub fn riccati_u(params: &OscillatorParams, u0: f64, t: f64) -> Result<f64> {
    if !(u0 > 0.0 && u0 < 1.0) {
        return Err(Error::Domain(format!("initial u0 = {u0} must lie in (0, 1)")));
    }
    check_time(t)?;
    if t == 0.0 {
        return Ok(u0);
    }
    let r = params.nu() / params.mu();
    let y = (u0 - r) / (u0 - 1.0) * (-2.0 * params.gamma() * t).exp();
    Ok((r - y) / (1.0 - y))
}

/// Evolves both parameters of a thermal coherent state exactly.
pub fn evolve_thermal_coherent(
    state0: &ThermalCoherentState,
    params: &OscillatorParams,
    t: f64,
) -> Result<ThermalCoherentState> {
    let u = riccati_u(params, state0.u, t)?;
    let chi = chi_quadrature(params, t)?;
    let alpha = (C64::new(-params.gamma(), -params.omega()) * t).exp() * (state0.alpha + chi);
    ThermalCoherentState::new(alpha, u)
}

/// Periodic displacement reached under `f(t) = f0·cos(Ωt)`.
pub fn alpha_limit_cycle(f0: f64, omega_drive: f64, params: &OscillatorParams, t: f64) -> C64 {
    let g = params.gamma();
    let w = params.omega();
    let phase = C64::from_polar(1.0, omega_drive * t);
    (phase / C64::new(w + omega_drive, -g) + phase.conj() / C64::new(w - omega_drive, -g)) * (0.5 * f0)
}

/// `(2γ/μ)·exp(ln(ν/μ)·(|α|² + n − αa† − α*a))` on the limit cycle.
///
/// For `ν = 0` this is the pure coherent state `|α⟩⟨α|`.
pub fn limit_cycle_density(
    f0: f64,
    omega_drive: f64,
    params: &OscillatorParams,
    t: f64,
    ops: &FockOperators,
) -> DensityMatrix {
    let alpha = alpha_limit_cycle(f0, omega_drive, params, t);
    if params.nu() == 0.0 {
        return DensityMatrix::coherent(alpha, ops);
    }
    let exponent = displaced_number(alpha, ops);
    let m = exp_hermitian(&exponent, (params.nu() / params.mu()).ln()) * C64::new(2.0 * params.gamma() / params.mu(), 0.0);
    let out = DensityMatrix::from_matrix_unchecked(m);
    warn_on_tail(&out);
    out
}

/// `n − αa† − α*a + |α|²`, i.e. `D(α) n D(α)†` in the untruncated space.
fn displaced_number(alpha: C64, ops: &FockOperators) -> CMatrix {
    &ops.number - &ops.raise * alpha - &ops.lower * alpha.conj() + &ops.identity * C64::new(alpha.norm_sqr(), 0.0)
}

/// Evolution of the vacuum in closed form:
/// `(1−d₊)·exp(ln d₊·(n − g a† − g* a + |g|²))` with `g = e^{−(γ+iω)t}χ(t)`.
///
/// Needs `d₊ > 0`, i.e. `ν > 0` and `t > 0`.
pub fn coherent_initial_solution(params: &OscillatorParams, t: f64, ops: &FockOperators) -> Result<DensityMatrix> {
    check_time(t)?;
    let s = s_coefficients(params, t);
    if s.d_plus <= 0.0 {
        return Err(Error::Domain(format!(
            "closed vacuum solution needs d₊ > 0 (ν > 0, t > 0); got d₊ = {}",
            s.d_plus
        )));
    }
    let chi = chi(params, t)?;
    let g = (C64::new(-params.gamma(), -params.omega()) * t).exp() * chi;
    let m = exp_hermitian(&displaced_number(g, ops), s.d_plus.ln()) * C64::new(1.0 - s.d_plus, 0.0);
    let out = DensityMatrix::from_matrix_unchecked(m);
    warn_on_tail(&out);
    Ok(out)
}
