//! Liouville-space form of the master equation.
//!
//! With row-major vectorization the density matrix becomes a vector `|ρ⟩`
//! obeying `i d|ρ⟩/dt = (Ĥ₀ + iĜ)|ρ⟩`, where
//!
//! ```text
//! Ĥ₀ = ωN̂ − f(t)(Â† + Â − B̂† − B̂)
//! Ĝ  = μK̂₋ + νK̂₊ − γ'K̂₀ + γÎ
//! ```
//!
//! and `K̂₀ = n̂⊗I + I⊗n̂ + I⊗I`, `K̂₊ = a†⊗a†`, `K̂₋ = a⊗a` span su(1,1).
//! Everything here is dense `N²×N²`, which caps practical use around `N ≈ 48`.

use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::fock::{build_ladder_ops, kron, unvec, vec, CMatrix, DensityMatrix};
use crate::lindblad::{check_grid_starts_at_zero, step_diagnostic, OscillatorParams, Trajectory};
use crate::ode::{self, StepControl};

/// The nine Liouville-space generators for a truncation `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperatorSet {
    pub dim: usize,
    pub k0: CMatrix,
    pub k_plus: CMatrix,
    pub k_minus: CMatrix,
    /// `n̂⊗I − I⊗n̂`.
    pub n_hat: CMatrix,
    /// `I⊗I`.
    pub i_hat: CMatrix,
    /// `a⊗I`.
    pub a_hat: CMatrix,
    /// `a†⊗I`.
    pub a_dag: CMatrix,
    /// `I⊗a`.
    pub b_hat: CMatrix,
    /// `I⊗a†`.
    pub b_dag: CMatrix,
}

pub fn build_superops(dim: usize) -> Result<SuperOperatorSet> {
    let ops = build_ladder_ops(dim)?;
    let id = &ops.identity;
    let n = &ops.number;
    let i_hat = kron(id, id)?;
    Ok(SuperOperatorSet {
        dim,
        k0: kron(n, id)? + kron(id, n)? + &i_hat,
        k_plus: kron(&ops.raise, &ops.raise)?,
        k_minus: kron(&ops.lower, &ops.lower)?,
        n_hat: kron(n, id)? - kron(id, n)?,
        a_hat: kron(&ops.lower, id)?,
        a_dag: kron(&ops.raise, id)?,
        b_hat: kron(id, &ops.lower)?,
        b_dag: kron(id, &ops.raise)?,
        i_hat,
    })
}

impl SuperOperatorSet {
    /// `Â† + Â − B̂† − B̂`, the operator the force couples to.
    pub fn drive_coupling(&self) -> CMatrix {
        &self.a_dag + &self.a_hat - &self.b_dag - &self.b_hat
    }

    /// Liouville indices `j·N + k` with `j, k ≤ N−2`.
    pub fn interior_indices(&self) -> Vec<usize> {
        interior_indices(self.dim)
    }
}

pub fn interior_indices(dim: usize) -> Vec<usize> {
    let mut idx = Vec::with_capacity((dim - 1) * (dim - 1));
    for j in 0..dim - 1 {
        for k in 0..dim - 1 {
            idx.push(j * dim + k);
        }
    }
    idx
}

/// Restricts both rows and columns of `m` to `indices`.
pub fn project(m: &CMatrix, indices: &[usize]) -> CMatrix {
    CMatrix::from_fn(indices.len(), indices.len(), |r, c| m[(indices[r], indices[c])])
}

/// `Ĥ₀` and `Ĝ` at one instant. `Ĥ₀` is Hermitian; `Ĝ` is real and only
/// symmetric when `μ = ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperHamiltonian {
    pub h0: CMatrix,
    pub g: CMatrix,
}

impl SuperHamiltonian {
    /// Non-Hermitian `Ĥ₀ + iĜ`.
    pub fn total(&self) -> CMatrix {
        &self.h0 + &self.g * C64::new(0.0, 1.0)
    }

    /// `−i(Ĥ₀ + iĜ)`, the generator of `d|ρ⟩/dt`.
    pub fn liouvillian(&self) -> CMatrix {
        self.total() * C64::new(0.0, -1.0)
    }
}

pub fn build_super_hamiltonian(params: &OscillatorParams, t: f64, sops: &SuperOperatorSet) -> SuperHamiltonian {
    let f = params.force().value(t);
    let h0 = &sops.n_hat * C64::new(params.omega(), 0.0) - sops.drive_coupling() * C64::new(f, 0.0);
    SuperHamiltonian { h0, g: dissipator(params, sops) }
}

fn dissipator(params: &OscillatorParams, sops: &SuperOperatorSet) -> CMatrix {
    &sops.k_minus * C64::new(params.mu(), 0.0) + &sops.k_plus * C64::new(params.nu(), 0.0)
        - &sops.k0 * C64::new(params.gamma_prime(), 0.0)
        + &sops.i_hat * C64::new(params.gamma(), 0.0)
}

/// Integrates the vectorized equation and unvectorizes on `t_grid`.
pub fn evolve_vectorized(
    rho0: &DensityMatrix,
    params: &OscillatorParams,
    t_grid: &[f64],
    control: &StepControl,
) -> Result<Trajectory> {
    check_grid_starts_at_zero(t_grid)?;
    let sops = build_superops(rho0.dim())?;
    // d|ρ⟩/dt = (−iωN̂ + Ĝ)|ρ⟩ + i f(t) (Â† + Â − B̂† − B̂)|ρ⟩
    let fixed = &sops.n_hat * C64::new(0.0, -params.omega()) + dissipator(params, &sops);
    let driven = sops.drive_coupling() * C64::new(0.0, 1.0);
    let force = params.force().clone();
    let has_force = !force.is_zero();

    let v0 = vec(rho0.matrix());
    let x0 = CMatrix::from_column_slice(v0.len(), 1, v0.as_slice());
    let mut diagnostics = Vec::new();
    let out = ode::dopri5(
        |t, x| {
            let mut dx = &fixed * x;
            if has_force {
                dx.gemm(C64::new(force.value(t), 0.0), &driven, x, C64::new(1.0, 0.0));
            }
            dx
        },
        &x0,
        t_grid,
        control,
        |info, x| {
            let rho = unvec(&x.column(0).into_owned()).expect("N² state");
            diagnostics.push(step_diagnostic(info, &rho));
        },
    )?;
    let states = out
        .states
        .into_iter()
        .map(|x| unvec(&x.column(0).into_owned()).map(DensityMatrix::from_matrix_unchecked))
        .collect::<Result<Vec<_>>>()?;
    let traj = Trajectory {
        times: t_grid.to_vec(),
        states,
        diagnostics,
        rejected_steps: out.rejected,
        error_estimate: out.error_estimate,
    };
    traj.warn_on_tail(crate::fock::Tolerances::default().tail_tol);
    Ok(traj)
}
