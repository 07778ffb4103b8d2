//! Expectation values, state diagnostics and distances.

use nalgebra::SymmetricEigen;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{CMatrix, DensityMatrix, FockOperators};

/// Hilbert–Schmidt product `tr(A†B)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Result<C64> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "inner product of {}x{} and {}x{} matrices",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableReport {
    pub t: f64,
    pub mean_n: f64,
    pub mean_a: C64,
    /// `tr ρ²`.
    pub purity: f64,
    pub trace_err: f64,
    pub herm_defect: f64,
    pub min_eig: f64,
    /// Population of the highest retained level.
    pub tail_pop: f64,
}

pub fn report(rho: &DensityMatrix, ops: &FockOperators, t: f64) -> ObservableReport {
    let m = rho.matrix();
    let mean_n = (0..rho.dim()).map(|i| i as f64 * m[(i, i)].re).sum();
    let mean_a = (&ops.lower * m).trace();
    ObservableReport {
        t,
        mean_n,
        mean_a,
        purity: hs_inner(m, m).map(|p| p.re).unwrap_or(f64::NAN),
        trace_err: rho.trace_error(),
        herm_defect: rho.hermiticity_defect(),
        min_eig: rho.min_eigenvalue(),
        tail_pop: rho.tail_population(),
    }
}

/// `½·Σ|eigenvalues of ρ₁ − ρ₂|`, from the Hermitized difference.
pub fn trace_distance(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::Shape(format!("trace distance between dimensions {} and {}", rho1.dim(), rho2.dim())));
    }
    let diff = rho1.matrix() - rho2.matrix();
    let herm = (&diff + diff.adjoint()) * C64::new(0.5, 0.0);
    Ok(0.5 * SymmetricEigen::new(herm).eigenvalues.iter().map(|e| e.abs()).sum::<f64>())
}
