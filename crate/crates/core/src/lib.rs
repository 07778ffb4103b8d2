//! Damped and driven quantum harmonic oscillator under Lindblad dynamics.
//!
//! The crate computes the closed-form density operator built from the
//! su(1,1) disentangling of the Liouville-space generator and checks it
//! against two brute-force integrators in a truncated Fock space:
//!
//! * [`lindblad`] integrates the master equation directly on `N×N` matrices.
//! * [`superop`] integrates the row-major vectorized equation with `N²×N²`
//!   Kronecker-product generators.
//! * [`analytic`] assembles the exact solution, the thermal coherent states
//!   and the limit cycle under harmonic driving.
//!
//! [`cli`] wires everything into the `lindblad-hosc` batch runner.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod fock;
pub mod lindblad;
pub mod observables;
pub mod ode;
pub mod quadrature;
pub mod superop;

pub use error::{Error, Result};
pub use fock::{CMatrix, DensityMatrix, FockOperators, Tolerances};
pub use lindblad::{ForceSpec, OscillatorParams, Trajectory};

pub use num_complex::Complex64 as C64;
