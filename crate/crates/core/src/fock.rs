//! Truncated Fock-space operators and the matrix plumbing built on them.
//!
//! Basis states are indexed `0..N`. Vectorization is row-major, so
//! `vec(A·X·B) = kron(A, Bᵀ)·vec(X)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Ladder, number and identity operators on the first `dim` number states.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperators {
    pub dim: usize,
    /// Annihilation operator `a`.
    pub lower: CMatrix,
    /// Creation operator `a†`.
    pub raise: CMatrix,
    /// Number operator `a†a`, diagonal `0, 1, …, N−1`.
    pub number: CMatrix,
    pub identity: CMatrix,
}

pub fn build_ladder_ops(dim: usize) -> Result<FockOperators> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim });
    }
    let lower = CMatrix::from_fn(dim, dim, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    });
    let raise = lower.adjoint();
    let number = CMatrix::from_diagonal(&CVector::from_fn(dim, |i, _| C64::new(i as f64, 0.0)));
    Ok(FockOperators {
        dim,
        lower,
        raise,
        number,
        identity: CMatrix::identity(dim, dim),
    })
}

impl FockOperators {
    pub fn new(dim: usize) -> Result<Self> {
        build_ladder_ops(dim)
    }

    /// Diagonal matrix `exp(z·n̂)`, exact entry by entry.
    pub fn exp_number(&self, z: C64) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_fn(self.dim, |i, _| (z * i as f64).exp()))
    }

    /// `â + â†`.
    pub fn position_like(&self) -> CMatrix {
        &self.lower + &self.raise
    }
}

/// Kronecker product with layout `(A⊗B)[i·n+k, j·n+l] = A[i,j]·B[k,l]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() || !b.is_square() {
        return Err(Error::Shape(format!(
            "kron expects square factors, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(a.kronecker(b))
}

/// Row-major stacking `(x₀₀, x₀₁, …, x₁₀, …)`.
pub fn vec(x: &CMatrix) -> CVector {
    let (r, c) = x.shape();
    CVector::from_fn(r * c, |idx, _| x[(idx / c, idx % c)])
}

pub fn unvec(x: &CVector) -> Result<CMatrix> {
    let len = x.len();
    let n = (len as f64).sqrt().round() as usize;
    if n * n != len {
        return Err(Error::Shape(format!("vector length {len} is not a perfect square")));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| x[i * n + j]))
}

/// `D(α) = exp(α·a† − α*·a)`.
///
/// Unitary only up to truncation leakage; see [`boundary_weight`].
pub fn displacement(alpha: C64, ops: &FockOperators) -> CMatrix {
    if alpha == ZERO {
        return ops.identity.clone();
    }
    let generator = &ops.raise * alpha - &ops.lower * alpha.conj();
    generator.exp()
}

/// `a·X·a†` from the ladder structure: `√(i+1)·√(j+1)·X[i+1, j+1]`.
pub fn sandwich_lower(x: &CMatrix) -> CMatrix {
    let n = x.nrows();
    CMatrix::from_fn(n, n, |i, j| {
        if i + 1 < n && j + 1 < n {
            x[(i + 1, j + 1)] * (((i + 1) as f64).sqrt() * ((j + 1) as f64).sqrt())
        } else {
            ZERO
        }
    })
}

/// `a†·X·a` from the ladder structure: `√i·√j·X[i−1, j−1]`.
pub fn sandwich_raise(x: &CMatrix) -> CMatrix {
    let n = x.nrows();
    CMatrix::from_fn(n, n, |i, j| {
        if i >= 1 && j >= 1 {
            x[(i - 1, j - 1)] * ((i as f64).sqrt() * (j as f64).sqrt())
        } else {
            ZERO
        }
    })
}

/// Norm of the last row and column together. Measures how much of an
/// operator or state touches the truncation boundary.
pub fn boundary_weight(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let last = n - 1;
    let mut sum = 0.0;
    for j in 0..m.ncols() {
        sum += m[(last, j)].norm_sqr();
    }
    for i in 0..last {
        sum += m[(i, m.ncols() - 1)].norm_sqr();
    }
    sum.sqrt()
}

/// `exp(s·H)` for Hermitian `H` through its eigendecomposition.
pub fn exp_hermitian(h: &CMatrix, s: f64) -> CMatrix {
    let herm = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let weights = eig.eigenvalues.map(|e| C64::new((s * e).exp(), 0.0));
    let v = &eig.eigenvectors;
    v * CMatrix::from_diagonal(&weights) * v.adjoint()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Acceptance thresholds for a physical density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub herm_tol: f64,
    pub trace_tol: f64,
    pub pos_tol: f64,
    pub tail_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm_tol: 1e-10,
            trace_tol: 1e-10,
            pos_tol: 1e-8,
            tail_tol: 1e-10,
        }
    }
}

/// An `N×N` density matrix.
///
/// Construction only checks the shape; [`DensityMatrix::validate`] checks
/// the physical invariants against a set of [`Tolerances`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    data: CMatrix,
}

impl DensityMatrix {
    pub fn new(data: CMatrix) -> Result<Self> {
        if !data.is_square() {
            return Err(Error::Shape(format!(
                "density matrix must be square, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.nrows() < 2 {
            return Err(Error::InvalidDimension { dim: data.nrows() });
        }
        Ok(Self { data })
    }

    pub(crate) fn from_matrix_unchecked(data: CMatrix) -> Self {
        debug_assert!(data.is_square());
        Self { data }
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(psi: &CVector) -> Result<Self> {
        Self::new(psi * psi.adjoint())
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        Self::fock_state(dim, 0)
    }

    pub fn fock_state(dim: usize, n: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension { dim });
        }
        if n >= dim {
            return Err(Error::Domain(format!("Fock level {n} outside truncation {dim}")));
        }
        let mut data = CMatrix::zeros(dim, dim);
        data[(n, n)] = ONE;
        Ok(Self { data })
    }

    /// `|α⟩⟨α|` with `|α⟩ = D(α)|0⟩`.
    pub fn coherent(alpha: C64, ops: &FockOperators) -> Self {
        let psi = displacement(alpha, ops).column(0).into_owned();
        Self { data: &psi * psi.adjoint() }
    }

    /// Geometric state `(1−u)·uⁿ`, not renormalized after truncation.
    pub fn thermal(u: f64, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension { dim });
        }
        if !(0.0..1.0).contains(&u) {
            return Err(Error::Domain(format!("thermal weight u = {u} must lie in [0, 1)")));
        }
        let diag = CVector::from_fn(dim, |i, _| C64::new((1.0 - u) * u.powi(i as i32), 0.0));
        Ok(Self { data: CMatrix::from_diagonal(&diag) })
    }

    /// `D(α)·ρ_th(u)·D(α)†`.
    pub fn thermal_coherent(alpha: C64, u: f64, ops: &FockOperators) -> Result<Self> {
        let th = Self::thermal(u, ops.dim)?;
        let d = displacement(alpha, ops);
        Ok(Self { data: &d * th.data * d.adjoint() })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn trace_error(&self) -> f64 {
        (self.trace() - ONE).norm()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.data)
    }

    pub fn tail_population(&self) -> f64 {
        let n = self.dim() - 1;
        self.data[(n, n)].re
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.data + self.data.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let herm = self.hermiticity_defect();
        if herm > tol.herm_tol {
            return Err(Error::Domain(format!("Hermiticity defect {herm:e} exceeds {:e}", tol.herm_tol)));
        }
        let tr = self.trace_error();
        if tr > tol.trace_tol {
            return Err(Error::Domain(format!("trace error {tr:e} exceeds {:e}", tol.trace_tol)));
        }
        let min = self.min_eigenvalue();
        if min < -tol.pos_tol {
            return Err(Error::Domain(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        max_abs(&(&self.data - &other.data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn two_level_ladder() {
        let ops = build_ladder_ops(2).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert_eq!(ops.lower, expected);
        assert_eq!(ops.raise, expected.transpose());
    }

    #[test]
    fn rejects_tiny_truncation() {
        assert_eq!(build_ladder_ops(1), Err(Error::InvalidDimension { dim: 1 }));
        assert!(build_ladder_ops(0).is_err());
    }

    #[test]
    fn number_operator_diagonal() {
        let ops = build_ladder_ops(4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { c(i as f64) } else { ZERO };
                assert_eq!(ops.number[(i, j)], expected);
            }
        }
        assert!(max_abs(&(&ops.raise * &ops.lower - &ops.number)) < 1e-14);
    }

    #[test]
    fn canonical_commutator_broken_only_at_top_level() {
        let ops = build_ladder_ops(5).unwrap();
        let defect = commutator(&ops.lower, &ops.raise) - &ops.identity;
        for i in 0..5 {
            for j in 0..5 {
                if (i, j) == (4, 4) {
                    assert!((defect[(i, j)] - c(-5.0)).norm() < 1e-12);
                } else {
                    assert!(defect[(i, j)].norm() < 1e-12, "({i},{j}) = {}", defect[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn ladder_sandwiches_match_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ops = build_ladder_ops(7).unwrap();
        let x = random_matrix(&mut rng, 7);
        assert!(max_abs(&(sandwich_lower(&x) - &ops.lower * &x * &ops.raise)) < 1e-13);
        assert!(max_abs(&(sandwich_raise(&x) - &ops.raise * &x * &ops.lower)) < 1e-13);
    }

    #[test]
    fn kron_with_identity_is_block_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_matrix(&mut rng, 3);
        let k = kron(&CMatrix::identity(2, 2), &b).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let expected = if i / 3 == j / 3 { b[(i % 3, j % 3)] } else { ZERO };
                assert_eq!(k[(i, j)], expected);
            }
        }
    }

    #[test]
    fn kron_rejects_rectangular() {
        let a = CMatrix::zeros(2, 3);
        assert!(matches!(kron(&a, &a), Err(Error::Shape(_))));
    }

    #[test]
    fn kron_exponential_of_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_matrix(&mut rng, 2);
        let b = random_matrix(&mut rng, 2);
        let i2 = CMatrix::identity(2, 2);
        let lhs = (kron(&a, &i2).unwrap() + kron(&i2, &b).unwrap()).exp();
        let rhs = kron(&a.clone().exp(), &b.clone().exp()).unwrap();
        assert!(max_abs(&(lhs - rhs)) < 1e-12);
    }

    #[test]
    fn vec_is_row_major() {
        let x = CMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(3.0), c(4.0)]);
        let v = vec(&x);
        assert_eq!(v.as_slice(), &[c(1.0), c(2.0), c(3.0), c(4.0)]);
    }

    #[test]
    fn unvec_rejects_non_square_length() {
        assert!(matches!(unvec(&CVector::zeros(5)), Err(Error::Shape(_))));
    }

    #[test]
    fn vec_transports_sandwich_and_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [3usize, 4] {
            let a = random_matrix(&mut rng, n);
            let b = random_matrix(&mut rng, n);
            let x = random_matrix(&mut rng, n);
            let id = CMatrix::identity(n, n);
            let lhs = vec(&(&a * &x * &b));
            let rhs = kron(&a, &b.transpose()).unwrap() * vec(&x);
            let scale = lhs.norm();
            assert!((lhs - rhs).norm() / scale < 1e-13);

            let lhs = vec(&(&a * &x + &x * &b));
            let gen = kron(&a, &id).unwrap() + kron(&id, &b.transpose()).unwrap();
            let rhs = gen * vec(&x);
            let scale = lhs.norm();
            assert!((lhs - rhs).norm() / scale < 1e-13);
        }
    }

    #[test]
    fn displacement_of_zero_is_identity() {
        let ops = build_ladder_ops(10).unwrap();
        assert_eq!(displacement(ZERO, &ops), ops.identity);
    }

    #[test]
    fn displacement_column_is_coherent_state() {
        let ops = build_ladder_ops(40).unwrap();
        let alpha = C64::new(0.7, 0.3);
        let d = displacement(alpha, &ops);
        // power series e^{-|α|²/2} αⁿ/√n!
        let mut amp = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
        for n in 0..40 {
            if n > 0 {
                amp *= alpha / (n as f64).sqrt();
            }
            assert!((d[(n, 0)] - amp).norm() < 1e-10, "n = {n}");
        }
    }

    #[test]
    fn displacement_is_unitary() {
        let ops = build_ladder_ops(40).unwrap();
        let d = displacement(C64::from_polar(1.0, 0.4), &ops);
        assert!(max_abs(&(&d * d.adjoint() - &ops.identity)) < 1e-10);
    }

    #[test]
    fn displacements_compose_with_phase() {
        let ops = build_ladder_ops(40).unwrap();
        let a = C64::new(0.6, -0.5);
        let b = C64::new(-0.3, 0.8);
        let lhs = displacement(a, &ops) * displacement(b, &ops);
        let phase = ((a * b.conj() - a.conj() * b) / 2.0).exp();
        let rhs = displacement(a + b, &ops) * phase;
        // products of truncated displacements are only exact away from the boundary
        let block = |m: &CMatrix| m.view((0, 0), (20, 20)).into_owned();
        assert!(max_abs(&(block(&lhs) - block(&rhs))) < 1e-8);
    }

    #[test]
    fn boundary_weight_tracks_top_level() {
        let ops = build_ladder_ops(30).unwrap();
        let small = boundary_weight(&DensityMatrix::coherent(C64::new(0.5, 0.0), &ops).into_matrix());
        let large = boundary_weight(&DensityMatrix::coherent(C64::new(4.0, 0.0), &ops).into_matrix());
        assert!(small < 1e-15);
        assert!(large > 1e-6);
    }

    #[test]
    fn exp_hermitian_matches_pade() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_matrix(&mut rng, 5);
        let h = &m + m.adjoint();
        let lhs = exp_hermitian(&h, -0.7);
        let rhs = (h * C64::new(-0.7, 0.0)).exp();
        assert!(max_abs(&(lhs - rhs)) < 1e-12);
    }

    #[test]
    fn standard_states_are_physical() {
        let ops = build_ladder_ops(40).unwrap();
        let tol = Tolerances::default();
        for rho in [
            DensityMatrix::vacuum(40).unwrap(),
            DensityMatrix::fock_state(40, 3).unwrap(),
            DensityMatrix::coherent(C64::new(0.5, 0.2), &ops),
            DensityMatrix::thermal(0.4, 40).unwrap(),
            DensityMatrix::thermal_coherent(C64::new(0.3, -0.4), 0.3, &ops).unwrap(),
        ] {
            rho.validate(&tol).unwrap();
            assert!(rho.tail_population() <= tol.tail_tol);
        }
    }

    #[test]
    fn invalid_states_are_rejected() {
        assert!(DensityMatrix::fock_state(4, 4).is_err());
        assert!(DensityMatrix::thermal(1.0, 4).is_err());
        assert!(DensityMatrix::new(CMatrix::zeros(2, 3)).is_err());
        let bad = DensityMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(1.5), ZERO, ZERO, c(-0.5)],
        ))
        .unwrap();
        assert!(bad.validate(&Tolerances::default()).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix(n: usize) -> impl Strategy<Value = CMatrix> {
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
                .prop_map(move |v| CMatrix::from_iterator(n, n, v.into_iter().map(|(r, i)| C64::new(r, i))))
        }

        fn pair(max: usize) -> impl Strategy<Value = (CMatrix, CMatrix, CMatrix, CMatrix)> {
            (1..=max, 1..=max).prop_flat_map(|(m, n)| (matrix(m), matrix(n), matrix(m), matrix(n)))
        }

        proptest! {
            #[test]
            fn mixed_product((a1, b1, a2, b2) in pair(5)) {
                let lhs = kron(&a1, &b1).unwrap() * kron(&a2, &b2).unwrap();
                let rhs = kron(&(&a1 * &a2), &(&b1 * &b2)).unwrap();
                prop_assert!(max_abs(&(lhs - rhs)) < 1e-12);
            }

            #[test]
            fn vec_round_trip_is_exact(n in 1usize..7, seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let x = random_matrix(&mut rng, n);
                prop_assert_eq!(unvec(&vec(&x)).unwrap(), x);
            }
        }
    }
}
