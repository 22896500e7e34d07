//! Two-qubit density matrices and small Hermitian linear algebra.

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::sim::Pauli;

pub type PairVector = Vector4<C64>;

/// 4×4 density matrix of a qubit pair; the first qubit is the high local bit.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(Matrix4<C64>);

impl DensityMatrix {
    /// Wraps a matrix without checking physicality.
    pub fn new(m: Matrix4<C64>) -> Self {
        Self(m)
    }

    pub fn from_pure(psi: &PairVector) -> Self {
        Self(psi * psi.adjoint())
    }

    pub fn from_dmatrix(m: &nalgebra::DMatrix<C64>) -> Result<Self> {
        if m.shape() != (4, 4) {
            return Err(Error::InvalidConfig(format!("expected a 4x4 matrix, got {:?}", m.shape())));
        }
        Ok(Self(Matrix4::from_fn(|r, c| m[(r, c)])))
    }

    pub fn maximally_mixed() -> Self {
        Self(Matrix4::identity() * C64::new(0.25, 0.0))
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.0
    }

    pub fn into_inner(self) -> Matrix4<C64> {
        self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (self.0 - self.0.adjoint()).camax() <= tol
    }

    /// Eigen-decomposition of the Hermitian part (ρ + ρ†)/2.
    /// Eigenvalues are returned in ascending order with matching columns.
    pub fn eigen(&self) -> (Vector4<f64>, Matrix4<C64>) {
        hermitian_eigen(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().0.min()
    }

    /// Conjugates the second qubit by a single-qubit unitary.
    pub fn conjugate_second(&self, u: &Matrix2<C64>) -> Self {
        let full = Matrix2::identity().kronecker(u);
        Self(full * self.0 * full.adjoint())
    }

    /// Applies a depolarizing channel of strength `p` to the second qubit:
    /// ρ → (1−p)ρ + p/3 Σ_{P∈{X,Y,Z}} (I⊗P)ρ(I⊗P).
    pub fn depolarize_second(&self, p: f64) -> Self {
        if p == 0.0 {
            return self.clone();
        }
        let mut out = self.0 * C64::new(1.0 - p, 0.0);
        for pauli in [Pauli::X, Pauli::Y, Pauli::Z] {
            out += self.conjugate_second(&pauli_matrix(pauli)).0 * C64::new(p / 3.0, 0.0);
        }
        Self(out)
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let (evals, _) = hermitian_eigen(&(self.0 - other.0));
        0.5 * evals.iter().map(|x| x.abs()).sum::<f64>()
    }

    /// Weighted sum of matrices; weights are not normalized here.
    pub fn weighted_sum<'a>(items: impl IntoIterator<Item = (&'a DensityMatrix, f64)>) -> Self {
        let mut out = Matrix4::zeros();
        for (rho, w) in items {
            out += rho.0 * C64::new(w, 0.0);
        }
        Self(out)
    }
}

/// Symmetrizes then diagonalizes; eigenvalues ascending.
pub fn hermitian_eigen(m: &Matrix4<C64>) -> (Vector4<f64>, Matrix4<C64>) {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = Vector4::from_fn(|i, _| eig.eigenvalues[order[i]]);
    let vectors = Matrix4::from_fn(|r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn pauli_matrix(p: Pauli) -> Matrix2<C64> {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::i();
    match p {
        Pauli::I => Matrix2::new(l, o, o, l),
        Pauli::X => Matrix2::new(o, l, l, o),
        Pauli::Y => Matrix2::new(o, -i, i, o),
        Pauli::Z => Matrix2::new(l, o, o, -l),
    }
}

pub fn hadamard_matrix() -> Matrix2<C64> {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Matrix2::new(h, h, h, -h)
}

/// The two-qubit graph state ½(|00⟩ + |01⟩ + |10⟩ − |11⟩).
pub fn graph_pair() -> PairVector {
    let h = C64::new(0.5, 0.0);
    Vector4::new(h, h, h, -h)
}
