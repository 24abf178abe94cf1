//! Dense operators on n-qubit Hilbert spaces and the Hermitian exponential.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Axis, PauliString};

pub type C64 = nalgebra::Complex<f64>;

pub(crate) const UNITARY_TOL: f64 = 1e-9;
pub(crate) const HERMITIAN_TOL: f64 = 1e-8;

/// Sign of the time argument in `e^{∓iHt}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `e^{-iHt}`
    Forward,
    /// `e^{+iHt}`
    Reverse,
}

impl Direction {
    pub fn from_sign(sign: i8) -> Self {
        if sign >= 0 {
            Direction::Forward
        } else {
            Direction::Reverse
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Reverse => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Direction::Forward => Direction::Reverse,
            Direction::Reverse => Direction::Forward,
        }
    }
}

/// A `2^n × 2^n` complex matrix tagged with its qubit count.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: DMatrix<C64>,
    n_qubits: usize,
}

impl DenseOperator {
    pub fn from_matrix(matrix: DMatrix<C64>, n_qubits: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if matrix.nrows() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: matrix.nrows() });
        }
        if matrix.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: matrix.ncols() });
        }
        Ok(Self { matrix, n_qubits })
    }

    /// Infers the qubit count from a square power-of-two matrix.
    pub fn from_square(matrix: DMatrix<C64>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::DimensionMismatch { expected: dim.next_power_of_two(), found: dim });
        }
        Self::from_matrix(matrix, dim.trailing_zeros() as usize)
    }

    pub(crate) fn new_unchecked(matrix: DMatrix<C64>, n_qubits: usize) -> Self {
        debug_assert_eq!(matrix.nrows(), 1 << n_qubits);
        Self { matrix, n_qubits }
    }

    pub fn zeros(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        Self { matrix: DMatrix::zeros(dim, dim), n_qubits }
    }

    pub fn identity(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        Self { matrix: DMatrix::identity(dim, dim), n_qubits }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint(), n_qubits: self.n_qubits }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { matrix: &self.matrix * C64::new(factor, 0.0), n_qubits: self.n_qubits }
    }

    pub fn try_mul(&self, rhs: &DenseOperator) -> Result<Self> {
        self.check_same_dim(rhs)?;
        Ok(Self { matrix: &self.matrix * &rhs.matrix, n_qubits: self.n_qubits })
    }

    pub fn try_add(&self, rhs: &DenseOperator) -> Result<Self> {
        self.check_same_dim(rhs)?;
        Ok(Self { matrix: &self.matrix + &rhs.matrix, n_qubits: self.n_qubits })
    }

    pub fn apply(&self, v: &DVector<C64>) -> Result<DVector<C64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: v.len() });
        }
        Ok(&self.matrix * v)
    }

    fn check_same_dim(&self, rhs: &DenseOperator) -> Result<()> {
        if rhs.n_qubits != self.n_qubits {
            return Err(Error::QubitMismatch { expected: self.n_qubits, found: rhs.n_qubits });
        }
        Ok(())
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `max |A − A†|`, absolute.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol * self.max_abs().max(1.0)
    }

    /// `max |U†U − I|`.
    pub fn unitarity_error(&self) -> f64 {
        let prod = self.matrix.adjoint() * &self.matrix;
        max_deviation_from_identity(&prod)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    /// Eigendecomposition of a Hermitian operator.
    pub fn eigh(&self) -> Result<HermitianEigen> {
        if !self.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::NotHermitian(self.hermiticity_error()));
        }
        Ok(HermitianEigen::new_unchecked(&self.matrix))
    }

    /// Sorted real spectrum of a Hermitian operator.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut v: Vec<f64> = self.eigh()?.values.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    /// `max |A − B|` over entries.
    pub fn max_diff(&self, other: &DenseOperator) -> f64 {
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }
}

pub(crate) fn max_deviation_from_identity(m: &DMatrix<C64>) -> f64 {
    let mut worst = 0.0f64;
    for ((i, j), z) in m.iter().enumerate().map(|(k, z)| ((k % m.nrows(), k / m.nrows()), z)) {
        let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
        worst = worst.max((z - target).norm());
    }
    worst
}

/// Spectral decomposition `H = V diag(λ) V†`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<C64>,
}

impl HermitianEigen {
    /// Decomposes `m`, symmetrizing it first. The caller vouches for
    /// Hermiticity.
    pub(crate) fn new_unchecked(m: &DMatrix<C64>) -> Self {
        let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
        let eig = sym.symmetric_eigen();
        Self { values: eig.eigenvalues, vectors: eig.eigenvectors }
    }

    /// `V diag(f(λ)) V†`.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= w);
        }
        scaled * self.vectors.adjoint()
    }

    /// `e^{∓iHt}` as a matrix.
    pub fn propagator(&self, t: f64, direction: Direction) -> DMatrix<C64> {
        let s = -direction.sign() * t;
        self.map(|lambda| C64::from_polar(1.0, s * lambda))
    }

    /// `e^{∓iHt} ψ` without forming the propagator.
    pub fn apply_propagator(&self, t: f64, direction: Direction, psi: &DVector<C64>) -> DVector<C64> {
        let s = -direction.sign() * t;
        let mut coeffs = self.vectors.ad_mul(psi);
        for (c, &lambda) in coeffs.iter_mut().zip(self.values.iter()) {
            *c *= C64::from_polar(1.0, s * lambda);
        }
        &self.vectors * coeffs
    }
}

/// `e^{∓i·op·t}` by Hermitian eigendecomposition (forward = `−i`).
pub fn expm_hermitian(op: &DenseOperator, t: f64, direction: Direction) -> Result<DenseOperator> {
    let eig = op.eigh()?;
    Ok(DenseOperator::new_unchecked(eig.propagator(t, direction), op.n_qubits()))
}

/// `R_axis(θ) = e^{−iθσ/2}` acting on `site` of an `n_qubits` register.
pub fn single_qubit_rotation(axis: Axis, angle: f64, site: usize, n_qubits: usize) -> Result<DenseOperator> {
    if site >= n_qubits {
        return Err(Error::SiteOutOfRange { site, n_qubits });
    }
    let pauli = PauliString::single(site, axis).to_matrix(n_qubits)?;
    let dim = 1 << n_qubits;
    let (s, c) = (angle / 2.0).sin_cos();
    let m = DMatrix::<C64>::identity(dim, dim) * C64::new(c, 0.0) + pauli.into_matrix() * C64::new(0.0, -s);
    Ok(DenseOperator::new_unchecked(m, n_qubits))
}

/// The same single-qubit rotation applied on every site.
pub fn global_rotation(axis: Axis, angle: f64, n_qubits: usize) -> Result<DenseOperator> {
    let mut acc = DenseOperator::identity(n_qubits);
    for site in 0..n_qubits {
        acc = single_qubit_rotation(axis, angle, site, n_qubits)?.try_mul(&acc)?;
    }
    Ok(acc)
}

/// `R·H·R†` with a unitarity check on `r`.
pub fn conjugate_operator(h: &DenseOperator, r: &DenseOperator) -> Result<DenseOperator> {
    if !r.is_unitary(UNITARY_TOL) {
        return Err(Error::NotUnitary(r.unitarity_error()));
    }
    if h.n_qubits() != r.n_qubits() {
        return Err(Error::QubitMismatch { expected: h.n_qubits(), found: r.n_qubits() });
    }
    let m = r.matrix() * h.matrix() * r.matrix().adjoint();
    Ok(DenseOperator::new_unchecked(m, h.n_qubits()))
}

/// Rotated Hamiltonian `H' = R·H·R†` as a dense matrix.
pub fn conjugate_hamiltonian(h: &crate::pauli::Hamiltonian, r: &DenseOperator) -> Result<DenseOperator> {
    conjugate_operator(&crate::pauli::build_operator(h, None)?, r)
}

/// `min_φ ‖A − e^{iφ}B‖_F`.
pub fn distance_up_to_phase(a: &DenseOperator, b: &DenseOperator) -> f64 {
    let na = a.matrix().norm_squared();
    let nb = b.matrix().norm_squared();
    let overlap = b.matrix().dotc(a.matrix()).norm();
    (na + nb - 2.0 * overlap).max(0.0).sqrt()
}

/// Commutator `AB − BA`.
pub fn commutator(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a * b - b * a
}
