//! Pure and mixed n-qubit states.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operator::{HermitianEigen, C64};

const NORM_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum SystemState {
    Pure { amplitudes: DVector<C64>, n_qubits: usize },
    Mixed { rho: DMatrix<C64>, n_qubits: usize },
}

impl SystemState {
    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::InvalidState(format!("basis index {index} out of range for dimension {dim}")));
        }
        let mut v = DVector::zeros(dim);
        v[index] = C64::new(1.0, 0.0);
        Ok(Self::Pure { amplitudes: v, n_qubits })
    }

    pub fn pure(amplitudes: DVector<C64>) -> Result<Self> {
        let n_qubits = qubits_for(amplitudes.len())?;
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("vector norm {norm} differs from 1")));
        }
        Ok(Self::Pure { amplitudes, n_qubits })
    }

    /// Normalizes `amplitudes` before wrapping; rejects the zero vector.
    pub fn pure_normalized(amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize zero vector".into()));
        }
        Self::pure(amplitudes / C64::new(norm, 0.0))
    }

    pub(crate) fn pure_unchecked(amplitudes: DVector<C64>, n_qubits: usize) -> Self {
        Self::Pure { amplitudes, n_qubits }
    }

    pub fn mixed(rho: DMatrix<C64>) -> Result<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(Error::InvalidState("density matrix is not square".into()));
        }
        let n_qubits = qubits_for(rho.nrows())?;
        let herm = (&rho - rho.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if herm > NORM_TOL {
            return Err(Error::InvalidState(format!("density matrix not Hermitian ({herm:.3e})")));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let eig = HermitianEigen::new_unchecked(&rho);
        let min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self::Mixed { rho, n_qubits })
    }

    pub(crate) fn mixed_unchecked(rho: DMatrix<C64>, n_qubits: usize) -> Self {
        Self::Mixed { rho, n_qubits }
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            Self::Pure { n_qubits, .. } | Self::Mixed { n_qubits, .. } => *n_qubits,
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits()
    }

    pub fn amplitudes(&self) -> Option<&DVector<C64>> {
        match self {
            Self::Pure { amplitudes, .. } => Some(amplitudes),
            Self::Mixed { .. } => None,
        }
    }

    /// Density matrix; pure states are promoted to `|ψ⟩⟨ψ|`.
    pub fn density_matrix(&self) -> DMatrix<C64> {
        match self {
            Self::Pure { amplitudes, .. } => amplitudes * amplitudes.adjoint(),
            Self::Mixed { rho, .. } => rho.clone(),
        }
    }

    pub fn to_mixed(&self) -> Self {
        Self::Mixed { rho: self.density_matrix(), n_qubits: self.n_qubits() }
    }

    /// `|⟨b|ψ⟩|²` or `diag(ρ)`, indexed with qubit 0 as the most significant bit.
    pub fn basis_populations(&self) -> Vec<f64> {
        match self {
            Self::Pure { amplitudes, .. } => amplitudes.iter().map(|a| a.norm_sqr()).collect(),
            Self::Mixed { rho, .. } => (0..rho.nrows()).map(|i| rho[(i, i)].re).collect(),
        }
    }

    /// Trace distance from normalization plus Hermiticity residual.
    pub fn validity_error(&self) -> f64 {
        match self {
            Self::Pure { amplitudes, .. } => (amplitudes.norm() - 1.0).abs(),
            Self::Mixed { rho, .. } => {
                let herm = (rho - rho.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
                (rho.trace() - C64::new(1.0, 0.0)).norm().max(herm)
            }
        }
    }
}

fn qubits_for(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::InvalidState(format!("dimension {dim} is not a power of two")));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Index of the most populated basis state, lowest index on ties.
pub fn argmax_population(pops: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &p) in pops.iter().enumerate() {
        if p > best.1 {
            best = (i, p);
        }
    }
    best
}

/// Uhlmann fidelity `[tr √(√ρ σ √ρ)]²`, clamped to `[0, 1]`.
///
/// Pure inputs use the overlap forms `|⟨ψ|φ⟩|²` and `⟨ψ|σ|ψ⟩`.
pub fn fidelity(a: &SystemState, b: &SystemState) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let f = match (a, b) {
        (SystemState::Pure { amplitudes: x, .. }, SystemState::Pure { amplitudes: y, .. }) => x.dotc(y).norm_sqr(),
        (SystemState::Pure { amplitudes: psi, .. }, SystemState::Mixed { rho, .. })
        | (SystemState::Mixed { rho, .. }, SystemState::Pure { amplitudes: psi, .. }) => psi.dotc(&(rho * psi)).re,
        (SystemState::Mixed { rho, .. }, SystemState::Mixed { rho: sigma, .. }) => {
            let sqrt_rho = HermitianEigen::new_unchecked(rho).map(|l| C64::new(l.max(0.0).sqrt(), 0.0));
            let inner = &sqrt_rho * sigma * &sqrt_rho;
            let eig = HermitianEigen::new_unchecked(&inner);
            let tr: f64 = eig.values.iter().map(|&l| l.max(0.0).sqrt()).sum();
            tr * tr
        }
    };
    Ok(f.clamp(0.0, 1.0))
}
