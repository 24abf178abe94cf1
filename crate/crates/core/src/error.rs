use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("site {site} out of range for {n_qubits} qubits")]
    SiteOutOfRange { site: usize, n_qubits: usize },

    #[error("duplicate site {0} in Pauli string")]
    DuplicateSite(usize),

    #[error("invalid Pauli string {0:?}")]
    PauliParse(String),

    #[error("unknown term label {0:?}")]
    UnknownLabel(String),

    #[error("duplicate term label {0:?}")]
    DuplicateLabel(String),

    #[error("non-finite coefficient in term {0:?}")]
    NonFiniteCoefficient(String),

    #[error("qubit count mismatch: expected {expected}, found {found}")]
    QubitMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("operator is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("segment duration must be positive, got {0}")]
    NonPositiveDuration(f64),

    #[error("integrator step {step} exceeds evolution time {t}")]
    DegenerateStep { step: f64, t: f64 },

    #[error("time grid must be strictly increasing and non-negative")]
    BadTimeGrid,

    #[error("mask length {found} does not match {expected} terms")]
    MaskLength { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no worker converged within {steps} steps (best population {best_population:.6})")]
    NoConvergence { steps: usize, best_population: f64 },

    #[error("unknown preset {0:?}")]
    UnknownPreset(String),

    #[error("preset {0} has no multi-basis rotation")]
    NoRotation(String),

    #[error("term {label:?} straddles the subsystem boundary")]
    StraddlingTerm { label: String },
}
