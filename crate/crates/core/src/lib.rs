//! Numerical workbench for verifying analog quantum simulators.
//!
//! The crate provides dense n-qubit linear algebra ([`operator`], [`pauli`],
//! [`state`]), closed- and open-system time evolution ([`dynamics`]),
//! parametric noise channels acting on Hamiltonian term coefficients
//! ([`noise`]), an annealed Markov-chain search that approximately compiles
//! an inversion sequence out of Hamiltonian-term layers ([`compiler`]), and
//! the three verification protocols built on top of them ([`protocols`]):
//!
//! * time-reversal (Loschmidt echo) verification,
//! * multi-basis verification, where the reverse evolution runs under a
//!   unitarily rotated copy of the Hamiltonian,
//! * randomized analog verification, which runs random sequences of
//!   term-subset evolutions followed by an independently compiled inverse.
//!
//! Concrete model Hamiltonians and the lattice subsystem enumerator live in
//! [`models`] and [`lattice`].
//!
//! Basis ordering is fixed throughout: qubit 0 is the most significant bit of
//! a computational basis index, so `|10⟩` on two qubits is index 2.

pub mod compiler;
pub mod dynamics;
pub mod error;
pub mod lattice;
pub mod models;
pub mod noise;
pub mod operator;
pub mod pauli;
pub mod protocols;
pub mod rng;
pub mod state;
pub mod terms;

pub use error::{Error, Result};
pub use operator::{C64, DenseOperator, Direction};
pub use pauli::{Axis, Hamiltonian, PauliString, PauliTermSum, Summand};
pub use state::SystemState;
