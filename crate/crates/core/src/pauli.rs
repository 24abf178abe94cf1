//! Pauli strings, labeled term sums and Hamiltonians.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{DenseOperator, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    fn letter(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }
}

/// Tensor product of single-site Pauli factors; absent sites carry identity.
///
/// Text form is whitespace-separated `<axis><site>` tokens, e.g. `"X0 X1"`;
/// `"I"` or the empty string denote the identity string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PauliString {
    factors: BTreeMap<usize, Axis>,
}

impl PauliString {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn single(site: usize, axis: Axis) -> Self {
        let mut factors = BTreeMap::new();
        factors.insert(site, axis);
        Self { factors }
    }

    pub fn pair(a: (usize, Axis), b: (usize, Axis)) -> Result<Self> {
        Self::from_factors([a, b])
    }

    pub fn from_factors(factors: impl IntoIterator<Item = (usize, Axis)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (site, axis) in factors {
            if map.insert(site, axis).is_some() {
                return Err(Error::DuplicateSite(site));
            }
        }
        Ok(Self { factors: map })
    }

    pub fn factors(&self) -> impl Iterator<Item = (usize, Axis)> + '_ {
        self.factors.iter().map(|(&s, &a)| (s, a))
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.factors.keys().copied()
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn max_site(&self) -> Option<usize> {
        self.factors.keys().next_back().copied()
    }

    /// Relabels sites through `map`; every site must be present.
    pub(crate) fn relabeled(&self, map: &HashMap<usize, usize>) -> Self {
        Self { factors: self.factors.iter().map(|(s, &a)| (map[s], a)).collect() }
    }

    /// Dense matrix on `n_qubits`, qubit 0 as the most significant bit.
    ///
    /// Each column is a signed, phased permutation: `P|c⟩ = i^{#Y} (−1)^{|c ∧ (Y∨Z)|} |c ⊕ (X∨Y)⟩`.
    pub fn to_matrix(&self, n_qubits: usize) -> Result<DenseOperator> {
        let (flip, phase_mask, n_y) = self.masks(n_qubits)?;
        let dim = 1usize << n_qubits;
        let base = match n_y % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for col in 0..dim {
            let row = col ^ flip;
            let sign = if (col & phase_mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[(row, col)] = base * sign;
        }
        Ok(DenseOperator::new_unchecked(m, n_qubits))
    }

    fn masks(&self, n_qubits: usize) -> Result<(usize, usize, u32)> {
        let mut flip = 0usize;
        let mut phase = 0usize;
        let mut n_y = 0u32;
        for (&site, &axis) in &self.factors {
            if site >= n_qubits {
                return Err(Error::SiteOutOfRange { site, n_qubits });
            }
            let bit = 1usize << (n_qubits - 1 - site);
            match axis {
                Axis::X => flip |= bit,
                Axis::Y => {
                    flip |= bit;
                    phase |= bit;
                    n_y += 1;
                }
                Axis::Z => phase |= bit,
            }
        }
        Ok((flip, phase, n_y))
    }

    /// All `4^n` Pauli strings on `n_qubits`, identity first.
    pub fn all(n_qubits: usize) -> impl Iterator<Item = PauliString> {
        (0..4usize.pow(n_qubits as u32)).map(move |mut code| {
            let mut factors = BTreeMap::new();
            for site in (0..n_qubits).rev() {
                match code % 4 {
                    1 => {
                        factors.insert(site, Axis::X);
                    }
                    2 => {
                        factors.insert(site, Axis::Y);
                    }
                    3 => {
                        factors.insert(site, Axis::Z);
                    }
                    _ => {}
                }
                code /= 4;
            }
            PauliString { factors }
        })
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("I");
        }
        let mut first = true;
        for (site, axis) in &self.factors {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{}{}", axis.letter(), site)?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        if trimmed.is_empty() || trimmed == "I" {
            return Ok(Self::identity());
        }
        let mut factors = Vec::new();
        for token in trimmed.split_whitespace() {
            let mut chars = token.chars();
            let axis = match chars.next().map(|c| c.to_ascii_uppercase()) {
                Some('X') => Axis::X,
                Some('Y') => Axis::Y,
                Some('Z') => Axis::Z,
                _ => return Err(Error::PauliParse(s.to_string())),
            };
            let site: usize = chars.as_str().parse().map_err(|_| Error::PauliParse(s.to_string()))?;
            factors.push((site, axis));
        }
        Self::from_factors(factors)
    }
}

impl TryFrom<String> for PauliString {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PauliString> for String {
    fn from(p: PauliString) -> String {
        p.to_string()
    }
}

/// One `coefficient × string` product; coefficients are angular frequencies (rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summand {
    pub coefficient: f64,
    pub pauli: PauliString,
}

impl Summand {
    pub fn new(coefficient: f64, pauli: PauliString) -> Self {
        Self { coefficient, pauli }
    }
}

fn default_enabled() -> bool {
    true
}

fn default_sign() -> i8 {
    1
}

/// A labeled, toggleable group of summands: one `H_i` of the term decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTermSum {
    pub label: String,
    pub summands: Vec<Summand>,
    #[serde(default = "default_enabled")]
    pub enabled: bool,
    #[serde(default = "default_sign")]
    pub sign: i8,
}

impl PauliTermSum {
    pub fn new(label: impl Into<String>, summands: Vec<Summand>) -> Self {
        Self { label: label.into(), summands, enabled: true, sign: 1 }
    }

    pub fn support(&self) -> BTreeSet<usize> {
        self.summands.iter().flat_map(|s| s.pauli.support()).collect()
    }

    /// `sign × Σ coefficient × P`, ignoring `enabled`.
    pub fn to_operator(&self, n_qubits: usize) -> Result<DenseOperator> {
        let mut acc = DenseOperator::zeros(n_qubits).into_matrix();
        let sign = if self.sign < 0 { -1.0 } else { 1.0 };
        for s in &self.summands {
            let p = s.pauli.to_matrix(n_qubits)?;
            acc += p.into_matrix() * C64::new(sign * s.coefficient, 0.0);
        }
        Ok(DenseOperator::new_unchecked(acc, n_qubits))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hamiltonian {
    pub n_qubits: usize,
    pub terms: Vec<PauliTermSum>,
}

impl Hamiltonian {
    pub fn new(n_qubits: usize, terms: Vec<PauliTermSum>) -> Result<Self> {
        let h = Self { n_qubits, terms };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > 12 {
            return Err(Error::InvalidConfig(format!("unsupported qubit count {}", self.n_qubits)));
        }
        let mut seen = BTreeSet::new();
        for term in &self.terms {
            if !seen.insert(term.label.as_str()) {
                return Err(Error::DuplicateLabel(term.label.clone()));
            }
            if term.sign != 1 && term.sign != -1 {
                return Err(Error::InvalidConfig(format!("term {:?} has sign {}", term.label, term.sign)));
            }
            for s in &term.summands {
                if !s.coefficient.is_finite() {
                    return Err(Error::NonFiniteCoefficient(term.label.clone()));
                }
                if let Some(site) = s.pauli.max_site() {
                    if site >= self.n_qubits {
                        return Err(Error::SiteOutOfRange { site, n_qubits: self.n_qubits });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|t| t.label.as_str())
    }

    pub fn term_index(&self, label: &str) -> Result<usize> {
        self.terms
            .iter()
            .position(|t| t.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Each term's full matrix (sign included, `enabled` ignored).
    pub fn term_operators(&self) -> Result<Vec<DenseOperator>> {
        self.terms.iter().map(|t| t.to_operator(self.n_qubits)).collect()
    }

    /// Largest summand magnitude in Hz (`|coefficient| / 2π`).
    pub fn max_frequency_hz(&self) -> f64 {
        self.terms
            .iter()
            .flat_map(|t| t.summands.iter())
            .fold(0.0_f64, |m, s| m.max(s.coefficient.abs()))
            / (2.0 * std::f64::consts::PI)
    }
}

/// Materializes `Σ_enabled sign × Σ coefficient × P`, with optional per-label
/// coefficient multipliers.
pub fn build_operator(h: &Hamiltonian, overrides: Option<&BTreeMap<String, f64>>) -> Result<DenseOperator> {
    h.validate()?;
    if let Some(map) = overrides {
        for label in map.keys() {
            h.term_index(label)?;
        }
    }
    let mut acc = DenseOperator::zeros(h.n_qubits).into_matrix();
    for term in h.terms.iter().filter(|t| t.enabled) {
        let factor = overrides.and_then(|m| m.get(&term.label)).copied().unwrap_or(1.0);
        acc += term.to_operator(h.n_qubits)?.into_matrix() * C64::new(factor, 0.0);
    }
    Ok(DenseOperator::new_unchecked(acc, h.n_qubits))
}

/// Pauli-basis coefficients `tr(P·A)/2^n` with magnitude above `cutoff`.
///
/// Diagnostic only; complexity is `4^n · 2^n`.
pub fn pauli_decompose(op: &DenseOperator, cutoff: f64) -> Vec<(PauliString, C64)> {
    let n = op.n_qubits();
    let dim = op.dim() as f64;
    PauliString::all(n)
        .filter_map(|p| {
            let pm = p.to_matrix(n).ok()?;
            // tr(P A) with P Hermitian: Σ conj(P_ij) A_ij
            let c = pm.matrix().dotc(op.matrix()) / dim;
            (c.norm() > cutoff).then_some((p, c))
        })
        .collect()
}
