//! Named model Hamiltonians and their multi-basis rotations.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{global_rotation, DenseOperator};
use crate::pauli::{Axis, Hamiltonian, PauliString, PauliTermSum, Summand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PresetName {
    /// Two-site transverse-field Ising model, field grouped into one term.
    Ising2Q,
    /// Five-site Heisenberg chain with longitudinal fields.
    Heisenberg5Q,
    /// Two-site Ising model at the fast (20 kHz) randomized-study scale.
    RavIsing2Q,
    /// Two-site Heisenberg model with fields on all three axes, nine terms.
    RavHeisenberg2Q,
}

impl PresetName {
    pub const ALL: [PresetName; 4] =
        [PresetName::Ising2Q, PresetName::Heisenberg5Q, PresetName::RavIsing2Q, PresetName::RavHeisenberg2Q];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Ising2Q => "Ising2Q",
            PresetName::Heisenberg5Q => "Heisenberg5Q",
            PresetName::RavIsing2Q => "RavIsing2Q",
            PresetName::RavHeisenberg2Q => "RavHeisenberg2Q",
        }
    }

    /// Default parameters, angular frequencies in rad/s.
    pub fn default_params(self) -> BTreeMap<String, f64> {
        let hz = |f: f64| 2.0 * PI * f;
        let pairs: &[(&str, f64)] = match self {
            PresetName::Ising2Q => &[("J", hz(139.0)), ("b", hz(227.0))],
            PresetName::Heisenberg5Q => &[("b", hz(1e3)), ("Jx", hz(1e3)), ("Jy", hz(1e3)), ("Jz", hz(1e3))],
            PresetName::RavIsing2Q => &[("J", hz(20e3)), ("b", hz(20e3))],
            PresetName::RavHeisenberg2Q => &[("b", hz(20e3)), ("Jx", hz(20e3)), ("Jy", hz(20e3)), ("Jz", hz(20e3))],
        };
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

pub fn build_preset(name: PresetName) -> Hamiltonian {
    build_preset_with(name, &BTreeMap::new()).expect("default preset parameters are valid")
}

/// Builds a preset with parameter overrides (rad/s); unknown keys are errors.
pub fn build_preset_with(name: PresetName, overrides: &BTreeMap<String, f64>) -> Result<Hamiltonian> {
    let mut params = name.default_params();
    for (k, v) in overrides {
        match params.get_mut(k) {
            Some(slot) if v.is_finite() && *v > 0.0 => *slot = *v,
            Some(_) => return Err(Error::InvalidConfig(format!("parameter {k} must be positive, got {v}"))),
            None => return Err(Error::UnknownLabel(k.clone())),
        }
    }
    let p = |k: &str| params[k];
    let z = |s: &str| -> PauliString { s.parse().expect("static Pauli string") };
    let term = |label: String, summands: Vec<(f64, PauliString)>| {
        PauliTermSum::new(label, summands.into_iter().map(|(c, s)| Summand::new(c, s)).collect())
    };
    let (n, terms) = match name {
        PresetName::Ising2Q | PresetName::RavIsing2Q => (
            2,
            vec![
                term("b".into(), vec![(-p("b") / 2.0, z("Y0")), (-p("b") / 2.0, z("Y1"))]),
                term("J".into(), vec![(-p("J") / 2.0, z("X0 X1"))]),
            ],
        ),
        PresetName::Heisenberg5Q => {
            let mut terms = Vec::new();
            for i in 0..5 {
                terms.push(term(format!("b{i}"), vec![(-p("b") / 2.0, PauliString::single(i, Axis::Z))]));
            }
            for i in 0..4 {
                for (key, axis) in [("Jx", Axis::X), ("Jy", Axis::Y), ("Jz", Axis::Z)] {
                    let s = PauliString::pair((i, axis), (i + 1, axis))?;
                    terms.push(term(format!("{key}{i}{}", i + 1), vec![(-p(key) / 2.0, s)]));
                }
            }
            (5, terms)
        }
        PresetName::RavHeisenberg2Q => {
            let mut terms = Vec::new();
            for site in 0..2 {
                for (name, axis) in [("x", Axis::X), ("y", Axis::Y), ("z", Axis::Z)] {
                    terms.push(term(format!("b{name}{site}"), vec![(-p("b") / 2.0, PauliString::single(site, axis))]));
                }
            }
            for (key, axis) in [("Jx", Axis::X), ("Jy", Axis::Y), ("Jz", Axis::Z)] {
                terms.push(term(key.to_string(), vec![(-p(key) / 2.0, PauliString::pair((0, axis), (1, axis))?)]));
            }
            (2, terms)
        }
    };
    Hamiltonian::new(n, terms)
}

/// Basis change used by the multi-basis protocol.
///
/// `Ising2Q` uses a global z rotation chosen so that `σ_y → σ_x` and
/// `σ_xσ_x → σ_yσ_y`; with `R(θ) = e^{−iθσ/2}` that is `R_z(−π/2)` on each
/// site. `Heisenberg5Q` uses a global `R_y(π/2)`, which maps its `σ_z`
/// fields onto `σ_x` fields.
pub fn preset_rotation(name: PresetName) -> Result<DenseOperator> {
    match name {
        PresetName::Ising2Q => global_rotation(Axis::Z, -PI / 2.0, 2),
        PresetName::Heisenberg5Q => global_rotation(Axis::Y, PI / 2.0, 5),
        other => Err(Error::NoRotation(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{conjugate_hamiltonian, conjugate_operator};
    use crate::pauli::build_operator;

    #[test]
    fn term_counts() {
        assert_eq!(build_preset(PresetName::Ising2Q).n_terms(), 2);
        let h5 = build_preset(PresetName::Heisenberg5Q);
        assert_eq!(h5.n_terms(), 17);
        assert_eq!(h5.terms.iter().filter(|t| t.label.starts_with('b')).count(), 5);
        assert_eq!(build_preset(PresetName::RavHeisenberg2Q).n_terms(), 9);
        assert_eq!(build_preset(PresetName::RavIsing2Q).n_terms(), 2);
    }

    #[test]
    fn ising_parameters() {
        let h = build_preset(PresetName::Ising2Q);
        let b = &h.terms[0];
        assert_eq!(b.summands.len(), 2);
        assert!((b.summands[0].coefficient + PI * 227.0).abs() < 1e-9);
        assert!((h.terms[1].summands[0].coefficient + PI * 139.0).abs() < 1e-9);
    }

    #[test]
    fn heisenberg_all_at_one_khz() {
        let h = build_preset(PresetName::Heisenberg5Q);
        for t in &h.terms {
            assert_eq!(t.summands.len(), 1);
            assert!((t.summands[0].coefficient + PI * 1e3).abs() < 1e-9, "{}", t.label);
        }
        let h2 = build_preset(PresetName::RavHeisenberg2Q);
        assert!(h2.terms.iter().all(|t| (t.summands[0].coefficient + PI * 20e3).abs() < 1e-6));
    }

    #[test]
    fn unknown_names_and_params() {
        assert!(matches!("Ising3Q".parse::<PresetName>(), Err(Error::UnknownPreset(_))));
        let mut ov = BTreeMap::new();
        ov.insert("K".to_string(), 1.0);
        assert!(build_preset_with(PresetName::Ising2Q, &ov).is_err());
        assert!(matches!(preset_rotation(PresetName::RavIsing2Q), Err(Error::NoRotation(_))));
    }

    #[test]
    fn ising_rotation_maps_terms() {
        let r = preset_rotation(PresetName::Ising2Q).unwrap();
        assert!(r.try_mul(&r.adjoint()).unwrap().max_diff(&DenseOperator::identity(2)) < 1e-12);
        let xx = "X0 X1".parse::<PauliString>().unwrap().to_matrix(2).unwrap();
        let yy = "Y0 Y1".parse::<PauliString>().unwrap().to_matrix(2).unwrap();
        assert!(conjugate_operator(&xx, &r).unwrap().max_diff(&yy) < 1e-12);
        let h = build_preset(PresetName::Ising2Q);
        let rotated = conjugate_hamiltonian(&h, &r).unwrap();
        let original = build_operator(&h, None).unwrap();
        let (a, b) = (rotated.eigenvalues().unwrap(), original.eigenvalues().unwrap());
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-8));
    }
}
