use std::f64::consts::PI;

use analog_verify::models::{build_preset, preset_rotation, PresetName};
use analog_verify::operator::*;
use analog_verify::pauli::build_operator;
use analog_verify::state::fidelity;
use analog_verify::{Axis, PauliString, SystemState, C64};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn pauli2(axis: char) -> DMatrix<C64> {
    let i = C64::i();
    match axis {
        'I' => DMatrix::identity(2, 2),
        'X' => DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]),
        'Y' => DMatrix::from_row_slice(2, 2, &[c(0.0), -i, i, c(0.0)]),
        'Z' => DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]),
        _ => unreachable!(),
    }
}

fn kron2(a: char, b: char) -> DMatrix<C64> {
    pauli2(a).kronecker(&pauli2(b))
}

#[test]
fn ising_operator_matches_kronecker_products() {
    let (j, b) = (2.0 * PI * 139.0, 2.0 * PI * 227.0);
    let expected = kron2('X', 'X') * c(-j / 2.0) + (kron2('Y', 'I') + kron2('I', 'Y')) * c(-b / 2.0);
    let built = build_operator(&build_preset(PresetName::Ising2Q), None).unwrap();
    assert!((built.matrix() - expected).camax() < 1e-9);
}

#[test]
fn pauli_strings_follow_msb_ordering() {
    let zx = PauliString::pair((0, Axis::Z), (1, Axis::X)).unwrap().to_matrix(2).unwrap();
    assert!((zx.matrix() - kron2('Z', 'X')).camax() < 1e-15);
    let y1 = PauliString::single(1, Axis::Y).to_matrix(2).unwrap();
    assert!((y1.matrix() - kron2('I', 'Y')).camax() < 1e-15);
}

#[test]
fn sqrt_sigma_y_maps_xx_to_zz() {
    let xx = PauliString::pair((0, Axis::X), (1, Axis::X)).unwrap().to_matrix(2).unwrap();
    let zz = PauliString::pair((0, Axis::Z), (1, Axis::Z)).unwrap().to_matrix(2).unwrap();
    let r = global_rotation(Axis::Y, PI / 2.0, 2).unwrap();
    assert!(conjugate_operator(&xx, &r).unwrap().max_diff(&zz) < 1e-12);
}

#[test]
fn z_rotation_sign_for_the_field_term() {
    let field = |axis| {
        PauliString::single(0, axis)
            .to_matrix(2)
            .unwrap()
            .try_add(&PauliString::single(1, axis).to_matrix(2).unwrap())
            .unwrap()
    };
    let (x, y) = (field(Axis::X), field(Axis::Y));
    let minus = conjugate_operator(&y, &global_rotation(Axis::Z, -PI / 2.0, 2).unwrap()).unwrap();
    assert!(minus.max_diff(&x) < 1e-12);
    let plus = conjugate_operator(&y, &global_rotation(Axis::Z, PI / 2.0, 2).unwrap()).unwrap();
    assert!(plus.max_diff(&x.scaled(-1.0)) < 1e-12);
    assert_eq!(preset_rotation(PresetName::Ising2Q).unwrap(), global_rotation(Axis::Z, -PI / 2.0, 2).unwrap());
}

#[test]
fn identity_conjugation_leaves_hamiltonian_unchanged() {
    let h = build_preset(PresetName::Heisenberg5Q);
    let dense = build_operator(&h, None).unwrap();
    let out = conjugate_hamiltonian(&h, &DenseOperator::identity(5)).unwrap();
    assert!(out.max_diff(&dense) < 1e-12);
}

#[test]
fn forward_reverse_of_ising_over_one_millisecond() {
    let h = build_operator(&build_preset(PresetName::Ising2Q), None).unwrap();
    let f = expm_hermitian(&h, 1e-3, Direction::Forward).unwrap();
    let r = expm_hermitian(&h, 1e-3, Direction::Reverse).unwrap();
    assert!(r.try_mul(&f).unwrap().max_diff(&DenseOperator::identity(2)) < 1e-9);
}

#[test]
fn rabi_populations() {
    let x = PauliString::single(0, Axis::X).to_matrix(1).unwrap();
    let u = expm_hermitian(&x, PI / 4.0, Direction::Forward).unwrap();
    let psi = SystemState::pure(u.apply(&DVector::from_vec(vec![c(1.0), c(0.0)])).unwrap()).unwrap();
    let p = psi.basis_populations();
    assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
}

// random Hermitian matrix from a flat list of reals
fn hermitian(n_qubits: usize, raw: &[f64]) -> DenseOperator {
    let d = 1 << n_qubits;
    let mut m = DMatrix::<C64>::zeros(d, d);
    let mut it = raw.iter().cycle();
    for i in 0..d {
        m[(i, i)] = c(*it.next().unwrap());
        for j in i + 1..d {
            let z = C64::new(*it.next().unwrap(), *it.next().unwrap());
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    DenseOperator::from_matrix(m, n_qubits).unwrap()
}

fn random_state(n_qubits: usize, raw: &[f64]) -> SystemState {
    let d = 1 << n_qubits;
    let v: Vec<C64> = (0..d).map(|i| C64::new(raw[(2 * i) % raw.len()], raw[(2 * i + 1) % raw.len()])).collect();
    let v = DVector::from_vec(v);
    if v.norm() < 1e-6 {
        return SystemState::basis(n_qubits, 0).unwrap();
    }
    SystemState::pure_normalized(v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn propagators_are_unitary(n in 1usize..=4, raw in prop::collection::vec(-5.0f64..5.0, 8..64), t in -3.0f64..3.0) {
        let h = hermitian(n, &raw);
        let u = expm_hermitian(&h, t, Direction::Forward).unwrap();
        prop_assert!(u.unitarity_error() < 1e-9);
    }

    #[test]
    fn forward_then_reverse_is_identity(n in 1usize..=4, raw in prop::collection::vec(-5.0f64..5.0, 8..64), t in 0.0f64..3.0) {
        let h = hermitian(n, &raw);
        let f = expm_hermitian(&h, t, Direction::Forward).unwrap();
        let r = expm_hermitian(&h, t, Direction::Reverse).unwrap();
        prop_assert!(r.try_mul(&f).unwrap().max_diff(&DenseOperator::identity(n)) < 1e-9);
    }

    #[test]
    fn conjugation_preserves_spectrum(
        n in 1usize..=3,
        raw in prop::collection::vec(-5.0f64..5.0, 8..64),
        angles in prop::collection::vec(-PI..PI, 3),
        site in 0usize..3,
    ) {
        let h = hermitian(n, &raw);
        let site = site % n;
        let r = single_qubit_rotation(Axis::X, angles[0], site, n).unwrap()
            .try_mul(&single_qubit_rotation(Axis::Y, angles[1], (site + 1) % n, n).unwrap()).unwrap()
            .try_mul(&global_rotation(Axis::Z, angles[2], n).unwrap()).unwrap();
        let rotated = conjugate_operator(&h, &r).unwrap();
        prop_assert!(rotated.hermiticity_error() < 1e-8);
        let (a, b) = (h.eigenvalues().unwrap(), rotated.eigenvalues().unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn populations_are_a_distribution(n in 1usize..=5, raw in prop::collection::vec(-1.0f64..1.0, 2..64)) {
        let s = random_state(n, &raw);
        for state in [s.clone(), s.to_mixed()] {
            let p = state.basis_populations();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
        }
    }

    #[test]
    fn fidelity_is_bounded_and_symmetric(
        n in 1usize..=3,
        a in prop::collection::vec(-1.0f64..1.0, 2..16),
        b in prop::collection::vec(-1.0f64..1.0, 2..16),
    ) {
        let (x, y) = (random_state(n, &a), random_state(n, &b));
        let f = fidelity(&x, &y).unwrap();
        prop_assert!((0.0..=1.0 + 1e-9).contains(&f));
        prop_assert!((f - fidelity(&y, &x).unwrap()).abs() < 1e-8);
        prop_assert!((fidelity(&x, &x).unwrap() - 1.0).abs() < 1e-9);
        // mixed representations agree with the overlap formula
        let mixed = fidelity(&x.to_mixed(), &y.to_mixed()).unwrap();
        prop_assert!((mixed - f).abs() < 1e-6);
    }
}
