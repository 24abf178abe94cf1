//! Piecewise-constant unitary evolution and Lindblad dephasing dynamics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{commutator, DenseOperator, Direction, C64, HERMITIAN_TOL};
use crate::pauli::{Axis, PauliString};
use crate::state::{fidelity, SystemState};

#[derive(Debug, Clone)]
pub struct Segment {
    pub operator: DenseOperator,
    pub duration: f64,
    pub direction: Direction,
}

/// Ordered constant-Hamiltonian segments.
#[derive(Debug, Clone, Default)]
pub struct PiecewiseSchedule {
    segments: Vec<Segment>,
}

impl PiecewiseSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, operator: DenseOperator, duration: f64, direction: Direction) -> Result<()> {
        if !(duration > 0.0) {
            return Err(Error::NonPositiveDuration(duration));
        }
        if let Some(first) = self.segments.first() {
            if first.operator.dim() != operator.dim() {
                return Err(Error::DimensionMismatch { expected: first.operator.dim(), found: operator.dim() });
            }
        }
        self.segments.push(Segment { operator, duration, direction });
        Ok(())
    }

    pub fn with(mut self, operator: DenseOperator, duration: f64, direction: Direction) -> Result<Self> {
        self.push(operator, duration, direction)?;
        Ok(self)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Product of segment propagators, last segment leftmost.
    pub fn propagator(&self, n_qubits: usize) -> Result<DenseOperator> {
        let mut acc = DenseOperator::identity(n_qubits);
        for seg in &self.segments {
            let eig = seg.operator.eigh()?;
            let u = DenseOperator::new_unchecked(eig.propagator(seg.duration, seg.direction), n_qubits);
            acc = u.try_mul(&acc)?;
        }
        Ok(acc)
    }
}

/// Applies each segment unitary in order to a pure state.
pub fn evolve_piecewise(s: &SystemState, sched: &PiecewiseSchedule) -> Result<SystemState> {
    let SystemState::Pure { amplitudes, n_qubits } = s else {
        return Err(Error::InvalidState("piecewise evolution needs a pure state".into()));
    };
    let mut psi = amplitudes.clone();
    for seg in sched.segments() {
        if seg.operator.dim() != psi.len() {
            return Err(Error::DimensionMismatch { expected: psi.len(), found: seg.operator.dim() });
        }
        psi = seg.operator.eigh()?.apply_propagator(seg.duration, seg.direction, &psi);
    }
    Ok(SystemState::pure_unchecked(psi, *n_qubits))
}

/// How dephasing collapse operators are placed on a register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DephasingPlacement {
    /// One `√(γ/2)·σ_z^{(i)}` per qubit.
    PerQubit,
    /// A single `√(γ/2)·Σ_i σ_z^{(i)}` (global field noise).
    #[default]
    Collective,
}

#[derive(Debug, Clone)]
pub struct LindbladSpec {
    pub collapse_operators: Vec<DenseOperator>,
    /// Fixed RK4 step; `None` selects the default rule.
    pub integrator_step: Option<f64>,
}

impl LindbladSpec {
    pub fn closed() -> Self {
        Self { collapse_operators: Vec::new(), integrator_step: None }
    }

    pub fn dephasing(n_qubits: usize, gamma_phi: f64, placement: DephasingPlacement) -> Result<Self> {
        let amp = (gamma_phi / 2.0).sqrt();
        let zs: Vec<DenseOperator> =
            (0..n_qubits).map(|q| PauliString::single(q, Axis::Z).to_matrix(n_qubits)).collect::<Result<_>>()?;
        let ops = match placement {
            DephasingPlacement::PerQubit => zs.into_iter().map(|z| z.scaled(amp)).collect(),
            DephasingPlacement::Collective => {
                let mut total = DenseOperator::zeros(n_qubits);
                for z in &zs {
                    total = total.try_add(z)?;
                }
                vec![total.scaled(amp)]
            }
        };
        Ok(Self { collapse_operators: ops, integrator_step: None })
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.integrator_step = Some(step);
        self
    }

    /// `min(1/(100·f_max), t/1000)`, `f_max` in Hz from the largest entry of
    /// `h` or of any collapse operator's rate.
    pub fn default_step(&self, h: &DenseOperator, t: f64) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        let rate = self.collapse_operators.iter().fold(0.0f64, |m, l| m.max(l.max_abs().powi(2)));
        let f_max = (h.max_abs().max(rate) / two_pi).max(f64::MIN_POSITIVE);
        (1.0 / (100.0 * f_max)).min(t / 1000.0)
    }
}

struct Liouvillian {
    h: DMatrix<C64>,
    jumps: Vec<(DMatrix<C64>, DMatrix<C64>)>,
    /// `½ Σ L†L`
    damping: DMatrix<C64>,
}

impl Liouvillian {
    fn new(h: &DenseOperator, lind: &LindbladSpec) -> Result<Self> {
        let dim = h.dim();
        let mut damping = DMatrix::zeros(dim, dim);
        let mut jumps = Vec::new();
        for l in &lind.collapse_operators {
            if l.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: l.dim() });
            }
            let ld = l.matrix().adjoint();
            damping += &ld * l.matrix() * C64::new(0.5, 0.0);
            jumps.push((l.matrix().clone(), ld));
        }
        Ok(Self { h: h.matrix().clone(), jumps, damping })
    }

    /// `−i[H,ρ] + Σ LρL† − ½{L†L, ρ}`
    fn rhs(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let minus_i = C64::new(0.0, -1.0);
        let mut out = commutator(&self.h, rho) * minus_i;
        for (l, ld) in &self.jumps {
            out += l * rho * ld;
        }
        out -= &self.damping * rho + rho * &self.damping;
        out
    }

    fn rk4_step(&self, rho: &DMatrix<C64>, dt: f64) -> DMatrix<C64> {
        let half = C64::new(dt / 2.0, 0.0);
        let full = C64::new(dt, 0.0);
        let k1 = self.rhs(rho);
        let k2 = self.rhs(&(rho + &k1 * half));
        let k3 = self.rhs(&(rho + &k2 * half));
        let k4 = self.rhs(&(rho + &k3 * full));
        rho + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0)
    }

    /// Integrates over `t` with steps no longer than `step`.
    fn advance(&self, rho: DMatrix<C64>, t: f64, step: f64) -> DMatrix<C64> {
        if t <= 0.0 {
            return rho;
        }
        let n = (t / step).ceil().max(1.0) as usize;
        let dt = t / n as f64;
        (0..n).fold(rho, |r, _| self.rk4_step(&r, dt))
    }
}

fn check_lindblad_inputs(rho0: &SystemState, h: &DenseOperator) -> Result<()> {
    if rho0.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: rho0.dim() });
    }
    if !h.is_hermitian(HERMITIAN_TOL) {
        return Err(Error::NotHermitian(h.hermiticity_error()));
    }
    Ok(())
}

/// Fixed-step RK4 integration of the Lindblad master equation.
pub fn evolve_lindblad(rho0: &SystemState, h: &DenseOperator, lind: &LindbladSpec, t: f64) -> Result<SystemState> {
    check_lindblad_inputs(rho0, h)?;
    if t < 0.0 {
        return Err(Error::BadTimeGrid);
    }
    let step = lind.integrator_step.unwrap_or_else(|| lind.default_step(h, t));
    if t > 0.0 && step > t {
        return Err(Error::DegenerateStep { step, t });
    }
    let liou = Liouvillian::new(h, lind)?;
    let rho = liou.advance(rho0.density_matrix(), t, step);
    Ok(SystemState::mixed_unchecked(rho, h.n_qubits()))
}

/// Density matrices along a strictly increasing time grid.
pub fn density_trajectory(
    rho0: &SystemState,
    h: &DenseOperator,
    lind: &LindbladSpec,
    t_grid: &[f64],
) -> Result<Vec<SystemState>> {
    check_lindblad_inputs(rho0, h)?;
    check_grid(t_grid)?;
    let t_end = *t_grid.last().unwrap();
    let step = lind.integrator_step.unwrap_or_else(|| {
        if t_end > 0.0 {
            lind.default_step(h, t_end)
        } else {
            f64::INFINITY
        }
    });
    if t_end > 0.0 && step > t_end {
        return Err(Error::DegenerateStep { step, t: t_end });
    }
    let liou = Liouvillian::new(h, lind)?;
    let mut rho = rho0.density_matrix();
    let mut now = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        rho = liou.advance(rho, t - now, step);
        now = t;
        out.push(SystemState::mixed_unchecked(rho.clone(), h.n_qubits()));
    }
    Ok(out)
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid[0] < 0.0 || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::BadTimeGrid);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationRow {
    pub time: f64,
    pub populations: Vec<f64>,
}

/// Basis populations at each grid time under Lindblad evolution.
pub fn population_trajectory(
    rho0: &SystemState,
    h: &DenseOperator,
    lind: &LindbladSpec,
    t_grid: &[f64],
) -> Result<Vec<PopulationRow>> {
    Ok(density_trajectory(rho0, h, lind, t_grid)?
        .into_iter()
        .zip(t_grid)
        .map(|(s, &time)| PopulationRow { time, populations: s.basis_populations() })
        .collect())
}

/// Ideal pure-state evolution on a time grid, exact via eigendecomposition.
pub fn unitary_trajectory(psi0: &SystemState, h: &DenseOperator, t_grid: &[f64]) -> Result<Vec<SystemState>> {
    check_grid(t_grid)?;
    let SystemState::Pure { amplitudes, n_qubits } = psi0 else {
        return Err(Error::InvalidState("unitary trajectory needs a pure state".into()));
    };
    let eig = h.eigh()?;
    Ok(t_grid
        .iter()
        .map(|&t| SystemState::pure_unchecked(eig.apply_propagator(t, Direction::Forward, amplitudes), *n_qubits))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityRow {
    pub time: f64,
    pub fidelity: f64,
    pub ideal_populations: Vec<f64>,
    pub actual_populations: Vec<f64>,
}

/// `F̃(t)` between ideal unitary dynamics under `ideal` and open dynamics
/// under `actual` with `lind`, both starting from `psi0`.
pub fn fidelity_trajectory(
    psi0: &SystemState,
    ideal: &DenseOperator,
    actual: &DenseOperator,
    lind: &LindbladSpec,
    t_grid: &[f64],
) -> Result<Vec<FidelityRow>> {
    let ideal_states = unitary_trajectory(psi0, ideal, t_grid)?;
    let actual_states = density_trajectory(psi0, actual, lind, t_grid)?;
    ideal_states
        .iter()
        .zip(&actual_states)
        .zip(t_grid)
        .map(|((a, b), &time)| {
            Ok(FidelityRow {
                time,
                fidelity: fidelity(a, b)?,
                ideal_populations: a.basis_populations(),
                actual_populations: b.basis_populations(),
            })
        })
        .collect()
}

/// First time the centered moving average of `values` (window `window`
/// seconds on a uniform grid) drops below `level`.
///
/// Oscillating fidelity curves cross a level several times; the smoothed
/// crossing reports where the envelope decays through it.
pub fn smoothed_crossing(times: &[f64], values: &[f64], window: f64, level: f64) -> Option<f64> {
    if times.len() < 2 || times.len() != values.len() {
        return None;
    }
    let dt = times[1] - times[0];
    let half = ((window / dt) / 2.0).round() as usize;
    let mut prefix = vec![0.0];
    for v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    (half..values.len().saturating_sub(half)).find_map(|i| {
        let mean = (prefix[i + half + 1] - prefix[i - half]) / (2 * half + 1) as f64;
        (mean < level).then_some(times[i])
    })
}

/// First grid time at which `values` drops below `level`.
pub fn first_crossing(times: &[f64], values: &[f64], level: f64) -> Option<f64> {
    times.iter().zip(values).find(|(_, &v)| v < level).map(|(&t, _)| t)
}

/// Echo product `e^{+iτ(H+δH₂)} e^{−iτ(H+δH₁)}`.
pub fn echo_product(h: &DenseOperator, dh1: &DenseOperator, dh2: &DenseOperator, tau: f64) -> Result<DenseOperator> {
    PiecewiseSchedule::new()
        .with(h.try_add(dh1)?, tau, Direction::Forward)?
        .with(h.try_add(dh2)?, tau, Direction::Reverse)?
        .propagator(h.n_qubits())
}

/// Second-order BCH estimate of the echo product:
/// `exp(iτ(δH₂ − δH₁) + (τ²/2)[H+δH₂, H+δH₁])`.
///
/// The exponent is anti-Hermitian, so it is evaluated as `e^{−iG}` with
/// `G = i·exponent` Hermitian.
pub fn bch_echo_prediction(
    h: &DenseOperator,
    dh1: &DenseOperator,
    dh2: &DenseOperator,
    tau: f64,
) -> Result<DenseOperator> {
    let a = h.try_add(dh1)?;
    let b = h.try_add(dh2)?;
    let diff = dh2.matrix() - dh1.matrix();
    let exponent = diff * C64::new(0.0, tau) + commutator(b.matrix(), a.matrix()) * C64::new(tau * tau / 2.0, 0.0);
    let g = DenseOperator::new_unchecked(exponent * C64::new(0.0, 1.0), h.n_qubits());
    crate::operator::expm_hermitian(&g, 1.0, Direction::Forward)
}

/// `(‖P − Q‖_F, ‖P − Q‖_F / ‖P − I‖_F)` for the echo product `P` and its
/// BCH estimate `Q`.
pub fn bch_echo_deviation(
    h: &DenseOperator,
    dh1: &DenseOperator,
    dh2: &DenseOperator,
    tau: f64,
) -> Result<(f64, f64)> {
    let p = echo_product(h, dh1, dh2, tau)?;
    let q = bch_echo_prediction(h, dh1, dh2, tau)?;
    let abs = (p.matrix() - q.matrix()).norm();
    let effect = (p.matrix() - DenseOperator::identity(h.n_qubits()).into_matrix()).norm();
    Ok((abs, abs / effect))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use crate::pauli::{build_operator, Hamiltonian, PauliTermSum, Summand};

    fn single(axis: Axis, c: f64) -> DenseOperator {
        PauliString::single(0, axis).to_matrix(1).unwrap().scaled(c)
    }

    #[test]
    fn empty_schedule_is_identity() {
        let s = SystemState::basis(1, 1).unwrap();
        assert_eq!(evolve_piecewise(&s, &PiecewiseSchedule::new()).unwrap(), s);
    }

    #[test]
    fn echo_returns_input() {
        let h = single(Axis::X, 3.0).try_add(&single(Axis::Z, 1.2)).unwrap();
        let sched = PiecewiseSchedule::new()
            .with(h.clone(), 0.7, Direction::Forward)
            .unwrap()
            .with(h, 0.7, Direction::Reverse)
            .unwrap();
        let s = SystemState::basis(1, 0).unwrap();
        let out = evolve_piecewise(&s, &sched).unwrap();
        assert!((fidelity(&s, &out).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn schedule_rejects_bad_segments() {
        assert!(matches!(
            PiecewiseSchedule::new().with(single(Axis::X, 1.0), 0.0, Direction::Forward),
            Err(Error::NonPositiveDuration(_))
        ));
        let two = DenseOperator::zeros(2);
        assert!(PiecewiseSchedule::new()
            .with(single(Axis::X, 1.0), 1.0, Direction::Forward)
            .unwrap()
            .with(two, 1.0, Direction::Forward)
            .is_err());
    }

    #[test]
    fn pure_dephasing_matches_closed_form() {
        let gamma = 2.0;
        let lind = LindbladSpec::dephasing(1, gamma, DephasingPlacement::PerQubit).unwrap().with_step(1e-4);
        let plus = SystemState::pure(DVector::from_element(2, C64::new(0.5f64.sqrt(), 0.0))).unwrap();
        for t in [0.1, 0.5, 1.3] {
            let out = evolve_lindblad(&plus, &DenseOperator::zeros(1), &lind, t).unwrap();
            let rho = out.density_matrix();
            assert!((rho[(0, 1)].re - 0.5 * (-gamma * t).exp()).abs() < 1e-10);
            assert!((rho[(0, 0)].re - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_limit_matches_unitary() {
        let h = Hamiltonian::new(
            1,
            vec![PauliTermSum::new("x", vec![Summand::new(10.0, PauliString::single(0, Axis::X))])],
        )
        .unwrap();
        let op = build_operator(&h, None).unwrap();
        let s0 = SystemState::basis(1, 0).unwrap();
        let open = evolve_lindblad(&s0, &op, &LindbladSpec::closed(), 0.3).unwrap();
        let closed = unitary_trajectory(&s0, &op, &[0.3]).unwrap().remove(0);
        assert!(1.0 - fidelity(&open, &closed).unwrap() < 1e-6);
    }

    #[test]
    fn step_larger_than_time_rejected() {
        let lind = LindbladSpec::closed().with_step(1.0);
        let s0 = SystemState::basis(1, 0).unwrap();
        assert!(matches!(
            evolve_lindblad(&s0, &DenseOperator::zeros(1), &lind, 0.5),
            Err(Error::DegenerateStep { .. })
        ));
    }

    #[test]
    fn grid_must_increase() {
        let s0 = SystemState::basis(1, 0).unwrap();
        let lind = LindbladSpec::closed();
        let h = DenseOperator::zeros(1);
        assert!(population_trajectory(&s0, &h, &lind, &[0.0, 0.0]).is_err());
        let rows = population_trajectory(&s0, &h, &lind, &[0.0]).unwrap();
        assert_eq!(rows[0].populations, vec![1.0, 0.0]);
    }

    #[test]
    fn smoothed_crossing_of_ramp() {
        let times: Vec<f64> = (0..101).map(|i| i as f64 * 0.01).collect();
        let values: Vec<f64> = times.iter().map(|t| 1.0 - t).collect();
        let t = smoothed_crossing(&times, &values, 0.1, 0.5).unwrap();
        assert!((t - 0.51).abs() < 1e-9);
        assert_eq!(first_crossing(&times, &values, 0.5), Some(times[51]));
    }
}
