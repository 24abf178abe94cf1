//! Annealed Monte Carlo search for approximate inversion sequences.
//!
//! A sequence is a list of layers, each the evolution under a subset of the
//! Hamiltonian terms for a fixed duration and sign. The search grows and
//! trims a candidate inverse until the largest basis population of
//! `U_inv |φ⟩` reaches the threshold.

use std::collections::VecDeque;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::operator::{Direction, C64};
use crate::pauli::Hamiltonian;
use crate::rng::{stream, Domain};
use crate::state::{argmax_population, SystemState};
use crate::terms::{TermSet, WeightedOperator};

/// Set of term indices, stored as a bitset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermMask(u64);

impl TermMask {
    pub const MAX_TERMS: usize = 64;

    pub fn from_bits(bits: u64) -> Self {
        Self(bits)
    }

    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut bits = 0u64;
        for i in indices {
            if i >= Self::MAX_TERMS {
                return Err(Error::InvalidConfig(format!("term index {i} exceeds {}", Self::MAX_TERMS)));
            }
            bits |= 1 << i;
        }
        Ok(Self(bits))
    }

    pub fn all(m: usize) -> Self {
        Self(if m >= 64 { u64::MAX } else { (1u64 << m) - 1 })
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        i < 64 && self.0 >> i & 1 == 1
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&i| self.contains(i))
    }

    /// Per-term enabled flags for `m` terms.
    pub fn to_flags(self, m: usize) -> Vec<bool> {
        (0..m).map(|i| self.contains(i)).collect()
    }
}

impl fmt::Display for TermMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.indices().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", idx.join(","))
    }
}

impl Serialize for TermMask {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.indices())
    }
}

impl<'de> Deserialize<'de> for TermMask {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        TermMask::from_indices(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub terms: TermMask,
    pub sign: i8,
    pub duration: f64,
}

impl Layer {
    pub fn new(terms: TermMask, sign: i8, duration: f64) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidConfig("layer has no enabled terms".into()));
        }
        if sign != 1 && sign != -1 {
            return Err(Error::InvalidConfig(format!("layer sign must be ±1, got {sign}")));
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::NonPositiveDuration(duration));
        }
        Ok(Self { terms, sign, duration })
    }

    pub fn direction(&self) -> Direction {
        Direction::from_sign(self.sign)
    }

    /// Noiseless layer Hamiltonian, the sum of the enabled terms.
    pub fn hamiltonian(&self, terms: &TermSet) -> WeightedOperator {
        terms.weighted(&mask_weights(self.terms, terms.len()))
    }

    /// `e^{∓i H_S d}` with the sign selecting the direction.
    pub fn unitary(&self, terms: &TermSet) -> DMatrix<C64> {
        self.hamiltonian(terms).propagator(self.duration, self.direction())
    }
}

fn mask_weights(mask: TermMask, m: usize) -> Vec<f64> {
    (0..m).map(|k| if mask.contains(k) { 1.0 } else { 0.0 }).collect()
}

/// Sum over layers of the time each term is enabled.
pub fn enabled_time_per_term(layers: &[Layer], m: usize) -> Vec<f64> {
    let mut t = vec![0.0; m];
    for l in layers {
        for k in l.terms.indices().filter(|&k| k < m) {
            t[k] += l.duration;
        }
    }
    t
}

/// Average over terms of the enabled time.
pub fn effective_time(layers: &[Layer], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    enabled_time_per_term(layers, m).iter().sum::<f64>() / m as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompilerConfig {
    pub beta_initial: f64,
    pub beta_final: f64,
    pub threshold: f64,
    pub max_steps: usize,
    pub n_workers: usize,
    /// Steps each worker advances between convergence checks.
    pub round_steps: usize,
    pub seed: u64,
    /// Relative frequency of each proposal kind.
    pub proposals: ProposalWeights,
    /// Probability that a proposed layer includes each term, conditioned on
    /// a nonempty subset; one half is uniform over nonempty subsets.
    pub term_inclusion: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProposalWeights {
    pub append: f64,
    pub prepend: f64,
    pub remove_end: f64,
    pub remove_begin: f64,
}

impl Default for ProposalWeights {
    fn default() -> Self {
        Self { append: 0.25, prepend: 0.25, remove_end: 0.25, remove_begin: 0.25 }
    }
}

impl ProposalWeights {
    fn validate(&self) -> Result<()> {
        let w = [self.append, self.prepend, self.remove_end, self.remove_begin];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || self.append + self.prepend <= 0.0 {
            return Err(Error::InvalidConfig(format!("proposal weights {w:?} must be nonnegative with some addition")));
        }
        Ok(())
    }
}

impl Default for CompilerConfig {
    fn default() -> Self {
        Self {
            beta_initial: 5e-4,
            beta_final: 5e-6,
            threshold: 0.99,
            max_steps: 20_000,
            n_workers: 8,
            round_steps: 250,
            seed: 0,
            proposals: ProposalWeights::default(),
            term_inclusion: 0.5,
        }
    }
}

impl CompilerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.beta_final > 0.0 && self.beta_initial >= self.beta_final && self.beta_initial.is_finite()) {
            return bad(format!("need beta_initial ≥ beta_final > 0, got {} and {}", self.beta_initial, self.beta_final));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return bad(format!("threshold must lie in (0, 1], got {}", self.threshold));
        }
        if self.max_steps == 0 || self.n_workers == 0 || self.round_steps == 0 {
            return bad("max_steps, n_workers and round_steps must be positive".into());
        }
        if !(self.term_inclusion > 0.0 && self.term_inclusion <= 1.0) {
            return bad(format!("term_inclusion must lie in (0, 1], got {}", self.term_inclusion));
        }
        self.proposals.validate()
    }

    /// Annealing parameter at `step`, linear from initial to final.
    pub fn beta(&self, step: usize) -> f64 {
        if self.max_steps <= 1 {
            return self.beta_initial;
        }
        let frac = (step.min(self.max_steps - 1)) as f64 / (self.max_steps - 1) as f64;
        self.beta_initial + (self.beta_final - self.beta_initial) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledSequence {
    pub layers: Vec<Layer>,
    pub target_basis_state: usize,
    pub achieved_population: f64,
    pub steps_used: usize,
    pub worker_index: usize,
}

fn random_mask(rng: &mut ChaCha8Rng, m: usize) -> TermMask {
    if m >= 64 {
        loop {
            let b: u64 = rng.random();
            if b != 0 {
                return TermMask(b);
            }
        }
    }
    TermMask(rng.random_range(1..(1u64 << m)))
}

/// Nonempty subset with independent inclusion probability `q` per term.
fn biased_mask(rng: &mut ChaCha8Rng, m: usize, q: f64) -> TermMask {
    if q == 0.5 {
        return random_mask(rng, m);
    }
    loop {
        let mut bits = 0u64;
        for k in 0..m.min(64) {
            if rng.random::<f64>() < q {
                bits |= 1 << k;
            }
        }
        if bits != 0 {
            return TermMask(bits);
        }
    }
}

fn random_sign(rng: &mut ChaCha8Rng) -> i8 {
    if rng.random::<bool>() {
        1
    } else {
        -1
    }
}

fn check_terms(h: &Hamiltonian) -> Result<()> {
    if h.n_terms() == 0 || h.n_terms() > TermMask::MAX_TERMS {
        return Err(Error::InvalidConfig(format!("sequences need 1..={} terms, got {}", TermMask::MAX_TERMS, h.n_terms())));
    }
    Ok(())
}

/// `n` random layers of duration `2τ/n` and the state they produce from
/// basis state `initial`.
pub fn random_forward_sequence(
    h: &Hamiltonian,
    n: usize,
    tau: f64,
    initial: usize,
    seed: u64,
) -> Result<(Vec<Layer>, SystemState)> {
    check_terms(h)?;
    if n == 0 {
        return Err(Error::InvalidConfig("forward sequence needs at least one layer".into()));
    }
    let duration = 2.0 * tau / n as f64;
    let mut rng = stream(seed, Domain::Sequence, &[]);
    let m = h.n_terms();
    let layers = (0..n)
        .map(|_| {
            let mask = random_mask(&mut rng, m);
            Layer::new(mask, random_sign(&mut rng), duration)
        })
        .collect::<Result<Vec<_>>>()?;
    let terms = TermSet::new(h)?;
    let start = SystemState::basis(h.n_qubits, initial)?;
    let phi = replay(&start, &layers, &terms)?;
    Ok((layers, phi))
}

/// Applies `layers` in order to a pure state without noise.
pub fn replay(state: &SystemState, layers: &[Layer], terms: &TermSet) -> Result<SystemState> {
    let psi = state.amplitudes().ok_or_else(|| Error::InvalidState("replay needs a pure state".into()))?;
    if psi.len() != 1 << terms.n_qubits() {
        return Err(Error::DimensionMismatch { expected: 1 << terms.n_qubits(), found: psi.len() });
    }
    let mut v = psi.clone();
    for l in layers {
        v = l.hamiltonian(terms).evolve(l.duration, l.direction(), &v);
    }
    Ok(SystemState::pure_unchecked(v, terms.n_qubits()))
}

fn population_of(v: &DVector<C64>) -> (usize, f64) {
    let pops: Vec<f64> = v.iter().map(|a| a.norm_sqr()).collect();
    argmax_population(&pops)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub proposals: usize,
    pub accepted: usize,
    pub worse_proposed: usize,
    pub worse_accepted: usize,
    pub multiplications: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proposal {
    Append,
    Prepend,
    RemoveEnd,
    RemoveBegin,
}

/// One annealing chain.
///
/// The chain keeps `U = L_k ⋯ L_1` for its current layers and
/// `ψ = U|φ⟩`. Proposals are scored with vector propagations only; an
/// accepted proposal updates `U` by a single product with the added or
/// removed layer: `L·U`, `L†·U` or `U·L†`.
pub struct Search<'a> {
    terms: &'a TermSet,
    duration: f64,
    cfg: CompilerConfig,
    phi: DVector<C64>,
    layers: VecDeque<(Layer, WeightedOperator)>,
    u: DMatrix<C64>,
    psi: DVector<C64>,
    population: f64,
    target: usize,
    best: f64,
    step: usize,
    rng: ChaCha8Rng,
    beta_override: Option<f64>,
    stats: SearchStats,
}

impl<'a> Search<'a> {
    pub fn new(
        phi: &SystemState,
        terms: &'a TermSet,
        layer_duration: f64,
        cfg: &CompilerConfig,
        worker: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        let psi = phi.amplitudes().ok_or_else(|| Error::InvalidState("compiler needs a pure state".into()))?.clone();
        if psi.len() != terms.dim() {
            return Err(Error::DimensionMismatch { expected: terms.dim(), found: psi.len() });
        }
        if terms.is_empty() || terms.len() > TermMask::MAX_TERMS {
            return Err(Error::InvalidConfig(format!("sequences need 1..={} terms", TermMask::MAX_TERMS)));
        }
        if !(layer_duration > 0.0 && layer_duration.is_finite()) {
            return Err(Error::NonPositiveDuration(layer_duration));
        }
        let (target, population) = population_of(&psi);
        Ok(Self {
            terms,
            duration: layer_duration,
            cfg: *cfg,
            u: DMatrix::identity(psi.len(), psi.len()),
            phi: psi.clone(),
            psi,
            layers: VecDeque::new(),
            population,
            target,
            best: population,
            step: 0,
            rng: stream(cfg.seed, Domain::Compiler, &[worker as u64]),
            beta_override: None,
            stats: SearchStats::default(),
        })
    }

    /// Replaces the annealing schedule with a constant, for testing.
    pub fn set_beta_override(&mut self, beta: Option<f64>) {
        self.beta_override = beta;
    }

    pub fn converged(&self) -> bool {
        self.population >= self.cfg.threshold
    }

    pub fn population(&self) -> f64 {
        self.population
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn best_population(&self) -> f64 {
        self.best
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn stats(&self) -> SearchStats {
        self.stats
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layers(&self) -> Vec<Layer> {
        self.layers.iter().map(|(l, _)| *l).collect()
    }

    /// The incrementally maintained inverse unitary.
    pub fn tracked_unitary(&self) -> &DMatrix<C64> {
        &self.u
    }

    /// The inverse unitary rebuilt from the current layer list.
    pub fn recomputed_unitary(&self) -> DMatrix<C64> {
        let d = self.phi.len();
        self.layers.iter().fold(DMatrix::identity(d, d), |acc, (l, _)| l.unitary(self.terms) * acc)
    }

    fn beta(&self) -> f64 {
        self.beta_override.unwrap_or_else(|| self.cfg.beta(self.step))
    }

    fn draw_proposal(&mut self) -> Proposal {
        let w = self.cfg.proposals;
        let kinds = [
            (Proposal::Append, w.append),
            (Proposal::Prepend, w.prepend),
            (Proposal::RemoveEnd, w.remove_end),
            (Proposal::RemoveBegin, w.remove_begin),
        ];
        let total: f64 = kinds.iter().map(|k| k.1).sum();
        loop {
            let mut r: f64 = self.rng.random::<f64>() * total;
            let mut p = Proposal::Append;
            for (kind, weight) in kinds {
                if r < weight {
                    p = kind;
                    break;
                }
                r -= weight;
            }
            if matches!(p, Proposal::Append | Proposal::Prepend) || !self.layers.is_empty() {
                return p;
            }
        }
    }

    fn random_layer(&mut self) -> (Layer, WeightedOperator) {
        let mask = biased_mask(&mut self.rng, self.terms.len(), self.cfg.term_inclusion);
        let layer = Layer { terms: mask, sign: random_sign(&mut self.rng), duration: self.duration };
        let g = layer.hamiltonian(self.terms);
        (layer, g)
    }

    /// Performs one proposal and returns whether the chain has converged.
    pub fn step(&mut self) -> bool {
        let proposal = self.draw_proposal();
        let dt = self.duration;
        let fresh = match proposal {
            Proposal::Append | Proposal::Prepend => Some(self.random_layer()),
            Proposal::RemoveEnd | Proposal::RemoveBegin => None,
        };
        let candidate = match proposal {
            Proposal::Append => {
                let (l, g) = fresh.as_ref().unwrap();
                g.evolve(dt, l.direction(), &self.psi)
            }
            Proposal::Prepend => {
                let (l, g) = fresh.as_ref().unwrap();
                &self.u * g.evolve(dt, l.direction(), &self.phi)
            }
            Proposal::RemoveEnd => {
                let (l, g) = self.layers.back().expect("nonempty");
                g.evolve(dt, l.direction().flipped(), &self.psi)
            }
            Proposal::RemoveBegin => {
                let (l, g) = self.layers.front().expect("nonempty");
                &self.u * g.evolve(dt, l.direction().flipped(), &self.phi)
            }
        };
        let (_, p) = population_of(&candidate);
        let dp = p - self.population;
        let beta = self.beta();
        self.stats.proposals += 1;
        if dp < 0.0 {
            self.stats.worse_proposed += 1;
        }
        let accept = dp > 0.0 || self.rng.random::<f64>() < (dp / beta).exp();
        if accept {
            self.stats.accepted += 1;
            if dp < 0.0 {
                self.stats.worse_accepted += 1;
            }
            self.stats.multiplications += 1;
            match proposal {
                Proposal::Append => {
                    let (layer, g) = fresh.unwrap();
                    self.u = g.evolve_matrix(dt, layer.direction(), &self.u);
                    self.layers.push_back((layer, g));
                }
                Proposal::Prepend => {
                    // U·L = (L†·U†)†
                    let (layer, g) = fresh.unwrap();
                    self.u = g.evolve_matrix(dt, layer.direction().flipped(), &self.u.adjoint()).adjoint();
                    self.layers.push_front((layer, g));
                }
                Proposal::RemoveEnd => {
                    let (l, g) = self.layers.pop_back().expect("nonempty");
                    self.u = g.evolve_matrix(dt, l.direction().flipped(), &self.u);
                }
                Proposal::RemoveBegin => {
                    // U·L† = (L·U†)†
                    let (l, g) = self.layers.pop_front().expect("nonempty");
                    self.u = g.evolve_matrix(dt, l.direction(), &self.u.adjoint()).adjoint();
                }
            }
            self.psi = &self.u * &self.phi;
            let (t, p) = population_of(&self.psi);
            self.target = t;
            self.population = p;
            self.best = self.best.max(p);
        }
        self.step += 1;
        self.converged()
    }

    /// Advances up to `n` steps, stopping early on convergence or at the
    /// step budget.
    pub fn run(&mut self, n: usize) -> bool {
        for _ in 0..n {
            if self.converged() || self.step >= self.cfg.max_steps {
                break;
            }
            self.step();
        }
        self.converged()
    }

    fn finish(&self, worker: usize) -> Result<CompiledSequence> {
        let layers = self.layers();
        let start = SystemState::pure_unchecked(self.phi.clone(), self.terms.n_qubits());
        let end = replay(&start, &layers, self.terms)?;
        let (target, achieved) = argmax_population(&end.basis_populations());
        Ok(CompiledSequence {
            layers,
            target_basis_state: target,
            achieved_population: achieved,
            steps_used: self.step,
            worker_index: worker,
        })
    }
}

/// Runs `cfg.n_workers` independent chains and returns the one that
/// converged in the fewest steps, lowest worker index on ties.
pub fn compile_inverse(
    phi: &SystemState,
    h: &Hamiltonian,
    layer_duration: f64,
    cfg: &CompilerConfig,
) -> Result<CompiledSequence> {
    check_terms(h)?;
    let terms = TermSet::new(h)?;
    compile_with_terms(phi, &terms, layer_duration, cfg)
}

pub fn compile_with_terms(
    phi: &SystemState,
    terms: &TermSet,
    layer_duration: f64,
    cfg: &CompilerConfig,
) -> Result<CompiledSequence> {
    let mut workers = (0..cfg.n_workers)
        .map(|w| Search::new(phi, terms, layer_duration, cfg, w))
        .collect::<Result<Vec<_>>>()?;
    if workers[0].converged() {
        return workers[0].finish(0);
    }
    loop {
        workers.par_iter_mut().for_each(|s| {
            s.run(cfg.round_steps);
        });
        let winner = workers
            .iter()
            .enumerate()
            .filter(|(_, s)| s.converged())
            .min_by_key(|(i, s)| (s.steps(), *i))
            .map(|(i, _)| i);
        if let Some(i) = winner {
            return workers[i].finish(i);
        }
        if workers.iter().all(|s| s.steps() >= cfg.max_steps) {
            let best = workers.iter().map(|s| s.best_population()).fold(0.0, f64::max);
            return Err(Error::NoConvergence { steps: cfg.max_steps, best_population: best });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_preset, PresetName};

    fn ising() -> Hamiltonian {
        build_preset(PresetName::Ising2Q)
    }

    #[test]
    fn mask_serializes_as_indices() {
        let m = TermMask::from_indices([0, 3]).unwrap();
        assert_eq!(m.to_string(), "{0,3}");
        let l = Layer::new(m, -1, 1e-4).unwrap();
        let back: Layer = serde_json::from_str(&serde_json::to_string(&l).unwrap()).unwrap();
        assert_eq!(back, l);
        assert!(Layer::new(TermMask::from_bits(0), 1, 1.0).is_err());
        assert!(Layer::new(m, 0, 1.0).is_err());
    }

    #[test]
    fn forward_layers_cover_the_six_step_set() {
        let h = ising();
        let (layers, phi) = random_forward_sequence(&h, 600, 0.01, 1, 4).unwrap();
        assert!((phi.amplitudes().unwrap().norm() - 1.0).abs() < 1e-9);
        let mut seen = std::collections::HashSet::new();
        for l in &layers {
            assert!(l.terms.bits() >= 1 && l.terms.bits() <= 3);
            assert!((l.duration - 0.02 / 600.0).abs() < 1e-15);
            seen.insert((l.terms, l.sign));
        }
        assert_eq!(seen.len(), 6);
        let (again, _) = random_forward_sequence(&h, 600, 0.01, 1, 4).unwrap();
        assert_eq!(layers, again);
        assert!(random_forward_sequence(&h, 0, 0.01, 1, 4).is_err());
    }

    #[test]
    fn basis_state_needs_no_layers() {
        let h = ising();
        let phi = SystemState::basis(2, 2).unwrap();
        let seq = compile_inverse(&phi, &h, 1e-4, &CompilerConfig::default()).unwrap();
        assert!(seq.layers.is_empty());
        assert_eq!(seq.target_basis_state, 2);
        assert_eq!(seq.achieved_population, 1.0);
        assert_eq!(seq.steps_used, 0);
    }

    #[test]
    fn beta_is_linear() {
        let cfg = CompilerConfig { beta_initial: 1.0, beta_final: 0.1, max_steps: 11, ..Default::default() };
        assert_eq!(cfg.beta(0), 1.0);
        assert!((cfg.beta(5) - 0.55).abs() < 1e-12);
        assert!((cfg.beta(10) - 0.1).abs() < 1e-12);
        assert!(CompilerConfig { beta_initial: 0.1, beta_final: 1.0, ..Default::default() }.validate().is_err());
        assert!(CompilerConfig { threshold: 1.1, ..Default::default() }.validate().is_err());
    }
}
