//! The three verification protocols as Monte Carlo experiments.
//!
//! Every run draws its noise from streams keyed by the point, run and
//! sequence indices, so results do not depend on scheduling: serial and
//! parallel execution agree exactly.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compiler::{compile_with_terms, effective_time, random_forward_sequence, CompilerConfig, Layer};
use crate::error::{Error, Result};
use crate::noise::{noisy_weights, sample_all, NoiseRealization, NoiseSpec, SegmentTiming};
use crate::operator::{DenseOperator, Direction, C64};
use crate::pauli::Hamiltonian;
use crate::rng::{derive_seed, stream, Domain};
use crate::state::SystemState;
use crate::terms::TermSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    TimeReversal,
    MultiBasis,
    RandomizedAnalog,
}

impl ProtocolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::TimeReversal => "time_reversal",
            ProtocolKind::MultiBasis => "multi_basis",
            ProtocolKind::RandomizedAnalog => "randomized_analog",
        }
    }
}

impl std::str::FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time_reversal" | "tr" => Ok(Self::TimeReversal),
            "multi_basis" | "mb" => Ok(Self::MultiBasis),
            "randomized_analog" | "randomized" | "rav" => Ok(Self::RandomizedAnalog),
            other => Err(Error::InvalidConfig(format!("unknown protocol {other:?}"))),
        }
    }
}

/// How a curve's error bars were formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// All shots of all runs pooled; binomial standard error.
    PooledShots,
    /// One mean per sequence; standard error of the mean across sequences.
    SequenceMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolRunConfig {
    pub tau_grid: Vec<f64>,
    /// Shots measured per simulated run.
    pub shots_per_run: usize,
    /// Independent noise realizations per point (per sequence for the
    /// randomized protocol).
    pub runs_per_point: usize,
    pub n_sequences: usize,
    /// Forward layers per randomized sequence.
    pub n_steps: usize,
    /// If set, the randomized protocol holds the layer duration fixed and
    /// uses `round(2τ / layer_duration)` forward layers at each point.
    pub layer_duration: Option<f64>,
    /// Initial basis state for time reversal and multi-basis; defaults to
    /// `|10…0⟩`.
    pub initial_state: Option<usize>,
    /// Allowed initial states for randomized sequences; empty means all.
    pub initial_states: Vec<usize>,
    pub noise: Vec<NoiseSpec>,
    pub seed: u64,
}

impl Default for ProtocolRunConfig {
    fn default() -> Self {
        Self {
            tau_grid: Vec::new(),
            shots_per_run: 100,
            runs_per_point: 50,
            n_sequences: 10,
            n_steps: 150,
            layer_duration: None,
            initial_state: None,
            initial_states: Vec::new(),
            noise: Vec::new(),
            seed: 0,
        }
    }
}

impl ProtocolRunConfig {
    pub fn initial_state_for(&self, h: &Hamiltonian) -> usize {
        self.initial_state.unwrap_or(1 << (h.n_qubits - 1))
    }

    pub fn validate(&self, h: &Hamiltonian) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.tau_grid.is_empty() {
            return bad("tau_grid is empty".into());
        }
        if self.tau_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return bad("tau_grid values must be positive".into());
        }
        if self.tau_grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad("tau_grid must be strictly increasing".into());
        }
        if self.shots_per_run == 0 || self.runs_per_point == 0 {
            return bad("shots_per_run and runs_per_point must be at least 1".into());
        }
        let dim = h.dim();
        if let Some(s) = self.initial_state.filter(|&s| s >= dim) {
            return bad(format!("initial state {s} outside {dim}-dimensional space"));
        }
        if let Some(&s) = self.initial_states.iter().find(|&&s| s >= dim) {
            return bad(format!("initial state {s} outside {dim}-dimensional space"));
        }
        if let Some(d) = self.layer_duration {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::NonPositiveDuration(d));
            }
        }
        for spec in &self.noise {
            spec.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    /// Abscissa: τ for the echo protocols, effective time for the
    /// randomized protocol.
    pub time: f64,
    pub tau: f64,
    pub success_probability: f64,
    pub standard_error: f64,
    pub n_samples: usize,
    /// Sequences dropped because compilation did not converge.
    #[serde(default)]
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub protocol: ProtocolKind,
    pub aggregation: Aggregation,
    pub points: Vec<DecayPoint>,
}

impl DecayCurve {
    pub fn last(&self) -> Option<&DecayPoint> {
        self.points.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub counts: Vec<u64>,
    pub success: f64,
    pub standard_error: f64,
}

/// Samples `shots` projective measurements in the computational basis.
///
/// Counts are multinomial, drawn as a chain of conditional binomials.
pub fn measure(state: &SystemState, expected: usize, shots: usize, rng: &mut impl Rng) -> Result<Measurement> {
    if shots == 0 {
        return Err(Error::InvalidConfig("shots must be at least 1".into()));
    }
    let pops = state.basis_populations();
    if expected >= pops.len() {
        return Err(Error::InvalidState(format!("expected state {expected} outside {} states", pops.len())));
    }
    let counts = multinomial(&pops, shots as u64, rng);
    let p = counts[expected] as f64 / shots as f64;
    Ok(Measurement { counts, success: p, standard_error: binomial_stderr(p, shots) })
}

fn multinomial(pops: &[f64], shots: u64, rng: &mut impl Rng) -> Vec<u64> {
    let total: f64 = pops.iter().map(|p| p.max(0.0)).sum();
    let mut left = shots;
    let mut mass = total;
    let mut counts = vec![0u64; pops.len()];
    for (i, &p) in pops.iter().enumerate() {
        if left == 0 {
            break;
        }
        let p = p.max(0.0);
        if i + 1 == pops.len() || mass <= p {
            counts[i] = left;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(left, q).expect("probability clamped").sample(rng);
        counts[i] = k;
        left -= k;
        mass -= p;
    }
    counts
}

pub fn binomial_stderr(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}

/// Sample mean and standard error of the mean.
pub fn mean_and_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// One stretch of evolution: a term mask and sign over a duration, in the
/// frame of `terms_index` (0 = original terms, 1 = rotated terms).
#[derive(Debug, Clone, Copy)]
struct Piece {
    enabled_bits: u64,
    sign: i8,
    duration: f64,
    basis: u32,
}

/// Evolves `psi` through `pieces` under one noise realization.
fn evolve_noisy(
    psi: &DVector<C64>,
    pieces: &[Piece],
    frames: &[&TermSet],
    real: &NoiseRealization,
) -> DVector<C64> {
    let m = real.n_terms();
    let mut v = psi.clone();
    for (piece, seg) in pieces.iter().zip(&real.segments) {
        let terms = frames[piece.basis as usize];
        let enabled: Vec<bool> = (0..m).map(|k| piece.enabled_bits >> k & 1 == 1).collect();
        let sign = if piece.sign < 0 { -1.0 } else { 1.0 };
        for (mult, &d) in seg.multipliers.iter().zip(&seg.sub_durations) {
            let w = noisy_weights(mult, &real.leakage, &enabled, sign);
            v = terms.weighted(&w).evolve(d, Direction::Forward, &v);
        }
    }
    v
}

fn timings(pieces: &[Piece]) -> Vec<SegmentTiming> {
    pieces.iter().map(|p| SegmentTiming::new(p.duration, p.basis)).collect()
}

fn all_bits(m: usize) -> u64 {
    if m >= 64 {
        u64::MAX
    } else {
        (1u64 << m) - 1
    }
}

fn run_index(point: usize, run: usize, runs: usize) -> u64 {
    (point * runs + run) as u64
}

/// Success counts from `runs` noisy executions, pooled into one point.
fn pooled_point(
    h: &Hamiltonian,
    cfg: &ProtocolRunConfig,
    point: usize,
    segments: &[SegmentTiming],
    run: impl Fn(&DVector<C64>, &NoiseRealization) -> DVector<C64> + Sync,
) -> Result<(u64, usize)> {
    let initial = cfg.initial_state_for(h);
    let psi0 = SystemState::basis(h.n_qubits, initial)?;
    let psi0 = psi0.amplitudes().expect("basis states are pure");
    let successes = (0..cfg.runs_per_point)
        .into_par_iter()
        .map(|r| -> Result<u64> {
            let idx = run_index(point, r, cfg.runs_per_point);
            let real = sample_all(&cfg.noise, h, idx, segments)?;
            let state = SystemState::pure_unchecked(run(psi0, &real), h.n_qubits);
            let mut rng = shots_rng(cfg.seed, &[point as u64, r as u64]);
            Ok(measure(&state, initial, cfg.shots_per_run, &mut rng)?.counts[initial])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((successes.iter().sum(), cfg.runs_per_point * cfg.shots_per_run))
}

fn shots_rng(seed: u64, path: &[u64]) -> ChaCha8Rng {
    stream(seed, Domain::Shots, path)
}

fn pooled_curve(protocol: ProtocolKind, points: Vec<(f64, u64, usize)>) -> DecayCurve {
    DecayCurve {
        protocol,
        aggregation: Aggregation::PooledShots,
        points: points
            .into_iter()
            .map(|(tau, k, n)| {
                let p = k as f64 / n as f64;
                DecayPoint {
                    time: tau,
                    tau,
                    success_probability: p,
                    standard_error: binomial_stderr(p, n),
                    n_samples: n,
                    skipped: 0,
                }
            })
            .collect(),
    }
}

/// Forward evolution for τ, then reversed evolution for τ, each under its
/// own stretch of the noise process.
pub fn run_time_reversal(h: &Hamiltonian, cfg: &ProtocolRunConfig) -> Result<DecayCurve> {
    cfg.validate(h)?;
    let terms = TermSet::new(h)?;
    let bits = all_bits(h.n_terms());
    let mut points = Vec::with_capacity(cfg.tau_grid.len());
    for (i, &tau) in cfg.tau_grid.iter().enumerate() {
        let pieces = [
            Piece { enabled_bits: bits, sign: 1, duration: tau, basis: 0 },
            Piece { enabled_bits: bits, sign: -1, duration: tau, basis: 0 },
        ];
        let (k, n) = pooled_point(h, cfg, i, &timings(&pieces), |psi, real| {
            evolve_noisy(psi, &pieces, &[&terms], real)
        })?;
        points.push((tau, k, n));
    }
    Ok(pooled_curve(ProtocolKind::TimeReversal, points))
}

/// Forward evolution for τ, ideal rotation `R`, reversed evolution under
/// the rotated Hamiltonian with noise drawn for the rotated basis, then
/// `R†`.
pub fn run_multi_basis(h: &Hamiltonian, r: &DenseOperator, cfg: &ProtocolRunConfig) -> Result<DecayCurve> {
    cfg.validate(h)?;
    if r.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: r.dim() });
    }
    let terms = TermSet::new(h)?;
    let rotated = terms.conjugated(r)?;
    let bits = all_bits(h.n_terms());
    let rm = r.matrix();
    let rd = rm.adjoint();
    let frames: [&TermSet; 2] = [&terms, &rotated];
    let mut points = Vec::with_capacity(cfg.tau_grid.len());
    for (i, &tau) in cfg.tau_grid.iter().enumerate() {
        let forward = [Piece { enabled_bits: bits, sign: 1, duration: tau, basis: 0 }];
        let reverse = [Piece { enabled_bits: bits, sign: -1, duration: tau, basis: 1 }];
        let segments = timings(&[forward[0], reverse[0]]);
        let (k, n) = pooled_point(h, cfg, i, &segments, |psi, real| {
            let (first, second) = split_realization(real, 1);
            let v = rm * evolve_noisy(psi, &forward, &frames, &first);
            &rd * evolve_noisy(&v, &reverse, &frames, &second)
        })?;
        points.push((tau, k, n));
    }
    Ok(pooled_curve(ProtocolKind::MultiBasis, points))
}

fn split_realization(real: &NoiseRealization, at: usize) -> (NoiseRealization, NoiseRealization) {
    let (a, b) = real.segments.split_at(at);
    (
        NoiseRealization { segments: a.to_vec(), leakage: real.leakage.clone() },
        NoiseRealization { segments: b.to_vec(), leakage: real.leakage.clone() },
    )
}

/// A compiled randomized sequence ready for noisy execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedSequence {
    pub initial_state: usize,
    pub forward_layers: usize,
    /// Forward layers followed by the compiled inverse.
    pub layers: Vec<Layer>,
    pub target_basis_state: usize,
    pub achieved_population: f64,
    pub steps_used: usize,
    pub effective_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedPoint {
    pub tau: f64,
    pub sequences: Vec<PreparedSequence>,
    pub skipped: usize,
}

impl PreparedPoint {
    pub fn effective_time(&self) -> f64 {
        if self.sequences.is_empty() {
            return f64::NAN;
        }
        self.sequences.iter().map(|s| s.effective_time).sum::<f64>() / self.sequences.len() as f64
    }
}

/// Generates and compiles every randomized sequence of the run.
///
/// Compilation is noiseless; sequences whose inverse search does not
/// converge are counted in `skipped` and left out.
pub fn prepare_randomized(
    h: &Hamiltonian,
    cfg: &ProtocolRunConfig,
    compiler: &CompilerConfig,
) -> Result<Vec<PreparedPoint>> {
    cfg.validate(h)?;
    compiler.validate()?;
    let terms = TermSet::new(h)?;
    let m = h.n_terms();
    let allowed: Vec<usize> =
        if cfg.initial_states.is_empty() { (0..h.dim()).collect() } else { cfg.initial_states.clone() };
    let mut out = Vec::with_capacity(cfg.tau_grid.len());
    for (i, &tau) in cfg.tau_grid.iter().enumerate() {
        let n = match cfg.layer_duration {
            Some(d) => ((2.0 * tau / d).round() as usize).max(1),
            None => cfg.n_steps,
        };
        let results = (0..cfg.n_sequences)
            .into_par_iter()
            .map(|s| -> Result<Option<PreparedSequence>> {
                let path = [i as u64, s as u64];
                let initial = allowed[stream(cfg.seed, Domain::InitialState, &path).random_range(0..allowed.len())];
                let seq_seed = derive_seed(cfg.seed, Domain::Sequence, &path);
                let (forward, phi) = random_forward_sequence(h, n, tau, initial, seq_seed)?;
                let ccfg = CompilerConfig { seed: derive_seed(cfg.seed, Domain::Compiler, &path), ..*compiler };
                match compile_with_terms(&phi, &terms, forward[0].duration, &ccfg) {
                    Ok(c) => {
                        let mut layers = forward;
                        let forward_layers = layers.len();
                        layers.extend(c.layers);
                        Ok(Some(PreparedSequence {
                            initial_state: initial,
                            forward_layers,
                            effective_time: effective_time(&layers, m),
                            layers,
                            target_basis_state: c.target_basis_state,
                            achieved_population: c.achieved_population,
                            steps_used: c.steps_used,
                        }))
                    }
                    Err(Error::NoConvergence { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let skipped = results.iter().filter(|r| r.is_none()).count();
        out.push(PreparedPoint { tau, sequences: results.into_iter().flatten().collect(), skipped });
    }
    Ok(out)
}

/// Executes prepared sequences under `cfg.noise`.
///
/// Each sequence is simulated `runs_per_point` times; its success is the
/// fraction of all its shots landing in the compiled target state. The
/// point is the mean over sequences with its standard error.
pub fn execute_randomized(
    h: &Hamiltonian,
    prepared: &[PreparedPoint],
    cfg: &ProtocolRunConfig,
) -> Result<DecayCurve> {
    cfg.validate(h)?;
    let terms = TermSet::new(h)?;
    let mut points = Vec::with_capacity(prepared.len());
    for (i, point) in prepared.iter().enumerate() {
        let per_sequence = point
            .sequences
            .par_iter()
            .enumerate()
            .map(|(s, seq)| -> Result<f64> {
                let pieces: Vec<Piece> = seq
                    .layers
                    .iter()
                    .map(|l| Piece { enabled_bits: l.terms.bits(), sign: l.sign, duration: l.duration, basis: 0 })
                    .collect();
                let segments = timings(&pieces);
                let psi0 = SystemState::basis(h.n_qubits, seq.initial_state)?.amplitudes().unwrap().clone();
                let mut hits = 0u64;
                for run in 0..cfg.runs_per_point {
                    let idx = ((i * cfg.n_sequences.max(point.sequences.len()) + s) * cfg.runs_per_point + run) as u64;
                    let real = sample_all(&cfg.noise, h, idx, &segments)?;
                    let v = evolve_noisy(&psi0, &pieces, &[&terms], &real);
                    let state = SystemState::pure_unchecked(v, h.n_qubits);
                    let mut rng = shots_rng(cfg.seed, &[i as u64, s as u64, run as u64]);
                    hits += measure(&state, seq.target_basis_state, cfg.shots_per_run, &mut rng)?.counts
                        [seq.target_basis_state];
                }
                Ok(hits as f64 / (cfg.runs_per_point * cfg.shots_per_run) as f64)
            })
            .collect::<Result<Vec<_>>>()?;
        let (mean, sem) = mean_and_sem(&per_sequence);
        points.push(DecayPoint {
            time: point.effective_time(),
            tau: point.tau,
            success_probability: mean,
            standard_error: sem,
            n_samples: per_sequence.len(),
            skipped: point.skipped,
        });
    }
    Ok(DecayCurve { protocol: ProtocolKind::RandomizedAnalog, aggregation: Aggregation::SequenceMeans, points })
}

/// Random forward layers, a compiled inverse, and noisy execution.
pub fn run_randomized_analog(
    h: &Hamiltonian,
    cfg: &ProtocolRunConfig,
    compiler: &CompilerConfig,
) -> Result<DecayCurve> {
    let prepared = prepare_randomized(h, cfg, compiler)?;
    execute_randomized(h, &prepared, cfg)
}
