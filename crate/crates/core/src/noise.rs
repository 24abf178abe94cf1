//! Parametric noise on Hamiltonian term coefficients.
//!
//! Four channels, distinguished by how their draws are keyed:
//!
//! | kind             | keyed by                      | varies                         |
//! |------------------|-------------------------------|--------------------------------|
//! | `FastOu`         | run, segment, term            | within a run (OU path)         |
//! | `SlowShotToShot` | run, basis, term              | between runs                   |
//! | `Miscalibration` | term                          | never (fixed per instance)     |
//! | `IdleCrosstalk`  | term                          | never; acts on disabled terms  |
//!
//! All channels act multiplicatively on whole labeled terms. A term's
//! multiplier is `1 + Σ deviations` over the active channels; idle crosstalk
//! contributes a leakage fraction instead, applied only while the term is
//! disabled.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::DenseOperator;
use crate::pauli::Hamiltonian;
use crate::terms::TermSet;
use crate::rng::{stream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    FastOu,
    SlowShotToShot,
    Miscalibration,
    IdleCrosstalk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Relative standard deviation (dimensionless).
    pub relative_sd: f64,
    /// OU correlation time in seconds; required for `FastOu`.
    #[serde(default)]
    pub correlation_time: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, relative_sd: f64, seed: u64) -> Self {
        Self { kind, relative_sd, correlation_time: None, seed }
    }

    pub fn fast_ou(relative_sd: f64, correlation_time: f64, seed: u64) -> Self {
        Self { kind: NoiseKind::FastOu, relative_sd, correlation_time: Some(correlation_time), seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.relative_sd >= 0.0) || !self.relative_sd.is_finite() {
            return Err(Error::InvalidConfig(format!("relative_sd must be >= 0, got {}", self.relative_sd)));
        }
        if self.kind == NoiseKind::FastOu {
            match self.correlation_time {
                Some(tc) if tc > 0.0 && tc.is_finite() => {}
                _ => return Err(Error::InvalidConfig("fast_ou noise needs correlation_time > 0".into())),
            }
        }
        Ok(())
    }
}

/// One protocol segment as seen by the noise sampler.
///
/// `basis` selects an independent noise source: segments run in a rotated
/// basis use a different value so their draws never share a stream with
/// the original basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentTiming {
    pub duration: f64,
    pub basis: u32,
}

impl SegmentTiming {
    pub fn new(duration: f64, basis: u32) -> Self {
        Self { duration, basis }
    }
}

/// Piecewise-constant multipliers within one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentNoise {
    /// Sub-segment durations; they sum to the segment duration.
    pub sub_durations: Vec<f64>,
    /// `multipliers[j][k]`: multiplier of term `k` during sub-segment `j`.
    pub multipliers: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    pub segments: Vec<SegmentNoise>,
    /// Fraction of each term's full strength present while it is disabled.
    pub leakage: Vec<f64>,
}

impl NoiseRealization {
    /// Noise-free realization over the given segments.
    pub fn identity(n_terms: usize, segments: &[SegmentTiming]) -> Self {
        Self {
            segments: segments
                .iter()
                .map(|s| SegmentNoise { sub_durations: vec![s.duration], multipliers: vec![vec![1.0; n_terms]] })
                .collect(),
            leakage: vec![0.0; n_terms],
        }
    }

    pub fn n_terms(&self) -> usize {
        self.leakage.len()
    }

    /// Hash over every sampled value; equal realizations hash equal.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        for seg in &self.segments {
            for d in &seg.sub_durations {
                d.to_bits().hash(&mut hasher);
            }
            for row in &seg.multipliers {
                for m in row {
                    m.to_bits().hash(&mut hasher);
                }
            }
        }
        for l in &self.leakage {
            l.to_bits().hash(&mut hasher);
        }
        hasher.finish()
    }

    /// Superposes another realization: deviations add, sub-segment
    /// boundaries merge.
    pub fn combine(&self, other: &NoiseRealization) -> Result<NoiseRealization> {
        if self.n_terms() != other.n_terms() || self.segments.len() != other.segments.len() {
            return Err(Error::InvalidConfig("cannot combine realizations of different shapes".into()));
        }
        let segments = self.segments.iter().zip(&other.segments).map(|(a, b)| merge_segments(a, b)).collect();
        let leakage = self.leakage.iter().zip(&other.leakage).map(|(a, b)| a + b).collect();
        Ok(NoiseRealization { segments, leakage })
    }
}

fn merge_segments(a: &SegmentNoise, b: &SegmentNoise) -> SegmentNoise {
    if a.sub_durations.len() == 1 || b.sub_durations.len() == 1 {
        let (many, one) = if a.sub_durations.len() >= b.sub_durations.len() { (a, b) } else { (b, a) };
        let multipliers = many
            .multipliers
            .iter()
            .map(|row| row.iter().zip(&one.multipliers[0]).map(|(x, y)| x + y - 1.0).collect())
            .collect();
        return SegmentNoise { sub_durations: many.sub_durations.clone(), multipliers };
    }
    // general case: walk both breakpoint lists
    let total: f64 = a.sub_durations.iter().sum();
    let ends = |s: &SegmentNoise| -> Vec<f64> {
        let mut acc = 0.0;
        s.sub_durations.iter().map(|d| {
            acc += d;
            acc
        })
        .collect()
    };
    let (ea, eb) = (ends(a), ends(b));
    let (mut i, mut j, mut now) = (0, 0, 0.0);
    let mut sub_durations = Vec::new();
    let mut multipliers = Vec::new();
    let eps = 1e-15 * total.max(1.0);
    while i < ea.len() && j < eb.len() {
        let next = ea[i].min(eb[j]);
        if next - now > eps {
            sub_durations.push(next - now);
            multipliers.push(a.multipliers[i].iter().zip(&b.multipliers[j]).map(|(x, y)| x + y - 1.0).collect());
        }
        now = next;
        if ea[i] - next <= eps {
            i += 1;
        }
        if eb[j] - next <= eps {
            j += 1;
        }
    }
    SegmentNoise { sub_durations, multipliers }
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Draws one realization of `spec` for `run_index` over `segments`.
///
/// Sub-segments for `FastOu` are no longer than a fifth of the correlation
/// time; the OU path is sampled exactly at their left edges and runs
/// continuously across consecutive segments of the same basis. A change of
/// basis restarts the path from an independent stationary draw.
pub fn sample_multipliers(
    spec: &NoiseSpec,
    h: &Hamiltonian,
    run_index: u64,
    segments: &[SegmentTiming],
) -> Result<NoiseRealization> {
    spec.validate()?;
    let m = h.n_terms();
    let sd = spec.relative_sd;
    let mut real = NoiseRealization::identity(m, segments);
    if sd == 0.0 {
        return Ok(real);
    }
    match spec.kind {
        NoiseKind::Miscalibration => {
            let row: Vec<f64> =
                (0..m).map(|k| 1.0 + sd * gaussian(&mut stream(spec.seed, Domain::Miscalibration, &[k as u64]))).collect();
            for seg in &mut real.segments {
                seg.multipliers[0].clone_from(&row);
            }
        }
        NoiseKind::IdleCrosstalk => {
            real.leakage =
                (0..m).map(|k| sd * gaussian(&mut stream(spec.seed, Domain::Crosstalk, &[k as u64]))).collect();
        }
        NoiseKind::SlowShotToShot => {
            for (seg, timing) in real.segments.iter_mut().zip(segments) {
                seg.multipliers[0] = (0..m)
                    .map(|k| {
                        let path = [run_index, timing.basis as u64, k as u64];
                        1.0 + sd * gaussian(&mut stream(spec.seed, Domain::SlowNoise, &path))
                    })
                    .collect();
            }
        }
        NoiseKind::FastOu => {
            let tc = spec.correlation_time.unwrap();
            let max_sub = tc / 5.0;
            // per-term OU value at the current time, and the basis it belongs to
            let mut current: Option<(u32, Vec<f64>)> = None;
            for (seg_idx, (seg, timing)) in real.segments.iter_mut().zip(segments).enumerate() {
                let n_sub = (timing.duration / max_sub).ceil().max(1.0) as usize;
                let dt = timing.duration / n_sub as f64;
                let decay = (-dt / tc).exp();
                let kick = sd * (1.0 - decay * decay).sqrt();
                let mut values = match current.take() {
                    Some((basis, v)) if basis == timing.basis => v,
                    _ => (0..m)
                        .map(|k| {
                            let path = [run_index, timing.basis as u64, seg_idx as u64, k as u64];
                            sd * gaussian(&mut stream(spec.seed, Domain::FastNoiseInit, &path))
                        })
                        .collect(),
                };
                let mut rngs: Vec<_> = (0..m)
                    .map(|k| stream(spec.seed, Domain::FastNoise, &[run_index, seg_idx as u64, k as u64]))
                    .collect();
                seg.sub_durations = vec![dt; n_sub];
                seg.multipliers = Vec::with_capacity(n_sub);
                for _ in 0..n_sub {
                    seg.multipliers.push(values.iter().map(|x| 1.0 + x).collect());
                    for (x, rng) in values.iter_mut().zip(rngs.iter_mut()) {
                        *x = *x * decay + kick * gaussian(rng);
                    }
                }
                current = Some((timing.basis, values));
            }
        }
    }
    Ok(real)
}

/// Samples and superposes every spec in `specs`.
pub fn sample_all(
    specs: &[NoiseSpec],
    h: &Hamiltonian,
    run_index: u64,
    segments: &[SegmentTiming],
) -> Result<NoiseRealization> {
    let mut acc = NoiseRealization::identity(h.n_terms(), segments);
    for spec in specs {
        acc = acc.combine(&sample_multipliers(spec, h, run_index, segments)?)?;
    }
    Ok(acc)
}

/// Coefficient weights of one noisy sub-segment.
///
/// Enabled terms carry `sign × multiplier`; disabled terms contribute their
/// leakage fraction, independent of the step sign.
pub fn noisy_weights(multipliers: &[f64], leakage: &[f64], enabled: &[bool], sign: f64) -> Vec<f64> {
    multipliers
        .iter()
        .zip(leakage)
        .zip(enabled)
        .map(|((&m, &f), &on)| if on { sign * m } else { f })
        .collect()
}

/// Piecewise-constant noisy Hamiltonians `H̃_j` for one segment.
///
/// Enabled terms carry `sign × multiplier`; disabled terms contribute their
/// leakage fraction of full strength, independent of the step sign.
pub fn apply_noise(
    terms: &TermSet,
    segment: &SegmentNoise,
    leakage: &[f64],
    enabled: &[bool],
    sign: i8,
) -> Result<Vec<(DenseOperator, f64)>> {
    if enabled.len() != terms.len() {
        return Err(Error::MaskLength { expected: terms.len(), found: enabled.len() });
    }
    if leakage.len() != terms.len() {
        return Err(Error::MaskLength { expected: terms.len(), found: leakage.len() });
    }
    let sign = if sign < 0 { -1.0 } else { 1.0 };
    Ok(segment
        .multipliers
        .iter()
        .zip(&segment.sub_durations)
        .map(|(mult, &d)| {
            let w = noisy_weights(mult, leakage, enabled, sign);
            (DenseOperator::new_unchecked(terms.weighted_sum(&w), terms.n_qubits()), d)
        })
        .collect())
}
