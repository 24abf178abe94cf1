//! Experiment configuration files (TOML).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use analog_verify::compiler::CompilerConfig;
use analog_verify::dynamics::DephasingPlacement;
use analog_verify::models::{build_preset_with, preset_rotation, PresetName};
use analog_verify::noise::NoiseSpec;
use analog_verify::operator::{global_rotation, DenseOperator};
use analog_verify::protocols::{ProtocolKind, ProtocolRunConfig};
use analog_verify::{Axis, Hamiltonian};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Directory that receives `run-NNNN` archives.
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub model: ModelConfig,
    #[serde(default)]
    pub protocol: ProtocolSection,
    /// Noise channels, appended to any listed under `[protocol]`.
    #[serde(default)]
    pub noise: Vec<NoiseSpec>,
    #[serde(default)]
    pub compiler: CompilerConfig,
    #[serde(default)]
    pub compile: CompileSection,
    #[serde(default)]
    pub dynamics: Option<DynamicsSection>,
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

/// Either a preset or an inline Hamiltonian.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub preset: Option<String>,
    /// Preset parameter overrides in Hz (multiplied by 2π).
    #[serde(default)]
    pub params_hz: BTreeMap<String, f64>,
    pub hamiltonian: Option<Hamiltonian>,
    /// Multi-basis rotation; presets supply their own when omitted.
    pub rotation: Option<RotationConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationConfig {
    pub axis: Axis,
    /// Radians, applied to every qubit.
    pub angle: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolSection {
    #[serde(default = "default_kind")]
    pub kind: ProtocolKind,
    #[serde(flatten)]
    pub run: ProtocolRunConfig,
}

fn default_kind() -> ProtocolKind {
    ProtocolKind::TimeReversal
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self { kind: default_kind(), run: ProtocolRunConfig::default() }
    }
}

/// Standalone inverse compilation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompileSection {
    pub n_steps: usize,
    pub tau: f64,
    pub initial_state: usize,
}

impl Default for CompileSection {
    fn default() -> Self {
        Self { n_steps: 30, tau: 2e-3, initial_state: 1 }
    }
}

/// Ideal unitary against miscalibrated, dephased evolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    /// Parameter overrides for the ideal model, Hz.
    #[serde(default)]
    pub ideal_hz: BTreeMap<String, f64>,
    /// Parameter overrides for the implemented model, Hz.
    #[serde(default)]
    pub actual_hz: BTreeMap<String, f64>,
    #[serde(default)]
    pub gamma_phi_hz: f64,
    #[serde(default)]
    pub placement: DephasingPlacement,
    #[serde(default)]
    pub initial_state: usize,
    /// Explicit grid; otherwise `0, dt, …, t_end`.
    #[serde(default)]
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub t_end: f64,
    #[serde(default)]
    pub dt: f64,
    pub integrator_step: Option<f64>,
    /// Averaging window for the reported 0.5 crossing, seconds.
    #[serde(default = "default_window")]
    pub crossing_window: f64,
}

fn default_window() -> f64 {
    1e-3
}

impl DynamicsSection {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if !self.t_grid.is_empty() {
            return Ok(self.t_grid.clone());
        }
        if !(self.dt > 0.0 && self.t_end >= 0.0) {
            bail!("dynamics needs t_grid or positive dt with t_end >= 0");
        }
        let n = (self.t_end / self.dt).round() as usize;
        Ok((0..=n).map(|k| k as f64 * self.dt).collect())
    }
}

pub fn hz_to_rad(params: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    params.iter().map(|(k, v)| (k.clone(), 2.0 * PI * v)).collect()
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.protocol.run.noise.append(&mut cfg.noise);
        Ok(cfg)
    }

    pub fn run_config(&self) -> ProtocolRunConfig {
        ProtocolRunConfig { seed: self.seed, ..self.protocol.run.clone() }
    }

    pub fn compiler_config(&self) -> CompilerConfig {
        CompilerConfig { seed: self.seed, ..self.compiler }
    }

    pub fn preset(&self) -> Result<Option<PresetName>> {
        match &self.model.preset {
            Some(name) => Ok(Some(name.parse()?)),
            None => Ok(None),
        }
    }

    pub fn hamiltonian(&self) -> Result<Hamiltonian> {
        self.hamiltonian_with(&self.model.params_hz)
    }

    /// Model Hamiltonian with preset overrides given in Hz.
    pub fn hamiltonian_with(&self, params_hz: &BTreeMap<String, f64>) -> Result<Hamiltonian> {
        match (self.preset()?, &self.model.hamiltonian) {
            (Some(_), Some(_)) => bail!("model sets both preset and hamiltonian"),
            (Some(p), None) => Ok(build_preset_with(p, &hz_to_rad(params_hz))?),
            (None, Some(h)) => {
                if !params_hz.is_empty() {
                    bail!("parameter overrides need a preset model");
                }
                h.validate()?;
                Ok(h.clone())
            }
            (None, None) => bail!("model needs a preset or an inline hamiltonian"),
        }
    }

    pub fn rotation(&self, n_qubits: usize) -> Result<DenseOperator> {
        if let Some(r) = &self.model.rotation {
            return Ok(global_rotation(r.axis, r.angle, n_qubits)?);
        }
        match self.preset()? {
            Some(p) => Ok(preset_rotation(p)?),
            None => bail!("multi-basis on an inline hamiltonian needs [model.rotation]"),
        }
    }
}
