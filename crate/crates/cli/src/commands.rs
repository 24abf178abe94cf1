//! Subcommand implementations. Each returns the run directory it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use analog_verify::compiler::{compile_inverse, effective_time, random_forward_sequence, replay, Layer};
use analog_verify::dynamics::{fidelity_trajectory, first_crossing, smoothed_crossing, LindbladSpec};
use analog_verify::lattice::{LatticeSpec, PairMode};
use analog_verify::pauli::build_operator;
use analog_verify::protocols::*;
use analog_verify::terms::TermSet;
use analog_verify::{Error, Hamiltonian, SystemState};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::archive::{allocate_run_dir, curve_csv, table_csv, timestamp, write_json};
use crate::config::{hz_to_rad, ExperimentConfig};
use crate::plot::svg_from_csv;

pub const SEQUENCE_FORMAT: &str = "averify-sequence/1";

/// Failure modes that map to distinct exit codes.
#[derive(Debug)]
pub enum Exhausted {
    /// The compiler hit its step budget; a best-effort record was written.
    Compile { dir: PathBuf, steps: usize, best_population: f64 },
    /// Some randomized points had no compiled sequence left to run.
    Verify { dir: PathBuf, empty_points: usize },
}

impl std::fmt::Display for Exhausted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exhausted::Compile { dir, steps, best_population } => write!(
                f,
                "compiler did not converge within {steps} steps (best population {best_population:.4}); record in {}",
                dir.display()
            ),
            Exhausted::Verify { dir, empty_points } => write!(
                f,
                "{empty_points} point(s) had every sequence fail to compile; partial results in {}",
                dir.display()
            ),
        }
    }
}

impl std::error::Error for Exhausted {}

/// Compiled sequence as written by `compile` and replayed by `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceFile {
    pub format: String,
    pub created: String,
    pub status: String,
    pub seed: u64,
    pub tau: f64,
    pub hamiltonian: Hamiltonian,
    pub forward: Vec<Layer>,
    /// Present when the search converged.
    pub sequence: Option<PreparedSequence>,
    pub best_population: f64,
    pub steps_used: usize,
    /// Noiseless population of the target state when replaying the whole
    /// sequence from the initial basis state.
    pub replayed_population: Option<f64>,
}

impl SequenceFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if file.format != SEQUENCE_FORMAT {
            bail!("{} is not a sequence file (format {:?})", path.display(), file.format);
        }
        Ok(file)
    }
}

fn write_curve(dir: &Path, curve: &DecayCurve) -> Result<()> {
    let csv = curve_csv(curve)?;
    fs::write(dir.join("curve.csv"), &csv)?;
    let title = format!("{} verification", curve.protocol.as_str().replace('_', " "));
    fs::write(dir.join("curve.svg"), svg_from_csv(&csv, "time_s", &["success_prob"], Some("stderr"), &title)?)?;
    Ok(())
}

pub fn verify(cfg: &ExperimentConfig, protocol: Option<ProtocolKind>, sequence: Option<&Path>) -> Result<PathBuf> {
    let h = cfg.hamiltonian()?;
    let mut run = cfg.run_config();
    let compiler = cfg.compiler_config();
    let kind = if sequence.is_some() { ProtocolKind::RandomizedAnalog } else { protocol.unwrap_or(cfg.protocol.kind) };

    let mut prepared = None;
    let curve = match kind {
        ProtocolKind::TimeReversal => run_time_reversal(&h, &run)?,
        ProtocolKind::MultiBasis => run_multi_basis(&h, &cfg.rotation(h.n_qubits)?, &run)?,
        ProtocolKind::RandomizedAnalog => {
            let points = match sequence {
                Some(path) => {
                    let file = SequenceFile::load(path)?;
                    let labels: Vec<&str> = h.labels().collect();
                    if file.hamiltonian.labels().ne(labels.iter().copied()) {
                        bail!("sequence file terms do not match the configured model");
                    }
                    let Some(seq) = file.sequence else {
                        bail!("sequence file records an unconverged search; nothing to replay");
                    };
                    run.tau_grid = vec![file.tau];
                    vec![PreparedPoint { tau: file.tau, sequences: vec![seq], skipped: 0 }]
                }
                None => prepare_randomized(&h, &run, &compiler)?,
            };
            let mut curve = execute_randomized(&h, &points, &run)?;
            if sequence.is_some() {
                // one sequence: report the pooled shots, not a mean over one
                let shots = run.runs_per_point * run.shots_per_run;
                for p in &mut curve.points {
                    p.n_samples = shots;
                    p.standard_error = binomial_stderr(p.success_probability, shots);
                }
                curve.aggregation = Aggregation::PooledShots;
            }
            prepared = Some(points);
            curve
        }
    };

    let dir = allocate_run_dir(&cfg.out)?;
    write_curve(&dir, &curve)?;
    if let Some(p) = &prepared {
        write_json(&dir.join("sequences.json"), p)?;
    }
    write_json(
        &dir.join("metadata.json"),
        &json!({
            "command": "verify",
            "version": env!("CARGO_PKG_VERSION"),
            "created": timestamp(),
            "protocol": kind.as_str(),
            "aggregation": curve.aggregation,
            "seed": cfg.seed,
            "replayed_sequence": sequence.map(|p| p.display().to_string()),
            "hamiltonian": h,
            "run": run,
            "compiler": (kind == ProtocolKind::RandomizedAnalog).then_some(compiler),
            "curve": curve,
        }),
    )?;
    let empty_points = curve.points.iter().filter(|p| p.n_samples == 0).count();
    if empty_points > 0 {
        return Err(Exhausted::Verify { dir, empty_points }.into());
    }
    Ok(dir)
}

pub fn compile(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let h = cfg.hamiltonian()?;
    let c = &cfg.compile;
    let compiler = cfg.compiler_config();
    let (forward, phi) = random_forward_sequence(&h, c.n_steps, c.tau, c.initial_state, cfg.seed)?;
    let result = compile_inverse(&phi, &h, forward[0].duration, &compiler);

    let mut file = SequenceFile {
        format: SEQUENCE_FORMAT.into(),
        created: timestamp(),
        status: "converged".into(),
        seed: cfg.seed,
        tau: c.tau,
        hamiltonian: h.clone(),
        forward: forward.clone(),
        sequence: None,
        best_population: 0.0,
        steps_used: 0,
        replayed_population: None,
    };
    let failure = match result {
        Ok(seq) => {
            let mut layers = forward.clone();
            layers.extend(seq.layers.iter().copied());
            let terms = TermSet::new(&h)?;
            let end = replay(&SystemState::basis(h.n_qubits, c.initial_state)?, &layers, &terms)?;
            file.replayed_population = Some(end.basis_populations()[seq.target_basis_state]);
            file.best_population = seq.achieved_population;
            file.steps_used = seq.steps_used;
            file.sequence = Some(PreparedSequence {
                initial_state: c.initial_state,
                forward_layers: forward.len(),
                effective_time: effective_time(&layers, h.n_terms()),
                layers,
                target_basis_state: seq.target_basis_state,
                achieved_population: seq.achieved_population,
                steps_used: seq.steps_used,
            });
            None
        }
        Err(Error::NoConvergence { steps, best_population }) => {
            file.status = "no_convergence".into();
            file.best_population = best_population;
            file.steps_used = steps;
            Some((steps, best_population))
        }
        Err(e) => return Err(e.into()),
    };

    let dir = allocate_run_dir(&cfg.out)?;
    write_json(&dir.join("sequence.json"), &file)?;
    write_json(
        &dir.join("metadata.json"),
        &json!({
            "command": "compile",
            "version": env!("CARGO_PKG_VERSION"),
            "created": file.created,
            "seed": cfg.seed,
            "compile": c,
            "compiler": compiler,
        }),
    )?;
    match failure {
        Some((steps, best_population)) => Err(Exhausted::Compile { dir, steps, best_population }.into()),
        None => Ok(dir),
    }
}

pub fn dynamics(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let Some(d) = &cfg.dynamics else {
        bail!("config has no [dynamics] section");
    };
    let ideal_h = cfg.hamiltonian_with(&d.ideal_hz)?;
    let actual_h = cfg.hamiltonian_with(&d.actual_hz)?;
    let ideal = build_operator(&ideal_h, None)?;
    let actual = build_operator(&actual_h, None)?;
    let n = ideal_h.n_qubits;
    let mut lind = LindbladSpec::dephasing(n, 2.0 * std::f64::consts::PI * d.gamma_phi_hz, d.placement)?;
    if d.gamma_phi_hz == 0.0 {
        lind.collapse_operators.clear();
    }
    if let Some(step) = d.integrator_step {
        lind = lind.with_step(step);
    }
    let grid = d.grid()?;
    let psi0 = SystemState::basis(n, d.initial_state)?;
    let rows = fidelity_trajectory(&psi0, &ideal, &actual, &lind, &grid)?;

    let dim = ideal.dim();
    let width = n;
    let mut header = vec!["time_s".to_string()];
    header.extend((0..dim).map(|b| format!("ideal_{b:0width$b}")));
    header.extend((0..dim).map(|b| format!("actual_{b:0width$b}")));
    let pop_rows: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.time];
            v.extend(&r.ideal_populations);
            v.extend(&r.actual_populations);
            v
        })
        .collect();
    let fid_rows: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.time, r.fidelity]).collect();
    let fid_csv = table_csv(&["time_s".into(), "fidelity".into()], &fid_rows)?;

    let dir = allocate_run_dir(&cfg.out)?;
    fs::write(dir.join("populations.csv"), table_csv(&header, &pop_rows)?)?;
    fs::write(dir.join("fidelity.csv"), &fid_csv)?;
    fs::write(dir.join("fidelity.svg"), svg_from_csv(&fid_csv, "time_s", &["fidelity"], None, "fidelity to ideal dynamics")?)?;
    let f: Vec<f64> = rows.iter().map(|r| r.fidelity).collect();
    let uniform = grid.len() > 2 && grid.windows(3).all(|w| ((w[2] - w[1]) - (w[1] - w[0])).abs() < 1e-12);
    write_json(
        &dir.join("metadata.json"),
        &json!({
            "command": "dynamics",
            "version": env!("CARGO_PKG_VERSION"),
            "created": timestamp(),
            "ideal_params_rad_s": hz_to_rad(&d.ideal_hz),
            "actual_params_rad_s": hz_to_rad(&d.actual_hz),
            "dynamics": d,
            "first_crossing_s": first_crossing(&grid, &f, 0.5),
            "smoothed_crossing_s": if uniform { smoothed_crossing(&grid, &f, d.crossing_window, 0.5) } else { None },
        }),
    )?;
    Ok(dir)
}

/// Lattice edge-pair counting; returns the lines printed.
pub fn subsets(rows: usize, cols: usize, mode: PairMode, list: Option<&Path>) -> Result<Vec<String>> {
    let lattice = LatticeSpec::new(rows, cols)?;
    let count = lattice.pair_count(mode);
    let lines = vec![format!("edges {}", lattice.edge_count()), format!("pairs {count}")];
    if let Some(path) = list {
        let pairs: Vec<_> = lattice.edge_pairs(mode).collect();
        write_json(path, &json!({ "rows": rows, "cols": cols, "mode": mode, "count": count, "pairs": pairs }))?;
    }
    Ok(lines)
}
