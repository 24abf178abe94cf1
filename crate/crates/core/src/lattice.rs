//! Rectangular nearest-neighbor lattices, edge-pair enumeration and
//! restriction of Hamiltonians to subsystems.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Axis, Hamiltonian, PauliString, PauliTermSum, Summand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub rows: usize,
    pub cols: usize,
    /// Interaction locality; nearest-neighbor couplings give `k = 2`.
    #[serde(default = "default_locality")]
    pub locality: usize,
}

fn default_locality() -> usize {
    2
}

/// Undirected lattice edge, `a < b`, sites numbered row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
}

impl Edge {
    fn shares_site(&self, other: &Edge) -> bool {
        self.a == other.a || self.a == other.b || self.b == other.a || self.b == other.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// `(e₁, e₂)` with `e₁ ≠ e₂`, order significant.
    OrderedDistinct,
    /// `{e₁, e₂}` with `e₁ ≠ e₂`.
    UnorderedDistinct,
    /// `{e₁, e₂}` sharing no site.
    UnorderedDisjoint,
}

impl std::str::FromStr for PairMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ordered_distinct" => Ok(Self::OrderedDistinct),
            "unordered_distinct" => Ok(Self::UnorderedDistinct),
            "unordered_disjoint" => Ok(Self::UnorderedDisjoint),
            other => Err(Error::InvalidConfig(format!("unknown pair mode {other:?}"))),
        }
    }
}

impl LatticeSpec {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols < 2 {
            return Err(Error::InvalidConfig(format!("lattice {rows}x{cols} needs at least two sites")));
        }
        Ok(Self { rows, cols, locality: 2 })
    }

    pub fn n_sites(&self) -> usize {
        self.rows * self.cols
    }

    /// Horizontal edges row by row, then vertical edges.
    pub fn edges(&self) -> Vec<Edge> {
        let site = |r: usize, c: usize| r * self.cols + c;
        let mut out = Vec::with_capacity(self.edge_count());
        for r in 0..self.rows {
            for c in 0..self.cols.saturating_sub(1) {
                out.push(Edge { a: site(r, c), b: site(r, c + 1) });
            }
        }
        for r in 0..self.rows.saturating_sub(1) {
            for c in 0..self.cols {
                out.push(Edge { a: site(r, c), b: site(r + 1, c) });
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.rows * (self.cols - 1) + self.cols * (self.rows - 1)
    }

    fn degree(&self, r: usize, c: usize) -> usize {
        [r > 0, r + 1 < self.rows, c > 0, c + 1 < self.cols].iter().filter(|&&b| b).count()
    }

    /// Closed-form number of edge pairs in `mode`.
    pub fn pair_count(&self, mode: PairMode) -> usize {
        let e = self.edge_count();
        let unordered = e * e.saturating_sub(1) / 2;
        match mode {
            PairMode::OrderedDistinct => e * e.saturating_sub(1),
            PairMode::UnorderedDistinct => unordered,
            PairMode::UnorderedDisjoint => {
                let touching: usize = (0..self.rows)
                    .flat_map(|r| (0..self.cols).map(move |c| (r, c)))
                    .map(|(r, c)| {
                        let d = self.degree(r, c);
                        d * d.saturating_sub(1) / 2
                    })
                    .sum();
                unordered - touching
            }
        }
    }

    /// Iterates the edge pairs of `mode`.
    pub fn edge_pairs(&self, mode: PairMode) -> impl Iterator<Item = (Edge, Edge)> {
        let edges = self.edges();
        let n = edges.len();
        (0..n).flat_map(move |i| (0..n).map(move |j| (i, j))).filter_map(move |(i, j)| {
            let (e1, e2) = (edges[i], edges[j]);
            let keep = match mode {
                PairMode::OrderedDistinct => i != j,
                PairMode::UnorderedDistinct => i < j,
                PairMode::UnorderedDisjoint => i < j && !e1.shares_site(&e2),
            };
            keep.then_some((e1, e2))
        })
    }

    /// Every size-`2k` subsystem built from two site-disjoint edges.
    pub fn subsystems(&self) -> impl Iterator<Item = SubsystemChoice> + '_ {
        let k = self.locality;
        self.edge_pairs(PairMode::UnorderedDisjoint)
            .map(move |(a, b)| SubsystemChoice::from_edges(vec![a, b], k).expect("disjoint edges span 2k sites"))
    }
}

/// Count plus (optionally) the enumerated pairs.
pub fn enumerate_edge_pairs(lattice: &LatticeSpec, mode: PairMode) -> (usize, impl Iterator<Item = (Edge, Edge)>) {
    (lattice.pair_count(mode), lattice.edge_pairs(mode))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsystemChoice {
    /// Sorted site indices of the full system.
    pub sites: Vec<usize>,
    pub pairs: Vec<Edge>,
}

impl SubsystemChoice {
    pub fn from_edges(pairs: Vec<Edge>, locality: usize) -> Result<Self> {
        let sites: BTreeSet<usize> = pairs.iter().flat_map(|e| [e.a, e.b]).collect();
        if sites.len() < 2 * locality {
            return Err(Error::InvalidConfig(format!(
                "subsystem of {} sites is smaller than 2k = {}",
                sites.len(),
                2 * locality
            )));
        }
        Ok(Self { sites: sites.into_iter().collect(), pairs })
    }

    /// Arbitrary site set without a pair structure.
    pub fn from_sites(sites: impl IntoIterator<Item = usize>) -> Self {
        let set: BTreeSet<usize> = sites.into_iter().collect();
        Self { sites: set.into_iter().collect(), pairs: Vec::new() }
    }
}

#[derive(Debug, Clone)]
pub struct Restriction {
    pub hamiltonian: Hamiltonian,
    /// Labels of terms only partly inside the subsystem; they are dropped.
    pub dropped: Vec<String>,
}

/// Keeps the terms supported entirely within `choice.sites`, relabeling
/// sites to `0..s` in sorted order.
pub fn restrict_to_subsystem(h: &Hamiltonian, choice: &SubsystemChoice) -> Result<Restriction> {
    if let Some(&bad) = choice.sites.iter().find(|&&s| s >= h.n_qubits) {
        return Err(Error::SiteOutOfRange { site: bad, n_qubits: h.n_qubits });
    }
    let map: HashMap<usize, usize> = choice.sites.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut terms = Vec::new();
    let mut dropped = Vec::new();
    for term in &h.terms {
        let support = term.support();
        let inside = support.iter().filter(|s| map.contains_key(s)).count();
        if inside == support.len() {
            let summands =
                term.summands.iter().map(|s| Summand::new(s.coefficient, s.pauli.relabeled(&map))).collect();
            terms.push(PauliTermSum { label: term.label.clone(), summands, enabled: term.enabled, sign: term.sign });
        } else if inside > 0 {
            dropped.push(term.label.clone());
        }
    }
    Ok(Restriction { hamiltonian: Hamiltonian::new(choice.sites.len(), terms)?, dropped })
}

/// Nearest-neighbor Ising model on a lattice: one `−(b/2)σ_y` field term per
/// site and one `−(J/2)σ_xσ_x` coupling term per edge.
pub fn lattice_ising(lattice: &LatticeSpec, j: f64, b: f64) -> Result<Hamiltonian> {
    let mut terms = Vec::new();
    for site in 0..lattice.n_sites() {
        terms.push(PauliTermSum::new(format!("b{site}"), vec![Summand::new(-b / 2.0, PauliString::single(site, Axis::Y))]));
    }
    for e in lattice.edges() {
        let s = PauliString::pair((e.a, Axis::X), (e.b, Axis::X))?;
        terms.push(PauliTermSum::new(format!("J{}-{}", e.a, e.b), vec![Summand::new(-j / 2.0, s)]));
    }
    Hamiltonian::new(lattice.n_sites(), terms)
}
