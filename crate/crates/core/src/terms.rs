//! Term matrices in a fixed basis, with fast weighted sums and propagation.
//!
//! Every `d × d` matrix decomposes exactly as `Σ_f D_f P_f`, where `P_f` is
//! the permutation `|c⟩ → |c ⊕ f⟩` and `D_f` is diagonal. Pauli strings
//! occupy a single flip each, so physical Hamiltonians touch only a handful
//! of flips and their action on a vector costs a few passes over it.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector};

use crate::error::{Error, Result};
use crate::operator::{Direction, DenseOperator, HermitianEigen, C64, UNITARY_TOL};
use crate::pauli::Hamiltonian;

/// Above this many distinct flips a weighted sum is applied densely.
const SPARSE_FLIP_LIMIT: usize = 8;
/// Largest `‖H‖·t` handled by one Taylor series.
const TAYLOR_SPAN: f64 = 0.5;
const TAYLOR_MAX_ORDER: usize = 40;
/// Small operators with many Taylor substeps are diagonalized instead.
const EIGEN_DIM_LIMIT: usize = 8;
const EIGEN_MIN_SUBSTEPS: usize = 4;

#[derive(Debug, Clone)]
pub struct TermSet {
    n_qubits: usize,
    dense: Vec<DMatrix<C64>>,
    /// Union of flips with a nonzero diagonal in some term.
    flips: Vec<usize>,
    /// `diags[k][j]` is term `k`'s diagonal for `flips[j]`.
    diags: Vec<Vec<Option<Vec<C64>>>>,
}

fn flip_decompose(m: &DMatrix<C64>) -> Vec<(usize, Vec<C64>)> {
    let d = m.nrows();
    (0..d)
        .filter_map(|f| {
            let diag: Vec<C64> = (0..d).map(|c| m[(c ^ f, c)]).collect();
            diag.iter().any(|z| z.norm() > 0.0).then_some((f, diag))
        })
        .collect()
}

impl TermSet {
    pub fn new(h: &Hamiltonian) -> Result<Self> {
        Self::from_matrices(h.n_qubits, h.term_operators()?.into_iter().map(|o| o.into_matrix()).collect())
    }

    pub fn from_matrices(n_qubits: usize, dense: Vec<DMatrix<C64>>) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if let Some(bad) = dense.iter().find(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.nrows() });
        }
        let per_term: Vec<Vec<(usize, Vec<C64>)>> = dense.iter().map(flip_decompose).collect();
        let mut flips: Vec<usize> = per_term.iter().flatten().map(|(f, _)| *f).collect();
        flips.sort_unstable();
        flips.dedup();
        let diags = per_term
            .into_iter()
            .map(|groups| {
                let mut row = vec![None; flips.len()];
                for (f, d) in groups {
                    row[flips.binary_search(&f).expect("flip collected above")] = Some(d);
                }
                row
            })
            .collect();
        Ok(Self { n_qubits, dense, flips, diags })
    }

    /// Terms rotated into another basis, `R H_k R†`.
    pub fn conjugated(&self, r: &DenseOperator) -> Result<Self> {
        if !r.is_unitary(UNITARY_TOL) {
            return Err(Error::NotUnitary(r.unitarity_error()));
        }
        if r.dim() != 1 << self.n_qubits {
            return Err(Error::DimensionMismatch { expected: 1 << self.n_qubits, found: r.dim() });
        }
        let rd = r.matrix().adjoint();
        let mut rotated: Vec<DMatrix<C64>> = self.dense.iter().map(|t| r.matrix() * t * &rd).collect();
        // drop rounding residue so Clifford rotations stay sparse
        for m in &mut rotated {
            let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for z in m.iter_mut() {
                if z.norm() < 1e-13 * scale {
                    *z = C64::new(0.0, 0.0);
                }
            }
        }
        Self::from_matrices(self.n_qubits, rotated)
    }

    pub fn len(&self) -> usize {
        self.dense.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dense.is_empty()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn term(&self, k: usize) -> &DMatrix<C64> {
        &self.dense[k]
    }

    /// `Σ_k weights[k] · H_k` as a dense matrix.
    pub fn weighted_sum(&self, weights: &[f64]) -> DMatrix<C64> {
        let dim = self.dim();
        let mut acc = DMatrix::zeros(dim, dim);
        for (w, t) in weights.iter().zip(&self.dense) {
            if *w != 0.0 {
                acc += t * C64::new(*w, 0.0);
            }
        }
        acc
    }

    /// `Σ_k weights[k] · H_k` in whichever form is cheaper to apply.
    pub fn weighted(&self, weights: &[f64]) -> WeightedOperator {
        let dim = self.dim();
        let mut groups: Vec<(usize, Vec<C64>)> = Vec::new();
        for (j, &f) in self.flips.iter().enumerate() {
            let mut acc: Option<Vec<C64>> = None;
            for (k, &w) in weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                if let Some(d) = &self.diags[k][j] {
                    let a = acc.get_or_insert_with(|| vec![C64::new(0.0, 0.0); dim]);
                    for (x, y) in a.iter_mut().zip(d) {
                        *x += y * w;
                    }
                }
            }
            if let Some(a) = acc {
                groups.push((f, a));
            }
        }
        let bound: f64 = groups.iter().map(|(_, d)| d.iter().map(|z| z.norm()).fold(0.0, f64::max)).sum();
        if groups.len() <= SPARSE_FLIP_LIMIT {
            WeightedOperator { dim, rep: Rep::Sparse(groups), bound }
        } else {
            let mut m = DMatrix::zeros(dim, dim);
            for (f, d) in &groups {
                for c in 0..dim {
                    m[(c ^ f, c)] += d[c];
                }
            }
            let row_sum = (0..dim).map(|r| m.row(r).iter().map(|z: &C64| z.norm()).sum::<f64>()).fold(0.0, f64::max);
            WeightedOperator { dim, rep: Rep::Dense(m), bound: bound.min(row_sum) }
        }
    }
}

#[derive(Debug, Clone)]
enum Rep {
    Sparse(Vec<(usize, Vec<C64>)>),
    Dense(DMatrix<C64>),
}

/// A Hermitian operator prepared for repeated application.
#[derive(Debug, Clone)]
pub struct WeightedOperator {
    dim: usize,
    rep: Rep,
    /// Upper bound on the spectral norm.
    bound: f64,
}

impl WeightedOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_bound(&self) -> f64 {
        self.bound
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.rep, Rep::Sparse(_))
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        match &self.rep {
            Rep::Dense(m) => m.clone(),
            Rep::Sparse(groups) => {
                let mut m = DMatrix::zeros(self.dim, self.dim);
                for (f, d) in groups {
                    for c in 0..self.dim {
                        m[(c ^ f, c)] += d[c];
                    }
                }
                m
            }
        }
    }

    /// `out = scale · H · input` for `ncols` column-major columns.
    fn apply_block(&self, input: &[C64], out: &mut [C64], ncols: usize, scale: C64) {
        let d = self.dim;
        match &self.rep {
            Rep::Dense(m) => {
                let x = DMatrixView::from_slice(input, d, ncols);
                let mut y = DMatrixViewMut::from_slice(out, d, ncols);
                y.gemm(scale, m, &x, C64::new(0.0, 0.0));
            }
            Rep::Sparse(groups) => {
                out.fill(C64::new(0.0, 0.0));
                for (x, y) in input.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
                    for (f, diag) in groups {
                        let f = *f;
                        if f == 0 {
                            for ((yc, &dc), &xc) in y.iter_mut().zip(diag).zip(x) {
                                *yc += dc * xc;
                            }
                        } else {
                            for (c, (&dc, &xc)) in diag.iter().zip(x).enumerate() {
                                y[c ^ f] += dc * xc;
                            }
                        }
                    }
                    for yc in y.iter_mut() {
                        *yc *= scale;
                    }
                }
            }
        }
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(self.dim);
        self.apply_block(v.as_slice(), out.as_mut_slice(), 1, C64::new(1.0, 0.0));
        out
    }

    /// Replaces the `ncols` columns in `data` by `e^{∓iHt}` applied to them,
    /// via a Taylor series over substeps of norm at most one half.
    fn evolve_block(&self, t: f64, direction: Direction, data: &mut [C64], ncols: usize) {
        let theta = self.bound * t.abs();
        if theta == 0.0 {
            return;
        }
        let n_sub = (theta / TAYLOR_SPAN).ceil().max(1.0) as usize;
        if self.dim <= EIGEN_DIM_LIMIT && n_sub >= EIGEN_MIN_SUBSTEPS {
            let p = HermitianEigen::new_unchecked(&self.to_dense()).propagator(t, direction);
            let block = DMatrixView::from_slice(data, self.dim, ncols);
            let out = &p * block;
            data.copy_from_slice(out.as_slice());
            return;
        }
        let h = t / n_sub as f64;
        // order at which θ^k/k! drops below the working precision
        let theta_sub = theta / n_sub as f64;
        let (mut order, mut r) = (0, 1.0);
        while r > 1e-17 && order < TAYLOR_MAX_ORDER {
            order += 1;
            r *= theta_sub / order as f64;
        }
        let factor = C64::new(0.0, -direction.sign() * h);
        let mut term = data.to_vec();
        let mut next = vec![C64::new(0.0, 0.0); data.len()];
        for _ in 0..n_sub {
            term.copy_from_slice(data);
            for k in 1..=order {
                self.apply_block(&term, &mut next, ncols, factor / k as f64);
                std::mem::swap(&mut term, &mut next);
                for (a, x) in data.iter_mut().zip(&term) {
                    *a += x;
                }
            }
        }
    }

    /// `e^{∓iHt} v`.
    pub fn evolve(&self, t: f64, direction: Direction, v: &DVector<C64>) -> DVector<C64> {
        let mut out = v.clone();
        self.evolve_block(t, direction, out.as_mut_slice(), 1);
        out
    }

    /// `e^{∓iHt} M`, all columns at once.
    pub fn evolve_matrix(&self, t: f64, direction: Direction, m: &DMatrix<C64>) -> DMatrix<C64> {
        if m.nrows() != self.dim {
            panic!("evolve_matrix: {} rows for a {}-dimensional operator", m.nrows(), self.dim);
        }
        let mut out = m.clone();
        let cols = out.ncols();
        self.evolve_block(t, direction, out.as_mut_slice(), cols);
        out
    }

    /// Full propagator `e^{∓iHt}`.
    pub fn propagator(&self, t: f64, direction: Direction) -> DMatrix<C64> {
        self.evolve_matrix(t, direction, &DMatrix::identity(self.dim, self.dim))
    }
}
