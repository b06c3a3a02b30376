//! Compressed-row complex matrices for the banded generators that appear in
//! this model (ladder operators, quadratic squeeze terms, the two-mode
//! Hamiltonian). Used where materializing a dense matrix or its exponential
//! would dominate the cost: Lindblad right-hand sides and the action of
//! `exp(A)` on a single vector in large truncations.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use super::C64;

#[derive(Clone, Debug)]
pub struct SparseMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    /// Square matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside a {n}x{n} matrix");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..n {
            indptr[r + 1] += indptr[r];
        }
        Self {
            n,
            indptr,
            indices,
            values,
        }
    }

    /// Drops exact zeros of a dense square matrix.
    pub fn from_dense(a: &Array2<C64>) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        let triplets = a
            .indexed_iter()
            .filter(|(_, v)| **v != C64::new(0.0, 0.0))
            .map(|((r, c), v)| (r, c, *v))
            .collect();
        Self::from_triplets(a.nrows(), triplets)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn scale(mut self, s: C64) -> Self {
        self.values.iter_mut().for_each(|v| *v *= s);
        self
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut out = Array2::zeros((self.n, self.n));
        for r in 0..self.n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                out[[r, self.indices[k]]] += self.values[k];
            }
        }
        out
    }

    /// Mean of the diagonal.
    pub fn diagonal_mean(&self) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..self.n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.indices[k] == r {
                    acc += self.values[k];
                }
            }
        }
        acc / self.n as f64
    }

    /// `self − mu·I`.
    pub fn shifted(&self, mu: C64) -> Self {
        let mut t: Vec<(usize, usize, C64)> = Vec::with_capacity(self.nnz() + self.n);
        for r in 0..self.n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                t.push((r, self.indices[k], self.values[k]));
            }
            t.push((r, r, -mu));
        }
        Self::from_triplets(self.n, t)
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        let mut col = vec![0.0; self.n];
        for (c, v) in self.indices.iter().zip(&self.values) {
            col[*c] += v.norm();
        }
        col.into_iter().fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: ArrayView1<C64>) -> Array1<C64> {
        assert_eq!(x.len(), self.n);
        Array1::from_shape_fn(self.n, |r| {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            acc
        })
    }

    /// `self · b` for a dense right-hand side.
    pub fn mul_dense(&self, b: &Array2<C64>) -> Array2<C64> {
        assert_eq!(b.nrows(), self.n);
        let mut out = Array2::<C64>::zeros((self.n, b.ncols()));
        for (r, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            for k in self.indptr[r]..self.indptr[r + 1] {
                row.scaled_add(self.values[k], &b.row(self.indices[k]));
            }
        }
        out
    }
}

/// Largest 1-norm handled by one Taylor sub-step of [`expm_multiply`].
const SUBSTEP_NORM: f64 = 4.0;
const MAX_TERMS: usize = 80;

/// `exp(a) · v` by a sub-stepped truncated Taylor series.
///
/// The diagonal mean `μ` is shifted out first (`exp(a) = e^μ exp(a − μI)`),
/// then the exponent is split into `s = ceil(‖a − μI‖₁ / 4)` equal pieces;
/// each piece's series is summed until two consecutive terms fall below unit
/// roundoff relative to the partial sum.
pub fn expm_multiply(a: &SparseMatrix, v: &Array1<C64>) -> Array1<C64> {
    let mu = a.diagonal_mean();
    if mu == C64::new(0.0, 0.0) {
        return taylor_action(a, v);
    }
    let shifted = a.shifted(mu);
    if shifted.one_norm() >= a.one_norm() {
        return taylor_action(a, v);
    }
    taylor_action(&shifted, v).mapv(|z| z * mu.exp())
}

fn taylor_action(a: &SparseMatrix, v: &Array1<C64>) -> Array1<C64> {
    let norm = a.one_norm();
    if norm == 0.0 {
        return v.clone();
    }
    let steps = (norm / SUBSTEP_NORM).ceil().max(1.0) as usize;
    let inv = C64::new(1.0 / steps as f64, 0.0);
    let mut out = v.clone();
    for _ in 0..steps {
        let mut term = out.clone();
        let mut small_run = 0;
        for k in 1..=MAX_TERMS {
            term = a.matvec(term.view()).mapv(|z| z * inv / k as f64);
            out += &term;
            let t = term.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let o = out.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if t <= f64::EPSILON * o {
                small_run += 1;
                if small_run == 2 {
                    break;
                }
            } else {
                small_run = 0;
            }
        }
    }
    out
}
