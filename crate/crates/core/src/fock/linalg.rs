// Bridges to nalgebra for the factorizations ndarray does not provide.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};

use super::C64;

pub(crate) fn to_nalgebra(a: &Array2<C64>) -> DMatrix<C64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

pub(crate) fn from_nalgebra(m: &DMatrix<C64>) -> Array2<C64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Solve `A X = B` by LU with partial pivoting. Returns `None` for a singular
/// `A`.
pub(crate) fn solve(a: &Array2<C64>, b: &Array2<C64>) -> Option<Array2<C64>> {
    let lu = to_nalgebra(a).lu();
    lu.solve(&to_nalgebra(b)).map(|x| from_nalgebra(&x))
}

/// Eigenvalues of a Hermitian matrix, ascending. Only the Hermitian part of
/// `a` is used.
pub(crate) fn hermitian_eigenvalues(a: &Array2<C64>) -> Vec<f64> {
    let m = hermitian_part(a);
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigen-decomposition of a Hermitian matrix: eigenvalues (ascending) and the
/// matching eigenvectors as columns.
pub(crate) fn hermitian_eigen(a: &Array2<C64>) -> (Array1<f64>, Array2<C64>) {
    let eig = SymmetricEigen::new(hermitian_part(a));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn hermitian_part(a: &Array2<C64>) -> DMatrix<C64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| (a[[i, j]] + a[[j, i]].conj()) * 0.5)
}
