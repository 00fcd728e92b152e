//! Small dense symmetric eigenvalue helpers.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::ArrayView2;

fn to_dmatrix(a: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Eigenvalues of a symmetric matrix in non-increasing order.
pub fn symmetric_eigenvalues(a: ArrayView2<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(to_dmatrix(a)).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

pub fn min_eigenvalue(a: ArrayView2<f64>) -> f64 {
    symmetric_eigenvalues(a).last().copied().unwrap_or(0.0)
}
