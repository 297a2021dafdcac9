//! Small dense and matrix-free linear algebra: symmetric eigensolvers, a
//! restarted Lanczos iteration and pivoted determinants.



mod lanczos;
mod lu;
mod symmetric;

pub use lanczos::{lowest_eigenpair, LanczosConfig, LanczosResult, RealOperator};
pub use lu::{log_determinant, LogDet};
pub use symmetric::{symmetric_eigen, symmetric_eigenvalues, tridiagonal_eigen};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    num_traits::Float::sqrt(dot(a, a))
}
