//! Restarted Lanczos iteration for the lowest eigenpair of a real symmetric
//! operator given only through matrix-vector products.
//!
//! Each cycle builds a Krylov basis of at most `krylov_dim` vectors with full
//! reorthogonalisation (also against any `deflate` vectors), takes the lowest
//! Ritz pair and restarts from the Ritz vector until the explicit residual
//! `‖A x − θ x‖` drops below the tolerance.

use super::{dot, norm, tridiagonal_eigen};
use crate::prelude::*;
use crate::{Error, Result};

pub trait RealOperator {
    fn dim(&self) -> usize;
    /// `out = A v`.
    fn apply(&self, v: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosConfig {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub tolerance: f64,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        LanczosConfig {
            krylov_dim: 48,
            max_restarts: 400,
            tolerance: 1e-11,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LanczosResult {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub matvecs: usize,
}

/// Lowest eigenpair of `op` restricted to the orthogonal complement of
/// `deflate` (which must be orthonormal).
pub fn lowest_eigenpair<O: RealOperator + ?Sized>(
    op: &O,
    start: &[f64],
    deflate: &[&[f64]],
    cfg: &LanczosConfig,
) -> Result<LanczosResult> {
    let dim = op.dim();
    if start.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: start.len(),
        });
    }
    let mut x = start.to_vec();
    orthogonalize(&mut x, deflate);
    if normalize(&mut x).is_none() {
        return Err(Error::InvalidInput("Lanczos start vector is zero".into()));
    }
    let m_max = cfg.krylov_dim.max(2).min(dim.saturating_sub(deflate.len()).max(1));

    let mut matvecs = 0;
    let mut best_residual = f64::INFINITY;
    let mut w = vec![0.0; dim];
    for _ in 0..cfg.max_restarts {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m_max);
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta: Vec<f64> = Vec::with_capacity(m_max);
        basis.push(x.clone());
        for j in 0..m_max {
            op.apply(&basis[j], &mut w);
            matvecs += 1;
            let a = dot(&basis[j], &w);
            alpha.push(a);
            // two passes of classical Gram-Schmidt
            for _ in 0..2 {
                orthogonalize(&mut w, deflate);
                for q in &basis {
                    let c = dot(q, &w);
                    w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
                }
            }
            if j + 1 == m_max {
                break;
            }
            let b = norm(&w);
            if b <= 1e-13 * a.abs().max(1.0) {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|v| v / b).collect());
        }
        let k = alpha.len();
        let (_, vecs) = tridiagonal_eigen(&alpha, &beta[..k - 1])?;
        let mut ritz = vec![0.0; dim];
        for (i, q) in basis.iter().enumerate().take(k) {
            let c = vecs[i * k];
            ritz.iter_mut().zip(q).for_each(|(r, qi)| *r += c * qi);
        }
        orthogonalize(&mut ritz, deflate);
        normalize(&mut ritz);

        op.apply(&ritz, &mut w);
        matvecs += 1;
        let rq = dot(&ritz, &w);
        let residual = w
            .iter()
            .zip(&ritz)
            .map(|(a, r)| (a - rq * r) * (a - rq * r))
            .sum::<f64>()
            .sqrt();
        best_residual = best_residual.min(residual);
        x = ritz;
        if residual <= cfg.tolerance {
            return Ok(LanczosResult {
                value: rq,
                vector: x,
                residual,
                matvecs,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: matvecs,
        residual: best_residual,
    })
}

fn orthogonalize(v: &mut [f64], against: &[&[f64]]) {
    for q in against {
        let c = dot(q, v);
        v.iter_mut().zip(q.iter()).for_each(|(vi, qi)| *vi -= c * qi);
    }
}

fn normalize(v: &mut [f64]) -> Option<f64> {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(n)
}
