use nalgebra::DMatrix;

use super::tensor::{matvec, matvec_t};
use super::vecops::norm;
use super::{Rng, Tensor};
use crate::{Error, Result};

/// Result of a power iteration on `AᵀA`.
#[derive(Clone, Debug)]
pub struct PowerEstimate {
    /// `‖A v‖` for the final unit vector `v`; never exceeds the true norm.
    pub sigma: f64,
    /// Leading right singular vector estimate (unit norm).
    pub right: Vec<f64>,
}

/// Power iteration started from a caller-held vector, so estimates can be
/// warm-started across training steps.
pub fn power_iteration(a: &Tensor, start: &[f64], iters: usize) -> Result<PowerEstimate> {
    let (r, c) = a.dims2()?;
    if iters == 0 {
        return Err(Error::Precondition("power iteration needs iters >= 1".into()));
    }
    if start.len() != c {
        return Err(Error::shape(format!("start vector length {} for {r}x{c} matrix", start.len())));
    }
    let mut v = start.to_vec();
    let n0 = norm(&v);
    if n0 == 0.0 {
        return Err(Error::Precondition("power iteration start vector is zero".into()));
    }
    v.iter_mut().for_each(|x| *x /= n0);
    for _ in 0..iters {
        let u = matvec(a.data(), r, c, &v);
        let w = matvec_t(a.data(), r, c, &u);
        let nw = norm(&w);
        if nw == 0.0 {
            return Ok(PowerEstimate { sigma: 0.0, right: v });
        }
        v = w.into_iter().map(|x| x / nw).collect();
    }
    let sigma = norm(&matvec(a.data(), r, c, &v));
    Ok(PowerEstimate { sigma, right: v })
}

/// Largest singular value by power iteration from a seeded Rademacher vector.
pub fn spectral_norm(a: &Tensor, iters: usize, seed: u64) -> Result<f64> {
    let (_, c) = a.dims2()?;
    let start = Rng::seed_from(seed).rademacher_vec(c);
    Ok(power_iteration(a, &start, iters)?.sigma)
}

fn to_dmatrix(a: &Tensor) -> Result<DMatrix<f64>> {
    let (r, c) = a.dims2()?;
    Ok(DMatrix::from_row_slice(r, c, a.data()))
}

/// `log |det A|` from a partial-pivot LU factorisation.
pub fn logabsdet_lu(a: &Tensor) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::shape(format!("logabsdet needs a square matrix, got {:?}", a.shape())));
    }
    let n = a.shape()[0];
    let lu = to_dmatrix(a)?.lu();
    let u = lu.u();
    let scale = a.data().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tiny = f64::EPSILON * n as f64 * scale;
    let mut acc = 0.0;
    for i in 0..n {
        let d = u[(i, i)].abs();
        if d <= tiny || d == 0.0 {
            return Err(Error::Singular(format!("pivot {i} is {d:e}")));
        }
        acc += d.ln();
    }
    Ok(acc)
}

/// Dense inverse via partial-pivot LU.
pub fn inverse(a: &Tensor) -> Result<Tensor> {
    if !a.is_square() {
        return Err(Error::shape(format!("inverse needs a square matrix, got {:?}", a.shape())));
    }
    let n = a.shape()[0];
    let inv = to_dmatrix(a)?
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular("LU factorisation has a zero pivot".into()))?;
    let mut out = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, inv[(i, j)]);
        }
    }
    if !out.data().iter().all(|v| v.is_finite()) {
        return Err(Error::Singular("inverse has non-finite entries".into()));
    }
    Ok(out)
}

/// Solves `A x = b` for symmetric positive-definite `A` by Cholesky.
pub fn solve_spd(a: &Tensor, b: &[f64]) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::shape(format!("solve_spd needs a square matrix, got {:?}", a.shape())));
    }
    let n = a.shape()[0];
    if b.len() != n {
        return Err(Error::shape(format!("rhs length {} for {n}x{n} system", b.len())));
    }
    let chol = to_dmatrix(a)?
        .cholesky()
        .ok_or_else(|| Error::Singular("Cholesky factorisation failed; matrix is not positive definite".into()))?;
    let x = chol.solve(&nalgebra::DVector::from_column_slice(b));
    Ok(x.iter().copied().collect())
}
