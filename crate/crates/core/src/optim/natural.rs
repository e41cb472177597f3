use rayon::prelude::*;

use crate::numcore::{solve_spd, tensor::add_outer, Tensor};
use crate::{Error, Result};

/// Tikhonov term added to the Fisher matrix before the solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Damping {
    Fixed(f64),
    /// `1e-6 · tr(G) / dim`
    Auto,
}

/// One natural-gradient (Gauss-Newton) step.
///
/// `jacobians[n]` is the `out × dim` Jacobian of the model output for sample
/// `n` and `residuals[n]` the loss gradient with respect to that output. With
/// `G = (1/N) Σ JᵀJ` and `∇E = (1/N) Σ Jᵀr`, returns
/// `θ − h (G + λ_d I)⁻¹ ∇E`.
pub fn natural_gradient_step(theta: &[f64], jacobians: &[Tensor], residuals: &[Vec<f64>], h: f64, damping: Damping) -> Result<Vec<f64>> {
    let dim = theta.len();
    if jacobians.len() != residuals.len() || jacobians.is_empty() {
        return Err(Error::shape(format!("{} jacobians for {} residuals", jacobians.len(), residuals.len())));
    }
    for (j, r) in jacobians.iter().zip(residuals) {
        let (rows, cols) = j.dims2()?;
        if cols != dim || rows != r.len() {
            return Err(Error::shape(format!("jacobian {rows}x{cols} does not match residual {} and θ {dim}", r.len())));
        }
    }
    let n = jacobians.len() as f64;
    // Per-sample contributions, summed in index order for reproducibility.
    let parts: Vec<(Vec<f64>, Vec<f64>)> = jacobians
        .par_iter()
        .zip(residuals.par_iter())
        .map(|(j, r)| {
            let (rows, _) = j.dims2().expect("checked above");
            let mut g = vec![0.0; dim * dim];
            for row in 0..rows {
                let jr = &j.data()[row * dim..(row + 1) * dim];
                add_outer(&mut g, jr, jr);
            }
            (g, j.matvec_t(r).expect("checked above"))
        })
        .collect();
    let mut fisher = vec![0.0; dim * dim];
    let mut grad = vec![0.0; dim];
    for (g, e) in parts {
        fisher.iter_mut().zip(&g).for_each(|(a, b)| *a += b / n);
        grad.iter_mut().zip(&e).for_each(|(a, b)| *a += b / n);
    }
    let lambda = match damping {
        Damping::Fixed(l) if l >= 0.0 => l,
        Damping::Fixed(l) => return Err(Error::Precondition(format!("damping must be nonnegative, got {l}"))),
        Damping::Auto => 1e-6 * (0..dim).map(|i| fisher[i * dim + i]).sum::<f64>() / dim as f64,
    };
    for i in 0..dim {
        fisher[i * dim + i] += lambda;
    }
    let g = Tensor::matrix(dim, dim, fisher)?;
    let dir = solve_spd(&g, &grad).map_err(|e| match e {
        Error::Singular(_) => Error::Singular(format!("G + λ_d I is not positive definite at λ_d = {lambda:e}; increase the damping")),
        other => other,
    })?;
    Ok(theta.iter().zip(&dir).map(|(t, d)| t - h * d).collect())
}
