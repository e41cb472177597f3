use super::Tensor;
use crate::{Error, Result};

/// Central-difference gradient `(f(x+εeᵢ) − f(x−εeᵢ)) / 2ε`.
pub fn finite_diff_grad<F>(mut f: F, x: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("finite-difference step must be positive, got {eps}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let up = f(&probe);
        probe[i] = x[i] - eps;
        let down = f(&probe);
        probe[i] = x[i];
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::NonFinite(format!("objective is non-finite around coordinate {i}")));
        }
        grad.push((up - down) / (2.0 * eps));
    }
    Ok(grad)
}

/// Central-difference Jacobian with entry `(i, j) = ∂fᵢ/∂xⱼ`.
pub fn finite_diff_jacobian<F>(mut f: F, x: &[f64], eps: f64) -> Result<Tensor>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("finite-difference step must be positive, got {eps}")));
    }
    let n = x.len();
    let mut probe = x.to_vec();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        probe[j] = x[j] + eps;
        let up = f(&probe)?;
        probe[j] = x[j] - eps;
        let down = f(&probe)?;
        probe[j] = x[j];
        cols.push(up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * eps)).collect::<Vec<_>>());
    }
    let m = cols.first().map_or(0, Vec::len);
    let mut data = vec![0.0; m * n];
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            data[i * n + j] = *v;
        }
    }
    Tensor::matrix(m, n, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_has_zero_gradient() {
        let g = finite_diff_grad(|_| 3.5, &[1.0, -2.0, 0.25], 1e-5).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn half_squared_norm() {
        let g = finite_diff_grad(|x| 0.5 * x.iter().map(|v| v * v).sum::<f64>(), &[1.0, 2.0], 1e-4).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-9 && (g[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn nonfinite_is_reported() {
        let r = finite_diff_grad(|x| if x[0] > 0.0 { f64::INFINITY } else { 0.0 }, &[0.0], 1e-3);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn jacobian_of_linear_map() {
        let a = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.5, 4.0]).unwrap();
        let j = finite_diff_jacobian(|x| a.matvec(x), &[0.3, 0.1, -0.2], 1e-5).unwrap();
        assert!(j.max_abs_diff(&a) < 1e-9);
    }
}
