use super::GridImage;
use crate::{Error, Result};

fn check(yhat: &GridImage, clean: &GridImage, lambda: f64, eps: f64) -> Result<()> {
    if !yhat.same_shape(clean) {
        return Err(Error::shape("prediction and clean image differ in shape"));
    }
    if !(lambda >= 0.0) || !(eps > 0.0) {
        return Err(Error::Precondition(format!("need λ ≥ 0 and ε > 0, got {lambda}, {eps}")));
    }
    Ok(())
}

/// `½‖ŷ − y*‖² + λ Σ (√(v² + ε²) − ε)` where `v` ranges over the periodic
/// forward differences of `ŷ − y*` along both grid axes and every channel.
pub fn denoise_objective(yhat: &GridImage, clean: &GridImage, lambda: f64, eps: f64) -> Result<f64> {
    Ok(denoise_objective_grad(yhat, clean, lambda, eps)?.0)
}

/// Objective value and its gradient with respect to `ŷ`.
pub fn denoise_objective_grad(yhat: &GridImage, clean: &GridImage, lambda: f64, eps: f64) -> Result<(f64, Vec<f64>)> {
    check(yhat, clean, lambda, eps)?;
    let (h, w, c) = (yhat.height(), yhat.width(), yhat.channels());
    let e: Vec<f64> = yhat.data().iter().zip(clean.data()).map(|(a, b)| a - b).collect();
    let mut grad = e.clone();
    let mut value = 0.5 * e.iter().map(|v| v * v).sum::<f64>();
    if lambda > 0.0 {
        let idx = |i: usize, j: usize, ch: usize| (i * w + j) * c + ch;
        let mut tv = 0.0;
        for i in 0..h {
            for j in 0..w {
                for ch in 0..c {
                    let here = idx(i, j, ch);
                    for there in [idx((i + 1) % h, j, ch), idx(i, (j + 1) % w, ch)] {
                        let v = e[there] - e[here];
                        let root = (v * v + eps * eps).sqrt();
                        tv += root - eps;
                        let d = lambda * v / root;
                        grad[there] += d;
                        grad[here] -= d;
                    }
                }
            }
        }
        value += lambda * tv;
    }
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{finite_diff_grad, vecops, Rng};

    #[test]
    fn equal_images_give_zero() {
        let mut rng = Rng::seed_from(1);
        let y = GridImage::random(4, 4, 1, &mut rng);
        assert_eq!(denoise_objective(&y, &y, 0.3, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn no_smoothing_term_is_half_squared_error() {
        let a = GridImage::new(1, 2, 1, vec![1.0, 2.0]).unwrap();
        let b = GridImage::new(1, 2, 1, vec![0.0, 0.0]).unwrap();
        assert_eq!(denoise_objective(&a, &b, 0.0, 0.01).unwrap(), 2.5);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = Rng::seed_from(2);
        let a = GridImage::random(3, 4, 2, &mut rng);
        let b = GridImage::random(3, 4, 2, &mut rng);
        let (_, g) = denoise_objective_grad(&a, &b, 0.1, 0.05).unwrap();
        let fd = finite_diff_grad(
            |v| denoise_objective(&GridImage::new(3, 4, 2, v.to_vec()).unwrap(), &b, 0.1, 0.05).unwrap(),
            a.data(),
            1e-6,
        )
        .unwrap();
        assert!(vecops::rel_err(&g, &fd, 1e-8) < 1e-6);
    }

    #[test]
    fn rejects_bad_arguments() {
        let a = GridImage::zeros(2, 2, 1);
        assert!(denoise_objective(&a, &GridImage::zeros(2, 3, 1), 0.1, 0.1).is_err());
        assert!(denoise_objective(&a, &a, 0.1, 0.0).is_err());
    }
}
