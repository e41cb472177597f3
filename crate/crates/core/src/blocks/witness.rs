use crate::numcore::{vecops, Rng};
use crate::{Error, Result};

/// Empirical one-sided Lipschitz constant
/// `max ⟨f(z₂)−f(z₁), z₂−z₁⟩ / ‖z₂−z₁‖²` over `samples` random pairs drawn
/// uniformly from the ball of the given radius.
///
/// Pairs with coincident points contribute a ratio of 0.
pub fn one_sided_lipschitz_witness<F>(mut f: F, dim: usize, samples: usize, radius: f64, seed: u64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if samples == 0 {
        return Err(Error::Precondition("witness needs at least one sample".into()));
    }
    let mut rng = Rng::seed_from(seed);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..samples {
        let z1 = rng.in_ball(dim, radius);
        let z2 = rng.in_ball(dim, radius);
        let dz = vecops::sub(&z2, &z1);
        let den = vecops::dot(&dz, &dz);
        let ratio = if den == 0.0 {
            0.0
        } else {
            let df = vecops::sub(&f(&z2)?, &f(&z1)?);
            vecops::dot(&df, &dz) / den
        };
        best = best.max(ratio);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{Activation, Block};

    #[test]
    fn zero_field() {
        let w = one_sided_lipschitz_witness(|z| Ok(vec![0.0; z.len()]), 3, 100, 1.0, 1).unwrap();
        assert_eq!(w, 0.0);
    }

    #[test]
    fn identity_field() {
        let w = one_sided_lipschitz_witness(|z| Ok(z.to_vec()), 4, 100, 2.0, 1).unwrap();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_flow_is_monotone() {
        let mut rng = Rng::seed_from(17);
        for act in [Activation::Tanh, Activation::Relu] {
            let b = Block::gradient_flow(5, 7, 0.1, act, &mut rng).unwrap();
            let w = one_sided_lipschitz_witness(|z| b.vector_field(z), 5, 2000, 3.0, 2).unwrap();
            assert!(w <= 1e-12, "{act:?}: {w}");
        }
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(one_sided_lipschitz_witness(|z| Ok(z.to_vec()), 2, 0, 1.0, 0).is_err());
    }
}
