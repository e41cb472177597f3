use crate::blocks::{Block, BlockKind};
use crate::numcore::vecops;
use crate::{Error, Result};

/// Parameter gradient of `L(z(T))` for the continuous-time system that uses
/// block `k`'s vector field on `[tᵏ, tᵏ⁺¹)`, `tᵏ⁺¹ − tᵏ = hᵏ`.
///
/// The state is integrated forward with RK4, `substeps` per layer. The
/// costate `ṗ = −(∂f/∂z)ᵀp` and the integrals `∫ (∂f/∂θ)ᵀ p dt` are then
/// integrated backward jointly with the state, again with RK4. Only Euler
/// and gradient-flow blocks are supported, since their discrete maps are
/// `z + h·f(z)`.
pub fn continuous_adjoint_gradient<F>(blocks: &[Block], x: &[f64], substeps: usize, loss_grad: F) -> Result<(Vec<f64>, Vec<Vec<f64>>)>
where
    F: FnOnce(&[f64]) -> Result<Vec<f64>>,
{
    if substeps == 0 {
        return Err(Error::Precondition("need at least one substep".into()));
    }
    let mut fields = Vec::with_capacity(blocks.len());
    for b in blocks {
        if !matches!(b.kind(), BlockKind::EulerResidual | BlockKind::GradientFlow) {
            return Err(Error::Precondition(format!("{} blocks are not of the form z + h·f(z)", b.kind().name())));
        }
        let mut unit = b.clone();
        unit.set_step(1.0)?;
        fields.push(unit);
    }

    let mut z = x.to_vec();
    for (b, orig) in fields.iter().zip(blocks) {
        let dt = orig.step() / substeps as f64;
        for _ in 0..substeps {
            z = rk4(&z, dt, |s| b.vector_field(s))?;
        }
    }
    let z_final = z.clone();
    let mut p = loss_grad(&z_final)?;
    let mut grads = vec![Vec::new(); blocks.len()];
    for k in (0..fields.len()).rev() {
        let b = &fields[k];
        let np = b.num_params();
        let n = z.len();
        let dt = -blocks[k].step() / substeps as f64;
        // augmented state [z, p, g] integrated from tᵏ⁺¹ back to tᵏ
        let mut aug: Vec<f64> = z.iter().chain(&p).copied().chain(std::iter::repeat(0.0).take(np)).collect();
        for _ in 0..substeps {
            aug = rk4(&aug, dt, |s| {
                let (zs, ps) = (&s[..n], &s[n..2 * n]);
                let mut g = vec![0.0; np];
                // unit-step map z + f(z): its vjp is (p + Jᵀp, (∂f/∂θ)ᵀp)
                let dz = b.vjp(zs, ps, &mut g)?;
                let mut d = b.vector_field(zs)?;
                d.extend(dz.iter().zip(ps).map(|(a, pi)| -(a - pi)));
                d.extend(g.iter().map(|v| -v));
                Ok(d)
            })?;
        }
        z = aug[..n].to_vec();
        p = aug[n..2 * n].to_vec();
        grads[k] = aug[2 * n..].to_vec();
    }
    Ok((z_final, grads))
}

fn rk4<F>(y: &[f64], dt: f64, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let k1 = f(y)?;
    let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, k)| a + 0.5 * dt * k).collect();
    let k2 = f(&y2)?;
    let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, k)| a + 0.5 * dt * k).collect();
    let k3 = f(&y3)?;
    let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, k)| a + dt * k).collect();
    let k4 = f(&y4)?;
    let mut out = y.to_vec();
    for i in 0..out.len() {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if !vecops::all_finite(&out) {
        return Err(Error::NonFinite("RK4 step produced a non-finite state".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{Activation, Network};
    use crate::numcore::Rng;

    fn relative_gap(k: usize, amplitude: f64) -> f64 {
        let mut rng = Rng::seed_from(21);
        let base = Block::euler(3, 1.0 / k as f64, Activation::Tanh, &mut rng).unwrap();
        // smoothly varying piecewise-constant parameters
        let dir = rng.normal_vec(base.num_params());
        let blocks: Vec<Block> = (0..k)
            .map(|j| {
                let mut b = base.clone();
                let s = (j as f64 / k as f64 * 3.0).sin();
                vecops::axpy(amplitude * s, &dir, b.params_mut());
                b
            })
            .collect();
        let x = [0.4, -0.7, 1.1];
        let target = [1.0, 0.0, -1.0];
        let net = Network::new(blocks.clone()).unwrap();
        let trace = net.forward(&x).unwrap();
        let lg: Vec<f64> = trace.output().iter().zip(&target).map(|(a, b)| a - b).collect();
        let discrete = net.backprop(&trace, &lg).unwrap().params.into_data();
        let (_, cont) = continuous_adjoint_gradient(&blocks, &x, 20, |z| Ok(z.iter().zip(&target).map(|(a, b)| a - b).collect())).unwrap();
        let cont: Vec<f64> = cont.concat();
        vecops::norm(&vecops::sub(&discrete, &cont)) / vecops::norm(&cont)
    }

    #[test]
    fn discrete_gradient_matches_continuous_at_fine_resolution() {
        // constant in time; varying parameters add to the O(h) gap
        let rel = relative_gap(64, 0.0);
        assert!(rel <= 1e-2, "relative error {rel}");
    }

    #[test]
    fn gap_is_first_order_in_step() {
        let ratio = relative_gap(64, 0.5) / relative_gap(128, 0.5);
        assert!((1.8..2.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rejects_non_residual_blocks() {
        let mut rng = Rng::seed_from(1);
        let b = Block::dense(2, 2, Activation::Tanh, &mut rng);
        assert!(continuous_adjoint_gradient(&[b], &[0.0, 0.0], 4, |z| Ok(z.to_vec())).is_err());
    }
}
