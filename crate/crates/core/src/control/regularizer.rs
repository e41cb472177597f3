use crate::blocks::{Network, ParamVector};
use crate::numcore::project_simplex;
use crate::{Error, Result};

/// Penalty on network parameters.
///
/// `H1` treats the ODE blocks as samples `θ(t^k)` of a time-dependent
/// parameter and applies [`h1_penalty`] to them; every other block gets the
/// `L2` term with the same weight. `TimestepSimplex` has zero value and acts
/// only through [`prox_timestep`] on the ODE step sizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularizer {
    None,
    /// `λ‖θ‖²`
    L2 { weight: f64 },
    /// `λ‖θ‖₁`
    L1 { weight: f64 },
    H1 { weight: f64 },
    TimestepSimplex { total: f64 },
}

impl Regularizer {
    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::None => "none",
            Regularizer::L2 { .. } => "l2",
            Regularizer::L1 { .. } => "l1",
            Regularizer::H1 { .. } => "h1",
            Regularizer::TimestepSimplex { .. } => "timestep",
        }
    }

    /// Builds a regularizer from its name and scalar parameter (weight, or
    /// the horizon for `timestep`).
    pub fn from_name(name: &str, value: f64) -> Result<Self> {
        let r = match name {
            "none" => Regularizer::None,
            "l2" => Regularizer::L2 { weight: value },
            "l1" => Regularizer::L1 { weight: value },
            "h1" => Regularizer::H1 { weight: value },
            "timestep" => Regularizer::TimestepSimplex { total: value },
            other => return Err(Error::UnknownName(other.to_string())),
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Regularizer::None => true,
            Regularizer::L2 { weight } | Regularizer::L1 { weight } | Regularizer::H1 { weight } => weight >= 0.0 && weight.is_finite(),
            Regularizer::TimestepSimplex { total } => total > 0.0 && total.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!("invalid regularizer {self:?}")))
        }
    }

    /// Value and gradient at `params`, laid out like `net`.
    pub fn eval(&self, net: &Network, params: &ParamVector) -> Result<(f64, ParamVector)> {
        if params.offsets() != net.zero_params().offsets() {
            return Err(Error::shape("parameter vector layout does not match the network"));
        }
        let mut grad = ParamVector::zeros(&net.param_sizes());
        let value = match *self {
            Regularizer::None | Regularizer::TimestepSimplex { .. } => 0.0,
            Regularizer::L2 { weight } => {
                grad.data_mut().iter_mut().zip(params.data()).for_each(|(g, t)| *g = 2.0 * weight * t);
                weight * params.data().iter().map(|t| t * t).sum::<f64>()
            }
            Regularizer::L1 { weight } => {
                grad.data_mut().iter_mut().zip(params.data()).for_each(|(g, t)| *g = weight * sign(*t));
                weight * params.data().iter().map(|t| t.abs()).sum::<f64>()
            }
            Regularizer::H1 { weight } => {
                let ode: Vec<usize> = (0..net.len()).filter(|&k| net.blocks()[k].kind().is_ode()).collect();
                let mut value = 0.0;
                if !ode.is_empty() {
                    let layers: Vec<&[f64]> = ode.iter().map(|&k| params.block(k)).collect();
                    let (v, g) = h1_penalty(&layers, weight)?;
                    value += v;
                    for (&k, gk) in ode.iter().zip(g) {
                        grad.block_mut(k).copy_from_slice(&gk);
                    }
                }
                for k in (0..net.len()).filter(|k| !ode.contains(k)) {
                    let t = params.block(k);
                    value += weight * t.iter().map(|v| v * v).sum::<f64>();
                    grad.block_mut(k).iter_mut().zip(t).for_each(|(g, v)| *g = 2.0 * weight * v);
                }
                value
            }
        };
        Ok((value, grad))
    }
}

fn sign(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `λ(‖θ⁰‖² + K Σₖ ‖θᵏ⁺¹ − θᵏ‖²)` over `K` layers, with its gradient.
pub fn h1_penalty(layers: &[&[f64]], lambda: f64) -> Result<(f64, Vec<Vec<f64>>)> {
    let k = layers.len();
    if k == 0 {
        return Err(Error::Precondition("h1 penalty needs at least one layer".into()));
    }
    let n = layers[0].len();
    if layers.iter().any(|l| l.len() != n) {
        return Err(Error::shape("h1 penalty needs layers of equal parameter count"));
    }
    let kf = k as f64;
    let mut grads: Vec<Vec<f64>> = vec![vec![0.0; n]; k];
    let mut value: f64 = layers[0].iter().map(|v| v * v).sum();
    grads[0].iter_mut().zip(layers[0]).for_each(|(g, v)| *g = 2.0 * lambda * v);
    for j in 0..k - 1 {
        for i in 0..n {
            let d = layers[j + 1][i] - layers[j][i];
            value += kf * d * d;
            grads[j + 1][i] += 2.0 * lambda * kf * d;
            grads[j][i] -= 2.0 * lambda * kf * d;
        }
    }
    Ok((lambda * value, grads))
}

/// Projects step sizes onto `{h ≥ 0, Σh = T}`.
pub fn prox_timestep(h: &[f64], total: f64) -> Result<Vec<f64>> {
    project_simplex(h, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{Activation, Block};
    use crate::numcore::{finite_diff_grad, vecops, Rng};

    #[test]
    fn h1_examples() {
        let (v, _) = h1_penalty(&[&[0.0], &[1.0]], 1.0).unwrap();
        assert_eq!(v, 2.0);
        let t = [0.5, -1.0];
        let (v, g) = h1_penalty(&[&t[..], &t, &t], 0.3).unwrap();
        assert!((v - 0.3 * 1.25).abs() < 1e-15);
        assert!(g[1].iter().all(|x| *x == 0.0));
        let z: &[f64] = &[0.0, 0.0];
        assert_eq!(h1_penalty(&[z; 4], 2.0).unwrap().0, 0.0);
    }

    fn test_net(rng: &mut Rng) -> Network {
        let mut blocks = vec![];
        for _ in 0..3 {
            blocks.push(Block::euler(2, 0.3, Activation::Tanh, rng).unwrap());
        }
        blocks.push(Block::linear_head(2, 1, rng));
        Network::new(blocks).unwrap()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = Rng::seed_from(3);
        let net = test_net(&mut rng);
        let mut p = net.params();
        p.data_mut().iter_mut().for_each(|v| *v += 0.1 + rng.normal());
        for reg in [Regularizer::L2 { weight: 0.7 }, Regularizer::L1 { weight: 0.4 }, Regularizer::H1 { weight: 0.2 }] {
            let (_, g) = reg.eval(&net, &p).unwrap();
            let sizes = net.param_sizes();
            let fd = finite_diff_grad(
                |x| reg.eval(&net, &ParamVector::from_parts(&sizes, x.to_vec()).unwrap()).unwrap().0,
                p.data(),
                1e-6,
            )
            .unwrap();
            assert!(vecops::max_abs_diff(&fd, g.data()) <= 1e-6, "{reg:?}");
        }
    }

    #[test]
    fn coercive_along_rays() {
        let mut rng = Rng::seed_from(4);
        let net = test_net(&mut rng);
        let dir = net.params();
        for reg in [Regularizer::L2 { weight: 1e-3 }, Regularizer::H1 { weight: 1e-3 }] {
            let vals: Vec<f64> = [1.0, 10.0, 100.0]
                .iter()
                .map(|j| {
                    let mut p = dir.clone();
                    p.scale(*j);
                    reg.eval(&net, &p).unwrap().0
                })
                .collect();
            assert!(vals[0] < vals[1] && vals[1] < vals[2] && vals[2] > 100.0 * vals[0]);
        }
    }

    #[test]
    fn timestep_prox() {
        assert_eq!(prox_timestep(&[0.25; 4], 1.0).unwrap(), vec![0.25; 4]);
        assert_eq!(prox_timestep(&[-3.0], 2.0).unwrap(), vec![2.0]);
        let p = prox_timestep(&[-0.5, 0.7, 0.9, 0.1], 1.0).unwrap();
        assert!(p.iter().all(|v| *v >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn names_roundtrip() {
        for n in ["none", "l2", "l1", "h1", "timestep"] {
            assert_eq!(Regularizer::from_name(n, 1.0).unwrap().name(), n);
        }
        assert!(Regularizer::from_name("tv", 1.0).is_err());
        assert!(Regularizer::from_name("l2", -1.0).is_err());
    }
}
