use rayon::prelude::*;

use super::{dataset_loss, Dataset, LossKind};
use crate::blocks::{Block, Network, ParamVector};
use crate::numcore::vecops;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MsaConfig {
    pub sweeps: usize,
    /// Gradient-ascent steps on each layer's Hamiltonian per sweep.
    pub inner_steps: usize,
    pub inner_lr: f64,
}

impl Default for MsaConfig {
    fn default() -> Self {
        Self { sweeps: 10, inner_steps: 10, inner_lr: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MsaResult {
    pub params: ParamVector,
    /// Mean data loss before the first sweep and after every sweep.
    pub losses: Vec<f64>,
}

/// Method of successive approximation over the full dataset.
///
/// Each sweep runs the forward pass, the discrete costate recursion
/// `pᵏ = (∂Fᵏ/∂z)ᵀ pᵏ⁺¹` with `pᴷ = −∇L / N`, and then, for every layer
/// independently, ascends `Hᵏ(θ) = Σₙ ⟨pₙᵏ⁺¹, Fᵏ(zₙᵏ, θ)⟩` with states and
/// costates frozen.
pub fn msa_iterate(net: &mut Network, data: &Dataset, loss: LossKind, cfg: &MsaConfig) -> Result<MsaResult> {
    if data.is_empty() {
        return Err(Error::Precondition("MSA needs at least one sample".into()));
    }
    if !(cfg.inner_lr > 0.0) {
        return Err(Error::Precondition(format!("inner step size must be positive, got {}", cfg.inner_lr)));
    }
    let mut losses = vec![dataset_loss(net, data, loss)?];
    let inv_n = 1.0 / data.len() as f64;
    for _ in 0..cfg.sweeps {
        // states[n][k] = zₙᵏ, costates[n][k] = pₙᵏ⁺¹
        let sweep: Vec<Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)>> = (0..data.len())
            .into_par_iter()
            .map(|n| {
                let trace = net.forward(&data.features[n])?;
                let (_, g) = loss.eval(trace.output(), &data.labels[n])?;
                let mut p: Vec<f64> = g.iter().map(|v| -inv_n * v).collect();
                let mut costates = vec![Vec::new(); net.len()];
                for k in (0..net.len()).rev() {
                    let b = &net.blocks()[k];
                    let mut scratch = vec![0.0; b.num_params()];
                    let next = b.vjp(&trace.states()[k], &p, &mut scratch)?;
                    costates[k] = std::mem::replace(&mut p, next);
                }
                Ok((trace.states().to_vec(), costates))
            })
            .collect();
        let sweep = sweep.into_iter().collect::<Result<Vec<_>>>()?;

        let updated: Vec<Result<Vec<f64>>> = (0..net.len())
            .into_par_iter()
            .map(|k| ascend(&net.blocks()[k], k, &sweep, cfg))
            .collect();
        for (k, theta) in updated.into_iter().enumerate() {
            net.blocks_mut()[k].params_mut().copy_from_slice(&theta?);
        }
        losses.push(dataset_loss(net, data, loss)?);
    }
    Ok(MsaResult { params: net.params(), losses })
}

fn ascend(block: &Block, k: usize, sweep: &[(Vec<Vec<f64>>, Vec<Vec<f64>>)], cfg: &MsaConfig) -> Result<Vec<f64>> {
    let mut b = block.clone();
    let start_norm = vecops::norm(b.params());
    for _ in 0..cfg.inner_steps {
        let mut grad = vec![0.0; b.num_params()];
        for (states, costates) in sweep {
            b.vjp(&states[k], &costates[k], &mut grad)?;
        }
        vecops::axpy(cfg.inner_lr, &grad, b.params_mut());
        if !vecops::all_finite(b.params()) || vecops::norm(b.params()) > 1e8 * (1.0 + start_norm) {
            return Err(Error::Divergence { layer: k });
        }
    }
    Ok(b.params().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::Activation;
    use crate::numcore::{Rng, Tensor};

    fn scalar_data() -> Dataset {
        let xs = [-1.0, -0.3, 0.4, 1.2, 2.0];
        let ys = [-1.7, -0.2, 1.1, 2.3, 4.4];
        Dataset::new("toy", 0, xs.iter().map(|x| vec![*x]).collect(), ys.iter().map(|y| vec![*y]).collect()).unwrap()
    }

    fn least_squares_line(d: &Dataset) -> (f64, f64) {
        let n = d.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for (x, y) in d.features.iter().zip(&d.labels) {
            sx += x[0];
            sy += y[0];
            sxx += x[0] * x[0];
            sxy += x[0] * y[0];
        }
        let a = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        (a, (sy - a * sx) / n)
    }

    fn linear_net(a: f64, b: f64) -> Network {
        Network::new(vec![Block::linear_head_from(&Tensor::matrix(1, 1, vec![a]).unwrap(), &[b]).unwrap()]).unwrap()
    }

    #[test]
    fn scalar_linear_fixed_point_matches_least_squares() {
        let d = scalar_data();
        let (a, b) = least_squares_line(&d);
        let mut net = linear_net(0.0, 0.0);
        let cfg = MsaConfig { sweeps: 400, inner_steps: 10, inner_lr: 0.02 };
        let res = msa_iterate(&mut net, &d, LossKind::Squared, &cfg).unwrap();
        assert!((res.params.data()[0] - a).abs() < 1e-6);
        assert!((res.params.data()[1] - b).abs() < 1e-6);
        for w in res.losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn critical_point_is_kept() {
        let d = scalar_data();
        let (a, b) = least_squares_line(&d);
        let mut net = linear_net(a, b);
        let res = msa_iterate(&mut net, &d, LossKind::Squared, &MsaConfig::default()).unwrap();
        assert!((res.params.data()[0] - a).abs() < 1e-8 && (res.params.data()[1] - b).abs() < 1e-8);
    }

    #[test]
    fn zero_sweeps() {
        let d = scalar_data();
        let mut rng = Rng::seed_from(1);
        let mut net = Network::new(vec![Block::euler(1, 0.5, Activation::Tanh, &mut rng).unwrap()]).unwrap();
        let before = net.params();
        let res = msa_iterate(&mut net, &d, LossKind::Squared, &MsaConfig { sweeps: 0, ..Default::default() }).unwrap();
        assert_eq!(res.params, before);
        assert_eq!(res.losses.len(), 1);
    }

    #[test]
    fn divergence_names_layer() {
        let d = scalar_data();
        let mut net = Network::new(vec![
            Block::linear_head_from(&Tensor::identity(1), &[0.0]).unwrap(),
            Block::linear_head_from(&Tensor::matrix(1, 1, vec![3.0]).unwrap(), &[0.0]).unwrap(),
        ])
        .unwrap();
        let err = msa_iterate(&mut net, &d, LossKind::Squared, &MsaConfig { sweeps: 50, inner_steps: 10, inner_lr: 1e3 }).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }
}
