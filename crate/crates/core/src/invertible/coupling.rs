use crate::blocks::{Activation, Block, Network};
use crate::numcore::Rng;
use crate::{Error, Result};

/// Log-scales of affine couplings are clamped to `[-SCALE_CLAMP, SCALE_CLAMP]`.
pub const SCALE_CLAMP: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CouplingLaw {
    /// `y₂ = x₂ + f(x₁)`
    Additive,
    /// `y₂ = x₂ ⊙ exp(s) + t` with `(s, t) = f(x₁)`
    Affine,
}

impl CouplingLaw {
    pub(crate) fn code(self) -> u64 {
        match self {
            CouplingLaw::Additive => 0,
            CouplingLaw::Affine => 1,
        }
    }

    pub(crate) fn from_code(c: u64) -> Result<Self> {
        match c {
            0 => Ok(CouplingLaw::Additive),
            1 => Ok(CouplingLaw::Affine),
            _ => Err(Error::Format(format!("unknown coupling law {c}"))),
        }
    }
}

/// Shear-type layer `y₁ = x₁, y₂ = γ(x₂, f(x₁))`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingLayer {
    keep: Vec<usize>,
    update: Vec<usize>,
    law: CouplingLaw,
    net: Network,
}

impl CouplingLayer {
    /// `mask[i]` selects coordinates passed through unchanged (the set `I₁`).
    pub fn new(mask: &[bool], law: CouplingLaw, net: Network) -> Result<Self> {
        let keep: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        let update: Vec<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
        if keep.is_empty() || update.is_empty() {
            return Err(Error::Precondition("both parts of a coupling partition must be nonempty".into()));
        }
        let out = match law {
            CouplingLaw::Additive => update.len(),
            CouplingLaw::Affine => 2 * update.len(),
        };
        if !net.is_empty() && (net.in_dim() != Some(keep.len()) || net.out_dim() != Some(out)) {
            return Err(Error::shape(format!(
                "coupling subnet must map {} to {out} features, got {:?} to {:?}",
                keep.len(),
                net.in_dim(),
                net.out_dim()
            )));
        }
        if net.is_empty() && keep.len() != out {
            return Err(Error::shape("an empty coupling subnet needs matching part sizes"));
        }
        Ok(Self { keep, update, law, net })
    }

    /// Coupling with a one-hidden-layer tanh subnet and the alternating
    /// partition: layer `parity` keeps the coordinates `i ≡ parity (mod 2)`.
    pub fn alternating(dim: usize, parity: usize, law: CouplingLaw, hidden: usize, rng: &mut Rng) -> Result<Self> {
        let mask = alternating_mask(dim, parity);
        let n1 = mask.iter().filter(|m| **m).count();
        let n2 = dim - n1;
        let out = match law {
            CouplingLaw::Additive => n2,
            CouplingLaw::Affine => 2 * n2,
        };
        let net = Network::new(vec![
            Block::dense(n1, hidden, Activation::Tanh, rng),
            Block::linear_head(hidden, out, rng),
        ])?;
        Self::new(&mask, law, net)
    }

    pub fn dim(&self) -> usize {
        self.keep.len() + self.update.len()
    }

    pub fn law(&self) -> CouplingLaw {
        self.law
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.dim()];
        self.keep.iter().for_each(|&i| m[i] = true);
        m
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::shape(format!("coupling layer of dim {} got input of length {}", self.dim(), x.len())));
        }
        Ok(())
    }

    fn gather(&self, x: &[f64], idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| x[i]).collect()
    }

    /// `(s, t)` for affine layers (`s` clamped), `(∅, f)` for additive ones.
    fn conditioner(&self, x1: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let out = self.net.predict(x1)?;
        Ok(match self.law {
            CouplingLaw::Additive => (Vec::new(), out),
            CouplingLaw::Affine => {
                let n = self.update.len();
                let s = out[..n].iter().map(|v| v.clamp(-SCALE_CLAMP, SCALE_CLAMP)).collect();
                (s, out[n..].to_vec())
            }
        })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let (s, t) = self.conditioner(&self.gather(x, &self.keep))?;
        let mut y = x.to_vec();
        for (k, &i) in self.update.iter().enumerate() {
            y[i] = match self.law {
                CouplingLaw::Additive => x[i] + t[k],
                CouplingLaw::Affine => x[i] * s[k].exp() + t[k],
            };
        }
        Ok(y)
    }

    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y)?;
        let (s, t) = self.conditioner(&self.gather(y, &self.keep))?;
        let mut x = y.to_vec();
        for (k, &i) in self.update.iter().enumerate() {
            x[i] = match self.law {
                CouplingLaw::Additive => y[i] - t[k],
                CouplingLaw::Affine => (y[i] - t[k]) * (-s[k]).exp(),
            };
        }
        Ok(x)
    }

    pub fn logdet(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        match self.law {
            CouplingLaw::Additive => Ok(0.0),
            CouplingLaw::Affine => Ok(self.conditioner(&self.gather(x, &self.keep))?.0.iter().sum()),
        }
    }

    /// Gradient of `⟨dy, y(x)⟩ + c·logdet(x)`; parameters accumulate into `grad`.
    pub fn vjp(&self, x: &[f64], dy: &[f64], c: f64, grad: &mut [f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        self.check(dy)?;
        let x1 = self.gather(x, &self.keep);
        let trace = self.net.forward(&x1)?;
        let out = trace.output();
        let n = self.update.len();
        let dout: Vec<f64> = match self.law {
            CouplingLaw::Additive => self.update.iter().map(|&i| dy[i]).collect(),
            CouplingLaw::Affine => {
                let mut d = vec![0.0; 2 * n];
                for (k, &i) in self.update.iter().enumerate() {
                    let raw = out[k];
                    let s = raw.clamp(-SCALE_CLAMP, SCALE_CLAMP);
                    let inside = raw > -SCALE_CLAMP && raw < SCALE_CLAMP;
                    if inside {
                        d[k] = dy[i] * x[i] * s.exp() + c;
                    }
                    d[n + k] = dy[i];
                }
                d
            }
        };
        let g = self.net.backprop(&trace, &dout)?;
        crate::numcore::vecops::axpy(1.0, g.params.data(), grad);
        let mut dx = vec![0.0; self.dim()];
        for (k, &i) in self.keep.iter().enumerate() {
            dx[i] = dy[i] + g.input[k];
        }
        for (k, &i) in self.update.iter().enumerate() {
            dx[i] = match self.law {
                CouplingLaw::Additive => dy[i],
                CouplingLaw::Affine => dy[i] * out[k].clamp(-SCALE_CLAMP, SCALE_CLAMP).exp(),
            };
        }
        Ok(dx)
    }
}

pub(crate) fn alternating_mask(dim: usize, parity: usize) -> Vec<bool> {
    (0..dim).map(|i| i % 2 == parity % 2).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{finite_diff_jacobian, logabsdet_lu, Tensor};

    fn copy_net() -> Network {
        Network::new(vec![Block::linear_head_from(&Tensor::identity(1), &[0.0]).unwrap()]).unwrap()
    }

    #[test]
    fn additive_zero_subnet_is_identity() {
        let net = Network::new(vec![Block::linear_head_from(&Tensor::zeros(&[1, 1]), &[0.0]).unwrap()]).unwrap();
        let l = CouplingLayer::new(&[true, false], CouplingLaw::Additive, net).unwrap();
        assert_eq!(l.forward(&[0.3, -2.0]).unwrap(), vec![0.3, -2.0]);
    }

    #[test]
    fn additive_hand_example() {
        let l = CouplingLayer::new(&[true, false], CouplingLaw::Additive, copy_net()).unwrap();
        assert_eq!(l.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 3.0]);
        assert_eq!(l.inverse(&[1.0, 3.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(l.logdet(&[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn affine_zero_conditioner_is_identity() {
        let net = Network::new(vec![Block::linear_head_from(&Tensor::zeros(&[2, 1]), &[0.0, 0.0]).unwrap()]).unwrap();
        let l = CouplingLayer::new(&[false, true], CouplingLaw::Affine, net).unwrap();
        assert_eq!(l.forward(&[0.7, 1.1]).unwrap(), vec![0.7, 1.1]);
    }

    #[test]
    fn affine_logdet_is_sum_of_log_scales() {
        // s = (0.5, -0.5) regardless of x₁
        let a = Tensor::zeros(&[4, 1]);
        let net = Network::new(vec![Block::linear_head_from(&a, &[0.5, -0.5, 0.0, 0.0]).unwrap()]).unwrap();
        let l = CouplingLayer::new(&[true, false, false], CouplingLaw::Affine, net).unwrap();
        assert!(l.logdet(&[1.0, 2.0, 3.0]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn affine_logdet_matches_jacobian() {
        let mut rng = Rng::seed_from(12);
        let l = CouplingLayer::alternating(4, 1, CouplingLaw::Affine, 6, &mut rng).unwrap();
        let x = rng.normal_vec(4);
        let j = finite_diff_jacobian(|v| l.forward(v), &x, 1e-6).unwrap();
        assert!((logabsdet_lu(&j).unwrap() - l.logdet(&x).unwrap()).abs() < 1e-5);
    }

    #[test]
    fn partition_must_be_proper() {
        assert!(CouplingLayer::new(&[true, true], CouplingLaw::Additive, Network::default()).is_err());
    }

    #[test]
    fn alternating_masks_flip() {
        assert_eq!(alternating_mask(3, 0), vec![true, false, true]);
        assert_eq!(alternating_mask(3, 1), vec![false, true, false]);
    }
}
