use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    /// `½‖z − y‖²`
    Squared,
    /// Cross-entropy of `softmax(z)` against a probability vector `y`.
    SoftmaxCrossEntropy,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Squared => "squared",
            LossKind::SoftmaxCrossEntropy => "softmax_cross_entropy",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "squared" => Ok(LossKind::Squared),
            "softmax_cross_entropy" | "cross_entropy" => Ok(LossKind::SoftmaxCrossEntropy),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }

    pub fn eval(self, prediction: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        loss_eval(self, prediction, target)
    }
}

/// Loss value and its gradient with respect to `prediction`.
pub fn loss_eval(kind: LossKind, prediction: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if prediction.len() != target.len() {
        return Err(Error::shape(format!("prediction has length {}, target {}", prediction.len(), target.len())));
    }
    match kind {
        LossKind::Squared => {
            let g: Vec<f64> = prediction.iter().zip(target).map(|(p, y)| p - y).collect();
            Ok((0.5 * g.iter().map(|v| v * v).sum::<f64>(), g))
        }
        LossKind::SoftmaxCrossEntropy => {
            if prediction.is_empty() {
                return Err(Error::shape("cross-entropy needs at least one logit"));
            }
            let max = prediction.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = prediction.iter().map(|z| (z - max).exp()).sum();
            let lse = max + sum.ln();
            let mass: f64 = target.iter().sum();
            let value = lse * mass - prediction.iter().zip(target).map(|(z, y)| z * y).sum::<f64>();
            let g = prediction.iter().zip(target).map(|(z, y)| mass * (z - lse).exp() - y).collect();
            Ok((value.max(0.0), g))
        }
    }
}
