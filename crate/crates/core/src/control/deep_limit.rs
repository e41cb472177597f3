use super::{dataset_loss, train_reduced, Dataset, LossKind, Regularizer, TrainConfig};
use crate::blocks::{Activation, Block, Network};
use crate::numcore::Rng;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DeepLimitConfig {
    /// Training schedule shared by every `K` and restart; the seed field is
    /// replaced per restart.
    pub train: TrainConfig,
    pub restarts: usize,
    /// Total integration time `T`; each of the `K` layers gets `h = T/K`.
    pub horizon: f64,
    pub activation: Activation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeepLimitRow {
    pub k: usize,
    /// Smallest regularized objective over the restarts.
    pub best_loss: f64,
    pub restarts: usize,
}

/// Trains `K` Euler blocks plus a linear head with the `H1` penalty for each
/// `K` in `ks`.
///
/// Restart `r` draws one block and one head from a stream keyed by
/// `(seed, r)` and copies the block into every layer, so all depths start from
/// the same constant-in-time parameter function.
pub fn deep_limit_experiment(data: &Dataset, ks: &[usize], lambda: f64, cfg: &DeepLimitConfig, seed: u64) -> Result<Vec<DeepLimitRow>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Precondition(format!("the deep-limit experiment needs λ > 0, got {lambda}")));
    }
    if ks.is_empty() || ks[0] == 0 || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition(format!("layer counts must be positive and strictly increasing, got {ks:?}")));
    }
    if cfg.restarts == 0 || !(cfg.horizon > 0.0) {
        return Err(Error::Precondition("need at least one restart and a positive horizon".into()));
    }
    let dim = data.feature_dim().ok_or_else(|| Error::Precondition("empty dataset".into()))?;
    let out = data.label_dim().unwrap_or(0);
    let reg = Regularizer::H1 { weight: lambda };
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut best = f64::INFINITY;
        for r in 0..cfg.restarts {
            let mut rng = Rng::seed_from(seed).fork(r as u64);
            let base = Block::euler(dim, cfg.horizon / k as f64, cfg.activation, &mut rng)?;
            let head = Block::linear_head(dim, out, &mut rng);
            let mut blocks = vec![base; k];
            blocks.push(head);
            let mut net = Network::new(blocks)?;
            let mut train = cfg.train.clone();
            train.seed = seed.wrapping_add(r as u64);
            train_reduced(&mut net, data, LossKind::Squared, &reg, &train)?;
            let objective = dataset_loss(&net, data, LossKind::Squared)? + reg.eval(&net, &net.params())?.0;
            best = best.min(objective);
        }
        rows.push(DeepLimitRow { k, best_loss: best, restarts: cfg.restarts });
    }
    Ok(rows)
}
