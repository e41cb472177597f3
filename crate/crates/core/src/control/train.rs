use std::time::Instant;

use rayon::prelude::*;

use super::{Dataset, LossKind, Regularizer};
use crate::blocks::{Network, ParamVector};
use crate::numcore::{vecops, Rng};
use crate::optim::{OptimizerConfig, OptimizerState, StepSchedule};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub schedule: StepSchedule,
    /// Record wall-clock milliseconds in the log. Off by default so that logs
    /// are reproducible byte for byte.
    pub timing: bool,
}

impl TrainConfig {
    pub fn new(steps: usize, batch: usize, seed: u64, optimizer: OptimizerConfig) -> Self {
        Self { steps, batch, seed, optimizer, schedule: StepSchedule::Constant, timing: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub epoch: usize,
    /// Mean data loss on the minibatch, before the update.
    pub loss: f64,
    pub reg_value: f64,
    pub grad_norm: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
    pub final_params: ParamVector,
    pub final_steps: Vec<f64>,
}

fn check_dims(net: &Network, data: &Dataset) -> Result<()> {
    if let (Some(d), Some(i)) = (data.feature_dim(), net.in_dim()) {
        if d != i {
            return Err(Error::shape(format!("dataset has {d} features, network expects {i}")));
        }
    }
    if let (Some(d), Some(o)) = (data.label_dim(), net.out_dim()) {
        if d != o {
            return Err(Error::shape(format!("labels have dimension {d}, network outputs {o}")));
        }
    }
    Ok(())
}

/// Mean loss and parameter gradient over the samples `idx`, reduced in index
/// order.
pub(crate) fn batch_loss_grad(net: &Network, data: &Dataset, loss: LossKind, idx: &[usize]) -> Result<(f64, ParamVector, Vec<f64>)> {
    let parts: Vec<Result<(f64, ParamVector, Vec<f64>)>> = idx
        .par_iter()
        .map(|&n| {
            let trace = net.forward(&data.features[n])?;
            let (l, g) = loss.eval(trace.output(), &data.labels[n])?;
            let grads = net.backprop(&trace, &g)?;
            Ok((l, grads.params, grads.steps))
        })
        .collect();
    let scale = 1.0 / idx.len() as f64;
    let mut total = 0.0;
    let mut grad = net.zero_params();
    let mut steps = vec![0.0; net.len()];
    for part in parts {
        let (l, g, s) = part?;
        total += scale * l;
        grad.axpy(scale, &g)?;
        vecops::axpy(scale, &s, &mut steps);
    }
    Ok((total, grad, steps))
}

/// Mean loss over the whole dataset.
pub fn dataset_loss(net: &Network, data: &Dataset, loss: LossKind) -> Result<f64> {
    check_dims(net, data)?;
    if data.is_empty() {
        return Ok(0.0);
    }
    let parts: Vec<Result<f64>> = (0..data.len())
        .into_par_iter()
        .map(|n| loss.eval(&net.predict(&data.features[n])?, &data.labels[n]).map(|(l, _)| l))
        .collect();
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    Ok(total / data.len() as f64)
}

/// Minibatch first-order training of the reduced problem.
///
/// Batches are drawn without replacement from a permutation that is
/// reshuffled at the start of each epoch; a trailing partial batch is
/// dropped. With [`Regularizer::TimestepSimplex`] the ODE step sizes are
/// optimized too and projected onto the simplex after every update.
pub fn train_reduced(net: &mut Network, data: &Dataset, loss: LossKind, reg: &Regularizer, cfg: &TrainConfig) -> Result<TrainLog> {
    reg.validate()?;
    check_dims(net, data)?;
    if cfg.steps > 0 && (cfg.batch == 0 || cfg.batch > data.len()) {
        return Err(Error::Precondition(format!("batch size {} must lie in 1..={}", cfg.batch, data.len())));
    }
    let ode: Vec<usize> = (0..net.len()).filter(|&k| net.blocks()[k].kind().is_ode()).collect();
    let horizon = match *reg {
        Regularizer::TimestepSimplex { total } if !ode.is_empty() => Some(total),
        _ => None,
    };
    let sizes = net.param_sizes();
    let np = net.num_params();
    let mut theta = net.params().into_data();
    if horizon.is_some() {
        let h = net.steps();
        theta.extend(ode.iter().map(|&k| h[k]));
    }
    let mut opt = OptimizerState::new(cfg.optimizer, theta.len())?;
    let mut plateau = cfg.schedule.tracker();
    let mut rng = Rng::seed_from(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = data.len();
    let mut epoch = 0;
    let start = Instant::now();
    let mut rows = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        if cursor + cfg.batch > data.len() {
            if step > 0 {
                epoch += 1;
            }
            rng.shuffle(&mut order);
            cursor = 0;
        }
        let idx = &order[cursor..cursor + cfg.batch];
        cursor += cfg.batch;

        let eval_theta = opt.eval_point(&theta);
        apply(net, &sizes, &eval_theta, &ode, horizon.is_some())?;
        let (data_loss, data_grad, step_grad) = batch_loss_grad(net, data, loss, idx)?;
        let (reg_value, reg_grad) = reg.eval(net, &net.params())?;
        let mut grad = data_grad.into_data();
        vecops::axpy(1.0, reg_grad.data(), &mut grad);
        if horizon.is_some() {
            grad.extend(ode.iter().map(|&k| step_grad[k]));
        }
        let grad_norm = vecops::norm(&grad);
        if !(data_loss.is_finite() && reg_value.is_finite() && grad_norm.is_finite()) {
            return Err(Error::NonFinite(format!(
                "training step {step} (epoch {epoch}): loss {data_loss}, regularizer {reg_value}, gradient norm {grad_norm}"
            )));
        }
        theta = opt.step(&theta, &grad)?;
        if let Some(total) = horizon {
            let projected = super::prox_timestep(&theta[np..], total)?;
            theta[np..].copy_from_slice(&projected);
        }
        if let Some(p) = plateau.as_mut() {
            opt.set_lr_scale(p.observe(data_loss + reg_value));
        }
        let wall_ms = if cfg.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        rows.push(LogRow { step, epoch, loss: data_loss, reg_value, grad_norm, wall_ms });
    }
    apply(net, &sizes, &theta, &ode, horizon.is_some())?;
    Ok(TrainLog { rows, final_params: net.params(), final_steps: net.steps() })
}

fn apply(net: &mut Network, sizes: &[usize], theta: &[f64], ode: &[usize], with_steps: bool) -> Result<()> {
    let np: usize = sizes.iter().sum();
    net.set_params(&ParamVector::from_parts(sizes, theta[..np].to_vec())?)?;
    if with_steps {
        let mut h = net.steps();
        for (&k, v) in ode.iter().zip(&theta[np..]) {
            h[k] = *v;
        }
        net.set_steps(&h)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{Activation, Block};
    use crate::control::make_dataset;

    fn resnet(k: usize, seed: u64) -> Network {
        let mut rng = Rng::seed_from(seed);
        let mut blocks: Vec<Block> = (0..k).map(|_| Block::euler(2, 1.0 / k as f64, Activation::Tanh, &mut rng).unwrap()).collect();
        blocks.push(Block::linear_head(2, 1, &mut rng));
        Network::new(blocks).unwrap()
    }

    #[test]
    fn zero_steps_is_identity() {
        let data = make_dataset("halfmoon2d", 20, 0.05, 1).unwrap();
        let mut net = resnet(3, 2);
        let before = net.clone();
        let log = train_reduced(&mut net, &data, LossKind::Squared, &Regularizer::None, &TrainConfig::new(0, 0, 0, OptimizerConfig::Sgd { lr: 0.1 })).unwrap();
        assert!(log.rows.is_empty());
        assert_eq!(net, before);
    }

    #[test]
    fn reproducible_bitwise() {
        let data = make_dataset("halfmoon2d", 40, 0.05, 1).unwrap();
        let cfg = TrainConfig::new(30, 8, 9, OptimizerConfig::adam_default(0.01));
        let mut a = resnet(4, 3);
        let mut b = resnet(4, 3);
        let la = train_reduced(&mut a, &data, LossKind::Squared, &Regularizer::L2 { weight: 1e-3 }, &cfg).unwrap();
        let lb = train_reduced(&mut b, &data, LossKind::Squared, &Regularizer::L2 { weight: 1e-3 }, &cfg).unwrap();
        assert_eq!(la, lb);
        assert_eq!(la.rows.last().unwrap().epoch, 5);
    }

    #[test]
    fn strong_l2_shrinks_parameters() {
        let data = make_dataset("halfmoon2d", 30, 0.05, 1).unwrap();
        let mut net = resnet(3, 4);
        let before = net.params().norm();
        let cfg = TrainConfig::new(200, 10, 1, OptimizerConfig::Sgd { lr: 1e-4 });
        train_reduced(&mut net, &data, LossKind::Squared, &Regularizer::L2 { weight: 1e3 }, &cfg).unwrap();
        assert!(net.params().norm() < before);
    }

    #[test]
    fn timestep_regularizer_keeps_steps_feasible() {
        let data = make_dataset("halfmoon2d", 30, 0.05, 1).unwrap();
        let mut net = resnet(4, 5);
        let cfg = TrainConfig::new(50, 10, 1, OptimizerConfig::Sgd { lr: 0.5 });
        let log = train_reduced(&mut net, &data, LossKind::Squared, &Regularizer::TimestepSimplex { total: 2.0 }, &cfg).unwrap();
        let h = &log.final_steps[..4];
        assert!(h.iter().all(|v| *v >= 0.0));
        assert!((h.iter().sum::<f64>() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_batch_and_dims() {
        let data = make_dataset("donut3d", 10, 0.0, 1).unwrap();
        let mut net = resnet(2, 1);
        let cfg = TrainConfig::new(1, 5, 0, OptimizerConfig::Sgd { lr: 0.1 });
        assert!(matches!(train_reduced(&mut net, &data, LossKind::Squared, &Regularizer::None, &cfg), Err(Error::Shape(_))));
        let data = make_dataset("halfmoon2d", 10, 0.0, 1).unwrap();
        let cfg = TrainConfig::new(1, 11, 0, OptimizerConfig::Sgd { lr: 0.1 });
        assert!(matches!(train_reduced(&mut net, &data, LossKind::Squared, &Regularizer::None, &cfg), Err(Error::Precondition(_))));
    }

    #[test]
    fn divergence_reports_step() {
        let data = make_dataset("halfmoon2d", 10, 0.0, 1).unwrap();
        let mut net = resnet(2, 1);
        let cfg = TrainConfig::new(500, 10, 0, OptimizerConfig::Sgd { lr: 1e12 });
        let err = train_reduced(&mut net, &data, LossKind::Squared, &Regularizer::None, &cfg).unwrap_err();
        assert!(matches!(err, Error::NonFinite(ref m) if m.contains("training step")), "{err}");
    }
}
