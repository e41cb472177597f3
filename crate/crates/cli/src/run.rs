use std::fs;
use std::path::{Path, PathBuf};

use structnet::blocks::{Block, BlockKind, Network};
use structnet::control::{
    deep_limit_experiment, make_dataset, msa_iterate, train_flow, train_reduced, Dataset, DeepLimitConfig, LogRow, LossKind, MsaConfig, Regularizer, TrainConfig,
};
use structnet::equivariant::{rectangles_dataset, rot90_image, ConvDenoiser, GridImage};
use structnet::invertible::{FlowLayer, FlowModel, IResBlock, InvLinear};
use structnet::numcore::vecops;
use structnet::optim::{figure_methods, run_benchmark, OptimizerConfig, OptimizerState, StepSchedule};
use structnet::Rng;

use crate::config::{Experiment, FlowKind, OptimizerKind, RunConfig};
use crate::csv::Table;
use crate::error::{CliError, Result};

pub const CONFIG_COPY: &str = "config.txt";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const LOG_HEADER: [&str; 6] = ["step", "epoch", "loss", "reg_value", "grad_norm", "wall_ms"];
pub const TRAJECTORY_HEADER: [&str; 5] = ["step", "loss", "grad_norm", "theta_0", "theta_1"];

/// Runs the configured experiment, writing every artifact into `cfg.out`.
/// Returns the written paths in creation order.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(crate::config::ConfigErrors(errs).into());
    }
    fs::create_dir_all(&cfg.out)?;
    let mut out = Outputs { dir: cfg.out.clone(), written: Vec::new() };
    out.text(CONFIG_COPY, &cfg.serialize())?;
    match cfg.experiment {
        Experiment::Classify => classify(cfg, &mut out)?,
        Experiment::Flow => flow(cfg, &mut out)?,
        Experiment::Denoise => denoise(cfg, &mut out)?,
        Experiment::Optbench => optbench(cfg, &mut out)?,
        Experiment::Deeplimit => deeplimit(cfg, &mut out)?,
        Experiment::Msa => msa(cfg, &mut out)?,
    }
    Ok(out.written)
}

struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(p, text)?;
        Ok(())
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        let p = self.path(name);
        t.write(&p)
    }
}

pub fn optimizer_config(cfg: &RunConfig) -> OptimizerConfig {
    match cfg.optimizer {
        OptimizerKind::Sgd => OptimizerConfig::Sgd { lr: cfg.lr },
        OptimizerKind::Adam => OptimizerConfig::adam_default(cfg.lr),
        OptimizerKind::HeavyBall => OptimizerConfig::heavy_ball(cfg.lr, cfg.momentum),
        OptimizerKind::Nesterov => OptimizerConfig::Nesterov { h: cfg.lr, mu: cfg.momentum },
        OptimizerKind::Rgd => OptimizerConfig::relativistic(cfg.lr, cfg.momentum, 1e-8),
    }
}

pub fn train_config(cfg: &RunConfig) -> TrainConfig {
    let mut tc = TrainConfig::new(cfg.steps, cfg.batch, cfg.seed, optimizer_config(cfg));
    if cfg.patience > 0 {
        tc.schedule = StepSchedule::PlateauHalving { patience: cfg.patience };
    }
    tc.timing = cfg.timing;
    tc
}

fn log_table(rows: &[LogRow]) -> Table {
    let mut t = Table::new(&LOG_HEADER);
    for r in rows {
        t.row(&[r.step.into(), r.epoch.into(), r.loss.into(), r.reg_value.into(), r.grad_norm.into(), r.wall_ms.into()]);
    }
    t
}

fn dataset(cfg: &RunConfig) -> Result<Dataset> {
    Ok(make_dataset(&cfg.dataset, cfg.samples, cfg.noise, cfg.data_seed())?)
}

/// Labels for `loss`: the ±1 labels as is for squared loss, one-hot
/// `[y > 0, y ≤ 0]` for cross-entropy.
fn labelled(cfg: &RunConfig) -> Result<Dataset> {
    let mut data = dataset(cfg)?;
    if data.label_dim().unwrap_or(0) == 0 {
        return Err(CliError::Usage(format!("experiment {} needs a labelled dataset, `{}` has none", cfg.experiment.name(), cfg.dataset)));
    }
    if cfg.loss == LossKind::SoftmaxCrossEntropy {
        for y in &mut data.labels {
            *y = if y[0] > 0.0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] };
        }
    }
    Ok(data)
}

/// Optional dense lift, `layers` blocks of the configured kind, linear head.
pub fn build_network(cfg: &RunConfig, in_dim: usize, out_dim: usize, rng: &mut Rng) -> Result<Network> {
    let d = if cfg.state_dim == 0 { in_dim } else { cfg.state_dim };
    let act = cfg.activation;
    let mut blocks = Vec::with_capacity(cfg.layers + 2);
    if d != in_dim {
        blocks.push(Block::dense(in_dim, d, act, rng));
    }
    for _ in 0..cfg.layers {
        blocks.push(match cfg.block {
            BlockKind::Dense => Block::dense(d, d, act, rng),
            BlockKind::EulerResidual => Block::euler(d, cfg.step_size, act, rng)?,
            BlockKind::GradientFlow => Block::gradient_flow(d, cfg.width, cfg.step_size, act, rng)?,
            BlockKind::VerletHamiltonian => Block::verlet(d, cfg.width, cfg.step_size, act, rng)?,
            other => return Err(CliError::Usage(format!("block kind {} cannot be stacked", other.name()))),
        });
    }
    blocks.push(Block::linear_head(d, out_dim, rng));
    Ok(Network::new(blocks)?)
}

fn regularizer(cfg: &RunConfig) -> Result<Regularizer> {
    Ok(Regularizer::from_name(&cfg.regularizer, cfg.reg_weight)?)
}

/// Points of a `grid × grid` lattice over the first two coordinates of the
/// data's bounding box, widened by 10%; other coordinates are zero.
fn grid_points(data: &Dataset, grid: usize) -> Vec<Vec<f64>> {
    let dim = data.feature_dim().unwrap_or(2).max(2);
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for x in &data.features {
        for a in 0..2 {
            lo[a] = lo[a].min(x[a]);
            hi[a] = hi[a].max(x[a]);
        }
    }
    if data.is_empty() {
        lo = [-1.0; 2];
        hi = [1.0; 2];
    }
    for a in 0..2 {
        let pad = 0.1 * (hi[a] - lo[a]).max(1e-3);
        lo[a] -= pad;
        hi[a] += pad;
    }
    let at = |a: usize, i: usize| if grid == 1 { 0.5 * (lo[a] + hi[a]) } else { lo[a] + (hi[a] - lo[a]) * i as f64 / (grid - 1) as f64 };
    let mut pts = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        for j in 0..grid {
            let mut x = vec![0.0; dim];
            x[0] = at(0, i);
            x[1] = at(1, j);
            pts.push(x);
        }
    }
    pts
}

fn decision_grid(cfg: &RunConfig, net: &Network, data: &Dataset) -> Result<Table> {
    let mut t = Table::new(&["x0", "x1", "output"]);
    for x in grid_points(data, cfg.grid) {
        let y = net.predict(&x)?;
        let v = match cfg.loss {
            LossKind::Squared => y[0],
            LossKind::SoftmaxCrossEntropy => {
                let m = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = y.iter().map(|v| (v - m).exp()).sum();
                (y[0] - m).exp() / z
            }
        };
        t.row(&[x[0].into(), x[1].into(), v.into()]);
    }
    Ok(t)
}

fn classify(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let data = labelled(cfg)?;
    let mut rng = Rng::seed_from(cfg.seed);
    let mut net = build_network(cfg, data.feature_dim().unwrap_or(2), data.label_dim().unwrap_or(1), &mut rng)?;
    let log = train_reduced(&mut net, &data, cfg.loss, &regularizer(cfg)?, &train_config(cfg))?;
    out.table(TRAIN_LOG, &log_table(&log.rows))?;
    out.table("decision_grid.csv", &decision_grid(cfg, &net, &data)?)?;
    net.save(out.path("model.bin"))?;
    Ok(())
}

fn flow_model(cfg: &RunConfig, dim: usize, rng: &mut Rng) -> Result<FlowModel> {
    Ok(match cfg.flow {
        FlowKind::Coupling => FlowModel::coupling_stack(dim, cfg.couplings, cfg.coupling_law, cfg.hidden, cfg.mix, rng)?,
        FlowKind::Residual => {
            let mut layers = Vec::new();
            for i in 0..cfg.couplings {
                if cfg.mix && i > 0 {
                    layers.push(FlowLayer::Linear(InvLinear::random(dim, rng)));
                }
                layers.push(FlowLayer::Residual(IResBlock::random(dim, cfg.hidden, cfg.lip, rng)?));
            }
            FlowModel::new(dim, layers)?
        }
    })
}

fn flow(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let data = dataset(cfg)?;
    let dim = data.feature_dim().ok_or_else(|| CliError::Usage("flow training needs samples".into()))?;
    let mut rng = Rng::seed_from(cfg.seed);
    let mut model = flow_model(cfg, dim, &mut rng)?;
    let rows = train_flow(&mut model, &data.features, &train_config(cfg))?;
    out.table(TRAIN_LOG, &log_table(&rows))?;
    if dim == 2 {
        let mut t = Table::new(&["x0", "x1", "log_density"]);
        for x in grid_points(&data, cfg.grid) {
            let ld = model.log_density(&x, cfg.seed)?;
            t.row(&[x[0].into(), x[1].into(), ld.into()]);
        }
        out.table("density_grid.csv", &t)?;
    }
    model.save(out.path("model.bin"))?;
    Ok(())
}

fn denoise(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let pairs = rectangles_dataset(cfg.images, cfg.image_size, cfg.max_rects, cfg.noise, cfg.data_seed())?;
    let mut rng = Rng::seed_from(cfg.seed);
    let mut model = ConvDenoiser::new(cfg.group, 1, cfg.channels, cfg.kernel, cfg.layers, cfg.step_size, &mut rng)?;
    let rows = train_denoiser(&mut model, &pairs, cfg)?;
    out.table(TRAIN_LOG, &log_table(&rows))?;

    let mut dump = Table::new(&["image", "row", "col", "noisy", "clean", "denoised"]);
    let mut equi = Table::new(&["image", "rotation", "residual"]);
    for (n, (noisy, clean)) in pairs.iter().enumerate() {
        let y = model.forward(noisy)?;
        for i in 0..noisy.height() {
            for j in 0..noisy.width() {
                dump.row(&[n.into(), i.into(), j.into(), noisy.at(i, j, 0).into(), clean.at(i, j, 0).into(), y.at(i, j, 0).into()]);
            }
        }
        for r in 1..4 {
            let lhs = model.forward(&rot90_image(noisy, r)?)?;
            let rhs = rot90_image(&y, r)?;
            equi.row(&[n.into(), r.into(), lhs.max_abs_diff(&rhs).into()]);
        }
    }
    out.table("denoised.csv", &dump)?;
    out.table("equivariance.csv", &equi)?;
    Ok(())
}

/// Minibatch descent on the denoising objective, batching as in the
/// classification loop: a fresh permutation per epoch, partial batches
/// dropped.
fn train_denoiser(model: &mut ConvDenoiser, pairs: &[(GridImage, GridImage)], cfg: &RunConfig) -> Result<Vec<LogRow>> {
    let tc = train_config(cfg);
    if tc.steps > 0 && (tc.batch == 0 || tc.batch > pairs.len()) {
        return Err(CliError::Usage(format!("batch size {} must lie in 1..={}", tc.batch, pairs.len())));
    }
    let mut opt = OptimizerState::new(tc.optimizer, model.num_params())?;
    let mut plateau = tc.schedule.tracker();
    let mut rng = Rng::seed_from(tc.seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut cursor = pairs.len();
    let mut epoch = 0;
    let start = std::time::Instant::now();
    let mut rows = Vec::with_capacity(tc.steps);
    let mut theta = model.params().to_vec();
    for step in 0..tc.steps {
        if cursor + tc.batch > pairs.len() {
            if step > 0 {
                epoch += 1;
            }
            rng.shuffle(&mut order);
            cursor = 0;
        }
        let batch: Vec<(GridImage, GridImage)> = order[cursor..cursor + tc.batch].iter().map(|&i| pairs[i].clone()).collect();
        cursor += tc.batch;
        model.params_mut().copy_from_slice(&opt.eval_point(&theta));
        let (loss, grad) = model.loss_and_grad(&batch, cfg.tv_weight, cfg.tv_eps)?;
        let grad_norm = vecops::norm(&grad);
        if !loss.is_finite() || !grad_norm.is_finite() {
            return Err(structnet::Error::NonFinite(format!("denoiser training step {step} (epoch {epoch})")).into());
        }
        theta = opt.step(&theta, &grad)?;
        if let Some(p) = plateau.as_mut() {
            opt.set_lr_scale(p.observe(loss));
        }
        let wall_ms = if tc.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        rows.push(LogRow { step, epoch, loss, reg_value: 0.0, grad_norm, wall_ms });
    }
    model.params_mut().copy_from_slice(&theta);
    Ok(rows)
}

fn optbench(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let mut summary = Table::new(&["method", "hit_step", "final_norm"]);
    for bench in figure_methods() {
        let run = run_benchmark(&bench, cfg.steps, cfg.tol)?;
        let mut t = Table::new(&TRAJECTORY_HEADER);
        for r in &run.rows {
            t.row(&[r.step.into(), r.loss.into(), r.grad_norm.into(), r.theta[0].into(), r.theta[1].into()]);
        }
        out.table(&format!("trajectory_{}.csv", run.name), &t)?;
        let last = run.rows.last().map_or(f64::NAN, |r| vecops::norm(&r.theta));
        let hit = run.hit.map(|h| h.to_string()).unwrap_or_else(|| "none".into());
        summary.row(&[run.name.as_str().into(), hit.as_str().into(), last.into()]);
    }
    out.table("optbench.csv", &summary)
}

fn deeplimit(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let data = labelled(cfg)?;
    if cfg.loss != LossKind::Squared {
        return Err(CliError::Usage("the deep-limit experiment uses the squared loss".into()));
    }
    let dl = DeepLimitConfig { train: train_config(cfg), restarts: cfg.restarts, horizon: cfg.horizon, activation: cfg.activation };
    let rows = deep_limit_experiment(&data, &cfg.ks, cfg.reg_weight, &dl, cfg.seed)?;
    let mut t = Table::new(&["K", "best_loss", "restarts"]);
    for r in rows {
        t.row(&[r.k.into(), r.best_loss.into(), r.restarts.into()]);
    }
    out.table("deeplimit.csv", &t)
}

fn msa(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let data = labelled(cfg)?;
    let mut rng = Rng::seed_from(cfg.seed);
    let mut net = build_network(cfg, data.feature_dim().unwrap_or(2), data.label_dim().unwrap_or(1), &mut rng)?;
    let msa_cfg = MsaConfig { sweeps: cfg.steps, inner_steps: cfg.inner_steps, inner_lr: cfg.inner_lr };
    let res = msa_iterate(&mut net, &data, cfg.loss, &msa_cfg)?;
    let mut t = Table::new(&["sweep", "loss"]);
    for (k, l) in res.losses.iter().enumerate() {
        t.row(&[k.into(), (*l).into()]);
    }
    out.table(TRAIN_LOG, &t)?;
    out.table("decision_grid.csv", &decision_grid(cfg, &net, &data)?)?;
    Ok(())
}

/// Reads the saved config of a previous run.
pub fn load_config(dir: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(dir.join(CONFIG_COPY))?;
    Ok(RunConfig::parse(&text, &[])?)
}
