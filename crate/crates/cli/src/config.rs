use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use structnet::blocks::{Activation, BlockKind};
use structnet::control::{LossKind, DATASET_NAMES};
use structnet::equivariant::DenoiserGroup;
use structnet::invertible::CouplingLaw;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Classify,
    Flow,
    Denoise,
    Optbench,
    Deeplimit,
    Msa,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [Experiment::Classify, Experiment::Flow, Experiment::Denoise, Experiment::Optbench, Experiment::Deeplimit, Experiment::Msa];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Classify => "classify",
            Experiment::Flow => "flow",
            Experiment::Denoise => "denoise",
            Experiment::Optbench => "optbench",
            Experiment::Deeplimit => "deeplimit",
            Experiment::Msa => "msa",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
    HeavyBall,
    Nesterov,
    Rgd,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 5] = [OptimizerKind::Sgd, OptimizerKind::Adam, OptimizerKind::HeavyBall, OptimizerKind::Nesterov, OptimizerKind::Rgd];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
            OptimizerKind::HeavyBall => "heavy_ball",
            OptimizerKind::Nesterov => "nesterov",
            OptimizerKind::Rgd => "rgd",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowKind {
    Coupling,
    Residual,
}

impl FlowKind {
    pub fn name(self) -> &'static str {
        match self {
            FlowKind::Coupling => "coupling",
            FlowKind::Residual => "residual",
        }
    }
}

pub const REGULARIZERS: [&str; 5] = ["none", "l2", "l1", "h1", "timestep"];

/// One experiment run. Every field has a `key=value` spelling; see [`KEYS`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub steps: usize,
    pub seed: u64,
    pub out: PathBuf,

    pub dataset: String,
    pub samples: usize,
    pub noise: f64,
    /// Seed of the data generator; the run seed when absent.
    pub data_seed: Option<u64>,

    pub block: BlockKind,
    pub layers: usize,
    pub width: usize,
    /// Width of the ODE state; 0 keeps the data dimension, anything else
    /// adds a dense lifting layer in front.
    pub state_dim: usize,
    pub step_size: f64,
    pub activation: Activation,
    pub loss: LossKind,
    pub regularizer: String,
    pub reg_weight: f64,

    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub momentum: f64,
    pub batch: usize,
    /// Plateau patience for step halving; 0 keeps the step constant.
    pub patience: usize,
    pub timing: bool,
    pub grid: usize,

    pub flow: FlowKind,
    pub couplings: usize,
    pub coupling_law: CouplingLaw,
    pub hidden: usize,
    pub mix: bool,
    pub lip: f64,

    pub group: DenoiserGroup,
    pub image_size: usize,
    pub images: usize,
    pub max_rects: usize,
    pub channels: usize,
    pub kernel: usize,
    pub tv_weight: f64,
    pub tv_eps: f64,

    pub ks: Vec<usize>,
    pub restarts: usize,
    pub horizon: f64,

    pub tol: f64,

    pub inner_steps: usize,
    pub inner_lr: f64,
}

/// Every recognised key, in serialization order.
pub const KEYS: [&str; 44] = [
    "experiment", "steps", "seed", "out", "dataset", "samples", "noise", "data_seed", "block", "layers", "width", "state_dim", "step_size", "activation", "loss",
    "regularizer", "reg_weight", "optimizer", "lr", "momentum", "batch", "patience", "timing", "grid", "flow", "couplings", "coupling_law", "hidden", "mix", "lip",
    "group", "image_size", "images", "max_rects", "channels", "kernel", "tv_weight", "tv_eps", "ks", "restarts", "horizon", "tol", "inner_steps", "inner_lr",
];

pub const REQUIRED: [&str; 4] = ["experiment", "steps", "seed", "out"];

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{key}`")]
    UnknownKey { key: String },
    #[error("key `{key}`: expected {expected}, got `{value}`")]
    TypeMismatch { key: String, expected: &'static str, value: String },
    #[error("missing required key `{key}`")]
    MissingKey { key: String },
    #[error("key `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
}

impl ConfigError {
    /// Key the violation is about, if any.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Syntax { .. } => None,
            ConfigError::UnknownKey { key } | ConfigError::TypeMismatch { key, .. } | ConfigError::MissingKey { key } | ConfigError::InvalidValue { key, .. } => Some(key),
        }
    }
}

/// All violations found in one parse.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

fn mismatch(key: &str, expected: &'static str, value: &str) -> ConfigError {
    ConfigError::TypeMismatch { key: key.to_string(), expected, value: value.to_string() }
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue { key: key.to_string(), reason: reason.into() }
}

fn num<T: FromStr>(key: &str, value: &str, expected: &'static str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| mismatch(key, expected, value))
}

fn real(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = num(key, value, "a real number")?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(key, "must be finite"))
    }
}

fn flag(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(mismatch(key, "true or false", value)),
    }
}

fn choice<T: Copy>(key: &str, value: &str, options: &[(&str, T)]) -> Result<T, ConfigError> {
    options.iter().find(|(n, _)| *n == value).map(|(_, v)| *v).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        invalid(key, format!("`{value}` is not one of {}", names.join(", ")))
    })
}

impl RunConfig {
    /// Defaults for every optional key.
    pub fn new(experiment: Experiment, steps: usize, seed: u64, out: impl Into<PathBuf>) -> Self {
        Self {
            experiment,
            steps,
            seed,
            out: out.into(),
            dataset: "halfmoon2d".into(),
            samples: 200,
            noise: 0.05,
            data_seed: None,
            block: BlockKind::EulerResidual,
            layers: 10,
            width: 4,
            state_dim: 0,
            step_size: 0.1,
            activation: Activation::Tanh,
            loss: LossKind::Squared,
            regularizer: "l2".into(),
            reg_weight: 1e-4,
            optimizer: OptimizerKind::Adam,
            lr: 0.01,
            momentum: 0.9,
            batch: 20,
            patience: 0,
            timing: false,
            grid: 50,
            flow: FlowKind::Coupling,
            couplings: 4,
            coupling_law: CouplingLaw::Affine,
            hidden: 16,
            mix: true,
            lip: 0.9,
            group: DenoiserGroup::P4,
            image_size: 12,
            images: 8,
            max_rects: 3,
            channels: 4,
            kernel: 3,
            tv_weight: 0.05,
            tv_eps: 1e-3,
            ks: vec![4, 8, 16, 32],
            restarts: 3,
            horizon: 1.0,
            tol: 1e-2,
            inner_steps: 10,
            inner_lr: 0.1,
        }
    }

    pub fn data_seed(&self) -> u64 {
        self.data_seed.unwrap_or(self.seed)
    }

    /// Parses `key=value` lines (blank lines and `#` comments skipped), then
    /// applies `overrides` in order. Later assignments win.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self, ConfigErrors> {
        let mut errors = Vec::new();
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) if !k.trim().is_empty() => pairs.push((k.trim().to_string(), v.trim().to_string())),
                _ => errors.push(ConfigError::Syntax { line: i + 1, text: raw.to_string() }),
            }
        }
        pairs.extend(overrides.iter().cloned());
        Self::from_pairs(&pairs, errors)
    }

    fn from_pairs(pairs: &[(String, String)], mut errors: Vec<ConfigError>) -> Result<Self, ConfigErrors> {
        let mut cfg = RunConfig::new(Experiment::Classify, 0, 0, PathBuf::new());
        let mut seen = BTreeSet::new();
        for (k, v) in pairs {
            if !KEYS.contains(&k.as_str()) {
                errors.push(ConfigError::UnknownKey { key: k.clone() });
                continue;
            }
            seen.insert(k.as_str());
            if let Err(e) = cfg.assign(k, v) {
                errors.push(e);
            }
        }
        for key in REQUIRED {
            if !seen.contains(key) {
                errors.push(ConfigError::MissingKey { key: key.to_string() });
            }
        }
        if errors.is_empty() {
            errors.extend(cfg.validate());
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigErrors(errors))
        }
    }

    fn assign(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let usize_ = |v: &str| num::<usize>(key, v, "a nonnegative integer");
        match key {
            "experiment" => self.experiment = choice(key, v, &Experiment::ALL.map(|e| (e.name(), e)))?,
            "steps" => self.steps = usize_(v)?,
            "seed" => self.seed = num(key, v, "an unsigned 64-bit integer")?,
            "out" => self.out = PathBuf::from(v),
            "dataset" => {
                if !DATASET_NAMES.contains(&v) {
                    return Err(invalid(key, format!("`{v}` is not one of {}", DATASET_NAMES.join(", "))));
                }
                self.dataset = v.to_string();
            }
            "samples" => self.samples = usize_(v)?,
            "noise" => self.noise = real(key, v)?,
            "data_seed" => self.data_seed = Some(num(key, v, "an unsigned 64-bit integer")?),
            "block" => {
                self.block = choice(
                    key,
                    v,
                    &[
                        ("dense", BlockKind::Dense),
                        ("euler", BlockKind::EulerResidual),
                        ("gradflow", BlockKind::GradientFlow),
                        ("verlet", BlockKind::VerletHamiltonian),
                    ],
                )?
            }
            "layers" => self.layers = usize_(v)?,
            "width" => self.width = usize_(v)?,
            "state_dim" => self.state_dim = usize_(v)?,
            "step_size" => self.step_size = real(key, v)?,
            "activation" => self.activation = Activation::from_name(v).map_err(|_| invalid(key, format!("unknown activation `{v}`")))?,
            "loss" => self.loss = LossKind::from_name(v).map_err(|_| invalid(key, format!("unknown loss `{v}`")))?,
            "regularizer" => {
                if !REGULARIZERS.contains(&v) {
                    return Err(invalid(key, format!("`{v}` is not one of {}", REGULARIZERS.join(", "))));
                }
                self.regularizer = v.to_string();
            }
            "reg_weight" => self.reg_weight = real(key, v)?,
            "optimizer" => self.optimizer = choice(key, v, &OptimizerKind::ALL.map(|o| (o.name(), o)))?,
            "lr" => self.lr = real(key, v)?,
            "momentum" => self.momentum = real(key, v)?,
            "batch" => self.batch = usize_(v)?,
            "patience" => self.patience = usize_(v)?,
            "timing" => self.timing = flag(key, v)?,
            "grid" => self.grid = usize_(v)?,
            "flow" => self.flow = choice(key, v, &[("coupling", FlowKind::Coupling), ("residual", FlowKind::Residual)])?,
            "couplings" => self.couplings = usize_(v)?,
            "coupling_law" => self.coupling_law = choice(key, v, &[("additive", CouplingLaw::Additive), ("affine", CouplingLaw::Affine)])?,
            "hidden" => self.hidden = usize_(v)?,
            "mix" => self.mix = flag(key, v)?,
            "lip" => self.lip = real(key, v)?,
            "group" => self.group = choice(key, v, &[("p4", DenoiserGroup::P4), ("cnn", DenoiserGroup::Translation)])?,
            "image_size" => self.image_size = usize_(v)?,
            "images" => self.images = usize_(v)?,
            "max_rects" => self.max_rects = usize_(v)?,
            "channels" => self.channels = usize_(v)?,
            "kernel" => self.kernel = usize_(v)?,
            "tv_weight" => self.tv_weight = real(key, v)?,
            "tv_eps" => self.tv_eps = real(key, v)?,
            "ks" => {
                self.ks = if v.is_empty() {
                    Vec::new()
                } else {
                    v.split(',').map(|s| num(key, s.trim(), "a comma-separated list of integers")).collect::<Result<_, _>>()?
                }
            }
            "restarts" => self.restarts = usize_(v)?,
            "horizon" => self.horizon = real(key, v)?,
            "tol" => self.tol = real(key, v)?,
            "inner_steps" => self.inner_steps = usize_(v)?,
            "inner_lr" => self.inner_lr = real(key, v)?,
            _ => return Err(ConfigError::UnknownKey { key: key.to_string() }),
        }
        Ok(())
    }

    /// Range checks that need no data. Shape compatibility is left to the
    /// library, which reports it at run time.
    pub fn validate(&self) -> Vec<ConfigError> {
        let mut errs = Vec::new();
        let mut positive = |key: &str, v: f64| {
            if !(v > 0.0) {
                errs.push(invalid(key, format!("must be positive, got {v}")));
            }
        };
        positive("lr", self.lr);
        positive("lip", self.lip);
        positive("horizon", self.horizon);
        positive("tol", self.tol);
        positive("inner_lr", self.inner_lr);
        positive("tv_eps", self.tv_eps);
        for (key, v) in [("noise", self.noise), ("step_size", self.step_size), ("reg_weight", self.reg_weight), ("tv_weight", self.tv_weight)] {
            if v < 0.0 {
                errs.push(invalid(key, format!("must be nonnegative, got {v}")));
            }
        }
        if !(self.lip < 1.0) {
            errs.push(invalid("lip", "must be below 1 for the residual flow to be invertible"));
        }
        if !(self.momentum > 0.0 && self.momentum < 1.0) && matches!(self.optimizer, OptimizerKind::HeavyBall | OptimizerKind::Rgd) {
            errs.push(invalid("momentum", format!("must lie in (0, 1), got {}", self.momentum)));
        }
        if self.regularizer == "timestep" && self.reg_weight <= 0.0 {
            errs.push(invalid("reg_weight", "the timestep regularizer needs a positive horizon"));
        }
        if self.experiment == Experiment::Deeplimit && self.reg_weight <= 0.0 {
            errs.push(invalid("reg_weight", "the deep-limit experiment needs a positive weight"));
        }
        if self.ks.is_empty() || self.ks[0] == 0 || self.ks.windows(2).any(|w| w[0] >= w[1]) {
            errs.push(invalid("ks", "must be positive and strictly increasing"));
        }
        for (key, v) in [("samples", self.samples), ("grid", self.grid), ("couplings", self.couplings), ("hidden", self.hidden), ("restarts", self.restarts)] {
            if v == 0 {
                errs.push(invalid(key, "must be at least 1"));
            }
        }
        if self.kernel % 2 == 0 {
            errs.push(invalid("kernel", "must be odd"));
        }
        errs
    }

    /// `key=value` lines covering every field; [`Self::parse`] inverts it.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            if let Some(v) = self.value(key) {
                s.push_str(key);
                s.push('=');
                s.push_str(&v);
                s.push('\n');
            }
        }
        s
    }

    fn value(&self, key: &str) -> Option<String> {
        let law = |l: CouplingLaw| match l {
            CouplingLaw::Additive => "additive",
            CouplingLaw::Affine => "affine",
        };
        Some(match key {
            "experiment" => self.experiment.name().into(),
            "steps" => self.steps.to_string(),
            "seed" => self.seed.to_string(),
            "out" => self.out.display().to_string(),
            "dataset" => self.dataset.clone(),
            "samples" => self.samples.to_string(),
            "noise" => self.noise.to_string(),
            "data_seed" => self.data_seed?.to_string(),
            "block" => self.block.name().into(),
            "layers" => self.layers.to_string(),
            "width" => self.width.to_string(),
            "state_dim" => self.state_dim.to_string(),
            "step_size" => self.step_size.to_string(),
            "activation" => self.activation.name().into(),
            "loss" => self.loss.name().into(),
            "regularizer" => self.regularizer.clone(),
            "reg_weight" => self.reg_weight.to_string(),
            "optimizer" => self.optimizer.name().into(),
            "lr" => self.lr.to_string(),
            "momentum" => self.momentum.to_string(),
            "batch" => self.batch.to_string(),
            "patience" => self.patience.to_string(),
            "timing" => self.timing.to_string(),
            "grid" => self.grid.to_string(),
            "flow" => self.flow.name().into(),
            "couplings" => self.couplings.to_string(),
            "coupling_law" => law(self.coupling_law).into(),
            "hidden" => self.hidden.to_string(),
            "mix" => self.mix.to_string(),
            "lip" => self.lip.to_string(),
            "group" => self.group.name().into(),
            "image_size" => self.image_size.to_string(),
            "images" => self.images.to_string(),
            "max_rects" => self.max_rects.to_string(),
            "channels" => self.channels.to_string(),
            "kernel" => self.kernel.to_string(),
            "tv_weight" => self.tv_weight.to_string(),
            "tv_eps" => self.tv_eps.to_string(),
            "ks" => self.ks.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
            "restarts" => self.restarts.to_string(),
            "horizon" => self.horizon.to_string(),
            "tol" => self.tol.to_string(),
            "inner_steps" => self.inner_steps.to_string(),
            "inner_lr" => self.inner_lr.to_string(),
            _ => return None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    const REQ: [(&str, &str); 4] = [("experiment", "classify"), ("steps", "5"), ("seed", "1"), ("out", "runs/a")];

    #[test]
    fn empty_file_with_required_overrides() {
        let cfg = RunConfig::parse("", &set(&REQ)).unwrap();
        assert_eq!(cfg, RunConfig::new(Experiment::Classify, 5, 1, "runs/a"));
    }

    #[test]
    fn seed_type_mismatch_is_named() {
        let errs = RunConfig::parse("seed=abc\nexperiment=flow\nsteps=1\nout=x\n", &[]).unwrap_err();
        assert_eq!(errs.0.len(), 1);
        assert!(matches!(&errs.0[0], ConfigError::TypeMismatch { key, .. } if key == "seed"));
        assert!(errs.to_string().contains("seed"));
    }

    #[test]
    fn override_beats_file() {
        let cfg = RunConfig::parse("experiment=flow\nsteps=3\nseed=9\nout=o\nlr=0.5\n", &set(&[("lr", "0.25"), ("seed", "4")])).unwrap();
        assert_eq!(cfg.lr, 0.25);
        assert_eq!(cfg.seed, 4);
    }

    #[test]
    fn every_violation_is_reported() {
        let errs = RunConfig::parse("bogus=1\nsteps=-2\nnot a pair\n", &[]).unwrap_err();
        let keys: Vec<Option<&str>> = errs.0.iter().map(ConfigError::key).collect();
        assert!(errs.0.iter().any(|e| matches!(e, ConfigError::Syntax { line: 3, .. })));
        assert!(keys.contains(&Some("bogus")));
        assert!(errs.0.iter().any(|e| matches!(e, ConfigError::TypeMismatch { key, .. } if key == "steps")));
        for k in ["experiment", "seed", "out"] {
            assert!(errs.0.iter().any(|e| matches!(e, ConfigError::MissingKey { key } if key == k)), "{k}");
        }
    }

    #[test]
    fn serialize_round_trip_with_odd_values() {
        let mut cfg = RunConfig::new(Experiment::Deeplimit, 7, u64::MAX, "a dir/with space");
        cfg.lr = 0.1 + 0.2;
        cfg.tv_eps = 1e-300;
        cfg.data_seed = Some(3);
        cfg.ks = vec![2, 5];
        cfg.coupling_law = CouplingLaw::Additive;
        cfg.group = DenoiserGroup::Translation;
        assert_eq!(RunConfig::parse(&cfg.serialize(), &[]).unwrap(), cfg);
    }

    #[test]
    fn keys_are_unique_and_all_serialized() {
        let set: BTreeSet<&str> = KEYS.iter().copied().collect();
        assert_eq!(set.len(), KEYS.len());
        let mut cfg = RunConfig::new(Experiment::Msa, 0, 0, "o");
        cfg.data_seed = Some(0);
        assert_eq!(cfg.serialize().lines().count(), KEYS.len());
    }
}
