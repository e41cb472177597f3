use crate::numcore::vecops;
use crate::{Error, Result};

/// Hyperparameters of a first-order stepper.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerConfig {
    /// `θ′ = θ − τ·g`
    Sgd { lr: f64 },
    /// Bias-corrected Adam with `ε` added to `√v̂`.
    Adam { alpha: f64, beta1: f64, beta2: f64, eps: f64 },
    /// Conformal Hamiltonian momentum (heavy ball):
    /// `p′ = e^{−γh}p − h·g`, `θ′ = θ + h·p′/μ`.
    Conformal { h: f64, gamma: f64, mass: f64 },
    /// Relativistic descent:
    /// `p′ = e^{−γh}p − h·g`, `θ′ = θ + h·p′/√(ε + ‖p′‖²)`.
    Relativistic { h: f64, gamma: f64, eps: f64 },
    /// `p′ = μp − h·g(θ + μp)`, `θ′ = θ + p′`.
    Nesterov { h: f64, mu: f64 },
}

impl OptimizerConfig {
    pub fn adam_default(alpha: f64) -> Self {
        OptimizerConfig::Adam { alpha, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// Heavy ball with damping chosen so that `e^{−γh} = μ`.
    pub fn heavy_ball(h: f64, mu: f64) -> Self {
        OptimizerConfig::Conformal { h, gamma: -mu.ln() / h, mass: mu }
    }

    /// Relativistic descent with momentum decay factor `μ = e^{−γh}`.
    pub fn relativistic(h: f64, mu: f64, eps: f64) -> Self {
        OptimizerConfig::Relativistic { h, gamma: -mu.ln() / h, eps }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerConfig::Sgd { .. } => "sgd",
            OptimizerConfig::Adam { .. } => "adam",
            OptimizerConfig::Conformal { .. } => "conformal",
            OptimizerConfig::Relativistic { .. } => "rgd",
            OptimizerConfig::Nesterov { .. } => "nesterov",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            OptimizerConfig::Sgd { lr } => lr >= 0.0,
            OptimizerConfig::Adam { alpha, beta1, beta2, eps } => {
                alpha >= 0.0 && beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0 && eps > 0.0
            }
            OptimizerConfig::Conformal { h, gamma, mass } => h > 0.0 && gamma > 0.0 && mass > 0.0,
            OptimizerConfig::Relativistic { h, gamma, eps } => h > 0.0 && gamma >= 0.0 && eps > 0.0,
            OptimizerConfig::Nesterov { h, mu } => h > 0.0 && mu >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!("invalid optimizer hyperparameters {self:?}")))
        }
    }
}

/// Mutable memory of a stepper.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    config: OptimizerConfig,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
    p: Vec<f64>,
    lr_scale: f64,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        let (m, v, p) = match config {
            OptimizerConfig::Adam { .. } => (vec![0.0; dim], vec![0.0; dim], Vec::new()),
            OptimizerConfig::Sgd { .. } => (Vec::new(), Vec::new(), Vec::new()),
            _ => (Vec::new(), Vec::new(), vec![0.0; dim]),
        };
        Ok(Self { config, step: 0, m, v, p, lr_scale: 1.0 })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    /// Steps taken so far.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn momentum(&self) -> &[f64] {
        &self.p
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }

    /// Multiplier applied to the base step size (used by schedules).
    pub fn set_lr_scale(&mut self, s: f64) {
        self.lr_scale = s;
    }

    pub fn lr_scale(&self) -> f64 {
        self.lr_scale
    }

    /// Point at which the next gradient must be evaluated.
    pub fn eval_point(&self, theta: &[f64]) -> Vec<f64> {
        match self.config {
            OptimizerConfig::Nesterov { mu, .. } => theta.iter().zip(&self.p).map(|(t, p)| t + mu * p).collect(),
            _ => theta.to_vec(),
        }
    }

    /// Kinetic energy of the momentum variable, when the method has one.
    pub fn kinetic_energy(&self) -> f64 {
        match self.config {
            OptimizerConfig::Conformal { mass, .. } => vecops::dot(&self.p, &self.p) / (2.0 * mass),
            OptimizerConfig::Relativistic { eps, .. } => (vecops::dot(&self.p, &self.p) + eps).sqrt(),
            _ => 0.0,
        }
    }

    /// Advances one step; `grad` must be taken at [`Self::eval_point`].
    pub fn step(&mut self, theta: &[f64], grad: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != grad.len() {
            return Err(Error::shape(format!("θ has length {}, gradient {}", theta.len(), grad.len())));
        }
        let dim = self.m.len().max(self.p.len());
        if dim != 0 && dim != theta.len() {
            return Err(Error::shape(format!("optimizer state has dimension {dim}, θ has {}", theta.len())));
        }
        self.step += 1;
        let s = self.lr_scale;
        let out = match self.config {
            OptimizerConfig::Sgd { lr } => theta.iter().zip(grad).map(|(t, g)| t - s * lr * g).collect(),
            OptimizerConfig::Adam { alpha, beta1, beta2, eps } => {
                let j = self.step as i32;
                let c1 = 1.0 - beta1.powi(j);
                let c2 = 1.0 - beta2.powi(j);
                let mut out = Vec::with_capacity(theta.len());
                for i in 0..theta.len() {
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    let mh = self.m[i] / c1;
                    let vh = self.v[i] / c2;
                    out.push(theta[i] - s * alpha * mh / (vh.sqrt() + eps));
                }
                out
            }
            OptimizerConfig::Conformal { h, gamma, mass } => {
                let h = s * h;
                let decay = (-gamma * h).exp();
                for (p, g) in self.p.iter_mut().zip(grad) {
                    *p = decay * *p - h * g;
                }
                theta.iter().zip(&self.p).map(|(t, p)| t + h * p / mass).collect()
            }
            OptimizerConfig::Relativistic { h, gamma, eps } => {
                let h = s * h;
                let decay = (-gamma * h).exp();
                for (p, g) in self.p.iter_mut().zip(grad) {
                    *p = decay * *p - h * g;
                }
                let speed = (eps + vecops::dot(&self.p, &self.p)).sqrt();
                theta.iter().zip(&self.p).map(|(t, p)| t + h * p / speed).collect()
            }
            OptimizerConfig::Nesterov { h, mu } => {
                let h = s * h;
                for (p, g) in self.p.iter_mut().zip(grad) {
                    *p = mu * *p - h * g;
                }
                theta.iter().zip(&self.p).map(|(t, p)| t + p).collect()
            }
        };
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_quadratic(config: OptimizerConfig, steps: usize, theta0: f64) -> f64 {
        let mut st = OptimizerState::new(config, 1).unwrap();
        let mut th = vec![theta0];
        for _ in 0..steps {
            let g = st.eval_point(&th);
            th = st.step(&th, &g).unwrap();
        }
        th[0]
    }

    #[test]
    fn sgd_hand_example_and_decay() {
        let mut st = OptimizerState::new(OptimizerConfig::Sgd { lr: 0.5 }, 1).unwrap();
        assert_eq!(st.step(&[1.0], &[2.0]).unwrap(), vec![0.0]);
        assert_eq!(st.step(&[1.0], &[0.0]).unwrap(), vec![1.0]);
        assert!(run_quadratic(OptimizerConfig::Sgd { lr: 0.1 }, 100, 1.0).abs() <= 1e-4);
        assert_eq!(st.step_count(), 2);
    }

    #[test]
    fn adam_first_step_is_alpha() {
        let mut st = OptimizerState::new(OptimizerConfig::adam_default(0.1), 3).unwrap();
        let th = st.step(&[0.0; 3], &[2.0, -1e-3, 0.0]).unwrap();
        assert!((th[0] + 0.1).abs() < 1e-9);
        assert!((th[1] - 0.1).abs() < 1e-5);
        assert_eq!(th[2], 0.0);
    }

    #[test]
    fn zero_gradient_fixed_points() {
        for cfg in [
            OptimizerConfig::heavy_ball(0.01, 0.9),
            OptimizerConfig::relativistic(1e-4, 0.9259, 1e-8),
            OptimizerConfig::Nesterov { h: 0.01, mu: 0.012 },
            OptimizerConfig::adam_default(0.1),
        ] {
            let mut st = OptimizerState::new(cfg, 2).unwrap();
            assert_eq!(st.step(&[0.3, -0.2], &[0.0, 0.0]).unwrap(), vec![0.3, -0.2]);
        }
    }

    #[test]
    fn nesterov_without_momentum_is_gradient_descent() {
        let mut a = OptimizerState::new(OptimizerConfig::Nesterov { h: 0.1, mu: 0.0 }, 2).unwrap();
        let mut b = OptimizerState::new(OptimizerConfig::Sgd { lr: 0.1 }, 2).unwrap();
        let th = [1.0, -2.0];
        let g = [0.5, 0.25];
        assert_eq!(a.step(&th, &g).unwrap(), b.step(&th, &g).unwrap());
    }

    #[test]
    fn nesterov_converges_on_quadratic() {
        assert!(run_quadratic(OptimizerConfig::Nesterov { h: 0.01, mu: 0.012 }, 10_000, 1.0).abs() < 1e-6);
    }

    #[test]
    fn conformal_dissipates_on_quadratic() {
        let mut st = OptimizerState::new(OptimizerConfig::Conformal { h: 0.01, gamma: 1.0, mass: 1.0 }, 1).unwrap();
        let mut th = vec![1.0];
        let mut prev = f64::INFINITY;
        for k in 0..10_000 {
            th = st.step(&th, &th.clone()).unwrap();
            let h = st.kinetic_energy() + 0.5 * th[0] * th[0];
            if k > 0 {
                assert!(h <= prev, "step {k}");
            }
            prev = h;
        }
        assert!(th[0].abs() <= 1e-6);
    }

    #[test]
    fn relativistic_speed_limit() {
        let h = 0.05;
        let mut st = OptimizerState::new(OptimizerConfig::Relativistic { h, gamma: 0.1, eps: 1e-8 }, 2).unwrap();
        let mut th = vec![0.0, 0.0];
        for _ in 0..50 {
            let next = st.step(&th, &[1e6, -3e5]).unwrap();
            assert!(vecops::norm(&vecops::sub(&next, &th)) <= h * (1.0 + 1e-12));
            th = next;
        }
    }

    #[test]
    fn invalid_hyperparameters_rejected() {
        assert!(OptimizerState::new(OptimizerConfig::Adam { alpha: 0.1, beta1: 1.0, beta2: 0.9, eps: 1e-8 }, 1).is_err());
        assert!(OptimizerState::new(OptimizerConfig::Conformal { h: 0.0, gamma: 1.0, mass: 1.0 }, 1).is_err());
    }

    #[test]
    fn steppers_are_deterministic() {
        let cfg = OptimizerConfig::adam_default(0.1);
        let mut a = OptimizerState::new(cfg, 2).unwrap();
        let mut b = a.clone();
        for _ in 0..5 {
            let x = a.step(&[0.1, 0.2], &[0.3, -0.7]).unwrap();
            let y = b.step(&[0.1, 0.2], &[0.3, -0.7]).unwrap();
            assert_eq!(x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), y.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }
}
