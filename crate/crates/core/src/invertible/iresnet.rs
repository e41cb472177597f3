use crate::blocks::{BlockKind, Network, ParamVector};
use crate::numcore::tensor::{add_outer, matvec, matvec_t};
use crate::numcore::{inverse, logabsdet_lu, power_iteration, vecops, Rng, Tensor};
use crate::{Error, Result};

/// Truncated log-series settings for [`IResBlock::logdet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LogdetConfig {
    /// Number of series terms `n`.
    pub terms: usize,
    /// Rademacher probes `m` per estimate.
    pub probes: usize,
    /// Dimensions up to this use the exact Jacobian instead of the series.
    pub exact_dim_cutoff: usize,
}

impl Default for LogdetConfig {
    fn default() -> Self {
        Self { terms: 10, probes: 1, exact_dim_cutoff: 0 }
    }
}

impl LogdetConfig {
    pub fn evaluation() -> Self {
        Self { terms: 10, probes: 64, exact_dim_cutoff: 0 }
    }

    fn validate(&self) -> Result<()> {
        if self.terms == 0 || self.probes == 0 {
            return Err(Error::Precondition("log-det series needs at least one term and one probe".into()));
        }
        Ok(())
    }
}

/// Primal and tangent values along the residual subnet.
struct Chain {
    /// Pre-activations `a_l`.
    pre: Vec<Vec<f64>>,
    /// Layer inputs `h_{l−1}` (so `post[0] = x`).
    post: Vec<Vec<f64>>,
}

/// Invertible residual block `x ↦ x + f(x)` with `Lip(f) < 1` enforced by
/// spectral normalisation of every weight matrix of `f`.
#[derive(Clone, Debug, PartialEq)]
pub struct IResBlock {
    net: Network,
    lip: f64,
    singular: Vec<Vec<f64>>,
    pub tol: f64,
    pub max_iter: usize,
    pub logdet_config: LogdetConfig,
}

impl IResBlock {
    /// `net` must be a chain of dense and linear blocks mapping `ℝᵈ → ℝᵈ`.
    pub fn new(net: Network, lip: f64) -> Result<Self> {
        if !(lip > 0.0 && lip < 1.0) {
            return Err(Error::Precondition(format!("Lipschitz target must lie in (0,1), got {lip}")));
        }
        if net.is_empty() || net.in_dim() != net.out_dim() {
            return Err(Error::shape("residual subnet must map a space to itself"));
        }
        for b in net.blocks() {
            if !matches!(b.kind(), BlockKind::Dense | BlockKind::LinearHead) {
                return Err(Error::Precondition(format!("residual subnets take dense or linear blocks, not {}", b.kind().name())));
            }
        }
        let singular = net
            .blocks()
            .iter()
            .enumerate()
            .map(|(k, b)| Rng::seed_from(0x5eed_0000 + k as u64).rademacher_vec(b.in_dim()))
            .collect();
        Ok(Self { net, lip, singular, tol: 1e-12, max_iter: 1000, logdet_config: LogdetConfig::default() })
    }

    /// `x ↦ x + W₂ tanh(W₁x + b₁) + b₂`, renormalised to `lip`.
    pub fn random(dim: usize, hidden: usize, lip: f64, rng: &mut Rng) -> Result<Self> {
        use crate::blocks::{Activation, Block};
        let net = Network::new(vec![Block::dense(dim, hidden, Activation::Tanh, rng), Block::linear_head(hidden, dim, rng)])?;
        let mut b = Self::new(net, lip)?;
        b.renormalize(50)?;
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.net.in_dim().expect("nonempty subnet")
    }

    pub fn lip_target(&self) -> f64 {
        self.lip
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn num_params(&self) -> usize {
        self.net.num_params()
    }

    /// Rescales each weight matrix whose power-method estimate exceeds the
    /// target to exactly the target. Returns the estimates before rescaling.
    pub fn renormalize(&mut self, iters: usize) -> Result<Vec<f64>> {
        let mut before = Vec::with_capacity(self.net.len());
        for (k, b) in self.net.blocks_mut().iter_mut().enumerate() {
            let w = b.weight(0)?;
            let est = power_iteration(&w, &self.singular[k], iters)?;
            before.push(est.sigma);
            if est.sigma > self.lip {
                let s = self.lip / est.sigma;
                let len = w.len();
                b.params_mut()[..len].iter_mut().for_each(|v| *v *= s);
            }
            if est.sigma > 0.0 {
                self.singular[k] = est.right;
            }
        }
        Ok(before)
    }

    /// Fresh power-method estimates of every weight matrix.
    pub fn sublayer_norms(&self, iters: usize) -> Result<Vec<f64>> {
        self.net
            .blocks()
            .iter()
            .enumerate()
            .map(|(k, b)| Ok(power_iteration(&b.weight(0)?, &self.singular[k], iters)?.sigma))
            .collect()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::shape(format!("residual block of dim {} got length {}", self.dim(), x.len())));
        }
        Ok(())
    }

    /// The residual branch `f(x)`.
    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.net.predict(x)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(vecops::add(x, &self.net.predict(x)?))
    }

    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(self.inverse_with(y, self.tol, self.max_iter)?.0)
    }

    /// Fixed-point inversion `xⁱ = y − f(xⁱ⁻¹)` from `x⁰ = y`; returns the
    /// solution and the number of iterations taken.
    pub fn inverse_with(&self, y: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
        self.check(y)?;
        if !(tol > 0.0) {
            return Err(Error::Precondition("inverse tolerance must be positive".into()));
        }
        let mut x = y.to_vec();
        let mut residual = f64::INFINITY;
        for it in 0..=max_iter {
            let fx = self.net.predict(&x)?;
            let r: Vec<f64> = x.iter().zip(&fx).zip(y).map(|((a, b), c)| a + b - c).collect();
            residual = vecops::norm(&r);
            if residual <= tol {
                return Ok((x, it));
            }
            if !residual.is_finite() || it == max_iter {
                break;
            }
            x = vecops::sub(y, &fx);
        }
        Err(Error::NonConvergence { iterations: max_iter, residual })
    }

    fn chain(&self, x: &[f64]) -> Chain {
        let mut pre = Vec::with_capacity(self.net.len());
        let mut post = Vec::with_capacity(self.net.len() + 1);
        post.push(x.to_vec());
        for b in self.net.blocks() {
            let (m, c) = (b.width(), b.in_dim());
            let p = b.params();
            let mut a = matvec(&p[..m * c], m, c, post.last().expect("nonempty"));
            vecops::axpy(1.0, &p[m * c..], &mut a);
            post.push(a.iter().map(|v| b.activation().eval(*v)).collect());
            pre.push(a);
        }
        post.pop();
        Chain { pre, post }
    }

    /// Tangents `ḣ_l` of the chain in direction `w`; the last entry is `J_f w`.
    fn tangents(&self, ch: &Chain, w: &[f64]) -> Vec<Vec<f64>> {
        let mut t = Vec::with_capacity(self.net.len() + 1);
        t.push(w.to_vec());
        for (l, b) in self.net.blocks().iter().enumerate() {
            let (m, c) = (b.width(), b.in_dim());
            let u = matvec(&b.params()[..m * c], m, c, t.last().expect("nonempty"));
            t.push(u.iter().zip(&ch.pre[l]).map(|(ui, a)| ui * b.activation().deriv(*a)).collect());
        }
        t
    }

    /// Reverse mode through `⟨g, J_f(x,θ) w⟩`: accumulates the parameter
    /// gradient into `grad` and returns the gradients for `x` and `w`.
    fn tangent_backward(&self, ch: &Chain, tang: &[Vec<f64>], g: &[f64], grad: &mut ParamVector) -> (Vec<f64>, Vec<f64>) {
        let blocks = self.net.blocks();
        let mut t = g.to_vec();
        let mut q = vec![0.0; g.len()];
        for l in (0..blocks.len()).rev() {
            let b = &blocks[l];
            let act = b.activation();
            let (m, c) = (b.width(), b.in_dim());
            let w = &b.params()[..m * c];
            let a = &ch.pre[l];
            let adot = matvec(w, m, c, &tang[l]);
            let t_a: Vec<f64> = (0..m).map(|i| act.deriv(a[i]) * t[i]).collect();
            let q_a: Vec<f64> = (0..m).map(|i| act.second_deriv(a[i]) * adot[i] * t[i] + act.deriv(a[i]) * q[i]).collect();
            let gb = grad.block_mut(l);
            add_outer(&mut gb[..m * c], &t_a, &tang[l]);
            add_outer(&mut gb[..m * c], &q_a, &ch.post[l]);
            vecops::axpy(1.0, &q_a, &mut gb[m * c..]);
            t = matvec_t(w, m, c, &t_a);
            q = matvec_t(w, m, c, &q_a);
        }
        (q, t)
    }

    /// `J_f(x) w`.
    pub fn jvp(&self, x: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        self.check(w)?;
        let ch = self.chain(x);
        Ok(self.tangents(&ch, w).pop().expect("nonempty"))
    }

    /// Dense Jacobian of the residual branch.
    pub fn residual_jacobian(&self, x: &[f64]) -> Result<Tensor> {
        self.check(x)?;
        let d = self.dim();
        let ch = self.chain(x);
        let mut j = Tensor::zeros(&[d, d]);
        for col in 0..d {
            let mut e = vec![0.0; d];
            e[col] = 1.0;
            let v = self.tangents(&ch, &e).pop().expect("nonempty");
            for (row, vi) in v.iter().enumerate() {
                j.set(row, col, *vi);
            }
        }
        Ok(j)
    }

    fn plus_identity(mut j: Tensor) -> Tensor {
        for i in 0..j.shape()[0] {
            let v = j.at(i, i);
            j.set(i, i, v + 1.0);
        }
        j
    }

    fn probes(&self, cfg: &LogdetConfig, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = Rng::seed_from(seed);
        (0..cfg.probes).map(|_| rng.rademacher_vec(self.dim())).collect()
    }

    pub fn logdet(&self, x: &[f64], seed: u64) -> Result<f64> {
        self.logdet_with(x, &self.logdet_config, seed)
    }

    /// `log|det(I + J_f(x))|`, exact below the dimension cutoff, otherwise the
    /// truncated series `Σₖ (−1)ᵏ⁺¹ tr(J_fᵏ)/k` with Hutchinson traces.
    pub fn logdet_with(&self, x: &[f64], cfg: &LogdetConfig, seed: u64) -> Result<f64> {
        self.check(x)?;
        cfg.validate()?;
        if self.dim() <= cfg.exact_dim_cutoff {
            return logabsdet_lu(&Self::plus_identity(self.residual_jacobian(x)?));
        }
        let ch = self.chain(x);
        let mut total = 0.0;
        for v in self.probes(cfg, seed) {
            let mut w = v.clone();
            for k in 1..=cfg.terms {
                w = self.tangents(&ch, &w).pop().expect("nonempty");
                total += series_coeff(k) * vecops::dot(&v, &w);
            }
        }
        Ok(total / cfg.probes as f64)
    }

    pub fn vjp(&self, x: &[f64], dy: &[f64], c: f64, grad: &mut [f64], seed: u64) -> Result<Vec<f64>> {
        self.vjp_with(x, dy, c, grad, &self.logdet_config, seed)
    }

    /// Gradient of `⟨dy, y⟩ + c·logdet` where `logdet` is exactly the
    /// quantity returned by [`Self::logdet_with`] for the same probes.
    pub fn vjp_with(&self, x: &[f64], dy: &[f64], c: f64, grad: &mut [f64], cfg: &LogdetConfig, seed: u64) -> Result<Vec<f64>> {
        self.check(x)?;
        self.check(dy)?;
        if grad.len() != self.num_params() {
            return Err(Error::shape("parameter gradient has the wrong length"));
        }
        let trace = self.net.forward(x)?;
        let g = self.net.backprop(&trace, dy)?;
        let mut pg = g.params;
        let mut dx = vecops::add(dy, &g.input);
        if c != 0.0 {
            cfg.validate()?;
            let ch = self.chain(x);
            let d = self.dim();
            if d <= cfg.exact_dim_cutoff {
                // ∂ log|det M| = tr(M⁻¹ ∂M) = Σⱼ ⟨(M⁻ᵀ)ⱼ, ∂J eⱼ⟩
                let minv = inverse(&Self::plus_identity(self.residual_jacobian(x)?))?;
                for j in 0..d {
                    let mut e = vec![0.0; d];
                    e[j] = 1.0;
                    let col: Vec<f64> = (0..d).map(|i| c * minv.at(j, i)).collect();
                    let tang = self.tangents(&ch, &e);
                    let (gx, _) = self.tangent_backward(&ch, &tang, &col, &mut pg);
                    vecops::axpy(1.0, &gx, &mut dx);
                }
            } else {
                let scale = c / cfg.probes as f64;
                for v in self.probes(cfg, seed) {
                    let mut ws = Vec::with_capacity(cfg.terms + 1);
                    let mut tangs = Vec::with_capacity(cfg.terms);
                    ws.push(v.clone());
                    for _ in 0..cfg.terms {
                        let t = self.tangents(&ch, ws.last().expect("nonempty"));
                        ws.push(t.last().expect("nonempty").clone());
                        tangs.push(t);
                    }
                    // ḡₖ = cₖ v + Jᵀ ḡₖ₊₁
                    let mut gbar = vecops::scaled(scale * series_coeff(cfg.terms), &v);
                    for k in (1..=cfg.terms).rev() {
                        let (gx, gw) = self.tangent_backward(&ch, &tangs[k - 1], &gbar, &mut pg);
                        vecops::axpy(1.0, &gx, &mut dx);
                        if k > 1 {
                            gbar = gw;
                            vecops::axpy(scale * series_coeff(k - 1), &v, &mut gbar);
                        }
                    }
                }
            }
        }
        vecops::axpy(1.0, pg.data(), grad);
        Ok(dx)
    }

    pub(crate) fn from_parts(net: Network, lip: f64, singular: Vec<Vec<f64>>) -> Result<Self> {
        let mut b = Self::new(net, lip).map_err(|e| Error::Format(e.to_string()))?;
        if singular.len() == b.singular.len() && singular.iter().zip(&b.singular).all(|(a, c)| a.len() == c.len()) {
            b.singular = singular;
        }
        Ok(b)
    }

    pub(crate) fn singular_vectors(&self) -> &[Vec<f64>] {
        &self.singular
    }
}

fn series_coeff(k: usize) -> f64 {
    let s = if k % 2 == 1 { 1.0 } else { -1.0 };
    s / k as f64
}
