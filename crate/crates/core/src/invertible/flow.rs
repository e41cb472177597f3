use std::path::Path;

use rayon::prelude::*;

use super::coupling::alternating_mask;
use super::{CouplingLaw, CouplingLayer, IResBlock, InvLinear, PixelShuffle};
use crate::blocks::network::{push_block, read_block};
use crate::blocks::{Network, ParamVector};
use crate::codec::{Container, ContainerKind};
use crate::numcore::{vecops, Rng};
use crate::{Error, Result};

/// `ln(2π)`
pub const LOG_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Debug, PartialEq)]
pub enum FlowLayer {
    Coupling(CouplingLayer),
    Linear(InvLinear),
    Residual(IResBlock),
    Shuffle(PixelShuffle),
}

impl FlowLayer {
    pub fn dim(&self) -> usize {
        match self {
            FlowLayer::Coupling(l) => l.dim(),
            FlowLayer::Linear(l) => l.dim(),
            FlowLayer::Residual(l) => l.dim(),
            FlowLayer::Shuffle(l) => l.dim(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FlowLayer::Coupling(_) => "coupling",
            FlowLayer::Linear(_) => "invlinear",
            FlowLayer::Residual(_) => "iresnet",
            FlowLayer::Shuffle(_) => "pixel_shuffle",
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            FlowLayer::Coupling(l) => l.net().num_params(),
            FlowLayer::Linear(l) => l.params().len(),
            FlowLayer::Residual(l) => l.num_params(),
            FlowLayer::Shuffle(_) => 0,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            FlowLayer::Coupling(l) => l.net().params().into_data(),
            FlowLayer::Linear(l) => l.params().to_vec(),
            FlowLayer::Residual(l) => l.net().params().into_data(),
            FlowLayer::Shuffle(_) => Vec::new(),
        }
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(Error::shape("layer parameter length mismatch"));
        }
        match self {
            FlowLayer::Coupling(l) => {
                let sizes = l.net().param_sizes();
                l.net_mut().set_params(&ParamVector::from_parts(&sizes, p.to_vec())?)
            }
            FlowLayer::Linear(l) => {
                l.params_mut().copy_from_slice(p);
                Ok(())
            }
            FlowLayer::Residual(l) => {
                let sizes = l.net().param_sizes();
                l.net_mut().set_params(&ParamVector::from_parts(&sizes, p.to_vec())?)
            }
            FlowLayer::Shuffle(_) => Ok(()),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            FlowLayer::Coupling(l) => l.forward(x),
            FlowLayer::Linear(l) => l.forward(x),
            FlowLayer::Residual(l) => l.forward(x),
            FlowLayer::Shuffle(l) => l.forward(x),
        }
    }

    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        match self {
            FlowLayer::Coupling(l) => l.inverse(y),
            FlowLayer::Linear(l) => l.inverse(y),
            FlowLayer::Residual(l) => l.inverse(y),
            FlowLayer::Shuffle(l) => l.inverse(y),
        }
    }

    /// `log|det ∂y/∂x|`; `seed` fixes the trace probes of residual layers.
    pub fn logdet(&self, x: &[f64], seed: u64) -> Result<f64> {
        match self {
            FlowLayer::Coupling(l) => l.logdet(x),
            FlowLayer::Linear(l) => Ok(l.logdet()),
            FlowLayer::Residual(l) => l.logdet(x, seed),
            FlowLayer::Shuffle(_) => Ok(0.0),
        }
    }

    /// Gradient of `⟨dy, y⟩ + c·logdet`.
    pub fn vjp(&self, x: &[f64], dy: &[f64], c: f64, grad: &mut [f64], seed: u64) -> Result<Vec<f64>> {
        match self {
            FlowLayer::Coupling(l) => l.vjp(x, dy, c, grad),
            FlowLayer::Linear(l) => l.vjp(x, dy, c, grad),
            FlowLayer::Residual(l) => l.vjp(x, dy, c, grad, seed),
            FlowLayer::Shuffle(l) => l.vjp(dy),
        }
    }
}

fn layer_seed(seed: u64, layer: usize) -> u64 {
    seed ^ (layer as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Normalising flow `z = Ψ(x)` with a standard normal base distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowModel {
    dim: usize,
    layers: Vec<FlowLayer>,
}

/// Per-sample objective pieces used by the backward passes.
struct SampleGrad {
    value: f64,
    grad: Vec<f64>,
}

impl FlowModel {
    pub fn new(dim: usize, layers: Vec<FlowLayer>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::shape("flow dimension must be positive"));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.dim() != dim {
                return Err(Error::shape(format!("layer {k} ({}) has dim {}, flow has {dim}", l.name(), l.dim())));
            }
        }
        Ok(Self { dim, layers })
    }

    /// Alternating-partition coupling layers, each followed by an LU linear
    /// layer when `mix` is set.
    pub fn coupling_stack(dim: usize, couplings: usize, law: CouplingLaw, hidden: usize, mix: bool, rng: &mut Rng) -> Result<Self> {
        let mut layers = Vec::new();
        for k in 0..couplings {
            layers.push(FlowLayer::Coupling(CouplingLayer::alternating(dim, k, law, hidden, rng)?));
            if mix && k + 1 < couplings {
                layers.push(FlowLayer::Linear(InvLinear::random(dim, rng)));
            }
        }
        Self::new(dim, layers)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layers(&self) -> &[FlowLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [FlowLayer] {
        &mut self.layers
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(FlowLayer::num_params).collect()
    }

    pub fn params(&self) -> ParamVector {
        let data = self.layers.iter().flat_map(|l| l.params()).collect();
        ParamVector::from_parts(&self.param_sizes(), data).expect("layout from the same layers")
    }

    pub fn set_params(&mut self, p: &ParamVector) -> Result<()> {
        if p.offsets() != ParamVector::zeros(&self.param_sizes()).offsets() {
            return Err(Error::shape("parameter layout does not match the flow"));
        }
        for (k, l) in self.layers.iter_mut().enumerate() {
            l.set_params(p.block(k))?;
        }
        Ok(())
    }

    /// Re-certifies every residual layer with `iters` power iterations.
    pub fn renormalize(&mut self, iters: usize) -> Result<()> {
        for l in &mut self.layers {
            if let FlowLayer::Residual(r) = l {
                r.renormalize(iters)?;
            }
        }
        Ok(())
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::shape(format!("flow of dim {} got a sample of length {}", self.dim, x.len())));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut z = x.to_vec();
        for l in &self.layers {
            z = l.forward(&z)?;
        }
        Ok(z)
    }

    pub fn inverse(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        let mut x = z.to_vec();
        for l in self.layers.iter().rev() {
            x = l.inverse(&x)?;
        }
        Ok(x)
    }

    /// Sum of per-layer log-determinants along the forward pass.
    pub fn logdet(&self, x: &[f64], seed: u64) -> Result<f64> {
        self.check(x)?;
        let mut z = x.to_vec();
        let mut total = 0.0;
        for (k, l) in self.layers.iter().enumerate() {
            total += l.logdet(&z, layer_seed(seed, k))?;
            z = l.forward(&z)?;
        }
        Ok(total)
    }

    /// `log p(x) = −½‖Ψ(x)‖² − (M/2)·ln 2π + Σ logdet`.
    pub fn log_density(&self, x: &[f64], seed: u64) -> Result<f64> {
        let z = self.forward(x)?;
        let ld = self.logdet(x, seed)?;
        Ok(-0.5 * vecops::dot(&z, &z) - 0.5 * self.dim as f64 * LOG_2PI + ld)
    }

    fn forward_states(&self, x: &[f64], seed: u64) -> Result<(Vec<Vec<f64>>, f64)> {
        let mut states = Vec::with_capacity(self.layers.len() + 1);
        states.push(x.to_vec());
        let mut ld = 0.0;
        for (k, l) in self.layers.iter().enumerate() {
            let cur = states.last().expect("nonempty");
            let d = l.logdet(cur, layer_seed(seed, k))?;
            if !d.is_finite() {
                return Err(Error::NonFiniteLayer { layer: k, what: "log-determinant".into() });
            }
            ld += d;
            let next = l.forward(cur)?;
            if !vecops::all_finite(&next) {
                return Err(Error::NonFiniteLayer { layer: k, what: "activation".into() });
            }
            states.push(next);
        }
        Ok((states, ld))
    }

    /// Backward pass through the layers. With `memory_efficient` only the
    /// final state is kept and earlier states are rebuilt by inversion.
    fn backward(&self, x: &[f64], dz: &[f64], c: f64, seed: u64, memory_efficient: bool) -> Result<Vec<f64>> {
        let sizes = self.param_sizes();
        let mut grad = ParamVector::zeros(&sizes);
        let mut p = dz.to_vec();
        if memory_efficient {
            let mut z = self.forward(x)?;
            for k in (0..self.layers.len()).rev() {
                let prev = self.layers[k].inverse(&z)?;
                p = self.layers[k].vjp(&prev, &p, c, grad.block_mut(k), layer_seed(seed, k))?;
                z = prev;
            }
        } else {
            let (states, _) = self.forward_states(x, seed)?;
            for k in (0..self.layers.len()).rev() {
                p = self.layers[k].vjp(&states[k], &p, c, grad.block_mut(k), layer_seed(seed, k))?;
            }
        }
        Ok(grad.into_data())
    }

    /// Parameter gradient of `⟨loss_grad, Ψ(x)⟩` over a stored trace.
    pub fn stored_grad(&self, x: &[f64], loss_grad: &[f64]) -> Result<ParamVector> {
        self.check(x)?;
        self.check(loss_grad)?;
        ParamVector::from_parts(&self.param_sizes(), self.backward(x, loss_grad, 0.0, 0, false)?)
    }

    /// Same gradient as [`Self::stored_grad`], reconstructing states backward
    /// from the output instead of storing them.
    pub fn memory_efficient_grad(&self, x: &[f64], loss_grad: &[f64]) -> Result<ParamVector> {
        self.check(x)?;
        self.check(loss_grad)?;
        ParamVector::from_parts(&self.param_sizes(), self.backward(x, loss_grad, 0.0, 0, true)?)
    }

    fn sample_nll(&self, x: &[f64], seed: u64, memory_efficient: bool) -> Result<SampleGrad> {
        self.check(x)?;
        let (states, ld) = self.forward_states(x, seed)?;
        let z = states.last().expect("nonempty");
        let value = 0.5 * vecops::dot(z, z) + 0.5 * self.dim as f64 * LOG_2PI - ld;
        if !value.is_finite() {
            return Err(Error::NonFiniteLayer { layer: self.layers.len().saturating_sub(1), what: "negative log-likelihood".into() });
        }
        let grad = self.backward(x, z, -1.0, seed, memory_efficient)?;
        Ok(SampleGrad { value, grad })
    }

    /// Mean negative log-likelihood over `batch` and its parameter gradient.
    /// Residual-layer trace probes are fixed by `probe_seed`.
    pub fn nll(&self, batch: &[Vec<f64>], probe_seed: u64) -> Result<(f64, ParamVector)> {
        self.nll_impl(batch, probe_seed, false)
    }

    /// As [`Self::nll`] with memory-efficient backpropagation.
    pub fn nll_memory_efficient(&self, batch: &[Vec<f64>], probe_seed: u64) -> Result<(f64, ParamVector)> {
        self.nll_impl(batch, probe_seed, true)
    }

    fn nll_impl(&self, batch: &[Vec<f64>], probe_seed: u64, memory_efficient: bool) -> Result<(f64, ParamVector)> {
        if batch.is_empty() {
            return Err(Error::Precondition("negative log-likelihood needs a nonempty batch".into()));
        }
        let parts: Vec<SampleGrad> = batch
            .par_iter()
            .map(|x| self.sample_nll(x, probe_seed, memory_efficient))
            .collect::<Result<Vec<_>>>()?;
        let n = batch.len() as f64;
        let mut grad = ParamVector::zeros(&self.param_sizes());
        let mut value = 0.0;
        for p in &parts {
            value += p.value;
            vecops::axpy(1.0 / n, &p.grad, grad.data_mut());
        }
        Ok((value / n, grad))
    }

    /// Mean NLL only.
    pub fn nll_value(&self, batch: &[Vec<f64>], probe_seed: u64) -> Result<f64> {
        let vals: Vec<f64> = batch
            .par_iter()
            .map(|x| self.log_density(x, probe_seed).map(|v| -v))
            .collect::<Result<Vec<_>>>()?;
        Ok(vals.iter().sum::<f64>() / batch.len().max(1) as f64)
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new(ContainerKind::Flow);
        c.push(0, vec![self.dim as u64], Vec::new());
        for l in &self.layers {
            match l {
                FlowLayer::Coupling(cl) => {
                    let mut ints = vec![cl.law().code(), cl.net().len() as u64];
                    ints.extend(cl.mask().iter().map(|m| *m as u64));
                    c.push(TAG_COUPLING, ints, Vec::new());
                    cl.net().blocks().iter().for_each(|b| push_block(&mut c, b));
                }
                FlowLayer::Linear(il) => {
                    let mut ints: Vec<u64> = il.perm().iter().map(|p| *p as u64).collect();
                    ints.extend(il.signs().iter().map(|s| (*s > 0.0) as u64));
                    c.push(TAG_LINEAR, ints, il.params().to_vec());
                }
                FlowLayer::Residual(r) => {
                    let mut reals = vec![r.lip_target(), r.tol];
                    r.singular_vectors().iter().for_each(|v| reals.extend_from_slice(v));
                    let cfg = r.logdet_config;
                    c.push(
                        TAG_RESIDUAL,
                        vec![r.net().len() as u64, r.max_iter as u64, cfg.terms as u64, cfg.probes as u64, cfg.exact_dim_cutoff as u64],
                        reals,
                    );
                    r.net().blocks().iter().for_each(|b| push_block(&mut c, b));
                }
                FlowLayer::Shuffle(s) => {
                    c.push(TAG_SHUFFLE, vec![s.height as u64, s.width as u64, s.channels as u64, s.stride as u64], Vec::new());
                }
            }
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != ContainerKind::Flow {
            return Err(Error::Format(format!("expected a flow container, found {:?}", c.kind)));
        }
        let bad = |m: &str| Error::Format(m.to_string());
        let mut recs = c.records.iter();
        let head = recs.next().ok_or_else(|| bad("empty flow container"))?;
        if head.tag != 0 || head.ints.len() != 1 {
            return Err(bad("flow header missing"));
        }
        let dim = head.ints[0] as usize;
        let mut layers = Vec::new();
        let take_net = |n: usize, recs: &mut std::slice::Iter<'_, crate::codec::Record>| -> Result<Network> {
            let mut blocks = Vec::with_capacity(n);
            for _ in 0..n {
                let r = recs.next().ok_or_else(|| bad("truncated subnet"))?;
                blocks.push(read_block(r.tag, &r.ints, &r.reals)?);
            }
            Network::new(blocks).map_err(|e| Error::Format(e.to_string()))
        };
        while let Some(r) = recs.next() {
            let layer = match r.tag {
                TAG_COUPLING => {
                    if r.ints.len() < 2 {
                        return Err(bad("short coupling record"));
                    }
                    let law = CouplingLaw::from_code(r.ints[0])?;
                    let mask: Vec<bool> = r.ints[2..].iter().map(|m| *m != 0).collect();
                    let net = take_net(r.ints[1] as usize, &mut recs)?;
                    FlowLayer::Coupling(CouplingLayer::new(&mask, law, net).map_err(|e| Error::Format(e.to_string()))?)
                }
                TAG_LINEAR => {
                    let n = r.ints.len() / 2;
                    let perm = r.ints[..n].iter().map(|p| *p as usize).collect();
                    let signs = r.ints[n..].iter().map(|s| if *s != 0 { 1.0 } else { -1.0 }).collect();
                    FlowLayer::Linear(InvLinear::from_raw(perm, signs, r.reals.clone())?)
                }
                TAG_RESIDUAL => {
                    if r.ints.len() != 5 || r.reals.len() < 2 {
                        return Err(bad("short residual record"));
                    }
                    let net = take_net(r.ints[0] as usize, &mut recs)?;
                    let mut singular = Vec::new();
                    let mut off = 2;
                    for b in net.blocks() {
                        let end = off + b.in_dim();
                        if end > r.reals.len() {
                            return Err(bad("truncated singular vectors"));
                        }
                        singular.push(r.reals[off..end].to_vec());
                        off = end;
                    }
                    let mut block = IResBlock::from_parts(net, r.reals[0], singular)?;
                    block.tol = r.reals[1];
                    block.max_iter = r.ints[1] as usize;
                    block.logdet_config = super::LogdetConfig {
                        terms: r.ints[2] as usize,
                        probes: r.ints[3] as usize,
                        exact_dim_cutoff: r.ints[4] as usize,
                    };
                    FlowLayer::Residual(block)
                }
                TAG_SHUFFLE => {
                    if r.ints.len() != 4 {
                        return Err(bad("short shuffle record"));
                    }
                    let i = |k: usize| r.ints[k] as usize;
                    FlowLayer::Shuffle(PixelShuffle::new(i(0), i(1), i(2), i(3)).map_err(|e| Error::Format(e.to_string()))?)
                }
                t => return Err(Error::Format(format!("unknown flow layer tag {t}"))),
            };
            layers.push(layer);
        }
        Self::new(dim, layers).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().write_to(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::read_from(path)?)
    }

    /// Partition mask used by the `k`-th coupling layer of an alternating stack.
    pub fn partition_mask(dim: usize, k: usize) -> Vec<bool> {
        alternating_mask(dim, k)
    }
}

const TAG_COUPLING: u8 = 101;
const TAG_LINEAR: u8 = 102;
const TAG_RESIDUAL: u8 = 103;
const TAG_SHUFFLE: u8 = 104;
