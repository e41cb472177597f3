use rayon::prelude::*;

use super::conv::{correlate, correlate_backward, expand, expansion};
use super::{denoise_objective_grad, GridImage};
use crate::numcore::{vecops, Rng};
use crate::{Error, Result};

/// Symmetry group built into a [`ConvDenoiser`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DenoiserGroup {
    /// Translations only: ordinary convolutions.
    Translation,
    /// Translations and quarter turns.
    P4,
}

impl DenoiserGroup {
    fn order(self) -> usize {
        match self {
            DenoiserGroup::Translation => 1,
            DenoiserGroup::P4 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DenoiserGroup::Translation => "cnn",
            DenoiserGroup::P4 => "p4",
        }
    }
}

/// Lift → residual relu convolutions → projection → 1×1 channel mix.
///
/// `zᵏ⁺¹ = zᵏ + h·relu(conv(zᵏ) + bᵏ)` on group features; the projection
/// averages the rotation axis, so the P4 variant is rotation equivariant.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvDenoiser {
    group: DenoiserGroup,
    image_channels: usize,
    channels: usize,
    kernel: usize,
    depth: usize,
    step: f64,
    params: Vec<f64>,
    lift_map: Vec<usize>,
    block_map: Vec<usize>,
}

struct Trace {
    pre: Vec<Vec<f64>>,
    states: Vec<Vec<f64>>,
    projected: Vec<f64>,
}

impl ConvDenoiser {
    pub fn new(
        group: DenoiserGroup,
        image_channels: usize,
        channels: usize,
        kernel: usize,
        depth: usize,
        step: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        if kernel % 2 == 0 || channels == 0 || image_channels == 0 {
            return Err(Error::shape("denoiser needs odd kernel extent and positive channel counts"));
        }
        let g = group.order();
        let kk = kernel * kernel;
        let (lift_map, block_map) = match group {
            DenoiserGroup::P4 => (expansion(kernel, image_channels, channels, false), expansion(kernel, channels, channels, true)),
            DenoiserGroup::Translation => ((0..channels * image_channels * kk).collect(), (0..channels * channels * kk).collect()),
        };
        let mut m = Self { group, image_channels, channels, kernel, depth, step, params: Vec::new(), lift_map, block_map };
        let mut p = Vec::with_capacity(m.num_params());
        let lift_scale = 1.0 / ((image_channels * kk) as f64).sqrt();
        p.extend((0..channels * image_channels * kk).map(|_| lift_scale * rng.normal()));
        p.extend(std::iter::repeat(0.0).take(channels));
        let block_scale = 1.0 / ((g * channels * kk) as f64).sqrt();
        for _ in 0..depth {
            p.extend((0..channels * channels * g * kk).map(|_| block_scale * rng.normal()));
            p.extend(std::iter::repeat(0.0).take(channels));
        }
        let proj_scale = 1.0 / (channels as f64).sqrt();
        p.extend((0..image_channels * channels).map(|_| proj_scale * rng.normal()));
        p.extend(std::iter::repeat(0.0).take(image_channels));
        m.params = p;
        debug_assert_eq!(m.params.len(), m.num_params());
        Ok(m)
    }

    pub fn group(&self) -> DenoiserGroup {
        self.group
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    fn lift_len(&self) -> usize {
        self.channels * self.image_channels * self.kernel * self.kernel
    }

    fn block_len(&self) -> usize {
        self.channels * self.channels * self.group.order() * self.kernel * self.kernel
    }

    pub fn num_params(&self) -> usize {
        self.lift_len() + self.channels + self.depth * (self.block_len() + self.channels) + self.image_channels * (self.channels + 1)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn block_offset(&self, k: usize) -> usize {
        self.lift_len() + self.channels + k * (self.block_len() + self.channels)
    }

    fn proj_offset(&self) -> usize {
        self.block_offset(self.depth)
    }

    fn add_bias(&self, a: &mut [f64], bias: &[f64]) {
        let c = self.channels;
        for chunk in a.chunks_mut(c) {
            vecops::axpy(1.0, bias, chunk);
        }
    }

    fn check(&self, x: &GridImage) -> Result<()> {
        if x.channels() != self.image_channels {
            return Err(Error::shape(format!("denoiser expects {} channels, image has {}", self.image_channels, x.channels())));
        }
        Ok(())
    }

    fn run(&self, x: &GridImage) -> Result<(Trace, GridImage)> {
        self.check(x)?;
        let (h, w) = (x.height(), x.width());
        let (g, c, k) = (self.group.order(), self.channels, self.kernel);
        let p = &self.params;
        let lw = expand(&p[..self.lift_len()], &self.lift_map);
        let mut a0 = correlate(x.data(), h, w, self.image_channels, &lw, g * c, k);
        self.add_bias(&mut a0, &p[self.lift_len()..self.lift_len() + c]);
        let mut states = vec![a0.iter().map(|v| v.max(0.0)).collect::<Vec<f64>>()];
        let mut pre = vec![a0];
        for b in 0..self.depth {
            let off = self.block_offset(b);
            let bw = expand(&p[off..off + self.block_len()], &self.block_map);
            let z = states.last().expect("nonempty");
            let mut a = correlate(z, h, w, g * c, &bw, g * c, k);
            self.add_bias(&mut a, &p[off + self.block_len()..off + self.block_len() + c]);
            let next: Vec<f64> = z.iter().zip(&a).map(|(zi, ai)| zi + self.step * ai.max(0.0)).collect();
            pre.push(a);
            states.push(next);
        }
        let zk = states.last().expect("nonempty");
        let inv = 1.0 / g as f64;
        let projected: Vec<f64> = zk
            .chunks(g * c)
            .flat_map(|px| (0..c).map(move |ch| inv * (0..g).map(|r| px[r * c + ch]).sum::<f64>()))
            .collect();
        let po = self.proj_offset();
        let (pw, pb) = (&p[po..po + self.image_channels * c], &p[po + self.image_channels * c..]);
        let mut out = Vec::with_capacity(h * w * self.image_channels);
        for m in projected.chunks(c) {
            for o in 0..self.image_channels {
                out.push(pb[o] + vecops::dot(&pw[o * c..(o + 1) * c], m));
            }
        }
        Ok((Trace { pre, states, projected }, GridImage::new(h, w, self.image_channels, out)?))
    }

    pub fn forward(&self, x: &GridImage) -> Result<GridImage> {
        Ok(self.run(x)?.1)
    }

    /// Parameter gradient of `⟨dy, Ψ(x)⟩`.
    pub fn vjp(&self, x: &GridImage, dy: &[f64]) -> Result<Vec<f64>> {
        let (tr, y) = self.run(x)?;
        if dy.len() != y.data().len() {
            return Err(Error::shape("output gradient has the wrong length"));
        }
        let (h, w) = (x.height(), x.width());
        let (g, c, k) = (self.group.order(), self.channels, self.kernel);
        let ic = self.image_channels;
        let p = &self.params;
        let mut grad = vec![0.0; p.len()];
        let po = self.proj_offset();
        let mut dz = vec![0.0; h * w * g * c];
        let inv = 1.0 / g as f64;
        for (pix, (m, d)) in tr.projected.chunks(c).zip(dy.chunks(ic)).enumerate() {
            for o in 0..ic {
                vecops::axpy(d[o], m, &mut grad[po + o * c..po + (o + 1) * c]);
                grad[po + ic * c + o] += d[o];
                for ch in 0..c {
                    let dm = d[o] * p[po + o * c + ch] * inv;
                    for r in 0..g {
                        dz[pix * g * c + r * c + ch] += dm;
                    }
                }
            }
        }
        for b in (0..self.depth).rev() {
            let off = self.block_offset(b);
            let bl = self.block_len();
            let bw = expand(&p[off..off + bl], &self.block_map);
            let da: Vec<f64> = dz
                .iter()
                .zip(&tr.pre[b + 1])
                .map(|(d, a)| if *a > 0.0 { self.step * d } else { 0.0 })
                .collect();
            self.bias_grad(&da, &mut grad[off + bl..off + bl + c]);
            let mut dw = vec![0.0; bw.len()];
            correlate_backward(&tr.states[b], h, w, g * c, &bw, g * c, k, &da, &mut dz, &mut dw);
            for (i, &src) in self.block_map.iter().enumerate() {
                grad[off + src] += dw[i];
            }
        }
        let ll = self.lift_len();
        let da0: Vec<f64> = dz.iter().zip(&tr.pre[0]).map(|(d, a)| if *a > 0.0 { *d } else { 0.0 }).collect();
        self.bias_grad(&da0, &mut grad[ll..ll + c]);
        let lw = expand(&p[..ll], &self.lift_map);
        let mut dw = vec![0.0; lw.len()];
        let mut dx = vec![0.0; x.data().len()];
        correlate_backward(x.data(), h, w, ic, &lw, g * c, k, &da0, &mut dx, &mut dw);
        for (i, &src) in self.lift_map.iter().enumerate() {
            grad[src] += dw[i];
        }
        Ok(grad)
    }

    fn bias_grad(&self, da: &[f64], out: &mut [f64]) {
        for chunk in da.chunks(self.channels) {
            vecops::axpy(1.0, chunk, out);
        }
    }

    /// Mean denoising objective over `(noisy, clean)` pairs and its gradient.
    pub fn loss_and_grad(&self, pairs: &[(GridImage, GridImage)], lambda: f64, eps: f64) -> Result<(f64, Vec<f64>)> {
        if pairs.is_empty() {
            return Err(Error::Precondition("empty batch".into()));
        }
        let parts: Vec<(f64, Vec<f64>)> = pairs
            .par_iter()
            .map(|(noisy, clean)| {
                let y = self.forward(noisy)?;
                let (v, dy) = denoise_objective_grad(&y, clean, lambda, eps)?;
                Ok((v, self.vjp(noisy, &dy)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = pairs.len() as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut value = 0.0;
        for (v, g) in &parts {
            value += v;
            vecops::axpy(1.0 / n, g, &mut grad);
        }
        Ok((value / n, grad))
    }

    pub fn loss(&self, pairs: &[(GridImage, GridImage)], lambda: f64, eps: f64) -> Result<f64> {
        let vals: Vec<f64> = pairs
            .par_iter()
            .map(|(noisy, clean)| super::denoise_objective(&self.forward(noisy)?, clean, lambda, eps))
            .collect::<Result<Vec<_>>>()?;
        Ok(vals.iter().sum::<f64>() / pairs.len().max(1) as f64)
    }
}
