use super::Activation;
use crate::numcore::tensor::{add_outer, matvec, matvec_t};
use crate::numcore::{vecops, Rng, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockKind {
    /// `σ(Ax + b)`
    Dense,
    /// `z + h σ(Az + b)`
    EulerResidual,
    /// `z − h Aᵀσ(Az + b)`
    GradientFlow,
    /// One symplectic Euler step of the two-layer Hamiltonian field.
    VerletHamiltonian,
    /// `Ax + b`
    LinearHead,
    /// `softmax(Ax + b)`
    SoftmaxHead,
}

impl BlockKind {
    pub fn is_ode(self) -> bool {
        matches!(self, BlockKind::EulerResidual | BlockKind::GradientFlow | BlockKind::VerletHamiltonian)
    }

    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Dense => "dense",
            BlockKind::EulerResidual => "euler",
            BlockKind::GradientFlow => "gradflow",
            BlockKind::VerletHamiltonian => "verlet",
            BlockKind::LinearHead => "linear",
            BlockKind::SoftmaxHead => "softmax",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "dense" => BlockKind::Dense,
            "euler" => BlockKind::EulerResidual,
            "gradflow" => BlockKind::GradientFlow,
            "verlet" => BlockKind::VerletHamiltonian,
            "linear" => BlockKind::LinearHead,
            "softmax" => BlockKind::SoftmaxHead,
            other => return Err(Error::UnknownName(other.to_string())),
        })
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            BlockKind::Dense => 1,
            BlockKind::EulerResidual => 2,
            BlockKind::GradientFlow => 3,
            BlockKind::VerletHamiltonian => 4,
            BlockKind::LinearHead => 5,
            BlockKind::SoftmaxHead => 6,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            1 => BlockKind::Dense,
            2 => BlockKind::EulerResidual,
            3 => BlockKind::GradientFlow,
            4 => BlockKind::VerletHamiltonian,
            5 => BlockKind::LinearHead,
            6 => BlockKind::SoftmaxHead,
            c => return Err(Error::Format(format!("unknown block tag {c}"))),
        })
    }
}

/// Location of a weight matrix inside a block's flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WeightSlot {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl WeightSlot {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A single parametric layer.
///
/// Parameters are stored flat: `A` row-major followed by `b`; verlet blocks
/// store `A₁, b₁, A₂, b₂`. `width` is the row count of the weight matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    kind: BlockKind,
    in_dim: usize,
    out_dim: usize,
    width: usize,
    step: f64,
    act: Activation,
    params: Vec<f64>,
}

fn check_vec(name: &str, v: &[f64], len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::shape(format!("{name}: expected length {len}, got {}", v.len())));
    }
    Ok(())
}

fn check_step(h: f64) -> Result<()> {
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::Precondition(format!("step size must be a nonnegative real, got {h}")));
    }
    Ok(())
}

fn init_weights(rows: usize, cols: usize, rng: &mut Rng) -> Vec<f64> {
    let scale = 1.0 / (cols as f64).sqrt();
    (0..rows * cols).map(|_| scale * rng.normal()).collect()
}

impl Block {
    fn assemble(kind: BlockKind, in_dim: usize, out_dim: usize, width: usize, step: f64, act: Activation, params: Vec<f64>) -> Self {
        Self { kind, in_dim, out_dim, width, step, act, params }
    }

    fn from_weights(kind: BlockKind, a: &Tensor, b: &[f64], step: f64, act: Activation) -> Result<Self> {
        let (rows, cols) = a.dims2()?;
        check_vec("bias", b, rows)?;
        let mut params = a.data().to_vec();
        params.extend_from_slice(b);
        let (in_dim, out_dim) = match kind {
            BlockKind::GradientFlow => (cols, cols),
            _ => (cols, rows),
        };
        Ok(Self::assemble(kind, in_dim, out_dim, rows, step, act, params))
    }

    pub fn dense(in_dim: usize, out_dim: usize, act: Activation, rng: &mut Rng) -> Self {
        let mut params = init_weights(out_dim, in_dim, rng);
        params.extend(std::iter::repeat(0.0).take(out_dim));
        Self::assemble(BlockKind::Dense, in_dim, out_dim, out_dim, 0.0, act, params)
    }

    pub fn dense_from(a: &Tensor, b: &[f64], act: Activation) -> Result<Self> {
        Self::from_weights(BlockKind::Dense, a, b, 0.0, act)
    }

    pub fn linear_head(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let mut b = Self::dense(in_dim, out_dim, Activation::Identity, rng);
        b.kind = BlockKind::LinearHead;
        b
    }

    pub fn linear_head_from(a: &Tensor, b: &[f64]) -> Result<Self> {
        Self::from_weights(BlockKind::LinearHead, a, b, 0.0, Activation::Identity)
    }

    pub fn softmax_head(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let mut b = Self::dense(in_dim, out_dim, Activation::Identity, rng);
        b.kind = BlockKind::SoftmaxHead;
        b
    }

    pub fn softmax_head_from(a: &Tensor, b: &[f64]) -> Result<Self> {
        Self::from_weights(BlockKind::SoftmaxHead, a, b, 0.0, Activation::Identity)
    }

    pub fn euler(dim: usize, step: f64, act: Activation, rng: &mut Rng) -> Result<Self> {
        check_step(step)?;
        let mut params = init_weights(dim, dim, rng);
        params.extend(std::iter::repeat(0.0).take(dim));
        Ok(Self::assemble(BlockKind::EulerResidual, dim, dim, dim, step, act, params))
    }

    pub fn euler_from(a: &Tensor, b: &[f64], step: f64, act: Activation) -> Result<Self> {
        check_step(step)?;
        if !a.is_square() {
            return Err(Error::shape(format!("euler block needs a square matrix, got {:?}", a.shape())));
        }
        Self::from_weights(BlockKind::EulerResidual, a, b, step, act)
    }

    pub fn gradient_flow(dim: usize, width: usize, step: f64, act: Activation, rng: &mut Rng) -> Result<Self> {
        check_step(step)?;
        Self::check_gradflow_act(act)?;
        let mut params = init_weights(width, dim, rng);
        params.extend(std::iter::repeat(0.0).take(width));
        Ok(Self::assemble(BlockKind::GradientFlow, dim, dim, width, step, act, params))
    }

    pub fn gradient_flow_from(a: &Tensor, b: &[f64], step: f64, act: Activation) -> Result<Self> {
        check_step(step)?;
        Self::check_gradflow_act(act)?;
        Self::from_weights(BlockKind::GradientFlow, a, b, step, act)
    }

    fn check_gradflow_act(act: Activation) -> Result<()> {
        if !act.is_monotone_nonexpansive() {
            return Err(Error::Precondition(format!(
                "gradient-flow blocks need an activation with derivative in [0,1], got {}",
                act.name()
            )));
        }
        Ok(())
    }

    /// Verlet block on a `dim`-dimensional state split as `(z, p)`.
    pub fn verlet(dim: usize, width: usize, step: f64, act: Activation, rng: &mut Rng) -> Result<Self> {
        check_step(step)?;
        if dim % 2 != 0 || dim == 0 {
            return Err(Error::shape(format!("verlet blocks need an even feature dimension, got {dim}")));
        }
        let half = dim / 2;
        let mut params = init_weights(width, half, rng);
        params.extend(std::iter::repeat(0.0).take(width));
        params.extend(init_weights(width, half, rng));
        params.extend(std::iter::repeat(0.0).take(width));
        Ok(Self::assemble(BlockKind::VerletHamiltonian, dim, dim, width, step, act, params))
    }

    pub fn verlet_from(a1: &Tensor, b1: &[f64], a2: &Tensor, b2: &[f64], step: f64, act: Activation) -> Result<Self> {
        check_step(step)?;
        let (m1, d1) = a1.dims2()?;
        let (m2, d2) = a2.dims2()?;
        if m1 != m2 || d1 != d2 {
            return Err(Error::shape(format!("verlet weights disagree: {m1}x{d1} vs {m2}x{d2}")));
        }
        check_vec("b1", b1, m1)?;
        check_vec("b2", b2, m1)?;
        let mut params = a1.data().to_vec();
        params.extend_from_slice(b1);
        params.extend_from_slice(a2.data());
        params.extend_from_slice(b2);
        Ok(Self::assemble(BlockKind::VerletHamiltonian, 2 * d1, 2 * d1, m1, step, act, params))
    }

    pub fn kind(&self) -> BlockKind {
        self.kind
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn activation(&self) -> Activation {
        self.act
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn set_step(&mut self, h: f64) -> Result<()> {
        check_step(h)?;
        self.step = h;
        Ok(())
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Columns of the weight matrices (`dim(z)` for verlet, the full input otherwise).
    fn weight_cols(&self) -> usize {
        match self.kind {
            BlockKind::VerletHamiltonian => self.in_dim / 2,
            _ => self.in_dim,
        }
    }

    /// Weight matrices of the block, in parameter order.
    pub fn weight_slots(&self) -> Vec<WeightSlot> {
        let (m, c) = (self.width, self.weight_cols());
        match self.kind {
            BlockKind::VerletHamiltonian => vec![
                WeightSlot { offset: 0, rows: m, cols: c },
                WeightSlot { offset: m * c + m, rows: m, cols: c },
            ],
            _ => vec![WeightSlot { offset: 0, rows: m, cols: c }],
        }
    }

    pub fn weight(&self, slot: usize) -> Result<Tensor> {
        let s = *self
            .weight_slots()
            .get(slot)
            .ok_or_else(|| Error::Precondition(format!("block has no weight slot {slot}")))?;
        Tensor::matrix(s.rows, s.cols, self.params[s.offset..s.offset + s.len()].to_vec())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.in_dim {
            return Err(Error::shape(format!(
                "{} block expects input of length {}, got {}",
                self.kind.name(),
                self.in_dim,
                x.len()
            )));
        }
        Ok(())
    }

    /// `A x + b` for the weight stored at `offset` with `rows×cols` shape.
    fn affine(&self, offset: usize, rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
        let a = &self.params[offset..offset + rows * cols];
        let b = &self.params[offset + rows * cols..offset + rows * cols + rows];
        let mut out = matvec(a, rows, cols, x);
        vecops::axpy(1.0, b, &mut out);
        out
    }

    fn weight_slice(&self, offset: usize, rows: usize, cols: usize) -> &[f64] {
        &self.params[offset..offset + rows * cols]
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let (m, c) = (self.width, self.weight_cols());
        let act = self.act;
        let h = self.step;
        Ok(match self.kind {
            BlockKind::Dense => self.affine(0, m, c, x).into_iter().map(|a| act.eval(a)).collect(),
            BlockKind::LinearHead => self.affine(0, m, c, x),
            BlockKind::SoftmaxHead => softmax(&self.affine(0, m, c, x)),
            BlockKind::EulerResidual => {
                let a = self.affine(0, m, c, x);
                x.iter().zip(&a).map(|(z, ai)| z + h * act.eval(*ai)).collect()
            }
            BlockKind::GradientFlow => {
                let s: Vec<f64> = self.affine(0, m, c, x).into_iter().map(|a| act.eval(a)).collect();
                let drift = matvec_t(self.weight_slice(0, m, c), m, c, &s);
                x.iter().zip(&drift).map(|(z, d)| z - h * d).collect()
            }
            BlockKind::VerletHamiltonian => {
                let (z, p) = x.split_at(c);
                let second = m * c + m;
                let s1: Vec<f64> = self.affine(0, m, c, p).into_iter().map(|a| act.eval(a)).collect();
                let dz = matvec_t(self.weight_slice(0, m, c), m, c, &s1);
                let z_next: Vec<f64> = z.iter().zip(&dz).map(|(zi, d)| zi + h * d).collect();
                let s2: Vec<f64> = self.affine(second, m, c, &z_next).into_iter().map(|a| act.eval(a)).collect();
                let dp = matvec_t(self.weight_slice(second, m, c), m, c, &s2);
                let mut out = z_next;
                out.extend(p.iter().zip(&dp).map(|(pi, d)| pi - h * d));
                out
            }
        })
    }

    /// The continuous-time vector field of an ODE block.
    pub fn vector_field(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let (m, c) = (self.width, self.weight_cols());
        let act = self.act;
        match self.kind {
            BlockKind::EulerResidual => Ok(self.affine(0, m, c, x).into_iter().map(|a| act.eval(a)).collect()),
            BlockKind::GradientFlow => {
                let s: Vec<f64> = self.affine(0, m, c, x).into_iter().map(|a| act.eval(a)).collect();
                Ok(matvec_t(self.weight_slice(0, m, c), m, c, &s).into_iter().map(|v| -v).collect())
            }
            BlockKind::VerletHamiltonian => {
                let (z, p) = x.split_at(c);
                let second = m * c + m;
                let s1: Vec<f64> = self.affine(0, m, c, p).into_iter().map(|a| act.eval(a)).collect();
                let s2: Vec<f64> = self.affine(second, m, c, z).into_iter().map(|a| act.eval(a)).collect();
                let mut out = matvec_t(self.weight_slice(0, m, c), m, c, &s1);
                out.extend(matvec_t(self.weight_slice(second, m, c), m, c, &s2).into_iter().map(|v| -v));
                Ok(out)
            }
            kind => Err(Error::Precondition(format!("{} blocks have no vector field", kind.name()))),
        }
    }

    /// Vector–Jacobian product. Accumulates `(∂y/∂θ)ᵀ dy` into `param_grad`
    /// and returns `(∂y/∂x)ᵀ dy`.
    pub fn vjp(&self, x: &[f64], dy: &[f64], param_grad: &mut [f64]) -> Result<Vec<f64>> {
        Ok(self.backward(x, dy, param_grad)?.0)
    }

    /// Derivative of `⟨dy, y⟩` with respect to the step size `h`.
    pub fn step_vjp(&self, x: &[f64], dy: &[f64]) -> Result<f64> {
        let mut scratch = vec![0.0; self.params.len()];
        Ok(self.backward(x, dy, &mut scratch)?.1)
    }

    pub(crate) fn backward(&self, x: &[f64], dy: &[f64], grad: &mut [f64]) -> Result<(Vec<f64>, f64)> {
        self.check_input(x)?;
        check_vec("output gradient", dy, self.out_dim)?;
        check_vec("parameter gradient", grad, self.params.len())?;
        let (m, c) = (self.width, self.weight_cols());
        let act = self.act;
        let h = self.step;
        match self.kind {
            BlockKind::Dense | BlockKind::LinearHead | BlockKind::SoftmaxHead => {
                let a = self.affine(0, m, c, x);
                let da: Vec<f64> = match self.kind {
                    BlockKind::Dense => a.iter().zip(dy).map(|(ai, g)| g * act.deriv(*ai)).collect(),
                    BlockKind::LinearHead => dy.to_vec(),
                    _ => {
                        let y = softmax(&a);
                        let inner = vecops::dot(dy, &y);
                        y.iter().zip(dy).map(|(yi, g)| yi * (g - inner)).collect()
                    }
                };
                Ok((self.affine_backward(0, m, c, x, &da, grad), 0.0))
            }
            BlockKind::EulerResidual => {
                let a = self.affine(0, m, c, x);
                let da: Vec<f64> = a.iter().zip(dy).map(|(ai, g)| h * g * act.deriv(*ai)).collect();
                let dstep: f64 = a.iter().zip(dy).map(|(ai, g)| g * act.eval(*ai)).sum();
                let mut dx = self.affine_backward(0, m, c, x, &da, grad);
                vecops::axpy(1.0, dy, &mut dx);
                Ok((dx, dstep))
            }
            BlockKind::GradientFlow => {
                let a = self.affine(0, m, c, x);
                let s: Vec<f64> = a.iter().map(|ai| act.eval(*ai)).collect();
                let w = self.weight_slice(0, m, c);
                // y = x − h Aᵀs
                let drift = matvec_t(w, m, c, &s);
                let dstep = -vecops::dot(dy, &drift);
                add_outer(&mut grad[..m * c], &vecops::scaled(-h, &s), dy);
                let ds = vecops::scaled(-h, &matvec(w, m, c, dy));
                let da: Vec<f64> = ds.iter().zip(&a).map(|(g, ai)| g * act.deriv(*ai)).collect();
                let mut dx = self.affine_backward(0, m, c, x, &da, grad);
                vecops::axpy(1.0, dy, &mut dx);
                Ok((dx, dstep))
            }
            BlockKind::VerletHamiltonian => {
                let (z, p) = x.split_at(c);
                let (dz_next, dp_next) = dy.split_at(c);
                let second = m * c + m;
                let w1 = self.weight_slice(0, m, c);
                let w2 = self.weight_slice(second, m, c);

                let a1 = self.affine(0, m, c, p);
                let s1: Vec<f64> = a1.iter().map(|ai| act.eval(*ai)).collect();
                let drift_z = matvec_t(w1, m, c, &s1);
                let z_next: Vec<f64> = z.iter().zip(&drift_z).map(|(zi, d)| zi + h * d).collect();
                let a2 = self.affine(second, m, c, &z_next);
                let s2: Vec<f64> = a2.iter().map(|ai| act.eval(*ai)).collect();
                let drift_p = matvec_t(w2, m, c, &s2);

                // p⁺ = p − h A₂ᵀ s₂
                let mut dp = dp_next.to_vec();
                let mut dstep = -vecops::dot(dp_next, &drift_p);
                add_outer(&mut grad[second..second + m * c], &vecops::scaled(-h, &s2), dp_next);
                let ds2 = vecops::scaled(-h, &matvec(w2, m, c, dp_next));
                let da2: Vec<f64> = ds2.iter().zip(&a2).map(|(g, ai)| g * act.deriv(*ai)).collect();
                let mut dz_total = self.affine_backward(second, m, c, &z_next, &da2, grad);
                vecops::axpy(1.0, dz_next, &mut dz_total);

                // z⁺ = z + h A₁ᵀ s₁
                dstep += vecops::dot(&dz_total, &drift_z);
                add_outer(&mut grad[..m * c], &vecops::scaled(h, &s1), &dz_total);
                let ds1 = vecops::scaled(h, &matvec(w1, m, c, &dz_total));
                let da1: Vec<f64> = ds1.iter().zip(&a1).map(|(g, ai)| g * act.deriv(*ai)).collect();
                let dp_from_a1 = self.affine_backward(0, m, c, p, &da1, grad);
                vecops::axpy(1.0, &dp_from_a1, &mut dp);

                let mut dx = dz_total;
                dx.extend(dp);
                Ok((dx, dstep))
            }
        }
    }

    /// Backward through `a = A u + b`: accumulates `dA += da uᵀ`, `db += da`
    /// and returns `Aᵀ da`.
    fn affine_backward(&self, offset: usize, rows: usize, cols: usize, u: &[f64], da: &[f64], grad: &mut [f64]) -> Vec<f64> {
        add_outer(&mut grad[offset..offset + rows * cols], da, u);
        vecops::axpy(1.0, da, &mut grad[offset + rows * cols..offset + rows * cols + rows]);
        matvec_t(self.weight_slice(offset, rows, cols), rows, cols, da)
    }

    pub(crate) fn from_raw(
        kind: BlockKind,
        act: Activation,
        in_dim: usize,
        out_dim: usize,
        width: usize,
        step: f64,
        params: Vec<f64>,
    ) -> Result<Self> {
        let cols = if kind == BlockKind::VerletHamiltonian { in_dim / 2 } else { in_dim };
        let expected = match kind {
            BlockKind::VerletHamiltonian => 2 * (width * cols + width),
            _ => width * cols + width,
        };
        let dims_ok = match kind {
            BlockKind::EulerResidual => in_dim == out_dim && width == in_dim,
            BlockKind::GradientFlow => in_dim == out_dim,
            BlockKind::VerletHamiltonian => in_dim == out_dim && in_dim % 2 == 0,
            _ => width == out_dim,
        };
        if !dims_ok || params.len() != expected {
            return Err(Error::Format(format!(
                "inconsistent {} block: in {in_dim}, out {out_dim}, width {width}, {} params",
                kind.name(),
                params.len()
            )));
        }
        Ok(Self::assemble(kind, in_dim, out_dim, width, step, act, params))
    }
}

pub(crate) fn softmax(a: &[f64]) -> Vec<f64> {
    let max = a.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x));
    let e: Vec<f64> = a.iter().map(|x| (x - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::finite_diff_grad;

    fn mat(r: usize, c: usize, v: &[f64]) -> Tensor {
        Tensor::matrix(r, c, v.to_vec()).unwrap()
    }

    #[test]
    fn dense_zero_weights_give_zero() {
        let b = Block::dense_from(&Tensor::zeros(&[3, 2]), &[0.0; 3], Activation::Tanh).unwrap();
        assert_eq!(b.forward(&[0.7, -4.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn dense_identity_passthrough() {
        let b = Block::dense_from(&Tensor::identity(3), &[0.0; 3], Activation::Identity).unwrap();
        assert_eq!(b.forward(&[0.7, -4.0, 2.0]).unwrap(), vec![0.7, -4.0, 2.0]);
    }

    #[test]
    fn dense_matches_scalar_loop() {
        let mut rng = Rng::seed_from(11);
        let blk = Block::dense(4, 3, Activation::Tanh, &mut rng);
        let mut params = blk.params().to_vec();
        params.iter_mut().skip(12).for_each(|b| *b = rng.normal());
        let mut blk = blk;
        blk.params_mut().copy_from_slice(&params);
        let x = [0.3, -0.1, 0.8, 1.5];
        let y = blk.forward(&x).unwrap();
        for i in 0..3 {
            let mut acc = params[12 + i];
            for j in 0..4 {
                acc += params[i * 4 + j] * x[j];
            }
            assert!((y[i] - acc.tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn euler_trivial_cases() {
        let mut rng = Rng::seed_from(1);
        let z = [0.4, -1.2];
        let blk = Block::euler(2, 0.0, Activation::Tanh, &mut rng).unwrap();
        assert_eq!(blk.forward(&z).unwrap(), z.to_vec());
        let zero = Block::euler_from(&Tensor::zeros(&[2, 2]), &[0.0, 0.0], 0.3, Activation::Tanh).unwrap();
        assert_eq!(zero.forward(&z).unwrap(), z.to_vec());
        let hand = Block::euler_from(&mat(1, 1, &[1.0]), &[0.0], 1.0, Activation::Identity).unwrap();
        assert_eq!(hand.forward(&[1.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn euler_rejects_mismatch() {
        let blk = Block::euler_from(&Tensor::identity(2), &[0.0, 0.0], 0.1, Activation::Tanh).unwrap();
        assert!(matches!(blk.forward(&[1.0]), Err(Error::Shape(_))));
        assert!(Block::euler_from(&Tensor::zeros(&[2, 3]), &[0.0, 0.0], 0.1, Activation::Tanh).is_err());
    }

    #[test]
    fn gradflow_fixed_point_and_zero_step() {
        // A z + b = 0 ⇒ σ(0) = 0 ⇒ no motion
        let a = mat(2, 2, &[1.0, 2.0, -1.0, 0.5]);
        let z = [1.0, -1.0];
        let b = [1.0, 1.5];
        let blk = Block::gradient_flow_from(&a, &b, 0.7, Activation::Tanh).unwrap();
        assert_eq!(blk.forward(&z).unwrap(), z.to_vec());
        let blk0 = Block::gradient_flow_from(&a, &[0.3, 0.2], 0.0, Activation::Relu).unwrap();
        assert_eq!(blk0.forward(&z).unwrap(), z.to_vec());
        assert!(Block::gradient_flow_from(&a, &b, 0.1, Activation::Identity).is_err());
    }

    #[test]
    fn verlet_harmonic_oscillator_step() {
        let one = mat(1, 1, &[1.0]);
        let blk = Block::verlet_from(&one, &[0.0], &one, &[0.0], 0.1, Activation::Identity).unwrap();
        let y = blk.forward(&[1.0, 0.0]).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-15);
        assert!((y[1] + 0.1).abs() < 1e-15);
        let still = Block::verlet_from(&one, &[0.3], &one, &[0.1], 0.0, Activation::Tanh).unwrap();
        assert_eq!(still.forward(&[0.5, -2.0]).unwrap(), vec![0.5, -2.0]);
    }

    #[test]
    fn verlet_rejects_odd_dimension() {
        let mut rng = Rng::seed_from(0);
        assert!(matches!(Block::verlet(3, 2, 0.1, Activation::Tanh, &mut rng), Err(Error::Shape(_))));
    }

    #[test]
    fn softmax_is_a_distribution() {
        let p = softmax(&[1000.0, 1000.0, -5.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((p[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn vjp_matches_finite_differences_for_every_kind() {
        let mut rng = Rng::seed_from(5);
        let blocks = vec![
            Block::dense(3, 4, Activation::Tanh, &mut rng),
            Block::linear_head(4, 2, &mut rng),
            Block::softmax_head(4, 3, &mut rng),
            Block::euler(4, 0.3, Activation::Tanh, &mut rng).unwrap(),
            Block::gradient_flow(4, 5, 0.2, Activation::Tanh, &mut rng).unwrap(),
            Block::verlet(4, 3, 0.25, Activation::Tanh, &mut rng).unwrap(),
        ];
        for mut blk in blocks {
            for p in blk.params_mut() {
                *p += 0.3 * rng.normal();
            }
            let x = rng.normal_vec(blk.in_dim());
            let w = rng.normal_vec(blk.out_dim());
            let mut g = vec![0.0; blk.num_params()];
            let (dx, dh) = blk.backward(&x, &w, &mut g).unwrap();

            let fx = finite_diff_grad(|xx| vecops::dot(&w, &blk.forward(xx).unwrap()), &x, 1e-6).unwrap();
            assert!(vecops::rel_err(&dx, &fx, 1e-8) < 1e-7, "{:?} input", blk.kind());

            let base = blk.clone();
            let fp = finite_diff_grad(
                |pp| {
                    let mut b = base.clone();
                    b.params_mut().copy_from_slice(pp);
                    vecops::dot(&w, &b.forward(&x).unwrap())
                },
                base.params(),
                1e-6,
            )
            .unwrap();
            assert!(vecops::rel_err(&g, &fp, 1e-8) < 1e-7, "{:?} params", blk.kind());

            if blk.kind().is_ode() {
                let h0 = blk.step();
                let fh = finite_diff_grad(
                    |hh| {
                        let mut b = base.clone();
                        b.set_step(hh[0]).unwrap();
                        vecops::dot(&w, &b.forward(&x).unwrap())
                    },
                    &[h0],
                    1e-6,
                )
                .unwrap();
                assert!((fh[0] - dh).abs() < 1e-7 * (1.0 + dh.abs()), "{:?} step", blk.kind());
            }
        }
    }
}
