use std::path::Path;

use super::{Activation, Block, BlockKind};
use crate::codec::{Container, ContainerKind};
use crate::numcore::vecops;
use crate::{Error, Result};

/// Flattened parameters of a block sequence with per-block offsets.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    data: Vec<f64>,
    offsets: Vec<usize>,
}

impl ParamVector {
    /// `sizes[k]` is the parameter count of block `k`.
    pub fn zeros(sizes: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for s in sizes {
            acc += s;
            offsets.push(acc);
        }
        Self { data: vec![0.0; acc], offsets }
    }

    pub fn from_parts(sizes: &[usize], data: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(sizes);
        if data.len() != p.data.len() {
            return Err(Error::shape(format!(
                "parameter vector of length {} does not match layout of length {}",
                data.len(),
                p.data.len()
            )));
        }
        p.data = data;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn num_blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn block(&self, k: usize) -> &[f64] {
        &self.data[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn block_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn same_layout(&self, other: &ParamVector) -> bool {
        self.offsets == other.offsets
    }

    /// `self += alpha · other`
    pub fn axpy(&mut self, alpha: f64, other: &ParamVector) -> Result<()> {
        if !self.same_layout(other) {
            return Err(Error::shape("parameter vectors have different layouts"));
        }
        vecops::axpy(alpha, &other.data, &mut self.data);
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn norm(&self) -> f64 {
        vecops::norm(&self.data)
    }
}

/// States `z⁰ … z^K` of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    states: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn from_states(states: Vec<Vec<f64>>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Consistency("a trace holds at least the input state".into()));
        }
        Ok(Self { states })
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn input(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn output(&self) -> &[f64] {
        self.states.last().expect("trace is never empty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Result of [`Network::backprop`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub params: ParamVector,
    /// The input costate `p⁰`.
    pub input: Vec<f64>,
    /// Derivative with respect to each block's step size (zero for non-ODE blocks).
    pub steps: Vec<f64>,
}

/// An ordered composition of blocks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Network {
    blocks: Vec<Block>,
}

impl Network {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        for (k, w) in blocks.windows(2).enumerate() {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::shape(format!(
                    "block {k} outputs {} features but block {} expects {}",
                    w[0].out_dim(),
                    k + 1,
                    w[1].in_dim()
                )));
            }
        }
        Ok(Self { blocks })
    }

    pub fn push(&mut self, block: Block) -> Result<()> {
        if let Some(last) = self.blocks.last() {
            if last.out_dim() != block.in_dim() {
                return Err(Error::shape(format!(
                    "cannot append a block taking {} features after one producing {}",
                    block.in_dim(),
                    last.out_dim()
                )));
            }
        }
        self.blocks.push(block);
        Ok(())
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Block] {
        &mut self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn in_dim(&self) -> Option<usize> {
        self.blocks.first().map(Block::in_dim)
    }

    pub fn out_dim(&self) -> Option<usize> {
        self.blocks.last().map(Block::out_dim)
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Block::num_params).collect()
    }

    pub fn num_params(&self) -> usize {
        self.blocks.iter().map(Block::num_params).sum()
    }

    pub fn params(&self) -> ParamVector {
        let data = self.blocks.iter().flat_map(|b| b.params().iter().copied()).collect();
        ParamVector::from_parts(&self.param_sizes(), data).expect("layout built from the same blocks")
    }

    pub fn zero_params(&self) -> ParamVector {
        ParamVector::zeros(&self.param_sizes())
    }

    pub fn set_params(&mut self, p: &ParamVector) -> Result<()> {
        if p.offsets != ParamVector::zeros(&self.param_sizes()).offsets {
            return Err(Error::shape("parameter vector layout does not match the network"));
        }
        for (k, b) in self.blocks.iter_mut().enumerate() {
            b.params_mut().copy_from_slice(p.block(k));
        }
        Ok(())
    }

    pub fn steps(&self) -> Vec<f64> {
        self.blocks.iter().map(Block::step).collect()
    }

    pub fn set_steps(&mut self, h: &[f64]) -> Result<()> {
        if h.len() != self.blocks.len() {
            return Err(Error::shape(format!("expected {} step sizes, got {}", self.blocks.len(), h.len())));
        }
        for (b, hk) in self.blocks.iter_mut().zip(h) {
            if b.kind().is_ode() {
                b.set_step(*hk)?;
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        let mut states = Vec::with_capacity(self.blocks.len() + 1);
        states.push(x.to_vec());
        for b in &self.blocks {
            let next = b.forward(states.last().expect("nonempty"))?;
            states.push(next);
        }
        Ok(ForwardTrace { states })
    }

    /// Output of the network without keeping intermediate states.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut z = x.to_vec();
        for b in &self.blocks {
            z = b.forward(&z)?;
        }
        Ok(z)
    }

    /// Adjoint recursion over a stored trace.
    pub fn backprop(&self, trace: &ForwardTrace, loss_grad: &[f64]) -> Result<Gradients> {
        if trace.states.len() != self.blocks.len() + 1 {
            return Err(Error::Consistency(format!(
                "trace has {} states for a network of {} blocks",
                trace.states.len(),
                self.blocks.len()
            )));
        }
        for (k, b) in self.blocks.iter().enumerate() {
            if trace.states[k].len() != b.in_dim() || trace.states[k + 1].len() != b.out_dim() {
                return Err(Error::Consistency(format!("state {k} does not match block {k}")));
            }
        }
        if loss_grad.len() != trace.output().len() {
            return Err(Error::shape(format!(
                "loss gradient has length {}, network output has {}",
                loss_grad.len(),
                trace.output().len()
            )));
        }
        let mut params = self.zero_params();
        let mut steps = vec![0.0; self.blocks.len()];
        let mut p = loss_grad.to_vec();
        for k in (0..self.blocks.len()).rev() {
            let (next, dh) = self.blocks[k].backward(&trace.states[k], &p, params.block_mut(k))?;
            steps[k] = dh;
            p = next;
        }
        Ok(Gradients { params, input: p, steps })
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new(ContainerKind::Network);
        for b in &self.blocks {
            push_block(&mut c, b);
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != ContainerKind::Network {
            return Err(Error::Format(format!("expected a network container, found {:?}", c.kind)));
        }
        let blocks = c.records.iter().map(|r| read_block(r.tag, &r.ints, &r.reals)).collect::<Result<Vec<_>>>()?;
        Self::new(blocks).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().write_to(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::read_from(path)?)
    }
}

pub(crate) fn push_block(c: &mut Container, b: &Block) {
    let mut reals = Vec::with_capacity(b.num_params() + 1);
    reals.push(b.step());
    reals.extend_from_slice(b.params());
    c.push(
        b.kind().code(),
        vec![b.activation().code(), b.in_dim() as u64, b.out_dim() as u64, b.width() as u64],
        reals,
    );
}

pub(crate) fn read_block(tag: u8, ints: &[u64], reals: &[f64]) -> Result<Block> {
    let kind = BlockKind::from_code(tag)?;
    if ints.len() != 4 || reals.is_empty() {
        return Err(Error::Format("block record needs 4 integers and a step size".into()));
    }
    let act = Activation::from_code(ints[0])?;
    Block::from_raw(
        kind,
        act,
        ints[1] as usize,
        ints[2] as usize,
        ints[3] as usize,
        reals[0],
        reals[1..].to_vec(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{finite_diff_grad, Rng, Tensor};

    fn mixed(rng: &mut Rng) -> Network {
        Network::new(vec![
            Block::dense(3, 4, Activation::Tanh, rng),
            Block::euler(4, 0.2, Activation::Tanh, rng).unwrap(),
            Block::gradient_flow(4, 3, 0.3, Activation::Relu, rng).unwrap(),
            Block::verlet(4, 2, 0.15, Activation::Tanh, rng).unwrap(),
            Block::linear_head(4, 2, rng),
        ])
        .unwrap()
    }

    #[test]
    fn empty_network_trace_is_input() {
        let net = Network::default();
        let t = net.forward(&[1.0, 2.0]).unwrap();
        assert_eq!(t.states(), &[vec![1.0, 2.0]]);
    }

    #[test]
    fn single_block_trace() {
        let mut rng = Rng::seed_from(3);
        let b = Block::dense(2, 3, Activation::Tanh, &mut rng);
        let x = [0.3, -0.4];
        let net = Network::new(vec![b.clone()]).unwrap();
        let t = net.forward(&x).unwrap();
        assert_eq!(t.states(), &[x.to_vec(), b.forward(&x).unwrap()]);
    }

    #[test]
    fn composition_matches_explicit_loop() {
        let mut rng = Rng::seed_from(4);
        let net = mixed(&mut rng);
        let x = [0.1, 0.2, -0.3];
        let mut z = x.to_vec();
        for b in net.blocks() {
            z = b.forward(&z).unwrap();
        }
        assert_eq!(net.forward(&x).unwrap().output(), &z[..]);
        assert_eq!(net.predict(&x).unwrap(), z);
    }

    #[test]
    fn incompatible_dims_rejected() {
        let mut rng = Rng::seed_from(4);
        let r = Network::new(vec![Block::dense(3, 4, Activation::Tanh, &mut rng), Block::dense(3, 1, Activation::Tanh, &mut rng)]);
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn zero_loss_grad_gives_zero_gradient() {
        let mut rng = Rng::seed_from(9);
        let net = mixed(&mut rng);
        let t = net.forward(&[0.5, 0.1, 0.2]).unwrap();
        let g = net.backprop(&t, &[0.0, 0.0]).unwrap();
        assert!(g.params.data().iter().all(|v| *v == 0.0));
        assert!(g.input.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_head_least_squares_gradient() {
        let a = Tensor::matrix(2, 3, vec![1.0, -2.0, 0.5, 0.3, 0.0, 1.0]).unwrap();
        let net = Network::new(vec![Block::linear_head_from(&a, &[0.0, 0.0]).unwrap()]).unwrap();
        let z = [0.2, 0.7, -1.0];
        let y = [1.0, -1.0];
        let t = net.forward(&z).unwrap();
        let r = vecops::sub(t.output(), &y);
        let g = net.backprop(&t, &r).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert!((g.params.data()[i * 3 + j] - r[i] * z[j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = Rng::seed_from(21);
        let net = mixed(&mut rng);
        let x = [0.4, -0.9, 0.3];
        let y = [0.5, -0.25];
        let t = net.forward(&x).unwrap();
        let r = vecops::sub(t.output(), &y);
        let g = net.backprop(&t, &r).unwrap();
        let sizes = net.param_sizes();
        let fd = finite_diff_grad(
            |p| {
                let mut n = net.clone();
                n.set_params(&ParamVector::from_parts(&sizes, p.to_vec()).unwrap()).unwrap();
                let o = n.predict(&x).unwrap();
                0.5 * vecops::norm(&vecops::sub(&o, &y)).powi(2)
            },
            net.params().data(),
            1e-6,
        )
        .unwrap();
        assert!(vecops::rel_err(g.params.data(), &fd, 1e-8) < 1e-6);
    }

    #[test]
    fn mismatched_trace_is_a_consistency_error() {
        let mut rng = Rng::seed_from(2);
        let net = mixed(&mut rng);
        let short = ForwardTrace::from_states(vec![vec![0.0; 3]]).unwrap();
        assert!(matches!(net.backprop(&short, &[0.0, 0.0]), Err(Error::Consistency(_))));
    }

    #[test]
    fn container_roundtrip_is_exact() {
        let mut rng = Rng::seed_from(8);
        let mut net = mixed(&mut rng);
        net.blocks_mut()[1].params_mut()[0] = f64::MIN_POSITIVE;
        let back = Network::from_container(&Container::from_bytes(&net.to_container().to_bytes()).unwrap()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn param_vector_axpy_respects_layout() {
        let mut a = ParamVector::zeros(&[2, 1]);
        let b = ParamVector::from_parts(&[2, 1], vec![1.0, 2.0, 3.0]).unwrap();
        a.axpy(2.0, &b).unwrap();
        assert_eq!(a.data(), &[2.0, 4.0, 6.0]);
        assert_eq!(a.block(1), &[6.0]);
        assert!(a.axpy(1.0, &ParamVector::zeros(&[3])).is_err());
    }
}
