use proptest::prelude::*;
use structnet::blocks::{one_sided_lipschitz_witness, Activation, Block};
use structnet::numcore::{finite_diff_jacobian, logabsdet_lu};
use structnet::{Rng, Tensor};

/// Jacobian of a linear block, read off column by column.
fn linear_jacobian(b: &Block) -> Tensor {
    let n = b.in_dim();
    let origin = b.forward(&vec![0.0; n]).unwrap();
    let mut m = Tensor::zeros(&[n, n]);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = b.forward(&e).unwrap();
        for i in 0..n {
            m.set(i, j, col[i] - origin[i]);
        }
    }
    m
}

fn symplectic_defect(m: &Tensor) -> f64 {
    let n = m.shape()[0];
    let half = n / 2;
    let mut j = Tensor::zeros(&[n, n]);
    for i in 0..half {
        j.set(i, half + i, 1.0);
        j.set(half + i, i, -1.0);
    }
    let mtjm = m.transpose().unwrap().matmul(&j).unwrap().matmul(m).unwrap();
    mtjm.data().iter().zip(j.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gradient_flow_vector_field_is_monotone(dim in 1usize..=6, width in 1usize..=6, relu in any::<bool>(), seed in any::<u64>()) {
        let act = if relu { Activation::Relu } else { Activation::Tanh };
        let mut rng = Rng::seed_from(seed);
        let b = Block::gradient_flow(dim, width, 0.1, act, &mut rng).unwrap();
        let nu = one_sided_lipschitz_witness(|z| b.vector_field(z), dim, 500, 3.0, seed).unwrap();
        prop_assert!(nu <= 1e-12, "witness {nu}");
    }

    #[test]
    fn linear_verlet_is_symplectic(half in 1usize..=4, width in 1usize..=4, h in 0.0f64..1.0, seed in any::<u64>()) {
        let mut rng = Rng::seed_from(seed);
        let b = Block::verlet(2 * half, width, h, Activation::Identity, &mut rng).unwrap();
        let m = linear_jacobian(&b);
        prop_assert!(symplectic_defect(&m) <= 1e-12);
        prop_assert!(logabsdet_lu(&m).unwrap().abs() <= 1e-12);
    }
}

#[test]
fn tanh_verlet_jacobian_is_symplectic_numerically() {
    let mut rng = Rng::seed_from(2);
    let b = Block::verlet(4, 3, 0.3, Activation::Tanh, &mut rng).unwrap();
    let x = rng.normal_vec(4);
    let m = finite_diff_jacobian(|v| b.forward(v), &x, 1e-6).unwrap();
    assert!(symplectic_defect(&m) <= 1e-7);
}
