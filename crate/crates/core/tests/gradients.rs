use proptest::prelude::*;
use structnet::blocks::{Activation, Block, Network, ParamVector};
use structnet::numcore::{finite_diff_grad, vecops};
use structnet::Rng;

/// Random network mixing every block family; `kinds` selects the block at
/// each layer (0 dense, 1 euler, 2 gradient flow, 3 verlet).
fn mixed_network(dim: usize, kinds: &[u8], act: Activation, seed: u64) -> Network {
    let mut rng = Rng::seed_from(seed);
    let blocks = kinds
        .iter()
        .map(|k| match k {
            0 => Block::dense(dim, dim, act, &mut rng),
            1 => Block::euler(dim, 0.3, act, &mut rng).unwrap(),
            2 => Block::gradient_flow(dim, dim + 1, 0.2, act, &mut rng).unwrap(),
            _ => Block::verlet(dim, dim / 2 + 1, 0.25, act, &mut rng).unwrap(),
        })
        .collect();
    Network::new(blocks).unwrap()
}

fn max_rel_gap(net: &Network, x: &[f64], w: &[f64]) -> f64 {
    let trace = net.forward(x).unwrap();
    let grads = net.backprop(&trace, w).unwrap();
    let sizes = net.param_sizes();
    let fd = finite_diff_grad(
        |p| {
            let mut n = net.clone();
            n.set_params(&ParamVector::from_parts(&sizes, p.to_vec()).unwrap()).unwrap();
            vecops::dot(w, &n.predict(x).unwrap())
        },
        net.params().data(),
        1e-6,
    )
    .unwrap();
    vecops::rel_err(grads.params.data(), &fd, 1e-6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn backprop_matches_finite_differences(
        half in 1usize..=4,
        kinds in prop::collection::vec(0u8..4, 1..=5),
        seed in any::<u64>(),
    ) {
        let dim = 2 * half;
        let net = mixed_network(dim, &kinds, Activation::Tanh, seed);
        let mut rng = Rng::seed_from(seed ^ 1);
        let x = rng.normal_vec(dim);
        let w = rng.normal_vec(dim);
        let gap = max_rel_gap(&net, &x, &w);
        prop_assert!(gap <= 1e-5, "relative error {gap}");
    }

    #[test]
    fn backprop_is_linear_in_the_seed(
        kinds in prop::collection::vec(0u8..4, 1..=4),
        seed in any::<u64>(),
        alpha in -3.0f64..3.0,
    ) {
        let net = mixed_network(4, &kinds, Activation::Tanh, seed);
        let mut rng = Rng::seed_from(seed);
        let x = rng.normal_vec(4);
        let w = rng.normal_vec(4);
        let trace = net.forward(&x).unwrap();
        let g1 = net.backprop(&trace, &w).unwrap();
        let g2 = net.backprop(&trace, &vecops::scaled(alpha, &w)).unwrap();
        let scaled = vecops::scaled(alpha, g1.params.data());
        prop_assert!(vecops::max_abs_diff(&scaled, g2.params.data()) <= 1e-12 * (1.0 + vecops::norm_inf(&scaled)));
    }
}

#[test]
fn relu_networks_away_from_kinks() {
    // relu is piecewise linear; a fixed seed keeps pre-activations off zero
    let net = mixed_network(4, &[1, 2, 0, 3], Activation::Relu, 17);
    let mut rng = Rng::seed_from(5);
    let x = rng.normal_vec(4);
    let w = rng.normal_vec(4);
    assert!(max_rel_gap(&net, &x, &w) <= 1e-5);
}
