use proptest::prelude::*;
use structnet::invertible::{pixel_shuffle, pixel_unshuffle, CouplingLaw, CouplingLayer, FlowLayer, FlowModel, IResBlock, InvLinear, LogdetConfig, PixelShuffle};
use structnet::numcore::{finite_diff_jacobian, logabsdet_lu, vecops};
use structnet::Rng;

fn law(affine: bool) -> CouplingLaw {
    if affine {
        CouplingLaw::Affine
    } else {
        CouplingLaw::Additive
    }
}

/// Coupling, LU-linear and i-ResNet layers interleaved.
fn mixed_flow(dim: usize, seed: u64) -> FlowModel {
    let mut rng = Rng::seed_from(seed);
    let layers = vec![
        FlowLayer::Coupling(CouplingLayer::alternating(dim, 0, CouplingLaw::Affine, 6, &mut rng).unwrap()),
        FlowLayer::Linear(InvLinear::random(dim, &mut rng)),
        FlowLayer::Residual(IResBlock::random(dim, 5, 0.7, &mut rng).unwrap()),
        FlowLayer::Coupling(CouplingLayer::alternating(dim, 1, CouplingLaw::Additive, 6, &mut rng).unwrap()),
    ];
    FlowModel::new(dim, layers).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn coupling_round_trip(dim in 2usize..=6, affine in any::<bool>(), parity in 0usize..2, seed in any::<u64>()) {
        let mut rng = Rng::seed_from(seed);
        let layer = CouplingLayer::alternating(dim, parity, law(affine), 8, &mut rng).unwrap();
        let x = rng.normal_vec(dim);
        let back = layer.inverse(&layer.forward(&x).unwrap()).unwrap();
        prop_assert!(vecops::max_abs_diff(&x, &back) <= 1e-12);
        if !affine {
            prop_assert_eq!(layer.logdet(&x).unwrap(), 0.0);
        }
    }

    #[test]
    fn invlinear_round_trip_and_logdet(dim in 1usize..=6, seed in any::<u64>()) {
        let mut rng = Rng::seed_from(seed);
        let lin = InvLinear::random(dim, &mut rng);
        let x = rng.normal_vec(dim);
        let back = lin.inverse(&lin.forward(&x).unwrap()).unwrap();
        prop_assert!(vecops::max_abs_diff(&x, &back) <= 1e-12 * (1.0 + vecops::norm_inf(&x)));
        let lu = logabsdet_lu(&lin.materialize()).unwrap();
        prop_assert!((lu - lin.logdet()).abs() <= 1e-10);
    }

    #[test]
    fn pixel_shuffle_is_a_permutation(h in 1usize..=3, w in 1usize..=3, c in 1usize..=3, s in 1usize..=3, seed in any::<u64>()) {
        let (hh, ww) = (h * s, w * s);
        let mut rng = Rng::seed_from(seed);
        let x = rng.normal_vec(hh * ww * c);
        let y = pixel_shuffle(&x, hh, ww, c, s).unwrap();
        prop_assert_eq!(pixel_unshuffle(&y, hh, ww, c, s).unwrap(), x.clone());
        let mut a = x.clone();
        let mut b = y;
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
        let layer = PixelShuffle::new(hh, ww, c, s).unwrap();
        prop_assert_eq!(layer.inverse(&layer.forward(&x).unwrap()).unwrap(), x);
    }

    #[test]
    fn iresnet_round_trip(dim in 1usize..=6, seed in any::<u64>()) {
        let mut rng = Rng::seed_from(seed);
        let block = IResBlock::random(dim, 8, 0.9, &mut rng).unwrap();
        let x = rng.normal_vec(dim);
        let (back, _) = block.inverse_with(&block.forward(&x).unwrap(), 1e-12, 500).unwrap();
        prop_assert!(vecops::max_abs_diff(&x, &back) <= 1e-8);
    }

    #[test]
    fn flow_logdet_matches_jacobian(dim in 2usize..=6, seed in any::<u64>()) {
        let mut rng = Rng::seed_from(seed);
        let model = FlowModel::coupling_stack(dim, 3, CouplingLaw::Affine, 6, true, &mut rng).unwrap();
        let x = rng.normal_vec(dim);
        let j = finite_diff_jacobian(|v| model.forward(v), &x, 1e-6).unwrap();
        prop_assert!((model.logdet(&x, 0).unwrap() - logabsdet_lu(&j).unwrap()).abs() <= 1e-4);
        let back = model.inverse(&model.forward(&x).unwrap()).unwrap();
        prop_assert!(vecops::max_abs_diff(&x, &back) <= 1e-10);
    }

    #[test]
    fn memory_efficient_gradients_agree(dim in 2usize..=5, seed in any::<u64>()) {
        let model = mixed_flow(dim, seed);
        let mut rng = Rng::seed_from(seed ^ 7);
        let x = rng.normal_vec(dim);
        let w = rng.normal_vec(dim);
        let stored = model.stored_grad(&x, &w).unwrap();
        let lean = model.memory_efficient_grad(&x, &w).unwrap();
        prop_assert!(vecops::rel_err(stored.data(), lean.data(), 1e-8) <= 1e-6);
    }
}

#[test]
fn algebraic_stack_gradients_agree_tightly() {
    let mut rng = Rng::seed_from(3);
    let model = FlowModel::coupling_stack(4, 4, CouplingLaw::Affine, 8, true, &mut rng).unwrap();
    let x = rng.normal_vec(4);
    let w = rng.normal_vec(4);
    let a = model.stored_grad(&x, &w).unwrap();
    let b = model.memory_efficient_grad(&x, &w).unwrap();
    assert!(vecops::max_abs_diff(a.data(), b.data()) <= 1e-10);
}

#[test]
fn exact_logdet_path_for_small_residual_blocks() {
    let mut rng = Rng::seed_from(9);
    let block = IResBlock::random(3, 6, 0.9, &mut rng).unwrap();
    let x = rng.normal_vec(3);
    let j = finite_diff_jacobian(|v| block.forward(v), &x, 1e-6).unwrap();
    let cfg = LogdetConfig { terms: 10, probes: 1, exact_dim_cutoff: 8 };
    assert!((block.logdet_with(&x, &cfg, 0).unwrap() - logabsdet_lu(&j).unwrap()).abs() <= 1e-6);
}
