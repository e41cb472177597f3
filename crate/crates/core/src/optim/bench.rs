use super::{OptimizerConfig, OptimizerState};
use crate::numcore::vecops;
use crate::Result;

/// Start point of the camelback comparison.
pub const CAMELBACK_START: [f64; 2] = [-0.5, 0.8];

/// Three-hump camel function `2x² − 1.05x⁴ + x⁶/6 + xy + y²` and its gradient.
pub fn camelback(theta: &[f64]) -> (f64, [f64; 2]) {
    let (x, y) = (theta[0], theta[1]);
    let x2 = x * x;
    let v = 2.0 * x2 - 1.05 * x2 * x2 + x2 * x2 * x2 / 6.0 + x * y + y * y;
    let gx = 4.0 * x - 4.2 * x2 * x + x2 * x2 * x + y;
    let gy = x + 2.0 * y;
    (v, [gx, gy])
}

/// A named optimizer configuration on the camelback problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Benchmark {
    pub name: String,
    pub config: OptimizerConfig,
}

/// The five methods of the camelback comparison: GD, HB, NaG, RGD, Adam.
pub fn figure_methods() -> Vec<Benchmark> {
    vec![
        Benchmark { name: "GD".into(), config: OptimizerConfig::Sgd { lr: 0.01 } },
        Benchmark { name: "HB".into(), config: OptimizerConfig::heavy_ball(0.01, 0.9) },
        Benchmark { name: "NaG".into(), config: OptimizerConfig::Nesterov { h: 0.01, mu: 0.012 } },
        Benchmark { name: "RGD".into(), config: OptimizerConfig::relativistic(1e-4, 0.9259, 1e-8) },
        Benchmark { name: "Adam".into(), config: OptimizerConfig::adam_default(0.1) },
    ]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub theta: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkRun {
    pub name: String,
    pub rows: Vec<TrajectoryRow>,
    /// First step at which `‖θ‖ ≤ tol`, if reached.
    pub hit: Option<usize>,
}

/// Runs `bench` on the camelback from [`CAMELBACK_START`] for at most
/// `max_steps` steps, stopping once `‖θ‖ ≤ tol`. Row 0 is the start point.
pub fn run_benchmark(bench: &Benchmark, max_steps: usize, tol: f64) -> Result<BenchmarkRun> {
    let mut state = OptimizerState::new(bench.config, 2)?;
    let mut theta = CAMELBACK_START.to_vec();
    let row = |step: usize, th: &[f64]| {
        let (v, g) = camelback(th);
        TrajectoryRow { step, loss: v, grad_norm: vecops::norm(&g), theta: [th[0], th[1]] }
    };
    let mut rows = vec![row(0, &theta)];
    let mut hit = (vecops::norm(&theta) <= tol).then_some(0);
    let mut step = 0;
    while hit.is_none() && step < max_steps {
        step += 1;
        let (_, g) = camelback(&state.eval_point(&theta));
        theta = state.step(&theta, &g)?;
        rows.push(row(step, &theta));
        if vecops::norm(&theta) <= tol {
            hit = Some(step);
        }
    }
    Ok(BenchmarkRun { name: bench.name.clone(), rows, hit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{finite_diff_grad, Rng};

    #[test]
    fn camelback_values() {
        let (v, g) = camelback(&[0.0, 0.0]);
        assert_eq!(v, 0.0);
        assert_eq!(g, [0.0, 0.0]);
        let expected = 2.0 * 0.25 - 1.05 * 0.0625 + 0.015625 / 6.0 - 0.4 + 0.64;
        assert!((camelback(&CAMELBACK_START).0 - expected).abs() < 1e-15);
        assert!((expected - 0.676_979_166_666_666_7).abs() < 1e-15);
    }

    #[test]
    fn camelback_gradient_matches_fd() {
        let mut rng = Rng::seed_from(11);
        for _ in 0..100 {
            let p = vec![rng.uniform_in(-2.0, 2.0), rng.uniform_in(-2.0, 2.0)];
            let fd = finite_diff_grad(|x| camelback(x).0, &p, 1e-5).unwrap();
            let g = camelback(&p).1;
            assert!(vecops::max_abs_diff(&fd, &g) <= 1e-8, "{p:?}");
        }
    }

    #[test]
    fn every_method_reaches_the_minimum() {
        for b in figure_methods() {
            let run = run_benchmark(&b, 100_000, 1e-2).unwrap();
            assert!(run.hit.is_some(), "{} did not converge", b.name);
            assert_eq!(run.rows.len(), run.hit.unwrap() + 1);
        }
    }
}
