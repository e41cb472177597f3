use std::f64::consts::PI;

use crate::numcore::Rng;
use crate::{Error, Result};

pub const DATASET_NAMES: [&str; 4] = ["halfmoon2d", "donut2d", "donut3d", "two_halfmoons_density"];

/// Labelled samples. Unlabelled sets carry empty label vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub seed: u64,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, seed: u64, features: Vec<Vec<f64>>, labels: Vec<Vec<f64>>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::shape(format!("{} feature rows but {} labels", features.len(), labels.len())));
        }
        Ok(Self { name: name.into(), seed, features, labels })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.features.first().map(Vec::len)
    }

    pub fn label_dim(&self) -> Option<usize> {
        self.labels.first().map(Vec::len)
    }
}

/// Sample `i` alternates between the two classes, so every set is balanced.
///
/// * `halfmoon2d`: upper arc `(cos t, sin t)` with label `+1`, lower arc
///   `(1 − cos t, ½ − sin t)` with label `−1`, `t ∈ [0, π]`.
/// * `donut2d` / `donut3d`: core of radius `≤ ½` with label `−1`, shell of
///   radius in `[1, 1.5]` with label `+1`.
/// * `two_halfmoons_density`: the half-moon points without labels.
///
/// Every coordinate gets Gaussian jitter of deviation `noise`.
pub fn make_dataset(name: &str, n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if !(noise >= 0.0) {
        return Err(Error::Precondition(format!("noise must be nonnegative, got {noise}")));
    }
    let mut rng = Rng::seed_from(seed);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let upper = i % 2 == 0;
        let (mut x, y) = match name {
            "halfmoon2d" | "two_halfmoons_density" => {
                let t = PI * rng.uniform();
                if upper {
                    (vec![t.cos(), t.sin()], 1.0)
                } else {
                    (vec![1.0 - t.cos(), 0.5 - t.sin()], -1.0)
                }
            }
            "donut2d" | "donut3d" => {
                let dim = if name == "donut2d" { 2 } else { 3 };
                let dir = unit_vector(dim, &mut rng);
                let (r, label) = if upper { (rng.uniform_in(1.0, 1.5), 1.0) } else { (0.5 * rng.uniform(), -1.0) };
                (dir.into_iter().map(|d| r * d).collect(), label)
            }
            other => return Err(Error::UnknownName(other.to_string())),
        };
        if noise > 0.0 {
            x.iter_mut().for_each(|v| *v += noise * rng.normal());
        }
        features.push(x);
        labels.push(if name == "two_halfmoons_density" { Vec::new() } else { vec![y] });
    }
    if n == 0 && !DATASET_NAMES.contains(&name) {
        return Err(Error::UnknownName(name.to_string()));
    }
    Dataset::new(name, seed, features, labels)
}

fn unit_vector(dim: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v = rng.normal_vec(dim);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sha2::{Digest, Sha256};

    fn digest(d: &Dataset) -> String {
        let mut h = Sha256::new();
        for v in d.features.iter().chain(&d.labels).flatten() {
            h.update(v.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    #[test]
    fn empty_and_unknown() {
        for name in DATASET_NAMES {
            assert!(make_dataset(name, 0, 0.1, 1).unwrap().is_empty());
        }
        assert!(matches!(make_dataset("spiral", 4, 0.0, 1), Err(Error::UnknownName(_))));
        assert!(matches!(make_dataset("spiral", 0, 0.0, 1), Err(Error::UnknownName(_))));
    }

    #[test]
    fn noiseless_moons_lie_on_arcs() {
        let d = make_dataset("halfmoon2d", 200, 0.0, 5).unwrap();
        for (x, y) in d.features.iter().zip(&d.labels) {
            let (cx, cy) = if y[0] > 0.0 { (0.0, 0.0) } else { (1.0, 0.5) };
            let r = ((x[0] - cx).powi(2) + (x[1] - cy).powi(2)).sqrt();
            assert!((r - 1.0).abs() < 1e-12);
            assert!(if y[0] > 0.0 { x[1] >= 0.0 } else { x[1] <= 0.5 });
        }
    }

    #[test]
    fn donuts_separate_by_radius() {
        for name in ["donut2d", "donut3d"] {
            let d = make_dataset(name, 100, 0.0, 6).unwrap();
            for (x, y) in d.features.iter().zip(&d.labels) {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert_eq!(r >= 1.0 - 1e-12, y[0] > 0.0);
            }
        }
        assert_eq!(make_dataset("donut3d", 3, 0.0, 1).unwrap().feature_dim(), Some(3));
    }

    #[test]
    fn density_set_is_unlabelled() {
        let d = make_dataset("two_halfmoons_density", 10, 0.05, 2).unwrap();
        assert_eq!(d.len(), 10);
        assert!(d.labels.iter().all(Vec::is_empty));
    }

    #[test]
    fn deterministic_golden() {
        let a = make_dataset("halfmoon2d", 4, 0.1, 42).unwrap();
        assert_eq!(a, make_dataset("halfmoon2d", 4, 0.1, 42).unwrap());
        assert_eq!(digest(&a), GOLDEN);
    }

    const GOLDEN: &str = "042bc6744db13d435566ff18a75324d5b5e29dd3d97e69e0bb70047b2a0eeaf8";
}
