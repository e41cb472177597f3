use crate::numcore::{Rng, Tensor};
use crate::{Error, Result};

/// Lower bound on `|diag(U)|`.
pub const DIAG_FLOOR: f64 = 1e-3;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus_inv(y: f64) -> f64 {
    // log(exp(y) − 1), rewritten to stay accurate for large y
    y + (-(-y).exp_m1()).ln()
}

/// `y = P L U x` with unit-lower `L`, upper `U` whose diagonal is
/// `signᵢ·(ε₀ + softplus(dᵢ))`, and a fixed permutation `P`.
///
/// Parameters are laid out as strict lower entries of `L` (row-major), strict
/// upper entries of `U` (row-major), then `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct InvLinear {
    n: usize,
    perm: Vec<usize>,
    signs: Vec<f64>,
    params: Vec<f64>,
}

impl InvLinear {
    fn tri(n: usize) -> usize {
        n * (n - 1) / 2
    }

    pub fn identity(n: usize) -> Self {
        let d = softplus_inv(1.0 - DIAG_FLOOR);
        let mut params = vec![0.0; 2 * Self::tri(n)];
        params.extend(std::iter::repeat(d).take(n));
        Self { n, perm: (0..n).collect(), signs: vec![1.0; n], params }
    }

    /// Random permutation, small random triangular parts and diagonal near ±1.
    pub fn random(n: usize, rng: &mut Rng) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        let mut params: Vec<f64> = (0..2 * Self::tri(n)).map(|_| 0.3 * rng.normal()).collect();
        let signs: Vec<f64> = (0..n).map(|_| rng.rademacher()).collect();
        params.extend((0..n).map(|_| softplus_inv(1.0 - DIAG_FLOOR + 0.5 * rng.uniform())));
        Self { n, perm, signs, params }
    }

    /// Builds the layer from explicit factors. `perm[i]` is the source index
    /// of output `i`; only the strict triangles of `l` and `u` are read, and
    /// `|u_ii|` must exceed [`DIAG_FLOOR`].
    pub fn from_factors(perm: &[usize], l: &Tensor, u: &Tensor) -> Result<Self> {
        let n = perm.len();
        if l.shape() != [n, n] || u.shape() != [n, n] {
            return Err(Error::shape(format!("LU factors must be {n}x{n}")));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::Precondition("perm is not a permutation".into()));
            }
            seen[p] = true;
        }
        let mut params = Vec::with_capacity(2 * Self::tri(n) + n);
        for i in 0..n {
            for j in 0..i {
                params.push(l.at(i, j));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                params.push(u.at(i, j));
            }
        }
        let mut signs = Vec::with_capacity(n);
        for i in 0..n {
            let v = u.at(i, i);
            if v.abs() <= DIAG_FLOOR {
                return Err(Error::Precondition(format!("|u_{i}{i}| = {} must exceed {DIAG_FLOOR}", v.abs())));
            }
            signs.push(v.signum());
            params.push(softplus_inv(v.abs() - DIAG_FLOOR));
        }
        Ok(Self { n, perm: perm.to_vec(), signs, params })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub(crate) fn from_raw(perm: Vec<usize>, signs: Vec<f64>, params: Vec<f64>) -> Result<Self> {
        let n = perm.len();
        if signs.len() != n || params.len() != 2 * Self::tri(n) + n {
            return Err(Error::Format("inconsistent invertible linear record".into()));
        }
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || seen[p] {
                return Err(Error::Format("stored permutation is invalid".into()));
            }
            seen[p] = true;
        }
        Ok(Self { n, perm, signs, params })
    }

    fn l_at(&self, i: usize, j: usize) -> f64 {
        // strict lower, row i starts at i(i−1)/2
        self.params[i * (i - 1) / 2 + j]
    }

    fn u_index(&self, i: usize, j: usize) -> usize {
        // strict upper, row i holds n−1−i entries
        let t = Self::tri(self.n);
        t + i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    fn u_at(&self, i: usize, j: usize) -> f64 {
        self.params[self.u_index(i, j)]
    }

    fn diag_raw(&self) -> &[f64] {
        &self.params[2 * Self::tri(self.n)..]
    }

    pub fn diag(&self) -> Vec<f64> {
        self.diag_raw().iter().zip(&self.signs).map(|(d, s)| s * (DIAG_FLOOR + softplus(*d))).collect()
    }

    fn apply_u(&self, x: &[f64]) -> Vec<f64> {
        let diag = self.diag();
        (0..self.n)
            .map(|i| diag[i] * x[i] + (i + 1..self.n).map(|j| self.u_at(i, j) * x[j]).sum::<f64>())
            .collect()
    }

    fn apply_l(&self, u: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| u[i] + (0..i).map(|j| self.l_at(i, j) * u[j]).sum::<f64>()).collect()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::shape(format!("invertible linear layer of dim {} got length {}", self.n, x.len())));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let l = self.apply_l(&self.apply_u(x));
        Ok(self.perm.iter().map(|&p| l[p]).collect())
    }

    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y)?;
        let mut l = vec![0.0; self.n];
        for (i, &p) in self.perm.iter().enumerate() {
            l[p] = y[i];
        }
        let mut u = vec![0.0; self.n];
        for i in 0..self.n {
            u[i] = l[i] - (0..i).map(|j| self.l_at(i, j) * u[j]).sum::<f64>();
        }
        let diag = self.diag();
        let mut x = vec![0.0; self.n];
        for i in (0..self.n).rev() {
            let s: f64 = (i + 1..self.n).map(|j| self.u_at(i, j) * x[j]).sum();
            x[i] = (u[i] - s) / diag[i];
        }
        Ok(x)
    }

    pub fn logdet(&self) -> f64 {
        self.diag_raw().iter().map(|d| (DIAG_FLOOR + softplus(*d)).ln()).sum()
    }

    /// The dense matrix `P L U`.
    pub fn materialize(&self) -> Tensor {
        let mut m = Tensor::zeros(&[self.n, self.n]);
        for j in 0..self.n {
            let mut e = vec![0.0; self.n];
            e[j] = 1.0;
            let col = self.forward(&e).expect("dimension matches");
            for i in 0..self.n {
                m.set(i, j, col[i]);
            }
        }
        m
    }

    /// Gradient of `⟨dy, y⟩ + c·logdet`; parameters accumulate into `grad`.
    pub fn vjp(&self, x: &[f64], dy: &[f64], c: f64, grad: &mut [f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        self.check(dy)?;
        let n = self.n;
        let u = self.apply_u(x);
        let mut dl = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            dl[p] = dy[i];
        }
        // l = L u
        let mut du = dl.clone();
        for i in 0..n {
            for j in 0..i {
                grad[i * (i - 1) / 2 + j] += dl[i] * u[j];
                du[j] += self.l_at(i, j) * dl[i];
            }
        }
        // u = U x
        let diag = self.diag();
        let mut dx = vec![0.0; n];
        let t2 = 2 * Self::tri(n);
        for i in 0..n {
            dx[i] += diag[i] * du[i];
            for j in i + 1..n {
                grad[self.u_index(i, j)] += du[i] * x[j];
                dx[j] += self.u_at(i, j) * du[i];
            }
            let d = self.diag_raw()[i];
            let sig = sigmoid(d);
            grad[t2 + i] += du[i] * x[i] * self.signs[i] * sig + c * sig / (DIAG_FLOOR + softplus(d));
        }
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{logabsdet_lu, vecops};

    #[test]
    fn identity_layer() {
        let l = InvLinear::identity(3);
        let x = [1.0, -2.0, 0.5];
        assert!(vecops::max_abs_diff(&l.forward(&x).unwrap(), &x) < 1e-15);
        assert!(l.logdet().abs() < 1e-15);
    }

    #[test]
    fn diagonal_two_half() {
        let l = InvLinear::from_factors(&[0, 1], &Tensor::identity(2), &Tensor::from_diag(&[2.0, 0.5])).unwrap();
        assert!(l.logdet().abs() < 1e-14);
        let y = l.forward(&[1.0, 1.0]).unwrap();
        assert!(vecops::max_abs_diff(&y, &[2.0, 0.5]) < 1e-14);
    }

    #[test]
    fn random_roundtrip_and_logdet() {
        let mut rng = Rng::seed_from(31);
        let l = InvLinear::random(5, &mut rng);
        let x = rng.normal_vec(5);
        let back = l.inverse(&l.forward(&x).unwrap()).unwrap();
        assert!(vecops::max_abs_diff(&back, &x) < 1e-12);
        assert!((logabsdet_lu(&l.materialize()).unwrap() - l.logdet()).abs() < 1e-10);
    }

    #[test]
    fn explicit_factors_materialize() {
        let lo = Tensor::matrix(2, 2, vec![1.0, 0.0, 3.0, 1.0]).unwrap();
        let up = Tensor::matrix(2, 2, vec![2.0, 1.0, 0.0, -1.0]).unwrap();
        let l = InvLinear::from_factors(&[1, 0], &lo, &up).unwrap();
        // L U = [[2,1],[6,2]], then rows swapped
        let m = l.materialize();
        let want = Tensor::matrix(2, 2, vec![6.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(m.max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn softplus_inverse_roundtrip() {
        for y in [1e-6, 0.3, 1.0, 40.0] {
            assert!((softplus(softplus_inv(y)) - y).abs() <= 1e-12 * y.max(1.0));
        }
    }
}
