use std::fmt;

use crate::numcore::Rng;
use crate::{Error, Result};

/// Dense row-major array of `f64` with shape metadata.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

impl Tensor {
    /// Builds a tensor, checking that extents are positive, that the data
    /// length matches and that every entry is finite.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::shape(format!("extents must be positive, got {shape:?}")));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {numel} entries, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("tensor entry {i} is {}", data[i])));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![0.0; numel] }
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        Self::new(vec![data.len()], data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut t = Self::zeros(&[n, n]);
        for (i, d) in diag.iter().enumerate() {
            t.data[i * n + i] = *d;
        }
        t
    }

    /// Entries drawn i.i.d. from `N(0, scale²)`.
    pub fn random_normal(shape: &[usize], scale: f64, rng: &mut Rng) -> Self {
        let numel = shape.iter().product();
        let data = (0..numel).map(|_| scale * rng.normal()).collect();
        Self { shape: shape.to_vec(), data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    /// `(rows, cols)` of a 2-D tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::shape(format!("expected a matrix, got shape {:?}", self.shape))),
        }
    }

    pub fn is_square(&self) -> bool {
        matches!(self.shape[..], [r, c] if r == c)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.shape[1] + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let cols = self.shape[1];
        self.data[i * cols + j] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (r, c) = self.dims2()?;
        if x.len() != c {
            return Err(Error::shape(format!("matvec: {r}x{c} matrix with vector of length {}", x.len())));
        }
        Ok(matvec(&self.data, r, c, x))
    }

    /// `Aᵀ x`.
    pub fn matvec_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (r, c) = self.dims2()?;
        if x.len() != r {
            return Err(Error::shape(format!("matvec_t: {r}x{c} matrix with vector of length {}", x.len())));
        }
        Ok(matvec_t(&self.data, r, c, x))
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (r, k) = self.dims2()?;
        let (k2, c) = other.dims2()?;
        if k != k2 {
            return Err(Error::shape(format!("matmul: {r}x{k} times {k2}x{c}")));
        }
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for l in 0..k {
                let a = self.data[i * k + l];
                if a == 0.0 {
                    continue;
                }
                let row = &other.data[l * c..(l + 1) * c];
                for (o, b) in out[i * c..(i + 1) * c].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Ok(Tensor { shape: vec![r, c], data: out })
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let (r, c) = self.dims2()?;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Ok(Tensor { shape: vec![c, r], data: out })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        super::vecops::max_abs_diff(&self.data, &other.data)
    }
}

/// Row-major `A x` for an `r×c` slice.
pub(crate) fn matvec(a: &[f64], r: usize, c: usize, x: &[f64]) -> Vec<f64> {
    (0..r)
        .map(|i| a[i * c..(i + 1) * c].iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

/// Row-major `Aᵀ x` for an `r×c` slice.
pub(crate) fn matvec_t(a: &[f64], r: usize, c: usize, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; c];
    for i in 0..r {
        let xi = x[i];
        if xi == 0.0 {
            continue;
        }
        for (o, p) in out.iter_mut().zip(&a[i * c..(i + 1) * c]) {
            *o += p * xi;
        }
    }
    out
}

/// `G += u vᵀ` for a row-major `len(u)×len(v)` slice.
pub(crate) fn add_outer(g: &mut [f64], u: &[f64], v: &[f64]) {
    let c = v.len();
    for (i, ui) in u.iter().enumerate() {
        if *ui == 0.0 {
            continue;
        }
        for (gij, vj) in g[i * c..(i + 1) * c].iter_mut().zip(v) {
            *gij += ui * vj;
        }
    }
}
