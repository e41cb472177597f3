use crate::numcore::Rng;
use crate::{Error, Result};

/// Multichannel image on a periodic grid, stored `[i][j][channel]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridImage {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl GridImage {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::shape("image extents must be positive"));
        }
        if data.len() != height * width * channels {
            return Err(Error::shape(format!(
                "{height}x{width}x{channels} image needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self { height, width, channels, data: vec![0.0; height * width * channels] }
    }

    pub fn random(height: usize, width: usize, channels: usize, rng: &mut Rng) -> Self {
        Self { height, width, channels, data: rng.normal_vec(height * width * channels) }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
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

    pub fn at(&self, i: usize, j: usize, ch: usize) -> f64 {
        self.data[(i * self.width + j) * self.channels + ch]
    }

    pub fn same_shape(&self, other: &GridImage) -> bool {
        (self.height, self.width, self.channels) == (other.height, other.width, other.channels)
    }

    pub fn max_abs_diff(&self, other: &GridImage) -> f64 {
        crate::numcore::vecops::max_abs_diff(&self.data, &other.data)
    }
}

/// Feature map on p4, stored `[i][j][rotation][channel]`.
#[derive(Clone, Debug, PartialEq)]
pub struct P4Feature {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl P4Feature {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::shape("feature extents must be positive"));
        }
        if data.len() != height * width * 4 * channels {
            return Err(Error::shape(format!(
                "{height}x{width}x4x{channels} feature needs {} values, got {}",
                height * width * 4 * channels,
                data.len()
            )));
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self { height, width, channels, data: vec![0.0; height * width * 4 * channels] }
    }

    pub fn random(height: usize, width: usize, channels: usize, rng: &mut Rng) -> Self {
        Self { height, width, channels, data: rng.normal_vec(height * width * 4 * channels) }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
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

    pub fn at(&self, i: usize, j: usize, r: usize, ch: usize) -> f64 {
        self.data[((i * self.width + j) * 4 + r) * self.channels + ch]
    }

    pub fn max_abs_diff(&self, other: &P4Feature) -> f64 {
        crate::numcore::vecops::max_abs_diff(&self.data, &other.data)
    }
}

/// Counterclockwise quarter turn of an `n×n` index: `(i, j) ↦ (n−1−j, i)`.
pub(crate) fn rot_index(n: usize, i: usize, j: usize, r: usize) -> (usize, usize) {
    let (mut a, mut b) = (i, j);
    for _ in 0..r % 4 {
        (a, b) = (n - 1 - b, a);
    }
    (a, b)
}

/// Rotates pixel planes of a `[i][j][c]` block by `r` quarter turns.
fn rotate_planes(data: &[f64], n: usize, c: usize, r: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = rot_index(n, i, j, r);
            out[(a * n + b) * c..(a * n + b + 1) * c].copy_from_slice(&data[(i * n + j) * c..(i * n + j + 1) * c]);
        }
    }
    out
}

pub fn rot90_image(x: &GridImage, r: usize) -> Result<GridImage> {
    if x.height != x.width {
        return Err(Error::shape(format!("rotation needs a square grid, got {}x{}", x.height, x.width)));
    }
    Ok(GridImage { data: rotate_planes(&x.data, x.height, x.channels, r), ..x.clone() })
}

/// Action of rotation `r` on a group feature: `out[(s+r) mod 4] = rot^r(x[s])`.
pub fn rot90_p4(x: &P4Feature, r: usize) -> Result<P4Feature> {
    if x.height != x.width {
        return Err(Error::shape(format!("rotation needs a square grid, got {}x{}", x.height, x.width)));
    }
    let c = x.channels;
    let spatial = rotate_planes(&x.data, x.height, 4 * c, r);
    let mut data = vec![0.0; spatial.len()];
    for (pix, chunk) in spatial.chunks(4 * c).enumerate() {
        for s in 0..4 {
            let t = (s + r) % 4;
            data[pix * 4 * c + t * c..pix * 4 * c + (t + 1) * c].copy_from_slice(&chunk[s * c..(s + 1) * c]);
        }
    }
    Ok(P4Feature { data, ..x.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_turn_of_two_by_two() {
        let x = GridImage::new(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(rot90_image(&x, 0).unwrap(), x);
        assert_eq!(rot90_image(&x, 1).unwrap().data(), &[2.0, 4.0, 1.0, 3.0]);
    }

    #[test]
    fn four_quarter_turns_are_identity() {
        let mut rng = Rng::seed_from(1);
        let x = GridImage::random(5, 5, 2, &mut rng);
        let mut y = x.clone();
        for _ in 0..4 {
            y = rot90_image(&y, 1).unwrap();
        }
        assert_eq!(y, x);
        assert_eq!(rot90_image(&rot90_image(&x, 1).unwrap(), 3).unwrap(), x);
    }

    #[test]
    fn p4_group_law() {
        let mut rng = Rng::seed_from(2);
        let x = P4Feature::random(4, 4, 3, &mut rng);
        assert_eq!(rot90_p4(&rot90_p4(&x, 2).unwrap(), 2).unwrap(), x);
        assert_eq!(rot90_p4(&rot90_p4(&x, 1).unwrap(), 2).unwrap(), rot90_p4(&x, 3).unwrap());
    }

    #[test]
    fn non_square_rejected() {
        assert!(matches!(rot90_image(&GridImage::zeros(2, 3, 1), 1), Err(Error::Shape(_))));
    }
}
