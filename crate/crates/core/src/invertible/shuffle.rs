use crate::{Error, Result};

fn check(len: usize, h: usize, w: usize, c: usize, s: usize) -> Result<()> {
    if s == 0 || h % s != 0 || w % s != 0 {
        return Err(Error::shape(format!("stride {s} does not divide {h}x{w}")));
    }
    if len != h * w * c {
        return Err(Error::shape(format!("image of {h}x{w}x{c} needs {} values, got {len}", h * w * c)));
    }
    Ok(())
}

/// Output index of input pixel `(i, j, ch)`.
///
/// Output channel is `(di·s + dj)·c + ch` where `(di, dj)` is the offset
/// inside the `s×s` block.
fn target(i: usize, j: usize, ch: usize, w: usize, c: usize, s: usize) -> usize {
    let (bi, di) = (i / s, i % s);
    let (bj, dj) = (j / s, j % s);
    let cs = c * s * s;
    (bi * (w / s) + bj) * cs + (di * s + dj) * c + ch
}

/// Reorders an `h×w×c` image (row-major, channels last) into
/// `(h/s)×(w/s)×(c·s²)`.
pub fn pixel_shuffle(x: &[f64], h: usize, w: usize, c: usize, s: usize) -> Result<Vec<f64>> {
    check(x.len(), h, w, c, s)?;
    let mut out = vec![0.0; x.len()];
    for i in 0..h {
        for j in 0..w {
            for ch in 0..c {
                out[target(i, j, ch, w, c, s)] = x[(i * w + j) * c + ch];
            }
        }
    }
    Ok(out)
}

/// Inverse of [`pixel_shuffle`]; `h, w, c` describe the unshuffled image.
pub fn pixel_unshuffle(y: &[f64], h: usize, w: usize, c: usize, s: usize) -> Result<Vec<f64>> {
    check(y.len(), h, w, c, s)?;
    let mut out = vec![0.0; y.len()];
    for i in 0..h {
        for j in 0..w {
            for ch in 0..c {
                out[(i * w + j) * c + ch] = y[target(i, j, ch, w, c, s)];
            }
        }
    }
    Ok(out)
}

/// Pixel shuffle as a flow layer on flattened images.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PixelShuffle {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub stride: usize,
}

impl PixelShuffle {
    pub fn new(height: usize, width: usize, channels: usize, stride: usize) -> Result<Self> {
        check(height * width * channels, height, width, channels, stride)?;
        Ok(Self { height, width, channels, stride })
    }

    pub fn dim(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        pixel_shuffle(x, self.height, self.width, self.channels, self.stride)
    }

    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        pixel_unshuffle(y, self.height, self.width, self.channels, self.stride)
    }

    /// A permutation's transpose is its inverse.
    pub fn vjp(&self, dy: &[f64]) -> Result<Vec<f64>> {
        self.inverse(dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Rng;

    #[test]
    fn two_by_two_block() {
        assert_eq!(pixel_shuffle(&[1.0, 2.0, 3.0, 4.0], 2, 2, 1, 2).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn stride_one_is_identity() {
        let x: Vec<f64> = (0..12).map(f64::from).collect();
        assert_eq!(pixel_shuffle(&x, 2, 3, 2, 1).unwrap(), x);
    }

    #[test]
    fn channels_are_grouped_by_offset() {
        // 2x2x2 image: pixel (i,j) has channels (10·(2i+j), 10·(2i+j)+1)
        let x = [0.0, 1.0, 10.0, 11.0, 20.0, 21.0, 30.0, 31.0];
        assert_eq!(pixel_shuffle(&x, 2, 2, 2, 2).unwrap(), x.to_vec());
        // 4x2x1: two output pixels stacked vertically
        let y = pixel_shuffle(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], 4, 2, 1, 2).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let z = pixel_shuffle(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], 2, 4, 1, 2).unwrap();
        assert_eq!(z, vec![1.0, 2.0, 5.0, 6.0, 3.0, 4.0, 7.0, 8.0]);
    }

    #[test]
    fn random_roundtrip_is_bitwise() {
        let mut rng = Rng::seed_from(1);
        let x = rng.normal_vec(48);
        let y = pixel_shuffle(&x, 4, 4, 3, 2).unwrap();
        assert_eq!(pixel_unshuffle(&y, 4, 4, 3, 2).unwrap(), x);
    }

    #[test]
    fn indivisible_dims_rejected() {
        assert!(matches!(pixel_shuffle(&[0.0; 9], 3, 3, 1, 2), Err(Error::Shape(_))));
    }
}
