use super::grid::rot_index;
use super::{GridImage, P4Feature};
use crate::numcore::Rng;
use crate::{Error, Result};

/// Convolution kernel with odd spatial extent `size`.
///
/// Lifting kernels (`group == false`) store weights `[out][in][a][b]`; group
/// kernels store `[out][in][s][a][b]` with `s` the input rotation relative
/// to the output rotation. Rotated copies are generated on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct P4Kernel {
    size: usize,
    cin: usize,
    cout: usize,
    group: bool,
    weights: Vec<f64>,
}

impl P4Kernel {
    fn expected_len(size: usize, cin: usize, cout: usize, group: bool) -> usize {
        cout * cin * if group { 4 } else { 1 } * size * size
    }

    pub fn new(size: usize, cin: usize, cout: usize, group: bool, weights: Vec<f64>) -> Result<Self> {
        if size % 2 == 0 || cin == 0 || cout == 0 {
            return Err(Error::shape(format!("kernel needs odd extent and positive channels, got {size}, {cin}, {cout}")));
        }
        let n = Self::expected_len(size, cin, cout, group);
        if weights.len() != n {
            return Err(Error::shape(format!("kernel needs {n} weights, got {}", weights.len())));
        }
        Ok(Self { size, cin, cout, group, weights })
    }

    pub fn zeros(size: usize, cin: usize, cout: usize, group: bool) -> Result<Self> {
        Self::new(size, cin, cout, group, vec![0.0; Self::expected_len(size, cin, cout, group)])
    }

    pub fn random(size: usize, cin: usize, cout: usize, group: bool, rng: &mut Rng) -> Result<Self> {
        let n = Self::expected_len(size, cin, cout, group);
        let fan_in = (n / cout) as f64;
        let w = (0..n).map(|_| rng.normal() / fan_in.sqrt()).collect();
        Self::new(size, cin, cout, group, w)
    }

    /// Group kernel with a unit delta at the identity element and the
    /// spatial center, mapping channel `c` to channel `c`.
    pub fn group_identity(size: usize, channels: usize) -> Result<Self> {
        let mut k = Self::zeros(size, channels, channels, true)?;
        let center = size / 2;
        for c in 0..channels {
            let idx = (((c * channels + c) * 4) * size + center) * size + center;
            k.weights[idx] = 1.0;
        }
        Ok(k)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn in_channels(&self) -> usize {
        self.cin
    }

    pub fn out_channels(&self) -> usize {
        self.cout
    }

    pub fn is_group(&self) -> bool {
        self.group
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// For every weight of the expanded `[(r,out)][plane][a][b]` filter bank,
    /// the index of the stored weight it copies.
    pub(crate) fn expansion(&self) -> Vec<usize> {
        expansion(self.size, self.cin, self.cout, self.group)
    }
}

pub(crate) fn expansion(k: usize, cin: usize, cout: usize, group: bool) -> Vec<usize> {
    let kk = k * k;
    let planes = if group { 4 * cin } else { cin };
    let mut map = Vec::with_capacity(4 * cout * planes * kk);
    for r in 0..4 {
        let back = (4 - r) % 4;
        for co in 0..cout {
            for plane in 0..planes {
                let (s, ci) = (plane / cin, plane % cin);
                for a in 0..k {
                    for b in 0..k {
                        let (sa, sb) = rot_index(k, a, b, back);
                        let base = if group {
                            ((co * cin + ci) * 4 + (s + 4 - r) % 4) * kk
                        } else {
                            (co * cin + ci) * kk
                        };
                        map.push(base + sa * k + sb);
                    }
                }
            }
        }
    }
    map
}

pub(crate) fn expand(weights: &[f64], map: &[usize]) -> Vec<f64> {
    map.iter().map(|&i| weights[i]).collect()
}

/// Periodic multichannel correlation of a `[i][j][cin]` array with filters
/// `[out][cin][a][b]`; output is `[i][j][out]`.
pub(crate) fn correlate(x: &[f64], h: usize, w: usize, cin: usize, wts: &[f64], cout: usize, k: usize) -> Vec<f64> {
    let c = k / 2;
    let kk = k * k;
    let mut out = vec![0.0; h * w * cout];
    for i in 0..h {
        for j in 0..w {
            let o = &mut out[(i * w + j) * cout..(i * w + j + 1) * cout];
            for a in 0..k {
                let ii = (i + h + a - c) % h;
                for b in 0..k {
                    let jj = (j + w + b - c) % w;
                    let xin = &x[(ii * w + jj) * cin..(ii * w + jj + 1) * cin];
                    for (co, ov) in o.iter_mut().enumerate() {
                        let base = co * cin * kk + a * k + b;
                        let mut acc = 0.0;
                        for (ci, xv) in xin.iter().enumerate() {
                            acc += wts[base + ci * kk] * xv;
                        }
                        *ov += acc;
                    }
                }
            }
        }
    }
    out
}

/// Adjoint of [`correlate`]: accumulates into `dx` and `dw`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn correlate_backward(
    x: &[f64],
    h: usize,
    w: usize,
    cin: usize,
    wts: &[f64],
    cout: usize,
    k: usize,
    dout: &[f64],
    dx: &mut [f64],
    dw: &mut [f64],
) {
    let c = k / 2;
    let kk = k * k;
    for i in 0..h {
        for j in 0..w {
            let g = &dout[(i * w + j) * cout..(i * w + j + 1) * cout];
            for a in 0..k {
                let ii = (i + h + a - c) % h;
                for b in 0..k {
                    let jj = (j + w + b - c) % w;
                    let off = (ii * w + jj) * cin;
                    for (co, gv) in g.iter().enumerate() {
                        if *gv == 0.0 {
                            continue;
                        }
                        let base = co * cin * kk + a * k + b;
                        for ci in 0..cin {
                            dw[base + ci * kk] += gv * x[off + ci];
                            dx[off + ci] += gv * wts[base + ci * kk];
                        }
                    }
                }
            }
        }
    }
}

/// Lifting correlation: rotation `r` of the output correlates `x` with the
/// kernel rotated by `r` quarter turns.
pub fn lift_conv(x: &GridImage, k: &P4Kernel) -> Result<P4Feature> {
    if k.group {
        return Err(Error::shape("lifting needs a kernel without rotation axis"));
    }
    if x.channels() != k.cin {
        return Err(Error::shape(format!("kernel expects {} channels, image has {}", k.cin, x.channels())));
    }
    let wts = expand(&k.weights, &k.expansion());
    let out = correlate(x.data(), x.height(), x.width(), k.cin, &wts, 4 * k.cout, k.size);
    P4Feature::new(x.height(), x.width(), k.cout, out)
}

/// Group correlation over translations and the four rotations.
pub fn gconv(x: &P4Feature, k: &P4Kernel) -> Result<P4Feature> {
    if !k.group {
        return Err(Error::shape("group convolution needs a kernel with rotation axis"));
    }
    if x.channels() != k.cin {
        return Err(Error::shape(format!("kernel expects {} channels, feature has {}", k.cin, x.channels())));
    }
    let wts = expand(&k.weights, &k.expansion());
    let out = correlate(x.data(), x.height(), x.width(), 4 * k.cin, &wts, 4 * k.cout, k.size);
    P4Feature::new(x.height(), x.width(), k.cout, out)
}

/// Mean over the rotation axis.
pub fn group_project(x: &P4Feature) -> GridImage {
    let c = x.channels();
    let data = x
        .data()
        .chunks(4 * c)
        .flat_map(|px| (0..c).map(move |ch| 0.25 * (px[ch] + px[c + ch] + px[2 * c + ch] + px[3 * c + ch])))
        .collect();
    GridImage::new(x.height(), x.width(), c, data).expect("shape carried over")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equivariant::{rot90_image, rot90_p4};
    use crate::numcore::vecops;

    #[test]
    fn one_by_one_lift_of_delta() {
        let mut x = GridImage::zeros(3, 3, 1);
        x.data_mut()[4] = 1.0;
        let k = P4Kernel::new(1, 1, 2, false, vec![2.0, -1.0]).unwrap();
        let y = lift_conv(&x, &k).unwrap();
        for r in 0..4 {
            assert_eq!(y.at(1, 1, r, 0), 2.0);
            assert_eq!(y.at(1, 1, r, 1), -1.0);
            assert_eq!(y.at(0, 1, r, 0), 0.0);
        }
    }

    #[test]
    fn zero_kernels_give_zero() {
        let mut rng = Rng::seed_from(4);
        let x = GridImage::random(4, 4, 2, &mut rng);
        let y = lift_conv(&x, &P4Kernel::zeros(3, 2, 3, false).unwrap()).unwrap();
        assert!(y.data().iter().all(|v| *v == 0.0));
        let z = gconv(&y, &P4Kernel::zeros(3, 3, 1, true).unwrap()).unwrap();
        assert!(z.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identity_group_kernel() {
        let mut rng = Rng::seed_from(5);
        let x = P4Feature::random(5, 5, 2, &mut rng);
        assert_eq!(gconv(&x, &P4Kernel::group_identity(3, 2).unwrap()).unwrap(), x);
    }

    #[test]
    fn lift_and_gconv_are_equivariant() {
        let mut rng = Rng::seed_from(6);
        let x = GridImage::random(8, 8, 2, &mut rng);
        let kl = P4Kernel::random(3, 2, 3, false, &mut rng).unwrap();
        let kg = P4Kernel::random(3, 3, 2, true, &mut rng).unwrap();
        for r in 0..4 {
            let a = lift_conv(&rot90_image(&x, r).unwrap(), &kl).unwrap();
            let b = rot90_p4(&lift_conv(&x, &kl).unwrap(), r).unwrap();
            assert!(a.max_abs_diff(&b) <= 1e-12);
            let f = lift_conv(&x, &kl).unwrap();
            let c = gconv(&rot90_p4(&f, r).unwrap(), &kg).unwrap();
            let d = rot90_p4(&gconv(&f, &kg).unwrap(), r).unwrap();
            assert!(c.max_abs_diff(&d) <= 1e-12);
        }
    }

    #[test]
    fn projection_is_equivariant_and_averages() {
        let mut rng = Rng::seed_from(7);
        let x = P4Feature::random(6, 6, 2, &mut rng);
        let a = group_project(&rot90_p4(&x, 1).unwrap());
        let b = rot90_image(&group_project(&x), 1).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-12);
        let g = GridImage::random(3, 3, 1, &mut rng);
        let constant = lift_conv(&g, &P4Kernel::new(1, 1, 1, false, vec![1.0]).unwrap()).unwrap();
        assert!(group_project(&constant).max_abs_diff(&g) < 1e-15);
    }

    #[test]
    fn correlate_adjoint_identity() {
        let mut rng = Rng::seed_from(8);
        let (h, w, cin, cout, k) = (4, 5, 2, 3, 3);
        let x = rng.normal_vec(h * w * cin);
        let wts = rng.normal_vec(cout * cin * k * k);
        let g = rng.normal_vec(h * w * cout);
        let y = correlate(&x, h, w, cin, &wts, cout, k);
        let mut dx = vec![0.0; x.len()];
        let mut dw = vec![0.0; wts.len()];
        correlate_backward(&x, h, w, cin, &wts, cout, k, &g, &mut dx, &mut dw);
        // linear in x and in wts: ⟨g, y⟩ = ⟨dx, x⟩ = ⟨dw, wts⟩
        let lhs = vecops::dot(&g, &y);
        assert!((lhs - vecops::dot(&dx, &x)).abs() < 1e-11);
        assert!((lhs - vecops::dot(&dw, &wts)).abs() < 1e-11);
    }
}
