use super::GridImage;
use crate::codec::{Container, ContainerKind};
use crate::numcore::Rng;
use crate::{Error, Result};

/// `(noisy, clean)` single-channel images of axis-aligned filled rectangles
/// with uniform random intensities, plus Gaussian noise of deviation
/// `noise_sigma`. Later rectangles paint over earlier ones.
pub fn rectangles_dataset(n: usize, size: usize, max_rects: usize, noise_sigma: f64, seed: u64) -> Result<Vec<(GridImage, GridImage)>> {
    if size < 4 {
        return Err(Error::Precondition(format!("image size must be at least 4, got {size}")));
    }
    if max_rects == 0 || !(noise_sigma >= 0.0) {
        return Err(Error::Precondition("need max_rects ≥ 1 and noise_sigma ≥ 0".into()));
    }
    let mut rng = Rng::seed_from(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut clean = vec![0.0; size * size];
        let count = 1 + rng.below(max_rects);
        for _ in 0..count {
            let (a, b) = (rng.below(size), rng.below(size));
            let (c, d) = (rng.below(size), rng.below(size));
            let value = rng.uniform();
            for i in a.min(b)..=a.max(b) {
                for j in c.min(d)..=c.max(d) {
                    clean[i * size + j] = value;
                }
            }
        }
        let noisy = if noise_sigma > 0.0 {
            clean.iter().map(|v| v + noise_sigma * rng.normal()).collect()
        } else {
            clean.clone()
        };
        out.push((GridImage::new(size, size, 1, noisy)?, GridImage::new(size, size, 1, clean)?));
    }
    Ok(out)
}

pub fn images_to_container(images: &[GridImage]) -> Container {
    let mut c = Container::new(ContainerKind::Images);
    for im in images {
        c.push(1, vec![im.height() as u64, im.width() as u64, im.channels() as u64], im.data().to_vec());
    }
    c
}

pub fn images_from_container(c: &Container) -> Result<Vec<GridImage>> {
    if c.kind != ContainerKind::Images {
        return Err(Error::Format(format!("expected an image container, found {:?}", c.kind)));
    }
    c.records
        .iter()
        .map(|r| {
            if r.tag != 1 || r.ints.len() != 3 {
                return Err(Error::Format("malformed image record".into()));
            }
            GridImage::new(r.ints[0] as usize, r.ints[1] as usize, r.ints[2] as usize, r.reals.clone())
                .map_err(|e| Error::Format(e.to_string()))
        })
        .collect()
}
