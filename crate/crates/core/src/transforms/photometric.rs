use rand::Rng;

use crate::error::{Error, Result};
use crate::simulator::Observation;

fn map(img: &Observation, f: impl Fn(f32) -> f32) -> Observation {
    let mut out = img.clone();
    for p in out.pixels_mut() {
        *p = f(*p);
    }
    out
}

/// Add `delta` to every pixel and clamp to `[0, 1]`.
pub fn brightness(img: &Observation, delta: f32) -> Observation {
    if delta == 0.0 {
        return img.clone();
    }
    map(img, |p| (p + delta).clamp(0.0, 1.0))
}

/// Scale deviations from the image mean by `factor`. A factor of zero
/// collapses the image to its mean.
pub fn contrast(img: &Observation, factor: f32) -> Result<Observation> {
    if !(factor >= 0.0 && factor.is_finite()) {
        return Err(Error::param(format!("contrast factor must be >= 0, got {factor}")));
    }
    if factor == 1.0 {
        return Ok(img.clone());
    }
    let mean = img.mean() as f32;
    Ok(map(img, |p| (mean + factor * (p - mean)).clamp(0.0, 1.0)))
}

/// Replace each pixel with 0 or 1 (equal odds) with probability `density`.
pub fn salt_pepper<R: Rng + ?Sized>(
    img: &Observation,
    density: f64,
    rng: &mut R,
) -> Result<Observation> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::param(format!("density must lie in [0, 1], got {density}")));
    }
    let mut out = img.clone();
    if density == 0.0 {
        return Ok(out);
    }
    for p in out.pixels_mut() {
        if rng.random_bool(density) {
            *p = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        }
    }
    Ok(out)
}

/// Mirror an out-of-range index back into `0..n` without repeating the edge.
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    (if m < n as isize { m } else { period - m }) as usize
}

/// Normalized 1D Gaussian taps for radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable Gaussian blur with reflect padding.
pub fn gaussian_blur(img: &Observation, sigma: f64) -> Result<Observation> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("blur sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (w, h) = (img.width(), img.height());
    let src = img.pixels();
    let mut tmp = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                let xx = reflect(x as isize + t as isize - r, w);
                acc += kv * src[y * w + xx] as f64;
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                let yy = reflect(y as isize + t as isize - r, h);
                acc += kv * tmp[yy * w + x];
            }
            out[y * w + x] = (acc as f32).clamp(0.0, 1.0);
        }
    }
    Observation::new(w, h, out)
}
