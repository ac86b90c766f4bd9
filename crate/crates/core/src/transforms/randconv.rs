use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::photometric::reflect;
use crate::error::{Error, Result};
use crate::simulator::Observation;

/// Convolve with a `k x k` kernel (row-major) using reflect padding.
pub fn convolve_reflect(img: &Observation, kernel: &[f32], k: usize) -> Result<Vec<f64>> {
    if k % 2 == 0 || kernel.len() != k * k {
        return Err(Error::param(format!("kernel must be odd-sized k*k, got k={k}")));
    }
    let (w, h) = (img.width(), img.height());
    let r = (k / 2) as isize;
    let mut out = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ky in 0..k {
                let yy = reflect(y as isize + ky as isize - r, h);
                for kx in 0..k {
                    let xx = reflect(x as isize + kx as isize - r, w);
                    acc += kernel[ky * k + kx] as f64 * img.get(yy, xx) as f64;
                }
            }
            out[y * w + x] = acc;
        }
    }
    Ok(out)
}

/// Linearly map values onto `[0, 1]`; constant inputs are only clamped.
fn rescale(values: Vec<f64>, w: usize, h: usize) -> Observation {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let pixels = values
        .into_iter()
        .map(|v| {
            if span > 0.0 {
                (((v - lo) / span) as f32).clamp(0.0, 1.0)
            } else {
                (v as f32).clamp(0.0, 1.0)
            }
        })
        .collect();
    Observation::new(w, h, pixels).expect("same size as input")
}

/// Random convolution with a fixed kernel, followed by rescaling to `[0, 1]`.
pub fn rand_conv_with_kernel(img: &Observation, kernel: &[f32], k: usize) -> Result<Observation> {
    let out = convolve_reflect(img, kernel, k)?;
    Ok(rescale(out, img.width(), img.height()))
}

/// Draw a kernel size from `kernel_sizes` and weights from `N(0, 1/k^2)`.
pub fn sample_kernel<R: Rng + ?Sized>(
    rng: &mut R,
    kernel_sizes: &[usize],
) -> Result<(usize, Vec<f32>)> {
    if kernel_sizes.is_empty() {
        return Err(Error::param("randconv kernel size set is empty"));
    }
    if let Some(k) = kernel_sizes.iter().find(|&&k| k % 2 == 0) {
        return Err(Error::param(format!("randconv kernel sizes must be odd, got {k}")));
    }
    let k = kernel_sizes[rng.random_range(0..kernel_sizes.len())];
    let normal = Normal::new(0.0f64, 1.0 / k as f64).map_err(|e| Error::param(e.to_string()))?;
    let weights = (0..k * k).map(|_| normal.sample(rng) as f32).collect();
    Ok((k, weights))
}

/// Convolve with freshly sampled random weights.
pub fn rand_conv<R: Rng + ?Sized>(
    img: &Observation,
    rng: &mut R,
    kernel_sizes: &[usize],
) -> Result<Observation> {
    let (k, kernel) = sample_kernel(rng, kernel_sizes)?;
    rand_conv_with_kernel(img, &kernel, k)
}
