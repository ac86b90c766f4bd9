//! Photometric and geometric image transforms and random convolution.

mod geometric;
mod photometric;
mod randconv;

pub use geometric::{rotate, scale, shift};
pub use photometric::{brightness, contrast, gaussian_blur, gaussian_kernel, salt_pepper};
pub use randconv::{convolve_reflect, rand_conv, rand_conv_with_kernel, sample_kernel};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::Observation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformParams {
    /// Brightness offset drawn from `[-d, d]`.
    pub brightness_delta: f64,
    pub contrast_factor: [f64; 2],
    pub salt_pepper_density: f64,
    pub blur_sigma: [f64; 2],
    /// Rotation drawn from `[-r, r]` degrees.
    pub rotation_deg: f64,
    /// Shift drawn from `[-s, s]` pixels on each axis.
    pub shift_px: f64,
    pub scale_factor: [f64; 2],
    pub randconv_kernels: Vec<usize>,
}

impl Default for TransformParams {
    fn default() -> Self {
        Self {
            brightness_delta: 0.2,
            contrast_factor: [0.7, 1.3],
            salt_pepper_density: 0.02,
            blur_sigma: [0.5, 1.5],
            rotation_deg: 5.0,
            shift_px: 3.0,
            scale_factor: [0.9, 1.1],
            randconv_kernels: vec![1, 3, 5, 7],
        }
    }
}

impl TransformParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("brightness_delta", self.brightness_delta),
            ("rotation_deg", self.rotation_deg),
            ("shift_px", self.shift_px),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be a non-negative range, got {v}")));
            }
        }
        let ranges = [
            ("contrast_factor", self.contrast_factor),
            ("blur_sigma", self.blur_sigma),
            ("scale_factor", self.scale_factor),
        ];
        for (name, [lo, hi]) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::param(format!("{name} range [{lo}, {hi}] is not ordered")));
            }
        }
        if self.contrast_factor[0] < 0.0 || self.blur_sigma[0] < 0.0 || self.scale_factor[0] <= 0.0
        {
            return Err(Error::param("contrast, blur and scale ranges must be positive"));
        }
        if !(0.0..=1.0).contains(&self.salt_pepper_density) {
            return Err(Error::param("salt_pepper_density must lie in [0, 1]"));
        }
        if self.randconv_kernels.is_empty() || self.randconv_kernels.iter().any(|k| k % 2 == 0) {
            return Err(Error::param("randconv_kernels must be a non-empty set of odd sizes"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Photometric {
    Brightness,
    Contrast,
    SaltPepper,
    GaussianBlur,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometric {
    Rotate,
    Shift,
    Scale,
}

pub const ALL_PHOTOMETRIC: [Photometric; 4] = [
    Photometric::Brightness,
    Photometric::Contrast,
    Photometric::SaltPepper,
    Photometric::GaussianBlur,
];
pub const ALL_GEOMETRIC: [Geometric; 3] = [Geometric::Rotate, Geometric::Shift, Geometric::Scale];

/// The transforms available for similar-state generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSuite {
    pub photometric: Vec<Photometric>,
    pub geometric: Vec<Geometric>,
    pub params: TransformParams,
}

impl TransformSuite {
    pub fn full(params: TransformParams) -> Self {
        Self {
            photometric: ALL_PHOTOMETRIC.to_vec(),
            geometric: ALL_GEOMETRIC.to_vec(),
            params,
        }
    }

    pub fn photometric_only(params: TransformParams) -> Self {
        Self {
            geometric: Vec::new(),
            ..Self::full(params)
        }
    }

    pub fn geometric_only(params: TransformParams) -> Self {
        Self {
            photometric: Vec::new(),
            ..Self::full(params)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.photometric.is_empty() && self.geometric.is_empty()
    }
}

/// Which transform produced a similar state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Applied {
    Photometric(Photometric),
    Geometric(Geometric),
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

pub fn apply_photometric<R: Rng + ?Sized>(
    img: &Observation,
    kind: Photometric,
    p: &TransformParams,
    rng: &mut R,
) -> Result<Observation> {
    match kind {
        Photometric::Brightness => {
            let d = uniform(rng, -p.brightness_delta, p.brightness_delta);
            Ok(brightness(img, d as f32))
        }
        Photometric::Contrast => {
            let f = uniform(rng, p.contrast_factor[0], p.contrast_factor[1]);
            contrast(img, f as f32)
        }
        Photometric::SaltPepper => salt_pepper(img, p.salt_pepper_density, rng),
        Photometric::GaussianBlur => {
            let s = uniform(rng, p.blur_sigma[0], p.blur_sigma[1]);
            gaussian_blur(img, s)
        }
    }
}

pub fn apply_geometric<R: Rng + ?Sized>(
    img: &Observation,
    kind: Geometric,
    p: &TransformParams,
    rng: &mut R,
) -> Observation {
    match kind {
        Geometric::Rotate => rotate(img, uniform(rng, -p.rotation_deg, p.rotation_deg)),
        Geometric::Shift => {
            let dx = uniform(rng, -p.shift_px, p.shift_px);
            let dy = uniform(rng, -p.shift_px, p.shift_px);
            shift(img, dx, dy)
        }
        Geometric::Scale => scale(img, uniform(rng, p.scale_factor[0], p.scale_factor[1])),
    }
}

/// Apply exactly one transform: photometric with probability
/// `photometric_prob`, otherwise geometric. A suite with only one class
/// always uses that class.
pub fn transform_similar_state<R: Rng + ?Sized>(
    img: &Observation,
    suite: &TransformSuite,
    photometric_prob: f64,
    rng: &mut R,
) -> Result<(Observation, Applied)> {
    if suite.is_empty() {
        return Err(Error::param("transform suite is empty"));
    }
    if !(0.0..=1.0).contains(&photometric_prob) {
        return Err(Error::param(format!(
            "photometric_prob must lie in [0, 1], got {photometric_prob}"
        )));
    }
    let coin = rng.random_bool(photometric_prob);
    let use_photometric = if suite.geometric.is_empty() {
        true
    } else if suite.photometric.is_empty() {
        false
    } else {
        coin
    };
    if use_photometric {
        let kind = suite.photometric[rng.random_range(0..suite.photometric.len())];
        Ok((
            apply_photometric(img, kind, &suite.params, rng)?,
            Applied::Photometric(kind),
        ))
    } else {
        let kind = suite.geometric[rng.random_range(0..suite.geometric.len())];
        Ok((
            apply_geometric(img, kind, &suite.params, rng),
            Applied::Geometric(kind),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn edge_image() -> Observation {
        let (w, h) = (16, 12);
        let px = (0..w * h)
            .map(|i| if i % w >= 7 { 0.8 } else { 0.2 })
            .collect();
        Observation::new(w, h, px).unwrap()
    }

    #[test]
    fn defaults_validate() {
        TransformParams::default().validate().unwrap();
        let mut p = TransformParams::default();
        p.contrast_factor = [1.3, 0.7];
        assert!(p.validate().is_err());
        let mut p = TransformParams::default();
        p.randconv_kernels = vec![4];
        assert!(p.validate().is_err());
    }

    #[test]
    fn photometric_branch_keeps_geometry() {
        let img = edge_image();
        let suite = TransformSuite::full(TransformParams {
            salt_pepper_density: 0.0,
            ..TransformParams::default()
        });
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (out, applied) = transform_similar_state(&img, &suite, 1.0, &mut rng).unwrap();
            assert!(matches!(applied, Applied::Photometric(_)));
            // Every row has its largest jump at the same column.
            for r in 0..img.height() {
                let jump = |im: &Observation, c: usize| (im.get(r, c) - im.get(r, c - 1)).abs();
                let best = (1..img.width()).max_by(|&a, &b| jump(&out, a).total_cmp(&jump(&out, b)));
                assert_eq!(best, Some(7));
            }
        }
    }

    #[test]
    fn zero_geometric_ranges_are_identity() {
        let img = edge_image();
        let suite = TransformSuite::full(TransformParams {
            rotation_deg: 0.0,
            shift_px: 0.0,
            scale_factor: [1.0, 1.0],
            ..TransformParams::default()
        });
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let (out, applied) = transform_similar_state(&img, &suite, 0.0, &mut rng).unwrap();
            assert!(matches!(applied, Applied::Geometric(_)));
            assert_eq!(out, img);
        }
    }

    #[test]
    fn branch_frequency() {
        let img = Observation::filled(8, 8, 0.5);
        let suite = TransformSuite::full(TransformParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let photometric = (0..n)
            .filter(|_| {
                let (_, a) = transform_similar_state(&img, &suite, 0.5, &mut rng).unwrap();
                matches!(a, Applied::Photometric(_))
            })
            .count();
        let f = photometric as f64 / n as f64;
        assert!((0.48..=0.52).contains(&f), "{f}");
    }

    #[test]
    fn empty_suite_rejected() {
        let suite = TransformSuite {
            photometric: vec![],
            geometric: vec![],
            params: TransformParams::default(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            transform_similar_state(&edge_image(), &suite, 0.5, &mut rng),
            Err(Error::Parameter(_))
        ));
    }
}
