use crate::simulator::Observation;

/// Bilinear sample at fractional `(x, y)` with nearest-border clamping.
fn sample(img: &Observation, x: f64, y: f64) -> f32 {
    let (w, h) = (img.width(), img.height());
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    if fx == 0.0 && fy == 0.0 {
        return img.get(y0, x0);
    }
    let p = |r, c| img.get(r, c) as f64;
    let top = p(y0, x0) * (1.0 - fx) + p(y0, x1) * fx;
    let bottom = p(y1, x0) * (1.0 - fx) + p(y1, x1) * fx;
    ((top * (1.0 - fy) + bottom * fy) as f32).clamp(0.0, 1.0)
}

/// Build the output by mapping each output pixel's offset from the image
/// center to a source position.
fn inverse_map(img: &Observation, f: impl Fn(f64, f64) -> (f64, f64)) -> Observation {
    let (w, h) = (img.width(), img.height());
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let mut out = img.clone();
    for r in 0..h {
        for c in 0..w {
            let (sx, sy) = f(c as f64 - cx, r as f64 - cy);
            out.set(r, c, sample(img, sx + cx, sy + cy));
        }
    }
    out
}

/// Exact sine/cosine for multiples of 90 degrees.
fn sin_cos_deg(angle_deg: f64) -> (f64, f64) {
    let quarter = angle_deg / 90.0;
    if quarter == quarter.round() {
        match (quarter as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        angle_deg.to_radians().sin_cos()
    }
}

/// Rotate counter-clockwise (as displayed, rows top-down) about the center.
pub fn rotate(img: &Observation, angle_deg: f64) -> Observation {
    if angle_deg == 0.0 {
        return img.clone();
    }
    let (s, c) = sin_cos_deg(angle_deg);
    inverse_map(img, |x, y| (c * x - s * y, s * x + c * y))
}

/// Translate by `dx` columns right and `dy` rows down.
pub fn shift(img: &Observation, dx: f64, dy: f64) -> Observation {
    if dx == 0.0 && dy == 0.0 {
        return img.clone();
    }
    inverse_map(img, |x, y| (x - dx, y - dy))
}

/// Zoom about the center; `factor > 1` enlarges.
pub fn scale(img: &Observation, factor: f64) -> Observation {
    if factor == 1.0 {
        return img.clone();
    }
    inverse_map(img, |x, y| (x / factor, y / factor))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize, v: &[f32]) -> Observation {
        Observation::new(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn identities_are_exact() {
        let a = img(3, 2, &[0.1, 0.7, 0.3, 0.9, 0.2, 0.6]);
        assert_eq!(rotate(&a, 0.0), a);
        assert_eq!(shift(&a, 0.0, 0.0), a);
        assert_eq!(scale(&a, 1.0), a);
        assert_eq!(rotate(&a, 360.0), a);
    }

    #[test]
    fn quarter_turn_permutes_pixels() {
        let (a, b, c, d) = (0.1, 0.2, 0.3, 0.4);
        let m = img(2, 2, &[a, b, c, d]);
        assert_eq!(rotate(&m, 90.0).pixels(), &[b, d, a, c]);
        assert_eq!(rotate(&m, 180.0).pixels(), &[d, c, b, a]);
        assert_eq!(rotate(&rotate(&m, 90.0), -90.0), m);
    }

    #[test]
    fn integer_shift_duplicates_border() {
        let m = img(3, 2, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        assert_eq!(shift(&m, 1.0, 0.0).pixels(), &[0.1, 0.1, 0.2, 0.4, 0.4, 0.5]);
        assert_eq!(shift(&m, 0.0, 1.0).pixels(), &[0.1, 0.2, 0.3, 0.1, 0.2, 0.3]);
    }

    #[test]
    fn half_pixel_shift_interpolates() {
        let m = img(2, 1, &[0.0, 1.0]);
        let s = shift(&m, 0.5, 0.0);
        assert_eq!(s.pixels(), &[0.0, 0.5]);
    }
}
