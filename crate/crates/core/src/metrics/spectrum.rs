use std::fmt::Write as _;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: f64 = 30.0;

/// One-sided amplitude spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Number of samples in the analyzed signal.
    pub n: usize,
    pub sample_rate: f64,
}

impl Spectrum {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,amplitude\n");
        for (f, m) in self.frequencies.iter().zip(&self.amplitudes) {
            let _ = writeln!(out, "{f},{m}");
        }
        out
    }

    /// Parse `freq_hz,amplitude` rows. `n` and the sample rate are recovered
    /// from the bin spacing and count.
    pub fn from_csv(text: &str, sample_rate: f64) -> Result<Self> {
        let mut frequencies = Vec::new();
        let mut amplitudes = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                if line.trim() != "freq_hz,amplitude" {
                    return Err(Error::param(format!("unexpected spectrum header `{line}`")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (f, m) = line
                .split_once(',')
                .ok_or_else(|| Error::param(format!("line {}: expected two columns", i + 1)))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::param(format!("line {}: {e}", i + 1)))
            };
            frequencies.push(parse(f)?);
            amplitudes.push(parse(m)?);
        }
        if frequencies.len() < 2 {
            return Err(Error::param("spectrum needs at least two bins"));
        }
        let df = frequencies[1] - frequencies[0];
        let n = (sample_rate / df).round() as usize;
        Ok(Self {
            frequencies,
            amplitudes,
            n,
            sample_rate,
        })
    }

    /// Frequency-weighted amplitude sum `2/(n f_s) * sum(M_i f_i)`.
    pub fn smoothness(&self) -> f64 {
        let s: f64 = self
            .amplitudes
            .iter()
            .zip(&self.frequencies)
            .map(|(m, f)| m * f)
            .sum();
        2.0 * s / (self.n as f64 * self.sample_rate)
    }
}

fn check(signal: &[f64], sample_rate: f64) -> Result<()> {
    if signal.len() < 2 {
        return Err(Error::param(format!(
            "spectrum needs at least 2 samples, got {}",
            signal.len()
        )));
    }
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::param("sample rate must be positive"));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("signal contains non-finite values"));
    }
    Ok(())
}

/// Complex DFT coefficients `X_k = sum x_t e^{-2 pi i k t / n}`.
pub fn dft(signal: &[f64]) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// One-sided amplitudes: `|X_0|/n`, `2|X_i|/n` for `0 < i < n/2`, and
/// `|X_{n/2}|/n` at Nyquist when `n` is even. No windowing or detrending.
pub fn amplitude_spectrum(signal: &[f64], sample_rate: f64) -> Result<Spectrum> {
    check(signal, sample_rate)?;
    let n = signal.len();
    let x = dft(signal);
    let nf = n as f64;
    let bins = n / 2 + 1;
    let mut amplitudes = Vec::with_capacity(bins);
    let mut frequencies = Vec::with_capacity(bins);
    for (i, xi) in x.iter().take(bins).enumerate() {
        let mag = xi.norm();
        let a = if i == 0 || (n % 2 == 0 && i == n / 2) {
            mag / nf
        } else {
            2.0 * mag / nf
        };
        amplitudes.push(a);
        frequencies.push(i as f64 * sample_rate / nf);
    }
    Ok(Spectrum {
        frequencies,
        amplitudes,
        n,
        sample_rate,
    })
}

/// Smoothness value of a raw action signal; lower is smoother.
pub fn smoothness(signal: &[f64], sample_rate: f64) -> Result<f64> {
    Ok(amplitude_spectrum(signal, sample_rate)?.smoothness())
}
