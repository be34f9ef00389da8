//! Transform-domain filtering: brick-wall bandpass and Hilbert phase shift.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::signal::Signal;
use crate::error::{Error, Result};

pub const PULSE_BAND_HZ: (f64, f64) = (0.7, 3.0);

fn forward(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    buf
}

fn inverse(mut buf: Vec<Complex64>) -> Vec<Complex64> {
    let n = buf.len() as f64;
    FftPlanner::new()
        .plan_fft_inverse(buf.len())
        .process(&mut buf);
    buf.iter_mut().for_each(|c| *c /= n);
    buf
}

/// Frequency in Hz of bin `k` of an `n`-point transform, folded to `[0, fs/2]`.
fn bin_freq(k: usize, n: usize, fs: f64) -> f64 {
    let folded = if k <= n / 2 { k } else { n - k };
    folded as f64 * fs / n as f64
}

/// Zero-phase ideal bandpass: bins outside `[lo, hi]` (and their mirror)
/// are zeroed. The DC bin is always removed.
pub fn bandpass(x: &Signal, lo: f64, hi: f64) -> Result<Signal> {
    let nyquist = x.fs() / 2.0;
    if hi >= nyquist {
        return Err(Error::invalid(format!(
            "bandpass upper edge {hi} Hz must be below Nyquist ({nyquist} Hz)"
        )));
    }
    if !(lo >= 0.0 && lo < hi) {
        return Err(Error::invalid(format!("invalid band [{lo}, {hi}] Hz")));
    }
    let n = x.len();
    let mut spec = forward(x.samples());
    for (k, c) in spec.iter_mut().enumerate() {
        let f = bin_freq(k, n, x.fs());
        if k == 0 || f < lo || f > hi {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    x.with_samples(inverse(spec).into_iter().map(|c| c.re).collect())
}

pub fn bandpass_pulse(x: &Signal) -> Result<Signal> {
    bandpass(x, PULSE_BAND_HZ.0, PULSE_BAND_HZ.1)
}

/// Analytic signal of the mean-removed input.
pub fn analytic_signal(x: &Signal) -> Vec<Complex64> {
    let n = x.len();
    let mean = x.mean();
    let centred: Vec<f64> = x.samples().iter().map(|v| v - mean).collect();
    let mut spec = forward(&centred);
    for (k, c) in spec.iter_mut().enumerate() {
        let gain = if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *c *= gain;
    }
    inverse(spec)
}

/// Delays every frequency component of `x` by `phi_degrees` using the
/// analytic signal: `Re{a(t) exp(-i phi)}`. The input mean is removed.
pub fn hilbert_phase_shift(x: &Signal, phi_degrees: f64) -> Result<Signal> {
    let phi = phi_degrees.to_radians();
    let (s, c) = phi.sin_cos();
    let out = analytic_signal(x)
        .into_iter()
        .map(|a| a.re * c + a.im * s)
        .collect();
    x.with_samples(out)
}

/// Single-sided magnitude spectrum (bins `0..=n/2`) of `x`.
pub fn magnitude_spectrum(x: &[f64]) -> Vec<f64> {
    let spec = forward(x);
    spec[..=x.len() / 2].iter().map(|c| c.norm()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, n: usize, fs: f64) -> Signal {
        Signal::from_fn(n, fs, |t| (2.0 * PI * freq * t).sin()).unwrap()
    }

    #[test]
    fn bandpass_passes_in_band_tone() {
        let x = tone(1.5, 1200, 20.0);
        let y = bandpass_pulse(&x).unwrap();
        assert!((y.rms() / x.rms() - 1.0).abs() < 0.01);
    }

    #[test]
    fn bandpass_rejects_out_of_band_tone() {
        let x = tone(0.3, 1200, 20.0);
        let y = bandpass_pulse(&x).unwrap();
        assert!(y.rms() < 0.01 * x.rms());
    }

    #[test]
    fn bandpass_is_idempotent_and_zero_mean() {
        let x = Signal::from_fn(777, 20.0, |t| {
            (t * 7.3).sin() + 0.4 * (t * 1.1).cos() + 0.05 * t + 2.0
        })
        .unwrap();
        let once = bandpass_pulse(&x).unwrap();
        let twice = bandpass_pulse(&once).unwrap();
        for (a, b) in once.samples().iter().zip(twice.samples()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(once.mean().abs() < 1e-9);
    }

    #[test]
    fn bandpass_rejects_band_above_nyquist() {
        let x = tone(1.0, 100, 5.0);
        assert!(bandpass_pulse(&x).is_err());
        assert!(bandpass(&tone(1.0, 100, 20.0), 2.0, 1.0).is_err());
    }

    #[test]
    fn hilbert_identity_and_negation() {
        let x = Signal::from_fn(500, 20.0, |t| {
            (2.0 * PI * 1.3 * t).sin() + 0.3 * (2.0 * PI * 2.2 * t).cos()
        })
        .unwrap();
        let centred = x
            .with_samples(x.samples().iter().map(|v| v - x.mean()).collect())
            .unwrap();
        let zero = hilbert_phase_shift(&x, 0.0).unwrap();
        let half = hilbert_phase_shift(&x, 180.0).unwrap();
        for i in 0..x.len() {
            assert!((zero.samples()[i] - centred.samples()[i]).abs() < 1e-9);
            assert!((half.samples()[i] + centred.samples()[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn hilbert_quarter_turn_on_cosine() {
        let fs = 20.0;
        let n = 1000;
        let x = Signal::from_fn(n, fs, |t| (2.0 * PI * 1.2 * t).cos()).unwrap();
        let y = hilbert_phase_shift(&x, 90.0).unwrap();
        let edge = n / 20;
        for i in edge..n - edge {
            let t = i as f64 / fs;
            let target = (2.0 * PI * 1.2 * t - PI / 2.0).cos();
            assert!((y.samples()[i] - target).abs() < 1e-3, "i={i}");
        }
    }
}
