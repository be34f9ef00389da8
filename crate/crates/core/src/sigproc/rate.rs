//! Sliding-window pulse-rate estimation and rate-trace metrics.

use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::signal::Signal;
use crate::error::{Error, Result};

pub const WINDOW_LEN: usize = 256;
pub const FFT_LEN: usize = 2048;
pub const MIN_BPM: f64 = 40.0;
pub const MAX_BPM: f64 = 240.0;
pub const ACCURACY_THRESHOLD_BPM: f64 = 3.0;
/// Peak-to-median spectral ratio below which a window is flagged.
pub const CONFIDENCE_FLOOR: f64 = 2.0;

/// One pulse-rate estimate per window position (hop of one sample).
#[derive(Clone, Debug, PartialEq)]
pub struct RateTrace {
    pub rates: Vec<f64>,
    /// Peak-to-median magnitude ratio in the search band; `0` when the
    /// maximum sits on a band edge (clamped, not a true peak) or when some
    /// bin outside the band is stronger than the in-band peak.
    pub confidence: Vec<f64>,
    pub fs: f64,
    pub window_len: usize,
    pub start_offset: usize,
}

impl RateTrace {
    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn is_low_confidence(&self, i: usize) -> bool {
        self.confidence[i] < CONFIDENCE_FLOOR
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("window_start_index,rate_bpm,confidence\n");
        for (i, (r, c)) in self.rates.iter().zip(&self.confidence).enumerate() {
            out.push_str(&format!("{},{:?},{:?}\n", self.start_offset + i, r, c));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic_str(path, &self.to_csv())
    }
}

/// Hann-tapered, zero-padded spectral peak picker with its FFT plan cached.
pub struct RateEstimator {
    fft: Arc<dyn Fft<f64>>,
    taper: Vec<f64>,
}

impl Default for RateEstimator {
    fn default() -> Self {
        Self::new()
    }
}

impl RateEstimator {
    pub fn new() -> Self {
        let taper = (0..WINDOW_LEN)
            .map(|n| {
                0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / (WINDOW_LEN - 1) as f64).cos()
            })
            .collect();
        Self {
            fft: FftPlanner::new().plan_fft_forward(FFT_LEN),
            taper,
        }
    }

    /// Rate in bpm and confidence for one window of exactly `WINDOW_LEN` samples.
    pub fn window_rate(&self, window: &[f64], fs: f64, scratch: &mut Vec<Complex64>) -> (f64, f64) {
        debug_assert_eq!(window.len(), WINDOW_LEN);
        let mean = window.iter().sum::<f64>() / window.len() as f64;
        scratch.clear();
        scratch.extend(
            window
                .iter()
                .zip(&self.taper)
                .map(|(v, w)| Complex64::new((v - mean) * w, 0.0)),
        );
        scratch.resize(FFT_LEN, Complex64::new(0.0, 0.0));
        self.fft.process(scratch);

        let df = fs / FFT_LEN as f64;
        let lo = ((MIN_BPM / 60.0) / df).ceil() as usize;
        let hi = (((MAX_BPM / 60.0) / df).floor() as usize).min(FFT_LEN / 2);
        let mag: Vec<f64> = scratch[lo..=hi].iter().map(|c| c.norm()).collect();
        let (peak, &pmax) = mag
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |acc, (i, v)| {
                if *v > *acc.1 {
                    (i, v)
                } else {
                    acc
                }
            });

        // parabolic refinement on the magnitude around the peak bin
        let mut offset = 0.0;
        let at_edge = peak == 0 || peak == mag.len() - 1;
        if !at_edge {
            let (a, b, c) = (mag[peak - 1], mag[peak], mag[peak + 1]);
            let denom = a - 2.0 * b + c;
            if denom != 0.0 {
                offset = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
            }
        }
        let bpm = (((lo + peak) as f64 + offset) * df * 60.0).clamp(MIN_BPM, MAX_BPM);

        let mut sorted = mag.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let median = sorted[sorted.len() / 2];
        // a stronger component outside the search band means the in-band
        // peak is leakage, not a pulse
        let outside = scratch[1..lo]
            .iter()
            .chain(&scratch[hi + 1..=FFT_LEN / 2])
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        let confidence = if at_edge || pmax == 0.0 || outside > pmax {
            0.0
        } else if median > 0.0 {
            pmax / median
        } else {
            f64::MAX
        };
        (bpm, confidence)
    }

    pub fn rate_trace(&self, x: &Signal) -> Result<RateTrace> {
        if x.len() < WINDOW_LEN {
            return Err(Error::invalid(format!(
                "rate estimation needs at least {WINDOW_LEN} samples, got {}",
                x.len()
            )));
        }
        let n_windows = x.len() - WINDOW_LEN + 1;
        let mut scratch = Vec::with_capacity(FFT_LEN);
        let mut rates = Vec::with_capacity(n_windows);
        let mut confidence = Vec::with_capacity(n_windows);
        for w in x.samples().windows(WINDOW_LEN) {
            let (r, c) = self.window_rate(w, x.fs(), &mut scratch);
            rates.push(r);
            confidence.push(c);
        }
        Ok(RateTrace {
            rates,
            confidence,
            fs: x.fs(),
            window_len: WINDOW_LEN,
            start_offset: 0,
        })
    }
}

pub fn rate_trace(x: &Signal) -> Result<RateTrace> {
    RateEstimator::new().rate_trace(x)
}

fn check_aligned(op: &'static str, a: &RateTrace, b: &RateTrace) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::shape(op, "trace length", a.len(), b.len()));
    }
    if a.start_offset != b.start_offset || a.window_len != b.window_len {
        return Err(Error::shape(
            op,
            "trace alignment",
            format!("offset {} / window {}", a.start_offset, a.window_len),
            format!("offset {} / window {}", b.start_offset, b.window_len),
        ));
    }
    if a.is_empty() {
        return Err(Error::invalid(format!("{op}: empty traces")));
    }
    Ok(())
}

/// Root-mean-square rate difference in bpm.
pub fn rmse(a: &RateTrace, b: &RateTrace) -> Result<f64> {
    check_aligned("rmse", a, b)?;
    let ss: f64 = a
        .rates
        .iter()
        .zip(&b.rates)
        .map(|(x, y)| (x - y).powi(2))
        .sum();
    Ok((ss / a.len() as f64).sqrt())
}

/// Percentage of windows whose rates differ by strictly less than `threshold` bpm.
pub fn accuracy(a: &RateTrace, b: &RateTrace, threshold: f64) -> Result<f64> {
    check_aligned("accuracy", a, b)?;
    let hits = a
        .rates
        .iter()
        .zip(&b.rates)
        .filter(|(x, y)| (*x - *y).abs() < threshold)
        .count();
    Ok(100.0 * hits as f64 / a.len() as f64)
}
