//! Knowledge-based pulse extraction from spatially averaged skin colour:
//! POS, CHROM and a plain green-channel baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{crop, spatial_mean, FrameSequence, RoiBox};
use crate::sigproc::{bandpass_pulse, differentiate, zscore, Signal};

/// Smallest sliding window, in samples, the projection extractors accept.
pub const MIN_WINDOW_SAMPLES: usize = 8;

/// Overlap-added outputs below this RMS (in mean-normalized units) are
/// reported as exactly zero.
pub const RESIDUAL_FLOOR: f64 = 1e-10;

/// Per-channel spatial means of a video, one sample per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbTrace {
    pub r: Signal,
    pub g: Signal,
    pub b: Signal,
}

impl RgbTrace {
    pub fn new(r: Signal, g: Signal, b: Signal) -> Result<Self> {
        if r.len() != g.len() || r.len() != b.len() {
            return Err(Error::invalid(format!(
                "channel lengths differ: r={}, g={}, b={}",
                r.len(),
                g.len(),
                b.len()
            )));
        }
        if r.fs() != g.fs() || r.fs() != b.fs() {
            return Err(Error::invalid("channels have different sample rates"));
        }
        Ok(Self { r, g, b })
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn fs(&self) -> f64 {
        self.r.fs()
    }

    /// Multiplies each channel by a constant.
    pub fn with_gains(&self, gains: [f64; 3]) -> Result<Self> {
        let g = |s: &Signal, k: f64| s.with_samples(s.samples().iter().map(|v| v * k).collect());
        Self::new(
            g(&self.r, gains[0])?,
            g(&self.g, gains[1])?,
            g(&self.b, gains[2])?,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pos,
    Chrom,
    Green,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Pos => "pos",
            Method::Chrom => "chrom",
            Method::Green => "green",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractorParams {
    pub window_seconds: f64,
    pub method: Method,
}

impl Default for ExtractorParams {
    fn default() -> Self {
        Self {
            window_seconds: 1.6,
            method: Method::Pos,
        }
    }
}

impl ExtractorParams {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    /// Window length in samples at `fps`.
    pub fn window_len(&self, fps: f64) -> Result<usize> {
        let n = (self.window_seconds * fps).round();
        if !(n >= MIN_WINDOW_SAMPLES as f64) {
            return Err(Error::invalid(format!(
                "window of {} s at {fps} fps is {n} samples; need >= {MIN_WINDOW_SAMPLES}",
                self.window_seconds
            )));
        }
        Ok(n as usize)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Sliding-window projection with hop 1 and overlap-add of mean-removed
/// window outputs. `combine` maps the three mean-normalized window channels
/// to a pulse estimate for that window.
fn overlap_add(
    trace: &RgbTrace,
    params: &ExtractorParams,
    combine: impl Fn(&[f64], &[f64], &[f64]) -> Vec<f64>,
) -> Result<Signal> {
    let l = params.window_len(trace.fs())?;
    let n = trace.len();
    if n < l {
        return Err(Error::invalid(format!(
            "trace of {n} samples is shorter than the {l}-sample window"
        )));
    }
    let chans = [trace.r.samples(), trace.g.samples(), trace.b.samples()];
    let mut out = vec![0.0; n];
    let mut norm = [vec![0.0; l], vec![0.0; l], vec![0.0; l]];
    for start in 0..=n - l {
        for (c, src) in chans.iter().enumerate() {
            let w = &src[start..start + l];
            let m = mean(w);
            if !(m > 0.0) {
                return Err(Error::invalid(format!(
                    "channel {} has non-positive mean {m} in window at {start}",
                    ["R", "G", "B"][c]
                )));
            }
            for (dst, v) in norm[c].iter_mut().zip(w) {
                *dst = v / m;
            }
        }
        let h = combine(&norm[0], &norm[1], &norm[2]);
        let hm = mean(&h);
        for (o, v) in out[start..start + l].iter_mut().zip(&h) {
            *o += v - hm;
        }
    }
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms < RESIDUAL_FLOOR {
        // nothing but rounding residue; z-scoring would amplify it to unit power
        return trace.r.with_samples(vec![0.0; n]);
    }
    let s = zscore(&trace.r.with_samples(out)?);
    orient(s, trace)
}

/// Flips the sign so the output correlates negatively with the green AC.
fn orient(s: Signal, trace: &RgbTrace) -> Result<Signal> {
    let g = trace.g.samples();
    let gm = mean(g);
    let sm = mean(s.samples());
    let dot: f64 = s
        .samples()
        .iter()
        .zip(g)
        .map(|(a, b)| (a - sm) * (b - gm))
        .sum();
    if dot > 0.0 {
        let flipped = s.samples().iter().map(|v| -v).collect();
        s.with_samples(flipped)
    } else {
        Ok(s)
    }
}

/// Plane-orthogonal-to-skin extraction.
pub fn pos_extract(trace: &RgbTrace, params: &ExtractorParams) -> Result<Signal> {
    overlap_add(trace, params, |r, g, b| {
        let s1: Vec<f64> = g.iter().zip(b).map(|(g, b)| g - b).collect();
        let s2: Vec<f64> = r
            .iter()
            .zip(g)
            .zip(b)
            .map(|((r, g), b)| -2.0 * r + g + b)
            .collect();
        let sd2 = std(&s2);
        let alpha = if sd2 > 0.0 { std(&s1) / sd2 } else { 0.0 };
        s1.iter().zip(&s2).map(|(a, b)| a + alpha * b).collect()
    })
}

/// Chrominance-based extraction.
pub fn chrom_extract(trace: &RgbTrace, params: &ExtractorParams) -> Result<Signal> {
    overlap_add(trace, params, |r, g, b| {
        let x: Vec<f64> = r.iter().zip(g).map(|(r, g)| 3.0 * r - 2.0 * g).collect();
        let y: Vec<f64> = r
            .iter()
            .zip(g)
            .zip(b)
            .map(|((r, g), b)| 1.5 * r + g - 1.5 * b)
            .collect();
        let sdy = std(&y);
        let alpha = if sdy > 0.0 { std(&x) / sdy } else { 0.0 };
        x.iter().zip(&y).map(|(x, y)| x - alpha * y).collect()
    })
}

/// Mean-normalized, mean-removed, z-scored green channel.
pub fn green_extract(trace: &RgbTrace) -> Result<Signal> {
    let g = trace.g.samples();
    let m = mean(g);
    let scale = if m != 0.0 { m } else { 1.0 };
    let centred = g.iter().map(|v| v / scale - m / scale).collect();
    orient(zscore(&trace.g.with_samples(centred)?), trace)
}

pub fn extract(trace: &RgbTrace, params: &ExtractorParams) -> Result<Signal> {
    match params.method {
        Method::Pos => pos_extract(trace, params),
        Method::Chrom => chrom_extract(trace, params),
        Method::Green => green_extract(trace),
    }
}

/// Training label aligned to the video's difference frames: extractor output,
/// optionally band-passed, then differentiated and z-scored (length `T - 1`).
pub fn make_reference_label(
    video: &FrameSequence,
    params: &ExtractorParams,
    roi: Option<RoiBox>,
    filter: bool,
) -> Result<Signal> {
    let trace = match roi {
        Some(roi) => spatial_mean(&crop(video, roi)?)?,
        None => spatial_mean(video)?,
    };
    let pulse = extract(&trace, params)?;
    let pulse = if filter {
        bandpass_pulse(&pulse)?
    } else {
        pulse
    };
    Ok(zscore(&differentiate(&pulse)?))
}
