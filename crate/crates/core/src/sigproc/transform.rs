use super::signal::Signal;
use crate::error::{Error, Result};

/// First difference; the result is one sample shorter.
pub fn differentiate(x: &Signal) -> Result<Signal> {
    if x.len() < 3 {
        return Err(Error::invalid(format!(
            "differentiate needs at least 3 samples, got {}",
            x.len()
        )));
    }
    x.with_samples(x.samples().windows(2).map(|w| w[1] - w[0]).collect())
}

/// Zero mean, unit (population) variance; constant input maps to zeros.
pub fn zscore(x: &Signal) -> Signal {
    let mean = x.mean();
    let sd = x.std();
    let out = if sd > 0.0 && sd.is_finite() {
        x.samples().iter().map(|v| (v - mean) / sd).collect()
    } else {
        vec![0.0; x.len()]
    };
    x.with_samples(out)
        .expect("z-scoring preserves length and finiteness")
}

/// Linear interpolation of the time-continuous extension of `x` at `t` seconds;
/// values outside the covered span hold the nearest end sample.
pub fn sample_at(x: &Signal, t: f64) -> f64 {
    let s = x.samples();
    let pos = t * x.fs();
    if pos <= 0.0 {
        return s[0];
    }
    let last = (s.len() - 1) as f64;
    if pos >= last {
        return s[s.len() - 1];
    }
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if frac == 0.0 {
        s[i]
    } else {
        s[i] + frac * (s[i + 1] - s[i])
    }
}

/// Linear resampling onto a uniform `fs_out` grid over the same time span.
pub fn resample_linear(x: &Signal, fs_out: f64) -> Result<Signal> {
    if !(fs_out > 0.0 && fs_out.is_finite()) {
        return Err(Error::invalid(format!(
            "output rate must be positive, got {fs_out}"
        )));
    }
    let ratio = x.fs() / fs_out;
    let m = ((x.len() - 1) as f64 / ratio + 1e-9).floor() as usize + 1;
    let last = (x.len() - 1) as f64;
    let s = x.samples();
    let out = (0..m)
        .map(|j| {
            let pos = (j as f64 * ratio).min(last);
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            if frac == 0.0 {
                s[i]
            } else {
                s[i] + frac * (s[i + 1] - s[i])
            }
        })
        .collect();
    Signal::new(out, fs_out)
}

/// Delays `x` by `seconds` (fractional samples by linear interpolation).
pub fn delay(x: &Signal, seconds: f64) -> Result<Signal> {
    let out = (0..x.len())
        .map(|i| sample_at(x, i as f64 / x.fs() - seconds))
        .collect();
    x.with_samples(out)
}
