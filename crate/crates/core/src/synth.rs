//! Deterministic synthetic skin videos with a known pulse, plus the two
//! intensity-noise injectors and a finger-oximeter style reference.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::frames::{FrameSequence, Provenance};
use crate::nnkit::Tensor;
use crate::sigproc::{analytic_signal, bandpass_pulse, delay, Signal};

/// Frequency of the periodic intensity disturbance used in the noise tests.
pub const PERIODIC_NOISE_HZ: f64 = 1.67;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubjectSpec {
    pub seed: u64,
    pub duration_s: f64,
    pub fps: f64,
    pub frame_side: usize,
    pub hr_start_bpm: f64,
    pub hr_end_bpm: f64,
    /// `(order, relative amplitude)`; the fundamental sets the unit.
    pub ppg_harmonics: Vec<(u32, f64)>,
    /// Mean counts of R, G, B.
    pub skin_dc: [f64; 3],
    /// AC/DC amplitude of the green channel's fundamental.
    pub ac_strength: f64,
    /// Relative pulsatile strength of R, G, B.
    pub channel_ratio: [f64; 3],
    /// Peak relative deviation of the static skin texture.
    pub texture_amplitude: f64,
    pub spatial_texture_seed: u64,
    /// RMS of a spatially uniform, per-channel independent fluctuation of
    /// the relative intensity, band-limited to the pulse band. Models
    /// illumination colour flicker and sensor drift; 0 disables it.
    pub channel_noise: f64,
    /// RMS of a spatially uniform fluctuation shared by all three channels
    /// (illumination flicker), band-limited like `channel_noise`.
    pub intensity_noise: f64,
}

impl Default for SubjectSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            duration_s: 60.0,
            fps: 20.0,
            frame_side: 64,
            hr_start_bpm: 72.0,
            hr_end_bpm: 72.0,
            ppg_harmonics: vec![(1, 1.0), (2, 0.3)],
            skin_dc: [150.0, 110.0, 95.0],
            ac_strength: 0.02,
            channel_ratio: [0.4, 1.0, 0.7],
            texture_amplitude: 0.1,
            spatial_texture_seed: 0,
            channel_noise: 0.0,
            intensity_noise: 0.0,
        }
    }
}

impl SubjectSpec {
    pub fn frames(&self) -> usize {
        (self.duration_s * self.fps).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        for hr in [self.hr_start_bpm, self.hr_end_bpm] {
            if !(40.0..=240.0).contains(&hr) {
                return bad(format!("heart rate {hr} bpm outside [40, 240]"));
            }
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        if self.frames() < 3 {
            return bad(format!(
                "{} s at {} fps gives fewer than 3 frames",
                self.duration_s, self.fps
            ));
        }
        if self.frame_side == 0 {
            return bad("frame_side must be positive".into());
        }
        if !(0.0..0.2).contains(&self.ac_strength) {
            return bad(format!("ac_strength {} outside [0, 0.2)", self.ac_strength));
        }
        let [r, g, b] = self.channel_ratio;
        if g != 1.0 || !(g > b && b > r && r >= 0.0) {
            return bad(format!(
                "channel_ratio {:?} must satisfy G = 1 > B > R >= 0",
                self.channel_ratio
            ));
        }
        if self.skin_dc.iter().any(|&d| !(d > 0.0)) {
            return bad(format!("skin_dc {:?} must be positive", self.skin_dc));
        }
        if !(0.0..0.5).contains(&self.texture_amplitude) {
            return bad(format!(
                "texture_amplitude {} outside [0, 0.5)",
                self.texture_amplitude
            ));
        }
        if !(self.channel_noise >= 0.0 && self.channel_noise < 0.2) {
            return bad(format!(
                "channel_noise {} outside [0, 0.2)",
                self.channel_noise
            ));
        }
        if !(self.intensity_noise >= 0.0 && self.intensity_noise < 0.2) {
            return bad(format!(
                "intensity_noise {} outside [0, 0.2)",
                self.intensity_noise
            ));
        }
        if self
            .ppg_harmonics
            .iter()
            .any(|&(k, a)| k == 0 || !a.is_finite())
        {
            return bad("harmonic orders must be >= 1 with finite amplitudes".into());
        }
        Ok(())
    }

    /// Pulse phase (radians) at `t`, integrating a linearly drifting rate.
    fn phase(&self, t: f64) -> f64 {
        let f0 = self.hr_start_bpm / 60.0;
        let f1 = self.hr_end_bpm / 60.0;
        2.0 * PI * (f0 * t + (f1 - f0) * t * t / (2.0 * self.duration_s))
    }

    /// Ground-truth pulse waveform at `t`.
    pub fn pulse(&self, t: f64) -> f64 {
        let th = self.phase(t);
        self.ppg_harmonics
            .iter()
            .map(|&(k, a)| a * (k as f64 * th).sin())
            .sum()
    }

    /// Mean heart rate over the clip.
    pub fn mean_hr_bpm(&self) -> f64 {
        0.5 * (self.hr_start_bpm + self.hr_end_bpm)
    }
}

/// `n` subjects derived from `template` with seeded heart rates, skin tones
/// and texture. Rates start in `[60, 90]` bpm and drift by up to 10 bpm.
pub fn cohort(template: &SubjectSpec, n: usize, seed: u64) -> Vec<SubjectSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(crate::mix_seed(seed, 0xC0, 0x40));
    (0..n)
        .map(|i| {
            let start: f64 = rng.random_range(60.0..90.0);
            let drift: f64 = rng.random_range(-10.0..10.0);
            let tone: f64 = rng.random_range(0.85..1.15);
            SubjectSpec {
                seed: crate::mix_seed(seed, 1, i as u64),
                spatial_texture_seed: crate::mix_seed(seed, 2, i as u64),
                hr_start_bpm: start,
                hr_end_bpm: start + drift,
                skin_dc: template.skin_dc.map(|d| d * tone),
                ..template.clone()
            }
        })
        .collect()
}

/// Smooth field in `[-amplitude, amplitude]`: bilinear interpolation of a
/// seeded 5x5 lattice, rescaled so the extreme value hits the bound.
fn texture(side: usize, amplitude: f64, seed: u64) -> Vec<f64> {
    const GRID: usize = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lattice: Vec<f64> = (0..GRID * GRID)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let at = |u: f64, v: f64| {
        let (x0, y0) = (u.floor() as usize, v.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(GRID - 1), (y0 + 1).min(GRID - 1));
        let (fx, fy) = (u - x0 as f64, v - y0 as f64);
        let l = |y: usize, x: usize| lattice[y * GRID + x];
        (1.0 - fy) * ((1.0 - fx) * l(y0, x0) + fx * l(y0, x1))
            + fy * ((1.0 - fx) * l(y1, x0) + fx * l(y1, x1))
    };
    let span = (GRID - 1) as f64;
    let denom = (side.max(2) - 1) as f64;
    let mut field: Vec<f64> = (0..side * side)
        .map(|i| {
            at(
                (i % side) as f64 / denom * span,
                (i / side) as f64 / denom * span,
            )
        })
        .collect();
    let peak = field.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        field.iter_mut().for_each(|v| *v *= amplitude / peak);
    }
    field
}

/// Unit-RMS pulse-band noise from its own seeded stream.
fn band_noise(spec: &SubjectSpec, n: usize, stream: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(crate::mix_seed(spec.seed, 0xF1, stream));
    let white: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let band = bandpass_pulse(&Signal::new(white, spec.fps)?)?;
    let rms = band.rms();
    Ok(if rms > 0.0 {
        band.samples().iter().map(|v| v / rms).collect()
    } else {
        vec![0.0; n]
    })
}

/// Per-channel relative gain fluctuation: independent parts plus the shared one.
fn channel_fluctuations(spec: &SubjectSpec, n: usize) -> Result<[Vec<f64>; 3]> {
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    if spec.channel_noise != 0.0 {
        for (c, dst) in out.iter_mut().enumerate() {
            *dst = band_noise(spec, n, c as u64)?
                .iter()
                .map(|v| v * spec.channel_noise)
                .collect();
        }
    }
    if spec.intensity_noise != 0.0 {
        let common = band_noise(spec, n, 3)?;
        for dst in out.iter_mut() {
            dst.iter_mut()
                .zip(&common)
                .for_each(|(d, v)| *d += spec.intensity_noise * v);
        }
    }
    Ok(out)
}

/// Renders the subject's video and returns it with the ground-truth pulse
/// sampled at the frame rate.
pub fn generate_subject(spec: &SubjectSpec) -> Result<(FrameSequence, Signal)> {
    spec.validate()?;
    let n = spec.frames();
    let side = spec.frame_side;
    let tex = texture(side, spec.texture_amplitude, spec.spatial_texture_seed);
    let truth: Vec<f64> = (0..n).map(|i| spec.pulse(i as f64 / spec.fps)).collect();
    let noise = channel_fluctuations(spec, n)?;
    let frames: Vec<Tensor> = (0..n)
        .into_par_iter()
        .map(|t| {
            let gain: [f64; 3] = std::array::from_fn(|c| {
                1.0 + spec.ac_strength * spec.channel_ratio[c] * truth[t] + noise[c][t]
            });
            let mut data = Vec::with_capacity(side * side * 3);
            for &tx in &tex {
                for c in 0..3 {
                    data.push(spec.skin_dc[c] * (1.0 + tx) * gain[c]);
                }
            }
            Tensor::new(&[side, side, 3], data).expect("frame shape")
        })
        .collect();
    let seq = FrameSequence::new(frames, spec.fps, Provenance::Synthetic)?;
    Ok((seq, Signal::new(truth, spec.fps)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    Periodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub gain: f64,
    #[serde(default = "default_noise_freq")]
    pub freq_hz: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_noise_freq() -> f64 {
    PERIODIC_NOISE_HZ
}

impl NoiseSpec {
    pub fn gaussian(gain: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            gain,
            freq_hz: PERIODIC_NOISE_HZ,
            seed,
        }
    }

    pub fn periodic(gain: f64) -> Self {
        Self {
            kind: NoiseKind::Periodic,
            gain,
            freq_hz: PERIODIC_NOISE_HZ,
            seed: 0,
        }
    }

    pub fn validate(&self, fps: f64) -> Result<()> {
        if !(self.gain >= 0.0 && self.gain.is_finite()) {
            return Err(Error::invalid(format!(
                "noise gain {} must be >= 0",
                self.gain
            )));
        }
        if !(self.freq_hz > 0.0 && self.freq_hz < fps / 2.0) {
            return Err(Error::invalid(format!(
                "noise frequency {} Hz must lie in (0, {})",
                self.freq_hz,
                fps / 2.0
            )));
        }
        Ok(())
    }

    /// The unscaled disturbance `n(t)` for `len` frames.
    pub fn waveform(&self, len: usize, fps: f64) -> Vec<f64> {
        match self.kind {
            NoiseKind::Gaussian => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                (0..len).map(|_| rng.sample(StandardNormal)).collect()
            }
            NoiseKind::Periodic => (0..len)
                .map(|i| (2.0 * PI * self.freq_hz * i as f64 / fps).sin())
                .collect(),
        }
    }
}

/// Multiplies every pixel and channel by the same `1 + gain * n(t)`.
pub fn add_intensity_noise(seq: &FrameSequence, spec: &NoiseSpec) -> Result<FrameSequence> {
    spec.validate(seq.fps())?;
    let n = spec.waveform(seq.len(), seq.fps());
    let mut clamped = 0usize;
    let frames = seq
        .frames()
        .iter()
        .zip(&n)
        .map(|(f, &v)| {
            let g = 1.0 + spec.gain * v;
            if g < 0.0 {
                clamped += 1;
            }
            f.map(|p| (p * g).max(0.0))
        })
        .collect();
    if clamped > 0 {
        warn!("intensity noise drove {clamped} frame(s) negative; clamped to 0");
    }
    let mut out = FrameSequence::new(frames, seq.fps(), seq.provenance())?;
    out.set_channel_tag(seq.channel_tag().to_string());
    Ok(out)
}

/// Default relative amplitudes of the added 2nd and 3rd harmonics.
pub const FINGER_HARMONICS: [f64; 2] = [0.4, 0.2];

/// Finger-oximeter style reference: `ground_truth` delayed by the pulse
/// transit time, with extra harmonics (`extra_harmonics[k]` is the relative
/// amplitude of harmonic `k + 2`) synthesized from the analytic signal.
pub fn make_finger_reference(
    ground_truth: &Signal,
    transit_delay_s: f64,
    extra_harmonics: &[f64],
) -> Result<Signal> {
    if !(transit_delay_s >= 0.0) || transit_delay_s >= ground_truth.duration() {
        return Err(Error::invalid(format!(
            "transit delay {transit_delay_s} s must lie in [0, {})",
            ground_truth.duration()
        )));
    }
    let delayed = if transit_delay_s == 0.0 {
        ground_truth.clone()
    } else {
        delay(ground_truth, transit_delay_s)?
    };
    if extra_harmonics.iter().all(|&a| a == 0.0) {
        return Ok(delayed);
    }
    let z: Vec<Complex64> = analytic_signal(&delayed);
    let out = delayed
        .samples()
        .iter()
        .zip(&z)
        .map(|(&x, &a)| {
            let mag = a.norm();
            if mag == 0.0 {
                return x;
            }
            let unit = a / mag;
            let mut acc = x;
            let mut power = unit;
            for &rel in extra_harmonics {
                power *= unit;
                acc += rel * mag * power.re;
            }
            acc
        })
        .collect();
    delayed.with_samples(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractors::{pos_extract, ExtractorParams};
    use crate::frames::{normalized_diff, project_plane, spatial_mean, POS_PLANE};
    use crate::sigproc::{bandpass, magnitude_spectrum, rate_trace, rmse};

    fn short(seconds: f64) -> SubjectSpec {
        SubjectSpec {
            duration_s: seconds,
            frame_side: 8,
            ..SubjectSpec::default()
        }
    }

    #[test]
    fn flat_video_without_pulse() {
        let spec = SubjectSpec {
            ac_strength: 0.0,
            ..short(3.0)
        };
        let (seq, _) = generate_subject(&spec).unwrap();
        let clip = normalized_diff(&seq).unwrap();
        assert!((0..clip.len()).all(|t| clip.frame_f32(t).iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn constant_rate_truth() {
        let spec = SubjectSpec {
            ppg_harmonics: vec![(1, 1.0)],
            ..short(30.0)
        };
        let (_, truth) = generate_subject(&spec).unwrap();
        let rt = rate_trace(&truth).unwrap();
        assert!(rt.rates.iter().all(|r| (r - 72.0).abs() < 0.6));
    }

    #[test]
    fn pos_tracks_drifting_truth() {
        let spec = SubjectSpec {
            hr_start_bpm: 65.0,
            hr_end_bpm: 80.0,
            ..short(60.0)
        };
        let (seq, truth) = generate_subject(&spec).unwrap();
        let pulse = pos_extract(&spatial_mean(&seq).unwrap(), &ExtractorParams::default()).unwrap();
        let err = rmse(&rate_trace(&pulse).unwrap(), &rate_trace(&truth).unwrap()).unwrap();
        assert!(err < 1.0, "{err}");
    }

    #[test]
    fn reproducible_from_seed() {
        let spec = SubjectSpec {
            channel_noise: 0.002,
            ..short(4.0)
        };
        let (a, ta) = generate_subject(&spec).unwrap();
        let (b, tb) = generate_subject(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let other = SubjectSpec { seed: 1, ..spec };
        assert_ne!(generate_subject(&other).unwrap().0, a);
    }

    #[test]
    fn intensity_noise_is_common_mode() {
        let spec = SubjectSpec {
            ac_strength: 0.0,
            intensity_noise: 0.01,
            ..short(10.0)
        };
        let (seq, _) = generate_subject(&spec).unwrap();
        let means = spatial_mean(&seq).unwrap();
        let rel: Vec<Vec<f64>> = [&means.r, &means.g, &means.b]
            .into_iter()
            .map(|x| {
                let x = x.samples();
                let m = x.iter().sum::<f64>() / x.len() as f64;
                x.iter().map(|v| v / m - 1.0).collect()
            })
            .collect();
        let sd = (rel[1].iter().map(|v| v * v).sum::<f64>() / rel[1].len() as f64).sqrt();
        assert!((sd - 0.01).abs() < 2e-3, "{sd}");
        for t in 0..rel[0].len() {
            assert!((rel[0][t] - rel[1][t]).abs() < 1e-9 && (rel[2][t] - rel[1][t]).abs() < 1e-9);
        }
        let pulse = pos_extract(&means, &ExtractorParams::default()).unwrap();
        assert!(pulse.rms() < 1e-6, "{}", pulse.rms());
    }

    #[test]
    fn texture_is_bounded() {
        let tex = texture(64, 0.1, 3);
        let peak = tex.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 0.1).abs() < 1e-12);
        assert!(tex.iter().any(|&v| v < 0.0) && tex.iter().any(|&v| v > 0.0));
    }

    #[test]
    fn channel_ac_matches_spec() {
        // 75 bpm over 48 s: exactly 60 cycles, so the tone sits on a DFT bin
        let spec = SubjectSpec {
            duration_s: 48.0,
            hr_start_bpm: 75.0,
            hr_end_bpm: 75.0,
            ..short(48.0)
        };
        let (seq, _) = generate_subject(&spec).unwrap();
        let tr = spatial_mean(&seq).unwrap();
        for (c, s) in [&tr.r, &tr.g, &tr.b].into_iter().enumerate() {
            let mag = magnitude_spectrum(s.samples());
            let n = s.len() as f64;
            let amp = 2.0 * mag[60] / n / s.mean();
            let want = spec.ac_strength * spec.channel_ratio[c];
            assert!(
                ((amp - want) / want).abs() < 0.02,
                "channel {c}: {amp} vs {want}"
            );
        }
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            SubjectSpec {
                hr_start_bpm: 30.0,
                ..short(2.0)
            },
            SubjectSpec {
                ac_strength: 0.3,
                ..short(2.0)
            },
            SubjectSpec {
                channel_ratio: [0.8, 1.0, 0.7],
                ..short(2.0)
            },
            SubjectSpec {
                duration_s: 0.05,
                ..short(2.0)
            },
        ] {
            assert!(generate_subject(&spec).is_err());
        }
    }

    #[test]
    fn noise_injection() {
        let spec = SubjectSpec {
            ac_strength: 0.0,
            ..short(12.8)
        };
        let (flat, _) = generate_subject(&spec).unwrap();
        let same = add_intensity_noise(&flat, &NoiseSpec::periodic(0.0)).unwrap();
        assert_eq!(same, flat);

        let noisy = add_intensity_noise(&flat, &NoiseSpec::periodic(0.05)).unwrap();
        let tr = spatial_mean(&noisy).unwrap();
        // 1.67 Hz at 20 fps over 256 frames is close to bin 21.4; check the
        // relative amplitude by least squares against the known tone instead
        for s in [&tr.r, &tr.g, &tr.b] {
            let m = s.mean();
            let (mut ss, mut sc, mut cc, mut xs, mut xc) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (i, v) in s.samples().iter().enumerate() {
                let w = 2.0 * PI * PERIODIC_NOISE_HZ * i as f64 / 20.0;
                let (si, co) = w.sin_cos();
                ss += si * si;
                sc += si * co;
                cc += co * co;
                xs += (v / m - 1.0) * si;
                xc += (v / m - 1.0) * co;
            }
            let det = ss * cc - sc * sc;
            let a = (xs * cc - xc * sc) / det;
            let b = (xc * ss - xs * sc) / det;
            assert!((a - 0.05).abs() < 1e-3 && b.abs() < 1e-3, "{a} {b}");
        }

        let clip = normalized_diff(&noisy).unwrap();
        let proj = project_plane(&clip, &POS_PLANE).unwrap();
        assert!((0..proj.len()).all(|t| proj.raw_frame(t).data().iter().all(|v| v.abs() < 1e-9)));

        let g = add_intensity_noise(&flat, &NoiseSpec::gaussian(0.01, 4)).unwrap();
        assert_eq!(
            g,
            add_intensity_noise(&flat, &NoiseSpec::gaussian(0.01, 4)).unwrap()
        );
        assert!(add_intensity_noise(
            &flat,
            &NoiseSpec {
                freq_hz: 11.0,
                ..NoiseSpec::periodic(0.1)
            }
        )
        .is_err());
        assert!(add_intensity_noise(&flat, &NoiseSpec::gaussian(-1.0, 0)).is_err());
    }

    #[test]
    fn large_noise_clamps() {
        let (flat, _) = generate_subject(&short(2.0)).unwrap();
        let out = add_intensity_noise(&flat, &NoiseSpec::gaussian(5.0, 1)).unwrap();
        assert!(out
            .frames()
            .iter()
            .all(|f| f.data().iter().all(|&v| v >= 0.0)));
    }

    #[test]
    fn intensity_noise_leaves_pos_rates() {
        let spec = SubjectSpec {
            hr_start_bpm: 70.0,
            hr_end_bpm: 76.0,
            ..short(40.0)
        };
        let (seq, truth) = generate_subject(&spec).unwrap();
        let noisy = add_intensity_noise(&seq, &NoiseSpec::periodic(0.05)).unwrap();
        let pulse =
            pos_extract(&spatial_mean(&noisy).unwrap(), &ExtractorParams::default()).unwrap();
        let err = rmse(&rate_trace(&pulse).unwrap(), &rate_trace(&truth).unwrap()).unwrap();
        assert!(err < 1.0, "{err}");
        // the green channel alone is dominated by the disturbance
        assert_ne!(
            spatial_mean(&noisy).unwrap().g,
            spatial_mean(&seq).unwrap().g
        );
    }

    #[test]
    fn finger_reference_cases() {
        let x = Signal::from_fn(400, 20.0, |t| (2.0 * PI * 1.0 * t).sin()).unwrap();
        assert_eq!(make_finger_reference(&x, 0.0, &[]).unwrap(), x);

        let d = make_finger_reference(&x, 0.25, &[]).unwrap();
        // cross-correlation peak over lags of 0..10 samples, interior only
        let xc = |lag: usize| -> f64 {
            (20..380)
                .map(|i| x.samples()[i] * d.samples()[i + lag])
                .sum()
        };
        let best = (0..10).max_by(|&a, &b| xc(a).total_cmp(&xc(b))).unwrap();
        assert_eq!(
            best, 5,
            "0.25 s at 20 fps is 5 samples = 90 degrees of a 1 Hz tone"
        );

        let hr = Signal::from_fn(400, 20.0, |t| (2.0 * PI * (100.0 / 60.0) * t).sin()).unwrap();
        let rich = make_finger_reference(&hr, 0.1, &FINGER_HARMONICS).unwrap();
        let filtered = bandpass(&rich, 0.7, 3.0).unwrap();
        let mag = magnitude_spectrum(filtered.samples());
        let bin = |hz: f64| (hz * 400.0 / 20.0).round() as usize;
        assert!(mag[bin(5.0)] < 1e-9 * mag[bin(100.0 / 60.0)]);
        let raw = magnitude_spectrum(rich.samples());
        assert!(raw[bin(5.0)] > 0.1 * raw[bin(100.0 / 60.0)]);

        assert!(make_finger_reference(&x, 25.0, &[]).is_err());
    }
}
