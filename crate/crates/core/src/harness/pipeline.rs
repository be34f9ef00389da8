//! Building blocks shared by the experiments: subjects, labels, input
//! preprocessing, training-set assembly and evaluation.

use std::collections::BTreeMap;

use rustfft::num_complex::Complex64;

use super::config::{DatasetConfig, FolderSubject, LabelSource};
use crate::error::{Error, Result};
use crate::extractors::{extract, ExtractorParams};
use crate::frames::{
    channel_map, load_sequence, normalized_diff, normalized_diff_projected, permute_channels,
    resolution_degrade, rotate, spatial_mean, DiffClip, FrameSequence, CHROM_PLANE, POS_PLANE,
};
use crate::nnkit::{predict_clip, Dataset, Network};
use crate::sigproc::{
    accuracy, analytic_signal, bandpass_pulse, differentiate, hilbert_phase_shift, rate_trace,
    resample_linear, rmse, zscore, RateTrace, Signal, ACCURACY_THRESHOLD_BPM,
};
use crate::synth::{
    add_intensity_noise, cohort, generate_subject, make_finger_reference, NoiseSpec, SubjectSpec,
    FINGER_HARMONICS,
};

#[derive(Clone, Debug, PartialEq)]
enum Source {
    Synthetic(SubjectSpec),
    Folder(FolderSubject),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Subject {
    pub id: String,
    pub group: Option<usize>,
    source: Source,
}

/// A loaded subject: video plus, when known, the contact pulse at the
/// video frame rate.
#[derive(Clone, Debug)]
pub struct Recording {
    pub video: FrameSequence,
    pub truth: Option<Signal>,
    /// `true` when `truth` is the noise-free generator pulse.
    synthetic: bool,
}

impl Subject {
    pub fn synthetic(id: impl Into<String>, spec: SubjectSpec) -> Self {
        Self {
            id: id.into(),
            group: None,
            source: Source::Synthetic(spec),
        }
    }

    pub fn folder(index: usize, f: FolderSubject) -> Self {
        let id = f.id.clone().unwrap_or_else(|| {
            f.path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("subject{index:02}"))
        });
        Self {
            id,
            group: f.group,
            source: Source::Folder(f),
        }
    }

    pub fn spec(&self) -> Option<&SubjectSpec> {
        match &self.source {
            Source::Synthetic(s) => Some(s),
            Source::Folder(_) => None,
        }
    }

    pub fn load(&self) -> Result<Recording> {
        match &self.source {
            Source::Synthetic(spec) => {
                let (video, truth) = generate_subject(spec)?;
                Ok(Recording {
                    video,
                    truth: Some(truth),
                    synthetic: true,
                })
            }
            Source::Folder(f) => {
                let video = load_sequence(&f.path, f.fps)?;
                let truth = match &f.reference_csv {
                    None => None,
                    Some(path) => Some(align_reference(&Signal::read_csv(path)?, &video)?),
                };
                Ok(Recording {
                    video,
                    truth,
                    synthetic: false,
                })
            }
        }
    }
}

/// Resamples a contact reference onto the video frame grid.
fn align_reference(reference: &Signal, video: &FrameSequence) -> Result<Signal> {
    let resampled = if reference.fs() == video.fps() {
        reference.clone()
    } else {
        resample_linear(reference, video.fps())?
    };
    if resampled.len() < video.len() {
        return Err(Error::invalid(format!(
            "reference covers {} frames but the video has {}",
            resampled.len(),
            video.len()
        )));
    }
    Signal::new(resampled.samples()[..video.len()].to_vec(), video.fps())
}

pub fn subjects_from(dataset: &DatasetConfig) -> Result<Vec<Subject>> {
    match dataset {
        DatasetConfig::Synthetic(s) => {
            let specs = match &s.subjects {
                Some(list) => list.clone(),
                None => cohort(&s.template, s.count, s.seed),
            };
            for spec in &specs {
                spec.validate()?;
            }
            Ok(specs
                .into_iter()
                .enumerate()
                .map(|(i, spec)| Subject::synthetic(format!("s{i:02}"), spec))
                .collect())
        }
        DatasetConfig::Folders(list) => Ok(list
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, f)| Subject::folder(i, f))
            .collect()),
    }
}

/// How a training label is constructed from a recording.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabelOptions {
    pub source: LabelSource,
    /// Band-pass the camera reference before differentiation.
    pub bandpass: bool,
    /// Extra delay applied to the camera reference through the analytic signal.
    pub phase_deg: f64,
    pub transit_delay_s: f64,
}

impl Default for LabelOptions {
    fn default() -> Self {
        Self {
            source: LabelSource::CameraPos,
            bandpass: true,
            phase_deg: 0.0,
            transit_delay_s: 0.25,
        }
    }
}

/// POS pulse of the whole frame, optionally band-passed.
pub fn camera_pulse(video: &FrameSequence, bandpass: bool) -> Result<Signal> {
    let pulse = extract(&spatial_mean(video)?, &ExtractorParams::default())?;
    if bandpass {
        bandpass_pulse(&pulse)
    } else {
        Ok(pulse)
    }
}

/// Contact reference used for the finger label variants.
pub fn finger_reference(rec: &Recording, transit_delay_s: f64) -> Result<Signal> {
    let truth = rec
        .truth
        .as_ref()
        .ok_or_else(|| Error::invalid("finger labels need a contact reference (reference_csv)"))?;
    if rec.synthetic {
        make_finger_reference(truth, transit_delay_s, &FINGER_HARMONICS)
    } else {
        Ok(truth.clone())
    }
}

/// Mean phase lag of `x` behind `reference` in degrees, `(-180, 180]`,
/// measured on the band-passed analytic signals away from the edges.
pub fn phase_lag_deg(x: &Signal, reference: &Signal) -> Result<f64> {
    if x.len() != reference.len() {
        return Err(Error::invalid(format!(
            "phase comparison of {} and {} samples",
            x.len(),
            reference.len()
        )));
    }
    let zx = analytic_signal(&bandpass_pulse(x)?);
    let zr = analytic_signal(&bandpass_pulse(reference)?);
    let n = x.len();
    let (a, b) = (n / 20, n - n / 20);
    let acc: Complex64 = (a..b).map(|i| zx[i] * zr[i].conj()).sum();
    Ok(-acc.arg().to_degrees())
}

/// Label aligned to the difference frames (length `T - 1`), z-scored.
pub fn make_labels(rec: &Recording, opts: &LabelOptions) -> Result<Signal> {
    let base = match opts.source {
        LabelSource::CameraPos => {
            let pulse = camera_pulse(&rec.video, opts.bandpass)?;
            if opts.phase_deg == 0.0 {
                pulse
            } else {
                hilbert_phase_shift(&pulse, opts.phase_deg)?
            }
        }
        LabelSource::Finger => finger_reference(rec, opts.transit_delay_s)?,
        LabelSource::FingerPhaseCorrected | LabelSource::FingerPhaseCorrectedFiltered => {
            let finger = finger_reference(rec, opts.transit_delay_s)?;
            let lag = phase_lag_deg(&finger, &camera_pulse(&rec.video, true)?)?;
            let aligned = hilbert_phase_shift(&finger, -lag)?;
            if opts.source == LabelSource::FingerPhaseCorrectedFiltered {
                bandpass_pulse(&aligned)?
            } else {
                aligned
            }
        }
    };
    Ok(zscore(&differentiate(&base)?))
}

/// Image-domain chain applied before the network: intensity noise, channel
/// arrangement, resolution loss, rotation, then the frame difference and an
/// optional colour-plane projection.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Preprocess {
    pub noise: Option<NoiseSpec>,
    pub channels: Option<[usize; 3]>,
    pub resolution: Option<usize>,
    pub rotation: Option<u32>,
    pub plane: Option<[[f64; 3]; 2]>,
}

impl Preprocess {
    pub fn input_channels(&self) -> usize {
        if self.plane.is_some() {
            2
        } else {
            3
        }
    }

    pub fn apply(&self, video: &FrameSequence) -> Result<DiffClip> {
        let mut seq = std::borrow::Cow::Borrowed(video);
        if let Some(noise) = &self.noise {
            seq = std::borrow::Cow::Owned(add_intensity_noise(&seq, noise)?);
        }
        if let Some(map) = self.channels {
            seq = std::borrow::Cow::Owned(permute_channels(&seq, map)?);
        }
        if let Some(n) = self.resolution {
            seq = std::borrow::Cow::Owned(resolution_degrade(&seq, n)?);
        }
        if let Some(deg) = self.rotation {
            seq = std::borrow::Cow::Owned(rotate(&seq, deg)?);
        }
        match &self.plane {
            Some(p) => normalized_diff_projected(&seq, p),
            None => normalized_diff(&seq),
        }
    }

    /// Checkpoint metadata needed to rebuild the inference-time chain.
    pub fn metadata(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("preprocess", self.describe())];
        if let Some(c) = self.channels {
            out.push(("channels", c.iter().map(|&i| ['R', 'G', 'B'][i]).collect()));
        }
        let plane = match self.plane {
            None => "none",
            Some(p) if p == POS_PLANE => "pos",
            Some(p) if p == CHROM_PLANE => "chrom",
            Some(_) => "custom",
        };
        out.push(("plane", plane.into()));
        out
    }

    /// Channel arrangement and plane recorded by [`Preprocess::metadata`];
    /// noise, resolution and rotation are test conditions and are not restored.
    pub fn from_metadata(meta: &BTreeMap<String, String>) -> Result<Self> {
        let channels = meta.get("channels").map(|t| channel_map(t)).transpose()?;
        let plane = match meta.get("plane").map(String::as_str) {
            None | Some("none") => None,
            Some("pos") => Some(POS_PLANE),
            Some("chrom") => Some(CHROM_PLANE),
            Some(other) => {
                return Err(Error::invalid(format!(
                    "unknown plane '{other}' in checkpoint metadata"
                )))
            }
        };
        Ok(Self {
            channels,
            plane,
            ..Self::default()
        })
    }

    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if let Some(n) = &self.noise {
            parts.push(format!("noise={:?}:{}", n.kind, n.gain));
        }
        if let Some(c) = self.channels {
            parts.push(format!(
                "channels={}",
                c.iter().map(|&i| ['R', 'G', 'B'][i]).collect::<String>()
            ));
        }
        if let Some(n) = self.resolution {
            parts.push(format!("resolution={n}"));
        }
        if let Some(d) = self.rotation {
            parts.push(format!("rotation={d}"));
        }
        if let Some(p) = &self.plane {
            parts.push(format!("plane={p:?}"));
        }
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join(";")
        }
    }
}

/// `count` evenly spaced indices in `0..len`, shifted by `offset` of a step;
/// every index when `count` is absent or not smaller than `len`.
pub fn frame_selection(len: usize, count: Option<usize>, offset: f64) -> Vec<usize> {
    match count {
        Some(m) if m < len => (0..m)
            .map(|i| (((i as f64 + offset) * len as f64 / m as f64).floor() as usize).min(len - 1))
            .collect(),
        _ => (0..len).collect(),
    }
}

/// Pairs difference frames with their labels. `frames` picks which pairs to
/// keep; every pair is tagged `(clip_index, frame)`.
pub fn build_training_set(
    clip: &DiffClip,
    labels: &Signal,
    frames: &[usize],
    clip_index: usize,
) -> Result<Dataset> {
    if clip.len() != labels.len() {
        return Err(Error::invalid(format!(
            "clip has {} difference frames but the label has {} samples",
            clip.len(),
            labels.len()
        )));
    }
    let mut data = Dataset::new(clip.shape());
    for &t in frames {
        if t >= clip.len() {
            return Err(Error::invalid(format!(
                "frame {t} outside a clip of {}",
                clip.len()
            )));
        }
        data.push(
            clip.frame_f32(t).to_vec(),
            labels.samples()[t],
            (clip_index, t),
        )?;
    }
    Ok(data)
}

/// Rate trace the predictions are scored against, aligned to difference
/// frame `k` covering video frames `k` and `k + 1`: the contact reference
/// when known, else the POS pulse.
pub fn reference_rates(rec: &Recording) -> Result<RateTrace> {
    let pulse = match &rec.truth {
        Some(t) => t.clone(),
        None => camera_pulse(&rec.video, true)?,
    };
    rate_trace(&pulse.with_samples(pulse.samples()[1..].to_vec())?)
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub rmse_bpm: f64,
    pub accuracy_pct: f64,
    pub predicted: Signal,
    pub rates: RateTrace,
}

/// Network output, band-passed and turned into a rate trace, scored
/// against `reference`.
pub fn evaluate(net: &Network, clip: &DiffClip, reference: &RateTrace) -> Result<Evaluation> {
    let predicted = bandpass_pulse(&predict_clip(net, clip)?)?;
    score(predicted, reference)
}

/// Scores an already band-passed pulse signal.
pub fn score(predicted: Signal, reference: &RateTrace) -> Result<Evaluation> {
    let rates = rate_trace(&predicted)?;
    Ok(Evaluation {
        rmse_bpm: rmse(&rates, reference)?,
        accuracy_pct: accuracy(&rates, reference, ACCURACY_THRESHOLD_BPM)?,
        predicted,
        rates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnkit::NetworkConfig;

    fn small(seconds: f64) -> Subject {
        Subject::synthetic(
            "t",
            SubjectSpec {
                duration_s: seconds,
                frame_side: 8,
                hr_start_bpm: 66.0,
                hr_end_bpm: 74.0,
                ..SubjectSpec::default()
            },
        )
    }

    #[test]
    fn labels_align_with_differences() {
        let rec = small(20.0).load().unwrap();
        let clip = normalized_diff(&rec.video).unwrap();
        for source in LabelSource::ALL {
            let l = make_labels(
                &rec,
                &LabelOptions {
                    source,
                    ..LabelOptions::default()
                },
            )
            .unwrap();
            assert_eq!(l.len(), clip.len(), "{source:?}");
            assert!(l.mean().abs() < 1e-9 && (l.std() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn camera_label_tracks_truth() {
        let rec = small(30.0).load().unwrap();
        let label = make_labels(&rec, &LabelOptions::default()).unwrap();
        let truth = zscore(&differentiate(rec.truth.as_ref().unwrap()).unwrap());
        // the reference is oriented against the green intensity, and the
        // generator's pulse brightens the skin
        let corr = label.correlation(&truth).unwrap();
        assert!(corr < -0.9, "{corr}");
    }

    #[test]
    fn gain_scaled_video_gives_identical_labels() {
        let rec = small(20.0).load().unwrap();
        let scaled = Recording {
            video: rec.video.map_frames(|f| f.map(|v| 1.7 * v)).unwrap(),
            ..rec.clone()
        };
        let a = make_labels(&rec, &LabelOptions::default()).unwrap();
        let b = make_labels(&scaled, &LabelOptions::default()).unwrap();
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn phase_correction_recovers_transit_delay() {
        let rec = small(30.0).load().unwrap();
        let finger = finger_reference(&rec, 0.25).unwrap();
        let cam = camera_pulse(&rec.video, true).unwrap();
        let lag = phase_lag_deg(&finger, &cam).unwrap();
        // transit delay at 70 bpm is 105 degrees; the camera pulse is also
        // inverted relative to the generator pulse
        let expected = 105.0 - 180.0;
        assert!((lag - expected).abs() < 6.0, "{lag}");
        let x =
            Signal::from_fn(600, 20.0, |t| (2.0 * std::f64::consts::PI * 1.1 * t).sin()).unwrap();
        let shifted = hilbert_phase_shift(&x, 40.0).unwrap();
        assert!((phase_lag_deg(&shifted, &x).unwrap() - 40.0).abs() < 0.5);
    }

    #[test]
    fn training_pairs_keep_their_tags() {
        let rec = small(6.0).load().unwrap();
        let clip = normalized_diff(&rec.video).unwrap();
        let labels = make_labels(&rec, &LabelOptions::default()).unwrap();
        let frames = frame_selection(clip.len(), Some(10), 0.0);
        let data = build_training_set(&clip, &labels, &frames, 4).unwrap();
        assert_eq!(data.len(), 10);
        for i in 0..data.len() {
            let (c, t) = data.tags[i];
            assert_eq!(c, 4);
            assert_eq!(data.labels[i], labels.samples()[t]);
            assert_eq!(data.inputs[i].as_slice(), clip.frame_f32(t));
        }
        let short = Signal::new(vec![0.0; clip.len() - 1], 20.0).unwrap();
        let err = build_training_set(&clip, &short, &frames, 0).unwrap_err();
        assert!(err.to_string().contains(&format!("{}", clip.len())));
    }

    #[test]
    fn selection_cases() {
        assert_eq!(frame_selection(5, None, 0.0), vec![0, 1, 2, 3, 4]);
        assert_eq!(frame_selection(10, Some(5), 0.0), vec![0, 2, 4, 6, 8]);
        assert_eq!(frame_selection(10, Some(5), 0.5), vec![1, 3, 5, 7, 9]);
        assert_eq!(frame_selection(3, Some(5), 0.0), vec![0, 1, 2]);
    }

    #[test]
    fn preprocess_chain() {
        let rec = small(3.0).load().unwrap();
        let pre = Preprocess {
            plane: Some(POS_PLANE),
            ..Preprocess::default()
        };
        assert_eq!(pre.apply(&rec.video).unwrap().channels(), 2);
        assert_eq!(pre.input_channels(), 2);
        let deg = Preprocess {
            resolution: Some(2),
            rotation: Some(90),
            channels: Some([2, 1, 0]),
            ..Preprocess::default()
        };
        assert_eq!(deg.apply(&rec.video).unwrap().shape(), [8, 8, 3]);
        assert!(deg.describe().contains("channels=BGR"));
        assert_eq!(Preprocess::default().describe(), "none");
        let meta: BTreeMap<String, String> = deg
            .metadata()
            .into_iter()
            .map(|(k, v)| (k.into(), v))
            .collect();
        assert_eq!(
            Preprocess::from_metadata(&meta).unwrap(),
            Preprocess {
                channels: Some([2, 1, 0]),
                ..Preprocess::default()
            }
        );
        let meta: BTreeMap<String, String> = pre
            .metadata()
            .into_iter()
            .map(|(k, v)| (k.into(), v))
            .collect();
        assert_eq!(Preprocess::from_metadata(&meta).unwrap(), pre);
    }

    #[test]
    fn reference_against_itself() {
        let rec = small(20.0).load().unwrap();
        let reference = reference_rates(&rec).unwrap();
        let truth = rec.truth.clone().unwrap();
        let aligned = truth.with_samples(truth.samples()[1..].to_vec()).unwrap();
        let e = score(aligned, &reference).unwrap();
        assert_eq!(e.rmse_bpm, 0.0);
        assert_eq!(e.accuracy_pct, 100.0);
    }

    #[test]
    fn evaluate_matches_manual_composition() {
        let spec = SubjectSpec {
            duration_s: 16.0,
            frame_side: 32,
            ..SubjectSpec::default()
        };
        let rec = Subject::synthetic("t", spec).load().unwrap();
        let clip = normalized_diff(&rec.video).unwrap();
        let cfg = NetworkConfig {
            input_side: 32,
            conv_channels: vec![2; 10],
            fc_widths: vec![4, 1],
            ..NetworkConfig::tiny()
        };
        let net = Network::init(cfg, 5).unwrap();
        let reference = reference_rates(&rec).unwrap();
        let e = evaluate(&net, &clip, &reference).unwrap();
        let manual: Vec<f64> = (0..clip.len())
            .map(|t| net.predict(&clip.frame(t)).unwrap())
            .collect();
        let manual = bandpass_pulse(&Signal::new(manual, 20.0).unwrap()).unwrap();
        let rates = rate_trace(&manual).unwrap();
        assert_eq!(e.rates, rates);
        assert_eq!(e.rmse_bpm, rmse(&rates, &reference).unwrap());
        let again = evaluate(&net, &clip, &reference).unwrap();
        assert_eq!(again.rmse_bpm, e.rmse_bpm);
    }
}
