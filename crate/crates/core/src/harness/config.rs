use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnkit::Preset;
use crate::synth::SubjectSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "UPPERCASE")]
pub enum Experiment {
    E1,
    E2,
    E3,
    E4,
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Where training labels come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    /// POS applied to the camera video itself.
    CameraPos,
    /// Delayed, harmonic-rich contact reference.
    Finger,
    /// Finger reference re-aligned to the camera pulse phase.
    FingerPhaseCorrected,
    /// As above, then band-passed.
    FingerPhaseCorrectedFiltered,
}

impl LabelSource {
    pub const ALL: [LabelSource; 4] = [
        LabelSource::CameraPos,
        LabelSource::Finger,
        LabelSource::FingerPhaseCorrected,
        LabelSource::FingerPhaseCorrectedFiltered,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LabelSource::CameraPos => "camera_pos",
            LabelSource::Finger => "finger",
            LabelSource::FingerPhaseCorrected => "finger_phase_corrected",
            LabelSource::FingerPhaseCorrectedFiltered => "finger_phase_corrected_filtered",
        }
    }
}

/// A generated cohort: either explicit subjects or `count` subjects drawn
/// from `template`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticDataset {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub template: SubjectSpec,
    /// Overrides `count`/`template` when present.
    #[serde(default)]
    pub subjects: Option<Vec<SubjectSpec>>,
}

fn default_count() -> usize {
    10
}

impl Default for SyntheticDataset {
    fn default() -> Self {
        Self {
            count: default_count(),
            seed: 0,
            template: SubjectSpec::default(),
            subjects: None,
        }
    }
}

/// One recorded subject: a directory of frames with an optional oximeter CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FolderSubject {
    pub path: PathBuf,
    pub fps: f64,
    #[serde(default)]
    pub id: Option<String>,
    /// Group index for contiguous group splitting.
    #[serde(default)]
    pub group: Option<usize>,
    /// Contact-PPG reference in the `t_seconds,value` format.
    #[serde(default)]
    pub reference_csv: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Synthetic(SyntheticDataset),
    Folders(Vec<FolderSubject>),
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Synthetic(SyntheticDataset::default())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Group split when every subject has a group, else seeded.
    #[default]
    Auto,
    Group,
    Subject,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dataset: DatasetConfig,
    pub folds: usize,
    pub split: SplitMode,
    pub net_preset: Preset,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Restrict to these variant names; all when absent.
    pub variants: Option<Vec<String>>,
    pub label_source: LabelSource,
    /// Band-pass the camera reference before differentiation.
    pub label_bandpass: bool,
    /// Frames per training subject, evenly spaced; all when absent.
    pub train_frames_per_subject: Option<usize>,
    pub patience: Option<usize>,
    pub min_delta: f64,
    pub transit_delay_s: f64,
    pub phases_deg: Vec<f64>,
    pub resolutions: Vec<usize>,
    pub rotations: Vec<u32>,
    /// Gaussian intensity-noise gain for the noise-augmented training copies.
    pub train_noise_gain: f64,
    /// Periodic intensity-noise gain of the noisy test clips.
    pub test_noise_gain: f64,
    pub test_noise_hz: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::E1,
            dataset: DatasetConfig::default(),
            folds: 5,
            split: SplitMode::Auto,
            net_preset: Preset::Tiny,
            epochs: 8,
            batch_size: 32,
            seed: 0,
            variants: None,
            label_source: LabelSource::CameraPos,
            label_bandpass: true,
            train_frames_per_subject: None,
            patience: Some(2),
            min_delta: 1e-4,
            transit_delay_s: 0.25,
            phases_deg: vec![0.0, 30.0, 60.0, 90.0, 120.0, 150.0, 180.0],
            resolutions: vec![1, 4, 8, 20, 30, 40, 50, 64],
            rotations: vec![90, 180],
            train_noise_gain: 0.05,
            test_noise_gain: 0.05,
            test_noise_hz: crate::synth::PERIODIC_NOISE_HZ,
        }
    }
}

impl ExperimentConfig {
    pub fn for_experiment(experiment: Experiment) -> Self {
        Self {
            experiment,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| {
            Err(Error::Config {
                line: 0,
                column: 0,
                message: m,
            })
        };
        if self.folds < 2 {
            return bad(format!("folds must be >= 2, got {}", self.folds));
        }
        let n = match &self.dataset {
            DatasetConfig::Synthetic(s) => s.subjects.as_ref().map_or(s.count, Vec::len),
            DatasetConfig::Folders(f) => f.len(),
        };
        if n < self.folds {
            return bad(format!("{n} subjects cannot fill {} folds", self.folds));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.train_frames_per_subject == Some(0) {
            return bad("train_frames_per_subject must be >= 1".into());
        }
        if !(self.transit_delay_s >= 0.0) {
            return bad("transit_delay_s must be >= 0".into());
        }
        if self.rotations.iter().any(|r| ![90, 180].contains(r)) {
            return bad(format!("rotations {:?} must be 90 or 180", self.rotations));
        }
        if self.resolutions.contains(&0) {
            return bad("resolutions must be >= 1".into());
        }
        if !(self.train_noise_gain >= 0.0 && self.test_noise_gain >= 0.0) {
            return bad("noise gains must be >= 0".into());
        }
        Ok(())
    }

    pub fn wants(&self, variant: &str) -> bool {
        self.variants
            .as_ref()
            .is_none_or(|v| v.iter().any(|x| x == variant))
    }
}
