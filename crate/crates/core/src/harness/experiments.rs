use std::path::Path;

use log::info;
use rayon::prelude::*;

use super::config::{Experiment, ExperimentConfig, LabelSource, SplitMode};
use super::pipeline::{
    build_training_set, camera_pulse, evaluate, finger_reference, frame_selection, make_labels,
    phase_lag_deg, reference_rates, subjects_from, LabelOptions, Preprocess, Subject,
};
use super::report::{ReportRow, ReportTable};
use super::split::{group_kfold_split, kfold_split, Fold};
use crate::error::{Error, Result};
use crate::frames::{CHROM_PLANE, POS_PLANE};
use crate::nnkit::{train, Checkpoint, Dataset, Network, NetworkConfig, TrainOptions, TrainReport};
use crate::synth::{NoiseKind, NoiseSpec};

/// One source of training pairs: every training subject is passed through
/// `pre`, labelled with `labels`, and sampled at `offset` of a frame step.
#[derive(Clone, Debug)]
pub struct TrainPart {
    pub pre: Preprocess,
    pub labels: LabelOptions,
    /// Fraction of the per-subject frame budget this part receives.
    pub share: f64,
    pub offset: f64,
    /// Seeds intensity noise per subject when `pre.noise` is Gaussian.
    pub noise_per_subject: bool,
}

impl TrainPart {
    fn whole(pre: Preprocess, labels: LabelOptions) -> Self {
        Self {
            pre,
            labels,
            share: 1.0,
            offset: 0.0,
            noise_per_subject: false,
        }
    }
}

/// A network trained once per fold and scored under several test chains.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub name: String,
    pub parts: Vec<TrainPart>,
    /// `(variant name, test preprocessing)`.
    pub tests: Vec<(String, Preprocess)>,
}

impl ModelSpec {
    fn input_channels(&self) -> usize {
        self.parts[0].pre.input_channels()
    }
}

/// Cross-validation folds for the configured split mode.
pub fn folds_for(cfg: &ExperimentConfig, subjects: &[Subject]) -> Result<Vec<Fold>> {
    let groups: Option<Vec<usize>> = subjects.iter().map(|s| s.group).collect();
    match (cfg.split, groups) {
        (SplitMode::Group, None) => Err(Error::invalid(
            "group split requested but some subjects have no group",
        )),
        (SplitMode::Group | SplitMode::Auto, Some(g)) => group_kfold_split(&g, cfg.folds),
        _ => kfold_split(subjects.len(), cfg.folds, cfg.seed),
    }
}

fn train_options(cfg: &ExperimentConfig, fold: usize) -> TrainOptions {
    TrainOptions {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: crate::mix_seed(cfg.seed, 0x7EA1, fold as u64),
        patience: cfg.patience,
        min_delta: cfg.min_delta,
        ..TrainOptions::default()
    }
}

fn init_seed(cfg: &ExperimentConfig, fold: usize) -> u64 {
    crate::mix_seed(cfg.seed, 0x1417, fold as u64)
}

/// Training pairs of one model for the given subjects.
pub fn assemble(
    cfg: &ExperimentConfig,
    model: &ModelSpec,
    subjects: &[&Subject],
    seed: u64,
) -> Result<Dataset> {
    let mut data: Option<Dataset> = None;
    for (ci, subject) in subjects.iter().enumerate() {
        let rec = subject.load()?;
        for (pi, part) in model.parts.iter().enumerate() {
            let labels = make_labels(&rec, &part.labels)?;
            let mut pre = part.pre.clone();
            if let (Some(noise), true) = (pre.noise.as_mut(), part.noise_per_subject) {
                noise.seed = crate::mix_seed(seed, 0x5EED + pi as u64, ci as u64);
            }
            let clip = pre.apply(&rec.video)?;
            let budget = cfg.train_frames_per_subject.unwrap_or(clip.len()) as f64 * part.share;
            let count = (budget.round() as usize).max(1);
            let frames = frame_selection(clip.len(), Some(count), part.offset);
            let set = build_training_set(&clip, &labels, &frames, ci)?;
            match data.as_mut() {
                None => data = Some(set),
                Some(d) => d.extend(set)?,
            }
        }
    }
    data.ok_or_else(|| Error::invalid("no training subjects"))
}

/// Trains `model` on `subjects` with the fold's seeds.
pub fn train_model(
    cfg: &ExperimentConfig,
    model: &ModelSpec,
    subjects: &[&Subject],
    fold: usize,
) -> Result<(Network, TrainReport)> {
    let data = assemble(cfg, model, subjects, init_seed(cfg, fold))?;
    let net_cfg = NetworkConfig::preset(cfg.net_preset).with_input_channels(model.input_channels());
    let net_cfg = NetworkConfig {
        input_side: data.shape[0],
        ..net_cfg
    };
    if data.shape[0] != data.shape[1] {
        return Err(Error::invalid(format!(
            "frames must be square, got {:?}",
            data.shape
        )));
    }
    let mut net = Network::init(net_cfg, init_seed(cfg, fold))?;
    let report = train(&mut net, &data, &train_options(cfg, fold))?;
    info!(
        "{} fold {fold}: {} pairs, losses {:?}",
        model.name,
        data.len(),
        report
            .epoch_losses
            .iter()
            .map(|l| format!("{l:.4}"))
            .collect::<Vec<_>>()
    );
    Ok((net, report))
}

pub fn checkpoint_name(experiment: Experiment, model: &str, fold: usize) -> String {
    let clean: String = model
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    format!("{experiment}_{clean}_fold{fold}.ckpt").to_lowercase()
}

/// Trains `model` on fold `f` and scores every test chain on the fold's
/// held-out subjects, optionally saving the checkpoint.
pub fn run_job(
    cfg: &ExperimentConfig,
    model: &ModelSpec,
    subjects: &[Subject],
    folds: &[Fold],
    f: usize,
    checkpoints: Option<&Path>,
) -> Result<Vec<ReportRow>> {
    let fold = folds
        .get(f)
        .ok_or_else(|| Error::invalid(format!("fold {f} of {}", folds.len())))?;
    let train_set: Vec<&Subject> = fold.train.iter().map(|&i| &subjects[i]).collect();
    let (net, _) = train_model(cfg, model, &train_set, f)?;
    if let Some(dir) = checkpoints {
        let mut ckpt = Checkpoint::from_network(&net, init_seed(cfg, f))
            .with_metadata("experiment", cfg.experiment.to_string())
            .with_metadata("model", model.name.clone())
            .with_metadata("fold", f.to_string())
            .with_metadata("label_source", model.parts[0].labels.source.name());
        for (k, v) in model.parts[0].pre.metadata() {
            ckpt = ckpt.with_metadata(k, v);
        }
        ckpt.save(&dir.join(checkpoint_name(cfg.experiment, &model.name, f)))?;
    }
    let mut rows = Vec::new();
    for &si in &fold.test {
        let subject = &subjects[si];
        let rec = subject.load()?;
        let reference = reference_rates(&rec)?;
        for (variant, pre) in &model.tests {
            let clip = pre.apply(&rec.video)?;
            let e = evaluate(&net, &clip, &reference)?;
            rows.push(ReportRow {
                experiment: cfg.experiment.to_string(),
                variant: variant.clone(),
                fold: f,
                subject: subject.id.clone(),
                rmse_bpm: e.rmse_bpm,
                accuracy_pct: e.accuracy_pct,
            });
        }
    }
    Ok(rows)
}

/// Trains every model on every fold and scores each test chain on the
/// fold's held-out subjects. Jobs run in parallel; rows are merged in
/// `(variant, fold, subject)` order.
pub fn run_grid(
    cfg: &ExperimentConfig,
    models: &[ModelSpec],
    checkpoints: Option<&Path>,
) -> Result<ReportTable> {
    let subjects = subjects_from(&cfg.dataset)?;
    let folds = folds_for(cfg, &subjects)?;
    let jobs: Vec<(usize, &ModelSpec)> = (0..folds.len())
        .flat_map(|f| {
            models
                .iter()
                .filter(|m| !m.tests.is_empty())
                .map(move |m| (f, m))
        })
        .collect();
    if let Some(dir) = checkpoints {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let results: Vec<Result<Vec<ReportRow>>> = jobs
        .par_iter()
        .map(|&(f, model)| run_job(cfg, model, &subjects, &folds, f, checkpoints))
        .collect();
    let mut table = ReportTable::default();
    for r in results {
        table.rows.extend(r?);
    }
    table.sort();
    let reference = if subjects.iter().all(|s| s.spec().is_some()) {
        "reference rates: generator ground-truth pulse"
    } else {
        "reference rates: contact reference when provided, else POS on the full frame"
    };
    table.notes.push(reference.to_string());
    Ok(table)
}

fn base_labels(cfg: &ExperimentConfig) -> LabelOptions {
    LabelOptions {
        source: cfg.label_source,
        bandpass: cfg.label_bandpass,
        phase_deg: 0.0,
        transit_delay_s: cfg.transit_delay_s,
    }
}

fn keep_wanted(cfg: &ExperimentConfig, mut models: Vec<ModelSpec>) -> Vec<ModelSpec> {
    for m in &mut models {
        m.tests.retain(|(v, _)| cfg.wants(v));
    }
    models.retain(|m| !m.tests.is_empty());
    models
}

fn channels(map: [usize; 3]) -> Preprocess {
    Preprocess {
        channels: Some(map),
        ..Preprocess::default()
    }
}

/// Channel-order study.
pub fn e1_models(cfg: &ExperimentConfig) -> Vec<ModelSpec> {
    let labels = base_labels(cfg);
    let mut models = vec![ModelSpec {
        name: "RGB".into(),
        parts: vec![TrainPart::whole(Preprocess::default(), labels)],
        tests: vec![
            ("RGB".into(), Preprocess::default()),
            ("BGR".into(), channels([2, 1, 0])),
            ("RBG".into(), channels([0, 2, 1])),
        ],
    }];
    for (name, c) in [("RRR", 0), ("GGG", 1), ("BBB", 2)] {
        let pre = channels([c; 3]);
        models.push(ModelSpec {
            name: name.into(),
            parts: vec![TrainPart::whole(pre.clone(), labels)],
            tests: vec![(name.into(), pre)],
        });
    }
    keep_wanted(cfg, models)
}

pub fn phase_variant(deg: f64) -> String {
    format!("phase_{:03}", deg.round() as i64)
}

/// Label phase and label source study.
pub fn e2_models(cfg: &ExperimentConfig) -> Vec<ModelSpec> {
    let labels = LabelOptions {
        source: LabelSource::CameraPos,
        ..base_labels(cfg)
    };
    let mut models = Vec::new();
    for &deg in &cfg.phases_deg {
        let mut tests = vec![(phase_variant(deg), Preprocess::default())];
        if deg == 0.0 {
            // identical labels and seeds: the camera-label baseline is this network
            tests.push((LabelSource::CameraPos.name().into(), Preprocess::default()));
        }
        models.push(ModelSpec {
            name: phase_variant(deg),
            parts: vec![TrainPart::whole(
                Preprocess::default(),
                LabelOptions {
                    phase_deg: deg,
                    ..labels
                },
            )],
            tests,
        });
    }
    for source in LabelSource::ALL {
        if source == LabelSource::CameraPos && cfg.phases_deg.contains(&0.0) {
            continue;
        }
        models.push(ModelSpec {
            name: source.name().into(),
            parts: vec![TrainPart::whole(
                Preprocess::default(),
                LabelOptions { source, ..labels },
            )],
            tests: vec![(source.name().into(), Preprocess::default())],
        });
    }
    keep_wanted(cfg, models)
}

pub fn resolution_variant(n: usize) -> String {
    format!("res_{n:02}")
}

pub fn rotation_variant(deg: u32) -> String {
    format!("rot_{deg:03}")
}

/// Resolution and rotation study. `side` is the frame side of the data.
pub fn e3_models(cfg: &ExperimentConfig, side: usize) -> Vec<ModelSpec> {
    let labels = base_labels(cfg);
    let mut models: Vec<ModelSpec> = Vec::new();
    let mut resolutions = cfg.resolutions.clone();
    if !cfg.rotations.is_empty() && !resolutions.contains(&side) {
        resolutions.push(side);
    }
    for n in resolutions {
        let pre = Preprocess {
            resolution: (n != side).then_some(n),
            ..Preprocess::default()
        };
        let mut tests = vec![(resolution_variant(n), pre.clone())];
        if n == side {
            for &deg in &cfg.rotations {
                tests.push((
                    rotation_variant(deg),
                    Preprocess {
                        rotation: Some(deg),
                        ..Preprocess::default()
                    },
                ));
            }
        }
        models.push(ModelSpec {
            name: resolution_variant(n),
            parts: vec![TrainPart::whole(pre, labels)],
            tests,
        });
    }
    keep_wanted(cfg, models)
}

pub const E4_MODELS: [&str; 4] = ["CNN", "CNN+Noise", "CNN+POS", "CNN+CHROM"];

pub fn e4_variant(model: &str, noisy: bool) -> String {
    format!("{model}@{}", if noisy { "periodic" } else { "clean" })
}

/// Intensity-noise robustness study.
pub fn e4_models(cfg: &ExperimentConfig) -> Vec<ModelSpec> {
    let labels = base_labels(cfg);
    let periodic = NoiseSpec {
        kind: NoiseKind::Periodic,
        gain: cfg.test_noise_gain,
        freq_hz: cfg.test_noise_hz,
        seed: 0,
    };
    let gaussian = NoiseSpec::gaussian(cfg.train_noise_gain, 0);
    let tests_for = |name: &str, plane: Option<[[f64; 3]; 2]>| {
        vec![
            (
                e4_variant(name, true),
                Preprocess {
                    noise: Some(periodic),
                    plane,
                    ..Preprocess::default()
                },
            ),
            (
                e4_variant(name, false),
                Preprocess {
                    plane,
                    ..Preprocess::default()
                },
            ),
        ]
    };
    let models = vec![
        ModelSpec {
            name: "CNN".into(),
            parts: vec![TrainPart::whole(Preprocess::default(), labels)],
            tests: tests_for("CNN", None),
        },
        ModelSpec {
            name: "CNN+Noise".into(),
            parts: vec![
                TrainPart {
                    share: 0.5,
                    ..TrainPart::whole(Preprocess::default(), labels)
                },
                TrainPart {
                    pre: Preprocess {
                        noise: Some(gaussian),
                        ..Preprocess::default()
                    },
                    labels,
                    share: 0.5,
                    offset: 0.5,
                    noise_per_subject: true,
                },
            ],
            tests: tests_for("CNN+Noise", None),
        },
        ModelSpec {
            name: "CNN+POS".into(),
            parts: vec![TrainPart::whole(
                Preprocess {
                    plane: Some(POS_PLANE),
                    ..Preprocess::default()
                },
                labels,
            )],
            tests: tests_for("CNN+POS", Some(POS_PLANE)),
        },
        ModelSpec {
            name: "CNN+CHROM".into(),
            parts: vec![TrainPart::whole(
                Preprocess {
                    plane: Some(CHROM_PLANE),
                    ..Preprocess::default()
                },
                labels,
            )],
            tests: tests_for("CNN+CHROM", Some(CHROM_PLANE)),
        },
    ];
    keep_wanted(cfg, models)
}

pub fn frame_side(cfg: &ExperimentConfig) -> Result<usize> {
    let subjects = subjects_from(&cfg.dataset)?;
    let first = subjects
        .first()
        .ok_or_else(|| Error::invalid("empty dataset"))?;
    match first.spec() {
        Some(spec) => Ok(spec.frame_side),
        None => Ok(first.load()?.video.dims().0),
    }
}

fn require(cfg: &ExperimentConfig, expected: Experiment) -> Result<()> {
    if cfg.experiment != expected {
        return Err(Error::invalid(format!(
            "config is for {}, not {expected}",
            cfg.experiment
        )));
    }
    Ok(())
}

pub fn run_e1(cfg: &ExperimentConfig, checkpoints: Option<&Path>) -> Result<ReportTable> {
    require(cfg, Experiment::E1)?;
    run_grid(cfg, &e1_models(cfg), checkpoints)
}

pub fn run_e2(cfg: &ExperimentConfig, checkpoints: Option<&Path>) -> Result<ReportTable> {
    require(cfg, Experiment::E2)?;
    let mut table = run_grid(cfg, &e2_models(cfg), checkpoints)?;
    // document the phase offset the transit delay induces per subject
    for subject in subjects_from(&cfg.dataset)? {
        let rec = subject.load()?;
        let Some(spec) = subject.spec() else { continue };
        let induced = 360.0 * cfg.transit_delay_s * spec.mean_hr_bpm() / 60.0;
        let finger = finger_reference(&rec, cfg.transit_delay_s)?;
        let measured = phase_lag_deg(&finger, &camera_pulse(&rec.video, true)?)?;
        table.notes.push(format!(
            "{}: transit delay {:.3} s at {:.1} bpm induces {:.1} deg; measured lag vs camera label {:.1} deg",
            subject.id,
            cfg.transit_delay_s,
            spec.mean_hr_bpm(),
            induced,
            measured
        ));
    }
    Ok(table)
}

pub fn run_e3(cfg: &ExperimentConfig, checkpoints: Option<&Path>) -> Result<ReportTable> {
    require(cfg, Experiment::E3)?;
    let side = frame_side(cfg)?;
    if let Some(&bad) = cfg.resolutions.iter().find(|&&n| n > side) {
        return Err(Error::invalid(format!(
            "resolution {bad} exceeds the {side}-pixel frames"
        )));
    }
    run_grid(cfg, &e3_models(cfg, side), checkpoints)
}

pub fn run_e4(cfg: &ExperimentConfig, checkpoints: Option<&Path>) -> Result<ReportTable> {
    require(cfg, Experiment::E4)?;
    run_grid(cfg, &e4_models(cfg), checkpoints)
}

/// Runs the configured experiment. With `out`, writes `report.csv`,
/// `summary.csv`, `notes.txt`, `config.json` and per-fold checkpoints.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ReportTable> {
    cfg.validate()?;
    let ckpt = out.map(|o| o.join("checkpoints"));
    let ckpt = ckpt.as_deref();
    let table = match cfg.experiment {
        Experiment::E1 => run_e1(cfg, ckpt)?,
        Experiment::E2 => run_e2(cfg, ckpt)?,
        Experiment::E3 => run_e3(cfg, ckpt)?,
        Experiment::E4 => run_e4(cfg, ckpt)?,
    };
    if let Some(dir) = out {
        table.write(dir)?;
        crate::io::write_atomic(&dir.join("config.json"), cfg.to_json().as_bytes())?;
    }
    Ok(table)
}
