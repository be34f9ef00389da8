//! Command-line front end. Every subcommand is a plain function so the
//! binary stays a thin shim and tests can call the commands directly.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extractors::{extract, ExtractorParams, Method};
use crate::frames::{crop, load_sequence, save_sequence_with, spatial_mean, RoiBox};
use crate::harness::{
    build_training_set, frame_selection, make_labels, run_experiment, score, ExperimentConfig,
    FolderSubject, LabelOptions, LabelSource, Preprocess, Subject,
};
use crate::io::write_atomic_str;
use crate::nnkit::{
    first_layer_channel_sums, predict_clip, train, Checkpoint, Network, NetworkConfig, Preset,
    TrainOptions,
};
use crate::sigproc::{accuracy, bandpass_pulse, rate_trace, rmse, Signal, ACCURACY_THRESHOLD_BPM};
use crate::synth::{generate_subject, SubjectSpec};

#[derive(Debug, Parser)]
#[command(name = "rppg", version, about = "Remote photoplethysmography toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for generation, initialisation and shuffling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 1 gives the reference bit-exact run.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// Output directory.
    #[arg(long, global = true, default_value = "rppg-out")]
    pub out: PathBuf,
    /// JSON configuration: a subject spec for `synth`, an experiment config
    /// for `experiment`, training options for `train`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic subject: frames/, ground_truth.csv, spec.json.
    Synth(SynthArgs),
    /// Knowledge-based pulse extraction: signal.csv and rates.csv.
    Extract(ExtractArgs),
    /// Train a network on frame folders: model.ckpt.
    Train(TrainArgs),
    /// Run a checkpoint on a frame folder: signal.csv and rates.csv.
    Infer(InferArgs),
    /// Compare a pulse signal against a reference: metrics.csv.
    Eval(EvalArgs),
    /// Run E1 to E4 from a JSON config: report.csv, summary.csv, checkpoints.
    Experiment,
    /// First-layer channel weight sums of a checkpoint: kernel_sums.csv.
    AnalyzeKernels(KernelArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub fps: Option<f64>,
    #[arg(long)]
    pub side: Option<usize>,
    #[arg(long)]
    pub hr_start: Option<f64>,
    #[arg(long)]
    pub hr_end: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Directory of PNG/BMP frames.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 20.0)]
    pub fps: f64,
    #[arg(long, value_enum, default_value_t = Method::Pos)]
    pub method: Method,
    /// Region of interest `x,y,w,h`; the full frame when omitted.
    #[arg(long)]
    pub roi: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Frame directories, one per clip.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long, default_value_t = 20.0)]
    pub fps: f64,
    /// Contact references (`t_seconds,value`), one per input, for finger labels.
    #[arg(long, num_args = 1..)]
    pub reference: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = LabelArg::CameraPos)]
    pub label_source: LabelArg,
    /// Channel arrangement fed to the network, e.g. `RGB` or `GGG`.
    #[arg(long, default_value = "RGB")]
    pub channels: String,
    #[arg(long, value_enum, default_value_t = PlaneArg::None)]
    pub plane: PlaneArg,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Evenly spaced training frames per clip; all when omitted.
    #[arg(long)]
    pub frames_per_clip: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum LabelArg {
    CameraPos,
    Finger,
    FingerPhaseCorrected,
    FingerPhaseCorrectedFiltered,
}

impl From<LabelArg> for LabelSource {
    fn from(a: LabelArg) -> Self {
        match a {
            LabelArg::CameraPos => LabelSource::CameraPos,
            LabelArg::Finger => LabelSource::Finger,
            LabelArg::FingerPhaseCorrected => LabelSource::FingerPhaseCorrected,
            LabelArg::FingerPhaseCorrectedFiltered => LabelSource::FingerPhaseCorrectedFiltered,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PlaneArg {
    None,
    Pos,
    Chrom,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 20.0)]
    pub fps: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Pulse signal CSV, e.g. from `infer`.
    #[arg(long)]
    pub predicted: PathBuf,
    /// Reference pulse CSV, e.g. `ground_truth.csv`.
    #[arg(long)]
    pub reference: PathBuf,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
}

/// Parses `args`, runs the command and returns the process exit code,
/// printing `error[category]: message` on failure.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!(
                "error[{}]: {}",
                e.category(),
                e.to_string().replace('\n', " ")
            );
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(Error::invalid("--threads must be >= 1"));
        }
        // a second build in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let g = &cli.global;
    match &cli.command {
        Command::Synth(a) => cmd_synth(g, a),
        Command::Extract(a) => cmd_extract(g, a),
        Command::Train(a) => cmd_train(g, a),
        Command::Infer(a) => cmd_infer(g, a),
        Command::Eval(a) => cmd_eval(g, a),
        Command::Experiment => cmd_experiment(g),
        Command::AnalyzeKernels(a) => cmd_analyze_kernels(g, a),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn cmd_synth(g: &GlobalArgs, a: &SynthArgs) -> Result<()> {
    let mut spec: SubjectSpec = match &g.config {
        Some(p) => read_json(p)?,
        None => SubjectSpec::default(),
    };
    if let Some(s) = g.seed {
        spec.seed = s;
    }
    if let Some(v) = a.duration {
        spec.duration_s = v;
    }
    if let Some(v) = a.fps {
        spec.fps = v;
    }
    if let Some(v) = a.side {
        spec.frame_side = v;
    }
    if let Some(v) = a.hr_start {
        spec.hr_start_bpm = v;
    }
    if let Some(v) = a.hr_end {
        spec.hr_end_bpm = v;
    }
    let (video, truth) = generate_subject(&spec)?;
    create_dir(&g.out)?;
    save_sequence_with(&video, &g.out.join("frames"), Some(spec.seed))?;
    truth.write_csv(&g.out.join("ground_truth.csv"))?;
    let json = serde_json::to_string_pretty(&spec).expect("spec serializes");
    write_atomic_str(&g.out.join("spec.json"), &(json + "\n"))?;
    info!("wrote {} frames to {}", video.len(), g.out.display());
    Ok(())
}

pub fn cmd_extract(g: &GlobalArgs, a: &ExtractArgs) -> Result<()> {
    let mut video = load_sequence(&a.input, a.fps)?;
    if let Some(r) = &a.roi {
        video = crop(&video, RoiBox::parse(r)?)?;
    }
    let pulse = bandpass_pulse(&extract(
        &spatial_mean(&video)?,
        &ExtractorParams::new(a.method),
    )?)?;
    let rates = rate_trace(&pulse)?;
    create_dir(&g.out)?;
    pulse.write_csv(&g.out.join("signal.csv"))?;
    rates.write_csv(&g.out.join("rates.csv"))?;
    let mean = rates.rates.iter().sum::<f64>() / rates.len() as f64;
    println!(
        "{} mean rate {mean:.2} bpm over {} windows",
        a.method,
        rates.len()
    );
    Ok(())
}

fn plane_of(p: PlaneArg) -> Option<[[f64; 3]; 2]> {
    match p {
        PlaneArg::None => None,
        PlaneArg::Pos => Some(crate::frames::POS_PLANE),
        PlaneArg::Chrom => Some(crate::frames::CHROM_PLANE),
    }
}

pub fn cmd_train(g: &GlobalArgs, a: &TrainArgs) -> Result<()> {
    if !a.reference.is_empty() && a.reference.len() != a.input.len() {
        return Err(Error::invalid(format!(
            "{} references for {} inputs",
            a.reference.len(),
            a.input.len()
        )));
    }
    let mut opts: TrainOptions = match &g.config {
        Some(p) => read_json(p)?,
        None => TrainOptions::default(),
    };
    if let Some(s) = g.seed {
        opts.seed = s;
    }
    if let Some(e) = a.epochs {
        opts.epochs = e;
    }
    if let Some(b) = a.batch_size {
        opts.batch_size = b;
    }
    let map = crate::frames::channel_map(&a.channels)?;
    let pre = Preprocess {
        channels: (map != [0, 1, 2]).then_some(map),
        plane: plane_of(a.plane),
        ..Preprocess::default()
    };
    let labels = LabelOptions {
        source: a.label_source.into(),
        ..LabelOptions::default()
    };
    let mut data = None;
    for (i, dir) in a.input.iter().enumerate() {
        let subject = Subject::folder(
            i,
            FolderSubject {
                path: dir.clone(),
                fps: a.fps,
                id: None,
                group: None,
                reference_csv: a.reference.get(i).cloned(),
            },
        );
        let rec = subject.load()?;
        let clip = pre.apply(&rec.video)?;
        let y = make_labels(&rec, &labels)?;
        let set = build_training_set(
            &clip,
            &y,
            &frame_selection(clip.len(), a.frames_per_clip, 0.0),
            i,
        )?;
        match data.as_mut() {
            None => data = Some(set),
            Some(d) => crate::nnkit::Dataset::extend(d, set)?,
        }
    }
    let data = data.expect("at least one input");
    if data.shape[0] != data.shape[1] {
        return Err(Error::invalid(format!(
            "frames must be square, got {:?}",
            data.shape
        )));
    }
    let preset = g.preset.unwrap_or(Preset::Tiny);
    let cfg = NetworkConfig {
        input_side: data.shape[0],
        ..NetworkConfig::preset(preset).with_input_channels(pre.input_channels())
    };
    let init_seed = crate::mix_seed(opts.seed, 0x1417, 0);
    let mut net = Network::init(cfg, init_seed)?;
    let report = train(&mut net, &data, &opts)?;
    create_dir(&g.out)?;
    let mut ckpt = Checkpoint::from_network(&net, init_seed)
        .with_metadata("label_source", LabelSource::from(a.label_source).name())
        .with_metadata("epochs_run", report.epoch_losses.len().to_string());
    for (k, v) in pre.metadata() {
        ckpt = ckpt.with_metadata(k, v);
    }
    let path = g.out.join("model.ckpt");
    ckpt.save(&path)?;
    println!(
        "trained on {} pairs, final loss {:.5}, wrote {}",
        data.len(),
        report.epoch_losses.last().copied().unwrap_or(f64::NAN),
        path.display()
    );
    Ok(())
}

pub fn cmd_infer(g: &GlobalArgs, a: &InferArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let pre = Preprocess::from_metadata(&ckpt.metadata)?;
    let net = ckpt.network()?;
    let video = load_sequence(&a.input, a.fps)?;
    let clip = pre.apply(&video)?;
    let pulse = bandpass_pulse(&predict_clip(&net, &clip)?)?;
    let rates = rate_trace(&pulse)?;
    create_dir(&g.out)?;
    pulse.write_csv(&g.out.join("signal.csv"))?;
    rates.write_csv(&g.out.join("rates.csv"))?;
    println!("{} predictions written to {}", pulse.len(), g.out.display());
    Ok(())
}

#[derive(Serialize)]
struct Metrics {
    rmse_bpm: f64,
    accuracy_pct: f64,
    windows: usize,
}

/// Drops the leading sample of a reference one longer than the prediction:
/// network output `k` covers frames `k` and `k + 1`.
pub fn align_for_eval(predicted: &Signal, reference: &Signal) -> Result<Signal> {
    if predicted.fs() != reference.fs() {
        return Err(Error::invalid(format!(
            "sample rates differ: {} vs {}",
            predicted.fs(),
            reference.fs()
        )));
    }
    match reference.len() as i64 - predicted.len() as i64 {
        0 => Ok(reference.clone()),
        1 => reference.with_samples(reference.samples()[1..].to_vec()),
        _ => Err(Error::shape(
            "eval",
            "samples",
            predicted.len(),
            reference.len(),
        )),
    }
}

pub fn cmd_eval(g: &GlobalArgs, a: &EvalArgs) -> Result<()> {
    let predicted = Signal::read_csv(&a.predicted)?;
    let reference = align_for_eval(&predicted, &Signal::read_csv(&a.reference)?)?;
    let ref_rates = rate_trace(&bandpass_pulse(&reference)?)?;
    let e = score(bandpass_pulse(&predicted)?, &ref_rates)?;
    let m = Metrics {
        rmse_bpm: e.rmse_bpm,
        accuracy_pct: e.accuracy_pct,
        windows: e.rates.len(),
    };
    debug_assert_eq!(m.rmse_bpm, rmse(&e.rates, &ref_rates)?);
    debug_assert_eq!(
        m.accuracy_pct,
        accuracy(&e.rates, &ref_rates, ACCURACY_THRESHOLD_BPM)?
    );
    create_dir(&g.out)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(&m).map_err(|e| Error::Csv(e.to_string()))?;
    let text =
        String::from_utf8(w.into_inner().map_err(|e| Error::Csv(e.to_string()))?).expect("utf-8");
    write_atomic_str(&g.out.join("metrics.csv"), &text)?;
    println!(
        "rmse {:.3} bpm, accuracy {:.1}%",
        m.rmse_bpm, m.accuracy_pct
    );
    Ok(())
}

pub fn cmd_experiment(g: &GlobalArgs) -> Result<()> {
    let path = g
        .config
        .as_ref()
        .ok_or_else(|| Error::invalid("experiment needs --config"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(p) = g.preset {
        cfg.net_preset = p;
    }
    let table = run_experiment(&cfg, Some(&g.out))?;
    for s in table.summary() {
        println!(
            "{:<34} rmse {:7.3} bpm  accuracy {:6.2}%  (n={})",
            s.variant, s.rmse_median, s.accuracy_median, s.n
        );
    }
    Ok(())
}

pub fn cmd_analyze_kernels(g: &GlobalArgs, a: &KernelArgs) -> Result<()> {
    let net = Checkpoint::load(&a.checkpoint)?.network()?;
    let summary = first_layer_channel_sums(&net);
    let c = net.config().input_channels;
    let names: Vec<String> = match c {
        3 => ["r", "g", "b"].iter().map(|s| s.to_string()).collect(),
        _ => (1..=c).map(|i| format!("p{i}")).collect(),
    };
    let mut text = format!("kernel,{}\n", names.join(","));
    for (k, row) in summary.per_kernel_channel_sums.iter().enumerate() {
        let vals: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        text.push_str(&format!("{k},{}\n", vals.join(",")));
    }
    create_dir(&g.out)?;
    write_atomic_str(&g.out.join("kernel_sums.csv"), &text)?;
    let dir: Vec<String> = summary
        .principal_direction
        .iter()
        .map(|v| format!("{v:?}"))
        .collect();
    write_atomic_str(
        &g.out.join("principal_direction.csv"),
        &format!("{}\n{}\n", names.join(","), dir.join(",")),
    )?;
    println!("principal direction [{}]", dir.join(", "));
    Ok(())
}
