//! Train the tiny CNN on camera-POS labels of two subjects, evaluate on a
//! third and round-trip the model through a checkpoint.

use rppg::frames::normalized_diff;
use rppg::harness::{
    build_training_set, evaluate, frame_selection, make_labels, reference_rates, LabelOptions,
    Subject,
};
use rppg::nnkit::{train, Checkpoint, Network, NetworkConfig, TrainOptions};
use rppg::synth::{cohort, SubjectSpec};

fn main() -> rppg::Result<()> {
    let template = SubjectSpec {
        duration_s: 30.0,
        frame_side: 32,
        channel_noise: 0.0025,
        ..SubjectSpec::default()
    };
    let subjects: Vec<Subject> = cohort(&template, 3, 7)
        .into_iter()
        .enumerate()
        .map(|(i, s)| Subject::synthetic(format!("s{i}"), s))
        .collect();

    let mut data = None;
    for (i, s) in subjects[..2].iter().enumerate() {
        let rec = s.load()?;
        let clip = normalized_diff(&rec.video)?;
        let labels = make_labels(&rec, &LabelOptions::default())?;
        let part = build_training_set(
            &clip,
            &labels,
            &frame_selection(clip.len(), Some(150), 0.0),
            i,
        )?;
        match data.as_mut() {
            None => data = Some(part),
            Some(d) => d.extend(part)?,
        }
    }
    let data = data.expect("two training subjects");

    let config = NetworkConfig {
        input_side: 32,
        ..NetworkConfig::tiny()
    };
    let mut net = Network::init(config, 1)?;
    let report = train(
        &mut net,
        &data,
        &TrainOptions {
            epochs: 4,
            ..TrainOptions::default()
        },
    )?;
    println!(
        "{} samples, {} parameters, epoch losses {:.3?}",
        data.len(),
        net.num_params(),
        report.epoch_losses
    );

    let test = subjects[2].load()?;
    let eval = evaluate(
        &net,
        &normalized_diff(&test.video)?,
        &reference_rates(&test)?,
    )?;
    println!(
        "held-out subject: rmse {:.2} bpm, accuracy {:.1}%",
        eval.rmse_bpm, eval.accuracy_pct
    );

    let bytes = Checkpoint::from_network(&net, 1)
        .with_metadata("label_source", "camera_pos")
        .to_bytes()?;
    let restored = Checkpoint::from_bytes(&bytes)?.network()?;
    // weights are stored as f32
    let worst = restored
        .params()
        .iter()
        .zip(net.params())
        .map(|(a, b)| a.max_abs_diff(b))
        .fold(0.0, f64::max);
    println!(
        "checkpoint: {} bytes, largest parameter change {worst:.1e}",
        bytes.len()
    );
    Ok(())
}
