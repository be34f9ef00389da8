//! Which colour direction does the first layer learn? Trains on POS labels
//! and prints the principal direction of the per-kernel channel sums.

use rppg::frames::normalized_diff;
use rppg::harness::{build_training_set, frame_selection, make_labels, LabelOptions, Subject};
use rppg::nnkit::{first_layer_channel_sums, train, Network, NetworkConfig, TrainOptions};
use rppg::synth::{cohort, SubjectSpec};

fn main() -> rppg::Result<()> {
    let template = SubjectSpec {
        duration_s: 30.0,
        frame_side: 32,
        channel_noise: 0.0025,
        intensity_noise: 0.01,
        ..SubjectSpec::default()
    };
    let mut data = None;
    for (i, spec) in cohort(&template, 2, 3).into_iter().enumerate() {
        let rec = Subject::synthetic(format!("s{i}"), spec).load()?;
        let clip = normalized_diff(&rec.video)?;
        let labels = make_labels(&rec, &LabelOptions::default())?;
        let part = build_training_set(
            &clip,
            &labels,
            &frame_selection(clip.len(), Some(200), 0.0),
            i,
        )?;
        match data.as_mut() {
            None => data = Some(part),
            Some(d) => d.extend(part)?,
        }
    }
    let data = data.expect("training data");
    let mut net = Network::init(
        NetworkConfig {
            input_side: 32,
            ..NetworkConfig::tiny()
        },
        5,
    )?;
    train(
        &mut net,
        &data,
        &TrainOptions {
            epochs: 4,
            ..TrainOptions::default()
        },
    )?;

    let summary = first_layer_channel_sums(&net);
    for (k, row) in summary.per_kernel_channel_sums.iter().enumerate() {
        println!(
            "kernel {k:2}: r {:+.3} g {:+.3} b {:+.3}",
            row[0], row[1], row[2]
        );
    }
    let d = &summary.principal_direction;
    println!(
        "principal direction [{:+.3}, {:+.3}, {:+.3}]",
        d[0], d[1], d[2]
    );
    // POS rejects [1,1,1]; a direction close to orthogonal to it means the
    // network learned a chrominance combination
    println!(
        "cosine with [1,1,1]: {:+.3}",
        (d[0] + d[1] + d[2]) / 3f64.sqrt()
    );
    Ok(())
}
