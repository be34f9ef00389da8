use rppg::frames::normalized_diff;
use rppg::harness::{build_training_set, frame_selection, make_labels, LabelOptions, Subject};
use rppg::nnkit::{train, Checkpoint, Network, NetworkConfig, TrainOptions};
use rppg::synth::{cohort, generate_subject, SubjectSpec};

fn template() -> SubjectSpec {
    SubjectSpec {
        duration_s: 12.0,
        frame_side: 32,
        channel_noise: 0.002,
        ..SubjectSpec::default()
    }
}

fn trained_bytes(threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    pool.install(|| {
        let mut data = None;
        for (i, spec) in cohort(&template(), 2, 5).into_iter().enumerate() {
            let rec = Subject::synthetic(format!("s{i}"), spec).load().unwrap();
            let clip = normalized_diff(&rec.video).unwrap();
            let y = make_labels(&rec, &LabelOptions::default()).unwrap();
            let part =
                build_training_set(&clip, &y, &frame_selection(clip.len(), Some(60), 0.0), i)
                    .unwrap();
            match data.as_mut() {
                None => data = Some(part),
                Some(d) => rppg::nnkit::Dataset::extend(d, part).unwrap(),
            }
        }
        let mut net = Network::init(
            NetworkConfig {
                input_side: 32,
                ..NetworkConfig::tiny()
            },
            2,
        )
        .unwrap();
        train(
            &mut net,
            &data.unwrap(),
            &TrainOptions {
                epochs: 2,
                batch_size: 16,
                ..TrainOptions::default()
            },
        )
        .unwrap();
        Checkpoint::from_network(&net, 2).to_bytes().unwrap()
    })
}

#[test]
fn training_is_bit_identical_across_thread_counts() {
    let one = trained_bytes(1);
    assert_eq!(one, trained_bytes(1));
    assert_eq!(one, trained_bytes(3));
}

#[test]
fn generation_is_identical_across_thread_counts() {
    let spec = SubjectSpec {
        intensity_noise: 0.01,
        ..template()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| generate_subject(&spec).unwrap())
    };
    assert_eq!(run(1), run(2));
}
