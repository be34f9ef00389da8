//! Render a synthetic skin video with a drifting heart rate and write it as
//! PNG frames plus the ground-truth pulse.
//!
//! cargo run --release --example synth_video -- [out_dir]

use rppg::frames::save_sequence;
use rppg::synth::{generate_subject, SubjectSpec};
use std::path::PathBuf;

fn main() -> rppg::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rppg-synth"));
    let spec = SubjectSpec {
        duration_s: 20.0,
        frame_side: 32,
        hr_start_bpm: 65.0,
        hr_end_bpm: 80.0,
        channel_noise: 0.002,
        ..SubjectSpec::default()
    };
    let (video, truth) = generate_subject(&spec)?;
    let (w, h, c) = video.dims();
    println!(
        "{} frames of {w}x{h}x{c} at {} fps, mean rate {:.1} bpm",
        video.len(),
        video.fps(),
        spec.mean_hr_bpm()
    );

    let files = save_sequence(&video, &out.join("frames"))?;
    truth.write_csv(&out.join("ground_truth.csv"))?;
    println!(
        "wrote {} frames and ground_truth.csv to {}",
        files.len(),
        out.display()
    );
    Ok(())
}
