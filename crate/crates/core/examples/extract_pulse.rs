//! Compare the hand-crafted extractors on one synthetic subject.

use rppg::extractors::{extract, ExtractorParams, Method};
use rppg::frames::spatial_mean;
use rppg::sigproc::{accuracy, bandpass_pulse, rate_trace, rmse, ACCURACY_THRESHOLD_BPM};
use rppg::synth::{generate_subject, SubjectSpec};

fn main() -> rppg::Result<()> {
    let spec = SubjectSpec {
        duration_s: 40.0,
        frame_side: 16,
        hr_start_bpm: 70.0,
        hr_end_bpm: 85.0,
        channel_noise: 0.003,
        intensity_noise: 0.01,
        ..SubjectSpec::default()
    };
    let (video, truth) = generate_subject(&spec)?;
    let trace = spatial_mean(&video)?;
    let reference = rate_trace(&truth)?;

    for method in [Method::Pos, Method::Chrom, Method::Green] {
        let pulse = bandpass_pulse(&extract(&trace, &ExtractorParams::new(method))?)?;
        let rates = rate_trace(&pulse)?;
        println!(
            "{method:<6} rmse {:6.2} bpm  accuracy {:5.1}%  corr with truth {:+.3}",
            rmse(&rates, &reference)?,
            accuracy(&rates, &reference, ACCURACY_THRESHOLD_BPM)?,
            pulse.correlation(&truth)?
        );
    }
    Ok(())
}
