//! The network input: normalized frame differences, optionally projected
//! onto the POS or CHROM chrominance plane.

use rppg::frames::{normalized_diff, normalized_diff_projected, CHROM_PLANE, POS_PLANE};
use rppg::synth::{generate_subject, SubjectSpec};

fn main() -> rppg::Result<()> {
    let spec = SubjectSpec {
        duration_s: 5.0,
        frame_side: 32,
        ..SubjectSpec::default()
    };
    let (video, _) = generate_subject(&spec)?;

    let rgb = normalized_diff(&video)?;
    println!(
        "RGB clip: {} frames of {:?}, global scale {:.3e}",
        rgb.len(),
        rgb.shape(),
        rgb.scale()
    );

    // the texture cancels in (c_{t+1} - c_t) / (c_{t+1} + c_t), so every pixel
    // of a frame carries the same value for uniform skin
    let f = rgb.frame(10);
    let spread = f
        .data()
        .chunks(3)
        .map(|p| p[1])
        .fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
    println!("frame 10 green range [{:+.6}, {:+.6}]", spread.0, spread.1);

    for (name, plane) in [("POS", POS_PLANE), ("CHROM", CHROM_PLANE)] {
        let p = normalized_diff_projected(&video, &plane)?;
        println!(
            "{name} clip: {:?}, first pixel of frame 10 = {:?}",
            p.shape(),
            &p.frame_f32(10)[..2]
        );
    }
    Ok(())
}
