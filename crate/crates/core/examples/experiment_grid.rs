//! A reduced channel-order study (two folds, four subjects) written to an
//! output directory with report.csv, summary.csv and checkpoints.
//!
//! cargo run --release --example experiment_grid -- [out_dir]

use rppg::harness::{run_experiment, ExperimentConfig};
use std::path::PathBuf;

fn main() -> rppg::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rppg-grid"));
    let cfg = ExperimentConfig::from_json(
        r#"{
            "experiment": "E1",
            "dataset": {"synthetic": {"count": 4, "seed": 11, "template": {"duration_s": 30, "frame_side": 32, "channel_noise": 0.0025}}},
            "folds": 2,
            "epochs": 3,
            "train_frames_per_subject": 100,
            "variants": ["RGB", "RBG", "GGG"]
        }"#,
    )?;
    let table = run_experiment(&cfg, Some(&out))?;
    for s in table.summary() {
        println!(
            "{:<6} n={} median rmse {:6.2} bpm, median accuracy {:5.1}%",
            s.variant, s.n, s.rmse_median, s.accuracy_median
        );
    }
    println!("results in {}", out.display());
    Ok(())
}
