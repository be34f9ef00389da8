//! Experiment harness: configuration, cross-validation splits, the shared
//! label/preprocessing pipeline, the four studies and their reports.

mod config;
mod experiments;
mod pipeline;
mod report;
mod split;

pub use config::{
    DatasetConfig, Experiment, ExperimentConfig, FolderSubject, LabelSource, SplitMode,
    SyntheticDataset,
};
pub use experiments::{
    assemble, checkpoint_name, e1_models, e2_models, e3_models, e4_models, e4_variant, folds_for,
    frame_side, phase_variant, resolution_variant, rotation_variant, run_e1, run_e2, run_e3,
    run_e4, run_experiment, run_grid, run_job, train_model, ModelSpec, TrainPart, E4_MODELS,
};
pub use pipeline::{
    build_training_set, camera_pulse, evaluate, finger_reference, frame_selection, make_labels,
    phase_lag_deg, reference_rates, score, subjects_from, Evaluation, LabelOptions, Preprocess,
    Recording, Subject,
};
pub use report::{median, quantile, ReportRow, ReportTable, SummaryRow};
pub use split::{group_kfold_split, kfold_split, Fold};
