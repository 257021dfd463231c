//! File formats, synthetic generators and run provenance.

pub mod checkpoint;
pub mod synthetic;
pub mod table;

pub use checkpoint::{
    fingerprint, scalar_name, Checkpoint, RunManifest, StageTiming, CHECKPOINT_VERSION,
};
pub use synthetic::{
    generate_crossing_synthetic, generate_proportional_hazards, sign_changes, CrossingTruth,
    TruncatedMixture,
};
pub use table::{
    default_names, parse_covariates_str, parse_dataset, parse_dataset_str, write_dataset,
    write_dataset_string, MinMaxScaling,
};
