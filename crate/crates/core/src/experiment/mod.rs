//! Experiment orchestration and on-disk artifacts.

mod config;
mod metrics;
mod params;
mod run;
mod runs;

pub use config::{
    DataSection, ExperimentConfig, HistogramSection, NetworkSection, ProbeSection,
    QuadraticSection, RunMode, StreamSection, TrainingSection,
};
pub use metrics::{MetricsRecord, MetricsWriter};
pub use params::{
    decode_params, encode_params, load_params, save_params, PARAMS_MAGIC, PARAMS_VERSION,
};
pub use run::{
    run_experiment, verify_run, RunSummary, VerifyReport, CONFIG_FILE, METRICS_FILE, RUN_FILE,
};
pub use runs::{
    run_full_reference, run_interleaved, run_multitask, run_stream, task_permutation, Baseline,
    MultitaskOutcome, MultitaskSpec, NetSpec, SingleTaskOutcome, StreamSpec,
};
