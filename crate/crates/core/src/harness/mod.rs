//! Experiment driver: training runs with cached checkpoints, extraction and
//! baseline jobs, fidelity, result tables and summaries.

mod config;
mod experiment;
mod results;
pub mod stats;

pub use config::{
    rng_for, BaselineSetup, ExperimentConfig, ExtractionSetup, Preset, Stream, SweepSetup,
    TrainingSetup, SEED_ENV, THREADS_ENV,
};
pub use experiment::{
    data_needed, ensure_all_trained, ensure_trained, eval_set, extraction_strings, fidelity,
    load_trained, model_dir, par_map, reproduce_table2, run_kmeans, run_merge, sweep_data_size,
    sweep_epochs, sweep_kappa, train_language, Experiment, Fidelity, LanguageContext, TrainedModel,
};
pub use results::{
    append_rows, read_rows, summarize, write_rows, write_summary, ResultRow, SummaryRow,
};
