//! Synthetic benchmarks, noise, scoring and experiment orchestration.

pub mod experiment;
pub mod metrics;
pub mod synth;

pub use experiment::{
    apply_noise, build_model, parse_config, run_batch, run_experiment, som_model, to_csv, train_maps, ExperimentConfig,
    ImageSource, ModelKind, ModelParams, RunOutcome, RunRecord, SomMaps, Training, CSV_HEADER,
};
pub use metrics::{multi_otsu, otsu, prf, ConfusionCounts, MultiOtsu, Prf};
pub use synth::{add_gaussian_noise, add_salt_pepper, gen_synthetic, preset, NoiseSpec, Ramp, Shape, ShapeKind, SynthSpec, PRESETS};
