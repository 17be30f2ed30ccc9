//! Monte Carlo harness: random scenes, the three-phase pipeline, an S-OMP
//! baseline, missed-detection / false-alarm accounting and parameter sweeps.
//!
//! Every trial draws from streams keyed by `(seed, trial index)`, so results
//! do not depend on thread count or scheduling.

mod config;
mod experiment;
mod metrics;
mod presets;
mod sampling;
mod somp;
mod trial;

pub use config::{HarnessConfig, LocalizeConfig, SceneConfig, TrialConfig, DESK_WAVELENGTH};
pub use experiment::{
    apply_axis, run_experiment, run_experiment_with, sweep, ExperimentResult, SweepAxis, SweepRow, SweepSpec,
};
pub use metrics::{aggregate, classify_events, MetricsReport, ScorePool, TrialEvents};
pub use presets::{desk, full, preset, Preset, PRESET_NAMES};
pub use sampling::sample_scene;
pub use somp::somp;
pub use trial::{
    balanced_thresholds, run_scene, run_trial, synthesize_rx, ClusterSpectra, ClusterSummary, Setup, TrialOutcome,
};
