//! Phase II: range-cluster detection and virtual-channel MUSIC.
//!
//! Within each detected cluster the per-symbol channel estimates of the first
//! Q0 symbols are stacked into one virtual snapshot per block. With a
//! DFT-based IRS schedule the virtual steering matrix regains full column
//! rank, so MUSIC can separate the targets of a cluster and tell near-field
//! from far-field ones.

mod clusters;
mod covariance;
mod grid;
mod music;
mod peaks;
mod pipeline;
mod schedule;
mod virtual_channel;

pub use clusters::{detect_clusters, range_estimate, ClusterDetection, ClusterThreshold};
pub use covariance::{
    aic_scores, estimate_target_count, hermitian_eigen, sample_covariance, AicForm, EigenDecomposition,
};
pub use grid::{build_grids, full_grids, GridConfig, NearRow, SpectrumGrid, TargetRegion};
pub use music::{
    calibrate_thresholds, complex_mul, SplitMatrix, music_values, noise_subspace, steering_columns, GridSteering, SpectrumEvaluator,
    Thresholds, SENTINEL,
};
pub use peaks::{
    deduplicate, local_maxima_far, local_maxima_near, merge_near, select_peaks, top_k, top_k_above, Dedup, Peak,
    PeakSelection,
};
pub use pipeline::{process_cluster, process_covariance, ClusterResult, Detection, SubspaceConfig, ThresholdRule, TwistRule};
pub use schedule::{constant_schedule, design_irs_schedule, IrsSchedule};
pub use virtual_channel::{build_virtual, verify_rank, RankReport, VirtualBatch, VirtualManifold};
