use super::{
    deduplicate, estimate_target_count, hermitian_eigen, music_values, noise_subspace, sample_covariance, select_peaks,
    AicForm, ClusterThreshold, Dedup, GridConfig, GridSteering, SpectrumGrid, TargetRegion, Thresholds, VirtualBatch,
    VirtualManifold,
};
use crate::geometry::FieldType;
use crate::{Error, Result, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TwistRule {
    Fixed { value: f64 },
    /// Uniform in `[0, 2π)`, drawn once per trial.
    Random,
}

impl Default for TwistRule {
    fn default() -> Self {
        TwistRule::Fixed { value: 0.37 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Percentile of the spectra of a target-free scene.
    Calibrated { percentile: f64, max_near_points: usize },
    Fixed { far: f64, near: f64 },
    /// Per field type, the threshold at which missed-detection and
    /// false-alarm probabilities come closest over the experiment's own
    /// trials, applied after all trials have run.
    Balanced,
    /// As `Balanced`, over `trials` calibration trials drawn from a seed
    /// stream disjoint from the experiment's.
    BalancedHoldout { trials: usize },
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule::Balanced
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubspaceConfig {
    /// Symbols stacked into a virtual snapshot; `None` means `⌈K_max / r_G⌉`.
    pub q0: Option<usize>,
    /// Largest cluster population the estimator plans for.
    pub k_max_assumed: usize,
    pub twist: TwistRule,
    pub cluster_threshold: ClusterThreshold,
    pub aic: AicForm,
    pub grid: GridConfig,
    pub region: TargetRegion,
    pub thresholds: ThresholdRule,
    pub dedup: Dedup,
    /// Bearing tolerance (rad) for treating a far and a near peak as one target.
    pub dedup_angle_tol: f64,
    /// Near peaks closer than this (m) to a larger one are dropped; 0 keeps all.
    pub near_merge_radius: f64,
}

impl Default for SubspaceConfig {
    fn default() -> Self {
        Self {
            q0: None,
            k_max_assumed: 4,
            twist: TwistRule::default(),
            cluster_threshold: ClusterThreshold::default(),
            aic: AicForm::default(),
            grid: GridConfig::default(),
            region: TargetRegion::default(),
            thresholds: ThresholdRule::default(),
            dedup: Dedup::default(),
            dedup_angle_tol: 1.0_f64.to_radians(),
            near_merge_radius: 1.0,
        }
    }
}

impl SubspaceConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.region.validate()?;
        if self.k_max_assumed == 0 {
            return Err(Error::invalid("k_max_assumed", "must be at least 1"));
        }
        if self.q0 == Some(0) {
            return Err(Error::invalid("q0", "must be at least 1"));
        }
        if let TwistRule::Fixed { value } = self.twist {
            if !(0.0..2.0 * PI).contains(&value) {
                return Err(Error::invalid("twist", format!("{value} outside [0, 2π)")));
            }
        }
        match self.thresholds {
            ThresholdRule::Calibrated { percentile, .. } if !(0.0..=100.0).contains(&percentile) => {
                return Err(Error::invalid("thresholds.percentile", "must lie in [0, 100]"))
            }
            ThresholdRule::Fixed { far, near } if far.is_nan() || near.is_nan() => {
                return Err(Error::invalid("thresholds", "NaN threshold"))
            }
            ThresholdRule::BalancedHoldout { trials: 0 } => {
                return Err(Error::invalid("thresholds.trials", "must be at least 1"))
            }
            _ => {}
        }
        if !(self.near_merge_radius >= 0.0) {
            return Err(Error::invalid("near_merge_radius", "must be non-negative"));
        }
        if !(self.dedup_angle_tol >= 0.0) {
            return Err(Error::invalid("dedup_angle_tol", "must be non-negative"));
        }
        Ok(())
    }

    /// Q0 in use given the IRS-BS channel rank `r_g`.
    pub fn resolve_q0(&self, r_g: usize) -> usize {
        self.q0.unwrap_or_else(|| self.k_max_assumed.div_ceil(r_g.max(1))).max(1)
    }
}

/// One reported peak; `d` is `None` for far-field detections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub field: FieldType,
    pub theta: f64,
    pub d: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub cluster: usize,
    pub k_hat: usize,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub detections: Vec<Detection>,
    pub near_grid_len: usize,
    pub far_grid_len: usize,
    /// Spectrum values over the grid, kept on request.
    pub near_spectrum: Option<Vec<f64>>,
    pub far_spectrum: Option<Vec<f64>>,
}

/// AIC, MUSIC and peak selection for one cluster from its virtual snapshots.
pub fn process_cluster(
    batch: &VirtualBatch,
    manifold: &VirtualManifold,
    grid: &SpectrumGrid,
    steering: &GridSteering,
    cfg: &SubspaceConfig,
    thresholds: &Thresholds,
    keep_spectra: bool,
) -> Result<ClusterResult> {
    let r = sample_covariance(batch);
    process_covariance(batch.cluster, &r, batch.num_snapshots(), manifold, grid, steering, cfg, thresholds, keep_spectra)
}

/// As [`process_cluster`] from a given covariance and snapshot count.
#[allow(clippy::too_many_arguments)]
pub fn process_covariance(
    cluster: usize,
    r: &DMatrix<C64>,
    num_snapshots: usize,
    manifold: &VirtualManifold,
    grid: &SpectrumGrid,
    steering: &GridSteering,
    cfg: &SubspaceConfig,
    thresholds: &Thresholds,
    keep_spectra: bool,
) -> Result<ClusterResult> {
    let eig = hermitian_eigen(r);
    let k_hat = estimate_target_count(&eig.values, manifold.q0, manifold.num_bs, num_snapshots, cfg.aic);
    let mut out = ClusterResult {
        cluster,
        k_hat,
        eigenvalues: eig.values.clone(),
        detections: Vec::new(),
        near_grid_len: grid.near_len(),
        far_grid_len: grid.far_len(),
        near_spectrum: None,
        far_spectrum: None,
    };
    if k_hat == 0 {
        return Ok(out);
    }
    let noise = noise_subspace(&eig, k_hat)?;
    let near = music_values(&steering.near, &noise)?;
    let far = music_values(&steering.far, &noise)?;
    let sel = select_peaks(&near, &far, grid, k_hat, cfg.near_merge_radius);
    let sel = deduplicate(sel, grid, cfg.dedup, cfg.dedup_angle_tol).above(thresholds);
    out.detections.extend(sel.far.iter().map(|p| Detection {
        field: FieldType::Far,
        theta: grid.far_theta(p.index),
        d: None,
        value: p.value,
    }));
    out.detections.extend(sel.near.iter().map(|p| {
        let (d, theta) = grid.near_point(p.index);
        Detection {
            field: FieldType::Near,
            theta,
            d: Some(d),
            value: p.value,
        }
    }));
    if keep_spectra {
        out.near_spectrum = Some(near);
        out.far_spectrum = Some(far);
    }
    Ok(out)
}
