use crate::channel::IrsBsModel;
use crate::estimation::GroupLassoConfig;
use crate::geometry::{Point2, Scene, SteeringModel, UlaGeometry};
use crate::localize::{FarSolveConfig, NearSolveConfig};
use crate::ofdm::OfdmConfig;
use crate::subspace::SubspaceConfig;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Carrier wavelength of the desk configuration: 16 × the 28 GHz wavelength,
/// which with 64 elements at λ/2 gives the Fresnel depth of 256 elements at 28 GHz.
pub const DESK_WAVELENGTH: f64 = 16.0 * 3.0e8 / 28.0e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub user: Point2,
    pub bs: Point2,
    pub irs: Point2,
    /// λ (m).
    pub wavelength: f64,
    /// d_R (m).
    pub near_field_radius: f64,
    pub irs_elements: usize,
    pub bs_elements: usize,
    /// Element spacing (m); λ/2 when absent.
    pub irs_spacing: Option<f64>,
    pub bs_spacing: Option<f64>,
    pub irs_bs_model: IrsBsModel,
    /// δ.
    pub irs_bs_pathloss: f64,
    /// β_k, shared by all targets.
    pub target_pathloss: f64,
    /// Phase model used to synthesize near-field target responses.
    pub steering: SteeringModel,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            user: Point2::new(0.0, 0.0),
            bs: Point2::new(50.0, 43.0),
            irs: Point2::new(50.0, 50.0),
            wavelength: DESK_WAVELENGTH,
            near_field_radius: 90.0,
            irs_elements: 64,
            bs_elements: 4,
            irs_spacing: None,
            bs_spacing: None,
            irs_bs_model: IrsBsModel::NearField,
            irs_bs_pathloss: 1.0,
            target_pathloss: 1.0,
            steering: SteeringModel::Fresnel,
        }
    }
}

impl SceneConfig {
    /// Scene without targets.
    pub fn build(&self) -> Result<Scene> {
        let half = self.wavelength / 2.0;
        let irs = UlaGeometry::new(self.irs_elements, self.irs_spacing.unwrap_or(half))?;
        let bs = UlaGeometry::new(self.bs_elements, self.bs_spacing.unwrap_or(half))?;
        if !(self.irs_bs_pathloss >= 0.0) || !(self.target_pathloss >= 0.0) {
            return Err(Error::invalid("pathloss", "must be nonnegative"));
        }
        Scene::new(self.user, self.bs, self.irs, self.wavelength, self.near_field_radius, irs, bs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizeConfig {
    pub far: FarSolveConfig,
    pub near: NearSolveConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    /// ι_max.
    pub num_trials: usize,
    pub clusters_per_trial: usize,
    /// K, targets per occupied cluster.
    pub targets_per_cluster: usize,
    /// R_e (m).
    pub detection_radius: f64,
    pub seed: u64,
    /// Targets are drawn at least this far from the IRS (m).
    pub d_min: f64,
    /// Minimum distance between two targets of one scene (m).
    pub min_separation: f64,
    /// Candidate draws allowed per cluster.
    pub max_retries: usize,
    pub run_somp: bool,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            num_trials: 200,
            clusters_per_trial: 3,
            targets_per_cluster: 4,
            detection_radius: 1.0,
            seed: 1,
            d_min: 10.0,
            min_separation: 2.0,
            max_retries: 200_000,
            run_somp: true,
        }
    }
}

/// Everything a Monte Carlo run needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub scene: SceneConfig,
    pub ofdm: OfdmConfig,
    pub lasso: GroupLassoConfig,
    pub subspace: SubspaceConfig,
    pub localize: LocalizeConfig,
    pub harness: HarnessConfig,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        self.scene.build()?;
        self.ofdm.validate()?;
        self.lasso.validate()?;
        self.subspace.validate()?;
        self.localize.far.validate()?;
        self.localize.near.validate()?;
        let h = &self.harness;
        if h.num_trials == 0 {
            return Err(Error::invalid("harness.num_trials", "must be positive"));
        }
        if !(h.detection_radius > 0.0) {
            return Err(Error::invalid("harness.detection_radius", "must be positive"));
        }
        if !(h.d_min > 0.0) || h.d_min >= self.subspace.region.d_max {
            return Err(Error::invalid("harness.d_min", "must lie in (0, region.d_max)"));
        }
        if !(h.min_separation >= 0.0) || h.max_retries == 0 {
            return Err(Error::invalid("harness", "min_separation ≥ 0 and max_retries > 0 required"));
        }
        if h.clusters_per_trial > self.ofdm.num_taps {
            return Err(Error::invalid("harness.clusters_per_trial", "more clusters than delay taps"));
        }
        if let Some(q0) = self.subspace.q0 {
            if q0 > self.ofdm.symbols_per_block {
                return Err(Error::invalid("subspace.q0", format!("Q0 = {q0} exceeds Q = {}", self.ofdm.symbols_per_block)));
            }
            if q0 > self.scene.irs_elements {
                return Err(Error::invalid("subspace.q0", "Q0 exceeds the number of IRS elements"));
            }
        }
        Ok(())
    }
}
