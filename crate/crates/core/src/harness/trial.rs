use super::{classify_events, sample_scene, somp, ScorePool, TrialConfig, TrialEvents};
use crate::channel::{assign_clusters, build_cir, irs_bs_channel, ClusterMap, IrsBsChannel, RcsDraws};
use crate::estimation::{group_lasso, Observations};
use crate::geometry::{FieldType, Scene, TargetTruth};
use crate::localize::{localize_far, localize_near, NearMeasurement, TargetEstimate};
use crate::ofdm::{delay_manifold, generate_pilots, simulate_freq_rx, DelayManifold, PilotGrid};
use crate::C64;
use nalgebra::DMatrix;
use crate::rng::{derive_seed, stream, Domain};
use crate::subspace::{
    build_grids, build_virtual, calibrate_thresholds, design_irs_schedule, detect_clusters, full_grids,
    process_cluster, range_estimate, Detection, GridSteering, IrsSchedule, SpectrumGrid, ThresholdRule, Thresholds,
    TwistRule, VirtualManifold,
};
use crate::{Error, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::borrow::Cow;
use std::f64::consts::PI;

/// Per-experiment state shared by all trials.
#[derive(Debug, Clone)]
pub struct Setup {
    pub base: Scene,
    pub irs_bs: IrsBsChannel,
    /// Rank of G.
    pub rank_g: usize,
    pub q0: usize,
    pub delay: DelayManifold,
    pub thresholds: Thresholds,
    /// Schedule and manifold when the twist is fixed.
    fixed: Option<(IrsSchedule, VirtualManifold)>,
}

fn twist_for(cfg: &TrialConfig, trial_seed: u64) -> f64 {
    match cfg.subspace.twist {
        TwistRule::Fixed { value } => value,
        TwistRule::Random => stream(trial_seed, Domain::Twist, 0, 0).random::<f64>() * 2.0 * PI,
    }
}

impl Setup {
    /// Validates the configuration, builds the shared channel objects and
    /// calibrates the spectrum thresholds when requested.
    pub fn new(cfg: &TrialConfig) -> Result<Self> {
        cfg.validate()?;
        let base = cfg.scene.build()?;
        let irs_bs = irs_bs_channel(&base, cfg.scene.irs_bs_model, cfg.scene.irs_bs_pathloss);
        let rank_g = irs_bs.rank(1e-10);
        let q0 = cfg.subspace.resolve_q0(rank_g);
        if q0 > cfg.ofdm.symbols_per_block {
            return Err(Error::invalid(
                "subspace.q0",
                format!("resolved Q0 = {q0} exceeds Q = {}", cfg.ofdm.symbols_per_block),
            ));
        }
        let manifold_for = |twist: f64| -> Result<(IrsSchedule, VirtualManifold)> {
            let sched = design_irs_schedule(&irs_bs, q0, twist)?;
            let vm = VirtualManifold::new(&irs_bs, &sched, q0, base.irs_array, base.wavelength)?;
            Ok((sched, vm))
        };
        // Random twists calibrate with the twist of trial 0.
        let (sched0, vm0) = manifold_for(twist_for(cfg, derive_seed(cfg.harness.seed, 0)))?;
        let thresholds = match cfg.subspace.thresholds {
            ThresholdRule::Fixed { far, near } => Thresholds { far, near },
            ThresholdRule::Balanced | ThresholdRule::BalancedHoldout { .. } => Thresholds { far: 0.0, near: 0.0 },
            ThresholdRule::Calibrated {
                percentile,
                max_near_points,
            } => {
                let grid = full_grids(&base, &cfg.subspace.region, &cfg.subspace.grid)?;
                calibrate_thresholds(
                    &vm0,
                    &grid,
                    cfg.ofdm.num_blocks,
                    cfg.subspace.k_max_assumed,
                    percentile,
                    cfg.harness.seed,
                    max_near_points,
                )?
            }
        };
        let fixed = matches!(cfg.subspace.twist, TwistRule::Fixed { .. }).then_some((sched0, vm0));
        let mut setup = Self {
            delay: delay_manifold(cfg.ofdm.num_subcarriers, cfg.ofdm.num_taps),
            base,
            irs_bs,
            rank_g,
            q0,
            thresholds,
            fixed,
        };
        if let ThresholdRule::BalancedHoldout { trials } = cfg.subspace.thresholds {
            setup.thresholds = setup.balance_thresholds(cfg, trials)?;
        }
        Ok(setup)
    }

    /// Runs `trials` unthresholded trials on a separate seed stream and
    /// balances missed detections against false alarms per field type.
    fn balance_thresholds(&self, cfg: &TrialConfig, trials: usize) -> Result<Thresholds> {
        let mut cal = cfg.clone();
        cal.harness.seed = derive_seed(cfg.harness.seed, CALIBRATION_STREAM);
        cal.harness.run_somp = false;
        let outcomes = (0..trials)
            .into_par_iter()
            .map(|i| run_trial(&cal, self, i, false))
            .collect::<Result<Vec<_>>>()?;
        Ok(balanced_thresholds(&outcomes, cfg.harness.detection_radius))
    }
}

/// Thresholds balancing missed detections against false alarms over the
/// MUSIC estimates of `outcomes`.
pub fn balanced_thresholds(outcomes: &[TrialOutcome], r_e: f64) -> Thresholds {
    let mut near = ScorePool::default();
    let mut far = ScorePool::default();
    for o in outcomes {
        near.add_trial(&o.truth, &o.music, FieldType::Near, r_e);
        far.add_trial(&o.truth, &o.music, FieldType::Far, r_e);
    }
    Thresholds {
        far: far.balanced_threshold(),
        near: near.balanced_threshold(),
    }
}

impl TrialOutcome {
    /// Drops MUSIC estimates at or below their field's threshold and
    /// reclassifies the trial at radius `r_e`.
    pub fn apply_thresholds(&mut self, thr: &Thresholds, r_e: f64) {
        self.music.retain(|e| match e.field {
            FieldType::Near => e.value > thr.near,
            FieldType::Far => e.value > thr.far,
        });
        self.music_events = classify_events(&self.truth, &self.music, r_e);
    }
}

/// Index passed to `derive_seed` to obtain the calibration base seed.
const CALIBRATION_STREAM: u64 = u64::MAX;

/// Spectra of one processed cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpectra {
    pub grid: SpectrumGrid,
    pub near: Vec<f64>,
    pub far: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster: usize,
    /// Targets truly in this tap.
    pub true_count: usize,
    pub k_hat: usize,
    pub near_grid_len: usize,
    pub far_grid_len: usize,
    pub music_detections: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub index: usize,
    pub seed: u64,
    pub truth: Vec<TargetTruth>,
    /// True tap of every target.
    pub taps: Vec<usize>,
    pub detected: Vec<usize>,
    pub clusters: Vec<ClusterSummary>,
    pub music: Vec<TargetEstimate>,
    pub somp: Option<Vec<TargetEstimate>>,
    pub music_events: TrialEvents,
    pub somp_events: Option<TrialEvents>,
    /// Detections that could not be turned into a position.
    pub unlocalized: usize,
    pub spectra: Option<Vec<ClusterSpectra>>,
}

fn localize_all(
    scene: &Scene,
    cfg: &TrialConfig,
    cluster: usize,
    d_utib: f64,
    dets: &[Detection],
    out: &mut Vec<TargetEstimate>,
) -> usize {
    let mut failed = 0;
    for det in dets {
        let est = match (det.field, det.d) {
            (FieldType::Near, Some(d)) => localize_near(
                scene,
                cluster,
                &NearMeasurement {
                    d_utib_hat: d_utib,
                    theta_hat: det.theta,
                    d_hat: d,
                },
                &cfg.localize.near,
            ),
            _ => localize_far(scene, cluster, d_utib, det.theta, &cfg.localize.far),
        };
        match est {
            Ok(e) => out.push(TargetEstimate { value: det.value, ..e }),
            Err(_) => failed += 1,
        }
    }
    failed
}

impl Setup {
    fn schedule_for(&self, cfg: &TrialConfig, scene: &Scene, seed: u64) -> Result<Cow<'_, (IrsSchedule, VirtualManifold)>> {
        match &self.fixed {
            Some(f) => Ok(Cow::Borrowed(f)),
            None => {
                let s = design_irs_schedule(&self.irs_bs, self.q0, twist_for(cfg, seed))?;
                let m = VirtualManifold::new(&self.irs_bs, &s, self.q0, scene.irs_array, scene.wavelength)?;
                Ok(Cow::Owned((s, m)))
            }
        }
    }
}

fn synthesize_with(
    cfg: &TrialConfig,
    setup: &Setup,
    scene: &Scene,
    schedule: &IrsSchedule,
    clusters: &ClusterMap,
    pilots: &PilotGrid,
    seed: u64,
) -> Result<Vec<DMatrix<C64>>> {
    let ofdm = &cfg.ofdm;
    let rcs = RcsDraws::swerling(scene.targets.len(), ofdm.num_blocks, seed);
    let mut y = Vec::with_capacity(ofdm.num_blocks * ofdm.symbols_per_block);
    for t in 0..ofdm.num_blocks {
        for q in 0..ofdm.symbols_per_block {
            let cir = build_cir(scene, &setup.irs_bs, schedule, &rcs, clusters, q, t, cfg.scene.steering)?;
            y.push(simulate_freq_rx(ofdm, pilots, &setup.delay, &cir, q, t, seed)?);
        }
    }
    Ok(y)
}

/// Received pilot observations of a scene, one N × M_B matrix per symbol in
/// block-major order (t, then q), with the pilots that produced them.
pub fn synthesize_rx(cfg: &TrialConfig, setup: &Setup, scene: &Scene, seed: u64) -> Result<(Vec<DMatrix<C64>>, PilotGrid)> {
    let (schedule, _) = &*setup.schedule_for(cfg, scene, seed)?;
    let clusters = assign_clusters(scene, &cfg.ofdm)?;
    let pilots = generate_pilots(&cfg.ofdm, seed);
    let y = synthesize_with(cfg, setup, scene, schedule, &clusters, &pilots, seed)?;
    Ok((y, pilots))
}

/// Runs Phases I-III on trial `index` of the experiment.
pub fn run_trial(cfg: &TrialConfig, setup: &Setup, index: usize, keep_spectra: bool) -> Result<TrialOutcome> {
    let wrap = |e: Error| Error::Trial {
        index,
        source: Box::new(e),
    };
    let seed = derive_seed(cfg.harness.seed, index as u64);
    let scene = sample_scene(&setup.base, cfg, seed).map_err(wrap)?;
    run_scene(cfg, setup, &scene, index, seed, keep_spectra).map_err(wrap)
}

/// Runs Phases I-III on a given scene.
pub fn run_scene(
    cfg: &TrialConfig,
    setup: &Setup,
    scene: &Scene,
    index: usize,
    seed: u64,
    keep_spectra: bool,
) -> Result<TrialOutcome> {
    let ofdm = &cfg.ofdm;
    let (schedule, manifold) = &*setup.schedule_for(cfg, scene, seed)?;
    let clusters = assign_clusters(scene, ofdm)?;
    let pilots = generate_pilots(ofdm, seed);

    // Phase I: synthesis and group-LASSO CIR estimation.
    let y = synthesize_with(cfg, setup, scene, schedule, &clusters, &pilots, seed)?;
    let obs = Observations::new(ofdm.symbols_per_block, ofdm.num_blocks, y)?;
    let est = group_lasso(ofdm, &obs, &pilots, &setup.delay, &cfg.lasso)?;
    let detection = detect_clusters(&est, ofdm.bandwidth(), cfg.subspace.cluster_threshold);

    // Phase II and III per detected cluster.
    let mut music = Vec::new();
    let mut somp_est = cfg.harness.run_somp.then(Vec::new);
    let mut summaries = Vec::new();
    let mut spectra = keep_spectra.then(Vec::new);
    let mut unlocalized = 0;
    for &l in &detection.detected {
        let ctx = |e: Error| Error::Cluster {
            cluster: l,
            source: Box::new(e),
        };
        let grid = build_grids(scene, ofdm.bandwidth(), &cfg.subspace.region, &cfg.subspace.grid, l).map_err(ctx)?;
        let steering = GridSteering::new(manifold, &grid);
        let batch = build_virtual(l, &est, setup.q0).map_err(ctx)?;
        let res = process_cluster(&batch, manifold, &grid, &steering, &cfg.subspace, &setup.thresholds, keep_spectra)
            .map_err(ctx)?;
        let d_utib = range_estimate(l, ofdm.bandwidth());
        unlocalized += localize_all(scene, cfg, l, d_utib, &res.detections, &mut music);
        if let Some(out) = somp_est.as_mut() {
            let dets = somp(&batch, &steering, &grid, res.k_hat);
            localize_all(scene, cfg, l, d_utib, &dets, out);
        }
        summaries.push(ClusterSummary {
            cluster: l,
            true_count: clusters.count(l),
            k_hat: res.k_hat,
            near_grid_len: res.near_grid_len,
            far_grid_len: res.far_grid_len,
            music_detections: res.detections.len(),
        });
        if let Some(sp) = spectra.as_mut() {
            sp.push(ClusterSpectra {
                near: res.near_spectrum.unwrap_or_default(),
                far: res.far_spectrum.unwrap_or_default(),
                grid,
            });
        }
    }
    let r_e = cfg.harness.detection_radius;
    Ok(TrialOutcome {
        index,
        seed,
        music_events: classify_events(&scene.targets, &music, r_e),
        somp_events: somp_est.as_ref().map(|s| classify_events(&scene.targets, s, r_e)),
        truth: scene.targets.clone(),
        taps: clusters.tap_of.clone(),
        detected: detection.detected,
        clusters: summaries,
        music,
        somp: somp_est,
        unlocalized,
        spectra,
    })
}
