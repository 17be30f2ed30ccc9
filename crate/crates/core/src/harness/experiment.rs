use super::{aggregate, balanced_thresholds, classify_events, run_trial, MetricsReport, Setup, TrialConfig, TrialOutcome};
use crate::subspace::{ThresholdRule, Thresholds};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub q0: usize,
    pub rank_g: usize,
    pub thresholds: Thresholds,
    pub outcomes: Vec<TrialOutcome>,
    pub music: MetricsReport,
    pub somp: Option<MetricsReport>,
    pub wall_time_s: f64,
}

impl ExperimentResult {
    /// Reports at another detection radius without rerunning the trials.
    pub fn at_radius(&self, r_e: f64) -> Result<(MetricsReport, Option<MetricsReport>)> {
        if !(r_e > 0.0) {
            return Err(Error::invalid("detection_radius", "must be positive"));
        }
        let music: Vec<_> = self.outcomes.iter().map(|o| classify_events(&o.truth, &o.music, r_e)).collect();
        let somp: Option<Vec<_>> = self
            .outcomes
            .iter()
            .map(|o| o.somp.as_ref().map(|s| classify_events(&o.truth, s, r_e)))
            .collect();
        Ok((aggregate(&music)?, somp.map(|s| aggregate(&s)).transpose()?))
    }
}

/// Runs all trials (in parallel, reduced in trial order) and aggregates.
pub fn run_experiment(cfg: &TrialConfig) -> Result<ExperimentResult> {
    run_experiment_with(cfg, false)
}

pub fn run_experiment_with(cfg: &TrialConfig, keep_spectra: bool) -> Result<ExperimentResult> {
    let start = Instant::now();
    let setup = Setup::new(cfg)?;
    let mut outcomes = (0..cfg.harness.num_trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, &setup, i, keep_spectra))
        .collect::<Result<Vec<_>>>()?;
    let mut thresholds = setup.thresholds;
    if cfg.subspace.thresholds == ThresholdRule::Balanced {
        let r_e = cfg.harness.detection_radius;
        thresholds = balanced_thresholds(&outcomes, r_e);
        for o in &mut outcomes {
            o.apply_thresholds(&thresholds, r_e);
        }
    }
    let music = aggregate(&outcomes.iter().map(|o| o.music_events).collect::<Vec<_>>())?;
    let somp = if cfg.harness.run_somp {
        Some(aggregate(&outcomes.iter().filter_map(|o| o.somp_events).collect::<Vec<_>>())?)
    } else {
        None
    };
    Ok(ExperimentResult {
        q0: setup.q0,
        rank_g: setup.rank_g,
        thresholds,
        outcomes,
        music,
        somp,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// M_B.
    NumBs,
    Q0,
    /// K per cluster.
    TargetsPerCluster,
    /// R_e (m).
    DetectionRadius,
    /// N·Δf (Hz).
    Bandwidth,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::NumBs => "num_bs",
            SweepAxis::Q0 => "q0",
            SweepAxis::TargetsPerCluster => "targets_per_cluster",
            SweepAxis::DetectionRadius => "detection_radius",
            SweepAxis::Bandwidth => "bandwidth",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Q0 axis only: keep Q0·M_B at this value.
    #[serde(default)]
    pub fixed_product: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub q0: usize,
    pub num_bs: usize,
    pub music: MetricsReport,
    pub somp: Option<MetricsReport>,
    pub wall_time_s: f64,
}

fn as_count(axis: SweepAxis, v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e9 {
        Ok(v as usize)
    } else {
        Err(Error::InvalidParameter {
            name: "sweep value",
            reason: format!("{} needs positive integers, got {v}", axis.as_str()),
        })
    }
}

/// Configuration of one sweep point.
pub fn apply_axis(base: &TrialConfig, spec: &SweepSpec, v: f64) -> Result<TrialConfig> {
    let mut c = base.clone();
    match spec.axis {
        SweepAxis::NumBs => c.scene.bs_elements = as_count(spec.axis, v)?,
        SweepAxis::Q0 => {
            let q0 = as_count(spec.axis, v)?;
            c.subspace.q0 = Some(q0);
            c.ofdm.symbols_per_block = c.ofdm.symbols_per_block.max(q0);
            if let Some(p) = spec.fixed_product {
                if p % q0 != 0 {
                    return Err(Error::invalid("sweep value", format!("Q0 = {q0} does not divide {p}")));
                }
                c.scene.bs_elements = p / q0;
            }
        }
        SweepAxis::TargetsPerCluster => c.harness.targets_per_cluster = as_count(spec.axis, v)?,
        SweepAxis::DetectionRadius => c.harness.detection_radius = v,
        SweepAxis::Bandwidth => {
            if !(v > 0.0) {
                return Err(Error::invalid("sweep value", "bandwidth must be positive"));
            }
            // Keep the delay window's range span.
            let scale = v / base.ofdm.bandwidth();
            c.ofdm.subcarrier_spacing = v / c.ofdm.num_subcarriers as f64;
            c.ofdm.num_taps = ((base.ofdm.num_taps as f64) * scale).ceil() as usize;
            c.ofdm.cp_len = c.ofdm.cp_len.max(c.ofdm.num_taps);
        }
    }
    c.validate()?;
    Ok(c)
}

/// One report per value, every point starting from the same base seed.
/// The detection-radius axis reuses a single set of trials.
pub fn sweep(base: &TrialConfig, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.values.is_empty() {
        return Err(Error::invalid("sweep values", "at least one value is required"));
    }
    if spec.fixed_product.is_some() && spec.axis != SweepAxis::Q0 {
        return Err(Error::invalid("fixed_product", "only applies to the q0 axis"));
    }
    let mut rows = Vec::with_capacity(spec.values.len());
    if spec.axis == SweepAxis::DetectionRadius {
        for &v in &spec.values {
            apply_axis(base, spec, v)?;
        }
        let run = run_experiment(base)?;
        let each = run.wall_time_s / spec.values.len() as f64;
        for &v in &spec.values {
            let (music, somp) = run.at_radius(v)?;
            rows.push(SweepRow {
                axis: spec.axis,
                value: v,
                q0: run.q0,
                num_bs: base.scene.bs_elements,
                music,
                somp,
                wall_time_s: each,
            });
        }
        return Ok(rows);
    }
    for &v in &spec.values {
        let cfg = apply_axis(base, spec, v)?;
        let run = run_experiment(&cfg)?;
        rows.push(SweepRow {
            axis: spec.axis,
            value: v,
            q0: run.q0,
            num_bs: cfg.scene.bs_elements,
            music: run.music,
            somp: run.somp,
            wall_time_s: run.wall_time_s,
        });
    }
    Ok(rows)
}
