//! CSV outputs. Column order is fixed; an undefined probability (no target of
//! that field type) is an empty field, distinct from `0`.
//!
//! | file | columns |
//! |------|---------|
//! | `truth.csv` | trial, target, field, tap, x_m, y_m, pathloss |
//! | `estimates.csv` | trial, method, cluster, field, theta_rad, d_m, d_utib_m, x_m, y_m, value, objective, iterations, converged, fallback |
//! | `metrics.csv` | method, trials, then [`COUNT_COLUMNS`], then [`PROB_COLUMNS`], wall_time_s |
//! | `sweep.csv` | axis, value, q0, num_bs, method, trials, then [`COUNT_COLUMNS`], [`PROB_COLUMNS`], wall_time_s |
//! | `events.csv` | trial, method, then [`COUNT_COLUMNS`] |
//! | `clusters.csv` | trial, cluster, true_count, k_hat, near_grid_len, far_grid_len, music_detections |
//! | `spectra/trial<i>_cluster<l>_near.csv` | d_m, theta_rad, value |
//! | `spectra/trial<i>_cluster<l>_far.csv` | theta_rad, value |
//!
//! `d_m` in `estimates.csv` is empty for far-field estimates; `field` is `near` or `far`.

use anyhow::{Context, Result};
use irsloc::geometry::TargetTruth;
use irsloc::harness::{ClusterSpectra, ClusterSummary, MetricsReport, SweepRow, TrialEvents};
use irsloc::localize::TargetEstimate;
use std::path::Path;

pub const COUNT_COLUMNS: [&str; 8] = [
    "near_targets",
    "far_targets",
    "near_estimates",
    "far_estimates",
    "near_md",
    "far_md",
    "near_fa",
    "far_fa",
];

pub const PROB_COLUMNS: [&str; 4] = ["p_md_near", "p_fa_near", "p_md_far", "p_fa_far"];

pub const TRUTH_HEADER: [&str; 7] = ["trial", "target", "field", "tap", "x_m", "y_m", "pathloss"];

pub const ESTIMATE_HEADER: [&str; 14] = [
    "trial",
    "method",
    "cluster",
    "field",
    "theta_rad",
    "d_m",
    "d_utib_m",
    "x_m",
    "y_m",
    "value",
    "objective",
    "iterations",
    "converged",
    "fallback",
];

pub const CLUSTER_HEADER: [&str; 7] = [
    "trial",
    "cluster",
    "true_count",
    "k_hat",
    "near_grid_len",
    "far_grid_len",
    "music_detections",
];

type Writer = csv::Writer<std::fs::File>;

pub fn create<S: AsRef<str>>(path: &Path, header: &[S]) -> Result<Writer> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header.iter().map(|h| h.as_ref()))?;
    Ok(w)
}

fn header_with(prefix: &[&'static str], with_probs: bool) -> Vec<&'static str> {
    let mut h = prefix.to_vec();
    h.extend(COUNT_COLUMNS);
    if with_probs {
        h.extend(PROB_COLUMNS);
        h.push("wall_time_s");
    }
    h
}

pub fn metrics_header() -> Vec<&'static str> {
    header_with(&["method", "trials"], true)
}

pub fn sweep_header() -> Vec<&'static str> {
    header_with(&["axis", "value", "q0", "num_bs", "method", "trials"], true)
}

pub fn events_header() -> Vec<&'static str> {
    header_with(&["trial", "method"], false)
}

fn counts(e: &TrialEvents) -> [String; 8] {
    [
        e.near_targets,
        e.far_targets,
        e.near_estimates,
        e.far_estimates,
        e.near_md,
        e.far_md,
        e.near_fa,
        e.far_fa,
    ]
    .map(|c| c.to_string())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn report_fields(m: &MetricsReport) -> Vec<String> {
    let mut row = vec![m.trials.to_string()];
    row.extend(counts(&m.totals));
    row.extend([m.p_md_near, m.p_fa_near, m.p_md_far, m.p_fa_far].map(opt));
    row
}

pub fn write_truth(w: &mut Writer, trial: usize, truth: &[TargetTruth], taps: &[usize]) -> Result<()> {
    for (k, (t, tap)) in truth.iter().zip(taps).enumerate() {
        w.write_record([
            trial.to_string(),
            k.to_string(),
            t.field.as_str().to_string(),
            tap.to_string(),
            t.pos.x.to_string(),
            t.pos.y.to_string(),
            t.pathloss.to_string(),
        ])?;
    }
    Ok(())
}

pub fn write_estimates(w: &mut Writer, trial: usize, method: &str, est: &[TargetEstimate]) -> Result<()> {
    for e in est {
        w.write_record([
            trial.to_string(),
            method.to_string(),
            e.cluster.to_string(),
            e.field.as_str().to_string(),
            e.theta_hat.to_string(),
            opt(e.d_hat),
            e.d_utib_hat.to_string(),
            e.pos.x.to_string(),
            e.pos.y.to_string(),
            e.value.to_string(),
            e.objective.to_string(),
            e.iterations.to_string(),
            e.converged.to_string(),
            e.fallback.to_string(),
        ])?;
    }
    Ok(())
}

pub fn write_metrics(w: &mut Writer, method: &str, m: &MetricsReport, wall_time_s: f64) -> Result<()> {
    let mut row = vec![method.to_string()];
    row.extend(report_fields(m));
    row.push(wall_time_s.to_string());
    w.write_record(row)?;
    Ok(())
}

pub fn write_sweep_row(w: &mut Writer, r: &SweepRow) -> Result<()> {
    let methods = std::iter::once(("music", &r.music)).chain(r.somp.as_ref().map(|s| ("somp", s)));
    for (method, m) in methods {
        let mut row = vec![
            r.axis.as_str().to_string(),
            r.value.to_string(),
            r.q0.to_string(),
            r.num_bs.to_string(),
            method.to_string(),
        ];
        row.extend(report_fields(m));
        row.push(r.wall_time_s.to_string());
        w.write_record(row)?;
    }
    Ok(())
}

pub fn write_events(w: &mut Writer, trial: usize, method: &str, e: &TrialEvents) -> Result<()> {
    let mut row = vec![trial.to_string(), method.to_string()];
    row.extend(counts(e));
    w.write_record(row)?;
    Ok(())
}

pub fn write_cluster(w: &mut Writer, trial: usize, c: &ClusterSummary) -> Result<()> {
    w.write_record(
        [trial, c.cluster, c.true_count, c.k_hat, c.near_grid_len, c.far_grid_len, c.music_detections]
            .map(|v| v.to_string()),
    )?;
    Ok(())
}

/// Writes the near and far spectrum files of one cluster into `dir`.
pub fn write_spectra(dir: &Path, trial: usize, sp: &ClusterSpectra) -> Result<()> {
    let l = sp.grid.cluster;
    let mut near = create(&dir.join(format!("trial{trial}_cluster{l}_near.csv")), &["d_m", "theta_rad", "value"])?;
    for ((d, theta), v) in sp.grid.near_points().zip(&sp.near) {
        near.write_record([d.to_string(), theta.to_string(), v.to_string()])?;
    }
    near.flush()?;
    let mut far = create(&dir.join(format!("trial{trial}_cluster{l}_far.csv")), &["theta_rad", "value"])?;
    for (theta, v) in sp.grid.far_thetas().zip(&sp.far) {
        far.write_record([theta.to_string(), v.to_string()])?;
    }
    far.flush()?;
    Ok(())
}
