use crate::geometry::{FieldType, TargetTruth};
use crate::localize::TargetEstimate;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Event counts of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrialEvents {
    pub near_targets: usize,
    pub far_targets: usize,
    pub near_estimates: usize,
    pub far_estimates: usize,
    pub near_md: usize,
    pub far_md: usize,
    pub near_fa: usize,
    pub far_fa: usize,
}

/// A truth is missed when no estimate of its field type lies within `r_e`;
/// an estimate is a false alarm when no truth of its field type does.
/// Matching is not one-to-one.
pub fn classify_events(truth: &[TargetTruth], estimates: &[TargetEstimate], r_e: f64) -> TrialEvents {
    let mut ev = TrialEvents::default();
    for t in truth {
        let hit = estimates.iter().any(|e| e.field == t.field && e.pos.distance(&t.pos) <= r_e);
        match t.field {
            FieldType::Near => {
                ev.near_targets += 1;
                ev.near_md += usize::from(!hit);
            }
            FieldType::Far => {
                ev.far_targets += 1;
                ev.far_md += usize::from(!hit);
            }
        }
    }
    for e in estimates {
        let hit = truth.iter().any(|t| t.field == e.field && e.pos.distance(&t.pos) <= r_e);
        match e.field {
            FieldType::Near => {
                ev.near_estimates += 1;
                ev.near_fa += usize::from(!hit);
            }
            FieldType::Far => {
                ev.far_estimates += 1;
                ev.far_fa += usize::from(!hit);
            }
        }
    }
    ev
}

/// Summed event counts and the four probabilities. A probability is `None`
/// when no target of its field type occurred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub trials: usize,
    pub totals: TrialEvents,
    pub p_md_near: Option<f64>,
    pub p_md_far: Option<f64>,
    /// False alarms over the number of near-field targets.
    pub p_fa_near: Option<f64>,
    pub p_fa_far: Option<f64>,
}

impl MetricsReport {
    /// P_MD + P_FA of one field type.
    pub fn error_sum(&self, field: FieldType) -> Option<f64> {
        match field {
            FieldType::Near => Some(self.p_md_near? + self.p_fa_near?),
            FieldType::Far => Some(self.p_md_far? + self.p_fa_far?),
        }
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn aggregate(events: &[TrialEvents]) -> Result<MetricsReport> {
    if events.is_empty() {
        return Err(Error::invalid("events", "at least one trial is required"));
    }
    let mut s = TrialEvents::default();
    for e in events {
        s.near_targets += e.near_targets;
        s.far_targets += e.far_targets;
        s.near_estimates += e.near_estimates;
        s.far_estimates += e.far_estimates;
        s.near_md += e.near_md;
        s.far_md += e.far_md;
        s.near_fa += e.near_fa;
        s.far_fa += e.far_fa;
    }
    Ok(MetricsReport {
        trials: events.len(),
        totals: s,
        p_md_near: ratio(s.near_md, s.near_targets),
        p_md_far: ratio(s.far_md, s.far_targets),
        p_fa_near: ratio(s.near_fa, s.near_targets),
        p_fa_far: ratio(s.far_fa, s.far_targets),
    })
}

/// Scores gathered for threshold calibration of one field type.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScorePool {
    /// Per target, the largest score among estimates within `r_e` (0 if none).
    pub target_best: Vec<f64>,
    /// Scores of estimates with no target within `r_e`.
    pub false_scores: Vec<f64>,
}

impl ScorePool {
    pub fn add_trial(&mut self, truth: &[TargetTruth], estimates: &[TargetEstimate], field: FieldType, r_e: f64) {
        let of_field = || estimates.iter().filter(|e| e.field == field);
        for t in truth.iter().filter(|t| t.field == field) {
            let best = of_field()
                .filter(|e| e.pos.distance(&t.pos) <= r_e)
                .map(|e| e.value)
                .fold(0.0, f64::max);
            self.target_best.push(best);
        }
        for e in of_field() {
            if !truth.iter().any(|t| t.field == field && e.pos.distance(&t.pos) <= r_e) {
                self.false_scores.push(e.value);
            }
        }
    }

    /// Missed detections and false alarms when scores `> thr` are kept.
    pub fn counts(&self, thr: f64) -> (usize, usize) {
        (
            self.target_best.iter().filter(|&&v| v <= thr).count(),
            self.false_scores.iter().filter(|&&v| v > thr).count(),
        )
    }

    /// Threshold whose missed-detection and false-alarm counts are closest,
    /// ties going to the smaller total and then the smaller threshold.
    /// Candidates are 0 and every pooled score.
    pub fn balanced_threshold(&self) -> f64 {
        let mut cands: Vec<f64> = std::iter::once(0.0)
            .chain(self.target_best.iter().copied())
            .chain(self.false_scores.iter().copied())
            .collect();
        cands.sort_by(f64::total_cmp);
        cands.dedup();
        let mut tb = self.target_best.clone();
        tb.sort_by(f64::total_cmp);
        let mut fs = self.false_scores.clone();
        fs.sort_by(f64::total_cmp);
        let mut best = (usize::MAX, usize::MAX, 0.0);
        for &c in &cands {
            let md = tb.partition_point(|&v| v <= c);
            let fa = fs.len() - fs.partition_point(|&v| v <= c);
            let key = (md.abs_diff(fa), md + fa);
            if key < (best.0, best.1) {
                best = (key.0, key.1, c);
            }
        }
        best.2
    }
}
