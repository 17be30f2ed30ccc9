use crate::estimation::CirEstimate;
use crate::SPEED_OF_LIGHT;
use serde::{Deserialize, Serialize};

/// Group energies below this fraction of the strongest are rounding residue
/// of a noiseless fit.
const RESIDUE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClusterThreshold {
    /// ρ_l = factor × median over taps of the group energy.
    MedianMultiple { factor: f64 },
    Fixed { rho: f64 },
}

impl Default for ClusterThreshold {
    fn default() -> Self {
        ClusterThreshold::MedianMultiple { factor: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDetection {
    /// Detected taps Φ, 1-based, ascending.
    pub detected: Vec<usize>,
    /// Group energy of every tap, indexed by `l − 1`.
    pub energy: Vec<f64>,
    /// ρ_l, indexed by `l − 1`.
    pub thresholds: Vec<f64>,
    /// Path range estimate of each detected tap, aligned with `detected`.
    pub ranges: Vec<f64>,
}

/// Midpoint of tap `l` (1-based): `(2l − 1)·c₀ / (2B)`.
pub fn range_estimate(l: usize, bandwidth: f64) -> f64 {
    ((2 * l - 1) as f64 * SPEED_OF_LIGHT) / (2.0 * bandwidth)
}

pub fn detect_clusters(est: &CirEstimate, bandwidth: f64, rule: ClusterThreshold) -> ClusterDetection {
    let energy = est.group_energy.clone();
    let rho = match rule {
        ClusterThreshold::MedianMultiple { factor } => {
            let mut sorted = energy.clone();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len();
            let median = if n == 0 {
                0.0
            } else if n % 2 == 1 {
                sorted[n / 2]
            } else {
                0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
            };
            // A sparse solution has median zero; any surviving group above
            // rounding residue counts.
            let peak = sorted.last().copied().unwrap_or(0.0);
            (factor * median).max(RESIDUE * peak).max(f64::MIN_POSITIVE)
        }
        ClusterThreshold::Fixed { rho } => rho,
    };
    let thresholds = vec![rho; energy.len()];
    let detected: Vec<usize> = (1..=energy.len()).filter(|&l| energy[l - 1] >= thresholds[l - 1]).collect();
    let ranges = detected.iter().map(|&l| range_estimate(l, bandwidth)).collect();
    ClusterDetection {
        detected,
        energy,
        thresholds,
        ranges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn estimate(energy: Vec<f64>) -> CirEstimate {
        CirEstimate {
            symbols_per_block: 1,
            num_blocks: 1,
            taps: vec![DMatrix::zeros(energy.len(), 1)],
            group_energy: energy,
            omega: 0.0,
            iterations: 0,
            converged: true,
            objective_history: vec![],
        }
    }

    #[test]
    fn range_midpoints() {
        assert_eq!(range_estimate(1, 1e8), 1.5);
        assert_eq!(range_estimate(26, 1e8), 76.5);
    }

    #[test]
    fn sparse_and_dense_energies() {
        let mut e = vec![0.0; 40];
        e[9] = 4.0;
        e[19] = 0.5;
        e[29] = 1e-9;
        let d = detect_clusters(&estimate(e), 1e8, ClusterThreshold::default());
        assert_eq!(d.detected, vec![10, 20, 30]);
        assert_eq!(d.ranges, vec![28.5, 58.5, 88.5]);

        let mut e = vec![1.0; 11];
        e[4] = 3.5;
        e[7] = 2.9;
        let d = detect_clusters(&estimate(e.clone()), 1e8, ClusterThreshold::default());
        assert_eq!(d.detected, vec![5]);
        let d = detect_clusters(&estimate(e), 1e8, ClusterThreshold::Fixed { rho: 2.0 });
        assert_eq!(d.detected, vec![5, 8]);
    }

    #[test]
    fn rounding_residue_is_not_a_cluster() {
        let mut e = vec![1e-31; 40];
        e[9] = 4.0;
        e[19] = 1e-13;
        let d = detect_clusters(&estimate(e), 1e8, ClusterThreshold::default());
        assert_eq!(d.detected, vec![10]);
    }
}
