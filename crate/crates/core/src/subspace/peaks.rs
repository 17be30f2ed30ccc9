use super::{SpectrumGrid, Thresholds};
use serde::{Deserialize, Serialize};

/// Relative margin a local maximum must clear over every neighbour; rejects plateaus.
const PEAK_MARGIN: f64 = 1e-9;

/// MUSIC values lose about `ε·v` relative precision to cancellation in `Ūᴴψ̆`, so
/// ripple below a multiple of that is not a peak.
const ROUNDING_GUARD: f64 = 64.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Flattened index into the spectrum.
    pub index: usize,
    pub value: f64,
}

fn dominates(v: f64, neighbours: impl IntoIterator<Item = f64>) -> bool {
    let margin = PEAK_MARGIN.max(ROUNDING_GUARD * v);
    neighbours.into_iter().all(|n| v > n * (1.0 + margin))
}

/// Local maxima of the far spectrum over lattice neighbours μ ± 1.
pub fn local_maxima_far(values: &[f64], grid: &SpectrumGrid) -> Vec<Peak> {
    let mu = &grid.far_mu;
    (0..values.len())
        .filter(|&i| {
            let mut nb = Vec::with_capacity(2);
            if i > 0 && mu[i - 1] + 1 == mu[i] {
                nb.push(values[i - 1]);
            }
            if i + 1 < mu.len() && mu[i + 1] == mu[i] + 1 {
                nb.push(values[i + 1]);
            }
            dominates(values[i], nb)
        })
        .map(|index| Peak {
            index,
            value: values[index],
        })
        .collect()
}

/// Local maxima of the near spectrum over the 8-neighbourhood on the (ζ, μ) lattice.
pub fn local_maxima_near(values: &[f64], grid: &SpectrumGrid) -> Vec<Peak> {
    let rows = &grid.near_rows;
    let mut out = Vec::new();
    for (ri, row) in rows.iter().enumerate() {
        let adjacent: Vec<usize> = [ri.wrapping_sub(1), ri + 1]
            .into_iter()
            .filter(|&r| r < rows.len() && rows[r].mu.abs_diff(row.mu) == 1)
            .collect();
        for j in 0..row.len {
            let zeta = row.zeta_start + j;
            let i = row.offset + j as usize;
            let v = values[i];
            let mut nb = Vec::with_capacity(8);
            for z in [zeta.wrapping_sub(1), zeta + 1] {
                if let Some(k) = grid.near_index(ri, z) {
                    nb.push(values[k]);
                }
            }
            for &r in &adjacent {
                for z in [zeta.wrapping_sub(1), zeta, zeta + 1] {
                    if let Some(k) = grid.near_index(r, z) {
                        nb.push(values[k]);
                    }
                }
            }
            if dominates(v, nb) {
                out.push(Peak { index: i, value: v });
            }
        }
    }
    out
}

/// The `k` largest peaks, then those strictly above `threshold`.
pub fn top_k_above(peaks: Vec<Peak>, k: usize, threshold: f64) -> Vec<Peak> {
    let mut peaks = top_k(peaks, k);
    peaks.retain(|p| p.value > threshold);
    peaks
}

/// The `k` largest peaks, largest first.
pub fn top_k(mut peaks: Vec<Peak>, k: usize) -> Vec<Peak> {
    peaks.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.index.cmp(&b.index)));
    peaks.truncate(k);
    peaks
}

/// Distance (m) between the points at `(d1, θ1)` and `(d2, θ2)` from the IRS.
fn polar_distance((d1, t1): (f64, f64), (d2, t2): (f64, f64)) -> f64 {
    (d1 * d1 + d2 * d2 - 2.0 * d1 * d2 * (t1 - t2).cos()).max(0.0).sqrt()
}

/// Drops every near peak lying within `radius` metres of a larger one.
/// A ridge in the 2D spectrum breaks into several lattice maxima; this keeps
/// one per physical neighbourhood. `radius = 0` keeps all.
pub fn merge_near(mut peaks: Vec<Peak>, grid: &SpectrumGrid, radius: f64) -> Vec<Peak> {
    if radius <= 0.0 {
        return peaks;
    }
    peaks.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.index.cmp(&b.index)));
    let mut kept: Vec<(Peak, (f64, f64))> = Vec::with_capacity(peaks.len());
    for p in peaks {
        let at = grid.near_point(p.index);
        if kept.iter().all(|(_, q)| polar_distance(at, *q) >= radius) {
            kept.push((p, at));
        }
    }
    kept.into_iter().map(|(p, _)| p).collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeakSelection {
    pub far: Vec<Peak>,
    pub near: Vec<Peak>,
}

impl PeakSelection {
    /// Keeps the peaks strictly above their field's threshold.
    pub fn above(mut self, thr: &Thresholds) -> Self {
        self.far.retain(|p| p.value > thr.far);
        self.near.retain(|p| p.value > thr.near);
        self
    }
}

/// Local maxima of both spectra, near maxima merged within `merge_radius`,
/// and the `k_hat` largest of each kept. Thresholds are applied separately.
pub fn select_peaks(near: &[f64], far: &[f64], grid: &SpectrumGrid, k_hat: usize, merge_radius: f64) -> PeakSelection {
    PeakSelection {
        far: top_k(local_maxima_far(far, grid), k_hat),
        near: top_k(merge_near(local_maxima_near(near, grid), grid, merge_radius), k_hat),
    }
}

/// How a far and a near detection at (nearly) the same bearing are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dedup {
    /// Keep both.
    None,
    /// Drop the far detection when the near one sits within 2Δd of the upper
    /// end of its range run.
    PreferNearAtBoundary,
    /// Keep whichever detection has the larger spectrum value.
    #[default]
    HigherSpectrum,
}

/// Resolves far/near pairs whose bearings differ by at most `angle_tol` (rad).
pub fn deduplicate(sel: PeakSelection, grid: &SpectrumGrid, rule: Dedup, angle_tol: f64) -> PeakSelection {
    let tol = angle_tol + 1e-9 * grid.theta_step;
    let near_theta = |p: &Peak| grid.near_point(p.index).1;
    let far_theta = |p: &Peak| grid.far_theta(p.index);
    match rule {
        Dedup::None => sel,
        Dedup::PreferNearAtBoundary => {
            let far = sel
                .far
                .iter()
                .filter(|f| {
                    !sel.near.iter().any(|n| {
                        let (row, zeta) = grid.near_locate(n.index);
                        let r = &grid.near_rows[row];
                        let top = r.zeta_start + r.len - 1;
                        (near_theta(n) - far_theta(f)).abs() <= tol && top - zeta <= 2
                    })
                })
                .copied()
                .collect();
            PeakSelection { far, near: sel.near }
        }
        Dedup::HigherSpectrum => {
            let mut drop_far = vec![false; sel.far.len()];
            let mut drop_near = vec![false; sel.near.len()];
            for (i, f) in sel.far.iter().enumerate() {
                for (j, n) in sel.near.iter().enumerate() {
                    if (near_theta(n) - far_theta(f)).abs() <= tol {
                        if f.value >= n.value {
                            drop_near[j] = true;
                        } else {
                            drop_far[i] = true;
                        }
                    }
                }
            }
            PeakSelection {
                far: sel.far.iter().zip(&drop_far).filter(|(_, &d)| !d).map(|(p, _)| *p).collect(),
                near: sel.near.iter().zip(&drop_near).filter(|(_, &d)| !d).map(|(p, _)| *p).collect(),
            }
        }
    }
}
