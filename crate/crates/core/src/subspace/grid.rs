//! Search lattices for the MUSIC spectra.
//!
//! The lattice is `d = ζ·Δd`, `θ = μ·Δθ` with positive integers ζ, μ. The
//! target region L is the sector `θ ∈ [θ_min, θ_max]`, `d ≤ d_max` below the
//! IRS; its near part is `d ≤ d_R` and its far part `d_R < d ≤ d_max`. A cluster
//! window keeps points whose total path range lies in `[(l−1)·w, l·w)`.
//! The total range is non-decreasing in `d` along any ray from the IRS, so
//! each bearing contributes one contiguous run of ranges.

use crate::geometry::Scene;
use crate::{Error, Result, SPEED_OF_LIGHT};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const LATTICE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Δd (m).
    pub d_step: f64,
    /// Δθ (rad).
    pub theta_step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            d_step: 0.1,
            theta_step: PI / 1800.0,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_step > 0.0) {
            return Err(Error::invalid("d_step", "must be positive"));
        }
        if !(self.theta_step > 0.0) || self.theta_step >= PI {
            return Err(Error::invalid("theta_step", "must lie in (0, π)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetRegion {
    /// Bearing limits (rad), within [0, π).
    pub theta_min: f64,
    pub theta_max: f64,
    /// Outer radius around the IRS (m).
    pub d_max: f64,
}

impl Default for TargetRegion {
    fn default() -> Self {
        Self {
            theta_min: 30f64.to_radians(),
            theta_max: 150f64.to_radians(),
            d_max: 150.0,
        }
    }
}

impl TargetRegion {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.theta_min && self.theta_min <= self.theta_max && self.theta_max < PI) {
            return Err(Error::invalid("region", "need 0 ≤ theta_min ≤ theta_max < π"));
        }
        if !(self.d_max > 0.0) {
            return Err(Error::invalid("region.d_max", "must be positive"));
        }
        Ok(())
    }

    pub fn contains(&self, d: f64, theta: f64) -> bool {
        d > 0.0 && d <= self.d_max && theta >= self.theta_min && theta <= self.theta_max
    }
}

/// One bearing of the near lattice: ζ ∈ [zeta_start, zeta_start + len).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearRow {
    pub mu: u32,
    pub theta: f64,
    pub zeta_start: u32,
    pub len: u32,
    /// Index of the row's first point in the flattened near grid.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    /// 1-based cluster tap, 0 for an unrestricted grid.
    pub cluster: usize,
    pub d_step: f64,
    pub theta_step: f64,
    /// Rows ordered by ascending μ.
    pub near_rows: Vec<NearRow>,
    /// Far lattice indices, ascending.
    pub far_mu: Vec<u32>,
}

impl SpectrumGrid {
    pub fn near_len(&self) -> usize {
        self.near_rows.last().map_or(0, |r| r.offset + r.len as usize)
    }

    pub fn far_len(&self) -> usize {
        self.far_mu.len()
    }

    pub fn far_theta(&self, i: usize) -> f64 {
        self.far_mu[i] as f64 * self.theta_step
    }

    pub fn far_thetas(&self) -> impl Iterator<Item = f64> + '_ {
        self.far_mu.iter().map(move |&m| m as f64 * self.theta_step)
    }

    /// `(d, θ)` of every near point in flattened order.
    pub fn near_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.near_rows.iter().flat_map(move |r| {
            (0..r.len).map(move |j| ((r.zeta_start + j) as f64 * self.d_step, r.theta))
        })
    }

    /// Row index and ζ of flattened near point `i`.
    pub fn near_locate(&self, i: usize) -> (usize, u32) {
        let row = self.near_rows.partition_point(|r| r.offset + r.len as usize <= i);
        let r = &self.near_rows[row];
        (row, r.zeta_start + (i - r.offset) as u32)
    }

    pub fn near_point(&self, i: usize) -> (f64, f64) {
        let (row, zeta) = self.near_locate(i);
        (zeta as f64 * self.d_step, self.near_rows[row].theta)
    }

    /// Flattened index of lattice point (ζ, row), if present.
    pub fn near_index(&self, row: usize, zeta: u32) -> Option<usize> {
        let r = self.near_rows.get(row)?;
        (zeta >= r.zeta_start && zeta < r.zeta_start + r.len).then(|| r.offset + (zeta - r.zeta_start) as usize)
    }

    /// Row holding bearing index `mu`.
    pub fn near_row_of(&self, mu: u32) -> Option<usize> {
        self.near_rows.binary_search_by_key(&mu, |r| r.mu).ok()
    }

    pub fn contains_near(&self, zeta: u32, mu: u32) -> bool {
        self.near_row_of(mu).and_then(|row| self.near_index(row, zeta)).is_some()
    }

    pub fn contains_far(&self, mu: u32) -> bool {
        self.far_mu.binary_search(&mu).is_ok()
    }
}

/// Inclusive μ range covering the region's bearings, θ strictly inside (0, π).
fn mu_range(region: &TargetRegion, dt: f64) -> (u32, u32) {
    let lo = ((region.theta_min / dt) - LATTICE_TOL).ceil().max(1.0) as u32;
    let cap = (PI / dt).ceil() as u32;
    let mut hi = ((region.theta_max / dt) + LATTICE_TOL).floor() as u32;
    hi = hi.min(cap);
    while hi >= lo && hi as f64 * dt >= PI {
        hi -= 1;
    }
    (lo, hi)
}

fn near_zeta_max(scene: &Scene, region: &TargetRegion, dd: f64) -> u32 {
    let r = scene.near_field_radius.min(region.d_max);
    ((r / dd) + LATTICE_TOL).floor() as u32
}

/// First ζ in `[lo, hi]` with `f(ζ) ≥ target` (or `hi + 1`), `f` non-decreasing.
fn first_at_least(lo: u32, hi: u32, target: f64, f: impl Fn(u32) -> f64) -> u32 {
    let (mut a, mut b) = (lo, hi + 1);
    while a < b {
        let m = a + (b - a) / 2;
        if f(m) >= target {
            b = m;
        } else {
            a = m + 1;
        }
    }
    a
}

/// Unrestricted lattices R^N (near region) and R^F (bearings with a far part).
pub fn full_grids(scene: &Scene, region: &TargetRegion, cfg: &GridConfig) -> Result<SpectrumGrid> {
    cfg.validate()?;
    region.validate()?;
    let (lo, hi) = mu_range(region, cfg.theta_step);
    let zmax = near_zeta_max(scene, region, cfg.d_step);
    let mut near_rows = Vec::new();
    let mut offset = 0;
    if zmax >= 1 {
        for mu in lo..=hi {
            near_rows.push(NearRow {
                mu,
                theta: mu as f64 * cfg.theta_step,
                zeta_start: 1,
                len: zmax,
                offset,
            });
            offset += zmax as usize;
        }
    }
    let far_mu = if region.d_max > scene.near_field_radius {
        (lo..=hi).collect()
    } else {
        Vec::new()
    };
    Ok(SpectrumGrid {
        cluster: 0,
        d_step: cfg.d_step,
        theta_step: cfg.theta_step,
        near_rows,
        far_mu,
    })
}

/// Lattices restricted to the window of cluster `l` (1-based) at bandwidth `bandwidth`.
pub fn build_grids(scene: &Scene, bandwidth: f64, region: &TargetRegion, cfg: &GridConfig, l: usize) -> Result<SpectrumGrid> {
    cfg.validate()?;
    region.validate()?;
    if l == 0 {
        return Err(Error::invalid("cluster", "taps are 1-based"));
    }
    let w = SPEED_OF_LIGHT / bandwidth;
    let (lo_r, hi_r) = ((l - 1) as f64 * w, l as f64 * w);
    let (lo, hi) = mu_range(region, cfg.theta_step);
    let zmax = near_zeta_max(scene, region, cfg.d_step);
    let mut near_rows = Vec::new();
    let mut far_mu = Vec::new();
    let mut offset = 0;
    for mu in lo..=hi {
        let theta = mu as f64 * cfg.theta_step;
        let total = |d: f64| scene.total_range_at(d, theta);
        if zmax >= 1 {
            let at = |z: u32| total(z as f64 * cfg.d_step);
            let a = first_at_least(1, zmax, lo_r, at);
            let b = first_at_least(a, zmax, hi_r, at);
            if b > a {
                near_rows.push(NearRow {
                    mu,
                    theta,
                    zeta_start: a,
                    len: b - a,
                    offset,
                });
                offset += (b - a) as usize;
            }
        }
        if region.d_max > scene.near_field_radius
            && total(scene.near_field_radius) < hi_r
            && total(region.d_max) >= lo_r
        {
            far_mu.push(mu);
        }
    }
    Ok(SpectrumGrid {
        cluster: l,
        d_step: cfg.d_step,
        theta_step: cfg.theta_step,
        near_rows,
        far_mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::tap_of_range;
    use crate::geometry::{aoa_from, Point2, UlaGeometry};
    use std::f64::consts::FRAC_PI_2;

    fn remark_scene() -> Scene {
        let g = UlaGeometry::new(4, 0.005).unwrap();
        Scene::new(
            Point2::new(0.0, 0.0),
            Point2::new(20.0, 15.0),
            Point2::new(20.0, 20.0),
            0.01,
            30.0,
            g,
            g,
        )
        .unwrap()
    }

    fn quarter() -> TargetRegion {
        TargetRegion {
            theta_min: 0.0,
            theta_max: FRAC_PI_2,
            d_max: 80.0,
        }
    }

    #[test]
    fn remark_full_grid_size() {
        let g = full_grids(&remark_scene(), &quarter(), &GridConfig::default()).unwrap();
        assert_eq!(g.near_rows.len(), 900);
        assert_eq!(g.near_len(), 270_000);
        assert_eq!(g.far_len(), 900);
    }

    #[test]
    fn restricted_points_satisfy_window() {
        let s = remark_scene();
        let cfg = GridConfig {
            d_step: 0.2,
            theta_step: PI / 900.0,
        };
        for l in [10, 14, 20] {
            let g = build_grids(&s, 4e8, &quarter(), &cfg, l).unwrap();
            let w = 0.75;
            for (d, th) in g.near_points() {
                let t = s.total_range_at(d, th);
                assert!(t >= (l - 1) as f64 * w && t < l as f64 * w);
                assert!(d <= 30.0);
            }
            // Every lattice point outside the rows fails the window.
            for row in &g.near_rows {
                for z in [row.zeta_start - 1, row.zeta_start + row.len] {
                    if z >= 1 && z as f64 * cfg.d_step <= 30.0 {
                        let t = s.total_range_at(z as f64 * cfg.d_step, row.theta);
                        assert!(t < (l - 1) as f64 * w || t >= l as f64 * w);
                    }
                }
            }
        }
        let beyond = build_grids(&s, 1e8, &quarter(), &GridConfig::default(), 80).unwrap();
        assert_eq!(beyond.near_len(), 0);
    }

    #[test]
    fn index_helpers_round_trip() {
        let s = remark_scene();
        let g = build_grids(&s, 2e8, &quarter(), &GridConfig::default(), 25).unwrap();
        assert!(g.near_len() > 0);
        for i in (0..g.near_len()).step_by(37) {
            let (row, z) = g.near_locate(i);
            assert_eq!(g.near_index(row, z), Some(i));
            let (d, th) = g.near_point(i);
            assert!(g.contains_near((d / g.d_step).round() as u32, (th / g.theta_step).round() as u32));
        }
    }

    #[test]
    fn truth_is_inside_own_cluster_grid() {
        let s = remark_scene();
        let cfg = GridConfig::default();
        let mut rng = crate::rng::stream(3, crate::rng::Domain::Test, 0, 0);
        use rand::Rng;
        for _ in 0..200 {
            let d = 80.0 * rng.random::<f64>().sqrt();
            let th = rng.random_range(0.01..FRAC_PI_2);
            let p = s.point_at(d, th);
            let total = s.user_pos.distance(&p) + d + s.irs_bs_distance();
            let l = tap_of_range(total, 0.75);
            let g = build_grids(&s, 4e8, &quarter(), &cfg, l).unwrap();
            let theta = aoa_from(s.irs_pos, p).unwrap();
            let mu = theta / cfg.theta_step;
            if d <= 30.0 {
                let z = d / cfg.d_step;
                let hit = [(z.floor(), mu.floor()), (z.ceil(), mu.floor()), (z.floor(), mu.ceil()), (z.ceil(), mu.ceil())]
                    .iter()
                    .any(|&(zz, mm)| g.contains_near(zz as u32, mm as u32));
                assert!(hit, "near target d={d} th={th}");
            } else {
                assert!(g.contains_far(mu.round() as u32) || g.contains_far(mu.floor() as u32) || g.contains_far(mu.ceil() as u32));
            }
        }
    }
}
