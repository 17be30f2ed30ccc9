//! Phase III: positions from (range, AOA) estimates.
//!
//! A far-field target lies on the ray from the IRS at its AOA and on the
//! ellipse with foci user and IRS fixed by the estimated path length; the
//! intersection has a closed form. A near-field target additionally has an
//! estimated distance to the IRS and is refined by damped Gauss-Newton on a
//! three-term weighted residual.

use crate::geometry::{point_at, FieldType, Point2, Scene};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FarSolveConfig {
    /// ϖ_F: weight of the angle residual against the path-length residual.
    pub weight: f64,
    /// Residual the closed form must meet before the numerical solve takes over.
    pub fallback_tol: f64,
}

impl Default for FarSolveConfig {
    fn default() -> Self {
        Self {
            weight: 0.5,
            fallback_tol: 1e-8,
        }
    }
}

impl FarSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(Error::invalid("far.weight", "must lie in [0, 1]"));
        }
        if !(self.fallback_tol > 0.0) {
            return Err(Error::invalid("far.fallback_tol", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NearSolveConfig {
    /// ϖ_N1: angle residual weight.
    pub w_angle: f64,
    /// ϖ_N2: path-length residual weight. The IRS-distance term gets the rest.
    pub w_path: f64,
    pub max_iters: usize,
    /// Stop once ‖∇F‖ < grad_tol·(1 + F).
    pub grad_tol: f64,
    pub lambda0: f64,
    pub lambda_factor: f64,
    /// Iterates are kept at least this far from the IRS (m).
    pub min_irs_distance: f64,
}

impl Default for NearSolveConfig {
    fn default() -> Self {
        Self {
            w_angle: 1.0 / 3.0,
            w_path: 1.0 / 3.0,
            max_iters: 50,
            grad_tol: 1e-9,
            lambda0: 1e-3,
            lambda_factor: 10.0,
            min_irs_distance: 1e-3,
        }
    }
}

impl NearSolveConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |w: f64| (0.0..=1.0).contains(&w);
        if !ok(self.w_angle) || !ok(self.w_path) || self.w_angle + self.w_path > 1.0 + 1e-12 {
            return Err(Error::invalid("near weights", "need w_angle, w_path ≥ 0 with sum ≤ 1"));
        }
        if self.max_iters == 0 || !(self.grad_tol > 0.0) || !(self.lambda0 > 0.0) || !(self.lambda_factor > 1.0) {
            return Err(Error::invalid("near solver", "iteration controls must be positive"));
        }
        if !(self.min_irs_distance > 0.0) {
            return Err(Error::invalid("near.min_irs_distance", "must be positive"));
        }
        Ok(())
    }

    fn w_irs(&self) -> f64 {
        (1.0 - self.w_angle - self.w_path).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetEstimate {
    pub field: FieldType,
    pub cluster: usize,
    pub theta_hat: f64,
    /// Estimated target-IRS distance, near-field only.
    pub d_hat: Option<f64>,
    /// Estimated user-target-IRS-BS path length.
    pub d_utib_hat: f64,
    pub pos: Point2,
    /// Weighted objective at `pos`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Far-field only: the numerical ray-ellipse solve was used.
    pub fallback: bool,
    /// Score of the peak behind this estimate; zero when localized directly.
    pub value: f64,
}

/// Wraps an angle difference into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

fn bearing(irs: Point2, p: Point2) -> f64 {
    (irs.y - p.y).atan2(irs.x - p.x)
}

/// Weighted far-field objective at `p`.
pub fn far_objective(scene: &Scene, d_utib_hat: f64, theta_hat: f64, weight: f64, p: Point2) -> f64 {
    let path = scene.user_pos.distance(&p) + p.distance(&scene.irs_pos) + scene.irs_bs_distance() - d_utib_hat;
    let ang = wrap_angle(bearing(scene.irs_pos, p) - theta_hat);
    (1.0 - weight) * path * path + weight * ang * ang
}

/// Closed-form far-field position; numerical ray-ellipse solve when the
/// closed form is degenerate or misses zero residual.
pub fn localize_far(scene: &Scene, cluster: usize, d_utib_hat: f64, theta_hat: f64, cfg: &FarSolveConfig) -> Result<TargetEstimate> {
    cfg.validate()?;
    let dd = d_utib_hat - scene.irs_bs_distance();
    let (ax, ay) = (scene.irs_pos.x - scene.user_pos.x, scene.irs_pos.y - scene.user_pos.y);
    let a2 = ax * ax + ay * ay;
    let (s, c) = theta_hat.sin_cos();
    // The locus along the ray is s + |a − s·e| = D with a non-decreasing left side
    // starting at |a|; D = |a| along the user direction is the whole segment.
    let slack = 1e-12 * a2.sqrt().max(1.0);
    if dd <= a2.sqrt() + slack {
        return Err(Error::InconsistentMeasurement(format!(
            "path length {d_utib_hat} m does not exceed the user-IRS-BS length {}",
            a2.sqrt() + scene.irs_bs_distance()
        )));
    }
    let tol = cfg.fallback_tol * dd.max(1.0);
    let zero_residual = |p: Point2| {
        let path = scene.user_pos.distance(&p) + p.distance(&scene.irs_pos) - dd;
        let ang = wrap_angle(bearing(scene.irs_pos, p) - theta_hat);
        path.abs() <= tol && ang.abs() <= cfg.fallback_tol
    };
    let denom = 2.0 * (ax + ay * theta_hat.tan() - dd / c);
    let closed = (c.abs() > 1e-12 && denom.is_finite() && denom != 0.0).then(|| {
        let x = (dd * dd - a2) / denom;
        Point2::new(x + scene.irs_pos.x, x * theta_hat.tan() + scene.irs_pos.y)
    });
    let (pos, fallback) = match closed {
        Some(p) if zero_residual(p) => (p, false),
        _ => {
            let dir = (c, s);
            let f = |r: f64| r + (ax - r * dir.0).hypot(ay - r * dir.1) - dd;
            let (mut lo, mut hi) = (0.0, dd.max(1.0));
            while f(hi) < 0.0 {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            (point_at(scene.irs_pos, 0.5 * (lo + hi), theta_hat), true)
        }
    };
    Ok(TargetEstimate {
        value: 0.0,
        field: FieldType::Far,
        cluster,
        theta_hat,
        d_hat: None,
        d_utib_hat,
        pos,
        objective: far_objective(scene, d_utib_hat, theta_hat, cfg.weight, pos),
        iterations: 0,
        converged: true,
        fallback,
    })
}

/// Near-field measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearMeasurement {
    pub d_utib_hat: f64,
    pub theta_hat: f64,
    pub d_hat: f64,
}

/// Weighted residual vector (angle, path length, IRS distance) at `p`.
pub fn near_residuals(scene: &Scene, m: &NearMeasurement, cfg: &NearSolveConfig, p: Point2) -> [f64; 3] {
    let d_ti = p.distance(&scene.irs_pos);
    let d_ut = p.distance(&scene.user_pos);
    [
        cfg.w_angle.sqrt() * wrap_angle(bearing(scene.irs_pos, p) - m.theta_hat),
        cfg.w_path.sqrt() * (d_ut + d_ti + scene.irs_bs_distance() - m.d_utib_hat),
        cfg.w_irs().sqrt() * (d_ti - m.d_hat),
    ]
}

/// Rows ∂r_i/∂(x, y) of [`near_residuals`].
pub fn near_jacobian(scene: &Scene, cfg: &NearSolveConfig, p: Point2) -> [[f64; 2]; 3] {
    let (dx, dy) = (scene.irs_pos.x - p.x, scene.irs_pos.y - p.y);
    let r2 = dx * dx + dy * dy;
    let r = r2.sqrt();
    let (ux, uy) = (p.x - scene.user_pos.x, p.y - scene.user_pos.y);
    let d_ut = ux.hypot(uy);
    let (gx, gy) = if d_ut > 0.0 { (ux / d_ut, uy / d_ut) } else { (0.0, 0.0) };
    let (w1, w2, w3) = (cfg.w_angle.sqrt(), cfg.w_path.sqrt(), cfg.w_irs().sqrt());
    [
        [w1 * dy / r2, -w1 * dx / r2],
        [w2 * (gx - dx / r), w2 * (gy - dy / r)],
        [-w3 * dx / r, -w3 * dy / r],
    ]
}

pub fn near_objective(scene: &Scene, m: &NearMeasurement, cfg: &NearSolveConfig, p: Point2) -> f64 {
    near_residuals(scene, m, cfg, p).iter().map(|r| r * r).sum()
}

fn keep_off_irs(irs: Point2, p: Point2, min: f64) -> Point2 {
    let d = p.distance(&irs);
    if d >= min {
        return p;
    }
    if d == 0.0 {
        return Point2::new(irs.x, irs.y - min);
    }
    let k = min / d;
    Point2::new(irs.x + (p.x - irs.x) * k, irs.y + (p.y - irs.y) * k)
}

/// Levenberg-damped Gauss-Newton from the polar point `(d̂, θ̂)`.
pub fn localize_near(scene: &Scene, cluster: usize, m: &NearMeasurement, cfg: &NearSolveConfig) -> Result<TargetEstimate> {
    cfg.validate()?;
    if !(m.d_hat > 0.0) {
        return Err(Error::invalid("d_hat", "must be positive"));
    }
    let mut p = keep_off_irs(scene.irs_pos, point_at(scene.irs_pos, m.d_hat, m.theta_hat), cfg.min_irs_distance);
    let mut f = near_objective(scene, m, cfg, p);
    let mut lambda = cfg.lambda0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let r = near_residuals(scene, m, cfg, p);
        let j = near_jacobian(scene, cfg, p);
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..3 {
            a11 += j[i][0] * j[i][0];
            a12 += j[i][0] * j[i][1];
            a22 += j[i][1] * j[i][1];
            g1 += j[i][0] * r[i];
            g2 += j[i][1] * r[i];
        }
        if 2.0 * g1.hypot(g2) < cfg.grad_tol * (1.0 + f) {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = false;
        while lambda < 1e16 {
            let (b11, b22) = (a11 + lambda, a22 + lambda);
            let det = b11 * b22 - a12 * a12;
            let sx = -(b22 * g1 - a12 * g2) / det;
            let sy = -(b11 * g2 - a12 * g1) / det;
            let trial = keep_off_irs(scene.irs_pos, Point2::new(p.x + sx, p.y + sy), cfg.min_irs_distance);
            let ft = near_objective(scene, m, cfg, trial);
            if ft <= f {
                let stalled = trial == p;
                p = trial;
                f = ft;
                lambda = (lambda / cfg.lambda_factor).max(1e-12);
                accepted = !stalled;
                break;
            }
            lambda *= cfg.lambda_factor;
        }
        if !accepted {
            break;
        }
    }
    Ok(TargetEstimate {
        value: 0.0,
        field: FieldType::Near,
        cluster,
        theta_hat: m.theta_hat,
        d_hat: Some(m.d_hat),
        d_utib_hat: m.d_utib_hat,
        pos: p,
        objective: f,
        iterations,
        converged,
        fallback: false,
    })
}
