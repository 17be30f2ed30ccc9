//! Scene layout and array manifolds.
//!
//! Positions are 2D, in metres. Both arrays are uniform linear arrays laid
//! along the +x axis starting at their reference position, element 0 being the
//! phase reference. Targets live strictly below the IRS (`y < y_I`) and the
//! angle of arrival (AOA) at the IRS is reported in `[0, π)`. A point at range
//! `d` and AOA `θ` from the IRS sits at `irs − d·(cos θ, sin θ)`.

use crate::{Error, Result, C64};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UlaGeometry {
    pub num_elements: usize,
    /// Element spacing (m).
    pub spacing: f64,
}

impl UlaGeometry {
    pub fn new(num_elements: usize, spacing: f64) -> Result<Self> {
        let g = Self {
            num_elements,
            spacing,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_elements == 0 {
            return Err(Error::invalid("num_elements", "must be at least 1"));
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::invalid("spacing", format!("{} is not positive", self.spacing)));
        }
        Ok(())
    }

    /// Position of element `m` for an array anchored at `origin`.
    pub fn element(&self, origin: Point2, m: usize) -> Point2 {
        Point2::new(origin.x + m as f64 * self.spacing, origin.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldType {
    Near,
    Far,
}

impl FieldType {
    pub fn as_str(&self) -> &'static str {
        match self {
            FieldType::Near => "near",
            FieldType::Far => "far",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetTruth {
    pub pos: Point2,
    /// Amplitude path loss of the user-target-IRS link.
    pub pathloss: f64,
    pub field: FieldType,
}

/// Range argument of a steering vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Range {
    Finite(f64),
    Infinite,
}

/// Phase model used when synthesizing near-field target responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteeringModel {
    /// Second-order (Fresnel) phase, the same manifold the estimator searches.
    #[default]
    Fresnel,
    /// Exact spherical-wave phase.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub user_pos: Point2,
    pub bs_pos: Point2,
    pub irs_pos: Point2,
    pub targets: Vec<TargetTruth>,
    pub wavelength: f64,
    /// Near-field boundary radius around the IRS (m).
    pub near_field_radius: f64,
    pub irs_array: UlaGeometry,
    pub bs_array: UlaGeometry,
}

impl Scene {
    pub fn new(
        user_pos: Point2,
        bs_pos: Point2,
        irs_pos: Point2,
        wavelength: f64,
        near_field_radius: f64,
        irs_array: UlaGeometry,
        bs_array: UlaGeometry,
    ) -> Result<Self> {
        let scene = Self {
            user_pos,
            bs_pos,
            irs_pos,
            targets: Vec::new(),
            wavelength,
            near_field_radius,
            irs_array,
            bs_array,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) || !self.wavelength.is_finite() {
            return Err(Error::invalid("wavelength", "must be positive"));
        }
        if !(self.near_field_radius > 0.0) {
            return Err(Error::invalid("near_field_radius", "must be positive"));
        }
        self.irs_array.validate()?;
        self.bs_array.validate()?;
        let pts = [self.user_pos, self.bs_pos, self.irs_pos];
        for i in 0..3 {
            for j in i + 1..3 {
                if pts[i].distance(&pts[j]) == 0.0 {
                    return Err(Error::invalid(
                        "positions",
                        "user, BS and IRS must be pairwise distinct",
                    ));
                }
            }
        }
        for (k, t) in self.targets.iter().enumerate() {
            self.check_target(t.pos)
                .map_err(|e| Error::invalid("targets", format!("target {k}: {e}")))?;
            if t.field != self.classify(t.pos) {
                return Err(Error::invalid("targets", format!("target {k} has a stale field tag")));
            }
        }
        Ok(())
    }

    fn check_target(&self, pos: Point2) -> Result<()> {
        if !(pos.y < self.irs_pos.y) {
            return Err(Error::invalid(
                "target",
                format!("y = {} must lie below the IRS at y = {}", pos.y, self.irs_pos.y),
            ));
        }
        Ok(())
    }

    /// Near iff the distance to the IRS is at most `near_field_radius`.
    pub fn classify(&self, pos: Point2) -> FieldType {
        if pos.distance(&self.irs_pos) <= self.near_field_radius {
            FieldType::Near
        } else {
            FieldType::Far
        }
    }

    /// Adds a target and returns its index.
    pub fn add_target(&mut self, pos: Point2, pathloss: f64) -> Result<usize> {
        self.check_target(pos)?;
        if !(pathloss >= 0.0) {
            return Err(Error::invalid("pathloss", "must be nonnegative"));
        }
        self.targets.push(TargetTruth {
            pos,
            pathloss,
            field: self.classify(pos),
        });
        Ok(self.targets.len() - 1)
    }

    pub fn with_targets(mut self, targets: &[(Point2, f64)]) -> Result<Self> {
        for &(p, b) in targets {
            self.add_target(p, b)?;
        }
        Ok(self)
    }

    fn target(&self, k: usize) -> Result<&TargetTruth> {
        self.targets.get(k).ok_or(Error::IndexOutOfRange {
            what: "target",
            index: k,
            len: self.targets.len(),
        })
    }

    /// Distance from the IRS to the IRS-BS reference points.
    pub fn irs_bs_distance(&self) -> f64 {
        self.irs_pos.distance(&self.bs_pos)
    }

    /// Point at range `d` and AOA `theta` from the IRS.
    pub fn point_at(&self, d: f64, theta: f64) -> Point2 {
        point_at(self.irs_pos, d, theta)
    }

    /// Total user-point-IRS-BS path length for a point at `(d, theta)`.
    pub fn total_range_at(&self, d: f64, theta: f64) -> f64 {
        let p = self.point_at(d, theta);
        self.user_pos.distance(&p) + d + self.irs_bs_distance()
    }
}

pub fn point_at(irs: Point2, d: f64, theta: f64) -> Point2 {
    Point2::new(irs.x - d * theta.cos(), irs.y - d * theta.sin())
}

/// AOA at `irs` of a point `p`, in `[0, π)`.
pub fn aoa_from(irs: Point2, p: Point2) -> Result<f64> {
    let dx = irs.x - p.x;
    let dy = irs.y - p.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::CoincidentWithIrs);
    }
    let mut theta = dy.atan2(dx);
    if theta < 0.0 {
        theta += PI;
    }
    if theta >= PI {
        theta -= PI;
    }
    Ok(theta)
}

pub fn distance_to_irs(scene: &Scene, k: usize) -> Result<f64> {
    Ok(scene.target(k)?.pos.distance(&scene.irs_pos))
}

pub fn aoa_to_irs(scene: &Scene, k: usize) -> Result<f64> {
    aoa_from(scene.irs_pos, scene.target(k)?.pos)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRanges {
    pub user_target: f64,
    pub target_irs: f64,
    pub irs_bs: f64,
}

impl PathRanges {
    pub fn total(&self) -> f64 {
        self.user_target + self.target_irs + self.irs_bs
    }
}

pub fn path_ranges(scene: &Scene, k: usize) -> Result<PathRanges> {
    let p = scene.target(k)?.pos;
    Ok(PathRanges {
        user_target: scene.user_pos.distance(&p),
        target_irs: p.distance(&scene.irs_pos),
        irs_bs: scene.irs_bs_distance(),
    })
}

/// Far-field response `exp(−j2π/λ · m·δ·cos η)`.
pub fn steering_far(geom: &UlaGeometry, wavelength: f64, eta: f64) -> DVector<C64> {
    let mut out = DVector::zeros(geom.num_elements);
    steering_into(geom, wavelength, Range::Infinite, eta, out.as_mut_slice());
    out
}

/// Near-field response with the second-order phase
/// `exp(−j2π/λ · (m·δ·cos η + (m·δ·sin η)² / (2d)))`.
pub fn steering_near(geom: &UlaGeometry, wavelength: f64, d: f64, eta: f64) -> Result<DVector<C64>> {
    if !(d > 0.0) {
        return Err(Error::invalid("d", format!("{d} is not positive")));
    }
    let mut out = DVector::zeros(geom.num_elements);
    steering_into(geom, wavelength, Range::Finite(d), eta, out.as_mut_slice());
    Ok(out)
}

/// Near-field response with the exact spherical phase
/// `exp(−j2π/λ · (r_m − d))`, `r_m` being the distance from the source to element `m`.
pub fn steering_exact(geom: &UlaGeometry, wavelength: f64, d: f64, eta: f64) -> Result<DVector<C64>> {
    if !(d > 0.0) {
        return Err(Error::invalid("d", format!("{d} is not positive")));
    }
    let k = 2.0 * PI / wavelength;
    let c = eta.cos();
    Ok(DVector::from_fn(geom.num_elements, |m, _| {
        let md = m as f64 * geom.spacing;
        let r = (d * d + md * md + 2.0 * md * d * c).sqrt();
        C64::from_polar(1.0, -k * (r - d))
    }))
}

/// Writes the (Fresnel or far-field) response into `out`, whose length fixes M.
pub fn steering_into(geom: &UlaGeometry, wavelength: f64, range: Range, eta: f64, out: &mut [C64]) {
    let k = 2.0 * PI / wavelength;
    let (s, c) = eta.sin_cos();
    let lin = k * geom.spacing * c;
    match range {
        Range::Infinite => {
            for (m, o) in out.iter_mut().enumerate() {
                *o = C64::from_polar(1.0, -lin * m as f64);
            }
        }
        Range::Finite(d) => {
            let quad = k * (geom.spacing * s).powi(2) / (2.0 * d);
            for (m, o) in out.iter_mut().enumerate() {
                let mf = m as f64;
                *o = C64::from_polar(1.0, -(lin * mf + quad * mf * mf));
            }
        }
    }
}

/// Steering with a chosen phase model; `Range::Infinite` is always far-field.
pub fn steering(
    geom: &UlaGeometry,
    wavelength: f64,
    range: Range,
    eta: f64,
    model: SteeringModel,
) -> Result<DVector<C64>> {
    match (range, model) {
        (Range::Infinite, _) => Ok(steering_far(geom, wavelength, eta)),
        (Range::Finite(d), SteeringModel::Fresnel) => steering_near(geom, wavelength, d, eta),
        (Range::Finite(d), SteeringModel::Exact) => steering_exact(geom, wavelength, d, eta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;
    use std::f64::consts::FRAC_PI_4;

    fn scene(irs: Point2) -> Scene {
        Scene::new(
            Point2::new(0.0, 0.0),
            Point2::new(irs.x, irs.y - 7.0),
            irs,
            0.01,
            90.0,
            UlaGeometry::new(8, 0.005).unwrap(),
            UlaGeometry::new(4, 0.005).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn distance_examples() {
        let s = scene(Point2::new(20.0, 20.0))
            .with_targets(&[(Point2::new(0.0, 0.0), 1.0)])
            .unwrap();
        assert!((distance_to_irs(&s, 0).unwrap() - 28.284271247461902).abs() < 1e-12);
        let s = scene(Point2::new(50.0, 50.0))
            .with_targets(&[(Point2::new(50.0, 43.0), 1.0), (Point2::new(30.0, 30.0), 1.0)])
            .unwrap();
        assert_eq!(distance_to_irs(&s, 0).unwrap(), 7.0);
        assert!((distance_to_irs(&s, 1).unwrap() - 28.284271247461902).abs() < 1e-12);
        assert!(matches!(
            distance_to_irs(&s, 2),
            Err(Error::IndexOutOfRange { index: 2, .. })
        ));
    }

    #[test]
    fn aoa_examples() {
        let s = scene(Point2::new(20.0, 20.0))
            .with_targets(&[(Point2::new(0.0, 0.0), 1.0)])
            .unwrap();
        assert!((aoa_to_irs(&s, 0).unwrap() - FRAC_PI_4).abs() < 1e-12);
        let irs = Point2::new(50.0, 50.0);
        assert!((aoa_from(irs, Point2::new(50.0, 0.0)).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(aoa_from(irs, Point2::new(0.0, 50.0)).unwrap(), 0.0);
        assert_eq!(aoa_from(irs, irs), Err(Error::CoincidentWithIrs));
    }

    #[test]
    fn rejects_targets_above_irs() {
        let mut s = scene(Point2::new(50.0, 50.0));
        assert!(s.add_target(Point2::new(10.0, 60.0), 1.0).is_err());
        assert!(s.add_target(Point2::new(10.0, 50.0), 1.0).is_err());
        assert!(s.add_target(Point2::new(10.0, 49.0), 1.0).is_ok());
    }

    #[test]
    fn rejects_bad_scene() {
        let g = UlaGeometry::new(4, 0.1).unwrap();
        let p = Point2::new(1.0, 1.0);
        assert!(Scene::new(p, Point2::new(0.0, 0.0), p, 0.1, 10.0, g, g).is_err());
        assert!(Scene::new(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), p, 0.0, 10.0, g, g).is_err());
        assert!(UlaGeometry::new(0, 0.1).is_err());
        assert!(UlaGeometry::new(3, -0.1).is_err());
    }

    #[test]
    fn classification_boundary_is_inclusive() {
        let mut s = scene(Point2::new(50.0, 100.0));
        s.add_target(Point2::new(50.0, 10.0), 1.0).unwrap();
        s.add_target(Point2::new(50.0, 9.999), 1.0).unwrap();
        assert_eq!(s.targets[0].field, FieldType::Near);
        assert_eq!(s.targets[1].field, FieldType::Far);
    }

    #[test]
    fn path_range_examples() {
        let s = scene(Point2::new(50.0, 50.0))
            .with_targets(&[(Point2::new(30.0, 30.0), 1.0), (Point2::new(0.0, 0.0), 1.0)])
            .unwrap();
        let r = path_ranges(&s, 0).unwrap();
        assert!((r.user_target - 42.42640687119285).abs() < 1e-12);
        assert!((r.target_irs - 28.284271247461902).abs() < 1e-12);
        assert_eq!(r.irs_bs, 7.0);
        assert_eq!(path_ranges(&s, 1).unwrap().user_target, 0.0);
    }

    #[test]
    fn diagonal_mirror_keeps_bistatic_range() {
        let s = scene(Point2::new(50.0, 50.0))
            .with_targets(&[(Point2::new(10.0, 35.0), 1.0), (Point2::new(35.0, 10.0), 1.0)])
            .unwrap();
        let a = path_ranges(&s, 0).unwrap();
        let b = path_ranges(&s, 1).unwrap();
        assert!(((a.user_target + a.target_irs) - (b.user_target + b.target_irs)).abs() < 1e-12);
    }

    #[test]
    fn far_steering_examples() {
        let lambda = 0.1;
        let g = UlaGeometry::new(6, lambda / 2.0).unwrap();
        let a = steering_far(&g, lambda, FRAC_PI_2);
        for z in a.iter() {
            assert!((z - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let a = steering_far(&g, lambda, 0.0);
        for (m, z) in a.iter().enumerate() {
            let want = if m % 2 == 0 { 1.0 } else { -1.0 };
            assert!((z - C64::new(want, 0.0)).norm() < 1e-12);
        }
        let eta = 0.7;
        let a = steering_far(&g, lambda, eta);
        let b = steering_far(&g, lambda, PI - eta);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x.conj() - y).norm() < 1e-12);
        }
    }

    #[test]
    fn near_steering_broadside_is_pure_quadratic() {
        let lambda = 0.05;
        let g = UlaGeometry::new(5, 0.03).unwrap();
        let d = 3.7;
        let a = steering_near(&g, lambda, d, FRAC_PI_2).unwrap();
        for (m, z) in a.iter().enumerate() {
            let md = m as f64 * 0.03;
            let want = C64::from_polar(1.0, -2.0 * PI / lambda * md * md / (2.0 * d));
            assert!((z - want).norm() < 1e-12);
        }
        assert!(steering_near(&g, lambda, 0.0, 1.0).is_err());
    }

    #[test]
    fn near_steering_tends_to_far() {
        let lambda = 0.01;
        let g = UlaGeometry::new(64, lambda / 2.0).unwrap();
        let eta = 1.1;
        let far = steering_far(&g, lambda, eta);
        let near = steering_near(&g, lambda, 1e12, eta).unwrap();
        assert!((near - &far).camax() < 1e-6);
        let mut last = f64::INFINITY;
        for k in 2..10 {
            let d = 10f64.powi(k) * lambda;
            let err = (steering_near(&g, lambda, d, eta).unwrap() - &far).camax();
            assert!(err < last, "k = {k}");
            last = err;
        }
    }

    // Independent evaluation of the spherical phase from element coordinates.
    #[test]
    fn fresnel_matches_exact_phase_to_leading_order() {
        let lambda = 1.0;
        let g = UlaGeometry::new(4, lambda / 2.0).unwrap();
        let (eta, d) = (PI / 3.0, 5.0 * lambda);
        let irs = Point2::new(0.0, 0.0);
        let src = point_at(irs, d, eta);
        let exact: Vec<f64> = (0..4)
            .map(|m| -2.0 * PI / lambda * (src.distance(&g.element(irs, m)) - d))
            .collect();
        assert_eq!(exact[0], 0.0);
        let via_fn = steering_exact(&g, lambda, d, eta).unwrap();
        let fres = steering_near(&g, lambda, d, eta).unwrap();
        for m in 0..4 {
            assert!((via_fn[m] - C64::from_polar(1.0, exact[m])).norm() < 1e-12);
            let md = m as f64 * g.spacing;
            let lin = -2.0 * PI / lambda * md * eta.cos();
            // Both agree with the linear term up to a second-order remainder.
            assert!((exact[m] - lin).abs() <= 2.0 * PI / lambda * md * md / d);
            let dphi = (fres[m] * C64::from_polar(1.0, -exact[m])).arg();
            assert!(dphi.abs() <= 2.0 * PI / lambda * md.powi(3) / (d * d));
        }
    }

    #[test]
    fn polar_round_trip() {
        let irs = Point2::new(50.0, 50.0);
        for &(d, th) in &[(7.0, 0.3), (120.0, 2.9), (0.5, FRAC_PI_2), (33.3, 1e-3)] {
            let p = point_at(irs, d, th);
            assert!((p.distance(&irs) - d).abs() < 1e-9);
            assert!((aoa_from(irs, p).unwrap() - th).abs() < 1e-9);
        }
    }
}
