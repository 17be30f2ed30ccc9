//! Ground-truth channel synthesis.

use crate::geometry::{path_ranges, steering, steering_far, FieldType, Range, Scene, SteeringModel};
use crate::ofdm::OfdmConfig;
use crate::rng::{complex_gaussian, stream, Domain};
use crate::subspace::IrsSchedule;
use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Which propagation model generates the IRS-BS matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrsBsModel {
    /// Per-element spherical phases.
    #[default]
    NearField,
    /// Rank-one plane-wave factorization.
    FarField,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IrsBsTag {
    NearField,
    /// Departure angle at the BS array and arrival angle at the IRS array.
    FarField { kappa: f64, xi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrsBsChannel {
    /// M_B × M_I, unit-modulus entries.
    pub g: DMatrix<C64>,
    pub pathloss: f64,
    pub tag: IrsBsTag,
}

impl IrsBsChannel {
    pub fn num_bs(&self) -> usize {
        self.g.nrows()
    }

    pub fn num_irs(&self) -> usize {
        self.g.ncols()
    }

    /// Numerical rank of G with relative singular value threshold `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        let sv = self.g.clone().singular_values();
        let smax = sv.max();
        sv.iter().filter(|&&s| s > tol * smax).count()
    }
}

pub fn irs_bs_channel(scene: &Scene, model: IrsBsModel, pathloss: f64) -> IrsBsChannel {
    let k = 2.0 * PI / scene.wavelength;
    let mb = scene.bs_array.num_elements;
    let mi = scene.irs_array.num_elements;
    match model {
        IrsBsModel::NearField => {
            let g = DMatrix::from_fn(mb, mi, |b, i| {
                let pb = scene.bs_array.element(scene.bs_pos, b);
                let pi = scene.irs_array.element(scene.irs_pos, i);
                C64::from_polar(1.0, -k * pb.distance(&pi))
            });
            IrsBsChannel {
                g,
                pathloss,
                tag: IrsBsTag::NearField,
            }
        }
        IrsBsModel::FarField => {
            let d = scene.irs_bs_distance();
            let ux = (scene.bs_pos.x - scene.irs_pos.x) / d;
            let kappa = ux.clamp(-1.0, 1.0).acos();
            let xi = (-ux).clamp(-1.0, 1.0).acos();
            let ab = steering_far(&scene.bs_array, scene.wavelength, kappa);
            let ai = steering_far(&scene.irs_array, scene.wavelength, xi);
            let g = (ab * ai.transpose()) * C64::from_polar(1.0, -k * d);
            IrsBsChannel {
                g,
                pathloss,
                tag: IrsBsTag::FarField { kappa, xi },
            }
        }
    }
}

/// Free-space amplitude gain `λ / (4π d)` of a single hop.
pub fn free_space_amplitude(wavelength: f64, distance: f64) -> f64 {
    wavelength / (4.0 * PI * distance)
}

/// Radar cross-section coefficients γ_{k,t}.
#[derive(Debug, Clone, PartialEq)]
pub struct RcsDraws {
    /// K × V.
    pub gamma: DMatrix<C64>,
}

impl RcsDraws {
    /// Swerling-I draws: i.i.d. unit-variance circular complex Gaussian per (k, t).
    pub fn swerling(num_targets: usize, num_blocks: usize, seed: u64) -> Self {
        let gamma = DMatrix::from_fn(num_targets, num_blocks, |k, t| {
            complex_gaussian(&mut stream(seed, Domain::Rcs, k as u64, t as u64), 1.0)
        });
        Self { gamma }
    }

    pub fn constant(num_targets: usize, num_blocks: usize, value: C64) -> Self {
        Self {
            gamma: DMatrix::from_element(num_targets, num_blocks, value),
        }
    }
}

/// β_k γ_{k,t} a_I(d_k, θ_k): near-field targets use the range-dependent
/// response, far-field targets the planar one.
pub fn target_irs_channel(
    scene: &Scene,
    rcs: &RcsDraws,
    k: usize,
    t: usize,
    model: SteeringModel,
) -> Result<DVector<C64>> {
    let ranges = path_ranges(scene, k)?;
    let theta = crate::geometry::aoa_to_irs(scene, k)?;
    if t >= rcs.gamma.ncols() || k >= rcs.gamma.nrows() {
        return Err(Error::IndexOutOfRange {
            what: "rcs draw",
            index: k * rcs.gamma.ncols() + t,
            len: rcs.gamma.len(),
        });
    }
    let tgt = &scene.targets[k];
    let range = match tgt.field {
        FieldType::Near => Range::Finite(ranges.target_irs),
        FieldType::Far => Range::Infinite,
    };
    let a = steering(&scene.irs_array, scene.wavelength, range, theta, model)?;
    Ok(a * (rcs.gamma[(k, t)] * tgt.pathloss))
}

/// δ G diag(φ) r.
pub fn cascaded_channel(irs_bs: &IrsBsChannel, phi: &[C64], r: &DVector<C64>) -> Result<DVector<C64>> {
    check_unit_modulus(phi)?;
    if phi.len() != irs_bs.num_irs() || r.len() != irs_bs.num_irs() {
        return Err(Error::DimensionMismatch {
            context: "cascaded_channel",
            expected: format!("{} IRS elements", irs_bs.num_irs()),
            actual: format!("phi {}, r {}", phi.len(), r.len()),
        });
    }
    let pr = DVector::from_iterator(r.len(), phi.iter().zip(r.iter()).map(|(p, x)| p * x));
    Ok(&irs_bs.g * pr * C64::from(irs_bs.pathloss))
}

pub(crate) fn check_unit_modulus(phi: &[C64]) -> Result<()> {
    for (index, p) in phi.iter().enumerate() {
        let modulus = p.norm();
        if (modulus - 1.0).abs() > 1e-9 {
            return Err(Error::NonUnitModulus { index, modulus });
        }
    }
    Ok(())
}

/// Targets grouped by delay tap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMap {
    /// 1-based tap index of each target.
    pub tap_of: Vec<usize>,
    /// `members[l - 1]` lists the targets in tap `l`.
    pub members: Vec<Vec<usize>>,
}

impl ClusterMap {
    pub fn num_taps(&self) -> usize {
        self.members.len()
    }

    pub fn count(&self, l: usize) -> usize {
        self.members.get(l.wrapping_sub(1)).map_or(0, Vec::len)
    }

    /// Occupied taps, 1-based, ascending.
    pub fn occupied(&self) -> Vec<usize> {
        (1..=self.members.len()).filter(|&l| self.count(l) > 0).collect()
    }

    pub fn max_count(&self) -> usize {
        self.members.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// 1-based delay tap of a total path range: `floor(range / width) + 1`.
pub fn tap_of_range(total_range: f64, tap_width: f64) -> usize {
    (total_range / tap_width).floor() as usize + 1
}

pub fn assign_clusters(scene: &Scene, ofdm: &OfdmConfig) -> Result<ClusterMap> {
    let width = ofdm.tap_width();
    let mut tap_of = Vec::with_capacity(scene.targets.len());
    let mut members = vec![Vec::new(); ofdm.num_taps];
    let mut outside = Vec::new();
    for k in 0..scene.targets.len() {
        let l = tap_of_range(path_ranges(scene, k)?.total(), width);
        if l > ofdm.num_taps {
            outside.push(k);
        } else {
            members[l - 1].push(k);
        }
        tap_of.push(l);
    }
    if !outside.is_empty() {
        return Err(Error::OutsideDelayWindow(outside));
    }
    Ok(ClusterMap { tap_of, members })
}

/// Per-symbol, per-block channel impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct Cir {
    /// L × M_B; row `l0` holds the tap with delay `l0` samples.
    pub taps: DMatrix<C64>,
}

impl Cir {
    pub fn zeros(num_taps: usize, num_bs: usize) -> Self {
        Self {
            taps: DMatrix::zeros(num_taps, num_bs),
        }
    }
}

/// CIR for symbol `q` and block `t`; row `l` sums the cascaded channels of
/// the targets in cluster `l`.
#[allow(clippy::too_many_arguments)]
pub fn build_cir(
    scene: &Scene,
    irs_bs: &IrsBsChannel,
    schedule: &IrsSchedule,
    rcs: &RcsDraws,
    clusters: &ClusterMap,
    q: usize,
    t: usize,
    model: SteeringModel,
) -> Result<Cir> {
    let phi = schedule.pattern(q);
    let mut cir = Cir::zeros(clusters.num_taps(), irs_bs.num_bs());
    for (li, ks) in clusters.members.iter().enumerate() {
        for &k in ks {
            let r = target_irs_channel(scene, rcs, k, t, model)?;
            let h = cascaded_channel(irs_bs, phi, &r)?;
            let mut row = cir.taps.row_mut(li);
            row += h.transpose();
        }
    }
    Ok(cir)
}
