use super::IrsSchedule;
use crate::channel::IrsBsChannel;
use crate::estimation::CirEstimate;
use crate::geometry::{steering_into, Range, UlaGeometry};
use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector};

/// Stacking matrix `P = [G·diag(φ^(1)); …; G·diag(φ^(Q0))]` and the virtual
/// steering vector `ψ̆(d, θ) = P·a_I(d, θ)`. Shared by every cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualManifold {
    /// Q0·M_B × M_I.
    pub p: DMatrix<C64>,
    pub irs_array: UlaGeometry,
    pub wavelength: f64,
    pub num_bs: usize,
    pub q0: usize,
}

impl VirtualManifold {
    pub fn new(irs_bs: &IrsBsChannel, schedule: &IrsSchedule, q0: usize, irs_array: UlaGeometry, wavelength: f64) -> Result<Self> {
        let mb = irs_bs.num_bs();
        let mi = irs_bs.num_irs();
        if irs_array.num_elements != mi {
            return Err(Error::DimensionMismatch {
                context: "IRS array",
                expected: mi.to_string(),
                actual: irs_array.num_elements.to_string(),
            });
        }
        if q0 == 0 || schedule.phi.nrows() != mi {
            return Err(Error::invalid("q0", "schedule does not match the IRS-BS channel"));
        }
        let mut p = DMatrix::zeros(q0 * mb, mi);
        for q in 0..q0 {
            let phi = schedule.pattern(q);
            for b in 0..mb {
                for i in 0..mi {
                    p[(q * mb + b, i)] = irs_bs.g[(b, i)] * phi[i];
                }
            }
        }
        Ok(Self {
            p,
            irs_array,
            wavelength,
            num_bs: mb,
            q0,
        })
    }

    /// Q0·M_B.
    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn irs_response(&self, range: Range, theta: f64) -> DVector<C64> {
        let mut a = DVector::zeros(self.irs_array.num_elements);
        steering_into(&self.irs_array, self.wavelength, range, theta, a.as_mut_slice());
        a
    }

    pub fn steer(&self, range: Range, theta: f64) -> DVector<C64> {
        &self.p * self.irs_response(range, theta)
    }

    /// Columns ψ̆ for each `(range, θ)`.
    pub fn steering_matrix(&self, params: &[(Range, f64)]) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim(), params.len());
        for (j, &(r, th)) in params.iter().enumerate() {
            m.set_column(j, &self.steer(r, th));
        }
        m
    }
}

/// Stacked virtual snapshots of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualBatch {
    /// 1-based tap index.
    pub cluster: usize,
    /// Q0·M_B × V; rows `q·M_B .. (q+1)·M_B` hold symbol `q`.
    pub snapshots: DMatrix<C64>,
}

impl VirtualBatch {
    pub fn num_snapshots(&self) -> usize {
        self.snapshots.ncols()
    }
}

pub fn build_virtual(cluster: usize, est: &CirEstimate, q0: usize) -> Result<VirtualBatch> {
    if cluster == 0 || cluster > est.num_taps() {
        return Err(Error::IndexOutOfRange {
            what: "cluster",
            index: cluster,
            len: est.num_taps(),
        });
    }
    if q0 == 0 || q0 > est.symbols_per_block {
        return Err(Error::invalid("q0", format!("{q0} outside 1..={}", est.symbols_per_block)));
    }
    let mb = est.taps[0].ncols();
    let v = est.num_blocks;
    let mut snapshots = DMatrix::zeros(q0 * mb, v);
    for t in 0..v {
        for q in 0..q0 {
            let h = est.get(q, t);
            for b in 0..mb {
                snapshots[(q * mb + b, t)] = h[(cluster - 1, b)];
            }
        }
    }
    Ok(VirtualBatch { cluster, snapshots })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub rank: usize,
    /// σ_min / σ_max over the min(dim, K) singular values.
    pub cond_ratio: f64,
    pub singular_values: Vec<f64>,
}

/// Numerical rank of `Ψ̆(Θ) = P·A_I(Θ)` with relative threshold 1e−10.
pub fn verify_rank(manifold: &VirtualManifold, params: &[(Range, f64)]) -> Result<RankReport> {
    if params.len() > manifold.dim() {
        return Err(Error::invalid(
            "params",
            format!("{} columns exceed the virtual dimension {}", params.len(), manifold.dim()),
        ));
    }
    if params.is_empty() {
        return Ok(RankReport {
            rank: 0,
            cond_ratio: 1.0,
            singular_values: vec![],
        });
    }
    let mut sv: Vec<f64> = manifold.steering_matrix(params).singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let smax = sv[0];
    let rank = sv.iter().filter(|&&s| s > 1e-10 * smax).count();
    let cond_ratio = if smax > 0.0 { sv[sv.len() - 1] / smax } else { 0.0 };
    Ok(RankReport {
        rank,
        cond_ratio,
        singular_values: sv,
    })
}
