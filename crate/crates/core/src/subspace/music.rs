use super::{hermitian_eigen, sample_covariance, EigenDecomposition, SpectrumGrid, VirtualBatch, VirtualManifold};
use crate::geometry::{steering_into, Range};
use crate::rng::{complex_gaussian, stream, Domain};
use crate::{Error, Result, C64};
use nalgebra::DMatrix;
use std::f64::consts::PI;
use rayon::prelude::*;

/// Spectrum value returned when `ψ̆` lies in the signal subspace to machine precision.
pub const SENTINEL: f64 = 1e18;

/// Columns `k_hat..` of the eigenvector matrix.
pub fn noise_subspace(eig: &EigenDecomposition, k_hat: usize) -> Result<DMatrix<C64>> {
    let dim = eig.vectors.ncols();
    if k_hat >= dim {
        return Err(Error::EmptyNoiseSubspace);
    }
    Ok(eig.vectors.columns(k_hat, dim - k_hat).into_owned())
}

/// Evaluates `‖ψ̆‖² / ‖Ūᴴψ̆‖²` with `ψ̆ = P·a_I` through the stacked matrix `[P; ŪᴴP]`.
pub struct SpectrumEvaluator<'a> {
    manifold: &'a VirtualManifold,
    /// Row-major, (dim + r) × M_I.
    rows: Vec<C64>,
    dim: usize,
    total: usize,
}

impl<'a> SpectrumEvaluator<'a> {
    pub fn new(manifold: &'a VirtualManifold, noise: &DMatrix<C64>) -> Result<Self> {
        if noise.ncols() == 0 {
            return Err(Error::EmptyNoiseSubspace);
        }
        if noise.nrows() != manifold.dim() {
            return Err(Error::DimensionMismatch {
                context: "noise subspace",
                expected: manifold.dim().to_string(),
                actual: noise.nrows().to_string(),
            });
        }
        let b = noise.adjoint() * &manifold.p;
        let mi = manifold.p.ncols();
        let dim = manifold.dim();
        let total = dim + b.nrows();
        let mut rows = Vec::with_capacity(total * mi);
        for r in 0..dim {
            rows.extend((0..mi).map(|c| manifold.p[(r, c)]));
        }
        for r in 0..b.nrows() {
            rows.extend((0..mi).map(|c| b[(r, c)]));
        }
        Ok(Self {
            manifold,
            rows,
            dim,
            total,
        })
    }

    /// Spectrum at IRS response `a`.
    pub fn value(&self, a: &[C64]) -> f64 {
        let mi = a.len();
        let mut num = 0.0;
        let mut den = 0.0;
        for r in 0..self.total {
            let row = &self.rows[r * mi..(r + 1) * mi];
            let mut acc = C64::new(0.0, 0.0);
            for (x, y) in row.iter().zip(a) {
                acc += x * y;
            }
            if r < self.dim {
                num += acc.norm_sqr();
            } else {
                den += acc.norm_sqr();
            }
        }
        if den < 1e-18 {
            SENTINEL
        } else {
            num / den
        }
    }

    pub fn at(&self, range: Range, theta: f64) -> f64 {
        let mut a = vec![C64::new(0.0, 0.0); self.manifold.irs_array.num_elements];
        steering_into(&self.manifold.irs_array, self.manifold.wavelength, range, theta, &mut a);
        self.value(&a)
    }
}

/// Virtual steering vectors `ψ̆ = P·a_I` for every point of a grid, one per column.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSteering {
    pub near: DMatrix<C64>,
    pub far: DMatrix<C64>,
}

impl GridSteering {
    pub fn new(manifold: &VirtualManifold, grid: &SpectrumGrid) -> Self {
        let near: Vec<(Range, f64)> = grid.near_points().map(|(d, th)| (Range::Finite(d), th)).collect();
        let far: Vec<(Range, f64)> = grid.far_thetas().map(|th| (Range::Infinite, th)).collect();
        Self {
            near: steering_columns(manifold, &near),
            far: steering_columns(manifold, &far),
        }
    }
}

/// Columns per block in [`steering_columns`].
const STEERING_BLOCK: usize = 2048;

/// Fresnel or far-field response by phase recurrence: the phase increment
/// between elements m and m+1 is `lin + quad·(2m+1)`.
fn steering_recurrence(spacing: f64, wavelength: f64, range: Range, eta: f64, out: &mut [C64]) {
    let k = 2.0 * PI / wavelength;
    let (s, c) = eta.sin_cos();
    let lin = k * spacing * c;
    let quad = match range {
        Range::Infinite => 0.0,
        Range::Finite(d) => k * (spacing * s).powi(2) / (2.0 * d),
    };
    let mut a = C64::new(1.0, 0.0);
    let mut step = C64::from_polar(1.0, -(lin + quad));
    let chirp = C64::from_polar(1.0, -2.0 * quad);
    for o in out.iter_mut() {
        *o = a;
        a *= step;
        step *= chirp;
    }
}

/// Complex matrix held as separate real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitMatrix {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl SplitMatrix {
    pub fn new(m: &DMatrix<C64>) -> Self {
        Self {
            re: m.map(|z| z.re),
            im: m.map(|z| z.im),
        }
    }

    /// `a·self` through four real matrix products, which take the blocked
    /// real kernel instead of the generic complex loop.
    pub fn left_mul(&self, a: &DMatrix<C64>) -> DMatrix<C64> {
        let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
        let re = &ar * &self.re - &ai * &self.im;
        let im = &ar * &self.im + &ai * &self.re;
        re.zip_map(&im, C64::new)
    }
}

/// Complex product `a·b`.
pub fn complex_mul(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    SplitMatrix::new(b).left_mul(a)
}

/// `P·[a_I(p_1), a_I(p_2), …]`, computed blockwise as real products.
pub fn steering_columns(manifold: &VirtualManifold, points: &[(Range, f64)]) -> DMatrix<C64> {
    let mi = manifold.irs_array.num_elements;
    let dim = manifold.dim();
    let pr = manifold.p.map(|z| z.re);
    let pi = manifold.p.map(|z| z.im);
    let mut out = DMatrix::zeros(dim, points.len());
    if dim == 0 {
        return out;
    }
    out.as_mut_slice()
        .par_chunks_mut(dim * STEERING_BLOCK)
        .zip(points.par_chunks(STEERING_BLOCK))
        .for_each(|(dst, pts)| {
            let mut ar = DMatrix::<f64>::zeros(mi, pts.len());
            let mut ai = DMatrix::<f64>::zeros(mi, pts.len());
            let mut col = vec![C64::default(); mi];
            for (j, &(r, th)) in pts.iter().enumerate() {
                steering_recurrence(manifold.irs_array.spacing, manifold.wavelength, r, th, &mut col);
                for (m, z) in col.iter().enumerate() {
                    ar[(m, j)] = z.re;
                    ai[(m, j)] = z.im;
                }
            }
            let re = &pr * &ar - &pi * &ai;
            let im = &pr * &ai + &pi * &ar;
            for ((z, &x), &y) in dst.iter_mut().zip(re.as_slice()).zip(im.as_slice()) {
                *z = C64::new(x, y);
            }
        });
    out
}

/// MUSIC values `‖ψ̆‖² / ‖Ūᴴψ̆‖²` for every column of `psi`.
pub fn music_values(psi: &DMatrix<C64>, noise: &DMatrix<C64>) -> Result<Vec<f64>> {
    if noise.ncols() == 0 {
        return Err(Error::EmptyNoiseSubspace);
    }
    if noise.nrows() != psi.nrows() {
        return Err(Error::DimensionMismatch {
            context: "noise subspace",
            expected: psi.nrows().to_string(),
            actual: noise.nrows().to_string(),
        });
    }
    let proj = complex_mul(&noise.adjoint(), psi);
    Ok(psi
        .column_iter()
        .zip(proj.column_iter())
        .map(|(c, p)| {
            let den = p.norm_squared();
            if den < 1e-18 {
                SENTINEL
            } else {
                c.norm_squared() / den
            }
        })
        .collect())
}

/// Peak thresholds ς^F and ς^N.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Thresholds {
    pub far: f64,
    pub near: f64,
}

fn percentile(mut v: Vec<f64>, pct: f64) -> f64 {
    if v.is_empty() {
        return f64::INFINITY;
    }
    v.sort_by(f64::total_cmp);
    let rank = ((pct / 100.0) * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

/// Percentile thresholds from target-free snapshots: V white-noise virtual
/// vectors, signal order forced to `k_assumed`, spectra over `grid`
/// (the near lattice thinned to at most `max_near_points`).
pub fn calibrate_thresholds(
    manifold: &VirtualManifold,
    grid: &SpectrumGrid,
    num_blocks: usize,
    k_assumed: usize,
    pct: f64,
    seed: u64,
    max_near_points: usize,
) -> Result<Thresholds> {
    if !(0.0..=100.0).contains(&pct) {
        return Err(Error::invalid("percentile", "must lie in [0, 100]"));
    }
    let dim = manifold.dim();
    let mut rng = stream(seed, Domain::Calibration, 0, 0);
    let snapshots = DMatrix::from_fn(dim, num_blocks, |_, _| complex_gaussian(&mut rng, 1.0));
    let r = sample_covariance(&VirtualBatch { cluster: 0, snapshots });
    let eig = hermitian_eigen(&r);
    let noise = noise_subspace(&eig, k_assumed.min(dim - 1))?;
    let far_pts: Vec<(Range, f64)> = grid.far_thetas().map(|th| (Range::Infinite, th)).collect();
    let far = percentile(music_values(&steering_columns(manifold, &far_pts), &noise)?, pct);
    let stride = grid.near_len().div_ceil(max_near_points.max(1)).max(1);
    let near_pts: Vec<(Range, f64)> = grid
        .near_points()
        .step_by(stride)
        .map(|(d, th)| (Range::Finite(d), th))
        .collect();
    let near = percentile(music_values(&steering_columns(manifold, &near_pts), &noise)?, pct);
    Ok(Thresholds { far, near })
}
