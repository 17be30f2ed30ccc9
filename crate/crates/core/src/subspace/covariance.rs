use super::VirtualBatch;
use crate::C64;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// R = (1/V)·Σ_t h_t h_tᴴ.
pub fn sample_covariance(batch: &VirtualBatch) -> DMatrix<C64> {
    let h = &batch.snapshots;
    let v = h.ncols().max(1) as f64;
    let mut r = h * h.adjoint() / C64::from(v);
    // Exact Hermitian symmetry regardless of rounding in the product.
    let n = r.nrows();
    for i in 0..n {
        r[(i, i)].im = 0.0;
        for j in i + 1..n {
            let avg = 0.5 * (r[(i, j)] + r[(j, i)].conj());
            r[(i, j)] = avg;
            r[(j, i)] = avg.conj();
        }
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    /// Descending.
    pub values: Vec<f64>,
    /// Columns ordered like `values`.
    pub vectors: DMatrix<C64>,
}

pub fn hermitian_eigen(r: &DMatrix<C64>) -> EigenDecomposition {
    let eig = r.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(r.nrows(), order.len());
    for (j, &i) in order.iter().enumerate() {
        vectors.set_column(j, &eig.eigenvectors.column(i));
    }
    EigenDecomposition { values, vectors }
}

const EIGEN_RESOLUTION: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AicForm {
    /// `V(p−k)·log(geo/arith) − k(2p−k)` over the p − k smallest eigenvalues.
    #[default]
    WaxKailath,
    /// `(p−k)·log(Π λ_i^{1/(M_B−k)} / (Σ λ_j / (M_B−k))) − 2k(p−k)`.
    Printed,
}

/// Score of every candidate `k = 0..p−1`; larger is better. Candidates the
/// chosen form cannot evaluate score `−∞`.
pub fn aic_scores(eigenvalues: &[f64], q0: usize, num_bs: usize, v: usize, form: AicForm) -> Vec<f64> {
    let p = eigenvalues.len();
    debug_assert_eq!(p, q0 * num_bs);
    let top = eigenvalues.iter().copied().fold(0.0, f64::max);
    // Eigenvalues within the solver's accuracy of zero are set equal, so
    // rounding residue reads as white noise.
    let floor = if top > 0.0 {
        top * EIGEN_RESOLUTION * p as f64 * f64::EPSILON
    } else {
        f64::MIN_POSITIVE
    };
    let lam: Vec<f64> = eigenvalues.iter().map(|&x| x.max(floor)).collect();
    (0..p)
        .map(|k| {
            let tail = &lam[k..];
            let n = (p - k) as f64;
            let log_sum: f64 = tail.iter().map(|x| x.ln()).sum();
            let sum: f64 = tail.iter().sum();
            let kf = k as f64;
            match form {
                AicForm::WaxKailath => {
                    let log_ratio = log_sum / n - (sum / n).ln();
                    v as f64 * n * log_ratio - kf * (2.0 * p as f64 - kf)
                }
                AicForm::Printed => {
                    if k >= num_bs {
                        return f64::NEG_INFINITY;
                    }
                    let m = (num_bs - k) as f64;
                    let log_ratio = log_sum / m - (sum / m).ln();
                    n * log_ratio - 2.0 * kf * n
                }
            }
        })
        .collect()
}

/// K̂ = argmax of the AIC score; ties resolve to the smaller order.
pub fn estimate_target_count(eigenvalues: &[f64], q0: usize, num_bs: usize, v: usize, form: AicForm) -> usize {
    let s = aic_scores(eigenvalues, q0, num_bs, v, form);
    let mut best = 0;
    for k in 1..s.len() {
        if s[k] > s[best] {
            best = k;
        }
    }
    best
}
