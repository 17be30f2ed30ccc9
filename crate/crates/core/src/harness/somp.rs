use crate::geometry::FieldType;
use crate::subspace::{Detection, SplitMatrix, GridSteering, SpectrumGrid, VirtualBatch};
use crate::C64;
use nalgebra::{DMatrix, DVector};

/// Simultaneous OMP over the cluster dictionary `{ψ̆(d, θ)} ∪ {ψ̆(∞, θ)}`:
/// `k` atoms, each maximizing `Σ_t |âᴴ r_t|` over the deflated residual.
pub fn somp(batch: &VirtualBatch, steering: &GridSteering, grid: &SpectrumGrid, k: usize) -> Vec<Detection> {
    let n_near = steering.near.ncols();
    let n = n_near + steering.far.ncols();
    if k == 0 || n == 0 {
        return Vec::new();
    }
    let dim = batch.snapshots.nrows();
    let atom = |j: usize| {
        if j < n_near {
            steering.near.column(j)
        } else {
            steering.far.column(j - n_near)
        }
    };
    let inv_norm: Vec<f64> = (0..n)
        .map(|j| {
            let norm = atom(j).norm();
            if norm > 0.0 {
                1.0 / norm
            } else {
                0.0
            }
        })
        .collect();
    let h = &batch.snapshots;
    let ha = h.adjoint();
    // V × n correlations `r_tᴴ â_j` with the residual, deflated as basis
    // vectors are removed.
    let near = SplitMatrix::new(&steering.near);
    let far = SplitMatrix::new(&steering.far);
    let mut corr = DMatrix::<C64>::zeros(h.ncols(), n);
    corr.columns_mut(0, n_near).copy_from(&near.left_mul(&ha));
    corr.columns_mut(n_near, n - n_near).copy_from(&far.left_mul(&ha));
    for (j, mut c) in corr.column_iter_mut().enumerate() {
        c *= C64::from(inv_norm[j]);
    }
    let mut basis: Vec<DVector<C64>> = Vec::new();
    let mut chosen: Vec<(usize, f64)> = Vec::new();
    for _ in 0..k.min(dim).min(n) {
        let best = corr
            .column_iter()
            .enumerate()
            .filter(|(j, _)| !chosen.iter().any(|&(c, _)| c == *j))
            .map(|(j, c)| (j, c.iter().map(|z| z.norm_sqr().sqrt()).sum::<f64>()))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        let Some((j, value)) = best else { break };
        let mut q: DVector<C64> = atom(j) * C64::from(inv_norm[j]);
        for b in &basis {
            let c = b.dotc(&q);
            q -= b * c;
        }
        let qn = q.norm();
        chosen.push((j, value));
        if qn < 1e-12 {
            break;
        }
        q /= C64::from(qn);
        let qt = DMatrix::from_iterator(1, dim, q.iter().map(|z| z.conj()));
        let mut qa = DMatrix::<C64>::zeros(1, n);
        qa.columns_mut(0, n_near).copy_from(&near.left_mul(&qt));
        qa.columns_mut(n_near, n - n_near).copy_from(&far.left_mul(&qt));
        let hq = &ha * &q;
        for (j, mut c) in corr.column_iter_mut().enumerate() {
            let s = qa[(0, j)] * inv_norm[j];
            c.axpy(-s, &hq, C64::from(1.0));
        }
        basis.push(q);
    }
    chosen
        .into_iter()
        .map(|(j, value)| {
            if j < n_near {
                let (d, theta) = grid.near_point(j);
                Detection {
                    field: FieldType::Near,
                    theta,
                    d: Some(d),
                    value,
                }
            } else {
                Detection {
                    field: FieldType::Far,
                    theta: grid.far_theta(j - n_near),
                    d: None,
                    value,
                }
            }
        })
        .collect()
}
