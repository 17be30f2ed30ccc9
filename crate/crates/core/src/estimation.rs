//! Phase I: joint group-LASSO estimation of the sparse CIR.
//!
//! Minimizes
//! `Σ_{q,t} ‖Y_t^(q) − √p·diag(s_t^(q))·E·H_t^(q)‖²_F + ω·Σ_l ‖(h_{l,t}^(q))_{q,t}‖₂`
//! by accelerated proximal gradient with function-value restart. The
//! penalty groups one tap across every symbol, block and antenna.

use crate::ofdm::{DelayManifold, OfdmConfig, PilotGrid};
use crate::{Error, Result, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Frequency-domain observations, one N × M_B matrix per (q, t).
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub symbols_per_block: usize,
    pub num_blocks: usize,
    y: Vec<DMatrix<C64>>,
}

impl Observations {
    /// `y` is block-major: entry `t·Q + q` holds symbol `q` of block `t`.
    pub fn new(symbols_per_block: usize, num_blocks: usize, y: Vec<DMatrix<C64>>) -> Result<Self> {
        if y.len() != symbols_per_block * num_blocks || y.is_empty() {
            return Err(Error::DimensionMismatch {
                context: "observations",
                expected: (symbols_per_block * num_blocks).to_string(),
                actual: y.len().to_string(),
            });
        }
        let shape = y[0].shape();
        if y.iter().any(|m| m.shape() != shape) {
            return Err(Error::invalid("observations", "inconsistent matrix shapes"));
        }
        Ok(Self {
            symbols_per_block,
            num_blocks,
            y,
        })
    }

    pub fn get(&self, q: usize, t: usize) -> &DMatrix<C64> {
        &self.y[t * self.symbols_per_block + q]
    }

    pub fn all(&self) -> &[DMatrix<C64>] {
        &self.y
    }

    pub fn num_bs(&self) -> usize {
        self.y[0].ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegWeight {
    Fixed { omega: f64 },
    /// ω = c·σ·sqrt(Q·V·M_B)·√p·‖E‖₂.
    NoiseScaled { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// 1 / Lipschitz constant of the smooth term.
    #[default]
    Fixed,
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupLassoConfig {
    pub weight: RegWeight,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub step_rule: StepRule,
}

impl Default for GroupLassoConfig {
    fn default() -> Self {
        Self {
            weight: RegWeight::NoiseScaled { c: 3.0 },
            max_iters: 2000,
            rel_tol: 1e-8,
            step_rule: StepRule::Fixed,
        }
    }
}

impl GroupLassoConfig {
    pub fn validate(&self) -> Result<()> {
        match self.weight {
            RegWeight::Fixed { omega } if !(omega >= 0.0) => {
                return Err(Error::invalid("omega", "must be nonnegative"))
            }
            RegWeight::NoiseScaled { c } if !(c >= 0.0) => {
                return Err(Error::invalid("c", "must be nonnegative"))
            }
            _ => {}
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid("rel_tol", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be positive"));
        }
        Ok(())
    }

    pub fn omega(&self, ofdm: &OfdmConfig, num_bs: usize, manifold: &DelayManifold) -> f64 {
        match self.weight {
            RegWeight::Fixed { omega } => omega,
            RegWeight::NoiseScaled { c } => {
                let groups = (ofdm.symbols_per_block * ofdm.num_blocks * num_bs) as f64;
                c * ofdm.noise_var.sqrt() * groups.sqrt() * ofdm.power.sqrt() * spectral_norm(&manifold.e)
            }
        }
    }
}

fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    m.clone().singular_values().max()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CirEstimate {
    pub symbols_per_block: usize,
    pub num_blocks: usize,
    /// L × M_B per (q, t), block-major like [`Observations`].
    pub taps: Vec<DMatrix<C64>>,
    /// g_l = Σ_{q,t} ‖h̃_{l,t}^(q)‖², indexed by `l − 1`.
    pub group_energy: Vec<f64>,
    pub omega: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_history: Vec<f64>,
}

impl CirEstimate {
    pub fn get(&self, q: usize, t: usize) -> &DMatrix<C64> {
        &self.taps[t * self.symbols_per_block + q]
    }

    pub fn num_taps(&self) -> usize {
        self.group_energy.len()
    }

    /// Nonzero groups, 1-based.
    pub fn support(&self) -> Vec<usize> {
        (1..=self.num_taps()).filter(|&l| self.group_energy[l - 1] > 0.0).collect()
    }
}

/// Quadratic data, with `A_i = √p·diag(s_i)·E`:
/// `f(H) = ‖Y‖² − 2·Re Σ⟨A_iᴴY_i, H_i⟩ + Σ⟨H_i, AᴴA·H_i⟩`.
struct Problem {
    gram: DMatrix<C64>,
    corr: Vec<DMatrix<C64>>,
    y_energy: f64,
    lip: f64,
    omega: f64,
}

impl Problem {
    fn new(obs: &Observations, pilots: &PilotGrid, manifold: &DelayManifold, power: f64, omega: f64) -> Result<Self> {
        let e = &manifold.e;
        let n = e.nrows();
        if obs.all()[0].nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "observation rows",
                expected: n.to_string(),
                actual: obs.all()[0].nrows().to_string(),
            });
        }
        if pilots.num_subcarriers != n
            || pilots.symbols_per_block != obs.symbols_per_block
            || pilots.num_blocks != obs.num_blocks
        {
            return Err(Error::DimensionMismatch {
                context: "pilot grid",
                expected: format!("{n}x{}x{}", obs.symbols_per_block, obs.num_blocks),
                actual: format!("{}x{}x{}", pilots.num_subcarriers, pilots.symbols_per_block, pilots.num_blocks),
            });
        }
        crate::channel::check_unit_modulus(&pilots.iter().copied().collect::<Vec<_>>())?;
        let eh = e.adjoint();
        let gram = (&eh * e) * C64::from(power);
        let sp = power.sqrt();
        let mut corr = Vec::with_capacity(obs.all().len());
        let mut y_energy = 0.0;
        for t in 0..obs.num_blocks {
            for q in 0..obs.symbols_per_block {
                let y = obs.get(q, t);
                y_energy += y.norm_squared();
                let s = pilots.symbol(q, t);
                let mut sy = y.clone();
                for (r, mut row) in sy.row_iter_mut().enumerate() {
                    row *= s[r].conj() * sp;
                }
                corr.push(&eh * sy);
            }
        }
        let lip = 2.0 * gram.clone().singular_values().max();
        Ok(Self {
            gram,
            corr,
            y_energy,
            lip,
            omega,
        })
    }

    fn smooth(&self, h: &[DMatrix<C64>]) -> f64 {
        let mut f = self.y_energy;
        for (hi, zi) in h.iter().zip(&self.corr) {
            f -= 2.0 * hi.dotc(zi).re;
            f += hi.dotc(&(&self.gram * hi)).re;
        }
        f
    }

    fn grad(&self, h: &[DMatrix<C64>]) -> Vec<DMatrix<C64>> {
        h.iter()
            .zip(&self.corr)
            .map(|(hi, zi)| (&self.gram * hi - zi) * C64::from(2.0))
            .collect()
    }

    fn penalty(&self, h: &[DMatrix<C64>]) -> f64 {
        group_norms(h).iter().sum::<f64>() * self.omega
    }

    fn objective(&self, h: &[DMatrix<C64>]) -> f64 {
        self.smooth(h) + self.penalty(h)
    }
}

fn group_norms(h: &[DMatrix<C64>]) -> Vec<f64> {
    group_energy(h).into_iter().map(f64::sqrt).collect()
}

fn group_energy(h: &[DMatrix<C64>]) -> Vec<f64> {
    let l = h[0].nrows();
    let mut e = vec![0.0; l];
    for hi in h {
        for (r, row) in hi.row_iter().enumerate() {
            e[r] += row.norm_squared();
        }
    }
    e
}

/// Block soft-thresholding of each tap group by `tau`.
fn prox(h: &mut [DMatrix<C64>], tau: f64) {
    let norms = group_norms(h);
    let scale: Vec<f64> = norms
        .iter()
        .map(|&n| if n > tau { 1.0 - tau / n } else { 0.0 })
        .collect();
    for hi in h.iter_mut() {
        for (r, mut row) in hi.row_iter_mut().enumerate() {
            row *= C64::from(scale[r]);
        }
    }
}

fn axpy(x: &[DMatrix<C64>], a: f64, d: &[DMatrix<C64>]) -> Vec<DMatrix<C64>> {
    x.iter().zip(d).map(|(xi, di)| xi + di * C64::from(a)).collect()
}

fn diff_norm(a: &[DMatrix<C64>], b: &[DMatrix<C64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum::<f64>().sqrt()
}

fn total_norm(a: &[DMatrix<C64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

/// Solves the group-LASSO problem. A run that hits `max_iters` returns its
/// best iterate with `converged == false`.
pub fn group_lasso(
    ofdm: &OfdmConfig,
    obs: &Observations,
    pilots: &PilotGrid,
    manifold: &DelayManifold,
    cfg: &GroupLassoConfig,
) -> Result<CirEstimate> {
    cfg.validate()?;
    let omega = cfg.omega(ofdm, obs.num_bs(), manifold);
    solve(obs, pilots, manifold, ofdm.power, omega, cfg)
}

/// Solver entry with an explicit ω.
pub fn group_lasso_with_omega(
    obs: &Observations,
    pilots: &PilotGrid,
    manifold: &DelayManifold,
    power: f64,
    omega: f64,
    cfg: &GroupLassoConfig,
) -> Result<CirEstimate> {
    cfg.validate()?;
    if !(omega >= 0.0) {
        return Err(Error::invalid("omega", "must be nonnegative"));
    }
    solve(obs, pilots, manifold, power, omega, cfg)
}

fn solve(
    obs: &Observations,
    pilots: &PilotGrid,
    manifold: &DelayManifold,
    power: f64,
    omega: f64,
    cfg: &GroupLassoConfig,
) -> Result<CirEstimate> {
    let prob = Problem::new(obs, pilots, manifold, power, omega)?;
    let shape = (manifold.e.ncols(), obs.num_bs());
    let zeros = vec![DMatrix::zeros(shape.0, shape.1); obs.all().len()];

    let mut x = zeros.clone();
    let mut fx = prob.objective(&x);
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut lip = match cfg.step_rule {
        StepRule::Fixed => prob.lip,
        StepRule::Backtracking => prob.lip * 1e-3,
    };
    let mut history = vec![fx];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        let gy = prob.grad(&y);
        let fy = prob.smooth(&y);
        let z = loop {
            let mut z = axpy(&y, -1.0 / lip, &gy);
            prox(&mut z, omega / lip);
            if cfg.step_rule == StepRule::Fixed {
                break z;
            }
            let d: Vec<_> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
            let lin: f64 = gy.iter().zip(&d).map(|(g, di)| g.dotc(di).re).sum();
            let quad = 0.5 * lip * total_norm(&d).powi(2);
            if prob.smooth(&z) <= fy + lin + quad + 1e-12 * fy.abs() {
                break z;
            }
            lip *= 2.0;
        };
        let fz = prob.objective(&z);
        let step = diff_norm(&z, &x);
        if fz > fx {
            if t > 1.0 {
                // Momentum overshoot: restart from the last accepted iterate.
                t = 1.0;
                y = x.clone();
                continue;
            }
            converged = true;
            break;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = z.iter().zip(&x).map(|(zi, xi)| zi + (zi - xi) * C64::from(beta)).collect();
        let decrease = fx - fz;
        x = z;
        fx = fz;
        t = t_next;
        history.push(fx);
        let scale = total_norm(&x).max(f64::MIN_POSITIVE);
        if step <= cfg.rel_tol * scale && decrease <= cfg.rel_tol * fx.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    let energy = group_energy(&x);
    Ok(CirEstimate {
        symbols_per_block: obs.symbols_per_block,
        num_blocks: obs.num_blocks,
        taps: x,
        group_energy: energy,
        omega,
        iterations,
        converged,
        objective_history: history,
    })
}

/// Composite objective value of an estimate.
pub fn objective(
    obs: &Observations,
    pilots: &PilotGrid,
    manifold: &DelayManifold,
    power: f64,
    omega: f64,
    taps: &[DMatrix<C64>],
) -> Result<f64> {
    Ok(Problem::new(obs, pilots, manifold, power, omega)?.objective(taps))
}

/// First-order optimality residuals of an estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    /// max over zero groups of ‖∇_l f‖ / ω (≤ 1 at optimum).
    pub zero_group_ratio: f64,
    /// max over nonzero groups of ‖∇_l f + ω·h_l/‖h_l‖‖.
    pub nonzero_group_residual: f64,
    /// ‖∇f(0)‖, the natural scale of the gradient.
    pub data_scale: f64,
}

pub fn certificate(
    obs: &Observations,
    pilots: &PilotGrid,
    manifold: &DelayManifold,
    power: f64,
    est: &CirEstimate,
) -> Result<Certificate> {
    let prob = Problem::new(obs, pilots, manifold, power, est.omega)?;
    let g = prob.grad(&est.taps);
    let g0 = prob.grad(&vec![DMatrix::zeros(est.taps[0].nrows(), est.taps[0].ncols()); est.taps.len()]);
    let gnorm = group_norms(&g);
    let hnorm = group_norms(&est.taps);
    let mut zero_ratio: f64 = 0.0;
    let mut nonzero: f64 = 0.0;
    for l in 0..hnorm.len() {
        if hnorm[l] == 0.0 {
            let r = if est.omega > 0.0 { gnorm[l] / est.omega } else if gnorm[l] > 0.0 { f64::INFINITY } else { 0.0 };
            zero_ratio = zero_ratio.max(r);
        } else {
            let s = est.omega / hnorm[l];
            let r: f64 = g
                .iter()
                .zip(&est.taps)
                .map(|(gi, hi)| (gi.row(l) + hi.row(l) * C64::from(s)).norm_squared())
                .sum::<f64>()
                .sqrt();
            nonzero = nonzero.max(r);
        }
    }
    Ok(Certificate {
        zero_group_ratio: zero_ratio,
        nonzero_group_residual: nonzero,
        data_scale: total_norm(&g0),
    })
}
