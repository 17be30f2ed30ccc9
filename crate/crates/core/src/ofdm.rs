//! OFDM pilots, received-signal synthesis and the delay manifold.
//!
//! Time-domain symbols use the unitary IDFT, so the frequency-domain model
//! `Y = √p·diag(s)·E·H + Z` keeps the per-entry noise variance σ².

use crate::channel::Cir;
use crate::rng::{complex_gaussian, stream, Domain};
use crate::{Error, Result, SPEED_OF_LIGHT, C64};
use nalgebra::DMatrix;
use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmConfig {
    /// N.
    pub num_subcarriers: usize,
    /// Δf (Hz).
    pub subcarrier_spacing: f64,
    /// J, cyclic prefix length in samples.
    pub cp_len: usize,
    /// L.
    pub num_taps: usize,
    /// Q.
    pub symbols_per_block: usize,
    /// V.
    pub num_blocks: usize,
    /// Transmit power p (W).
    pub power: f64,
    /// Noise variance σ² (W).
    pub noise_var: f64,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            num_subcarriers: 256,
            subcarrier_spacing: 1e8 / 256.0,
            cp_len: 88,
            num_taps: 88,
            symbols_per_block: 4,
            num_blocks: 32,
            power: 1.0,
            noise_var: 1.0,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_subcarriers", self.num_subcarriers),
            ("num_taps", self.num_taps),
            ("symbols_per_block", self.symbols_per_block),
            ("num_blocks", self.num_blocks),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if self.cp_len < self.num_taps {
            return Err(Error::invalid("cp_len", format!("J = {} < L = {}", self.cp_len, self.num_taps)));
        }
        if self.num_subcarriers < self.num_taps {
            return Err(Error::invalid("num_subcarriers", "N must be at least L"));
        }
        if !(self.subcarrier_spacing > 0.0) {
            return Err(Error::invalid("subcarrier_spacing", "must be positive"));
        }
        if !(self.power > 0.0) {
            return Err(Error::invalid("power", "must be positive"));
        }
        if !(self.noise_var >= 0.0) {
            return Err(Error::invalid("noise_var", "must be nonnegative"));
        }
        Ok(())
    }

    /// B = N·Δf (Hz).
    pub fn bandwidth(&self) -> f64 {
        self.num_subcarriers as f64 * self.subcarrier_spacing
    }

    /// Range spanned by one delay tap, c₀ / B (m).
    pub fn tap_width(&self) -> f64 {
        SPEED_OF_LIGHT / self.bandwidth()
    }

    /// Largest total path range the L-tap window can hold.
    pub fn max_total_range(&self) -> f64 {
        self.num_taps as f64 * self.tap_width()
    }
}

/// Unit-modulus pilots s_{n,t}^(q).
#[derive(Debug, Clone, PartialEq)]
pub struct PilotGrid {
    pub num_subcarriers: usize,
    pub symbols_per_block: usize,
    pub num_blocks: usize,
    data: Vec<C64>,
}

impl PilotGrid {
    pub fn from_fn(n: usize, q: usize, v: usize, mut f: impl FnMut(usize, usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(n * q * v);
        for t in 0..v {
            for qq in 0..q {
                for nn in 0..n {
                    data.push(f(nn, qq, t));
                }
            }
        }
        Self {
            num_subcarriers: n,
            symbols_per_block: q,
            num_blocks: v,
            data,
        }
    }

    pub fn symbol(&self, q: usize, t: usize) -> &[C64] {
        let n = self.num_subcarriers;
        let start = (t * self.symbols_per_block + q) * n;
        &self.data[start..start + n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &C64> {
        self.data.iter()
    }
}

/// Random QPSK pilots, deterministic in `seed`.
pub fn generate_pilots(cfg: &OfdmConfig, seed: u64) -> PilotGrid {
    let n = cfg.num_subcarriers;
    PilotGrid::from_fn(n, cfg.symbols_per_block, cfg.num_blocks, |nn, q, t| {
        let mut rng = stream(seed, Domain::Pilots, (t * cfg.symbols_per_block + q) as u64, nn as u64);
        let k: u32 = rng.random_range(0..4);
        C64::from_polar(1.0, PI / 4.0 + k as f64 * PI / 2.0)
    })
}

/// E with `E[n, l] = exp(−j2π n l / N)` (0-based indices).
#[derive(Debug, Clone, PartialEq)]
pub struct DelayManifold {
    pub e: DMatrix<C64>,
}

pub fn delay_manifold(num_subcarriers: usize, num_taps: usize) -> DelayManifold {
    let n = num_subcarriers as f64;
    let e = DMatrix::from_fn(num_subcarriers, num_taps, |r, l| {
        let k = (r * l) % num_subcarriers;
        C64::from_polar(1.0, -2.0 * PI * k as f64 / n)
    });
    DelayManifold { e }
}

fn check_cir(cfg: &OfdmConfig, cir: &Cir) -> Result<()> {
    if cir.taps.nrows() != cfg.num_taps {
        return Err(Error::DimensionMismatch {
            context: "cir taps",
            expected: cfg.num_taps.to_string(),
            actual: cir.taps.nrows().to_string(),
        });
    }
    Ok(())
}

/// √p·diag(s)·E·H + Z for symbol `q` of block `t`; N × M_B.
#[allow(clippy::too_many_arguments)]
pub fn simulate_freq_rx(
    cfg: &OfdmConfig,
    pilots: &PilotGrid,
    manifold: &DelayManifold,
    cir: &Cir,
    q: usize,
    t: usize,
    seed: u64,
) -> Result<DMatrix<C64>> {
    check_cir(cfg, cir)?;
    if manifold.e.shape() != (cfg.num_subcarriers, cfg.num_taps) {
        return Err(Error::DimensionMismatch {
            context: "delay manifold",
            expected: format!("{}x{}", cfg.num_subcarriers, cfg.num_taps),
            actual: format!("{}x{}", manifold.e.nrows(), manifold.e.ncols()),
        });
    }
    let s = pilots.symbol(q, t);
    let mut y = &manifold.e * &cir.taps;
    let sp = cfg.power.sqrt();
    for (n, mut row) in y.row_iter_mut().enumerate() {
        row *= s[n] * sp;
    }
    add_noise(&mut y, cfg.noise_var, seed, q, t);
    Ok(y)
}

fn add_noise(y: &mut DMatrix<C64>, var: f64, seed: u64, q: usize, t: usize) {
    if var > 0.0 {
        let mut rng = stream(seed, Domain::Noise, q as u64, t as u64);
        for z in y.iter_mut() {
            *z += complex_gaussian(&mut rng, var);
        }
    }
}

/// Received time samples for symbol `q` of block `t`, CP included;
/// (N + J) × M_B. Each symbol is transmitted in isolation.
pub fn simulate_time_rx(cfg: &OfdmConfig, pilots: &PilotGrid, cir: &Cir, q: usize, t: usize, seed: u64) -> Result<DMatrix<C64>> {
    cfg.validate()?;
    check_cir(cfg, cir)?;
    let n = cfg.num_subcarriers;
    let j = cfg.cp_len;
    let mut x: Vec<C64> = pilots.symbol(q, t).to_vec();
    FftPlanner::new().plan_fft_inverse(n).process(&mut x);
    let scale = 1.0 / (n as f64).sqrt();
    let tx: Vec<C64> = (0..n + j).map(|i| x[(i + n - j) % n] * scale).collect();
    let sp = cfg.power.sqrt();
    let mb = cir.taps.ncols();
    let mut y = DMatrix::zeros(n + j, mb);
    for i in 0..n + j {
        for l in 0..cfg.num_taps.min(i + 1) {
            let xv = tx[i - l] * sp;
            for b in 0..mb {
                y[(i, b)] += cir.taps[(l, b)] * xv;
            }
        }
    }
    add_noise(&mut y, cfg.noise_var, seed, q, t);
    Ok(y)
}

/// Drops the cyclic prefix and applies the unitary DFT per antenna.
pub fn cp_remove_and_dft(cfg: &OfdmConfig, samples: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let n = cfg.num_subcarriers;
    let j = cfg.cp_len;
    if samples.nrows() != n + j {
        return Err(Error::DimensionMismatch {
            context: "time samples",
            expected: (n + j).to_string(),
            actual: samples.nrows().to_string(),
        });
    }
    let fft = FftPlanner::new().plan_fft_forward(n);
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = DMatrix::zeros(n, samples.ncols());
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for b in 0..samples.ncols() {
        for i in 0..n {
            buf[i] = samples[(j + i, b)];
        }
        fft.process(&mut buf);
        for i in 0..n {
            out[(i, b)] = buf[i] * scale;
        }
    }
    Ok(out)
}
