use crate::channel::{check_unit_modulus, IrsBsChannel};
use crate::{Error, Result, C64};
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// IRS reflection patterns, one column per virtual symbol, shared by all blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct IrsSchedule {
    /// M_I × Q0, unit modulus.
    pub phi: DMatrix<C64>,
    pub twist: f64,
}

impl IrsSchedule {
    pub fn new(phi: DMatrix<C64>, twist: f64) -> Result<Self> {
        if phi.ncols() == 0 || phi.nrows() == 0 {
            return Err(Error::invalid("phi", "empty schedule"));
        }
        check_unit_modulus(phi.as_slice())?;
        Ok(Self { phi, twist })
    }

    pub fn num_patterns(&self) -> usize {
        self.phi.ncols()
    }

    /// Pattern of symbol `q`; symbols past Q0 reuse the columns cyclically.
    pub fn pattern(&self, q: usize) -> &[C64] {
        let m = self.phi.nrows();
        let c = q % self.phi.ncols();
        &self.phi.as_slice()[c * m..(c + 1) * m]
    }
}

/// `φ[m, q] = e^{−j2π m q / M_I} / G[0, m] · e^{j m ϑ}` (0-based `m`, `q`).
pub fn design_irs_schedule(irs_bs: &IrsBsChannel, q0: usize, twist: f64) -> Result<IrsSchedule> {
    let mi = irs_bs.num_irs();
    if q0 == 0 || q0 > mi {
        return Err(Error::invalid("q0", format!("{q0} outside 1..={mi}")));
    }
    check_unit_modulus(irs_bs.g.row(0).transpose().as_slice())?;
    let phi = DMatrix::from_fn(mi, q0, |m, q| {
        let w = C64::from_polar(1.0, -2.0 * PI * ((m * q) % mi) as f64 / mi as f64);
        w / irs_bs.g[(0, m)] * C64::from_polar(1.0, m as f64 * twist)
    });
    IrsSchedule::new(phi, twist)
}

/// All-ones patterns; the reflection does not vary over symbols.
pub fn constant_schedule(num_irs: usize, q0: usize) -> IrsSchedule {
    IrsSchedule {
        phi: DMatrix::from_element(num_irs, q0.max(1), C64::new(1.0, 0.0)),
        twist: 0.0,
    }
}
