//! Two cells in parallel: parameterisation by imbalance ratios and the
//! algebraic current split between the cells.
//!
//! Cell 1 is the strong cell (larger capacity, smaller resistance) and
//! cell 2 the weak one. Both share the terminal voltage; the split follows
//! from `V_t = OCV(z1) + I1 R1 = OCV(z2) + I2 R2` with `I = I1 + I2`.

use serde::{Deserialize, Serialize};

use crate::cell::{ocv_unchecked, CellParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    /// Strong cell.
    pub cell1: CellParams,
    /// Weak cell.
    pub cell2: CellParams,
}

impl PairParams {
    /// Builds a pair directly from two cells, enforcing `C2 <= C1` and
    /// `R2 >= R1`.
    pub fn new(cell1: CellParams, cell2: CellParams) -> Result<Self> {
        if cell2.capacity > cell1.capacity {
            return Err(Error::InvalidParams(format!(
                "weak cell capacity {} exceeds strong cell capacity {}",
                cell2.capacity, cell1.capacity
            )));
        }
        if cell2.resistance < cell1.resistance {
            return Err(Error::InvalidParams(format!(
                "weak cell resistance {} is below strong cell resistance {}",
                cell2.resistance, cell1.resistance
            )));
        }
        Ok(Self { cell1, cell2 })
    }

    /// `R1 + R2`.
    pub fn r_tot(&self) -> f64 {
        self.cell1.resistance + self.cell2.resistance
    }

    /// Capacity ratio `C2 / C1`.
    pub fn alpha(&self) -> f64 {
        self.cell2.capacity / self.cell1.capacity
    }

    /// Resistance ratio `R2 / R1`.
    pub fn beta(&self) -> f64 {
        self.cell2.resistance / self.cell1.resistance
    }

    pub fn total_capacity(&self) -> f64 {
        self.cell1.capacity + self.cell2.capacity
    }

    pub fn parallel_resistance(&self) -> f64 {
        self.cell1.resistance * self.cell2.resistance / self.r_tot()
    }
}

/// Splits a group of total capacity `c_total` and parallel resistance
/// `r_parallel` into a strong/weak pair with `C2/C1 = alpha` and
/// `R2/R1 = beta`.
pub fn make_pair(alpha: f64, beta: f64, c_total: f64, r_parallel: f64) -> Result<PairParams> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "capacity ratio must lie in (0, 1], got {alpha}"
        )));
    }
    if !(beta.is_finite() && beta >= 1.0) {
        return Err(Error::InvalidParams(format!(
            "resistance ratio must be >= 1, got {beta}"
        )));
    }
    if !(c_total.is_finite() && c_total > 0.0) {
        return Err(Error::InvalidParams(format!(
            "total capacity must be positive, got {c_total}"
        )));
    }
    if !(r_parallel.is_finite() && r_parallel > 0.0) {
        return Err(Error::InvalidParams(format!(
            "parallel resistance must be positive, got {r_parallel}"
        )));
    }
    let cell1 = CellParams::new(c_total / (1.0 + alpha), r_parallel * (1.0 + beta) / beta)?;
    let cell2 = CellParams::new(c_total * alpha / (1.0 + alpha), r_parallel * (1.0 + beta))?;
    PairParams::new(cell1, cell2)
}

/// Difference `OCV(z2) - OCV(z1)`.
fn delta_ocv(z1: f64, z2: f64) -> f64 {
    ocv_unchecked(z2) - ocv_unchecked(z1)
}

pub(crate) fn split_unchecked(z1: f64, z2: f64, params: &PairParams, i_total: f64) -> (f64, f64) {
    let r2 = params.cell2.resistance;
    let r_tot = params.r_tot();
    let d = delta_ocv(z1, z2);
    let i1 = (d + r2 * i_total) / r_tot;
    // Taken as the complement so the pair current is conserved to round-off.
    let i2 = i_total - i1;
    (i1, i2)
}

pub(crate) fn terminal_voltage_unchecked(z1: f64, z2: f64, params: &PairParams, i_total: f64) -> f64 {
    let r1 = params.cell1.resistance;
    let r2 = params.cell2.resistance;
    let r_tot = params.r_tot();
    (r1 * ocv_unchecked(z2) + r2 * ocv_unchecked(z1)) / r_tot + r1 * r2 * i_total / r_tot
}

/// Currents `(I1, I2)` into each cell for pair current `i_total`
/// (negative on discharge).
pub fn current_split(z1: f64, z2: f64, params: &PairParams, i_total: f64) -> Result<(f64, f64)> {
    crate::cell::Soc::new(z1)?;
    crate::cell::Soc::new(z2)?;
    Ok(split_unchecked(z1, z2, params, i_total))
}

/// Shared terminal voltage of the pair.
pub fn terminal_voltage(z1: f64, z2: f64, params: &PairParams, i_total: f64) -> Result<f64> {
    crate::cell::Soc::new(z1)?;
    crate::cell::Soc::new(z2)?;
    Ok(terminal_voltage_unchecked(z1, z2, params, i_total))
}
