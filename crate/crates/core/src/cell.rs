//! OCV-R cell model for an NMC/graphite chemistry.
//!
//! Half-cell potentials are closed-form functions of the cell state of
//! charge `z`. The full-cell open-circuit voltage is their difference, and
//! the terminal voltage adds an ohmic drop `I * R` (current negative on
//! discharge).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed outside `[0, 1]` before a SOC is rejected.
pub const SOC_DOMAIN_TOL: f64 = 1e-12;

/// Capacity and ohmic resistance of a single cell, constant over a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    /// Amp-hours.
    pub capacity: f64,
    /// Ohms.
    pub resistance: f64,
}

impl CellParams {
    pub fn new(capacity: f64, resistance: f64) -> Result<Self> {
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(Error::InvalidParams(format!(
                "capacity must be positive, got {capacity}"
            )));
        }
        if !(resistance.is_finite() && resistance > 0.0) {
            return Err(Error::InvalidParams(format!(
                "resistance must be positive, got {resistance}"
            )));
        }
        Ok(Self {
            capacity,
            resistance,
        })
    }

    /// Terminal voltage of the cell at SOC `z` carrying current `current`.
    pub fn terminal_voltage(&self, z: f64, current: f64) -> Result<f64> {
        Ok(ocv(z)? + current * self.resistance)
    }
}

/// State of charge in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Soc(f64);

impl Soc {
    pub fn new(z: f64) -> Result<Self> {
        check_domain(z)?;
        Ok(Self(z))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn ocv(self) -> f64 {
        ocv_unchecked(self.0)
    }
}

fn check_domain(z: f64) -> Result<()> {
    if z.is_finite() && (-SOC_DOMAIN_TOL..=1.0 + SOC_DOMAIN_TOL).contains(&z) {
        Ok(())
    } else {
        Err(Error::SocDomain(z))
    }
}

const POS_POLY: [f64; 6] = [3.6674, -0.0225, 0.5619, 0.6329, -0.1957, 0.1016];
const POS_EXP_AMP: f64 = 0.5623;
const POS_EXP_RATE: f64 = 95.102;
const POS_EXP_OFFSET: f64 = 97.036;

const NEG_BASE: f64 = 0.063;
const NEG_EXP_AMP: f64 = 0.8;
const NEG_EXP_RATE: f64 = 75.0;
const NEG_EXP_SLOPE: f64 = 0.83;
const NEG_EXP_SHIFT: f64 = 0.007;

/// Graphite staging steps as (amplitude, centre, width).
const NEG_STEPS: [(f64, f64, f64); 6] = [
    (0.012, 0.15, 0.019),
    (0.012, 0.19, 0.019),
    (0.004, 0.27, 0.024),
    (0.009, 0.23, 0.016),
    (0.0145, 0.59, 0.024),
    (0.080, 1.24, 0.066),
];

pub(crate) fn u_pos_unchecked(z: f64) -> f64 {
    let poly = POS_POLY.iter().rev().fold(0.0, |acc, &c| acc * z + c);
    poly - POS_EXP_AMP * (POS_EXP_RATE * (1.0 - z) - POS_EXP_OFFSET).exp()
}

pub(crate) fn u_neg_unchecked(z: f64) -> f64 {
    let exp_term = NEG_EXP_AMP * (-NEG_EXP_RATE * (NEG_EXP_SLOPE * z + NEG_EXP_SHIFT)).exp();
    NEG_STEPS
        .iter()
        .fold(NEG_BASE + exp_term, |acc, &(amp, centre, width)| {
            acc - amp * ((z - centre) / width).tanh()
        })
}

pub(crate) fn ocv_unchecked(z: f64) -> f64 {
    u_pos_unchecked(z) - u_neg_unchecked(z)
}

fn du_pos_dz(z: f64) -> f64 {
    let poly = POS_POLY
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, &c)| acc * z + k as f64 * c);
    poly + POS_EXP_AMP * POS_EXP_RATE * (POS_EXP_RATE * (1.0 - z) - POS_EXP_OFFSET).exp()
}

fn du_neg_dz(z: f64) -> f64 {
    let exp_term = -NEG_EXP_AMP
        * NEG_EXP_RATE
        * NEG_EXP_SLOPE
        * (-NEG_EXP_RATE * (NEG_EXP_SLOPE * z + NEG_EXP_SHIFT)).exp();
    NEG_STEPS
        .iter()
        .fold(exp_term, |acc, &(amp, centre, width)| {
            let sech = 1.0 / ((z - centre) / width).cosh();
            acc - amp / width * sech * sech
        })
}

/// NMC positive electrode potential versus lithium.
pub fn u_pos(z: f64) -> Result<f64> {
    check_domain(z)?;
    Ok(u_pos_unchecked(z))
}

/// Graphite negative electrode potential versus lithium.
pub fn u_neg(z: f64) -> Result<f64> {
    check_domain(z)?;
    Ok(u_neg_unchecked(z))
}

/// Full-cell open-circuit voltage, `u_pos(z) - u_neg(z)`.
pub fn ocv(z: f64) -> Result<f64> {
    check_domain(z)?;
    Ok(ocv_unchecked(z))
}

/// Analytic derivative of [`ocv`] with respect to SOC.
pub fn docv_dz(z: f64) -> Result<f64> {
    check_domain(z)?;
    Ok(du_pos_dz(z) - du_neg_dz(z))
}
