//! Constant-current discharge of a parallel pair, integrated with
//! fixed-step classical Runge-Kutta.

use serde::{Deserialize, Serialize};

use crate::cell::{ocv_unchecked, CellParams};
use crate::error::{Error, Result};
use crate::pair::{split_unchecked, terminal_voltage_unchecked, PairParams};

const SECONDS_PER_HOUR: f64 = 3600.0;
/// SOC slack tolerated by the integrator before it reports an error.
const SOC_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Discharge rate as a fraction of total capacity per hour.
    pub c_rate: f64,
    /// Integrator step, seconds.
    pub dt: f64,
    /// Initial SOC of both cells.
    pub z0: f64,
    pub v_cutoff: f64,
    pub soc_floor: f64,
    /// Time guard, seconds.
    pub t_max: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::with_c_rate(1.0 / 3.0)
    }
}

impl SimConfig {
    /// Defaults for the given rate, with the time guard at five nominal
    /// discharge durations.
    pub fn with_c_rate(c_rate: f64) -> Self {
        Self {
            c_rate,
            dt: 1.0,
            z0: 1.0,
            v_cutoff: 3.0,
            soc_floor: 0.02,
            t_max: 5.0 / c_rate * SECONDS_PER_HOUR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.c_rate.is_finite() && self.c_rate > 0.0) {
            return bad(format!("c_rate must be positive, got {}", self.c_rate));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.z0 > 0.0 && self.z0 <= 1.0) {
            return bad(format!("z0 must lie in (0, 1], got {}", self.z0));
        }
        let (v_min, v_max) = (ocv_unchecked(0.0), ocv_unchecked(1.0));
        if !(self.v_cutoff > v_min && self.v_cutoff < v_max) {
            return bad(format!(
                "v_cutoff {} outside the OCV range ({v_min:.4}, {v_max:.4}) V",
                self.v_cutoff
            ));
        }
        if !(0.0..=0.1).contains(&self.soc_floor) {
            return bad(format!("soc_floor must lie in [0, 0.1], got {}", self.soc_floor));
        }
        if !(self.t_max > 0.0) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    VoltageCutoff,
    SocFloor,
    TimeLimit,
}

/// Sampled discharge of a pair (or a single cell, see
/// [`single_cell_reference`]). All arrays have equal length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub t: Vec<f64>,
    /// Pair current, negative on discharge.
    pub i_total: Vec<f64>,
    pub i1: Vec<f64>,
    pub i2: Vec<f64>,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    /// Discharged charge of the pair, Ah.
    pub q_pair: Vec<f64>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub v_t: Vec<f64>,
    /// False for single-cell traces, whose second-cell columns are zero.
    pub has_cell2: bool,
    /// `None` for traces read from measured data.
    pub termination: Option<Termination>,
    pub diagnostics: Vec<String>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn with_capacity(n: usize, has_cell2: bool) -> Self {
        let v = || Vec::with_capacity(n);
        Self {
            t: v(),
            i_total: v(),
            i1: v(),
            i2: v(),
            z1: v(),
            z2: v(),
            q_pair: v(),
            q1: v(),
            q2: v(),
            v_t: v(),
            has_cell2,
            termination: None,
            diagnostics: Vec::new(),
        }
    }
}

/// One classical RK4 step for an autonomous system of fixed dimension.
pub fn rk4_step<const N: usize>(y: [f64; N], dt: f64, f: impl Fn(&[f64; N]) -> [f64; N]) -> [f64; N] {
    let axpy = |a: &[f64; N], s: f64, b: &[f64; N]| -> [f64; N] {
        let mut out = *a;
        out.iter_mut().zip(b).for_each(|(o, bi)| *o += s * bi);
        out
    };
    let k1 = f(&y);
    let k2 = f(&axpy(&y, 0.5 * dt, &k1));
    let k3 = f(&axpy(&y, 0.5 * dt, &k2));
    let k4 = f(&axpy(&y, dt, &k3));
    let mut out = y;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn discharge_current(capacity: f64, config: &SimConfig) -> Result<f64> {
    let i_total = -config.c_rate * capacity;
    if i_total == 0.0 || !i_total.is_finite() {
        return Err(Error::Config(format!("discharge current must be non-zero, got {i_total}")));
    }
    Ok(i_total)
}

fn termination(v_t: f64, z_min: f64, t: f64, config: &SimConfig) -> Option<Termination> {
    if v_t <= config.v_cutoff {
        Some(Termination::VoltageCutoff)
    } else if z_min <= config.soc_floor {
        Some(Termination::SocFloor)
    } else if t >= config.t_max {
        Some(Termination::TimeLimit)
    } else {
        None
    }
}

fn check_soc(t: f64, z1: f64, z2: f64) -> Result<()> {
    let ok = |z: f64| (-SOC_SLACK..=1.0 + SOC_SLACK).contains(&z);
    if ok(z1) && ok(z2) {
        Ok(())
    } else {
        Err(Error::Integration { t, z1, z2 })
    }
}

/// Discharges the pair at constant current `-c_rate * (C1 + C2)` from
/// `z1 = z2 = z0` until the first termination condition is met.
pub fn simulate_cc_discharge(params: &PairParams, config: &SimConfig) -> Result<SimTrace> {
    config.validate()?;
    let i_total = discharge_current(params.total_capacity(), config)?;
    let c1 = params.cell1.capacity;
    let c2 = params.cell2.capacity;
    let rhs = |z: &[f64; 2]| {
        let (i1, i2) = split_unchecked(z[0], z[1], params, i_total);
        [i1 / (c1 * SECONDS_PER_HOUR), i2 / (c2 * SECONDS_PER_HOUR)]
    };

    let expected = (config.t_max / config.dt).min(1e7) as usize + 1;
    let mut trace = SimTrace::with_capacity(expected.min(1 << 20), true);
    let mut z = [config.z0, config.z0];
    let mut reversed = false;
    for step in 0usize.. {
        let t = step as f64 * config.dt;
        let (i1, i2) = split_unchecked(z[0], z[1], params, i_total);
        let v_t = terminal_voltage_unchecked(z[0], z[1], params, i_total);
        let q1 = c1 * (config.z0 - z[0]);
        let q2 = c2 * (config.z0 - z[1]);
        trace.t.push(t);
        trace.i_total.push(i_total);
        trace.i1.push(i1);
        trace.i2.push(i2);
        trace.z1.push(z[0]);
        trace.z2.push(z[1]);
        trace.q_pair.push(-i_total * t / SECONDS_PER_HOUR);
        trace.q1.push(q1);
        trace.q2.push(q2);
        trace.v_t.push(v_t);
        if !reversed && (i1 > 0.0 || i2 > 0.0) {
            reversed = true;
            trace.diagnostics.push(format!(
                "cell current reversed sign at t = {t} s (i1 = {i1:.6} A, i2 = {i2:.6} A)"
            ));
        }

        if let Some(reason) = termination(v_t, z[0].min(z[1]), t, config) {
            trace.termination = Some(reason);
            break;
        }
        z = rk4_step(z, config.dt, rhs);
        check_soc(t + config.dt, z[0], z[1])?;
    }
    Ok(trace)
}

/// Single OCV-R cell under the same constant-current profile, laid out as
/// a [`SimTrace`] with the second-cell columns zeroed.
pub fn single_cell_reference(cell: &CellParams, config: &SimConfig) -> Result<SimTrace> {
    config.validate()?;
    let i_total = discharge_current(cell.capacity, config)?;
    let rate = i_total / (cell.capacity * SECONDS_PER_HOUR);
    let mut trace = SimTrace::with_capacity(1024, false);
    let mut z = [config.z0];
    for step in 0usize.. {
        let t = step as f64 * config.dt;
        let v_t = ocv_unchecked(z[0]) + i_total * cell.resistance;
        trace.t.push(t);
        trace.i_total.push(i_total);
        trace.i1.push(i_total);
        trace.i2.push(0.0);
        trace.z1.push(z[0]);
        trace.z2.push(0.0);
        trace.q_pair.push(-i_total * t / SECONDS_PER_HOUR);
        trace.q1.push(cell.capacity * (config.z0 - z[0]));
        trace.q2.push(0.0);
        trace.v_t.push(v_t);
        if let Some(reason) = termination(v_t, z[0], t, config) {
            trace.termination = Some(reason);
            break;
        }
        z = rk4_step(z, config.dt, |_| [rate]);
        check_soc(t + config.dt, z[0], z[0])?;
    }
    Ok(trace)
}
