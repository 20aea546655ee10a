//! Differential voltage curves: resampling onto a uniform charge grid,
//! smoothing, differentiation, voltage-window selection and peak picking.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::savgol::{gradient, SavitzkyGolay};
use crate::sim::SimTrace;

/// Lower edge of the mid-to-high SOC feature window, volts.
pub const DEFAULT_V_LO: f64 = 3.7;
/// Upper edge of the mid-to-high SOC feature window, volts.
pub const DEFAULT_V_HI: f64 = 3.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    /// Grid spacing, Ah.
    pub dq: f64,
    /// Odd sample count.
    pub sg_window: usize,
    pub sg_order: usize,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            dq: 0.05,
            sg_window: 25,
            sg_order: 3,
        }
    }
}

impl SmoothingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dq.is_finite() && self.dq > 0.0) {
            return Err(Error::Config(format!("dq must be positive, got {}", self.dq)));
        }
        self.filter().map(|_| ())
    }

    pub fn filter(&self) -> Result<SavitzkyGolay> {
        SavitzkyGolay::new(self.sg_window, self.sg_order)
    }
}

/// Which charge axis a curve is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveSource {
    Pair,
    #[serde(rename = "cell-1")]
    Cell1,
    #[serde(rename = "cell-2")]
    Cell2,
}

impl fmt::Display for CurveSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveSource::Pair => "pair",
            CurveSource::Cell1 => "cell-1",
            CurveSource::Cell2 => "cell-2",
        })
    }
}

/// Terminal voltage and `-dV/dQ` on a uniform charge grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DvDqCurve {
    pub q: Vec<f64>,
    /// Resampled (unsmoothed) terminal voltage.
    pub v: Vec<f64>,
    /// `-dV/dQ` of the smoothed voltage, V/Ah; positive on discharge.
    pub dvdq: Vec<f64>,
    pub dq: f64,
    pub source: CurveSource,
}

impl DvDqCurve {
    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakHeight {
    /// V/Ah.
    pub height: f64,
    pub q_at_peak: f64,
    pub v_at_peak: f64,
}

fn charge_axis(trace: &SimTrace, source: CurveSource) -> Result<&[f64]> {
    match source {
        CurveSource::Pair => Ok(&trace.q_pair),
        CurveSource::Cell1 => Ok(&trace.q1),
        CurveSource::Cell2 if trace.has_cell2 => Ok(&trace.q2),
        CurveSource::Cell2 => Err(Error::InvalidParams("trace has no second cell".into())),
    }
}

/// Linear interpolation of `(q, v)` onto `q0, q0 + dq, ...` up to the last
/// grid point inside the data span. `q` must be strictly increasing.
pub fn resample_linear(q: &[f64], v: &[f64], dq: f64, min_span: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if q.len() != v.len() || q.len() < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            got: q.len().min(v.len()),
        });
    }
    if let Some(k) = q.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NonMonotonicCharge(k + 1));
    }
    let (q0, q_end) = (q[0], q[q.len() - 1]);
    let span = q_end - q0;
    if span < min_span {
        return Err(Error::SpanTooShort {
            span,
            required: min_span,
        });
    }
    let n = ((span / dq) * (1.0 + 1e-12)).floor() as usize + 1;
    let mut grid = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for k in 0..n {
        let x = (q0 + k as f64 * dq).min(q_end);
        while j + 2 < q.len() && q[j + 1] < x {
            j += 1;
        }
        let (xa, xb) = (q[j], q[j + 1]);
        let s = (x - xa) / (xb - xa);
        grid.push(x);
        out.push(v[j] + s * (v[j + 1] - v[j]));
    }
    Ok((grid, out))
}

/// Terminal voltage of `trace` against the chosen charge axis, resampled
/// onto a uniform grid of spacing `dq`.
pub fn resample_uniform_q(
    trace: &SimTrace,
    config: &SmoothingConfig,
    source: CurveSource,
) -> Result<(Vec<f64>, Vec<f64>)> {
    config.validate()?;
    let q = charge_axis(trace, source)?;
    resample_linear(q, &trace.v_t, config.dq, 2.0 * config.sg_window as f64 * config.dq)
}

/// Builds `-dV/dQ` from already uniform samples.
pub fn dvdq_from_uniform(q: Vec<f64>, v: Vec<f64>, config: &SmoothingConfig, source: CurveSource) -> Result<DvDqCurve> {
    let smoothed = config.filter()?.smooth(&v)?;
    let dvdq = gradient(&smoothed, config.dq).into_iter().map(|g| -g).collect();
    Ok(DvDqCurve {
        q,
        v,
        dvdq,
        dq: config.dq,
        source,
    })
}

pub fn dvdq_curve(trace: &SimTrace, config: &SmoothingConfig, source: CurveSource) -> Result<DvDqCurve> {
    let (q, v) = resample_uniform_q(trace, config, source)?;
    dvdq_from_uniform(q, v, config, source)
}

/// Longest contiguous run of samples with `v_lo <= v <= v_hi`.
pub fn downselect_window(curve: &DvDqCurve, v_lo: f64, v_hi: f64) -> Result<DvDqCurve> {
    let empty = || Error::EmptyWindow { v_lo, v_hi };
    if !(v_lo < v_hi) {
        return Err(empty());
    }
    let mut best = (0, 0);
    let mut start = None;
    for k in 0..=curve.len() {
        let inside = k < curve.len() && (v_lo..=v_hi).contains(&curve.v[k]);
        match (inside, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                if k - s > best.1 - best.0 {
                    best = (s, k);
                }
                start = None;
            }
            _ => {}
        }
    }
    let (a, b) = best;
    if a == b {
        return Err(empty());
    }
    Ok(DvDqCurve {
        q: curve.q[a..b].to_vec(),
        v: curve.v[a..b].to_vec(),
        dvdq: curve.dvdq[a..b].to_vec(),
        dq: curve.dq,
        source: curve.source,
    })
}

/// Tallest strict local maximum of the curve; ties go to the smaller charge.
pub fn peak_height(curve: &DvDqCurve) -> Result<PeakHeight> {
    let d = &curve.dvdq;
    let mut best: Option<usize> = None;
    for k in 1..d.len().saturating_sub(1) {
        if d[k] > d[k - 1] && d[k] > d[k + 1] && best.is_none_or(|b| d[k] > d[b]) {
            best = Some(k);
        }
    }
    let k = best.ok_or(Error::NoPeak)?;
    Ok(PeakHeight {
        height: d[k],
        q_at_peak: curve.q[k],
        v_at_peak: curve.v[k],
    })
}
