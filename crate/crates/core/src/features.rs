//! dV/dQ peak shape features: height and skewness of the mid-to-high SOC
//! peak.
//!
//! Skewness is computed on the negative-electrode contribution isolated
//! from the terminal voltage:
//!
//! 1. keep the samples whose voltage lies in the feature window;
//! 2. fit the surrogate `a + bQ + cQ^2 - d tanh((Q - e)/f)`;
//! 3. form `N(Q) = P(Q) - V_t` with `P` the quadratic part of the fit;
//! 4. smooth `N` and differentiate;
//! 5. normalise `dN/dQ` to unit area;
//! 6. drop samples whose normalised density is below a threshold;
//! 7. take the Fisher skewness of the surviving samples as a distribution
//!    over `Q`, with masses `density * dq` renormalised to sum to one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Stage};
use crate::fit::{fit_positive_surrogate, FitHints, FitOptions, SurrogateFit};
use crate::moments::weighted_moments;
use crate::savgol::gradient;
use crate::signal::{
    downselect_window, dvdq_curve, peak_height, CurveSource, SmoothingConfig, DEFAULT_V_HI, DEFAULT_V_LO,
};
use crate::sim::SimTrace;

pub const MIN_SURVIVING_SAMPLES: usize = 10;
pub const MIN_STD_AH: f64 = 1e-9;

/// Settings for the skewness statistic and the window it is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub v_lo: f64,
    pub v_hi: f64,
    /// Normalised density cut-off, 1/Ah.
    pub threshold: f64,
    pub fit: FitOptions,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            v_lo: DEFAULT_V_LO,
            v_hi: DEFAULT_V_HI,
            threshold: 0.005,
            fit: FitOptions::default(),
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_lo < self.v_hi) {
            return Err(Error::Config(format!("window [{}, {}] V is empty", self.v_lo, self.v_hi)));
        }
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return Err(Error::Config(format!("threshold must be non-negative, got {}", self.threshold)));
        }
        if !(self.fit.fit_tol > 0.0) || self.fit.max_iter == 0 {
            return Err(Error::Config("fit tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkewnessResult {
    pub skewness: f64,
    pub mean: f64,
    pub std_dev: f64,
    /// `P(Q) - V_t` on the input grid.
    pub negative_potential: Vec<f64>,
    /// `dN/dQ` normalised to unit area, 1/Ah.
    pub density: Vec<f64>,
    /// Indices that survived the threshold.
    pub kept: Vec<usize>,
    /// Renormalised masses of the surviving samples.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakFeatures {
    /// V/Ah.
    pub height: f64,
    pub q_at_peak: f64,
    pub v_at_peak: f64,
    pub skewness: f64,
    pub fit: SurrogateFit,
    pub window: (f64, f64),
}

/// Steps 4 to 7 on an already isolated `N(Q)` sampled with spacing `dq`.
pub fn skewness_of_negative_potential(
    q: &[f64],
    negative_potential: Vec<f64>,
    smoothing: &SmoothingConfig,
    threshold: f64,
) -> Result<SkewnessResult> {
    let dq = smoothing.dq;
    let smoothed = smoothing.filter()?.smooth(&negative_potential)?;
    let dn = gradient(&smoothed, dq);
    let area: f64 = dn.iter().sum::<f64>() * dq;
    if !(area > 0.0) {
        return Err(Error::Degenerate(format!("dN/dQ has non-positive area {area}")));
    }
    let density: Vec<f64> = dn.iter().map(|x| x / area).collect();
    let kept: Vec<usize> = (0..density.len()).filter(|&k| density[k] >= threshold).collect();
    if kept.len() < MIN_SURVIVING_SAMPLES {
        return Err(Error::TooFewSamples {
            required: MIN_SURVIVING_SAMPLES,
            got: kept.len(),
        });
    }
    let mass: f64 = kept.iter().map(|&k| density[k] * dq).sum();
    let weights: Vec<f64> = kept.iter().map(|&k| density[k] * dq / mass).collect();
    let xs: Vec<f64> = kept.iter().map(|&k| q[k]).collect();
    let m = weighted_moments(&xs, &weights, MIN_STD_AH)?;
    Ok(SkewnessResult {
        skewness: m.skewness,
        mean: m.mean,
        std_dev: m.std_dev,
        negative_potential,
        density,
        kept,
        weights,
    })
}

/// Skewness of the dV/dQ peak from windowed, uniformly spaced `(q, v)` and
/// a surrogate fit on the same samples.
pub fn skewness_pipeline(
    q: &[f64],
    v: &[f64],
    fit: &SurrogateFit,
    smoothing: &SmoothingConfig,
    threshold: f64,
) -> Result<SkewnessResult> {
    if q.len() != v.len() {
        return Err(Error::InvalidParams("charge and voltage lengths differ".into()));
    }
    let n: Vec<f64> = q.iter().zip(v).map(|(&x, &vt)| fit.positive(x) - vt).collect();
    skewness_of_negative_potential(q, n, smoothing, threshold)
}

/// Full feature extraction on the pair-level signals of `trace`.
pub fn extract_features(trace: &SimTrace, smoothing: &SmoothingConfig, config: &FeatureConfig) -> Result<PeakFeatures> {
    config.validate()?;
    let curve = dvdq_curve(trace, smoothing, CurveSource::Pair).map_err(Error::at(Stage::Resample))?;
    let window = downselect_window(&curve, config.v_lo, config.v_hi).map_err(Error::at(Stage::Downselect))?;
    let peak = peak_height(&window).map_err(Error::at(Stage::PeakHeight))?;
    let hints = FitHints {
        e: Some(peak.q_at_peak),
        ..FitHints::default()
    };
    let fit = fit_positive_surrogate(&window.q, &window.v, &hints, &config.fit).map_err(Error::at(Stage::SurrogateFit))?;
    if !fit.converged {
        return Err(Error::at(Stage::SurrogateFit)(Error::Degenerate(format!(
            "surrogate fit did not converge (rms {:.3e} V, gradient {:.3e} V)",
            fit.residual_rms, fit.gradient_norm
        ))));
    }
    let skew = skewness_pipeline(&window.q, &window.v, &fit, smoothing, config.threshold)
        .map_err(Error::at(Stage::Skewness))?;
    Ok(PeakFeatures {
        height: peak.height,
        q_at_peak: peak.q_at_peak,
        v_at_peak: peak.v_at_peak,
        skewness: skew.skewness,
        fit,
        window: (config.v_lo, config.v_hi),
    })
}
