//! Sweeps over capacity and resistance ratios, and the collapse of the
//! resulting feature map onto the ratio product.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureConfig, PeakFeatures};
use crate::pair::make_pair;
use crate::signal::SmoothingConfig;
use crate::sim::{simulate_cc_discharge, SimConfig};

pub const DEFAULT_C_TOTAL_AH: f64 = 120.0;
pub const DEFAULT_R_PARALLEL_OHM: f64 = 0.001;
pub const DEFAULT_BIN_WIDTH: f64 = 0.02;

/// Everything needed to turn an `(alpha, beta)` pair into features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub c_total: f64,
    pub r_parallel: f64,
    pub sim: SimConfig,
    pub smoothing: SmoothingConfig,
    pub features: FeatureConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            c_total: DEFAULT_C_TOTAL_AH,
            r_parallel: DEFAULT_R_PARALLEL_OHM,
            sim: SimConfig::default(),
            smoothing: SmoothingConfig::default(),
            features: FeatureConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.smoothing.validate()?;
        self.features.validate()?;
        if !(self.c_total > 0.0 && self.r_parallel > 0.0) {
            return Err(Error::Config("total capacity and parallel resistance must be positive".into()));
        }
        Ok(())
    }

    /// Simulates the pair `(alpha, beta)` and extracts its features.
    pub fn features_at(&self, alpha: f64, beta: f64) -> Result<PeakFeatures> {
        let pair = make_pair(alpha, beta, self.c_total, self.r_parallel)?;
        let trace = simulate_cc_discharge(&pair, &self.sim)?;
        extract_features(&trace, &self.smoothing, &self.features)
    }
}

/// `0.50, 0.55, ..., 1.00`.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=10).map(|k| (50 + 5 * k) as f64 / 100.0).collect()
}

/// `1.0, 1.1, ..., 2.0`.
pub fn default_beta_grid() -> Vec<f64> {
    (0..=10).map(|k| (10 + k) as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub alpha: f64,
    pub beta: f64,
    /// Features, or the reason extraction failed.
    pub outcome: std::result::Result<PeakFeatures, String>,
}

impl SweepCell {
    pub fn product(&self) -> f64 {
        self.alpha * self.beta
    }
}

/// Rectangular grid of features, alpha-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub cells: Vec<SweepCell>,
    pub config: ScenarioConfig,
}

impl FeatureMap {
    pub fn get(&self, alpha_idx: usize, beta_idx: usize) -> &SweepCell {
        &self.cells[alpha_idx * self.beta_grid.len() + beta_idx]
    }

    pub fn successes(&self) -> impl Iterator<Item = (&SweepCell, &PeakFeatures)> {
        self.cells.iter().filter_map(|c| c.outcome.as_ref().ok().map(|f| (c, f)))
    }
}

fn check_grid(name: &str, grid: &[f64], valid: impl Fn(f64) -> bool) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Grid(format!("{name} grid is empty")));
    }
    if let Some(x) = grid.iter().find(|&&x| !valid(x)) {
        return Err(Error::Grid(format!("{name} value {x} out of range")));
    }
    Ok(())
}

/// Runs every grid point, on `workers` threads when given. Output order
/// and content do not depend on the thread count.
pub fn run_sweep(alpha_grid: &[f64], beta_grid: &[f64], config: &ScenarioConfig, workers: Option<usize>) -> Result<FeatureMap> {
    check_grid("alpha", alpha_grid, |a| a.is_finite() && a > 0.0 && a <= 1.0)?;
    check_grid("beta", beta_grid, |b| b.is_finite() && b >= 1.0)?;
    config.validate()?;
    let points: Vec<(f64, f64)> = alpha_grid
        .iter()
        .flat_map(|&a| beta_grid.iter().map(move |&b| (a, b)))
        .collect();
    let eval = |&(alpha, beta): &(f64, f64)| SweepCell {
        alpha,
        beta,
        outcome: config.features_at(alpha, beta).map_err(|e| e.to_string()),
    };
    let cells = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
            .install(|| points.par_iter().map(eval).collect()),
        None => points.par_iter().map(eval).collect(),
    };
    Ok(FeatureMap {
        alpha_grid: alpha_grid.to_vec(),
        beta_grid: beta_grid.to_vec(),
        cells,
        config: *config,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductRow {
    /// Mean ratio product of the bin members.
    pub p: f64,
    pub mean_height: f64,
    pub mean_skewness: f64,
    /// Max minus min over the bin.
    pub spread_height: f64,
    pub spread_skewness: f64,
    pub n: usize,
}

/// Features aggregated over bins of the ratio product, sorted by product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductCurve {
    pub rows: Vec<ProductRow>,
}

impl ProductCurve {
    pub fn row_near(&self, p: f64) -> Option<&ProductRow> {
        self.rows.iter().min_by(|a, b| (a.p - p).abs().total_cmp(&(b.p - p).abs()))
    }
}

fn spread(xs: &[f64]) -> f64 {
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    hi - lo
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn product_curve(map: &FeatureMap, bin_width: f64) -> Result<ProductCurve> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::Config(format!("bin width must be positive, got {bin_width}")));
    }
    let mut bins: BTreeMap<i64, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for (cell, f) in map.successes() {
        let p = cell.product();
        bins.entry((p / bin_width).round() as i64).or_default().push((p, f.height, f.skewness));
    }
    if bins.is_empty() {
        return Err(Error::EmptyMap);
    }
    let rows = bins
        .into_values()
        .map(|members| {
            let ps: Vec<f64> = members.iter().map(|m| m.0).collect();
            let hs: Vec<f64> = members.iter().map(|m| m.1).collect();
            let ss: Vec<f64> = members.iter().map(|m| m.2).collect();
            ProductRow {
                p: mean(&ps),
                mean_height: mean(&hs),
                mean_skewness: mean(&ss),
                spread_height: spread(&hs),
                spread_skewness: spread(&ss),
                n: members.len(),
            }
        })
        .collect();
    Ok(ProductCurve { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grids() {
        let a = default_alpha_grid();
        let b = default_beta_grid();
        assert_eq!(a.len(), 11);
        assert_eq!(b.len(), 11);
        assert_eq!(a[0], 0.5);
        assert_eq!(a[10], 1.0);
        assert_eq!(a[3], 0.65);
        assert_eq!(b[0], 1.0);
        assert_eq!(b[10], 2.0);
        assert_eq!(b[4], 1.4);
    }

    #[test]
    fn grid_errors() {
        let cfg = ScenarioConfig::default();
        assert!(matches!(run_sweep(&[], &[1.0], &cfg, None), Err(Error::Grid(_))));
        assert!(matches!(run_sweep(&[1.2], &[1.0], &cfg, None), Err(Error::Grid(_))));
        assert!(matches!(run_sweep(&[0.5], &[0.5], &cfg, None), Err(Error::Grid(_))));
    }

    #[test]
    fn small_sweep_is_order_independent() {
        let cfg = ScenarioConfig::default();
        let a = run_sweep(&[0.5, 1.0], &[1.0, 2.0], &cfg, Some(1)).unwrap();
        let b = run_sweep(&[0.5, 1.0], &[1.0, 2.0], &cfg, Some(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.get(1, 0).alpha, 1.0);
        assert_eq!(a.get(1, 0).beta, 1.0);
        let base = cfg.features_at(1.0, 1.0).unwrap();
        assert_eq!(a.get(1, 0).outcome.as_ref().unwrap(), &base);
    }

    #[test]
    fn single_cell_curve() {
        let cfg = ScenarioConfig::default();
        let map = run_sweep(&[0.7], &[1.3], &cfg, None).unwrap();
        let curve = product_curve(&map, DEFAULT_BIN_WIDTH).unwrap();
        assert_eq!(curve.rows.len(), 1);
        assert_eq!(curve.rows[0].n, 1);
        assert_eq!(curve.rows[0].spread_height, 0.0);
        assert_eq!(curve.rows[0].spread_skewness, 0.0);
        assert!(product_curve(&map, 0.0).is_err());
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let cfg = ScenarioConfig {
            features: FeatureConfig { v_lo: 4.8, v_hi: 4.9, ..FeatureConfig::default() },
            ..ScenarioConfig::default()
        };
        let map = run_sweep(&[1.0], &[1.0], &cfg, None).unwrap();
        let err = map.cells[0].outcome.as_ref().unwrap_err();
        assert!(err.contains("downselect"), "{err}");
        assert!(matches!(product_curve(&map, DEFAULT_BIN_WIDTH), Err(Error::EmptyMap)));
    }
}
