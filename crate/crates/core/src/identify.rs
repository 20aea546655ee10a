//! Inversion of measured peak features to the capacity-resistance ratio
//! product.
//!
//! Peak height falls on both sides of `p = 1`, so a measured height maps
//! to at most one candidate on each branch of the product curve. Skewness
//! picks between them. Near `p = 1` the skewness is flat and the two
//! branches cannot be told apart, which is reported as ambiguity rather
//! than hidden. Only the product is ever returned; the individual ratios
//! are not identifiable from these features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::PeakFeatures;
use crate::sweep::{ProductCurve, ProductRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentifyConfig {
    /// Height matching tolerance, V/Ah. Defaults to the largest per-bin
    /// height spread of the curve.
    pub height_tol: Option<f64>,
    /// Skewness resolution. Defaults to twice the largest skewness spread
    /// among bins within `near_one` of `p = 1`.
    pub skew_resolution: Option<f64>,
    pub near_one: f64,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        Self {
            height_tol: None,
            skew_resolution: None,
            near_one: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub p: f64,
    /// Curve skewness at `p`.
    pub skewness: f64,
    /// `|curve skewness - measured skewness|`.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationResult {
    pub p_hat: f64,
    pub candidates: Vec<Candidate>,
    pub ambiguous: bool,
    pub note: String,
    pub height_tol: f64,
    pub skew_resolution: f64,
}

fn lerp(a: f64, b: f64, s: f64) -> f64 {
    a + s * (b - a)
}

/// Best candidate on one branch; `rows` runs outward from the height peak.
fn branch_candidate(rows: &[&ProductRow], height: f64, skewness: f64, tol: f64) -> Option<Candidate> {
    let make = |p: f64, s: f64| Candidate {
        p,
        skewness: s,
        distance: (s - skewness).abs(),
    };
    let mut found: Vec<Candidate> = rows
        .windows(2)
        .filter_map(|w| {
            let (h0, h1) = (w[0].mean_height, w[1].mean_height);
            if (height - h0) * (height - h1) > 0.0 {
                return None;
            }
            let s = if h1 == h0 { 0.0 } else { (height - h0) / (h1 - h0) };
            Some(make(lerp(w[0].p, w[1].p, s), lerp(w[0].mean_skewness, w[1].mean_skewness, s)))
        })
        .collect();
    if found.is_empty() {
        let peak = rows[0];
        let end = rows[rows.len() - 1];
        if height >= peak.mean_height && height - peak.mean_height <= tol {
            found.push(make(peak.p, peak.mean_skewness));
        } else if height < end.mean_height && end.mean_height - height <= tol {
            found.push(make(end.p, end.mean_skewness));
        }
    }
    found.into_iter().min_by(|a, b| a.distance.total_cmp(&b.distance))
}

/// Identifies the ratio product from measured peak features.
pub fn identify_product(features: &PeakFeatures, curve: &ProductCurve, config: &IdentifyConfig) -> Result<IdentificationResult> {
    identify_from_values(features.height, features.skewness, curve, config)
}

pub fn identify_from_values(height: f64, skewness: f64, curve: &ProductCurve, config: &IdentifyConfig) -> Result<IdentificationResult> {
    let rows = &curve.rows;
    if rows.is_empty() {
        return Err(Error::EmptyMap);
    }
    let height_tol = config
        .height_tol
        .unwrap_or_else(|| rows.iter().map(|r| r.spread_height).fold(0.0, f64::max));
    let skew_resolution = config.skew_resolution.unwrap_or_else(|| {
        let near: Vec<f64> = rows
            .iter()
            .filter(|r| (r.p - 1.0).abs() <= config.near_one)
            .map(|r| r.spread_skewness)
            .collect();
        let pool = if near.is_empty() { rows.iter().map(|r| r.spread_skewness).collect() } else { near };
        2.0 * pool.into_iter().fold(0.0, f64::max)
    });

    let k_peak = (0..rows.len())
        .max_by(|&i, &j| rows[i].mean_height.total_cmp(&rows[j].mean_height).then(j.cmp(&i)))
        .expect("rows are non-empty");
    let left: Vec<&ProductRow> = rows[..=k_peak].iter().rev().collect();
    let right: Vec<&ProductRow> = rows[k_peak..].iter().collect();
    let mut candidates: Vec<Candidate> = [left, right]
        .iter()
        .filter_map(|branch| branch_candidate(branch, height, skewness, height_tol))
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoCandidate { height });
    }
    candidates.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.p.total_cmp(&b.p)));
    let best = candidates[0];
    let ambiguous = candidates[1..]
        .iter()
        .any(|c| (c.skewness - best.skewness).abs() < skew_resolution);
    let note = if ambiguous {
        format!(
            "skewness cannot separate the candidate products (difference below {skew_resolution:.3e}); the product is only known to lie near {:.3}",
            best.p
        )
    } else if candidates.len() > 1 {
        "height admits two products; skewness selects the nearer branch".to_string()
    } else {
        "height admits a single product on the curve".to_string()
    };
    Ok(IdentificationResult {
        p_hat: best.p,
        candidates,
        ambiguous,
        note,
        height_tol,
        skew_resolution,
    })
}
