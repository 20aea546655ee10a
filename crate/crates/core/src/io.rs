//! File formats: CSV tables with fixed 12-significant-digit floats and JSON
//! records with the same rounding, so reruns produce identical bytes.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::features::PeakFeatures;
use crate::fit::SurrogateFit;
use crate::signal::DvDqCurve;
use crate::sim::SimTrace;
use crate::sweep::{FeatureMap, ProductCurve, ProductRow};

pub const TRACE_HEADER: &str = "t_s,i_total_A,i1_A,i2_A,z1,z2,q_pair_Ah,q1_Ah,q2_Ah,vt_V";
pub const CURVE_HEADER: &str = "q_Ah,v_V,dvdq_V_per_Ah";
pub const FEATURE_MAP_HEADER: &str = "alpha,beta,product,height_V_per_Ah,skewness,status";
pub const PRODUCT_CURVE_HEADER: &str = "product,mean_height,mean_skewness,spread_height,spread_skewness,n";

const SIG_DIGITS: usize = 12;

/// `%.12g`-style formatting.
pub fn fmt_g(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= SIG_DIGITS as i32 {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{m}e{exp}");
    }
    let rounded: f64 = sci.parse().expect("round trip");
    let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
    let fixed = format!("{rounded:.decimals$}");
    if fixed.contains('.') {
        fixed.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        fixed
    }
}

/// Rounds to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    fmt_g(x).parse().unwrap_or(x)
}

/// Rounds every float in a JSON tree to 12 significant digits.
pub fn round_json(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"));
            serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with rounded floats and a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Format(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&round_json(v)).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn row(fields: &[f64]) -> String {
    fields.iter().map(|&x| fmt_g(x)).collect::<Vec<_>>().join(",")
}

pub fn trace_csv(trace: &SimTrace) -> String {
    let mut out = String::with_capacity(trace.len() * 160);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for k in 0..trace.len() {
        out.push_str(&row(&[
            trace.t[k],
            trace.i_total[k],
            trace.i1[k],
            trace.i2[k],
            trace.z1[k],
            trace.z2[k],
            trace.q_pair[k],
            trace.q1[k],
            trace.q2[k],
            trace.v_t[k],
        ]));
        out.push('\n');
    }
    out
}

struct Table {
    columns: HashMap<String, usize>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn parse(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        let bad = |e: csv::Error| Error::Format(e.to_string());
        let header = reader.headers().map_err(bad)?;
        if header.is_empty() {
            return Err(Error::Format("empty file".into()));
        }
        let columns = header
            .iter()
            .enumerate()
            .map(|(i, c)| (c.trim_start_matches('\u{feff}').to_string(), i))
            .collect::<HashMap<_, _>>();
        let rows = reader
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()).map_err(bad))
            .collect::<Result<Vec<Vec<String>>>>()?;
        Ok(Self { columns, rows })
    }

    fn has(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let idx = *self
            .columns
            .get(name)
            .ok_or_else(|| Error::Format(format!("missing column `{name}`")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, fields)| {
                let field = fields
                    .get(idx)
                    .ok_or_else(|| Error::Format(format!("row {} is missing column `{name}`", r + 2)))?;
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("row {}: `{field}` in `{name}` is not a number", r + 2)))
            })
            .collect()
    }
}

/// Reads a trace table. Only `t_s`, `i_total_A` and `vt_V` are required;
/// the pair charge axis is always recomputed by trapezoidal coulomb
/// counting of the pair current.
pub fn read_trace_csv(text: &str) -> Result<SimTrace> {
    let table = Table::parse(text)?;
    let t = table.floats("t_s")?;
    let i_total = table.floats("i_total_A")?;
    let v_t = table.floats("vt_V")?;
    if t.len() < 2 {
        return Err(Error::Format(format!("need at least 2 samples, got {}", t.len())));
    }
    let mut q_pair = Vec::with_capacity(t.len());
    q_pair.push(0.0);
    for k in 1..t.len() {
        let dq = -0.5 * (i_total[k] + i_total[k - 1]) * (t[k] - t[k - 1]) / 3600.0;
        q_pair.push(q_pair[k - 1] + dq);
    }
    let optional = |name: &str| -> Result<Vec<f64>> {
        if table.has(name) {
            table.floats(name)
        } else {
            Ok(vec![0.0; t.len()])
        }
    };
    let q2 = optional("q2_Ah")?;
    let has_cell2 = table.has("q2_Ah") && q2.iter().any(|&x| x != 0.0);
    Ok(SimTrace {
        i1: optional("i1_A")?,
        i2: optional("i2_A")?,
        z1: optional("z1")?,
        z2: optional("z2")?,
        q1: optional("q1_Ah")?,
        q2,
        t,
        i_total,
        q_pair,
        v_t,
        has_cell2,
        termination: None,
        diagnostics: Vec::new(),
    })
}

pub fn curve_csv(curve: &DvDqCurve) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for k in 0..curve.len() {
        out.push_str(&row(&[curve.q[k], curve.v[k], curve.dvdq[k]]));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    #[serde(rename = "residual_rms_V")]
    pub residual_rms_v: f64,
    pub converged: bool,
}

/// On-disk form of [`PeakFeatures`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesRecord {
    #[serde(rename = "height_V_per_Ah")]
    pub height_v_per_ah: f64,
    #[serde(rename = "q_at_peak_Ah")]
    pub q_at_peak_ah: f64,
    #[serde(rename = "v_at_peak_V")]
    pub v_at_peak_v: f64,
    pub skewness: f64,
    pub fit: FitRecord,
    #[serde(rename = "window_V")]
    pub window_v: [f64; 2],
}

impl From<&PeakFeatures> for FeaturesRecord {
    fn from(f: &PeakFeatures) -> Self {
        Self {
            height_v_per_ah: f.height,
            q_at_peak_ah: f.q_at_peak,
            v_at_peak_v: f.v_at_peak,
            skewness: f.skewness,
            fit: FitRecord {
                a: f.fit.a,
                b: f.fit.b,
                c: f.fit.c,
                d: f.fit.d,
                e: f.fit.e,
                f: f.fit.f,
                residual_rms_v: f.fit.residual_rms,
                converged: f.fit.converged,
            },
            window_v: [f.window.0, f.window.1],
        }
    }
}

impl From<&FeaturesRecord> for PeakFeatures {
    fn from(r: &FeaturesRecord) -> Self {
        let fit = &r.fit;
        Self {
            height: r.height_v_per_ah,
            q_at_peak: r.q_at_peak_ah,
            v_at_peak: r.v_at_peak_v,
            skewness: r.skewness,
            fit: SurrogateFit {
                a: fit.a,
                b: fit.b,
                c: fit.c,
                d: fit.d,
                e: fit.e,
                f: fit.f,
                residual_rms: fit.residual_rms_v,
                converged: fit.converged,
                rank_deficient: fit.d.abs() < crate::fit::RANK_DEFICIENT_D,
                gradient_norm: f64::NAN,
                iterations: 0,
            },
            window: (r.window_v[0], r.window_v[1]),
        }
    }
}

pub fn features_json(features: &PeakFeatures) -> Result<String> {
    to_json_string(&FeaturesRecord::from(features))
}

pub fn read_features_json(text: &str) -> Result<PeakFeatures> {
    let record: FeaturesRecord = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    Ok(PeakFeatures::from(&record))
}

fn sanitize(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

pub fn feature_map_csv(map: &FeatureMap) -> String {
    let mut out = String::from(FEATURE_MAP_HEADER);
    out.push('\n');
    for cell in &map.cells {
        let (h, s, status) = match &cell.outcome {
            Ok(f) => (fmt_g(f.height), fmt_g(f.skewness), "ok".to_string()),
            Err(e) => (String::new(), String::new(), sanitize(e)),
        };
        out.push_str(&format!(
            "{},{},{},{h},{s},{status}\n",
            fmt_g(cell.alpha),
            fmt_g(cell.beta),
            fmt_g(cell.product())
        ));
    }
    out
}

pub fn product_curve_csv(curve: &ProductCurve) -> String {
    let mut out = String::from(PRODUCT_CURVE_HEADER);
    out.push('\n');
    for r in &curve.rows {
        out.push_str(&row(&[r.p, r.mean_height, r.mean_skewness, r.spread_height, r.spread_skewness]));
        out.push_str(&format!(",{}\n", r.n));
    }
    out
}

pub fn read_product_curve_csv(text: &str) -> Result<ProductCurve> {
    let table = Table::parse(text)?;
    let p = table.floats("product")?;
    let mh = table.floats("mean_height")?;
    let ms = table.floats("mean_skewness")?;
    let sh = table.floats("spread_height")?;
    let ss = table.floats("spread_skewness")?;
    let n = table.floats("n")?;
    let rows: Vec<ProductRow> = (0..p.len())
        .map(|k| ProductRow {
            p: p[k],
            mean_height: mh[k],
            mean_skewness: ms[k],
            spread_height: sh[k],
            spread_skewness: ss[k],
            n: n[k] as usize,
        })
        .collect();
    if rows.windows(2).any(|w| !(w[1].p > w[0].p)) {
        return Err(Error::Format("product curve rows must be sorted by product".into()));
    }
    if rows.iter().any(|r| r.spread_height < 0.0 || r.spread_skewness < 0.0) {
        return Err(Error::Format("negative spread in product curve".into()));
    }
    Ok(ProductCurve { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g_formatting() {
        assert_eq!(fmt_g(0.0), "0");
        assert_eq!(fmt_g(-0.0), "0");
        assert_eq!(fmt_g(1.0), "1");
        assert_eq!(fmt_g(-40.0), "-40");
        assert_eq!(fmt_g(0.1 + 0.2), "0.3");
        assert_eq!(fmt_g(4.614219123456789), "4.61421912346");
        assert_eq!(fmt_g(1.5e-7), "1.5e-7");
        assert_eq!(fmt_g(123456789012345.0), "1.23456789012e14");
        assert_eq!(fmt_g(999999999999.9), "1e12");
        assert_eq!(fmt_g(0.0001), "0.0001");
    }

    #[test]
    fn trace_reader_needs_pair_columns() {
        let text = "t_s,vt_V\n0,4.1\n1,4.0\n";
        let err = read_trace_csv(text).unwrap_err();
        assert!(err.to_string().contains("i_total_A"));
        let text = "t_s,i_total_A,vt_V\n0,-36,4.1\n100,-36,4.0\n";
        let tr = read_trace_csv(text).unwrap();
        assert!((tr.q_pair[1] - 1.0).abs() < 1e-12);
        assert!(!tr.has_cell2);
        assert!(read_trace_csv("t_s,i_total_A,vt_V\n0,-1,x\n1,-1,4\n").is_err());
    }

    #[test]
    fn trace_reader_accepts_logger_quirks() {
        let text = "\u{feff}\"vt_V\", t_s ,\"i_total_A\"\r\n4.1,0,-36\r\n\r\n4.0,100,-36\r\n";
        let tr = read_trace_csv(text).unwrap();
        assert_eq!(tr.v_t, vec![4.1, 4.0]);
        assert!((tr.q_pair[1] - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn formatted_values_round_trip_to_12_digits(x in -1e6f64..1e6) {
            let parsed: f64 = fmt_g(x).parse().unwrap();
            prop_assert!((parsed - x).abs() <= 5e-12 * x.abs().max(1e-300));
            prop_assert_eq!(fmt_g(parsed), fmt_g(x));
        }
    }
}
