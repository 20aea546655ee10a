//! Run configuration: built-in defaults, then a config file, then flags.
//!
//! Config file grammar, one entry per line:
//!
//! ```text
//! # comment
//! key = value          # trailing comments allowed
//! alpha_grid = 0.5, 0.75, 1.0
//! ```
//!
//! Keys are the long flag names with `_` in place of `-`. Unknown and
//! repeated keys are errors. A JSON sidecar written by this tool is also
//! accepted; its `config` object is read with the same key rules.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use pairdva_core::sweep::{DEFAULT_BIN_WIDTH, DEFAULT_C_TOTAL_AH, DEFAULT_R_PARALLEL_OHM};
use pairdva_core::{
    default_alpha_grid, default_beta_grid, Error, FeatureConfig, FitOptions, IdentifyConfig, Result, ScenarioConfig,
    SimConfig, SmoothingConfig,
};
use serde_json::{json, Value};

pub const OUT_DIR_ENV: &str = "PAIRDVA_OUT_DIR";

/// Flags shared by every subcommand. Each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Flat `key = value` config file, or a JSON sidecar from an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: $PAIRDVA_OUT_DIR, else the current directory].
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// Capacity ratio C2/C1, in (0, 1].
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Resistance ratio R2/R1, at least 1.
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub c_total_ah: Option<f64>,
    #[arg(long, global = true)]
    pub r_parallel_ohm: Option<f64>,

    #[arg(long, global = true)]
    pub c_rate: Option<f64>,
    #[arg(long, global = true)]
    pub dt_s: Option<f64>,
    #[arg(long, global = true)]
    pub z0: Option<f64>,
    #[arg(long, global = true)]
    pub v_cutoff_v: Option<f64>,
    #[arg(long, global = true)]
    pub soc_floor: Option<f64>,
    /// Time guard [default: five nominal discharge durations].
    #[arg(long, global = true)]
    pub t_max_s: Option<f64>,

    #[arg(long, global = true)]
    pub dq_ah: Option<f64>,
    #[arg(long, global = true)]
    pub sg_window: Option<usize>,
    #[arg(long, global = true)]
    pub sg_order: Option<usize>,

    #[arg(long, global = true)]
    pub v_lo: Option<f64>,
    #[arg(long, global = true)]
    pub v_hi: Option<f64>,
    /// Density threshold for the skewness statistic, 1/Ah.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Largest acceptable surrogate-fit residual rms, V.
    #[arg(long, global = true)]
    pub fit_tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,

    #[arg(long, global = true, value_delimiter = ',')]
    pub alpha_grid: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub beta_grid: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub bin_width: Option<f64>,

    /// Height matching tolerance for identification, V/Ah.
    #[arg(long, global = true)]
    pub height_tol: Option<f64>,
    /// Skewness difference below which candidates are ambiguous.
    #[arg(long, global = true)]
    pub skew_resolution: Option<f64>,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub beta: f64,
    pub scenario: ScenarioConfig,
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub bin_width: f64,
    pub identify: IdentifyConfig,
    pub out_dir: PathBuf,
}

const KEYS: &[&str] = &[
    "alpha",
    "beta",
    "c_total_ah",
    "r_parallel_ohm",
    "c_rate",
    "dt_s",
    "z0",
    "v_cutoff_v",
    "soc_floor",
    "t_max_s",
    "dq_ah",
    "sg_window",
    "sg_order",
    "v_lo",
    "v_hi",
    "threshold",
    "fit_tol",
    "max_iter",
    "alpha_grid",
    "beta_grid",
    "bin_width",
    "height_tol",
    "skew_resolution",
    "out_dir",
];

fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        insert(&mut map, k.trim(), v.trim().to_string())?;
    }
    Ok(map)
}

fn insert(map: &mut BTreeMap<String, String>, key: &str, value: String) -> Result<()> {
    if !KEYS.contains(&key) {
        return Err(Error::Config(format!("unknown config key `{key}`")));
    }
    if map.insert(key.to_string(), value).is_some() {
        return Err(Error::Config(format!("config key `{key}` given twice")));
    }
    Ok(())
}

fn parse_json(text: &str) -> Result<BTreeMap<String, String>> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("config JSON: {e}")))?;
    let obj = v.get("config").unwrap_or(&v);
    let obj = obj
        .as_object()
        .ok_or_else(|| Error::Config("config JSON must be an object".into()))?;
    let mut map = BTreeMap::new();
    for (k, v) in obj {
        let text = match v {
            Value::Null => continue,
            Value::String(s) => s.clone(),
            Value::Array(xs) => xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
            other => other.to_string(),
        };
        insert(&mut map, k, text)?;
    }
    Ok(map)
}

fn read_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        parse_json(&text)
    } else {
        parse_kv(&text)
    }
}

struct Layer<'a> {
    file: &'a BTreeMap<String, String>,
}

impl Layer<'_> {
    fn get<T: std::str::FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.file.get(key) {
            Some(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("config key `{key}`: cannot parse `{s}`"))),
            None => Ok(default),
        }
    }

    fn opt(&self, key: &str, flag: Option<f64>) -> Result<Option<f64>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.file.get(key).map(|_| self.get(key, None, 0.0)).transpose()
    }

    fn list(&self, key: &str, flag: Option<Vec<f64>>, default: Vec<f64>) -> Result<Vec<f64>> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.file.get(key) {
            Some(s) => s
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("config key `{key}`: cannot parse `{x}`")))
                })
                .collect(),
            None => Ok(default),
        }
    }
}

impl ConfigArgs {
    /// Resolves flags over the config file over defaults, then validates.
    /// `env_out_dir` is the value of [`OUT_DIR_ENV`], if set.
    pub fn resolve(&self, env_out_dir: Option<PathBuf>) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => read_file(p)?,
            None => BTreeMap::new(),
        };
        let l = Layer { file: &file };
        let c_rate = l.get("c_rate", self.c_rate, 1.0 / 3.0)?;
        let base_sim = SimConfig::with_c_rate(c_rate);
        let sim = SimConfig {
            c_rate,
            dt: l.get("dt_s", self.dt_s, base_sim.dt)?,
            z0: l.get("z0", self.z0, base_sim.z0)?,
            v_cutoff: l.get("v_cutoff_v", self.v_cutoff_v, base_sim.v_cutoff)?,
            soc_floor: l.get("soc_floor", self.soc_floor, base_sim.soc_floor)?,
            t_max: l.get("t_max_s", self.t_max_s, base_sim.t_max)?,
        };
        let ds = SmoothingConfig::default();
        let smoothing = SmoothingConfig {
            dq: l.get("dq_ah", self.dq_ah, ds.dq)?,
            sg_window: l.get("sg_window", self.sg_window, ds.sg_window)?,
            sg_order: l.get("sg_order", self.sg_order, ds.sg_order)?,
        };
        let df = FeatureConfig::default();
        let features = FeatureConfig {
            v_lo: l.get("v_lo", self.v_lo, df.v_lo)?,
            v_hi: l.get("v_hi", self.v_hi, df.v_hi)?,
            threshold: l.get("threshold", self.threshold, df.threshold)?,
            fit: FitOptions {
                fit_tol: l.get("fit_tol", self.fit_tol, df.fit.fit_tol)?,
                max_iter: l.get("max_iter", self.max_iter, df.fit.max_iter)?,
            },
        };
        let scenario = ScenarioConfig {
            c_total: l.get("c_total_ah", self.c_total_ah, DEFAULT_C_TOTAL_AH)?,
            r_parallel: l.get("r_parallel_ohm", self.r_parallel_ohm, DEFAULT_R_PARALLEL_OHM)?,
            sim,
            smoothing,
            features,
        };
        scenario.validate()?;
        let out_dir = match (&self.out_dir, file.get("out_dir"), env_out_dir) {
            (Some(p), _, _) => p.clone(),
            (None, Some(p), _) => PathBuf::from(p),
            (None, None, Some(p)) => p,
            (None, None, None) => PathBuf::from("."),
        };
        let run = RunConfig {
            alpha: l.get("alpha", self.alpha, 1.0)?,
            beta: l.get("beta", self.beta, 1.0)?,
            scenario,
            alpha_grid: l.list("alpha_grid", self.alpha_grid.clone(), default_alpha_grid())?,
            beta_grid: l.list("beta_grid", self.beta_grid.clone(), default_beta_grid())?,
            bin_width: l.get("bin_width", self.bin_width, DEFAULT_BIN_WIDTH)?,
            identify: IdentifyConfig {
                height_tol: l.opt("height_tol", self.height_tol)?,
                skew_resolution: l.opt("skew_resolution", self.skew_resolution)?,
                ..IdentifyConfig::default()
            },
            out_dir,
        };
        if !(run.bin_width.is_finite() && run.bin_width > 0.0) {
            return Err(Error::Config(format!("bin_width must be positive, got {}", run.bin_width)));
        }
        for (key, v) in [("height_tol", run.identify.height_tol), ("skew_resolution", run.identify.skew_resolution)] {
            if v.is_some_and(|x| !(x.is_finite() && x >= 0.0)) {
                return Err(Error::Config(format!("{key} must be non-negative")));
            }
        }
        Ok(run)
    }
}

impl RunConfig {
    /// Flat echo using config-file keys, so a sidecar can be fed back
    /// through `--config`. The output directory is left out so a rerun
    /// lands wherever the caller points it.
    pub fn echo(&self) -> Value {
        let s = &self.scenario;
        json!({
            "alpha": self.alpha,
            "beta": self.beta,
            "c_total_ah": s.c_total,
            "r_parallel_ohm": s.r_parallel,
            "c_rate": s.sim.c_rate,
            "dt_s": s.sim.dt,
            "z0": s.sim.z0,
            "v_cutoff_v": s.sim.v_cutoff,
            "soc_floor": s.sim.soc_floor,
            "t_max_s": s.sim.t_max,
            "dq_ah": s.smoothing.dq,
            "sg_window": s.smoothing.sg_window,
            "sg_order": s.smoothing.sg_order,
            "v_lo": s.features.v_lo,
            "v_hi": s.features.v_hi,
            "threshold": s.features.threshold,
            "fit_tol": s.features.fit.fit_tol,
            "max_iter": s.features.fit.max_iter,
            "alpha_grid": self.alpha_grid,
            "beta_grid": self.beta_grid,
            "bin_width": self.bin_width,
            "height_tol": self.identify.height_tol,
            "skew_resolution": self.identify.skew_resolution,
        })
    }
}
