//! `pairdva`: simulate parallel cell pairs, extract dV/dQ peak features,
//! sweep imbalance ratios and identify the ratio product.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pairdva_core::io::{
    curve_csv, feature_map_csv, features_json, product_curve_csv, read_features_json, read_product_curve_csv,
    read_trace_csv, round_json, to_json_string, trace_csv,
};
use pairdva_core::{
    dvdq_curve, extract_features, identify_product, make_pair, product_curve, run_sweep, simulate_cc_discharge,
    CurveSource, Error, Result,
};
use serde_json::json;

use config::{ConfigArgs, RunConfig, OUT_DIR_ENV};

#[derive(Debug, Parser)]
#[command(name = "pairdva", version, about = "Parallel cell pair dV/dQ diagnosis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Constant-current discharge of one pair: trace.csv and trace.json.
    Simulate {
        /// Also write dV/dQ curves for the pair and each cell.
        #[arg(long)]
        curves: bool,
    },
    /// Peak features of a trace CSV as JSON.
    Features {
        trace: PathBuf,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Feature map over the alpha and beta grids, and its product curve.
    Sweep {
        /// Worker threads [default: all cores]. Output does not depend on it.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Ratio product from a features JSON and a product-curve CSV.
    Identify {
        features: PathBuf,
        curve: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))
}

struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, content)?;
        self.written.push(path);
        Ok(())
    }

    fn report(&self) {
        let mut out = std::io::stdout().lock();
        for p in &self.written {
            let _ = writeln!(out, "{}", p.display());
        }
    }
}

/// Sidecar JSON: measured values rounded like every other output, the
/// config echo kept at full precision so it reproduces the run exactly.
fn sidecar(body: serde_json::Value, run: &RunConfig) -> Result<String> {
    let mut v = round_json(body);
    v["config"] = run.echo();
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(p, text)?;
        }
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn simulate(run: &RunConfig, curves: bool) -> Result<()> {
    let s = &run.scenario;
    let pair = make_pair(run.alpha, run.beta, s.c_total, s.r_parallel)?;
    let trace = simulate_cc_discharge(&pair, &s.sim)?;
    let mut w = Writer::new(&run.out_dir)?;
    w.put("trace.csv", &trace_csv(&trace))?;
    let meta = json!({
        "params": {
            "cell1": { "capacity_Ah": pair.cell1.capacity, "resistance_ohm": pair.cell1.resistance },
            "cell2": { "capacity_Ah": pair.cell2.capacity, "resistance_ohm": pair.cell2.resistance },
            "alpha": pair.alpha(),
            "beta": pair.beta(),
        },
        "sim_config": s.sim,
        "termination": trace.termination,
        "samples": trace.len(),
        "diagnostics": trace.diagnostics,
    });
    w.put("trace.json", &sidecar(meta, run)?)?;
    if curves {
        for (source, stem) in [
            (CurveSource::Pair, "dvdq_pair"),
            (CurveSource::Cell1, "dvdq_cell1"),
            (CurveSource::Cell2, "dvdq_cell2"),
        ] {
            let curve = dvdq_curve(&trace, &s.smoothing, source)?;
            w.put(&format!("{stem}.csv"), &curve_csv(&curve))?;
            let meta = json!({
                "source": source,
                "smoothing": s.smoothing,
                "samples": curve.len(),
            });
            w.put(&format!("{stem}.json"), &sidecar(meta, run)?)?;
        }
    }
    w.report();
    Ok(())
}

fn features(run: &RunConfig, trace: &Path, out: Option<&Path>) -> Result<()> {
    let trace = read_trace_csv(&read(trace)?)?;
    let f = extract_features(&trace, &run.scenario.smoothing, &run.scenario.features)?;
    emit(out, &features_json(&f)?)
}

fn sweep(run: &RunConfig, workers: Option<usize>) -> Result<()> {
    let map = run_sweep(&run.alpha_grid, &run.beta_grid, &run.scenario, workers)?;
    let mut w = Writer::new(&run.out_dir)?;
    w.put("featuremap.csv", &feature_map_csv(&map))?;
    let failures = map.cells.iter().filter(|c| c.outcome.is_err()).count();
    let curve = product_curve(&map, run.bin_width);
    if let Ok(c) = &curve {
        w.put("product_curve.csv", &product_curve_csv(c))?;
    }
    let meta = json!({
        "cells": map.cells.len(),
        "failures": failures,
        "bins": curve.as_ref().map(|c| c.rows.len()).unwrap_or(0),
        "scenario": map.config,
    });
    w.put("sweep.json", &sidecar(meta, run)?)?;
    w.report();
    curve.map(|_| ())
}

fn identify(run: &RunConfig, features: &Path, curve: &Path, out: Option<&Path>) -> Result<()> {
    let f = read_features_json(&read(features)?)?;
    let c = read_product_curve_csv(&read(curve)?)?;
    let r = identify_product(&f, &c, &run.identify)?;
    emit(out, &to_json_string(&r)?)
}

fn run(cli: Cli) -> Result<()> {
    let env_out = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    let cfg = cli.config.resolve(env_out)?;
    match &cli.command {
        Command::Simulate { curves } => simulate(&cfg, *curves),
        Command::Features { trace, out } => features(&cfg, trace, out.as_deref()),
        Command::Sweep { workers } => sweep(&cfg, *workers),
        Command::Identify { features, curve, out } => identify(&cfg, features, curve, out.as_deref()),
    }
}

fn error_json(e: &Error) -> String {
    let message = match e {
        Error::AtStage { source, .. } => source.to_string(),
        other => other.to_string(),
    };
    json!({
        "error": {
            "kind": e.kind(),
            "stage": e.stage().map(|s| s.name()),
            "message": message,
        }
    })
    .to_string()
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
