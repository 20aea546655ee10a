//! Simulation and differential-voltage diagnosis of two Li-ion cells in
//! parallel.
//!
//! The crate models a strong/weak cell pair under constant-current
//! discharge, extracts the height and skewness of the pair's mid-to-high
//! SOC dV/dQ peak, and maps those features back to the product of the
//! capacity ratio `C2/C1` and resistance ratio `R2/R1`.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cell;
pub mod error;
pub mod features;
pub mod fit;
pub mod identify;
pub mod io;
pub mod moments;
pub mod pair;
pub mod savgol;
pub mod signal;
pub mod sim;
pub mod sweep;

pub use cell::{docv_dz, ocv, u_neg, u_pos, CellParams, Soc};
pub use error::{Error, Result, Stage};
pub use features::{extract_features, skewness_pipeline, FeatureConfig, PeakFeatures, SkewnessResult};
pub use fit::{fit_positive_surrogate, FitHints, FitOptions, SurrogateFit};
pub use identify::{identify_from_values, identify_product, IdentificationResult, IdentifyConfig};
pub use pair::{current_split, make_pair, terminal_voltage, PairParams};
pub use signal::{downselect_window, dvdq_curve, peak_height, resample_uniform_q, CurveSource, DvDqCurve, SmoothingConfig};
pub use sim::{simulate_cc_discharge, single_cell_reference, SimConfig, SimTrace, Termination};
pub use sweep::{default_alpha_grid, default_beta_grid, product_curve, run_sweep, FeatureMap, ProductCurve, ScenarioConfig};
