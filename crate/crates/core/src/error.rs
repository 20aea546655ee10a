use std::fmt;

use thiserror::Error;

/// Pipeline stage an error was raised in, used to label failures surfaced
/// through [`crate::features::extract_features`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Resample,
    Smooth,
    Downselect,
    PeakHeight,
    SurrogateFit,
    Skewness,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Resample => "resample",
            Stage::Smooth => "smooth",
            Stage::Downselect => "downselect",
            Stage::PeakHeight => "peak_height",
            Stage::SurrogateFit => "surrogate_fit",
            Stage::Skewness => "skewness",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("state of charge {0} outside [0, 1]")]
    SocDomain(f64),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("integration left the valid SOC range at t = {t} s (z1 = {z1}, z2 = {z2})")]
    Integration { t: f64, z1: f64, z2: f64 },
    #[error("charge span {span} Ah is shorter than the required {required} Ah")]
    SpanTooShort { span: f64, required: f64 },
    #[error("charge axis is not strictly increasing at sample {0}")]
    NonMonotonicCharge(usize),
    #[error("no samples inside the voltage window [{v_lo}, {v_hi}] V")]
    EmptyWindow { v_lo: f64, v_hi: f64 },
    #[error("curve has no interior local maximum")]
    NoPeak,
    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },
    #[error("degenerate distribution: {0}")]
    Degenerate(String),
    #[error("invalid sweep grid: {0}")]
    Grid(String),
    #[error("feature map has no successful cells")]
    EmptyMap,
    #[error("measured height {height} lies outside the product curve range")]
    NoCandidate { height: f64 },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{stage}: {source}")]
    AtStage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SocDomain(_) => "soc_domain",
            Error::InvalidParams(_) => "invalid_params",
            Error::Config(_) => "config",
            Error::Integration { .. } => "integration",
            Error::SpanTooShort { .. } => "span_too_short",
            Error::NonMonotonicCharge(_) => "non_monotonic_charge",
            Error::EmptyWindow { .. } => "empty_window",
            Error::NoPeak => "no_peak",
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::Degenerate(_) => "degenerate",
            Error::Grid(_) => "grid",
            Error::EmptyMap => "empty_map",
            Error::NoCandidate { .. } => "no_candidate",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::AtStage { source, .. } => source.kind(),
        }
    }

    /// Stage name when the error was raised inside the feature pipeline.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::AtStage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    pub(crate) fn at(stage: Stage) -> impl FnOnce(Error) -> Error {
        move |source| Error::AtStage {
            stage,
            source: Box::new(source),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
