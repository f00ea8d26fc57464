//! Relaxation curves, threshold hitting times, ensemble sweeps and their
//! statistics.

mod curve;
mod stats;
mod sweep;

pub use curve::{hitting_time, hitting_time_bisect, interpolate_crossing, HitTime, RelaxationCurve, TimeGrid, LOG_FLOOR};
pub use stats::{fit_linear, mean_std, quantile, quantile_sorted, standard_error, HitSummary, LinearFit};
pub use sweep::{
    barycenter_curve, crossing_report, ensemble_sweep, hitting_times_lazy, population_sweep, relaxation_curve,
    worst_case_scan, Candidates, CrossingReport, EnsembleSweep, MixingSampleSet, PopulationSweep, PopulationSweepOptions,
    SweepOptions,
    WorstCase, TRANSVERSE_MIN_SLOPE,
};

use thiserror::Error;

use crate::models::ModelError;
use crate::states::StateError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixingError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("threshold must lie in (0, 2), got {0}")]
    InvalidEpsilon(f64),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("model acts on dimension {model} but the initial state has dimension {state}")]
    StateMismatch { model: usize, state: usize },
    #[error("curve never reaches threshold {0} on its grid")]
    NoCrossing(f64),
    #[error("no candidate states given")]
    NoCandidates,
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    State(#[from] StateError),
}

impl From<crate::linalg::LinalgError> for MixingError {
    fn from(e: crate::linalg::LinalgError) -> Self {
        MixingError::Model(ModelError::Linalg(e))
    }
}

pub type Result<T> = std::result::Result<T, MixingError>;
