//! Exact finite-time channels for the supported model families, each with its
//! stationary state and (where it is simple) its slowest decaying mode.

mod dense;
mod local;
mod logical;
mod protected;
pub(crate) mod skin;

pub use dense::{DenseLindblad, JumpOperator, MAX_DENSE_DIM};
pub use local::{davies_rates, LocalQubitChannel, QubitGenerator};
pub use logical::LogicalProduct;
pub use protected::ProtectedSector;
pub use skin::{skin_evolve, skin_generator, PopulationState, SkinChain};

use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{trace_norm, CMatrix, LinalgError};
use crate::states::{DensityMatrix, StateError};

/// Largest qubit count the site-local channels accept (`d = 2^n`).
pub const MAX_QUBITS: usize = 11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: model acts on dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("time must be finite and nonnegative, got {0}")]
    InvalidTime(f64),
    #[error("{family}: no simple real dominant mode ({reason})")]
    NoSimpleSlowMode { family: &'static str, reason: String },
    #[error("{family}: {what} is not available for this family")]
    Unsupported { family: &'static str, what: &'static str },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    State(#[from] StateError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Dominant nonstationary eigenpair: `Λ_t(R2) = e^{-γ2 t} R2`,
/// `Λ_t^†(L2) = e^{-γ2 t} L2`, `‖R2‖₁ = 1`, `Tr(L2^† R2) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlowMode {
    pub l2: CMatrix,
    pub r2: CMatrix,
    pub gamma2: f64,
}

impl SlowMode {
    /// `a2 = Tr(L2^† ρ)`
    pub fn overlap(&self, rho: &CMatrix) -> f64 {
        self.l2.hs_inner(rho).re
    }

    /// `a2` for a pure state, `⟨ψ|L2|ψ⟩`.
    pub fn overlap_pure(&self, psi: &[crate::linalg::C64]) -> f64 {
        self.l2.expectation(psi).re
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidTime(t))
    }
}

pub(crate) fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter(format!("{name} must be positive and finite, got {x}")))
    }
}

pub(crate) fn check_square(x: &CMatrix, d: usize) -> Result<()> {
    if x.rows() == d && x.cols() == d {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch { expected: d, got: x.rows() })
    }
}

/// A linear CPTP semigroup on `d x d` matrices with a unique fixed point.
pub trait QuantumChannel: Send + Sync {
    fn family(&self) -> &'static str;

    fn dim(&self) -> usize;

    /// `Λ_t(x)` for any `d x d` matrix `x`.
    fn evolve(&self, x: &CMatrix, t: f64) -> Result<CMatrix>;

    /// The Hilbert–Schmidt adjoint `Λ_t^†(x)`.
    fn evolve_adjoint(&self, x: &CMatrix, t: f64) -> Result<CMatrix>;

    fn stationary(&self) -> Result<DensityMatrix>;

    fn slow_mode(&self) -> Result<SlowMode>;

    /// `‖Λ_t(ρ) − σ‖₁`
    fn distance(&self, rho: &CMatrix, t: f64) -> Result<f64> {
        let sigma = self.stationary()?;
        Ok(trace_norm(&self.evolve(rho, t)?.sub(sigma.matrix()))?)
    }
}

/// A model family with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSpec {
    Davies { n: usize, beta: f64, omega: f64 },
    PauliBoundary { l: usize, delta: f64, gamma: f64 },
    SkinPopulation { l: usize, gamma_r: f64, gamma_l: f64, lambda: f64 },
    ProtectedSector { d: usize, eta: f64 },
    LogicalProduct { d_log: usize, n_syn: usize, eta: f64, pi: DensityMatrix },
    LogicalMicro { l: usize, beta: f64, gamma: f64, c: f64 },
    DenseGeneric(DenseLindblad),
}

/// A built model: quantum channels act on density matrices, the skin chain on
/// population vectors.
#[derive(Clone)]
pub enum Model {
    Quantum(Arc<dyn QuantumChannel>),
    Population(Arc<SkinChain>),
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Model::Quantum(q) => write!(f, "Model::Quantum({}, d={})", q.family(), q.dim()),
            Model::Population(s) => write!(f, "Model::Population(L={})", s.len()),
        }
    }
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Quantum(q) => q.dim(),
            Model::Population(s) => s.len(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Model::Quantum(q) => q.family(),
            Model::Population(_) => "skin_population",
        }
    }

    pub fn slow_mode(&self) -> Result<SlowMode> {
        match self {
            Model::Quantum(q) => q.slow_mode(),
            Model::Population(s) => s.slow_mode(),
        }
    }
}

impl ChannelSpec {
    pub fn family(&self) -> &'static str {
        match self {
            ChannelSpec::Davies { .. } => "davies_chain",
            ChannelSpec::PauliBoundary { .. } => "pauli_boundary",
            ChannelSpec::SkinPopulation { .. } => "skin_population",
            ChannelSpec::ProtectedSector { .. } => "protected_sector",
            ChannelSpec::LogicalProduct { .. } => "logical_product",
            ChannelSpec::LogicalMicro { .. } => "logical_micro",
            ChannelSpec::DenseGeneric(_) => "dense_generic",
        }
    }

    /// Validates the parameters and builds the channel.
    pub fn build(&self) -> Result<Model> {
        Ok(match self {
            ChannelSpec::Davies { n, beta, omega } => {
                Model::Quantum(Arc::new(LocalQubitChannel::davies(*n, *beta, *omega)?))
            }
            ChannelSpec::PauliBoundary { l, delta, gamma } => {
                Model::Quantum(Arc::new(LocalQubitChannel::pauli_boundary(*l, *delta, *gamma)?))
            }
            ChannelSpec::SkinPopulation { l, gamma_r, gamma_l, lambda } => {
                Model::Population(Arc::new(SkinChain::new(*l, *gamma_r, *gamma_l, *lambda)?))
            }
            ChannelSpec::ProtectedSector { d, eta } => Model::Quantum(Arc::new(ProtectedSector::new(*d, *eta)?)),
            ChannelSpec::LogicalProduct { d_log, n_syn, eta, pi } => {
                Model::Quantum(Arc::new(LogicalProduct::new(*d_log, *n_syn, *eta, pi.clone())?))
            }
            ChannelSpec::LogicalMicro { l, beta, gamma, c } => {
                Model::Quantum(Arc::new(LocalQubitChannel::logical_micro(*l, *beta, *gamma, *c)?))
            }
            ChannelSpec::DenseGeneric(dense) => Model::Quantum(Arc::new(dense.clone())),
        })
    }

    /// The same model assembled as a dense Lindbladian, for cross-checks at
    /// small sizes.
    pub fn dense_oracle(&self) -> Result<DenseLindblad> {
        match self {
            ChannelSpec::Davies { n, beta, omega } => DenseLindblad::davies(*n, *beta, *omega),
            ChannelSpec::PauliBoundary { l, delta, gamma } => DenseLindblad::pauli_boundary(*l, *delta, *gamma),
            ChannelSpec::ProtectedSector { d, eta } => DenseLindblad::protected(*d, *eta),
            ChannelSpec::LogicalProduct { d_log, n_syn, eta, pi } => {
                DenseLindblad::logical_product(*d_log, *n_syn, *eta, pi)
            }
            ChannelSpec::LogicalMicro { l, beta, gamma, c } => DenseLindblad::logical_micro(*l, *beta, *gamma, *c),
            ChannelSpec::DenseGeneric(d) => Ok(d.clone()),
            ChannelSpec::SkinPopulation { .. } => {
                Err(ModelError::Unsupported { family: "skin_population", what: "dense Lindblad oracle" })
            }
        }
    }
}
