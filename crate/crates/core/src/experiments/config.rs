use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{ExperimentError, Result};
use crate::mixing::TimeGrid;
use crate::models::MAX_QUBITS;

/// The enumerated numerical protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    DaviesConcentration,
    BoundaryFixedEps,
    BoundaryScaledEps,
    SkinBundles,
    SkinGapScaling,
    ProtectedSeparation,
    LogicalBundle,
    LogicalScaling,
    MomentChecks,
    OracleChecks,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        ExperimentKind::DaviesConcentration,
        ExperimentKind::BoundaryFixedEps,
        ExperimentKind::BoundaryScaledEps,
        ExperimentKind::SkinBundles,
        ExperimentKind::SkinGapScaling,
        ExperimentKind::ProtectedSeparation,
        ExperimentKind::LogicalBundle,
        ExperimentKind::LogicalScaling,
        ExperimentKind::MomentChecks,
        ExperimentKind::OracleChecks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::DaviesConcentration => "davies_concentration",
            ExperimentKind::BoundaryFixedEps => "boundary_fixed_eps",
            ExperimentKind::BoundaryScaledEps => "boundary_scaled_eps",
            ExperimentKind::SkinBundles => "skin_bundles",
            ExperimentKind::SkinGapScaling => "skin_gap_scaling",
            ExperimentKind::ProtectedSeparation => "protected_separation",
            ExperimentKind::LogicalBundle => "logical_bundle",
            ExperimentKind::LogicalScaling => "logical_scaling",
            ExperimentKind::MomentChecks => "moment_checks",
            ExperimentKind::OracleChecks => "oracle_checks",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::DaviesConcentration => "Haar bundles and mixing-time spread for the local Davies semigroup",
            ExperimentKind::BoundaryFixedEps => "boundary Pauli chain at a fixed threshold: horizontal concentration",
            ExperimentKind::BoundaryScaledEps => "boundary Pauli chain at eps_L = eps0 q^(-L/2): worst-minus-typical gap vs Beta law",
            ExperimentKind::SkinBundles => "biased hopping chain: population bundles at two thresholds",
            ExperimentKind::SkinGapScaling => "biased hopping chain: worst-minus-typical gap against log L",
            ExperimentKind::ProtectedSeparation => "protected level: typical bound log(8/eps) against the leakage time",
            ExperimentKind::LogicalBundle => "local-qubit logical sector: bundle with reference, slow and fast benchmarks",
            ExperimentKind::LogicalScaling => "local-qubit logical sector: worst and typical crossings against L",
            ExperimentKind::MomentChecks => "Monte Carlo checks of Haar, induced and logical moment identities",
            ExperimentKind::OracleChecks => "factorized channels against dense superoperator exponentials",
        }
    }

    pub fn default_config(self) -> ExperimentConfig {
        match self {
            ExperimentKind::DaviesConcentration => ExperimentConfig::DaviesConcentration(DaviesConcentration::default()),
            ExperimentKind::BoundaryFixedEps => ExperimentConfig::BoundaryFixedEps(BoundaryFixedEps::default()),
            ExperimentKind::BoundaryScaledEps => ExperimentConfig::BoundaryScaledEps(BoundaryScaledEps::default()),
            ExperimentKind::SkinBundles => ExperimentConfig::SkinBundles(SkinBundles::default()),
            ExperimentKind::SkinGapScaling => ExperimentConfig::SkinGapScaling(SkinGapScaling::default()),
            ExperimentKind::ProtectedSeparation => ExperimentConfig::ProtectedSeparation(ProtectedSeparation::default()),
            ExperimentKind::LogicalBundle => ExperimentConfig::LogicalBundle(LogicalBundle::default()),
            ExperimentKind::LogicalScaling => ExperimentConfig::LogicalScaling(LogicalScaling::default()),
            ExperimentKind::MomentChecks => ExperimentConfig::MomentChecks(MomentChecks::default()),
            ExperimentKind::OracleChecks => ExperimentConfig::OracleChecks(OracleChecks::default()),
        }
    }
}

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub seed: u64,
    /// 0 means one worker per available core.
    pub workers: usize,
    pub n_samples: usize,
}

impl RunParams {
    fn new(n_samples: usize) -> Self {
        Self { seed: DEFAULT_SEED, workers: 0, n_samples }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub t_min: f64,
    pub t_max: f64,
    pub n_points: usize,
    pub log_spaced: bool,
}

impl GridParams {
    fn log(t_min: f64, t_max: f64, n_points: usize) -> Self {
        Self { t_min, t_max, n_points, log_spaced: true }
    }

    pub fn build(&self) -> Result<TimeGrid> {
        let grid = if self.log_spaced {
            TimeGrid::log_spaced(self.t_min, self.t_max, self.n_points)
        } else {
            TimeGrid::linear(self.t_min, self.t_max, self.n_points)
        };
        grid.map_err(|e| ExperimentError::config("grid", e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        if self.n_points < 8 {
            return Err(ExperimentError::config("n_points", format!("must be at least 8, got {}", self.n_points)));
        }
        if self.log_spaced && !(self.t_min > 0.0) {
            return Err(ExperimentError::config("t_min", format!("must be positive for a log grid, got {}", self.t_min)));
        }
        self.build().map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsilonRuleKind {
    Fixed,
    /// `ε_L = ε₀ q^{−L/2}`
    Scaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRule {
    pub epsilon_rule: EpsilonRuleKind,
    pub epsilon: f64,
    pub epsilon0: f64,
    pub epsilon_q: f64,
}

impl EpsilonRule {
    fn fixed(epsilon: f64) -> Self {
        Self { epsilon_rule: EpsilonRuleKind::Fixed, epsilon, epsilon0: 0.1, epsilon_q: 2.0 }
    }

    fn scaled(epsilon0: f64, q: f64) -> Self {
        Self { epsilon_rule: EpsilonRuleKind::Scaled, epsilon: 0.55, epsilon0, epsilon_q: q }
    }

    pub fn at(&self, l: usize) -> f64 {
        match self.epsilon_rule {
            EpsilonRuleKind::Fixed => self.epsilon,
            EpsilonRuleKind::Scaled => self.epsilon0 * self.epsilon_q.powf(-(l as f64) / 2.0),
        }
    }

    fn validate(&self, sizes: &[usize]) -> Result<()> {
        if !(self.epsilon_q > 0.0) {
            return Err(ExperimentError::config("epsilon_q", format!("must be positive, got {}", self.epsilon_q)));
        }
        for &l in sizes {
            check_eps("epsilon", self.at(l))?;
        }
        Ok(())
    }
}

fn check_eps(path: &str, eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 2.0 {
        Ok(())
    } else {
        Err(ExperimentError::config(path, format!("threshold must lie in (0, 2), got {eps}")))
    }
}

fn check_pos(path: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ExperimentError::config(path, format!("must be positive and finite, got {x}")))
    }
}

fn check_delta(path: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(ExperimentError::config(path, format!("must lie in (0, 1), got {x}")))
    }
}

fn check_sizes(path: &str, sizes: &[usize], min: usize, max: usize) -> Result<()> {
    if sizes.is_empty() {
        return Err(ExperimentError::config(path, "must not be empty".into()));
    }
    if let Some(bad) = sizes.iter().find(|&&s| s < min || s > max) {
        return Err(ExperimentError::config(path, format!("entries must lie in [{min}, {max}], got {bad}")));
    }
    Ok(())
}

fn check_samples(run: &RunParams) -> Result<()> {
    if run.n_samples < 2 {
        return Err(ExperimentError::config("n_samples", format!("must be at least 2, got {}", run.n_samples)));
    }
    if run.seed > i64::MAX as u64 {
        return Err(ExperimentError::config("seed", format!("must be below 2^63, got {}", run.seed)));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaviesConcentration {
    #[serde(flatten)]
    pub run: RunParams,
    #[serde(flatten)]
    pub grid: GridParams,
    /// Qubit counts `n`; `d = 2^n`.
    pub sizes: Vec<usize>,
    pub beta: f64,
    pub omega: f64,
    pub epsilon: f64,
    /// Samples with full curves, which feed the mean and barycenter
    /// comparison; the rest get bisection hitting times only.
    pub curve_samples: usize,
}

impl Default for DaviesConcentration {
    fn default() -> Self {
        Self {
            run: RunParams::new(48),
            grid: GridParams::log(1e-3, 6.0, 72),
            sizes: vec![3, 4, 5, 6],
            beta: 1.2,
            omega: 1.0,
            epsilon: 0.70,
            curve_samples: 48,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFixedEps {
    #[serde(flatten)]
    pub run: RunParams,
    #[serde(flatten)]
    pub grid: GridParams,
    pub sizes: Vec<usize>,
    pub delta: f64,
    pub gamma: f64,
    #[serde(flatten)]
    pub threshold: EpsilonRule,
    pub curve_samples: usize,
}

impl Default for BoundaryFixedEps {
    fn default() -> Self {
        Self {
            run: RunParams::new(200),
            grid: GridParams::log(1e-3, 20.0, 160),
            sizes: vec![3, 4, 5, 6],
            delta: 0.25,
            gamma: 4.0,
            threshold: EpsilonRule::fixed(0.55),
            curve_samples: 48,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryScaledEps {
    #[serde(flatten)]
    pub run: RunParams,
    #[serde(flatten)]
    pub grid: GridParams,
    pub sizes: Vec<usize>,
    pub delta: f64,
    pub gamma: f64,
    #[serde(flatten)]
    pub threshold: EpsilonRule,
    /// Quantile level of the typical time.
    pub level: f64,
    pub curve_samples: usize,
}

impl Default for BoundaryScaledEps {
    fn default() -> Self {
        Self {
            run: RunParams::new(10_000),
            grid: GridParams::log(1e-2, 60.0, 160),
            sizes: vec![3, 4, 5, 6],
            delta: 0.25,
            gamma: 4.0,
            threshold: EpsilonRule::scaled(0.10, 2.0),
            level: 0.9,
            curve_samples: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkinParams {
    pub gamma_r: f64,
    pub gamma_l: f64,
    pub lambda: f64,
    pub epsilons: Vec<f64>,
    /// Step of the linear time grid.
    pub dt: f64,
    pub t_max: f64,
}

impl Default for SkinParams {
    fn default() -> Self {
        Self { gamma_r: 1.6, gamma_l: 0.4, lambda: 1.0, epsilons: vec![0.35, 0.01], dt: 0.1, t_max: 2000.0 }
    }
}

impl SkinParams {
    fn validate(&self) -> Result<()> {
        check_pos("gamma_r", self.gamma_r)?;
        check_pos("gamma_l", self.gamma_l)?;
        check_pos("lambda", self.lambda)?;
        check_pos("dt", self.dt)?;
        if self.epsilons.is_empty() {
            return Err(ExperimentError::config("epsilons", "must not be empty".into()));
        }
        for &e in &self.epsilons {
            check_eps("epsilons", e)?;
        }
        if self.t_max / self.dt < 8.0 {
            return Err(ExperimentError::config("t_max", "grid must have at least 8 points (t_max >= 8 dt)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkinBundles {
    #[serde(flatten)]
    pub run: RunParams,
    #[serde(flatten)]
    pub chain: SkinParams,
    pub sizes: Vec<usize>,
    pub curve_samples: usize,
}

impl Default for SkinBundles {
    fn default() -> Self {
        Self { run: RunParams::new(200), chain: SkinParams::default(), sizes: vec![16, 24, 32, 64, 128, 192], curve_samples: 24 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkinGapScaling {
    #[serde(flatten)]
    pub run: RunParams,
    #[serde(flatten)]
    pub chain: SkinParams,
    pub sizes: Vec<usize>,
    pub level: f64,
}

impl Default for SkinGapScaling {
    fn default() -> Self {
        Self {
            run: RunParams::new(500),
            chain: SkinParams { epsilons: vec![0.01, 0.35], ..SkinParams::default() },
            sizes: vec![16, 24, 32, 48, 64, 96, 128, 192],
            level: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtectedSeparation {
    #[serde(flatten)]
    pub run: RunParams,
    #[serde(flatten)]
    pub grid: GridParams,
    pub d: usize,
    /// `η = e^{log_eta}`
    pub log_eta: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub curve_samples: usize,
}

impl Default for ProtectedSeparation {
    fn default() -> Self {
        Self {
            run: RunParams::new(64),
            grid: GridParams::log(1e-2, 2000.0, 120),
            d: 256,
            log_eta: -5.0,
            epsilon: 0.2,
            delta: 0.1,
            curve_samples: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalParams {
    pub beta: f64,
    pub gamma: f64,
    /// Leakage exponent, `η_L = e^{−cL}`.
    pub c: f64,
    pub epsilon: f64,
    pub delta: f64,
}

impl Default for LogicalParams {
    fn default() -> Self {
        Self { beta: 1.8, gamma: 2.0, c: 0.75, epsilon: 0.35, delta: 0.1 }
    }
}

impl LogicalParams {
    fn validate(&self) -> Result<()> {
        check_pos("gamma", self.gamma)?;
        if !(self.c >= 0.0) || !self.beta.is_finite() {
            return Err(ExperimentError::config("c", format!("need c >= 0 and finite beta, got c={}, beta={}", self.c, self.beta)));
        }
        check_eps("epsilon", self.epsilon)?;
        check_delta("delta", self.delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalBundle {
    #[serde(flatten)]
    pub run: RunParams,
    #[serde(flatten)]
    pub grid: GridParams,
    #[serde(flatten)]
    pub model: LogicalParams,
    /// Syndrome qubits; `d = 2^{l+1}`.
    pub l: usize,
    pub curve_samples: usize,
}

impl Default for LogicalBundle {
    fn default() -> Self {
        Self {
            run: RunParams::new(64),
            grid: GridParams::log(1e-3, 400.0, 96),
            model: LogicalParams::default(),
            l: 6,
            curve_samples: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalScaling {
    #[serde(flatten)]
    pub run: RunParams,
    #[serde(flatten)]
    pub grid: GridParams,
    #[serde(flatten)]
    pub model: LogicalParams,
    pub sizes: Vec<usize>,
    pub curve_samples: usize,
    /// Extra Haar samples per size for the logical purity and overlap moments.
    pub moment_samples: usize,
}

impl Default for LogicalScaling {
    fn default() -> Self {
        Self {
            run: RunParams::new(36),
            grid: GridParams::log(1e-3, 400.0, 88),
            model: LogicalParams::default(),
            sizes: vec![3, 4, 5, 6],
            curve_samples: 8,
            moment_samples: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentChecks {
    #[serde(flatten)]
    pub run: RunParams,
    /// Dimensions for the Haar mean and variance identities.
    pub haar_dims: Vec<usize>,
    pub induced_d: usize,
    pub induced_db: Vec<usize>,
    pub logical_d: usize,
    pub logical_n: Vec<usize>,
    pub rank_two_pairs: usize,
    pub rank_two_dim: usize,
    /// Monte Carlo checks pass within this many standard errors.
    pub z_max: f64,
}

impl Default for MomentChecks {
    fn default() -> Self {
        Self {
            run: RunParams::new(20_000),
            haar_dims: vec![2, 8, 32],
            induced_d: 4,
            induced_db: vec![1, 4, 16],
            logical_d: 2,
            logical_n: vec![4, 16, 64],
            rank_two_pairs: 1000,
            rank_two_dim: 16,
            z_max: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleChecks {
    /// `n_samples` random `(state, s, t)` triples per model.
    #[serde(flatten)]
    pub run: RunParams,
    pub t_max: f64,
    pub tolerance: f64,
}

impl Default for OracleChecks {
    fn default() -> Self {
        Self { run: RunParams::new(100), t_max: 3.0, tolerance: 1e-8 }
    }
}

/// One experiment section.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentConfig {
    DaviesConcentration(DaviesConcentration),
    BoundaryFixedEps(BoundaryFixedEps),
    BoundaryScaledEps(BoundaryScaledEps),
    SkinBundles(SkinBundles),
    SkinGapScaling(SkinGapScaling),
    ProtectedSeparation(ProtectedSeparation),
    LogicalBundle(LogicalBundle),
    LogicalScaling(LogicalScaling),
    MomentChecks(MomentChecks),
    OracleChecks(OracleChecks),
}

macro_rules! each_config {
    ($self:expr, $c:ident => $body:expr) => {
        match $self {
            ExperimentConfig::DaviesConcentration($c) => $body,
            ExperimentConfig::BoundaryFixedEps($c) => $body,
            ExperimentConfig::BoundaryScaledEps($c) => $body,
            ExperimentConfig::SkinBundles($c) => $body,
            ExperimentConfig::SkinGapScaling($c) => $body,
            ExperimentConfig::ProtectedSeparation($c) => $body,
            ExperimentConfig::LogicalBundle($c) => $body,
            ExperimentConfig::LogicalScaling($c) => $body,
            ExperimentConfig::MomentChecks($c) => $body,
            ExperimentConfig::OracleChecks($c) => $body,
        }
    };
}

impl ExperimentConfig {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            ExperimentConfig::DaviesConcentration(_) => ExperimentKind::DaviesConcentration,
            ExperimentConfig::BoundaryFixedEps(_) => ExperimentKind::BoundaryFixedEps,
            ExperimentConfig::BoundaryScaledEps(_) => ExperimentKind::BoundaryScaledEps,
            ExperimentConfig::SkinBundles(_) => ExperimentKind::SkinBundles,
            ExperimentConfig::SkinGapScaling(_) => ExperimentKind::SkinGapScaling,
            ExperimentConfig::ProtectedSeparation(_) => ExperimentKind::ProtectedSeparation,
            ExperimentConfig::LogicalBundle(_) => ExperimentKind::LogicalBundle,
            ExperimentConfig::LogicalScaling(_) => ExperimentKind::LogicalScaling,
            ExperimentConfig::MomentChecks(_) => ExperimentKind::MomentChecks,
            ExperimentConfig::OracleChecks(_) => ExperimentKind::OracleChecks,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind().name()
    }

    pub fn run_params(&self) -> &RunParams {
        each_config!(self, c => &c.run)
    }

    pub fn run_params_mut(&mut self) -> &mut RunParams {
        each_config!(self, c => &mut c.run)
    }

    pub fn to_table(&self) -> Result<toml::Table> {
        each_config!(self, c => toml::Table::try_from(c).map_err(|e| ExperimentError::Emit(e.to_string())))
    }

    fn from_table(kind: ExperimentKind, table: toml::Table) -> Result<Self> {
        fn de<T: DeserializeOwned>(kind: ExperimentKind, t: toml::Table) -> Result<T> {
            toml::Value::Table(t).try_into().map_err(|e: toml::de::Error| ExperimentError::config(kind.name(), e.message().to_string()))
        }
        Ok(match kind {
            ExperimentKind::DaviesConcentration => ExperimentConfig::DaviesConcentration(de(kind, table)?),
            ExperimentKind::BoundaryFixedEps => ExperimentConfig::BoundaryFixedEps(de(kind, table)?),
            ExperimentKind::BoundaryScaledEps => ExperimentConfig::BoundaryScaledEps(de(kind, table)?),
            ExperimentKind::SkinBundles => ExperimentConfig::SkinBundles(de(kind, table)?),
            ExperimentKind::SkinGapScaling => ExperimentConfig::SkinGapScaling(de(kind, table)?),
            ExperimentKind::ProtectedSeparation => ExperimentConfig::ProtectedSeparation(de(kind, table)?),
            ExperimentKind::LogicalBundle => ExperimentConfig::LogicalBundle(de(kind, table)?),
            ExperimentKind::LogicalScaling => ExperimentConfig::LogicalScaling(de(kind, table)?),
            ExperimentKind::MomentChecks => ExperimentConfig::MomentChecks(de(kind, table)?),
            ExperimentKind::OracleChecks => ExperimentConfig::OracleChecks(de(kind, table)?),
        })
    }

    /// Field-level checks; errors carry `section.field` paths.
    pub fn validate(&self) -> Result<()> {
        let r = self.validate_inner();
        r.map_err(|e| e.within(self.name()))
    }

    fn validate_inner(&self) -> Result<()> {
        check_samples(self.run_params())?;
        match self {
            ExperimentConfig::DaviesConcentration(c) => {
                c.grid.validate()?;
                check_sizes("sizes", &c.sizes, 1, MAX_QUBITS)?;
                check_pos("omega", c.omega)?;
                if !c.beta.is_finite() {
                    return Err(ExperimentError::config("beta", "must be finite".into()));
                }
                if c.curve_samples < 2 {
                    return Err(ExperimentError::config("curve_samples", format!("must be at least 2, got {}", c.curve_samples)));
                }
                check_eps("epsilon", c.epsilon)
            }
            ExperimentConfig::BoundaryFixedEps(BoundaryFixedEps { grid, sizes, delta, gamma, threshold, .. })
            | ExperimentConfig::BoundaryScaledEps(BoundaryScaledEps { grid, sizes, delta, gamma, threshold, .. }) => {
                grid.validate()?;
                check_sizes("sizes", sizes, 1, MAX_QUBITS)?;
                check_pos("delta", *delta)?;
                check_pos("gamma", *gamma)?;
                if delta >= gamma {
                    return Err(ExperimentError::config("delta", format!("must be below gamma = {gamma}, got {delta}")));
                }
                threshold.validate(sizes)?;
                if let ExperimentConfig::BoundaryScaledEps(c) = self {
                    check_delta("level", c.level)?;
                }
                Ok(())
            }
            ExperimentConfig::SkinBundles(c) => {
                c.chain.validate()?;
                check_sizes("sizes", &c.sizes, 2, 4096)
            }
            ExperimentConfig::SkinGapScaling(c) => {
                c.chain.validate()?;
                check_sizes("sizes", &c.sizes, 2, 4096)?;
                check_delta("level", c.level)
            }
            ExperimentConfig::ProtectedSeparation(c) => {
                c.grid.validate()?;
                check_sizes("d", &[c.d], 3, 1024)?;
                if !(c.log_eta <= 0.0) {
                    return Err(ExperimentError::config("log_eta", format!("must be <= 0, got {}", c.log_eta)));
                }
                check_eps("epsilon", c.epsilon)?;
                check_delta("delta", c.delta)
            }
            ExperimentConfig::LogicalBundle(c) => {
                c.grid.validate()?;
                c.model.validate()?;
                check_sizes("l", &[c.l], 1, MAX_QUBITS - 1)
            }
            ExperimentConfig::LogicalScaling(c) => {
                c.grid.validate()?;
                c.model.validate()?;
                check_sizes("sizes", &c.sizes, 1, MAX_QUBITS - 1)
            }
            ExperimentConfig::MomentChecks(c) => {
                check_sizes("haar_dims", &c.haar_dims, 2, 1024)?;
                check_sizes("induced_d", &[c.induced_d], 2, 256)?;
                check_sizes("induced_db", &c.induced_db, 1, 1024)?;
                check_sizes("logical_d", &[c.logical_d], 2, 64)?;
                check_sizes("logical_n", &c.logical_n, 1, 1024)?;
                check_sizes("rank_two_dim", &[c.rank_two_dim], 2, 512)?;
                check_pos("z_max", c.z_max)
            }
            ExperimentConfig::OracleChecks(c) => {
                check_pos("t_max", c.t_max)?;
                check_pos("tolerance", c.tolerance)
            }
        }
    }
}

/// Parses one or more experiment sections, fills defaults and validates.
pub fn parse_configs(text: &str) -> Result<Vec<ExperimentConfig>> {
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| ExperimentError::Parse(e.to_string()))?;
    if doc.is_empty() {
        return Err(ExperimentError::Parse("no experiment sections".into()));
    }
    let mut out = Vec::with_capacity(doc.len());
    for (section, value) in doc {
        let kind = ExperimentKind::from_name(&section).ok_or_else(|| {
            let known: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
            ExperimentError::config(&section, format!("unknown experiment; expected one of {}", known.join(", ")))
        })?;
        let toml::Value::Table(user) = value else {
            return Err(ExperimentError::config(&section, "must be a table of key = value pairs".into()));
        };
        let mut merged = kind.default_config().to_table()?;
        let unknown: Vec<String> =
            user.keys().filter(|k| !merged.contains_key(*k)).map(|k| format!("{section}.{k}")).collect();
        if !unknown.is_empty() {
            return Err(ExperimentError::UnknownKeys(unknown));
        }
        merged.extend(user);
        let config = ExperimentConfig::from_table(kind, merged)?;
        config.validate()?;
        out.push(config);
    }
    Ok(out)
}

/// Parses a document holding exactly one experiment section.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut all = parse_configs(text)?;
    if all.len() != 1 {
        return Err(ExperimentError::Parse(format!("expected exactly one experiment section, found {}", all.len())));
    }
    Ok(all.remove(0))
}

/// Fully populated text form; `parse_configs(emit_configs(c)) == c`.
pub fn emit_configs(configs: &[ExperimentConfig]) -> Result<String> {
    let mut doc = toml::Table::new();
    for c in configs {
        if doc.insert(c.name().to_string(), toml::Value::Table(c.to_table()?)).is_some() {
            return Err(ExperimentError::Emit(format!("experiment {} appears twice", c.name())));
        }
    }
    toml::to_string(&doc).map_err(|e| ExperimentError::Emit(e.to_string()))
}

pub fn emit_config(config: &ExperimentConfig) -> Result<String> {
    emit_configs(std::slice::from_ref(config))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config("[davies_concentration]\n").unwrap();
        assert_eq!(c, ExperimentKind::DaviesConcentration.default_config());
        let c = parse_config("[davies_concentration]\nn_samples = 12\nsizes = [3]\n").unwrap();
        let ExperimentConfig::DaviesConcentration(d) = c else { panic!() };
        assert_eq!(d.run.n_samples, 12);
        assert_eq!(d.sizes, vec![3]);
        assert_eq!(d.epsilon, 0.70);
        assert_eq!(d.grid.n_points, 72);
    }

    #[test]
    fn every_default_round_trips() {
        let all: Vec<ExperimentConfig> = ExperimentKind::ALL.iter().map(|k| k.default_config()).collect();
        let text = emit_configs(&all).unwrap();
        let mut back = parse_configs(&text).unwrap();
        back.sort_by_key(|c| c.name());
        let mut want = all.clone();
        want.sort_by_key(|c| c.name());
        assert_eq!(back, want);
        for c in &all {
            assert_eq!(&parse_config(&emit_config(c).unwrap()).unwrap(), c);
        }
    }

    #[test]
    fn unknown_keys_are_listed() {
        let err = parse_config("[skin_bundles]\nfoo = 1\nbar = 2\ndt = 0.2\n").unwrap_err();
        match err {
            ExperimentError::UnknownKeys(k) => assert_eq!(k, vec!["skin_bundles.bar", "skin_bundles.foo"]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("[nonsense]\n"), Err(ExperimentError::Config { .. })));
    }

    #[test]
    fn duplicate_key_is_a_parse_error() {
        let err = parse_config("[oracle_checks]\nt_max = 1.0\nt_max = 2.0\n").unwrap_err();
        assert!(matches!(err, ExperimentError::Parse(_)), "{err:?}");
    }

    #[test]
    fn invalid_values_report_field_paths() {
        let err = parse_config("[davies_concentration]\nn_points = 4\n").unwrap_err();
        assert!(err.to_string().contains("davies_concentration.n_points"), "{err}");
        let err = parse_config("[protected_separation]\nt_min = 0.0\n").unwrap_err();
        assert!(err.to_string().contains("protected_separation.t_min"), "{err}");
        let err = parse_config("[boundary_scaled_eps]\nepsilon_rule = \"sometimes\"\n").unwrap_err();
        assert!(err.to_string().contains("boundary_scaled_eps"), "{err}");
        let err = parse_config("[boundary_fixed_eps]\nepsilon = 2.5\n").unwrap_err();
        assert!(err.to_string().contains("boundary_fixed_eps.epsilon"), "{err}");
    }

    #[test]
    fn epsilon_rules() {
        let r = EpsilonRule::scaled(0.1, 2.0);
        assert!((r.at(4) - 0.025).abs() < 1e-15);
        assert_eq!(EpsilonRule::fixed(0.55).at(9), 0.55);
    }
}
