//! Pure and mixed states, seeded ensemble samplers and the closed-form Haar
//! moments of quadratic forms.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{self, eigvalsh, trace_norm, CMatrix, LinalgError, C64, ZERO};

/// Largest total dimension `d * d_B` the induced sampler accepts.
pub const MAX_INDUCED_DIM: usize = 4096;
const NORM_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = -1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("dimension must be at least {min}, got {got}")]
    DimensionTooSmall { min: usize, got: usize },
    #[error("dimension {got} exceeds the limit {limit}")]
    DimensionTooLarge { got: usize, limit: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("state vector norm {norm} differs from 1")]
    NotNormalized { norm: f64 },
    #[error("density matrix trace {trace} differs from 1")]
    BadTrace { trace: f64 },
    #[error("density matrix has eigenvalue {min_eigenvalue:.3e} below tolerance")]
    NotPositive { min_eigenvalue: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, StateError>;

/// The generator for member `index` of the ensemble seeded by `seed`.
///
/// Each member owns an independent ChaCha stream, so samples do not depend on
/// how members are distributed across workers.
pub fn member_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Standard complex Gaussian with `E|z|^2 = 1` by Box–Muller.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    C64::from_polar((-u1.ln()).sqrt(), TAU * u2)
}

/// Unit vector in `C^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<C64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let norm = linalg::vec_norm(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(StateError::NotNormalized { norm });
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes `amplitudes`; fails on a zero vector.
    pub fn normalized(mut amplitudes: Vec<C64>) -> Result<Self> {
        let norm = linalg::vec_norm(&amplitudes);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(StateError::NotNormalized { norm });
        }
        for a in &mut amplitudes {
            *a /= norm;
        }
        Ok(Self { amplitudes })
    }

    pub fn basis(d: usize, index: usize) -> Result<Self> {
        if index >= d {
            return Err(StateError::DimensionMismatch(format!("basis index {index} out of range for dimension {d}")));
        }
        let mut amplitudes = vec![ZERO; d];
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix::from_matrix_unchecked(CMatrix::projector(&self.amplitudes))
    }

    /// `|ψ_x|^2`
    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn expectation(&self, op: &CMatrix) -> f64 {
        op.expectation(&self.amplitudes).re
    }
}

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        matrix.check_hermitian()?;
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(StateError::BadTrace { trace });
        }
        let min_eigenvalue = eigvalsh(&matrix)?.first().copied().unwrap_or(0.0);
        if min_eigenvalue < PSD_TOL {
            return Err(StateError::NotPositive { min_eigenvalue });
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix known to be a state (channel outputs, projectors).
    pub fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self { matrix: CMatrix::identity(d).scale_real(1.0 / d as f64) }
    }

    pub fn from_diag(probabilities: &[f64]) -> Result<Self> {
        Self::new(CMatrix::from_diag(probabilities))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        Ok(trace_norm(&self.matrix.sub(&other.matrix))?)
    }

    pub fn purity(&self) -> f64 {
        self.matrix.as_slice().iter().map(|z| z.norm_sqr()).sum()
    }
}

/// The family an ensemble draws initial states from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleKind {
    HaarPure { d: usize },
    Induced { d: usize, d_b: usize },
    /// Uniformly random computational-basis state.
    Basis { d: usize },
}

/// An ensemble together with the seed of its member streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub seed: u64,
}

/// One ensemble member: pure members are kept as vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl InitialState {
    pub fn dim(&self) -> usize {
        match self {
            InitialState::Pure(p) => p.dim(),
            InitialState::Mixed(m) => m.dim(),
        }
    }

    pub fn density(&self) -> DensityMatrix {
        match self {
            InitialState::Pure(p) => p.projector(),
            InitialState::Mixed(m) => m.clone(),
        }
    }

    /// Computational-basis populations.
    pub fn populations(&self) -> Vec<f64> {
        match self {
            InitialState::Pure(p) => p.populations(),
            InitialState::Mixed(m) => m.matrix().diag().iter().map(|z| z.re).collect(),
        }
    }
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, seed: u64) -> Result<Self> {
        match kind {
            EnsembleKind::HaarPure { d } | EnsembleKind::Basis { d } => check_dim(d)?,
            EnsembleKind::Induced { d, d_b } => {
                check_dim(d)?;
                if d_b < 1 {
                    return Err(StateError::DimensionTooSmall { min: 1, got: d_b });
                }
                check_induced_size(d, d_b)?;
            }
        }
        Ok(Self { kind, seed })
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            EnsembleKind::HaarPure { d } | EnsembleKind::Basis { d } | EnsembleKind::Induced { d, .. } => d,
        }
    }

    /// Member `index`; a pure function of `(seed, index)`.
    pub fn sample(&self, index: u64) -> Result<InitialState> {
        let mut rng = member_rng(self.seed, index);
        match self.kind {
            EnsembleKind::HaarPure { d } => Ok(InitialState::Pure(sample_haar_pure(d, &mut rng)?)),
            EnsembleKind::Induced { d, d_b } => Ok(InitialState::Mixed(sample_induced(d, d_b, &mut rng)?)),
            EnsembleKind::Basis { d } => Ok(InitialState::Pure(PureState::basis(d, rng.random_range(0..d))?)),
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(StateError::DimensionTooSmall { min: 2, got: d })
    } else {
        Ok(())
    }
}

fn check_induced_size(d: usize, d_b: usize) -> Result<()> {
    match d.checked_mul(d_b) {
        Some(total) if total <= MAX_INDUCED_DIM => Ok(()),
        other => Err(StateError::DimensionTooLarge { got: other.unwrap_or(usize::MAX), limit: MAX_INDUCED_DIM }),
    }
}

/// Haar-random unit vector: a normalized vector of i.i.d. complex Gaussians.
pub fn sample_haar_pure<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<PureState> {
    check_dim(d)?;
    let amplitudes = (0..d).map(|_| complex_gaussian(rng)).collect();
    PureState::normalized(amplitudes)
}

/// Reduced state on `C^d` of a Haar-random pure state on `C^d ⊗ C^{d_B}`.
pub fn sample_induced<R: Rng + ?Sized>(d: usize, d_b: usize, rng: &mut R) -> Result<DensityMatrix> {
    check_dim(d)?;
    if d_b < 1 {
        return Err(StateError::DimensionTooSmall { min: 1, got: d_b });
    }
    check_induced_size(d, d_b)?;
    let joint = PureState::normalized((0..d * d_b).map(|_| complex_gaussian(rng)).collect())?;
    Ok(DensityMatrix::from_matrix_unchecked(reduced_first_factor(joint.amplitudes(), d, d_b)))
}

/// `Tr_B |ψ><ψ|` for `ψ ∈ C^a ⊗ C^b` (first factor most significant).
pub fn reduced_first_factor(psi: &[C64], a: usize, b: usize) -> CMatrix {
    let mut out = CMatrix::zeros(a, a);
    for i in 0..a {
        let row_i = &psi[i * b..(i + 1) * b];
        for j in i..a {
            let row_j = &psi[j * b..(j + 1) * b];
            let s: C64 = row_i.iter().zip(row_j).map(|(x, y)| x * y.conj()).sum();
            out[(i, j)] = s;
            out[(j, i)] = s.conj();
        }
        out[(i, i)] = C64::new(out[(i, i)].re, 0.0);
    }
    out
}

/// `E⟨ψ|O|ψ⟩ = Tr(O)/d` over Haar-random `ψ`.
pub fn haar_moment_mean(o: &CMatrix) -> f64 {
    o.trace().re / o.rows() as f64
}

/// `Var⟨ψ|O|ψ⟩ = (Tr O² − (Tr O)²/d) / (d(d+1))` over Haar-random `ψ`, for Hermitian `O`.
pub fn haar_moment_var(o: &CMatrix) -> f64 {
    let d = o.rows() as f64;
    let tr = o.trace().re;
    let tr_sq = o.fro_norm().powi(2);
    ((tr_sq - tr * tr / d) / (d * (d + 1.0))).max(0.0)
}

/// `‖Tr_syn |ψ><ψ| − I/D‖₁` for `ψ ∈ C^D ⊗ C^N`, logical factor first.
pub fn logical_overlap(psi: &PureState, dims: (usize, usize)) -> Result<f64> {
    let (dl, n) = dims;
    if dl == 0 || n == 0 || dl * n != psi.dim() {
        return Err(StateError::DimensionMismatch(format!(
            "state of dimension {} does not factor as {dl} x {n}",
            psi.dim()
        )));
    }
    let mut rho = reduced_first_factor(psi.amplitudes(), dl, n);
    for i in 0..dl {
        rho[(i, i)] -= 1.0 / dl as f64;
    }
    Ok(trace_norm(&rho)?)
}

/// Purity `Tr ρ_log²` of the logical marginal of `ψ ∈ C^D ⊗ C^N`.
pub fn logical_purity(psi: &PureState, dims: (usize, usize)) -> Result<f64> {
    let (dl, n) = dims;
    if dl * n != psi.dim() {
        return Err(StateError::DimensionMismatch(format!(
            "state of dimension {} does not factor as {dl} x {n}",
            psi.dim()
        )));
    }
    Ok(reduced_first_factor(psi.amplitudes(), dl, n).as_slice().iter().map(|z| z.norm_sqr()).sum())
}

/// Exact Haar mean of `Tr ρ_log²` on `C^D ⊗ C^N`.
pub fn haar_logical_purity(dl: usize, n: usize) -> f64 {
    let (dl, n) = (dl as f64, n as f64);
    (dl + n) / (dl * n + 1.0)
}
