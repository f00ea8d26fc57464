use std::sync::OnceLock;

use super::local::excited_population;
use super::{check_positive, check_square, check_time, davies_rates, ModelError, QuantumChannel, Result, SlowMode};
use crate::linalg::{hermitian_eig, kron, matrix_exp, CMatrix, C64, ONE};
use crate::states::DensityMatrix;

/// Largest Hilbert-space dimension for which the `d² x d²` superoperator is built.
pub const MAX_DENSE_DIM: usize = 32;

/// A dissipator term `rate · (L ρ L^† − ½{L^†L, ρ})`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperator {
    pub rate: f64,
    pub op: CMatrix,
}

/// Purely dissipative Lindbladian assembled as a dense superoperator on
/// row-major `vec(ρ)`, evolved by matrix exponential.
#[derive(Debug, Clone)]
pub struct DenseLindblad {
    d: usize,
    jumps: Vec<JumpOperator>,
    superop: CMatrix,
    sigma: OnceLock<DensityMatrix>,
}

impl PartialEq for DenseLindblad {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.jumps == other.jumps
    }
}

impl DenseLindblad {
    pub fn new(d: usize, jumps: Vec<JumpOperator>) -> Result<Self> {
        if d == 0 || d > MAX_DENSE_DIM {
            return Err(ModelError::InvalidParameter(format!(
                "dense oracle supports 1 <= d <= {MAX_DENSE_DIM}, got {d}"
            )));
        }
        let id = CMatrix::identity(d);
        let mut superop = CMatrix::zeros(d * d, d * d);
        for j in &jumps {
            if !(j.rate >= 0.0) || !j.rate.is_finite() {
                return Err(ModelError::InvalidParameter(format!("jump rate must be nonnegative, got {}", j.rate)));
            }
            check_square(&j.op, d)?;
            let ldl = j.op.adjoint().matmul(&j.op);
            let r = C64::new(j.rate, 0.0);
            superop.axpy(r, &kron(&j.op, &j.op.conj()));
            superop.axpy(r * -0.5, &kron(&ldl, &id));
            superop.axpy(r * -0.5, &kron(&id, &ldl.transpose()));
        }
        Ok(Self { d, jumps, superop, sigma: OnceLock::new() })
    }

    pub fn jumps(&self) -> &[JumpOperator] {
        &self.jumps
    }

    pub fn superoperator(&self) -> &CMatrix {
        &self.superop
    }

    /// Thermal qubits with lowering rate `γ_down` and raising rate `γ_up`.
    pub fn davies(n: usize, beta: f64, omega: f64) -> Result<Self> {
        let (up, down) = davies_rates(beta, omega);
        let d = qubit_dim(n)?;
        let mut jumps = Vec::new();
        for site in 0..n {
            jumps.push(JumpOperator { rate: down, op: embed(&ket_bra(2, 0, 1), site, n) });
            jumps.push(JumpOperator { rate: up, op: embed(&ket_bra(2, 1, 0), site, n) });
        }
        Self::new(d, jumps)
    }

    pub fn pauli_boundary(l: usize, delta: f64, gamma: f64) -> Result<Self> {
        check_positive("delta", delta)?;
        check_positive("gamma", gamma)?;
        let d = qubit_dim(l)?;
        let x = CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let z = CMatrix::from_diag(&[1.0, -1.0]);
        let mut jumps = vec![
            JumpOperator { rate: delta / 2.0, op: embed(&x, 0, l) },
            JumpOperator { rate: gamma / 2.0, op: embed(&z, 0, l) },
        ];
        for site in 1..l {
            jumps.push(JumpOperator { rate: gamma / 2.0, op: embed(&x, site, l) });
            jumps.push(JumpOperator { rate: gamma / 2.0, op: embed(&z, site, l) });
        }
        Self::new(d, jumps)
    }

    /// Classical jumps `|j><i|` at the protected-sector rates plus unit-rate
    /// dephasing by the level projectors.
    pub fn protected(d: usize, eta: f64) -> Result<Self> {
        if d < 3 {
            return Err(ModelError::InvalidParameter(format!("protected sector needs d >= 3, got {d}")));
        }
        check_positive("eta", eta)?;
        let leak = eta / (d as f64 - 1.0);
        let bulk = 1.0 / (d as f64 - 2.0);
        let mut jumps = Vec::new();
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    continue;
                }
                let rate = if i == 0 || j == 0 { leak } else { bulk };
                jumps.push(JumpOperator { rate, op: ket_bra(d, j, i) });
            }
            jumps.push(JumpOperator { rate: 1.0, op: ket_bra(d, i, i) });
        }
        Self::new(d, jumps)
    }

    /// Depolarizing jumps `√(η/D)|k><l| ⊗ I` and reset jumps
    /// `I ⊗ √π_k |e_k><l|` in the eigenbasis of `π`.
    pub fn logical_product(d_log: usize, n_syn: usize, eta: f64, pi: &DensityMatrix) -> Result<Self> {
        check_positive("eta", eta)?;
        if pi.dim() != n_syn {
            return Err(ModelError::InvalidParameter(format!("reset state has dimension {}, expected {n_syn}", pi.dim())));
        }
        let id_log = CMatrix::identity(d_log);
        let id_syn = CMatrix::identity(n_syn);
        let mut jumps = Vec::new();
        for k in 0..d_log {
            for l in 0..d_log {
                jumps.push(JumpOperator { rate: eta / d_log as f64, op: kron(&ket_bra(d_log, k, l), &id_syn) });
            }
        }
        let eig = hermitian_eig(pi.matrix())?;
        for (k, &w) in eig.eigenvalues.iter().enumerate() {
            let ek = eig.eigenvector(k);
            for l in 0..n_syn {
                let op = CMatrix::from_fn(n_syn, n_syn, |r, c| if c == l { ek[r] } else { C64::new(0.0, 0.0) });
                jumps.push(JumpOperator { rate: w.max(0.0), op: kron(&id_log, &op) });
            }
        }
        Self::new(d_log * n_syn, jumps)
    }

    pub fn logical_micro(l: usize, beta: f64, gamma: f64, c: f64) -> Result<Self> {
        check_positive("gamma", gamma)?;
        let n = l + 1;
        let d = qubit_dim(n)?;
        let eta = (-c * l as f64).exp();
        let p = excited_population(beta);
        let tau = [1.0 - p, p];
        let mut jumps = Vec::new();
        for k in 0..2 {
            for m in 0..2 {
                jumps.push(JumpOperator { rate: eta / 2.0, op: embed(&ket_bra(2, k, m), 0, n) });
            }
        }
        for site in 1..n {
            for (k, &tk) in tau.iter().enumerate() {
                for m in 0..2 {
                    jumps.push(JumpOperator { rate: gamma * tk, op: embed(&ket_bra(2, k, m), site, n) });
                }
            }
        }
        Self::new(d, jumps)
    }

    fn apply(&self, s: &CMatrix, x: &CMatrix, t: f64) -> Result<CMatrix> {
        check_time(t)?;
        check_square(x, self.d)?;
        let e = matrix_exp(s, t)?;
        let v = e.matvec(x.as_slice());
        Ok(CMatrix::from_vec(self.d, self.d, v)?)
    }
}

fn qubit_dim(n: usize) -> Result<usize> {
    if n == 0 || (1usize << n.min(63)) > MAX_DENSE_DIM {
        return Err(ModelError::InvalidParameter(format!(
            "dense oracle supports at most {} qubits, got {n}",
            MAX_DENSE_DIM.trailing_zeros()
        )));
    }
    Ok(1 << n)
}

/// `|k><l|` on `C^d`.
fn ket_bra(d: usize, k: usize, l: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    m[(k, l)] = ONE;
    m
}

/// `I ⊗ … ⊗ op (at site) ⊗ … ⊗ I` on `n` qubits, site 0 most significant.
fn embed(op: &CMatrix, site: usize, n: usize) -> CMatrix {
    let left = CMatrix::identity(1 << site);
    let right = CMatrix::identity(1 << (n - 1 - site));
    kron(&kron(&left, op), &right)
}

impl QuantumChannel for DenseLindblad {
    fn family(&self) -> &'static str {
        "dense_generic"
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn evolve(&self, x: &CMatrix, t: f64) -> Result<CMatrix> {
        self.apply(&self.superop, x, t)
    }

    fn evolve_adjoint(&self, x: &CMatrix, t: f64) -> Result<CMatrix> {
        self.apply(&self.superop.adjoint(), x, t)
    }

    /// Null vector of the superoperator, from the smallest eigenpair of `S^†S`.
    fn stationary(&self) -> Result<DensityMatrix> {
        if let Some(s) = self.sigma.get() {
            return Ok(s.clone());
        }
        let gram = self.superop.adjoint().matmul(&self.superop).hermitian_part();
        let eig = hermitian_eig(&gram)?;
        let v = eig.eigenvector(0);
        let m = CMatrix::from_vec(self.d, self.d, v)?;
        let tr = m.trace();
        let sigma = m.scale(ONE / tr).hermitian_part();
        let sigma = DensityMatrix::new(sigma)?;
        Ok(self.sigma.get_or_init(|| sigma).clone())
    }

    fn slow_mode(&self) -> Result<SlowMode> {
        Err(ModelError::Unsupported { family: "dense_generic", what: "slow mode" })
    }
}
