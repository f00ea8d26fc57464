use super::{check_positive, check_square, check_time, ModelError, QuantumChannel, Result, SlowMode, MAX_QUBITS};
use crate::linalg::{kron, trace_norm, CMatrix, C64};
use crate::states::DensityMatrix;

/// One-qubit generator, exponentiated in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QubitGenerator {
    /// Populations relax to `(p0, 1 - p0)` at `rate`; coherences decay at `coherence_rate`.
    Thermal { p0: f64, rate: f64, coherence_rate: f64 },
    /// Pauli-diagonal: the X, Y, Z coefficients decay at `rx`, `ry`, `rz`.
    Pauli { rx: f64, ry: f64, rz: f64 },
}

/// Real 4x4 superoperator on row-major `vec(ρ) = (ρ00, ρ01, ρ10, ρ11)`.
type Superop = [[f64; 4]; 4];

impl QubitGenerator {
    fn superop(&self, t: f64) -> Superop {
        match *self {
            QubitGenerator::Thermal { p0, rate, coherence_rate } => {
                let p1 = 1.0 - p0;
                let e = (-rate * t).exp();
                let c = (-coherence_rate * t).exp();
                [
                    [p0 + p1 * e, 0.0, 0.0, p0 * (1.0 - e)],
                    [0.0, c, 0.0, 0.0],
                    [0.0, 0.0, c, 0.0],
                    [p1 * (1.0 - e), 0.0, 0.0, p1 + p0 * e],
                ]
            }
            QubitGenerator::Pauli { rx, ry, rz } => {
                let (ex, ey, ez) = ((-rx * t).exp(), (-ry * t).exp(), (-rz * t).exp());
                let (s, d) = (0.5 * (ex + ey), 0.5 * (ex - ey));
                [
                    [0.5 * (1.0 + ez), 0.0, 0.0, 0.5 * (1.0 - ez)],
                    [0.0, s, d, 0.0],
                    [0.0, d, s, 0.0],
                    [0.5 * (1.0 - ez), 0.0, 0.0, 0.5 * (1.0 + ez)],
                ]
            }
        }
    }

    fn stationary(&self) -> [f64; 2] {
        match *self {
            QubitGenerator::Thermal { p0, .. } => [p0, 1.0 - p0],
            QubitGenerator::Pauli { .. } => [0.5, 0.5],
        }
    }
}

/// `(γ_up, γ_down)` for a detailed-balance qubit with unit total rate.
pub fn davies_rates(beta: f64, omega: f64) -> (f64, f64) {
    let boltzmann = (-beta * omega).exp();
    let down = 1.0 / (1.0 + boltzmann);
    (1.0 - down, down)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    Davies,
    PauliBoundary { delta: f64 },
    LogicalMicro,
}

/// Tensor product of independent one-qubit semigroups; site 0 is the most
/// significant bit of the basis index.
#[derive(Debug, Clone)]
pub struct LocalQubitChannel {
    sites: Vec<QubitGenerator>,
    family: Family,
    sigma: DensityMatrix,
}

impl LocalQubitChannel {
    fn from_sites(sites: Vec<QubitGenerator>, family: Family) -> Result<Self> {
        if sites.is_empty() || sites.len() > MAX_QUBITS {
            return Err(ModelError::InvalidParameter(format!(
                "number of qubits must be in 1..={MAX_QUBITS}, got {}",
                sites.len()
            )));
        }
        let mut sigma = CMatrix::identity(1);
        for g in &sites {
            sigma = kron(&sigma, &CMatrix::from_diag(&g.stationary()));
        }
        Ok(Self { sites, family, sigma: DensityMatrix::from_matrix_unchecked(sigma) })
    }

    /// Independent thermal qubits at inverse temperature `beta` and splitting
    /// `omega`: populations relax at unit rate, coherences at rate 1/2.
    pub fn davies(n: usize, beta: f64, omega: f64) -> Result<Self> {
        if !beta.is_finite() || !omega.is_finite() {
            return Err(ModelError::InvalidParameter(format!("beta and omega must be finite, got {beta}, {omega}")));
        }
        let (up, down) = davies_rates(beta, omega);
        check_positive("gamma_up", up)?;
        check_positive("gamma_down", down)?;
        let g = QubitGenerator::Thermal { p0: down / (up + down), rate: up + down, coherence_rate: 0.5 * (up + down) };
        Self::from_sites(vec![g; n], Family::Davies)
    }

    /// Unital Pauli noise with a slow boundary qubit: site 0 sees X-noise at
    /// `delta / 2` and Z-noise at `gamma / 2`; every other site sees X- and
    /// Z-noise at `gamma / 2` each.
    pub fn pauli_boundary(l: usize, delta: f64, gamma: f64) -> Result<Self> {
        check_positive("delta", delta)?;
        check_positive("gamma", gamma)?;
        if delta >= gamma {
            return Err(ModelError::InvalidParameter(format!("requires 0 < delta < gamma, got delta={delta}, gamma={gamma}")));
        }
        let mut sites = vec![QubitGenerator::Pauli { rx: gamma, ry: gamma + delta, rz: delta }];
        sites.extend(std::iter::repeat_n(QubitGenerator::Pauli { rx: gamma, ry: 2.0 * gamma, rz: gamma }, l.saturating_sub(1)));
        if l == 0 {
            sites.clear();
        }
        Self::from_sites(sites, Family::PauliBoundary { delta })
    }

    /// One logical qubit depolarizing at `e^{-c l}` and `l` syndrome qubits
    /// resetting at rate `gamma` to `diag(1 - p, p)`, `p = e^{-beta}/(1 + e^{-beta})`.
    pub fn logical_micro(l: usize, beta: f64, gamma: f64, c: f64) -> Result<Self> {
        check_positive("gamma", gamma)?;
        if !(c >= 0.0) || !c.is_finite() || !beta.is_finite() {
            return Err(ModelError::InvalidParameter(format!("requires finite beta and c >= 0, got beta={beta}, c={c}")));
        }
        if l == 0 {
            return Err(ModelError::InvalidParameter("logical_micro needs at least one syndrome qubit".into()));
        }
        let eta = (-c * l as f64).exp();
        let p = excited_population(beta);
        let mut sites = vec![QubitGenerator::Pauli { rx: eta, ry: eta, rz: eta }];
        sites.extend(std::iter::repeat_n(
            QubitGenerator::Thermal { p0: 1.0 - p, rate: gamma, coherence_rate: gamma },
            l,
        ));
        Self::from_sites(sites, Family::LogicalMicro)
    }

    pub fn n_qubits(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[QubitGenerator] {
        &self.sites
    }

    fn apply(&self, x: &CMatrix, t: f64, adjoint: bool) -> Result<CMatrix> {
        check_time(t)?;
        check_square(x, self.dim())?;
        let mut out = x.clone();
        let n = self.sites.len();
        for (site, g) in self.sites.iter().enumerate() {
            let mut s = g.superop(t);
            if adjoint {
                s = transpose(&s);
            }
            apply_site(&mut out, n - 1 - site, &s);
        }
        Ok(out)
    }
}

fn transpose(s: &Superop) -> Superop {
    let mut out = [[0.0; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            out[r][c] = s[c][r];
        }
    }
    out
}

/// `p = e^{-β}/(1 + e^{-β})`
pub(crate) fn excited_population(beta: f64) -> f64 {
    let b = (-beta).exp();
    b / (1.0 + b)
}

fn apply_site(x: &mut CMatrix, bit: usize, s: &Superop) {
    let d = x.rows();
    let mask = 1usize << bit;
    let data = x.as_mut_slice();
    for r0 in (0..d).filter(|r| r & mask == 0) {
        let r1 = r0 | mask;
        for c0 in (0..d).filter(|c| c & mask == 0) {
            let c1 = c0 | mask;
            let v = [data[r0 * d + c0], data[r0 * d + c1], data[r1 * d + c0], data[r1 * d + c1]];
            let mut w = [C64::new(0.0, 0.0); 4];
            for (k, row) in s.iter().enumerate() {
                for (j, &a) in row.iter().enumerate() {
                    if a != 0.0 {
                        w[k] += v[j] * a;
                    }
                }
            }
            data[r0 * d + c0] = w[0];
            data[r0 * d + c1] = w[1];
            data[r1 * d + c0] = w[2];
            data[r1 * d + c1] = w[3];
        }
    }
}

impl QuantumChannel for LocalQubitChannel {
    fn family(&self) -> &'static str {
        match self.family {
            Family::Davies => "davies_chain",
            Family::PauliBoundary { .. } => "pauli_boundary",
            Family::LogicalMicro => "logical_micro",
        }
    }

    fn dim(&self) -> usize {
        1 << self.sites.len()
    }

    fn evolve(&self, x: &CMatrix, t: f64) -> Result<CMatrix> {
        self.apply(x, t, false)
    }

    fn evolve_adjoint(&self, x: &CMatrix, t: f64) -> Result<CMatrix> {
        self.apply(x, t, true)
    }

    fn stationary(&self) -> Result<DensityMatrix> {
        Ok(self.sigma.clone())
    }

    fn slow_mode(&self) -> Result<SlowMode> {
        match self.family {
            Family::PauliBoundary { delta } => {
                let d = self.dim();
                let z = CMatrix::from_diag(&[1.0, -1.0]);
                let l2 = kron(&z, &CMatrix::identity(d / 2));
                let r2 = l2.scale_real(1.0 / d as f64);
                Ok(SlowMode { l2, r2, gamma2: delta })
            }
            Family::Davies => Err(ModelError::NoSimpleSlowMode {
                family: "davies_chain",
                reason: format!("the single-site coherence modes share rate 1/2 with multiplicity {}", 2 * self.sites.len()),
            }),
            Family::LogicalMicro => Err(ModelError::NoSimpleSlowMode {
                family: "logical_micro",
                reason: "the logical depolarizing mode has multiplicity 3".into(),
            }),
        }
    }

    fn distance(&self, rho: &CMatrix, t: f64) -> Result<f64> {
        Ok(trace_norm(&self.evolve(rho, t)?.sub(self.sigma.matrix()))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{member_rng, sample_haar_pure};

    fn random_rho(d: usize, seed: u64) -> CMatrix {
        let mut rng = member_rng(seed, 0);
        sample_haar_pure(d, &mut rng).unwrap().projector().into_matrix()
    }

    #[test]
    fn davies_identity_at_zero_and_gibbs_at_infinity() {
        let ch = LocalQubitChannel::davies(3, 1.2, 1.0).unwrap();
        let rho = random_rho(8, 1);
        assert!(ch.evolve(&rho, 0.0).unwrap().sub(&rho).max_abs() < 1e-15);
        let late = ch.evolve(&rho, 100.0).unwrap();
        assert!(late.sub(ch.stationary().unwrap().matrix()).max_abs() < 1e-14);
        let p1 = (-1.2f64).exp() / (1.0 + (-1.2f64).exp());
        let sigma = ch.stationary().unwrap();
        assert!((sigma.matrix()[(7, 7)].re - p1.powi(3)).abs() < 1e-15);
        assert!((sigma.matrix()[(0, 0)].re - (1.0 - p1).powi(3)).abs() < 1e-15);
    }

    #[test]
    fn detailed_balance_rates() {
        let (up, down) = davies_rates(1.2, 1.0);
        assert!((up + down - 1.0).abs() < 1e-15);
        assert!((up / down - (-1.2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn pauli_boundary_rates_and_slow_mode() {
        let ch = LocalQubitChannel::pauli_boundary(3, 0.25, 4.0).unwrap();
        assert_eq!(ch.sites()[0], QubitGenerator::Pauli { rx: 4.0, ry: 4.25, rz: 0.25 });
        assert_eq!(ch.sites()[1], QubitGenerator::Pauli { rx: 4.0, ry: 8.0, rz: 4.0 });
        let mode = ch.slow_mode().unwrap();
        assert_eq!(mode.gamma2, 0.25);
        let t = 1.3;
        let evolved = ch.evolve(&mode.r2, t).unwrap();
        assert!(evolved.sub(&mode.r2.scale_real((-0.25 * t).exp())).max_abs() < 1e-15);
        assert!((mode.l2.hs_inner(&mode.r2).re - 1.0).abs() < 1e-15);
        assert!((trace_norm(&mode.r2).unwrap() - 1.0).abs() < 1e-15);
        // |0..0> has a2 = +1.
        let mut basis = CMatrix::zeros(8, 8);
        basis[(0, 0)] = C64::new(1.0, 0.0);
        assert_eq!(mode.overlap(&basis), 1.0);
    }

    #[test]
    fn pauli_boundary_parameter_guard() {
        assert!(LocalQubitChannel::pauli_boundary(3, 4.0, 4.0).is_err());
        assert!(LocalQubitChannel::pauli_boundary(3, -0.1, 4.0).is_err());
        assert!(LocalQubitChannel::pauli_boundary(0, 0.1, 4.0).is_err());
    }

    #[test]
    fn logical_micro_stationary_and_rate() {
        let ch = LocalQubitChannel::logical_micro(6, 1.8, 2.0, 0.75).unwrap();
        match ch.sites()[0] {
            QubitGenerator::Pauli { rx, .. } => assert!((rx - (-4.5f64).exp()).abs() < 1e-17),
            _ => panic!("logical site must be depolarizing"),
        }
        let small = LocalQubitChannel::logical_micro(2, 1.8, 2.0, 0.75).unwrap();
        let p = excited_population(1.8);
        let tau = CMatrix::from_diag(&[1.0 - p, p]);
        let expected = kron(&kron(&CMatrix::identity(2).scale_real(0.5), &tau), &tau);
        assert!(small.stationary().unwrap().matrix().sub(&expected).max_abs() < 1e-16);
        assert!(matches!(small.slow_mode(), Err(ModelError::NoSimpleSlowMode { .. })));
    }

    #[test]
    fn adjoint_is_hilbert_schmidt_dual() {
        let ch = LocalQubitChannel::davies(2, 0.7, 1.3).unwrap();
        let a = random_rho(4, 3);
        let b = CMatrix::from_fn(4, 4, |r, c| C64::new((r * 3 + c) as f64, r as f64 - c as f64));
        let lhs = b.hs_inner(&ch.evolve(&a, 0.9).unwrap());
        let rhs = ch.evolve_adjoint(&b, 0.9).unwrap().hs_inner(&a);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn dimension_and_time_guards() {
        let ch = LocalQubitChannel::davies(2, 1.0, 1.0).unwrap();
        assert!(matches!(ch.evolve(&CMatrix::identity(8), 1.0), Err(ModelError::DimensionMismatch { .. })));
        assert!(matches!(ch.evolve(&CMatrix::identity(4), -1.0), Err(ModelError::InvalidTime(_))));
        assert!(LocalQubitChannel::davies(MAX_QUBITS + 1, 1.0, 1.0).is_err());
    }
}
