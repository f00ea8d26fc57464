use super::{check_square, check_time, ModelError, QuantumChannel, Result, SlowMode};
use crate::linalg::{trace_norm, CMatrix, C64};
use crate::states::DensityMatrix;

/// Classical jump process on `d` levels with a weakly coupled level 0
/// (`r(0→i) = r(i→0) = η/(d−1)`, `r(i→j) = 1/(d−2)`) plus unit-rate
/// dephasing in the jump basis.
#[derive(Debug, Clone)]
pub struct ProtectedSector {
    d: usize,
    eta: f64,
    sigma: DensityMatrix,
}

impl ProtectedSector {
    pub fn new(d: usize, eta: f64) -> Result<Self> {
        if d < 3 {
            return Err(ModelError::InvalidParameter(format!("protected sector needs d >= 3, got {d}")));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(ModelError::InvalidParameter(format!("protected sector needs 0 < eta <= 1, got {eta}")));
        }
        Ok(Self { d, eta, sigma: DensityMatrix::maximally_mixed(d) })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Decay rate of the protected-level imbalance, `η(1 + 1/(d−1))`.
    pub fn gamma_slow(&self) -> f64 {
        self.eta * (1.0 + 1.0 / (self.d as f64 - 1.0))
    }

    /// Decay rate of bulk population differences, `1 + 1/(d−2) + η/(d−1)`.
    pub fn gamma_bulk(&self) -> f64 {
        let d = self.d as f64;
        1.0 + 1.0 / (d - 2.0) + self.eta / (d - 1.0)
    }

    /// Total escape rate from level `k`.
    pub fn escape_rate(&self, k: usize) -> f64 {
        if k == 0 {
            self.eta
        } else {
            1.0 + self.eta / (self.d as f64 - 1.0)
        }
    }

    /// `b = e0 − Σ_i e_i/(d−1)`, the slow population direction.
    pub fn slow_direction(&self) -> Vec<f64> {
        let mut b = vec![-1.0 / (self.d as f64 - 1.0); self.d];
        b[0] = 1.0;
        b
    }

    /// Exact distance from `|0><0|`: `2(1 − 1/d) e^{−γ_S t}`.
    pub fn distance_from_protected_level(&self, t: f64) -> f64 {
        2.0 * (1.0 - 1.0 / self.d as f64) * (-self.gamma_slow() * t).exp()
    }

    /// Population flow: the decomposition `p = s u + a b + w` diagonalizes the
    /// generator with eigenvalues `0`, `−γ_S`, `−γ_B`.
    fn evolve_populations(&self, p: &[C64], t: f64) -> Vec<C64> {
        let d = self.d as f64;
        let s: C64 = p.iter().sum();
        let a = p[0] - s / d;
        let b = self.slow_direction();
        let fs = (-self.gamma_slow() * t).exp();
        let fb = (-self.gamma_bulk() * t).exp();
        p.iter()
            .zip(&b)
            .map(|(&pk, &bk)| {
                let w = pk - s / d - a * bk;
                s / d + a * (bk * fs) + w * fb
            })
            .collect()
    }
}

impl QuantumChannel for ProtectedSector {
    fn family(&self) -> &'static str {
        "protected_sector"
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn evolve(&self, x: &CMatrix, t: f64) -> Result<CMatrix> {
        check_time(t)?;
        check_square(x, self.d)?;
        let n = self.d;
        let pops = self.evolve_populations(&x.diag(), t);
        let deph = (-t).exp();
        let half: Vec<f64> = (0..n).map(|k| (-0.5 * self.escape_rate(k) * t).exp()).collect();
        Ok(CMatrix::from_fn(n, n, |r, c| if r == c { pops[r] } else { x[(r, c)] * (deph * half[r] * half[c]) }))
    }

    /// The generator is symmetric in the Hilbert–Schmidt inner product.
    fn evolve_adjoint(&self, x: &CMatrix, t: f64) -> Result<CMatrix> {
        self.evolve(x, t)
    }

    fn stationary(&self) -> Result<DensityMatrix> {
        Ok(self.sigma.clone())
    }

    fn slow_mode(&self) -> Result<SlowMode> {
        let b = self.slow_direction();
        let r2 = CMatrix::from_diag(&b).scale_real(0.5);
        let l2 = CMatrix::from_diag(&b).scale_real(2.0 * (1.0 - 1.0 / self.d as f64));
        Ok(SlowMode { l2, r2, gamma2: self.gamma_slow() })
    }

    fn distance(&self, rho: &CMatrix, t: f64) -> Result<f64> {
        Ok(trace_norm(&self.evolve(rho, t)?.sub(self.sigma.matrix()))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{member_rng, sample_haar_pure};

    #[test]
    fn slow_rate_closed_form() {
        let p = ProtectedSector::new(8, 0.1).unwrap();
        assert!((p.gamma_slow() - 0.1 * (1.0 + 1.0 / 7.0)).abs() < 1e-16);
        assert!((p.gamma_bulk() - (1.0 + 1.0 / 6.0 + 0.1 / 7.0)).abs() < 1e-15);
    }

    #[test]
    fn protected_level_distance_is_exact() {
        let p = ProtectedSector::new(16, 0.05).unwrap();
        let mut rho = CMatrix::zeros(16, 16);
        rho[(0, 0)] = C64::new(1.0, 0.0);
        for t in [0.0, 0.3, 2.0, 17.0, 120.0] {
            let g = p.distance(&rho, t).unwrap();
            assert!((g - p.distance_from_protected_level(t)).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn parameter_guards() {
        assert!(ProtectedSector::new(2, 0.1).is_err());
        assert!(ProtectedSector::new(5, 0.0).is_err());
        assert!(ProtectedSector::new(5, 1.5).is_err());
        assert!(ProtectedSector::new(5, 1.0).is_ok());
    }

    #[test]
    fn slow_mode_normalization_and_eigen_relation() {
        let p = ProtectedSector::new(6, 0.2).unwrap();
        let m = p.slow_mode().unwrap();
        assert!((trace_norm(&m.r2).unwrap() - 1.0).abs() < 1e-14);
        assert!((m.l2.hs_inner(&m.r2).re - 1.0).abs() < 1e-14);
        let t = 2.5;
        let e = p.evolve(&m.r2, t).unwrap();
        assert!(e.sub(&m.r2.scale_real((-m.gamma2 * t).exp())).max_abs() < 1e-14);
    }

    #[test]
    fn trace_preserved_and_relaxes_to_uniform() {
        let p = ProtectedSector::new(5, 0.3).unwrap();
        let mut rng = member_rng(9, 0);
        let rho = sample_haar_pure(5, &mut rng).unwrap().projector().into_matrix();
        let out = p.evolve(&rho, 1.7).unwrap();
        assert!((out.trace().re - 1.0).abs() < 1e-14);
        let late = p.evolve(&rho, 400.0).unwrap();
        assert!(late.sub(&CMatrix::identity(5).scale_real(0.2)).max_abs() < 1e-14);
    }
}
