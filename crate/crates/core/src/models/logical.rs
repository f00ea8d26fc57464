use super::{check_positive, check_square, check_time, ModelError, QuantumChannel, Result, SlowMode};
use crate::linalg::{kron, partial_trace, trace_norm, CMatrix, C64};
use crate::states::DensityMatrix;

/// Logical factor `C^D` depolarizing at rate `η`, tensored with a syndrome
/// factor `C^N` resetting to `π` at unit rate.
#[derive(Debug, Clone)]
pub struct LogicalProduct {
    d_log: usize,
    n_syn: usize,
    eta: f64,
    pi: DensityMatrix,
    sigma: DensityMatrix,
}

impl LogicalProduct {
    pub fn new(d_log: usize, n_syn: usize, eta: f64, pi: DensityMatrix) -> Result<Self> {
        if d_log < 2 || n_syn < 1 {
            return Err(ModelError::InvalidParameter(format!(
                "logical product needs D >= 2 and N >= 1, got D={d_log}, N={n_syn}"
            )));
        }
        check_positive("eta", eta)?;
        if pi.dim() != n_syn {
            return Err(ModelError::InvalidParameter(format!(
                "syndrome reset state has dimension {}, expected {n_syn}",
                pi.dim()
            )));
        }
        let pi = DensityMatrix::new(pi.into_matrix())?;
        let sigma = kron(&CMatrix::identity(d_log).scale_real(1.0 / d_log as f64), pi.matrix());
        Ok(Self { d_log, n_syn, eta, pi, sigma: DensityMatrix::from_matrix_unchecked(sigma) })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d_log, self.n_syn)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn reset_state(&self) -> &DensityMatrix {
        &self.pi
    }

    /// Exact distance from `|φ><φ| ⊗ π`: `2(1 − 1/D) e^{−ηt}`.
    pub fn distance_from_logical_product(&self, t: f64) -> f64 {
        2.0 * (1.0 - 1.0 / self.d_log as f64) * (-self.eta * t).exp()
    }

    fn maximally_mixed_log(&self) -> CMatrix {
        CMatrix::identity(self.d_log).scale_real(1.0 / self.d_log as f64)
    }

    /// `Tr_syn[(I ⊗ π) Y]`
    fn weighted_syndrome_trace(&self, y: &CMatrix) -> CMatrix {
        let (dl, n) = (self.d_log, self.n_syn);
        let pi = self.pi.matrix();
        CMatrix::from_fn(dl, dl, |i, j| {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..n {
                for m in 0..n {
                    s += pi[(k, m)] * y[(i * n + m, j * n + k)];
                }
            }
            s
        })
    }
}

impl QuantumChannel for LogicalProduct {
    fn family(&self) -> &'static str {
        "logical_product"
    }

    fn dim(&self) -> usize {
        self.d_log * self.n_syn
    }

    fn evolve(&self, x: &CMatrix, t: f64) -> Result<CMatrix> {
        check_time(t)?;
        check_square(x, self.dim())?;
        let dims = [self.d_log, self.n_syn];
        let a = (-self.eta * t).exp();
        let b = (-t).exp();
        let x_log = partial_trace(x, &dims, 0)?;
        let x_syn = partial_trace(x, &dims, 1)?;
        let mix = self.maximally_mixed_log();
        let mut out = x.scale_real(a * b);
        out.axpy(C64::new(a * (1.0 - b), 0.0), &kron(&x_log, self.pi.matrix()));
        out.axpy(C64::new((1.0 - a) * b, 0.0), &kron(&mix, &x_syn));
        out.axpy(x.trace() * ((1.0 - a) * (1.0 - b)), self.sigma.matrix());
        Ok(out)
    }

    fn evolve_adjoint(&self, y: &CMatrix, t: f64) -> Result<CMatrix> {
        check_time(t)?;
        check_square(y, self.dim())?;
        let dims = [self.d_log, self.n_syn];
        let a = (-self.eta * t).exp();
        let b = (-t).exp();
        let weighted = self.weighted_syndrome_trace(y);
        let y_syn = partial_trace(y, &dims, 1)?;
        let id_syn = CMatrix::identity(self.n_syn);
        let mut out = y.scale_real(a * b);
        out.axpy(C64::new(a * (1.0 - b), 0.0), &kron(&weighted, &id_syn));
        out.axpy(C64::new((1.0 - a) * b, 0.0), &kron(&self.maximally_mixed_log(), &y_syn));
        let scalar = weighted.trace() / self.d_log as f64;
        out.axpy(scalar * ((1.0 - a) * (1.0 - b)), &CMatrix::identity(self.dim()));
        Ok(out)
    }

    fn stationary(&self) -> Result<DensityMatrix> {
        Ok(self.sigma.clone())
    }

    fn slow_mode(&self) -> Result<SlowMode> {
        Err(ModelError::NoSimpleSlowMode {
            family: "logical_product",
            reason: format!("the logical depolarizing mode has multiplicity {}", self.d_log * self.d_log - 1),
        })
    }

    fn distance(&self, rho: &CMatrix, t: f64) -> Result<f64> {
        Ok(trace_norm(&self.evolve(rho, t)?.sub(self.sigma.matrix()))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{member_rng, sample_haar_pure, sample_induced, PureState};

    fn thermal_pi(n: usize) -> DensityMatrix {
        let w: Vec<f64> = (0..n).map(|k| (-0.7 * k as f64).exp()).collect();
        let z: f64 = w.iter().sum();
        DensityMatrix::from_diag(&w.iter().map(|x| x / z).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn exact_slow_benchmark() {
        let pi = thermal_pi(3);
        let ch = LogicalProduct::new(3, 3, 0.05, pi.clone()).unwrap();
        let phi = PureState::normalized(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.5, 0.0)]).unwrap();
        let rho = kron(phi.projector().matrix(), pi.matrix());
        for t in [0.0, 0.5, 4.0, 40.0] {
            let g = ch.distance(&rho, t).unwrap();
            assert!((g - ch.distance_from_logical_product(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn long_time_limit() {
        let mut rng = member_rng(2, 0);
        let pi = sample_induced(2, 2, &mut rng).unwrap();
        let ch = LogicalProduct::new(2, 2, 0.3, pi).unwrap();
        let rho = sample_haar_pure(4, &mut rng).unwrap().projector().into_matrix();
        let late = ch.evolve(&rho, 300.0).unwrap();
        assert!(late.sub(ch.stationary().unwrap().matrix()).max_abs() < 1e-14);
    }

    #[test]
    fn adjoint_duality() {
        let mut rng = member_rng(3, 0);
        let pi = sample_induced(3, 3, &mut rng).unwrap();
        let ch = LogicalProduct::new(2, 3, 0.4, pi).unwrap();
        let a = sample_haar_pure(6, &mut rng).unwrap().projector().into_matrix();
        let b = CMatrix::from_fn(6, 6, |r, c| C64::new((r + 2 * c) as f64 * 0.1, (r as f64 - c as f64) * 0.3));
        let t = 0.8;
        let lhs = b.hs_inner(&ch.evolve(&a, t).unwrap());
        let rhs = ch.evolve_adjoint(&b, t).unwrap().hs_inner(&a);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn rejects_invalid_reset_state() {
        assert!(LogicalProduct::new(2, 3, 0.1, thermal_pi(2)).is_err());
        let bad = DensityMatrix::from_matrix_unchecked(CMatrix::from_diag(&[0.7, 0.7]));
        assert!(LogicalProduct::new(2, 2, 0.1, bad).is_err());
    }
}
