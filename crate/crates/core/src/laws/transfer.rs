use rayon::prelude::*;

use super::{LawError, Result};
use crate::linalg::{hermitian_op_norm, CMatrix, C64};
use crate::models::QuantumChannel;

/// Largest dimension accepted by [`xi_sq`] and [`psi_sq`].
pub const MAX_TRANSFER_DIM: usize = 64;

/// Traceless Hermitian basis of `d × d` matrices, orthonormal in the
/// Hilbert–Schmidt inner product: symmetric and antisymmetric off-diagonal
/// pairs, then the `d − 1` diagonal generators.
pub fn gell_mann_basis(d: usize) -> Vec<CMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d - 1);
    for j in 0..d {
        for k in j + 1..d {
            let mut sym = CMatrix::zeros(d, d);
            sym.as_mut_slice()[j * d + k] = C64::new(s, 0.0);
            sym.as_mut_slice()[k * d + j] = C64::new(s, 0.0);
            out.push(sym);
            let mut anti = CMatrix::zeros(d, d);
            anti.as_mut_slice()[j * d + k] = C64::new(0.0, -s);
            anti.as_mut_slice()[k * d + j] = C64::new(0.0, s);
            out.push(anti);
        }
    }
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut diag = vec![0.0; d];
        for x in diag.iter_mut().take(l) {
            *x = norm;
        }
        diag[l] = -(l as f64) * norm;
        out.push(CMatrix::from_diag(&diag));
    }
    out
}

fn check_size(d: usize) -> Result<()> {
    if d > MAX_TRANSFER_DIM {
        return Err(LawError::TooLarge { d, limit: MAX_TRANSFER_DIM });
    }
    Ok(())
}

/// `Σ_a ‖Λ_t(F_a)‖₂²` over the supplied basis.
pub fn xi_sq_with_basis(channel: &dyn QuantumChannel, t: f64, basis: &[CMatrix]) -> Result<f64> {
    check_size(channel.dim())?;
    let terms = basis
        .par_iter()
        .map(|f| Ok(channel.evolve(f, t)?.fro_norm().powi(2)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(terms.iter().sum())
}

/// `Ξ_t² = Σ_a ‖Λ_t(F_a)‖₂²` over the generalized Gell-Mann basis.
pub fn xi_sq(channel: &dyn QuantumChannel, t: f64) -> Result<f64> {
    xi_sq_with_basis(channel, t, &gell_mann_basis(channel.dim()))
}

/// `Ψ_t² = Σ_a ‖Λ_t†(F_a)‖∞²` over the generalized Gell-Mann basis.
pub fn psi_sq(channel: &dyn QuantumChannel, t: f64) -> Result<f64> {
    check_size(channel.dim())?;
    let terms = gell_mann_basis(channel.dim())
        .par_iter()
        .map(|f| {
            let g = channel.evolve_adjoint(f, t)?.hermitian_part();
            Ok(hermitian_op_norm(&g).map_err(crate::models::ModelError::from)?.powi(2))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(terms.iter().sum())
}

/// `c_P` of an exact state 2-design on dimension `d`.
pub fn exact_design_cp(d: usize) -> f64 {
    1.0 / (d as f64 * (d as f64 + 1.0))
}

/// `c_P` of the induced ensemble with ancilla dimension `d_b`.
pub fn induced_cp(d: usize, d_b: usize) -> f64 {
    1.0 / (d as f64 * (d as f64 * d_b as f64 + 1.0))
}

/// Chebyshev bound `d c_P Ξ_t² / η²` on `P(|g_t − μ_t| ≥ η)`.
pub fn ensemble_tail_bound(c_p: f64, xi_sq: f64, d: usize, eta: f64) -> Result<f64> {
    if !(c_p > 0.0) || !(xi_sq >= 0.0) || !(eta > 0.0) {
        return Err(LawError::Domain(format!("need c_P > 0, Ξ² >= 0, η > 0; got {c_p}, {xi_sq}, {eta}")));
    }
    Ok(d as f64 * c_p * xi_sq / (eta * eta))
}

/// Bound `3 ε₂ ‖L₂‖∞²` on the variance change of `a₂` under an
/// `ε₂`-approximate design.
pub fn design_variance_defect(_v0: f64, op_norm: f64, eps2: f64) -> Result<f64> {
    if !(eps2 >= 0.0) || !(op_norm >= 0.0) {
        return Err(LawError::Domain(format!("need ε₂ >= 0 and ‖L₂‖ >= 0; got {eps2}, {op_norm}")));
    }
    Ok(3.0 * eps2 * op_norm * op_norm)
}

/// Design constants echoed alongside a transfer bound.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TransferConstants {
    pub c_p: f64,
    pub xi_t: f64,
    pub psi_t: f64,
    pub eps2: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gell_mann_is_orthonormal_and_traceless() {
        for d in [2, 3, 5] {
            let b = gell_mann_basis(d);
            assert_eq!(b.len(), d * d - 1);
            for (i, f) in b.iter().enumerate() {
                assert!(f.is_hermitian());
                assert!(f.trace().norm() < 1e-15);
                for (j, g) in b.iter().enumerate() {
                    let ip = f.hs_inner(g);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - C64::new(want, 0.0)).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn design_constants() {
        assert_eq!(exact_design_cp(8), 1.0 / 72.0);
        assert_eq!(induced_cp(4, 1), exact_design_cp(4));
        assert!(ensemble_tail_bound(exact_design_cp(8), 5.0, 8, 1e9).unwrap() < 1e-15);
        assert_eq!(design_variance_defect(0.3, 2.0, 0.0).unwrap(), 0.0);
    }
}
