use super::{CMatrix, LinalgError, Result};

/// Beyond this the entries of `e^{tA}` can overflow unless `A` is known to
/// generate a contraction.
const MAX_NORM: f64 = 7.0e2;
/// Hard cap on the scaled norm even for contractive generators.
const MAX_GENERATOR_NORM: f64 = 1e12;

/// `e^{tA}` by scaling and squaring with a truncated Taylor series.
///
/// The argument is scaled to `||tA / 2^s||_1 <= 1/2`, where a Taylor series of
/// order `k` has relative truncation error below `0.5^(k+1) / (k+1)!`; the
/// order is the smallest `k` bringing the last retained term under `1e-17`.
pub fn matrix_exp(a: &CMatrix, t: f64) -> Result<CMatrix> {
    let n = a.ensure_square()?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(LinalgError::InvalidArgument(format!("time must be finite and nonnegative, got {t}")));
    }
    let norm = a.one_norm() * t;
    if !norm.is_finite() || norm > MAX_GENERATOR_NORM {
        return Err(LinalgError::ExpOverflow { norm });
    }
    if norm == 0.0 {
        return Ok(CMatrix::identity(n));
    }
    // Entries of e^{tA} can reach e^{||tA||}; past ~700 that is not representable.
    if norm > MAX_NORM && !generator_like(a) {
        return Err(LinalgError::ExpOverflow { norm });
    }
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a.scale_real(t / 2f64.powi(squarings as i32));
    let theta = norm / 2f64.powi(squarings as i32);

    let mut order = 1usize;
    let mut bound = theta;
    while bound > 1e-17 && order < 30 {
        order += 1;
        bound *= theta / order as f64;
    }

    // Horner evaluation of sum_{k<=order} X^k / k!.
    let mut result = CMatrix::identity(n);
    for k in (1..=order).rev() {
        result = scaled.matmul(&result).scale_real(1.0 / k as f64);
        for i in 0..n {
            result[(i, i)] += super::ONE;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    if result.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LinalgError::ExpOverflow { norm });
    }
    Ok(result)
}

/// Matrices whose exponentials stay bounded however large `t` gets: every
/// column is a real Metzler column summing to zero (a Markov generator), or a
/// Hermitian negative-semidefinite diagonal.
fn generator_like(a: &CMatrix) -> bool {
    let n = a.rows();
    let mut markov = true;
    for c in 0..n {
        let mut sum = 0.0;
        for r in 0..n {
            let z = a[(r, c)];
            if z.im != 0.0 || (r != c && z.re < 0.0) {
                markov = false;
            }
            sum += z.re;
        }
        let tol = 1e-10 * a.max_abs();
        if sum.abs() > tol {
            markov = false;
        }
    }
    markov || (a.is_diagonal() && a.diag().iter().all(|z| z.im == 0.0 && z.re <= 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eig, C64};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, seed: u64, scale: f64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * scale)
    }

    #[test]
    fn zero_matrix_gives_identity() {
        assert_eq!(matrix_exp(&CMatrix::zeros(3, 3), 2.0).unwrap(), CMatrix::identity(3));
        assert_eq!(matrix_exp(&CMatrix::identity(3), 0.0).unwrap(), CMatrix::identity(3));
    }

    #[test]
    fn scalar_decay() {
        let e = matrix_exp(&CMatrix::from_diag(&[-1.0]), 1.0).unwrap();
        assert!((e[(0, 0)].re - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn two_state_generator_closed_form() {
        let (a, b, t) = (0.7, 0.2, 1.9);
        let q = CMatrix::from_real_rows(&[&[-a, b], &[a, -b]]);
        let e = matrix_exp(&q, t).unwrap();
        let s = a + b;
        let decay = (-s * t).exp();
        let exact = [
            [(b + a * decay) / s, (b - b * decay) / s],
            [(a - a * decay) / s, (a + b * decay) / s],
        ];
        for r in 0..2 {
            for c in 0..2 {
                assert!((e[(r, c)].re - exact[r][c]).abs() < 1e-14);
                assert_eq!(e[(r, c)].im, 0.0);
            }
        }
    }

    #[test]
    fn hermitian_exponential_matches_spectral_oracle() {
        let g = random_matrix(8, 5, 4.0);
        let h = g.add(&g.adjoint());
        let eig = hermitian_eig(&h).unwrap();
        let t = 0.8;
        let v = &eig.eigenvectors;
        let exact = CMatrix::from_fn(8, 8, |r, c| {
            (0..8).map(|k| v[(r, k)] * (eig.eigenvalues[k] * t).exp() * v[(c, k)].conj()).sum()
        });
        let e = matrix_exp(&h, t).unwrap();
        assert!(e.sub(&exact).fro_norm() <= 1e-10 * exact.fro_norm());
    }

    #[test]
    fn semigroup_property_random() {
        for seed in 0..10 {
            let a = random_matrix(8, seed, 2.0);
            let (s, t) = (0.3 + seed as f64 * 0.1, 1.1);
            let lhs = matrix_exp(&a, s + t).unwrap();
            let rhs = matrix_exp(&a, s).unwrap().matmul(&matrix_exp(&a, t).unwrap());
            assert!(lhs.sub(&rhs).fro_norm() <= 1e-8 * lhs.fro_norm().max(1.0));
        }
    }

    #[test]
    fn large_generator_time_is_allowed() {
        let q = CMatrix::from_real_rows(&[&[-1.0, 0.5], &[1.0, -0.5]]);
        let e = matrix_exp(&q, 5000.0).unwrap();
        assert!((e[(0, 0)].re - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn overflow_is_reported() {
        let a = CMatrix::from_diag(&[1.0]);
        assert!(matches!(matrix_exp(&a, 1e4), Err(LinalgError::ExpOverflow { .. })));
        assert!(matrix_exp(&a, f64::INFINITY).is_err());
    }

    #[test]
    fn non_square_rejected() {
        assert!(matches!(matrix_exp(&CMatrix::zeros(2, 3), 1.0), Err(LinalgError::NotSquare { .. })));
    }
}
