use super::{CMatrix, LinalgError, Result, C64, ZERO};

const MAX_SWEEPS: usize = 100;
const MAX_QL_ITERATIONS: usize = 60;

/// Eigenvalues in ascending order with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct HermitianEigResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl HermitianEigResult {
    pub fn eigenvector(&self, i: usize) -> Vec<C64> {
        let n = self.eigenvectors.rows();
        (0..n).map(|r| self.eigenvectors[(r, i)]).collect()
    }

    /// `V diag(λ) V^H`
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        CMatrix::from_fn(n, n, |r, c| {
            (0..n).map(|k| v[(r, k)] * self.eigenvalues[k] * v[(c, k)].conj()).sum()
        })
    }
}

/// Full Hermitian eigendecomposition by cyclic complex Jacobi rotations.
pub fn hermitian_eig(a: &CMatrix) -> Result<HermitianEigResult> {
    a.check_hermitian()?;
    let n = a.rows();
    let mut m = a.hermitian_part();
    let mut v = CMatrix::identity(n);
    let scale = m.fro_norm();
    if n <= 1 || scale == 0.0 {
        return Ok(sorted(m.diag().iter().map(|z| z.re).collect(), v));
    }

    let off = |m: &CMatrix| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                s += m[(p, q)].norm_sqr();
            }
        }
        (2.0 * s).sqrt()
    };

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        if off(&m) <= f64::EPSILON * scale * 1e-2 {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let abs = apq.norm();
                if abs == 0.0 {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                if abs <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    m[(p, q)] = ZERO;
                    m[(q, p)] = ZERO;
                    continue;
                }
                let phase = apq / abs;
                let theta = 0.5 * (aqq - app) / abs;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // J = [[c, s], [-s e^{-iφ}, c e^{-iφ}]] on the (p, q) plane.
                let ph_conj = phase.conj();
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = akp * c - akq * ph_conj * s;
                    m[(k, q)] = akp * s + akq * ph_conj * c;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = apk * c - aqk * phase * s;
                    m[(q, k)] = apk * s + aqk * phase * c;
                }
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
                m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * ph_conj * s;
                    v[(k, q)] = vkp * s + vkq * ph_conj * c;
                }
            }
        }
    }
    if !converged {
        let residual = off(&m);
        if residual > f64::EPSILON * scale * 1e-2 {
            return Err(LinalgError::NoConvergence { iterations: MAX_SWEEPS, residual });
        }
    }
    Ok(sorted(m.diag().iter().map(|z| z.re).collect(), v))
}

fn sorted(values: Vec<f64>, vectors: CMatrix) -> HermitianEigResult {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let eigenvalues = order.iter().map(|&i| values[i]).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    HermitianEigResult { eigenvalues, eigenvectors }
}

/// Eigenvalues only, ascending: Householder reduction to real tridiagonal
/// form followed by implicit QL. O(n^3) with a small constant.
pub fn eigvalsh(a: &CMatrix) -> Result<Vec<f64>> {
    a.check_hermitian()?;
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (d, e) = tridiagonalize(a.hermitian_part());
    let mut vals = tridiagonal_ql(d, e, None)?;
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Unitary reduction `Q^H A Q = T` with `T` real symmetric tridiagonal.
/// Returns the diagonal and the sub-diagonal (last entry zero).
fn tridiagonalize(a: CMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.rows();
    let mut a = a.into_vec();
    // Entries below eps * max / n perturb eigenvalues by at most eps * ||A||;
    // flushing them keeps reflector norms from underflowing.
    let cut = f64::EPSILON * a.iter().map(|z| z.norm()).fold(0.0, f64::max) / n as f64;
    for z in a.iter_mut() {
        if z.norm() < cut {
            *z = ZERO;
        }
    }
    let mut e = vec![0.0; n];
    let mut v = vec![ZERO; n];
    let mut w = vec![ZERO; n];
    for k in 0..n.saturating_sub(1) {
        let m = n - k - 1;
        let alpha = a[(k + 1) * n + k];
        let xnorm = (k + 2..n).fold(0.0f64, |acc, i| acc.hypot(a[i * n + k].norm()));
        if xnorm == 0.0 && alpha.im == 0.0 {
            e[k] = alpha.re;
            continue;
        }
        let beta = -(alpha.re.hypot(alpha.im).hypot(xnorm)).copysign(alpha.re);
        let tau = C64::new((beta - alpha.re) / beta, -alpha.im / beta);
        let scal = C64::new(1.0, 0.0) / (alpha - beta);
        v[0] = C64::new(1.0, 0.0);
        for i in 1..m {
            v[i] = a[(k + 1 + i) * n + k] * scal;
        }
        e[k] = beta;
        let off = k + 1;
        for i in 0..m {
            let row = &a[(off + i) * n + off..(off + i) * n + off + m];
            let s: C64 = row.iter().zip(&v[..m]).map(|(x, y)| x * y).sum();
            w[i] = tau * s;
        }
        let wv: C64 = w[..m].iter().zip(&v[..m]).map(|(x, y)| x.conj() * y).sum();
        let alpha2 = tau * wv * -0.5;
        for i in 0..m {
            w[i] += alpha2 * v[i];
        }
        for i in 0..m {
            let (vi, wi) = (v[i], w[i]);
            let row = &mut a[(off + i) * n + off..(off + i) * n + off + m];
            for j in 0..m {
                row[j] -= vi * w[j].conj() + wi * v[j].conj();
            }
        }
    }
    let d = (0..n).map(|i| a[i * n + i].re).collect();
    e[n - 1] = 0.0;
    (d, e)
}

/// Implicit QL on a real symmetric tridiagonal matrix. `e[i]` couples `i` and
/// `i + 1`. When `z` is given, its columns accumulate the eigenvectors.
fn tridiagonal_ql(mut d: Vec<f64>, mut e: Vec<f64>, mut z: Option<&mut [f64]>) -> Result<Vec<f64>> {
    let n = d.len();
    if n == 0 {
        return Ok(d);
    }
    e[n - 1] = 0.0;
    // Deflating below eps * ||T|| is backward stable and keeps couplings
    // between near-zero diagonals from driving the shift to overflow.
    let floor = f64::EPSILON * d.iter().zip(&e).map(|(a, b)| a.abs() + b.abs()).fold(0.0, f64::max);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd || e[m].abs() <= floor {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERATIONS {
                return Err(LinalgError::NoConvergence { iterations: iter, residual: e[l].abs() });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..n {
                        let f = z[k * n + i + 1];
                        z[k * n + i + 1] = s * z[k * n + i] + c * f;
                        z[k * n + i] = c * z[k * n + i] - s * f;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}

/// Eigenpairs of a real symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off` (`off.len() == diag.len() - 1`). Eigenvalues ascending;
/// `vectors[i]` is the unit eigenvector for `values[i]`.
pub fn symmetric_tridiagonal_eig(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    if off.len() + 1 != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "tridiagonal with {n} diagonal entries needs {} off-diagonal entries, got {}",
            n - 1,
            off.len()
        )));
    }
    let mut e = off.to_vec();
    e.push(0.0);
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    let vals = tridiagonal_ql(diag.to_vec(), e, Some(&mut z))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    let values = order.iter().map(|&i| vals[i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|k| z[k * n + i]).collect()).collect();
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        g.add(&g.adjoint())
    }

    fn check_contract(a: &CMatrix) {
        let res = hermitian_eig(a).unwrap();
        let n = a.rows();
        assert!(res.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let av = a.matmul(&res.eigenvectors);
        let vl = CMatrix::from_fn(n, n, |r, c| res.eigenvectors[(r, c)] * res.eigenvalues[c]);
        assert!(av.sub(&vl).fro_norm() <= 1e-10 * a.fro_norm().max(1e-300));
        let vhv = res.eigenvectors.adjoint().matmul(&res.eigenvectors);
        assert!(vhv.sub(&CMatrix::identity(n)).fro_norm() <= 1e-10);
        assert!(res.reconstruct().sub(a).fro_norm() <= 1e-10 * a.fro_norm().max(1.0));
    }

    #[test]
    fn eigvalsh_survives_entries_spanning_the_exponent_range() {
        // Entries from 1e-4 down to 1e-280: squared column norms underflow.
        let n = 48;
        let base = random_hermitian(n, 9);
        let a = CMatrix::from_fn(n, n, |r, c| {
            let scale = if r == c { 1e-4 / (1 + r) as f64 } else { 10f64.powi(-(160 + ((r * 7 + c * 3) % 120) as i32)) };
            base[(r, c)] * scale
        });
        let a = a.hermitian_part();
        let vals = eigvalsh(&a).unwrap();
        assert!(vals.iter().all(|v| v.is_finite()));
        let tr: f64 = (0..n).map(|i| a[(i, i)].re).sum();
        assert!((vals.iter().sum::<f64>() - tr).abs() <= 1e-15 * tr.abs().max(1e-4));
    }

    #[test]
    fn identity_and_pauli_z() {
        assert_eq!(hermitian_eig(&CMatrix::identity(2)).unwrap().eigenvalues, vec![1.0, 1.0]);
        let z = CMatrix::from_diag(&[1.0, -1.0]);
        assert_eq!(hermitian_eig(&z).unwrap().eigenvalues, vec![-1.0, 1.0]);
    }

    #[test]
    fn pauli_y_eigenpairs() {
        let y = CMatrix::from_fn(2, 2, |r, c| match (r, c) {
            (0, 1) => C64::new(0.0, -1.0),
            (1, 0) => C64::new(0.0, 1.0),
            _ => ZERO,
        });
        let res = hermitian_eig(&y).unwrap();
        assert!((res.eigenvalues[0] + 1.0).abs() < 1e-15);
        assert!((res.eigenvalues[1] - 1.0).abs() < 1e-15);
        check_contract(&y);
    }

    #[test]
    fn random_hermitian_reconstruction() {
        for (n, seed) in [(8, 1), (8, 2), (17, 3), (40, 4)] {
            check_contract(&random_hermitian(n, seed));
        }
    }

    #[test]
    fn degenerate_spectrum() {
        // U diag(1,1,1,-2) U^H for a non-trivial unitary built from a rank-one projector.
        let u = [C64::new(0.5, 0.1), C64::new(-0.3, 0.4), C64::new(0.2, 0.0), C64::new(0.1, -0.6)];
        let nrm = super::super::vec_norm(&u);
        let u: Vec<C64> = u.iter().map(|z| z / nrm).collect();
        let a = CMatrix::identity(4).sub(&CMatrix::projector(&u).scale_real(3.0));
        check_contract(&a);
        let vals = hermitian_eig(&a).unwrap().eigenvalues;
        assert!((vals[0] + 2.0).abs() < 1e-13);
        for v in &vals[1..] {
            assert!((v - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn eigvalsh_agrees_with_jacobi() {
        for (n, seed) in [(1, 9), (2, 10), (3, 11), (8, 12), (33, 13), (64, 14)] {
            let a = random_hermitian(n, seed);
            let fast = eigvalsh(&a).unwrap();
            let slow = hermitian_eig(&a).unwrap().eigenvalues;
            for (x, y) in fast.iter().zip(&slow) {
                assert!((x - y).abs() < 1e-11 * (1.0 + a.fro_norm()), "n={n}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn eigvalsh_on_already_tridiagonal_and_diagonal() {
        let a = CMatrix::from_real_rows(&[&[2.0, 1.0, 0.0], &[1.0, 2.0, 1.0], &[0.0, 1.0, 2.0]]);
        let vals = eigvalsh(&a).unwrap();
        let s2 = 2f64.sqrt();
        for (x, y) in vals.iter().zip([2.0 - s2, 2.0, 2.0 + s2]) {
            assert!((x - y).abs() < 1e-14);
        }
        let d = CMatrix::from_diag(&[3.0, -1.0, 0.5]);
        assert_eq!(eigvalsh(&d).unwrap(), vec![-1.0, 0.5, 3.0]);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_real_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(hermitian_eig(&m), Err(LinalgError::NotHermitian { .. })));
        assert!(matches!(eigvalsh(&m), Err(LinalgError::NotHermitian { .. })));
    }

    #[test]
    fn tridiagonal_path_graph_spectrum() {
        // Path Laplacian-like matrix: eigenvalues 2 - 2cos(kπ/(n+1)).
        let n = 50;
        let (vals, vecs) = symmetric_tridiagonal_eig(&vec![2.0; n], &vec![-1.0; n - 1]).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-12);
        }
        for (k, vec) in vecs.iter().enumerate() {
            let norm: f64 = vec.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-12);
            // T v = λ v
            for i in 0..n {
                let mut tv = 2.0 * vec[i];
                if i > 0 {
                    tv -= vec[i - 1];
                }
                if i + 1 < n {
                    tv -= vec[i + 1];
                }
                assert!((tv - vals[k] * vec[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tridiagonal_rejects_bad_lengths() {
        assert!(symmetric_tridiagonal_eig(&[1.0, 2.0], &[]).is_err());
    }
}
