use super::{LawError, Result};

const CF_TOL: f64 = 1e-15;
const CF_MAX_ITER: usize = 100_000;
const TINY: f64 = 1e-300;

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (k, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + k as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_TOL {
            return Ok(h);
        }
    }
    Err(LawError::NoConvergence(format!("incomplete beta continued fraction at a={a}, b={b}, x={x}")))
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(LawError::Domain(format!("beta parameters must be positive, got a={a}, b={b}")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(LawError::Domain(format!("x must lie in [0, 1], got {x}")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_cf(a, b, x)? / a)
    } else {
        Ok(1.0 - front * beta_cf(b, a, 1.0 - x)? / b)
    }
}

/// Inverse CDF of `Beta(a, b)` by bisection on `[0, 1]`.
pub fn beta_quantile(a: f64, b: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(LawError::Domain(format!("probability level must lie in (0, 1), got {p}")));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if regularized_incomplete_beta(a, b, mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Level-`level` quantile of `|a₂| = |2B − 1|` with
/// `B ~ Beta(2^{L−1}, 2^{L−1})`.
pub fn beta_a2_quantile(l: u32, level: f64) -> Result<f64> {
    if l == 0 {
        return Err(LawError::Domain("L must be at least 1".into()));
    }
    if l > 40 {
        return Err(LawError::Domain(format!("L = {l} is beyond the supported range (at most 40)")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(LawError::Domain(format!("level must lie in (0, 1), got {level}")));
    }
    let a = 2f64.powi(l as i32 - 1);
    let qb = beta_quantile(a, a, 0.5 * (1.0 + level))?;
    Ok((2.0 * (qb - 0.5)).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_at_integers() {
        let mut fact = 1.0f64;
        for n in 1..30 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12 * fact.ln().max(1.0));
            fact *= n as f64;
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, b) = 1 − (1−x)^b and I_x(a, 1) = x^a.
        for &x in &[0.1, 0.37, 0.5, 0.9] {
            assert!((regularized_incomplete_beta(1.0, 3.0, x).unwrap() - (1.0 - (1.0 - x).powi(3))).abs() < 1e-13);
            assert!((regularized_incomplete_beta(4.0, 1.0, x).unwrap() - x.powi(4)).abs() < 1e-13);
        }
        assert!((regularized_incomplete_beta(32.0, 32.0, 0.5).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn matches_statrs() {
        use statrs::distribution::{Beta, ContinuousCDF};
        for &(a, b) in &[(2.0, 2.0), (8.0, 8.0), (32.0, 32.0), (0.7, 3.0), (512.0, 512.0)] {
            let dist = Beta::new(a, b).unwrap();
            for &x in &[0.05, 0.3, 0.48, 0.5, 0.61, 0.95] {
                let ours = regularized_incomplete_beta(a, b, x).unwrap();
                assert!((ours - dist.cdf(x)).abs() < 1e-10, "a={a} b={b} x={x}");
            }
        }
    }

    #[test]
    fn a2_quantile_limits() {
        assert!((beta_a2_quantile(1, 0.9).unwrap() - 0.9).abs() < 1e-12);
        assert!(beta_a2_quantile(5, 1e-9).unwrap() < 1e-6);
        let q: Vec<f64> = (1..=8).map(|l| beta_a2_quantile(l, 0.9).unwrap()).collect();
        assert!(q.windows(2).all(|w| w[1] < w[0]));
        assert!(beta_a2_quantile(0, 0.9).is_err());
        assert!(beta_a2_quantile(3, 1.0).is_err());
    }
}
