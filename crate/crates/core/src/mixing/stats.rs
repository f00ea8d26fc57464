use serde::Serialize;

use super::{HitTime, MixingError, Result};

/// Type-7 quantile (linear interpolation of order statistics) of `sorted`,
/// which must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of an empty sample");
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    if frac == 0.0 || sorted[lo] == sorted[hi] {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Type-7 quantile of an unsorted sample.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

/// Mean and population standard deviation (divisor `n`).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    if values.iter().all(|&x| x == values[0]) {
        return (values[0], 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Standard error of a sample mean, `s / √n` with the unbiased `s`.
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let (mean, _) = mean_std(values);
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Summary of hitting times. Censored samples count as `+∞` in the quantiles
/// and are excluded from the mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HitSummary {
    pub n: usize,
    pub n_censored: usize,
    pub mean: f64,
    pub std: f64,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

impl HitSummary {
    pub fn from_hits(hits: &[HitTime]) -> Self {
        let observed: Vec<f64> = hits.iter().filter_map(|h| h.value()).collect();
        let mut all: Vec<f64> = hits.iter().map(|h| h.or_infinity()).collect();
        all.sort_by(f64::total_cmp);
        let (mean, std) = mean_std(&observed);
        let q = |p| if all.is_empty() { f64::NAN } else { quantile_sorted(&all, p) };
        Self {
            n: hits.len(),
            n_censored: hits.len() - observed.len(),
            mean,
            std,
            q10: q(0.1),
            q50: q(0.5),
            q90: q(0.9),
        }
    }

    /// `q90 − q10`
    pub fn width(&self) -> f64 {
        self.q90 - self.q10
    }

    pub fn quantile_of(hits: &[HitTime], p: f64) -> f64 {
        let all: Vec<f64> = hits.iter().map(|h| h.or_infinity()).collect();
        quantile(&all, p)
    }
}

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

pub fn fit_linear(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(MixingError::DegenerateFit(format!("{} x values but {} y values", x.len(), y.len())));
    }
    let n = x.len() as f64;
    if x.len() < 2 {
        return Err(MixingError::DegenerateFit("need at least two points".into()));
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(MixingError::DegenerateFit("all x values coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(LinearFit { slope, intercept, r2 })
}
