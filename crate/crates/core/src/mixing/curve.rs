use super::{MixingError, Result};

/// Below this a distance is treated as zero and interpolation turns linear.
pub const LOG_FLOOR: f64 = 1e-14;

/// Strictly increasing sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(MixingError::InvalidGrid(format!("need at least 2 points, got {}", times.len())));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(MixingError::InvalidGrid("times must be finite and nonnegative".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MixingError::InvalidGrid("times must be strictly increasing".into()));
        }
        Ok(Self { times })
    }

    /// `n` points log-spaced on `[t_min, t_max]`, endpoints included.
    pub fn log_spaced(t_min: f64, t_max: f64, n: usize) -> Result<Self> {
        if !(t_min > 0.0) || !(t_max > t_min) || n < 2 {
            return Err(MixingError::InvalidGrid(format!(
                "log grid needs 0 < t_min < t_max and n >= 2, got [{t_min}, {t_max}] with {n} points"
            )));
        }
        let (a, b) = (t_min.ln(), t_max.ln());
        let step = (b - a) / (n - 1) as f64;
        let mut times: Vec<f64> = (0..n).map(|k| (a + step * k as f64).exp()).collect();
        times[0] = t_min;
        times[n - 1] = t_max;
        Self::new(times)
    }

    /// `n` points evenly spaced on `[t_min, t_max]`, endpoints included.
    pub fn linear(t_min: f64, t_max: f64, n: usize) -> Result<Self> {
        if !(t_min >= 0.0) || !(t_max > t_min) || n < 2 {
            return Err(MixingError::InvalidGrid(format!(
                "linear grid needs 0 <= t_min < t_max and n >= 2, got [{t_min}, {t_max}] with {n} points"
            )));
        }
        let step = (t_max - t_min) / (n - 1) as f64;
        let mut times: Vec<f64> = (0..n).map(|k| t_min + step * k as f64).collect();
        times[n - 1] = t_max;
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.times[0]
    }

    pub fn last(&self) -> f64 {
        self.times[self.times.len() - 1]
    }
}

/// Threshold crossing time, or censoring when the curve never reaches the
/// threshold on its grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HitTime {
    Hit(f64),
    Censored,
}

impl HitTime {
    pub fn value(self) -> Option<f64> {
        match self {
            HitTime::Hit(t) => Some(t),
            HitTime::Censored => None,
        }
    }

    pub fn is_censored(self) -> bool {
        matches!(self, HitTime::Censored)
    }

    /// Censored times sort last.
    pub fn or_infinity(self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }
}

/// Distances `g_t` on a grid for one initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationCurve {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
}

impl RelaxationCurve {
    pub fn new(times: Vec<f64>, distances: Vec<f64>) -> Result<Self> {
        TimeGrid::new(times.clone())?;
        if distances.len() != times.len() {
            return Err(MixingError::InvalidGrid(format!(
                "{} times but {} distances",
                times.len(),
                distances.len()
            )));
        }
        Ok(Self { times, distances })
    }

    /// Largest increase between consecutive points (0 for a nonincreasing curve).
    pub fn max_increase(&self) -> f64 {
        self.distances.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn hitting_time(&self, epsilon: f64) -> Result<HitTime> {
        hitting_time(self, epsilon)
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 2.0 {
        Ok(())
    } else {
        Err(MixingError::InvalidEpsilon(epsilon))
    }
}

/// Crossing time inside the bracket `(t0, g0 > ε)`, `(t1, g1 <= ε)`:
/// log-linear in `g`, linear when either value is below [`LOG_FLOOR`].
pub fn interpolate_crossing(t0: f64, g0: f64, t1: f64, g1: f64, epsilon: f64) -> f64 {
    if g0 <= LOG_FLOOR || g1 <= LOG_FLOOR {
        if g0 == g1 {
            return t1;
        }
        return t0 + (t1 - t0) * (g0 - epsilon) / (g0 - g1);
    }
    let (l0, l1, le) = (g0.ln(), g1.ln(), epsilon.ln());
    if l0 == l1 {
        return t1;
    }
    t0 + (t1 - t0) * (l0 - le) / (l0 - l1)
}

/// First time the curve reaches `epsilon`.
pub fn hitting_time(curve: &RelaxationCurve, epsilon: f64) -> Result<HitTime> {
    check_epsilon(epsilon)?;
    let (t, g) = (&curve.times, &curve.distances);
    if g[0] <= epsilon {
        return Ok(HitTime::Hit(t[0]));
    }
    match g.iter().position(|&x| x <= epsilon) {
        None => Ok(HitTime::Censored),
        Some(k) => Ok(HitTime::Hit(interpolate_crossing(t[k - 1], g[k - 1], t[k], g[k], epsilon))),
    }
}

/// Same result as [`hitting_time`] on the full curve for nonincreasing
/// curves, using `O(log n)` evaluations of `g` by bisection over the grid.
pub fn hitting_time_bisect<F>(grid: &TimeGrid, epsilon: f64, mut g: F) -> Result<HitTime>
where
    F: FnMut(f64) -> Result<f64>,
{
    check_epsilon(epsilon)?;
    let t = grid.times();
    let n = t.len();
    let g_first = g(t[0])?;
    if g_first <= epsilon {
        return Ok(HitTime::Hit(t[0]));
    }
    let g_last = g(t[n - 1])?;
    if g_last > epsilon {
        return Ok(HitTime::Censored);
    }
    let (mut lo, mut hi) = (0usize, n - 1);
    let (mut g_lo, mut g_hi) = (g_first, g_last);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let gm = g(t[mid])?;
        if gm <= epsilon {
            hi = mid;
            g_hi = gm;
        } else {
            lo = mid;
            g_lo = gm;
        }
    }
    Ok(HitTime::Hit(interpolate_crossing(t[lo], g_lo, t[hi], g_hi, epsilon)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_curve(a: f64, gamma: f64, grid: &TimeGrid) -> RelaxationCurve {
        let d = grid.times().iter().map(|t| a * (-gamma * t).exp()).collect();
        RelaxationCurve::new(grid.times().to_vec(), d).unwrap()
    }

    #[test]
    fn grids() {
        let g = TimeGrid::log_spaced(1e-3, 6.0, 72).unwrap();
        assert_eq!(g.len(), 72);
        assert_eq!(g.first(), 1e-3);
        assert_eq!(g.last(), 6.0);
        let ratios: Vec<f64> = g.times().windows(2).map(|w| w[1] / w[0]).collect();
        assert!(ratios.iter().all(|r| (r - ratios[0]).abs() < 1e-12));
        assert!(TimeGrid::log_spaced(0.0, 1.0, 5).is_err());
        assert!(TimeGrid::new(vec![1.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![1.0]).is_err());
        let lin = TimeGrid::linear(0.0, 2.0, 5).unwrap();
        assert_eq!(lin.times(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn starts_below_threshold() {
        let grid = TimeGrid::log_spaced(0.01, 10.0, 20).unwrap();
        let c = exp_curve(0.3, 1.0, &grid);
        assert_eq!(hitting_time(&c, 0.5).unwrap(), HitTime::Hit(0.01));
    }

    #[test]
    fn exponential_crossing_is_exact() {
        let grid = TimeGrid::log_spaced(1e-3, 20.0, 50).unwrap();
        let (a, gamma, eps) = (1.7, 0.8, 0.05);
        let c = exp_curve(a, gamma, &grid);
        let t = hitting_time(&c, eps).unwrap().value().unwrap();
        assert!((t - (a / eps).ln() / gamma).abs() < 1e-6);
        let tb = hitting_time_bisect(&grid, eps, |t| Ok(a * (-gamma * t).exp())).unwrap();
        assert_eq!(tb, HitTime::Hit(t));
    }

    #[test]
    fn never_crosses_is_censored() {
        let grid = TimeGrid::linear(0.0, 1.0, 11).unwrap();
        let c = exp_curve(1.0, 0.1, &grid);
        assert_eq!(hitting_time(&c, 0.5).unwrap(), HitTime::Censored);
        assert_eq!(hitting_time_bisect(&grid, 0.5, |t| Ok((-0.1 * t).exp())).unwrap(), HitTime::Censored);
    }

    #[test]
    fn linear_fallback_near_zero() {
        let c = RelaxationCurve::new(vec![0.0, 1.0], vec![0.4, 0.0]).unwrap();
        let t = hitting_time(&c, 0.1).unwrap().value().unwrap();
        assert!((t - 0.75).abs() < 1e-15);
    }

    #[test]
    fn epsilon_domain() {
        let c = RelaxationCurve::new(vec![0.0, 1.0], vec![0.4, 0.0]).unwrap();
        assert!(hitting_time(&c, 0.0).is_err());
        assert!(hitting_time(&c, 2.0).is_err());
    }

    #[test]
    fn bisection_counts_evaluations() {
        let grid = TimeGrid::log_spaced(1e-3, 100.0, 1025).unwrap();
        let mut calls = 0;
        let hit = hitting_time_bisect(&grid, 0.2, |t| {
            calls += 1;
            Ok(2.0 * (-t).exp())
        })
        .unwrap();
        assert!(hit.value().is_some());
        assert!(calls <= 2 + 11);
    }
}
