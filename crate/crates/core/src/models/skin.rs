use super::{check_positive, check_time, ModelError, Result, SlowMode};
use crate::linalg::{matrix_exp, symmetric_tridiagonal_eig, CMatrix, C64};

const SUM_TOL: f64 = 1e-12;
const NEG_TOL: f64 = -1e-14;

/// Probability vector on the sites of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    p: Vec<f64>,
}

impl PopulationState {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(ModelError::InvalidParameter(format!("populations sum to {sum}, expected 1")));
        }
        if let Some(min) = p.iter().copied().reduce(f64::min) {
            if min < NEG_TOL {
                return Err(ModelError::InvalidParameter(format!("population {min} is negative")));
            }
        }
        Ok(Self { p })
    }

    pub fn basis(l: usize, x: usize) -> Self {
        let mut p = vec![0.0; l];
        p[x] = 1.0;
        Self { p }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn l1_distance(&self, other: &PopulationState) -> f64 {
        l1_distance(&self.p, &other.p)
    }
}

pub(crate) fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Open chain generator: `Q[x+1][x] = λγ_R`, `Q[x−1][x] = λγ_L`, columns sum to zero.
pub fn skin_generator(l: usize, gamma_r: f64, gamma_l: f64, lambda: f64) -> CMatrix {
    let (right, left) = (lambda * gamma_r, lambda * gamma_l);
    let mut q = CMatrix::zeros(l, l);
    for x in 0..l {
        if x + 1 < l {
            q[(x + 1, x)] = C64::new(right, 0.0);
            q[(x, x)] -= right;
        }
        if x > 0 {
            q[(x - 1, x)] = C64::new(left, 0.0);
            q[(x, x)] -= left;
        }
    }
    q
}

/// Biased hopping chain in the population sector.
#[derive(Debug, Clone)]
pub struct SkinChain {
    l: usize,
    right: f64,
    left: f64,
    q: CMatrix,
    stationary: Vec<f64>,
}

impl SkinChain {
    pub fn new(l: usize, gamma_r: f64, gamma_l: f64, lambda: f64) -> Result<Self> {
        if l < 2 {
            return Err(ModelError::InvalidParameter(format!("skin chain needs L >= 2, got {l}")));
        }
        check_positive("gamma_r", gamma_r)?;
        check_positive("gamma_l", gamma_l)?;
        check_positive("lambda", lambda)?;
        let (right, left) = (lambda * gamma_r, lambda * gamma_l);
        // π_x ∝ (γ_R/γ_L)^x, referenced to the larger end to avoid overflow.
        let log_ratio = (gamma_r / gamma_l).ln();
        let top = if log_ratio >= 0.0 { (l - 1) as f64 } else { 0.0 };
        let w: Vec<f64> = (0..l).map(|x| ((x as f64 - top) * log_ratio).exp()).collect();
        let z: f64 = w.iter().sum();
        let stationary = w.into_iter().map(|x| x / z).collect();
        Ok(Self { l, right, left, q: skin_generator(l, gamma_r, gamma_l, lambda), stationary })
    }

    pub fn len(&self) -> usize {
        self.l
    }

    pub fn is_empty(&self) -> bool {
        self.l == 0
    }

    pub fn generator(&self) -> &CMatrix {
        &self.q
    }

    pub fn stationary(&self) -> PopulationState {
        PopulationState { p: self.stationary.clone() }
    }

    pub fn stationary_slice(&self) -> &[f64] {
        &self.stationary
    }

    /// Diagonal and off-diagonal of `Π^{-1/2} Q Π^{1/2}`, which is symmetric.
    fn symmetrized(&self) -> (Vec<f64>, Vec<f64>) {
        let diag = (0..self.l).map(|x| self.q[(x, x)].re).collect();
        let off = vec![(self.right * self.left).sqrt(); self.l - 1];
        (diag, off)
    }

    /// Generator spectrum, descending (the first entry is the stationary 0).
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        let (diag, off) = self.symmetrized();
        let (mut vals, _) = symmetric_tridiagonal_eig(&diag, &off)?;
        vals.reverse();
        Ok(vals)
    }

    /// Spectral gap `γ₂ = −λ₂` of the generator.
    pub fn gap(&self) -> Result<f64> {
        Ok(-self.spectrum()?[1])
    }

    /// Slow eigenpair as diagonal operators: `R2 = Π^{1/2} v`, `L2 = Π^{-1/2} v`.
    pub fn slow_mode(&self) -> Result<SlowMode> {
        let (diag, off) = self.symmetrized();
        let (vals, vecs) = symmetric_tridiagonal_eig(&diag, &off)?;
        let idx = self.l - 2;
        let v = &vecs[idx];
        let sqrt_pi: Vec<f64> = self.stationary.iter().map(|p| p.sqrt()).collect();
        let mut r: Vec<f64> = v.iter().zip(&sqrt_pi).map(|(a, s)| a * s).collect();
        let mut lv: Vec<f64> = v.iter().zip(&sqrt_pi).map(|(a, s)| a / s).collect();
        let norm: f64 = r.iter().map(|x| x.abs()).sum();
        let sign = if r[self.l - 1] < 0.0 { -1.0 } else { 1.0 };
        for x in &mut r {
            *x *= sign / norm;
        }
        for x in &mut lv {
            *x *= sign * norm;
        }
        Ok(SlowMode { l2: CMatrix::from_diag(&lv), r2: CMatrix::from_diag(&r), gamma2: -vals[idx] })
    }

    /// `e^{tQ}` as a real row-major matrix.
    pub fn propagator(&self, t: f64) -> Result<Vec<f64>> {
        check_time(t)?;
        let e = matrix_exp(&self.q, t)?;
        Ok(e.as_slice().iter().map(|z| z.re).collect())
    }

    pub fn evolve(&self, p: &PopulationState, t: f64) -> Result<PopulationState> {
        if p.len() != self.l {
            return Err(ModelError::DimensionMismatch { expected: self.l, got: p.len() });
        }
        let prop = self.propagator(t)?;
        Ok(PopulationState { p: apply_real(&prop, self.l, p.as_slice()) })
    }

    /// `‖e^{tQ} p − π‖₁`
    pub fn distance(&self, p: &[f64], t: f64) -> Result<f64> {
        let prop = self.propagator(t)?;
        Ok(l1_distance(&apply_real(&prop, self.l, p), &self.stationary))
    }
}

/// Row-major `n x n` real matrix times vector.
pub(crate) fn apply_real(m: &[f64], n: usize, v: &[f64]) -> Vec<f64> {
    (0..n).map(|r| m[r * n..(r + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// `e^{tQ} p` for an arbitrary classical generator `Q`.
pub fn skin_evolve(p: &PopulationState, t: f64, q: &CMatrix) -> Result<PopulationState> {
    check_time(t)?;
    if q.rows() != p.len() || q.cols() != p.len() {
        return Err(ModelError::DimensionMismatch { expected: q.rows(), got: p.len() });
    }
    let e = matrix_exp(q, t)?;
    let re: Vec<f64> = e.as_slice().iter().map(|z| z.re).collect();
    Ok(PopulationState { p: apply_real(&re, p.len(), p.as_slice()) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::trace_norm;

    #[test]
    fn generator_columns_sum_to_zero() {
        let q = skin_generator(7, 1.6, 0.4, 1.3);
        for c in 0..7 {
            let s: f64 = (0..7).map(|r| q[(r, c)].re).sum();
            assert_eq!(s, 0.0);
        }
        assert_eq!(q[(3, 2)].re, 1.6 * 1.3);
        assert_eq!(q[(1, 2)].re, 0.4 * 1.3);
        assert_eq!(q[(0, 6)].re, 0.0);
    }

    #[test]
    fn stationary_is_geometric_and_fixed() {
        let chain = SkinChain::new(10, 1.6, 0.4, 1.0).unwrap();
        let pi = chain.stationary();
        for x in 1..10 {
            assert!((pi.as_slice()[x] / pi.as_slice()[x - 1] - 4.0).abs() < 1e-12);
        }
        let q = chain.generator();
        let qpi = q.matvec(&pi.as_slice().iter().map(|&p| C64::new(p, 0.0)).collect::<Vec<_>>());
        assert!(qpi.iter().all(|z| z.norm() < 1e-15));
        let later = chain.evolve(&pi, 5.0).unwrap();
        assert!(later.l1_distance(&pi) < 1e-13);
    }

    #[test]
    fn evolve_matches_exponential_oracle() {
        let chain = SkinChain::new(3, 1.6, 0.4, 1.0).unwrap();
        let p = PopulationState::new(vec![0.5, 0.3, 0.2]).unwrap();
        assert_eq!(chain.evolve(&p, 0.0).unwrap(), p);
        let got = chain.evolve(&p, 1.0).unwrap();
        let oracle = skin_evolve(&p, 1.0, chain.generator()).unwrap();
        assert!(got.l1_distance(&oracle) < 1e-14);
        let s: f64 = got.as_slice().iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn slow_mode_is_an_eigenpair() {
        let chain = SkinChain::new(12, 1.6, 0.4, 1.0).unwrap();
        let mode = chain.slow_mode().unwrap();
        assert!((mode.gamma2 - chain.gap().unwrap()).abs() < 1e-14);
        assert!((trace_norm(&mode.r2).unwrap() - 1.0).abs() < 1e-12);
        assert!((mode.l2.hs_inner(&mode.r2).re - 1.0).abs() < 1e-10);
        let r: Vec<f64> = mode.r2.diag().iter().map(|z| z.re).collect();
        let t = 0.7;
        let evolved = apply_real(&chain.propagator(t).unwrap(), 12, &r);
        for (a, b) in evolved.iter().zip(&r) {
            assert!((a - b * (-mode.gamma2 * t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn population_state_validation() {
        assert!(PopulationState::new(vec![0.5, 0.6]).is_err());
        assert!(PopulationState::new(vec![1.1, -0.1]).is_err());
        assert!(PopulationState::new(vec![0.25; 4]).is_ok());
    }

    #[test]
    fn spectrum_top_is_zero() {
        let chain = SkinChain::new(40, 1.6, 0.4, 1.0).unwrap();
        let spec = chain.spectrum().unwrap();
        assert!(spec[0].abs() < 1e-12);
        assert!(spec[1] < 0.0);
    }
}
