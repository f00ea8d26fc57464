//! Quantile scales for the slow overlap, one-mode gap bounds, transfer
//! constants and window heuristics.
//!
//! Formulas that carry an unknown absolute constant take it as an explicit
//! argument (`c2`); callers must echo it next to any value derived from it.

mod beta;
mod transfer;

pub use beta::{beta_a2_quantile, beta_quantile, ln_gamma, regularized_incomplete_beta};
pub use transfer::{
    design_variance_defect, ensemble_tail_bound, exact_design_cp, gell_mann_basis, induced_cp, psi_sq, xi_sq,
    xi_sq_with_basis, TransferConstants, MAX_TRANSFER_DIM,
};

use serde::Serialize;
use thiserror::Error;

use crate::linalg::hermitian_op_norm;
use crate::mixing::RelaxationCurve;
use crate::models::{ModelError, SlowMode};
use crate::states::InitialState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LawError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("dimension {d} exceeds the limit {limit}")]
    TooLarge { d: usize, limit: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, LawError>;

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(LawError::Domain(format!("δ must lie in (0, 1), got {delta}")))
    }
}

fn check_pos(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(LawError::Domain(format!("{name} must be positive and finite, got {x}")))
    }
}

/// `a₂ = Tr(L₂† ρ₀)`.
pub fn slow_overlap(state: &InitialState, mode: &SlowMode) -> Result<f64> {
    let d = mode.l2.rows();
    if state.dim() != d {
        return Err(ModelError::DimensionMismatch { expected: d, got: state.dim() }.into());
    }
    Ok(match state {
        InitialState::Pure(p) => mode.overlap_pure(p.amplitudes()),
        InitialState::Mixed(r) => mode.overlap(r.matrix()),
    })
}

/// Haar-ensemble moments and norms of `L₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapStats {
    pub m2: f64,
    pub v2: f64,
    pub op_norm_l2: f64,
    pub hs_norm_l2: f64,
    pub empirical_quantile: Option<f64>,
}

impl OverlapStats {
    /// `m₂ = Tr L₂/d`, and `v₂` the variance of `a₂` over Haar pure states.
    pub fn from_mode(mode: &SlowMode) -> Result<Self> {
        let l2 = &mode.l2;
        let d = l2.rows() as f64;
        let tr = l2.trace().re;
        let hs_sq = l2.hs_inner(l2).re;
        let op = hermitian_op_norm(l2).map_err(ModelError::from)?;
        Ok(Self {
            m2: tr / d,
            v2: ((hs_sq - tr * tr / d) / (d * (d + 1.0))).max(0.0),
            op_norm_l2: op,
            hs_norm_l2: hs_sq.sqrt(),
            empirical_quantile: None,
        })
    }

    pub fn with_empirical_quantile(mut self, q: f64) -> Self {
        self.empirical_quantile = Some(q);
        self
    }
}

/// `|m₂| + ‖L₂‖∞ √(log(2/δ)/(c₂ d))`
pub fn alpha_levy(op_norm: f64, m2: f64, d: usize, delta: f64, c2: f64) -> Result<f64> {
    check_delta(delta)?;
    check_pos("c2", c2)?;
    Ok(m2.abs() + op_norm * ((2.0 / delta).ln() / (c2 * d as f64)).sqrt())
}

/// `|m₂| + √(v₂/δ)`
pub fn alpha_moment(m2: f64, v2: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(v2 >= 0.0) {
        return Err(LawError::Domain(format!("v2 must be nonnegative, got {v2}")));
    }
    Ok(m2.abs() + (v2 / delta).sqrt())
}

/// `C_ξ² ‖L₂‖∞/(δ L)` with `C_ξ = 1/(1 − e^{−1/(2ξ)})`.
pub fn alpha_skin(xi: f64, l: usize, delta: f64, op_norm: f64) -> Result<f64> {
    check_delta(delta)?;
    check_pos("xi", xi)?;
    let c = 1.0 / (1.0 - (-1.0 / (2.0 * xi)).exp());
    Ok(c * c * op_norm / (delta * l as f64))
}

/// `‖A_B‖∞ √(log(2/δ)/(c₂ q^L))`
pub fn alpha_boundary(opnorm_ab: f64, q: usize, l: usize, delta: f64, c2: f64) -> Result<f64> {
    check_delta(delta)?;
    check_pos("c2", c2)?;
    let d = (q as f64).powi(l as i32);
    Ok(opnorm_ab * ((2.0 / delta).ln() / (c2 * d)).sqrt())
}

/// `|m₂| + √((Tr L₂² − (Tr L₂)²/d)/(δ d (d d_B + 1)))`
pub fn alpha_induced(tr_l2: f64, tr_l2sq: f64, d: usize, d_b: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let d = d as f64;
    let num = (tr_l2sq - tr_l2 * tr_l2 / d).max(0.0);
    Ok((tr_l2 / d).abs() + (num / (delta * d * (d * d_b as f64 + 1.0))).sqrt())
}

/// `|m₀| + ε₂‖L₂‖∞ + √((v₀ + 3ε₂‖L₂‖∞²)/δ)`
pub fn alpha_design_defect(m0: f64, v0: f64, op_norm: f64, eps2: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(eps2 >= 0.0) || !(v0 >= 0.0) {
        return Err(LawError::Domain(format!("need v0 >= 0 and ε₂ >= 0; got {v0}, {eps2}")));
    }
    Ok(m0.abs() + eps2 * op_norm + ((v0 + 3.0 * eps2 * op_norm * op_norm) / delta).sqrt())
}

/// `√((D² − 1)/(δ (D N + 1)))`
pub fn alpha_logical(d_log: usize, n: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let (dl, n) = (d_log as f64, n as f64);
    Ok(((dl * dl - 1.0) / (delta * (dl * n + 1.0))).sqrt())
}

/// One-mode crossing bounds and the ε-free gap bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapPrediction {
    pub gamma2: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub t_worst_lb: f64,
    pub t_typ_ub: f64,
    pub gap_lb: f64,
    /// False when `α ≥ ‖L₂‖∞`-scale makes `gap_lb ≤ 0`.
    pub informative: bool,
}

pub fn one_mode_bounds(gamma2: f64, kappa: f64, op_norm: f64, alpha: f64, epsilon: f64) -> Result<GapPrediction> {
    check_pos("gamma2", gamma2)?;
    check_pos("alpha", alpha)?;
    check_pos("epsilon", epsilon)?;
    check_pos("op_norm", op_norm)?;
    if !(0.0..1.0).contains(&kappa) {
        return Err(LawError::Domain(format!("κ must lie in [0, 1), got {kappa}")));
    }
    let t_worst_lb = ((1.0 - kappa) * op_norm / epsilon).ln() / gamma2;
    let t_typ_ub = ((1.0 + kappa) * alpha / epsilon).ln() / gamma2;
    let gap_lb = ((1.0 - kappa) * op_norm / ((1.0 + kappa) * alpha)).ln() / gamma2;
    Ok(GapPrediction { gamma2, kappa, alpha, t_worst_lb, t_typ_ub, gap_lb, informative: gap_lb > 0.0 })
}

/// `(1/Δ) log(1/q_level(|a₂|))` for the Beta law of a boundary qubit on `L` sites.
pub fn boundary_gap_prediction(delta_rate: f64, l: u32, level: f64) -> Result<f64> {
    check_pos("delta", delta_rate)?;
    Ok(-(beta_a2_quantile(l, level)?).ln() / delta_rate)
}

/// Large-`L` slope `log 2/(2Δ)` of [`boundary_gap_prediction`].
pub fn boundary_asymptotic_slope(delta_rate: f64) -> f64 {
    std::f64::consts::LN_2 / (2.0 * delta_rate)
}

/// `V/(ε γ₂)`; a heuristic window width, not a bound.
pub fn window_estimate(v_cross: f64, epsilon: f64, gamma2: f64) -> Result<f64> {
    check_pos("v_cross", v_cross)?;
    check_pos("epsilon", epsilon)?;
    check_pos("gamma2", gamma2)?;
    Ok(v_cross / (epsilon * gamma2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    /// `γ₂ ~ L^{−α}`: window `∝ L^{α − 1/2}`.
    Poly,
    /// `γ₂ ~ e^{−κL}`: window `∝ e^{κL}/√L`.
    Exp,
}

/// Heuristic window scaling at unit threshold.
pub fn window_scaling(alpha_or_kappa: f64, l: f64, mode: WindowMode) -> Result<f64> {
    check_pos("L", l)?;
    Ok(match mode {
        WindowMode::Poly => l.powf(alpha_or_kappa - 0.5),
        WindowMode::Exp => (alpha_or_kappa * l).exp() / l.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtectedTypBound {
    /// `log(8/ε)`
    pub bound: f64,
    /// `ε ≥ 4(1 + log(1/δ))/(d − 1)`
    pub applicable: bool,
}

pub fn protected_typ_bound(d: usize, delta: f64, epsilon: f64) -> Result<ProtectedTypBound> {
    check_delta(delta)?;
    check_pos("epsilon", epsilon)?;
    if d < 2 {
        return Err(LawError::Domain(format!("d must be at least 2, got {d}")));
    }
    let threshold = 4.0 * (1.0 + (1.0 / delta).ln()) / (d as f64 - 1.0);
    Ok(ProtectedTypBound { bound: (8.0 / epsilon).ln(), applicable: epsilon >= threshold })
}

/// `4e^{−t} + 2(1 + log(1/δ))/(d − 1) · e^{−γ_S t}`, the high-probability
/// envelope of protected-model curves.
pub fn protected_distance_envelope(d: usize, delta: f64, gamma_s: f64, t: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(4.0 * (-t).exp() + 2.0 * (1.0 + (1.0 / delta).ln()) / (d as f64 - 1.0) * (-gamma_s * t).exp())
}

/// `max |g_t/(|a₂| e^{−γ₂ t}) − 1|` over grid points with `t ≥ t_from`.
/// Points where `g_t` has fallen below `floor` are skipped.
pub fn kappa_hat(curve: &RelaxationCurve, a2_abs: f64, gamma2: f64, t_from: f64, floor: f64) -> Result<f64> {
    check_pos("|a2|", a2_abs)?;
    let mut worst: Option<f64> = None;
    for (&t, &g) in curve.times.iter().zip(&curve.distances) {
        if t < t_from || g < floor {
            continue;
        }
        let r = (g / (a2_abs * (-gamma2 * t).exp()) - 1.0).abs();
        worst = Some(worst.map_or(r, |w: f64| w.max(r)));
    }
    worst.ok_or_else(|| LawError::Domain(format!("no grid points at t >= {t_from} above {floor}")))
}

/// Relative deviation from the one-mode curve at a crossing, compared with κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeCheck {
    pub ratio: f64,
    pub kappa: f64,
    pub in_regime: bool,
}

/// Evaluates `|g_t/(|a₂| e^{−γ₂ t}) − 1|` at the first grid point at or
/// after `t_cross`.
pub fn regime_guard(curve: &RelaxationCurve, a2_abs: f64, gamma2: f64, t_cross: f64, kappa: f64) -> Result<RegimeCheck> {
    check_pos("|a2|", a2_abs)?;
    let k = curve
        .times
        .iter()
        .position(|&t| t >= t_cross)
        .ok_or_else(|| LawError::Domain(format!("crossing {t_cross} lies beyond the grid")))?;
    let t = curve.times[k];
    let ratio = (curve.distances[k] / (a2_abs * (-gamma2 * t).exp()) - 1.0).abs();
    Ok(RegimeCheck { ratio, kappa, in_regime: ratio < kappa })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ChannelSpec;
    use crate::states::PureState;

    #[test]
    fn moment_scale() {
        assert!((alpha_moment(0.0, 1.0 / 9.0, 0.25).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let near_one = alpha_moment(0.2, 0.04, 1.0 - 1e-12).unwrap();
        assert!((near_one - 0.4).abs() < 1e-10);
        assert!(alpha_moment(0.0, 1.0, 0.0).is_err());
        assert!(alpha_moment(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn logical_and_defect_scales() {
        let a = alpha_logical(2, 64, 0.1).unwrap();
        assert!((a - (3.0f64 / (0.1 * 129.0)).sqrt()).abs() < 1e-15);
        let m = alpha_moment(0.1, 0.02, 0.1).unwrap();
        assert!((alpha_design_defect(0.1, 0.02, 1.0, 0.0, 0.1).unwrap() - m).abs() < 1e-15);
    }

    #[test]
    fn induced_hs_tracefree() {
        let d = 8usize;
        let hs_sq = 8.0;
        let got = alpha_induced(0.0, hs_sq, d, d, 0.1).unwrap();
        let want = hs_sq.sqrt() / (0.1 * d as f64 * ((d * d) as f64 + 1.0)).sqrt();
        assert!((got - want).abs() < 1e-15);
        // d_B = 1 reduces to the pure-state moment scale.
        let v2 = (hs_sq) / (d as f64 * (d as f64 + 1.0));
        assert!((alpha_induced(0.0, hs_sq, d, 1, 0.1).unwrap() - alpha_moment(0.0, v2, 0.1).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn levy_and_boundary_scales() {
        let b = alpha_boundary(1.0, 2, 6, 0.1, 1.0).unwrap();
        assert!((b - alpha_levy(1.0, 0.0, 64, 0.1, 1.0).unwrap()).abs() < 1e-15);
        assert!(alpha_levy(1.0, 0.0, 64, 0.1, 0.0).is_err());
        let s = alpha_skin(2.0, 10, 0.5, 1.0).unwrap();
        let c = 1.0 / (1.0 - (-0.25f64).exp());
        assert!((s - c * c / 5.0).abs() < 1e-14);
    }

    #[test]
    fn gap_bounds() {
        let g = one_mode_bounds(1.0, 0.0, 1.0, (-1.0f64).exp(), 0.01).unwrap();
        assert!((g.gap_lb - 1.0).abs() < 1e-15);
        assert!(g.informative);
        for eps in [1e-4, 1e-2, 0.3, 1.5] {
            let h = one_mode_bounds(0.5, 0.2, 1.0, 0.1, eps).unwrap();
            assert!((h.gap_lb - (0.8f64 / 0.12).ln() / 0.5).abs() < 1e-12);
            assert!((h.t_worst_lb - h.t_typ_ub - h.gap_lb).abs() < 1e-12);
        }
        let flat = one_mode_bounds(1.0, 0.1, 1.0, 1.2, 0.1).unwrap();
        assert!(!flat.informative);
        assert!(one_mode_bounds(1.0, 1.0, 1.0, 0.5, 0.1).is_err());
    }

    #[test]
    fn boundary_prediction_approaches_slope() {
        assert!((boundary_asymptotic_slope(0.25) - 1.386).abs() < 1e-3);
        let p20 = boundary_gap_prediction(0.25, 20, 0.9).unwrap();
        let p21 = boundary_gap_prediction(0.25, 21, 0.9).unwrap();
        assert!((p21 - p20 - boundary_asymptotic_slope(0.25)).abs() < 1e-3);
    }

    #[test]
    fn window_heuristics() {
        let a = window_estimate(0.3, 0.1, 0.5).unwrap();
        assert!((window_estimate(0.3, 0.1, 1.0).unwrap() - a / 2.0).abs() < 1e-15);
        assert_eq!(window_scaling(0.5, 10.0, WindowMode::Poly).unwrap(), 1.0);
        assert_eq!(window_scaling(0.5, 1000.0, WindowMode::Poly).unwrap(), 1.0);
        let e: Vec<f64> = (1..20).map(|l| window_scaling(0.3, l as f64, WindowMode::Exp).unwrap()).collect();
        assert!(e.windows(2).skip(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn protected_typ() {
        let b = protected_typ_bound(256, 0.1, 0.5).unwrap();
        assert!((b.bound - 16f64.ln()).abs() < 1e-15);
        assert!(b.applicable);
        assert!(!protected_typ_bound(8, 0.1, 0.2).unwrap().applicable);
    }

    #[test]
    fn overlap_of_boundary_basis_state() {
        let model = ChannelSpec::PauliBoundary { l: 3, delta: 0.25, gamma: 4.0 }.build().unwrap();
        let mode = model.slow_mode().unwrap();
        let zero = InitialState::Pure(PureState::basis(8, 0).unwrap());
        assert!((slow_overlap(&zero, &mode).unwrap() - 1.0).abs() < 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let c = crate::linalg::C64::new(s, 0.0);
        let mut amp = vec![crate::linalg::ZERO; 8];
        amp[0] = c;
        amp[4] = c;
        let balanced = InitialState::Pure(PureState::new(amp).unwrap());
        assert!(slow_overlap(&balanced, &mode).unwrap().abs() < 1e-15);
        let stats = OverlapStats::from_mode(&mode).unwrap();
        assert_eq!(stats.m2, 0.0);
        assert!((stats.v2 - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(stats.op_norm_l2, 1.0);
    }

    #[test]
    fn kappa_hat_of_pure_mode_is_zero() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.2).collect();
        let g = t.iter().map(|t| 0.6 * (-0.5 * t).exp()).collect();
        let c = RelaxationCurve::new(t, g).unwrap();
        assert!(kappa_hat(&c, 0.6, 0.5, 1.0, 1e-12).unwrap() < 1e-14);
        assert!(regime_guard(&c, 0.6, 0.5, 3.0, 0.1).unwrap().in_regime);
    }
}
