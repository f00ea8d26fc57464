//! Browser bindings for three interactive views: an ensemble relaxation
//! bundle, the boundary gap law against chain length, and the hitting-time
//! profile of the skin chain. Every export returns a JSON string.
//!
//! The `*_json` functions carry the logic and run natively as well, so they
//! are unit tested without a browser.

use mixlab::laws::{beta_a2_quantile, boundary_asymptotic_slope, boundary_gap_prediction};
use mixlab::mixing::{
    barycenter_curve, crossing_report, ensemble_sweep, population_sweep, HitSummary, PopulationSweepOptions,
    SweepOptions, TimeGrid,
};
use mixlab::models::{ChannelSpec, SkinChain};
use mixlab::states::{EnsembleKind, EnsembleSpec};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Full curves returned to the page; the rest only feed the statistics.
const SHOWN_CURVES: usize = 24;
const GRID_POINTS: usize = 90;
/// Keeps a browser tab responsive on one thread.
const MAX_DIM: usize = 256;

type DemoResult = Result<Value, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// JSON has no infinity; censored quantiles become `null`.
fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn summary_json(s: &HitSummary) -> Value {
    json!({
        "n": s.n,
        "n_censored": s.n_censored,
        "mean": finite(s.mean),
        "q10": finite(s.q10),
        "q50": finite(s.q50),
        "q90": finite(s.q90),
    })
}

fn bundle_spec(family: &str, size: usize, rate: f64) -> Result<ChannelSpec, String> {
    match family {
        "davies" => Ok(ChannelSpec::Davies { n: size, beta: 1.0, omega: 1.0 }),
        "pauli_boundary" => Ok(ChannelSpec::PauliBoundary { l: size, delta: rate, gamma: 4.0 }),
        "protected" => Ok(ChannelSpec::ProtectedSector { d: size, eta: rate }),
        other => Err(format!("unknown family `{other}`")),
    }
}

/// Haar-random relaxation curves of one model with their mean, the
/// barycenter curve and the hitting-time quantiles at `epsilon`.
pub fn relaxation_bundle_json(
    family: &str,
    size: usize,
    rate: f64,
    n_samples: usize,
    epsilon: f64,
    t_max: f64,
    seed: u64,
) -> DemoResult {
    let model = bundle_spec(family, size, rate)?.build().map_err(err)?;
    if model.dim() > MAX_DIM {
        return Err(format!("dimension {} exceeds the demo limit {MAX_DIM}", model.dim()));
    }
    let grid = TimeGrid::log_spaced(1e-2, t_max, GRID_POINTS).map_err(err)?;
    let ensemble = EnsembleSpec::new(EnsembleKind::HaarPure { d: model.dim() }, seed).map_err(err)?;
    let sweep = ensemble_sweep(&model, &ensemble, &grid, &SweepOptions::full(n_samples, vec![epsilon])).map_err(err)?;
    let mean = sweep.mean_curve.as_ref().ok_or("sweep kept no mean curve")?;
    let bary = barycenter_curve(&model, &grid).map_err(err)?;
    let t_star = crossing_report(mean, epsilon).ok().map(|r| r.t_star);
    Ok(json!({
        "family": family,
        "dim": model.dim(),
        "times": grid.times(),
        "curves": sweep.curves.iter().take(SHOWN_CURVES).map(|c| &c.distances).collect::<Vec<_>>(),
        "mean": mean.distances,
        "barycenter": bary.distances,
        "hits": summary_json(&sweep.sets[0].summary),
        "t_star": t_star.map_or(Value::Null, finite),
    }))
}

/// Predicted typical-to-worst gap of the boundary chain for `L = 1..=l_max`
/// next to its large-`L` asymptote.
pub fn boundary_gap_law_json(l_max: u32, delta_rate: f64, level: f64) -> DemoResult {
    if !(1..=40).contains(&l_max) {
        return Err(format!("l_max must lie in 1..=40, got {l_max}"));
    }
    let slope = boundary_asymptotic_slope(delta_rate);
    let rows = (1..=l_max)
        .map(|l| {
            Ok(json!({
                "L": l,
                "a2_quantile": beta_a2_quantile(l, level).map_err(err)?,
                "gap": boundary_gap_prediction(delta_rate, l, level).map_err(err)?,
                "asymptote": slope * l as f64,
            }))
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(json!({ "slope": slope, "rows": rows }))
}

/// Hitting time of every basis site of the skin chain with the Haar
/// typical quantiles at one threshold.
pub fn skin_profile_json(
    l: usize,
    gamma_r: f64,
    gamma_l: f64,
    epsilon: f64,
    n_samples: usize,
    seed: u64,
) -> DemoResult {
    if l > 2048 {
        return Err(format!("chain length {l} exceeds the demo limit 2048"));
    }
    let chain = SkinChain::new(l, gamma_r, gamma_l, 1.0).map_err(err)?;
    let opts = PopulationSweepOptions {
        seed,
        n_samples,
        epsilons: vec![epsilon],
        dt: 0.05,
        t_max: 40.0 * l as f64 / (gamma_r - gamma_l).abs().max(1e-3),
        curve_samples: 0,
        track_mean: false,
    };
    let sweep = population_sweep(&chain, &opts).map_err(err)?;
    let (worst_site, worst) = sweep.worst[0];
    Ok(json!({
        "sites": sweep.basis_hits[0].iter().map(|h| finite(h.or_infinity())).collect::<Vec<_>>(),
        "worst_site": worst_site,
        "t_worst": finite(worst.or_infinity()),
        "typical": summary_json(&sweep.sets[0].summary),
    }))
}

fn to_js(r: DemoResult) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = relaxationBundle)]
pub fn relaxation_bundle(
    family: &str,
    size: usize,
    rate: f64,
    n_samples: usize,
    epsilon: f64,
    t_max: f64,
    seed: u64,
) -> Result<String, JsError> {
    to_js(relaxation_bundle_json(family, size, rate, n_samples, epsilon, t_max, seed))
}

#[wasm_bindgen(js_name = boundaryGapLaw)]
pub fn boundary_gap_law(l_max: u32, delta_rate: f64, level: f64) -> Result<String, JsError> {
    to_js(boundary_gap_law_json(l_max, delta_rate, level))
}

#[wasm_bindgen(js_name = skinProfile)]
pub fn skin_profile(
    l: usize,
    gamma_r: f64,
    gamma_l: f64,
    epsilon: f64,
    n_samples: usize,
    seed: u64,
) -> Result<String, JsError> {
    to_js(skin_profile_json(l, gamma_r, gamma_l, epsilon, n_samples, seed))
}
