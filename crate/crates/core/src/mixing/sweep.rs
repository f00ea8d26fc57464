use std::collections::HashMap;

use rayon::prelude::*;

use super::curve::{check_epsilon, hitting_time, hitting_time_bisect, interpolate_crossing};
use super::stats::{mean_std, standard_error, HitSummary};
use super::{HitTime, MixingError, RelaxationCurve, Result, TimeGrid};
use crate::linalg::{hermitian_eig, CMatrix};
use crate::models::skin::{apply_real, l1_distance};
use crate::models::{Model, SkinChain};
use crate::states::{EnsembleKind, EnsembleSpec, InitialState, PureState};

/// Hitting times of one threshold over an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingSampleSet {
    pub epsilon: f64,
    pub hit_times: Vec<HitTime>,
    pub summary: HitSummary,
}

impl MixingSampleSet {
    pub fn new(epsilon: f64, hit_times: Vec<HitTime>) -> Self {
        let summary = HitSummary::from_hits(&hit_times);
        Self { epsilon, hit_times, summary }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub n_samples: usize,
    pub epsilons: Vec<f64>,
    /// Members `0..curve_samples` get full curves (and feed the mean curve);
    /// the rest get hitting times by bisection only.
    pub curve_samples: usize,
}

impl SweepOptions {
    pub fn full(n_samples: usize, epsilons: Vec<f64>) -> Self {
        Self { n_samples, epsilons, curve_samples: n_samples }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleSweep {
    pub grid: TimeGrid,
    pub sets: Vec<MixingSampleSet>,
    pub curves: Vec<RelaxationCurve>,
    /// Pointwise mean `μ̂_t` of the full curves.
    pub mean_curve: Option<RelaxationCurve>,
    /// Pointwise population standard deviation of the full curves.
    pub std_curve: Vec<f64>,
    /// Pointwise standard error of `μ̂_t`.
    pub stderr_curve: Vec<f64>,
}

fn initial_matrix(model: &Model, state: &InitialState) -> Result<CMatrix> {
    if state.dim() != model.dim() {
        return Err(MixingError::StateMismatch { model: model.dim(), state: state.dim() });
    }
    Ok(state.density().into_matrix())
}

/// `g_t` on each grid point.
pub fn relaxation_curve(model: &Model, initial: &InitialState, grid: &TimeGrid) -> Result<RelaxationCurve> {
    let distances = match model {
        Model::Quantum(q) => {
            let rho = initial_matrix(model, initial)?;
            grid.times().iter().map(|&t| q.distance(&rho, t)).collect::<std::result::Result<Vec<_>, _>>()?
        }
        Model::Population(chain) => {
            if initial.dim() != chain.len() {
                return Err(MixingError::StateMismatch { model: chain.len(), state: initial.dim() });
            }
            let p = initial.populations();
            grid.times().iter().map(|&t| chain.distance(&p, t)).collect::<std::result::Result<Vec<_>, _>>()?
        }
    };
    RelaxationCurve::new(grid.times().to_vec(), distances)
}

/// Distance evaluator for one initial state, memoized by time.
fn distance_fn<'a>(model: &'a Model, initial: &InitialState) -> Result<impl FnMut(f64) -> Result<f64> + 'a> {
    enum Start {
        Quantum(CMatrix),
        Population(Vec<f64>),
    }
    let start = match model {
        Model::Quantum(_) => Start::Quantum(initial_matrix(model, initial)?),
        Model::Population(chain) => {
            if initial.dim() != chain.len() {
                return Err(MixingError::StateMismatch { model: chain.len(), state: initial.dim() });
            }
            Start::Population(initial.populations())
        }
    };
    let mut cache: HashMap<u64, f64> = HashMap::new();
    Ok(move |t: f64| -> Result<f64> {
        if let Some(&g) = cache.get(&t.to_bits()) {
            return Ok(g);
        }
        let g = match (&start, model) {
            (Start::Quantum(rho), Model::Quantum(q)) => q.distance(rho, t)?,
            (Start::Population(p), Model::Population(chain)) => chain.distance(p, t)?,
            _ => unreachable!("start state built from the same model"),
        };
        cache.insert(t.to_bits(), g);
        Ok(g)
    })
}

/// Hitting times for several thresholds by bisection, sharing evaluations.
pub fn hitting_times_lazy(model: &Model, initial: &InitialState, grid: &TimeGrid, epsilons: &[f64]) -> Result<Vec<HitTime>> {
    let mut g = distance_fn(model, initial)?;
    epsilons.iter().map(|&eps| hitting_time_bisect(grid, eps, &mut g)).collect()
}

fn pointwise_stats(curves: &[RelaxationCurve], n_points: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut mean = Vec::with_capacity(n_points);
    let mut std = Vec::with_capacity(n_points);
    let mut se = Vec::with_capacity(n_points);
    for k in 0..n_points {
        let col: Vec<f64> = curves.iter().map(|c| c.distances[k]).collect();
        let (m, s) = mean_std(&col);
        mean.push(m);
        std.push(s);
        se.push(standard_error(&col));
    }
    (mean, std, se)
}

/// Curves and hitting times for members `0..n_samples` of `ensemble`.
/// Members are processed in parallel; results depend only on `(seed, index)`.
pub fn ensemble_sweep(model: &Model, ensemble: &EnsembleSpec, grid: &TimeGrid, opts: &SweepOptions) -> Result<EnsembleSweep> {
    if opts.n_samples < 2 {
        return Err(MixingError::TooFewSamples(opts.n_samples));
    }
    for &eps in &opts.epsilons {
        check_epsilon(eps)?;
    }
    if ensemble.dim() != model.dim() {
        return Err(MixingError::StateMismatch { model: model.dim(), state: ensemble.dim() });
    }
    let n_curves = opts.curve_samples.min(opts.n_samples);
    type Member = (Option<RelaxationCurve>, Vec<HitTime>);
    let members: Vec<Member> = (0..opts.n_samples as u64)
        .into_par_iter()
        .map(|i| -> Result<Member> {
            let state = ensemble.sample(i)?;
            if (i as usize) < n_curves {
                let curve = relaxation_curve(model, &state, grid)?;
                let hits = opts.epsilons.iter().map(|&e| hitting_time(&curve, e)).collect::<Result<Vec<_>>>()?;
                Ok((Some(curve), hits))
            } else {
                Ok((None, hitting_times_lazy(model, &state, grid, &opts.epsilons)?))
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut curves = Vec::with_capacity(n_curves);
    let mut per_eps: Vec<Vec<HitTime>> = vec![Vec::with_capacity(opts.n_samples); opts.epsilons.len()];
    for (curve, hits) in members {
        if let Some(c) = curve {
            curves.push(c);
        }
        for (k, h) in hits.into_iter().enumerate() {
            per_eps[k].push(h);
        }
    }
    let sets = opts.epsilons.iter().zip(per_eps).map(|(&e, h)| MixingSampleSet::new(e, h)).collect();
    let (mean_curve, std_curve, stderr_curve) = if curves.is_empty() {
        (None, Vec::new(), Vec::new())
    } else {
        let (m, s, se) = pointwise_stats(&curves, grid.len());
        (Some(RelaxationCurve::new(grid.times().to_vec(), m)?), s, se)
    };
    Ok(EnsembleSweep { grid: grid.clone(), sets, curves, mean_curve, std_curve, stderr_curve })
}

/// Curve of the ensemble barycenter `I/d` (uniform populations for the chain).
pub fn barycenter_curve(model: &Model, grid: &TimeGrid) -> Result<RelaxationCurve> {
    let d = model.dim();
    let state = match model {
        Model::Quantum(_) => InitialState::Mixed(crate::states::DensityMatrix::maximally_mixed(d)),
        Model::Population(_) => {
            let amp = crate::linalg::C64::new((1.0 / d as f64).sqrt(), 0.0);
            InitialState::Pure(PureState::normalized(vec![amp; d])?)
        }
    };
    relaxation_curve(model, &state, grid)
}

/// Location and local steepness of the mean-curve crossing.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CrossingReport {
    pub t_star: f64,
    pub local_slope_m: f64,
    pub slope_window: f64,
    pub transverse: bool,
}

/// Below this estimated slope a crossing is reported as non-transverse.
pub const TRANSVERSE_MIN_SLOPE: f64 = 1e-6;

/// `t_*` by interpolation and `m = −Δμ/Δt` over two grid points on each side.
pub fn crossing_report(mean: &RelaxationCurve, epsilon: f64) -> Result<CrossingReport> {
    let hit = hitting_time(mean, epsilon)?;
    let t_star = hit.value().ok_or(MixingError::NoCrossing(epsilon))?;
    let g = &mean.distances;
    let t = &mean.times;
    let n = g.len();
    let k = g.iter().position(|&x| x <= epsilon).expect("crossing exists");
    let lower = k.saturating_sub(2);
    let upper = (k + 1).min(n - 1).max(lower + 1);
    let m = -(g[upper] - g[lower]) / (t[upper] - t[lower]);
    Ok(CrossingReport {
        t_star,
        local_slope_m: m,
        slope_window: t[upper] - t[lower],
        transverse: m > TRANSVERSE_MIN_SLOPE,
    })
}

/// Candidate initial states for a worst-case scan.
#[derive(Debug, Clone)]
pub enum Candidates {
    /// All computational-basis states.
    Basis,
    /// The top-|eigenvalue| eigenvector of `L2` followed by all basis states.
    SlowEigvec,
    Explicit(Vec<InitialState>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorstCase {
    pub index: usize,
    pub state: InitialState,
    pub hit: HitTime,
}

fn basis_states(d: usize) -> Result<Vec<InitialState>> {
    (0..d).map(|i| Ok(InitialState::Pure(PureState::basis(d, i)?))).collect()
}

/// Largest hitting time over the candidates; any censored candidate makes
/// the result censored.
pub fn worst_case_scan(model: &Model, epsilon: f64, grid: &TimeGrid, candidates: &Candidates) -> Result<WorstCase> {
    check_epsilon(epsilon)?;
    let d = model.dim();
    let states = match candidates {
        Candidates::Basis => basis_states(d)?,
        Candidates::SlowEigvec => {
            let mode = model.slow_mode()?;
            let eig = hermitian_eig(&mode.l2)?;
            let top = if eig.eigenvalues[0].abs() > eig.eigenvalues[d - 1].abs() { 0 } else { d - 1 };
            let mut v = vec![InitialState::Pure(PureState::normalized(eig.eigenvector(top))?)];
            v.extend(basis_states(d)?);
            v
        }
        Candidates::Explicit(list) => list.clone(),
    };
    if states.is_empty() {
        return Err(MixingError::NoCandidates);
    }
    let hits = states
        .par_iter()
        .map(|s| Ok(hitting_times_lazy(model, s, grid, &[epsilon])?[0]))
        .collect::<Result<Vec<HitTime>>>()?;
    let index = hits
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.or_infinity().total_cmp(&b.1.or_infinity()).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .expect("nonempty");
    Ok(WorstCase { index, state: states[index].clone(), hit: hits[index] })
}

/// Result of propagating Haar populations and all basis populations of a
/// chain on a linear grid.
#[derive(Debug, Clone)]
pub struct PopulationSweep {
    pub sets: Vec<MixingSampleSet>,
    /// Per threshold: hitting time of every basis population.
    pub basis_hits: Vec<Vec<HitTime>>,
    /// Per threshold: the slowest basis site and its hitting time.
    pub worst: Vec<(usize, HitTime)>,
    pub times: Vec<f64>,
    pub mean_curve: Vec<f64>,
    pub curves: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSweepOptions {
    pub seed: u64,
    pub n_samples: usize,
    pub epsilons: Vec<f64>,
    pub dt: f64,
    pub t_max: f64,
    /// Samples `0..curve_samples` keep full curves.
    pub curve_samples: usize,
    /// Keep stepping every sample so the mean curve covers the whole run.
    /// Otherwise a column stops once it is below every threshold.
    pub track_mean: bool,
}

/// Haar pure states on the chain reduced to populations `|ψ_x|²`, together
/// with every basis population, stepped by the exact propagator `e^{dt Q}`.
/// Stops once every column is below the smallest threshold or at `t_max`.
/// The ℓ¹ distance to stationarity is nonincreasing, so retiring a column
/// below every threshold does not change any hitting time.
pub fn population_sweep(chain: &SkinChain, opts: &PopulationSweepOptions) -> Result<PopulationSweep> {
    let n_samples = opts.n_samples;
    let epsilons = &opts.epsilons;
    let dt = opts.dt;
    if n_samples < 2 {
        return Err(MixingError::TooFewSamples(n_samples));
    }
    if epsilons.is_empty() {
        return Err(MixingError::InvalidEpsilon(f64::NAN));
    }
    for &e in epsilons {
        check_epsilon(e)?;
    }
    if !(dt > 0.0) || !(opts.t_max > dt) {
        return Err(MixingError::InvalidGrid(format!(
            "need 0 < dt < t_max, got dt={dt}, t_max={}",
            opts.t_max
        )));
    }
    let l = chain.len();
    let ensemble = EnsembleSpec::new(EnsembleKind::HaarPure { d: l }, opts.seed)?;
    let mut columns: Vec<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| Ok(ensemble.sample(i)?.populations()))
        .collect::<Result<Vec<_>>>()?;
    for x in 0..l {
        let mut e = vec![0.0; l];
        e[x] = 1.0;
        columns.push(e);
    }
    let m = columns.len();
    let pi = chain.stationary_slice().to_vec();
    let prop = chain.propagator(dt)?;
    let eps_min = epsilons.iter().copied().fold(f64::INFINITY, f64::min);
    let n_curves = opts.curve_samples.min(n_samples);
    let keep = |j: usize| j < n_curves || (opts.track_mean && j < n_samples);

    let mut hits: Vec<Vec<HitTime>> = vec![vec![HitTime::Censored; m]; epsilons.len()];
    let mut prev: Vec<f64> = columns.iter().map(|c| l1_distance(c, &pi)).collect();
    let mut times = vec![0.0];
    let mut curves: Vec<Vec<f64>> = (0..n_curves).map(|j| vec![prev[j]]).collect();
    let mut mean_curve = Vec::new();
    if opts.track_mean {
        mean_curve.push(prev[..n_samples].iter().sum::<f64>() / n_samples as f64);
    }
    for (k, &eps) in epsilons.iter().enumerate() {
        for j in 0..m {
            if prev[j] <= eps {
                hits[k][j] = HitTime::Hit(0.0);
            }
        }
    }
    let mut active: Vec<usize> = (0..m).filter(|&j| keep(j) || prev[j] > eps_min).collect();
    let mut step = 0usize;
    while active.iter().any(|&j| prev[j] > eps_min) {
        step += 1;
        let t = step as f64 * dt;
        if t > opts.t_max * (1.0 + 1e-12) {
            break;
        }
        let stepped: Vec<(usize, Vec<f64>, f64)> = active
            .par_iter()
            .map(|&j| {
                let c = apply_real(&prop, l, &columns[j]);
                let g = l1_distance(&c, &pi);
                (j, c, g)
            })
            .collect();
        let t_prev = t - dt;
        for (j, c, g) in stepped {
            for (k, &eps) in epsilons.iter().enumerate() {
                if hits[k][j].is_censored() && g <= eps {
                    hits[k][j] = HitTime::Hit(interpolate_crossing(t_prev, prev[j], t, g, eps));
                }
            }
            columns[j] = c;
            prev[j] = g;
        }
        times.push(t);
        for (j, c) in curves.iter_mut().enumerate() {
            c.push(prev[j]);
        }
        if opts.track_mean {
            mean_curve.push(prev[..n_samples].iter().sum::<f64>() / n_samples as f64);
        }
        active.retain(|&j| keep(j) || prev[j] > eps_min);
    }

    let mut sets = Vec::new();
    let mut basis_hits = Vec::new();
    let mut worst = Vec::new();
    for (k, &eps) in epsilons.iter().enumerate() {
        sets.push(MixingSampleSet::new(eps, hits[k][..n_samples].to_vec()));
        let b = hits[k][n_samples..].to_vec();
        let idx = (0..l).max_by(|&a, &c| b[a].or_infinity().total_cmp(&b[c].or_infinity())).expect("L >= 2");
        worst.push((idx, b[idx]));
        basis_hits.push(b);
    }
    Ok(PopulationSweep { sets, basis_hits, worst, times, mean_curve, curves })
}
