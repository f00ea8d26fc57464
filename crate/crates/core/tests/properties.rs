use mixlab::laws::{
    alpha_induced, alpha_logical, alpha_moment, beta_a2_quantile, gell_mann_basis, kappa_hat, one_mode_bounds,
    slow_overlap, xi_sq_with_basis, OverlapStats,
};
use mixlab::linalg::{eigvalsh, inner, matrix_exp, trace_norm, vec_norm, CMatrix, C64};
use mixlab::mixing::{
    barycenter_curve, crossing_report, ensemble_sweep, hitting_time, quantile, relaxation_curve, HitTime,
    RelaxationCurve, SweepOptions, TimeGrid,
};
use mixlab::models::{ChannelSpec, Model, QuantumChannel};
use mixlab::states::{
    complex_gaussian, logical_overlap, member_rng, sample_haar_pure, sample_induced, EnsembleKind, EnsembleSpec,
    InitialState,
};
use proptest::prelude::*;
use rayon::prelude::*;

fn random_hermitian(d: usize, seed: u64) -> CMatrix {
    let mut rng = member_rng(seed, 0);
    let g = CMatrix::from_fn(d, d, |_, _| complex_gaussian(&mut rng));
    g.add(&g.adjoint()).scale_real(0.5)
}

/// Small instances of every quantum family.
fn quantum_spec(family: usize, size: usize, seed: u64) -> ChannelSpec {
    match family {
        0 => ChannelSpec::Davies { n: 2 + size % 2, beta: 0.7, omega: 1.3 },
        1 => ChannelSpec::PauliBoundary { l: 2 + size % 2, delta: 0.3, gamma: 3.0 },
        2 => ChannelSpec::ProtectedSector { d: 4 + size % 3, eta: 0.05 },
        3 => ChannelSpec::LogicalProduct {
            d_log: 2,
            n_syn: 2 + size % 2,
            eta: 0.2,
            pi: sample_induced(2 + size % 2, 3, &mut member_rng(seed, 99)).unwrap(),
        },
        _ => ChannelSpec::LogicalMicro { l: 1 + size % 2, beta: 1.8, gamma: 2.0, c: 0.75 },
    }
}

fn quantum(spec: &ChannelSpec) -> std::sync::Arc<dyn QuantumChannel> {
    match spec.build().unwrap() {
        Model::Quantum(q) => q,
        Model::Population(_) => unreachable!(),
    }
}

fn tn(m: &CMatrix) -> f64 {
    trace_norm(&m.hermitian_part()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn trace_distance_is_at_most_two(d in 2usize..9, seed in 0u64..1 << 40) {
        let mut rng = member_rng(seed, 0);
        let a = sample_induced(d, 1 + seed as usize % 3, &mut rng).unwrap();
        let b = sample_induced(d, 1 + (seed >> 3) as usize % 3, &mut rng).unwrap();
        prop_assert!(tn(&a.matrix().sub(b.matrix())) <= 2.0 + 1e-12);
    }

    #[test]
    fn rank_two_trace_norm_identity(d in 2usize..12, seed in 0u64..1 << 40, mix in 0.0f64..1.0) {
        let mut rng = member_rng(seed, 1);
        let u = sample_haar_pure(d, &mut rng).unwrap();
        let w = sample_haar_pure(d, &mut rng).unwrap();
        // Interpolating toward u covers nearly parallel pairs.
        let amp: Vec<C64> = u.amplitudes().iter().zip(w.amplitudes()).map(|(a, b)| a * (1.0 - mix) + b * mix).collect();
        let nrm = vec_norm(&amp);
        prop_assume!(nrm > 1e-6);
        let v: Vec<C64> = amp.iter().map(|z| z / nrm).collect();
        let lhs = tn(&CMatrix::projector(u.amplitudes()).sub(&CMatrix::projector(&v)));
        let ov = inner(u.amplitudes(), &v).norm_sqr();
        prop_assert!((lhs - 2.0 * (1.0 - ov).max(0.0).sqrt()).abs() <= 1e-10);
        let diff: Vec<C64> = u.amplitudes().iter().zip(&v).map(|(a, b)| a - b).collect();
        prop_assert!(lhs <= 2.0 * vec_norm(&diff) + 1e-12);
    }

    #[test]
    fn matrix_exp_semigroup(seed in 0u64..1 << 40, s in 0.0f64..2.0, t in 0.0f64..2.0) {
        let mut rng = member_rng(seed, 2);
        let a = CMatrix::from_fn(8, 8, |_, _| complex_gaussian(&mut rng) * 0.5);
        let lhs = matrix_exp(&a, s + t).unwrap();
        let rhs = matrix_exp(&a, s).unwrap().matmul(&matrix_exp(&a, t).unwrap());
        prop_assert!(lhs.sub(&rhs).fro_norm() <= 1e-8 * lhs.fro_norm().max(1.0));
    }

    #[test]
    fn channels_are_cptp_semigroups(family in 0usize..5, size in 0usize..3, seed in 0u64..1 << 40, s in 0.0f64..4.0, t in 0.0f64..4.0) {
        let spec = quantum_spec(family, size, seed);
        let ch = quantum(&spec);
        let d = ch.dim();
        let rho = sample_induced(d, 1 + seed as usize % d, &mut member_rng(seed, 3)).unwrap().into_matrix();
        let rt = ch.evolve(&rho, t).unwrap();
        prop_assert!((rt.trace() - C64::new(1.0, 0.0)).norm() <= 1e-10);
        let low = eigvalsh(&rt.hermitian_part()).unwrap()[0];
        prop_assert!(low >= -1e-9, "negative eigenvalue {low}");
        let chained = ch.evolve(&ch.evolve(&rho, s).unwrap(), t).unwrap();
        prop_assert!(tn(&chained.sub(&ch.evolve(&rho, s + t).unwrap())) <= 1e-9);
        let dense = spec.dense_oracle().unwrap();
        prop_assert!(tn(&rt.sub(&dense.evolve(&rho, t).unwrap())) <= 1e-8);
    }

    #[test]
    fn distance_is_nonincreasing(family in 0usize..5, size in 0usize..3, seed in 0u64..1 << 40) {
        let model = quantum_spec(family, size, seed).build().unwrap();
        let d = model.dim();
        let init = InitialState::Pure(sample_haar_pure(d, &mut member_rng(seed, 4)).unwrap());
        let grid = TimeGrid::log_spaced(1e-3, 30.0, 40).unwrap();
        let curve = relaxation_curve(&model, &init, &grid).unwrap();
        prop_assert!(curve.max_increase() <= 1e-10);
    }

    #[test]
    fn hitting_time_is_monotone_in_epsilon(seed in 0u64..1 << 40, e1 in 0.01f64..1.0, e2 in 0.01f64..1.0) {
        let model = quantum_spec(seed as usize % 5, 1, seed).build().unwrap();
        let init = InitialState::Pure(sample_haar_pure(model.dim(), &mut member_rng(seed, 5)).unwrap());
        let curve = relaxation_curve(&model, &init, &TimeGrid::log_spaced(1e-3, 60.0, 64).unwrap()).unwrap();
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let t_lo = hitting_time(&curve, lo).unwrap().or_infinity();
        let t_hi = hitting_time(&curve, hi).unwrap().or_infinity();
        prop_assert!(t_lo >= t_hi);
    }

    #[test]
    fn crossing_report_lands_on_epsilon(a in 0.2f64..2.0, b in 0.05f64..1.0, r1 in 0.2f64..3.0, r2 in 3.0f64..9.0, eps in 0.02f64..0.2) {
        let grid = TimeGrid::log_spaced(1e-3, 40.0, 80).unwrap();
        let g: Vec<f64> = grid.times().iter().map(|&t| a * (-r1 * t).exp() + b * (-r2 * t).exp()).collect();
        prop_assume!(g[0] > eps);
        let curve = RelaxationCurve::new(grid.times().to_vec(), g.clone()).unwrap();
        let rep = crossing_report(&curve, eps).unwrap();
        let k = grid.times().iter().position(|&t| t >= rep.t_star).unwrap();
        let (t0, t1, g0, g1) = (grid.times()[k - 1], grid.times()[k], g[k - 1], g[k]);
        // Log-linear interpolation between the bracketing points.
        let at = (g0.ln() + (g1.ln() - g0.ln()) * (rep.t_star - t0) / (t1 - t0)).exp();
        prop_assert!((at - eps).abs() <= 1e-6 * (a + b));
    }

    #[test]
    fn gap_bound_does_not_depend_on_epsilon(gamma in 0.01f64..3.0, kappa in 0.0f64..0.9, op in 0.1f64..2.0, alpha in 1e-4f64..0.1, e1 in 1e-6f64..0.5, e2 in 1e-6f64..0.5) {
        let a = one_mode_bounds(gamma, kappa, op, alpha, e1).unwrap();
        let b = one_mode_bounds(gamma, kappa, op, alpha, e2).unwrap();
        prop_assert!((a.gap_lb - b.gap_lb).abs() <= 1e-12 * a.gap_lb.abs().max(1.0));
        prop_assert!((a.t_worst_lb - a.t_typ_ub - a.gap_lb).abs() <= 1e-9 * a.t_worst_lb.abs().max(1.0));
    }

    #[test]
    fn xi_sq_is_basis_independent(family in 0usize..5, seed in 0u64..1 << 40, t in 0.0f64..3.0) {
        let ch = quantum(&quantum_spec(family, 0, seed));
        let d = ch.dim();
        let basis = gell_mann_basis(d);
        let u = matrix_exp(&random_hermitian(d, seed).scale(C64::new(0.0, 1.0)), 1.0).unwrap();
        let rotated: Vec<CMatrix> = basis.iter().map(|b| u.matmul(b).matmul(&u.adjoint())).collect();
        let x = xi_sq_with_basis(ch.as_ref(), t, &basis).unwrap();
        let y = xi_sq_with_basis(ch.as_ref(), t, &rotated).unwrap();
        prop_assert!((x - y).abs() <= 1e-8 * x.max(1.0));
    }

    #[test]
    fn slow_mode_decays_at_its_rate(family in 0usize..5, seed in 0u64..1 << 40, t in 0.0f64..5.0) {
        let ch = quantum(&quantum_spec(family, 0, seed));
        // Families with a degenerate slow eigenvalue have no single slow mode.
        let Ok(mode) = ch.slow_mode() else { return Ok(()) };
        let out = ch.evolve(&mode.r2, t).unwrap();
        let want = mode.r2.scale_real((-mode.gamma2 * t).exp());
        prop_assert!(out.sub(&want).max_abs() <= 1e-8);
    }
}

#[test]
fn beta_quantile_matches_monte_carlo() {
    let n = 1_000_000u64;
    for l in [2u32, 4, 6] {
        let model = ChannelSpec::PauliBoundary { l: l as usize, delta: 0.25, gamma: 4.0 }.build().unwrap();
        let mode = model.slow_mode().unwrap();
        let d = 1usize << l;
        let a2: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| mode.overlap_pure(sample_haar_pure(d, &mut member_rng(77 + l as u64, i)).unwrap().amplitudes()).abs())
            .collect();
        for level in [0.5, 0.9] {
            let q = beta_a2_quantile(l, level).unwrap();
            let frac = a2.iter().filter(|&&x| x <= q).count() as f64 / n as f64;
            let se = (level * (1.0 - level) / n as f64).sqrt();
            assert!((frac - level).abs() <= 3.0 * se, "L={l} level={level}: empirical cdf {frac} at the Beta quantile");
        }
    }
}

/// Empirical `(1 − δ)` quantile of `|a₂|` and a one-sided Monte Carlo
/// allowance for it.
fn empirical_a2_quantile(values: &[f64], delta: f64) -> (f64, f64) {
    let n = values.len() as f64;
    let q = quantile(values, 1.0 - delta);
    // Quantile estimated from the order statistic three binomial standard
    // deviations higher up.
    let k = ((1.0 - delta) + 3.0 * (delta * (1.0 - delta) / n).sqrt()).min(1.0);
    (q, quantile(values, k) - q)
}

#[test]
fn chebyshev_scales_dominate_empirical_quantiles() {
    let n = 4000u64;
    let deltas = [0.05, 0.1, 0.25];
    for l in [2usize, 3, 4] {
        let model = ChannelSpec::PauliBoundary { l, delta: 0.25, gamma: 4.0 }.build().unwrap();
        let mode = model.slow_mode().unwrap();
        let d = 1usize << l;
        let stats = OverlapStats::from_mode(&mode).unwrap();
        let haar = EnsembleSpec::new(EnsembleKind::HaarPure { d }, 5).unwrap();
        let a2: Vec<f64> = (0..n).map(|i| slow_overlap(&haar.sample(i).unwrap(), &mode).unwrap().abs()).collect();
        for &delta in &deltas {
            let (q, mc) = empirical_a2_quantile(&a2, delta);
            let alpha = alpha_moment(stats.m2, stats.v2, delta).unwrap();
            assert!(q - mc <= alpha, "Haar L={l} δ={delta}: {q} vs {alpha}");
        }
        let tr = mode.l2.trace().re;
        let trsq = mode.l2.hs_inner(&mode.l2).re;
        for d_b in [1, 4, d] {
            let ens = EnsembleSpec::new(EnsembleKind::Induced { d, d_b }, 6).unwrap();
            let a2: Vec<f64> = (0..n).map(|i| slow_overlap(&ens.sample(i).unwrap(), &mode).unwrap().abs()).collect();
            for &delta in &deltas {
                let (q, mc) = empirical_a2_quantile(&a2, delta);
                let alpha = alpha_induced(tr, trsq, d, d_b, delta).unwrap();
                assert!(q - mc <= alpha, "induced L={l} d_B={d_b} δ={delta}: {q} vs {alpha}");
            }
        }
    }
    for n_syn in [2usize, 8, 32] {
        let dl: Vec<f64> = (0..n)
            .map(|i| logical_overlap(&sample_haar_pure(2 * n_syn, &mut member_rng(8, i)).unwrap(), (2, n_syn)).unwrap())
            .collect();
        for &delta in &deltas {
            let (q, mc) = empirical_a2_quantile(&dl, delta);
            let alpha = alpha_logical(2, n_syn, delta).unwrap();
            assert!(q - mc <= alpha, "logical N={n_syn} δ={delta}: {q} vs {alpha}");
        }
    }
}

#[test]
fn boundary_tail_follows_one_mode_envelope() {
    let gamma = 4.0;
    let model = ChannelSpec::PauliBoundary { l: 3, delta: 0.25, gamma }.build().unwrap();
    let mode = model.slow_mode().unwrap();
    let grid = TimeGrid::log_spaced(1e-2, 40.0, 60).unwrap();
    let mut checked = 0;
    for i in 0..40 {
        let init = InitialState::Pure(sample_haar_pure(8, &mut member_rng(31, i)).unwrap());
        let a2 = slow_overlap(&init, &mode).unwrap().abs();
        if a2 < 0.05 {
            continue;
        }
        let curve = relaxation_curve(&model, &init, &grid).unwrap();
        let kappa = kappa_hat(&curve, a2, mode.gamma2, 5.0 / gamma, 1e-12).unwrap();
        assert!(kappa < 1.0, "kappa {kappa} for |a2| = {a2}");
        for (&t, &g) in curve.times.iter().zip(&curve.distances) {
            if t >= 5.0 / gamma && g >= 1e-12 {
                let one = a2 * (-mode.gamma2 * t).exp();
                assert!(g >= (1.0 - kappa) * one - 1e-15 && g <= (1.0 + kappa) * one + 1e-15);
            }
        }
        checked += 1;
    }
    assert!(checked >= 10);
}

#[test]
fn barycenter_stays_below_the_mean() {
    let mut models: Vec<Model> = (0..5).map(|f| quantum_spec(f, 1, 3).build().unwrap()).collect();
    models.push(ChannelSpec::SkinPopulation { l: 8, gamma_r: 1.6, gamma_l: 0.4, lambda: 1.0 }.build().unwrap());
    let grid = TimeGrid::log_spaced(1e-3, 20.0, 40).unwrap();
    for model in &models {
        let ens = EnsembleSpec::new(EnsembleKind::HaarPure { d: model.dim() }, 11).unwrap();
        let sweep = ensemble_sweep(model, &ens, &grid, &SweepOptions::full(32, vec![0.5])).unwrap();
        let mean = sweep.mean_curve.as_ref().unwrap();
        let bary = barycenter_curve(model, &grid).unwrap();
        for k in 0..grid.len() {
            assert!(
                bary.distances[k] <= mean.distances[k] + 3.0 * sweep.stderr_curve[k] + 1e-12,
                "{} at t = {}",
                model.family(),
                grid.times()[k]
            );
        }
    }
}

/// Two-sample Kolmogorov–Smirnov statistic.
fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn haar_sampling_is_unitarily_invariant() {
    let d = 6;
    let n = 10_000u64;
    let o = random_hermitian(d, 1);
    let u = matrix_exp(&random_hermitian(d, 2).scale(C64::new(0.0, 1.0)), 1.0).unwrap();
    let rotated = u.adjoint().matmul(&o).matmul(&u);
    let x: Vec<f64> = (0..n).map(|i| sample_haar_pure(d, &mut member_rng(3, i)).unwrap().expectation(&o)).collect();
    let y: Vec<f64> = (0..n).map(|i| sample_haar_pure(d, &mut member_rng(4, i)).unwrap().expectation(&rotated)).collect();
    // Critical value at significance 0.001.
    let crit = 1.949 * (2.0 / n as f64).sqrt();
    assert!(ks_statistic(x, y) < crit);
}

#[test]
fn censored_hits_are_reported_as_censored() {
    let model = quantum_spec(2, 0, 0).build().unwrap();
    let init = InitialState::Pure(mixlab::states::PureState::basis(model.dim(), 0).unwrap());
    let curve = relaxation_curve(&model, &init, &TimeGrid::log_spaced(1e-3, 1.0, 16).unwrap()).unwrap();
    assert_eq!(hitting_time(&curve, 1e-6).unwrap(), HitTime::Censored);
}
