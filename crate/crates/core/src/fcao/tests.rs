use super::*;
use crate::channel::SensingDictionary;
use crate::coherence::CoherenceVector;
use crate::ris::{random_configuration, validate_configuration};
use approx::assert_relative_eq;
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn random_dictionary(rows: usize, cols: usize, groups: usize, states: usize, seed: u64) -> SensingDictionary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let matrix = Array2::from_shape_fn((rows, cols), |_| {
        Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng))
    });
    SensingDictionary::from_matrix(matrix, groups, states).unwrap()
}

fn coherence_of(blocks: usize, values: Vec<Complex64>) -> CoherenceVector {
    CoherenceVector::from_values(blocks, values).unwrap()
}

fn dual_with_rho(pairs: usize, rho: f64) -> DualState {
    let params = FcaoParams { rho_initial: rho, ..FcaoParams::default() };
    DualState::new(pairs, &params)
}

/// Full-pipeline coherence of the matrix with frame `k` replaced: the
/// independent route the FrameContext cache is checked against.
fn mu_oracle(
    config: &crate::ris::ConfigurationMatrix,
    k: usize,
    t: &[f64],
    dictionary: &SensingDictionary,
) -> f64 {
    let mut replaced = config.clone();
    replaced
        .set_frame(
            k,
            crate::ris::FrameConfiguration::from_flat(
                config.group_count(),
                config.state_count(),
                t.to_vec(),
            )
            .unwrap(),
        )
        .unwrap();
    let gamma = crate::coherence::measurement_matrix(&replaced, dictionary).unwrap();
    crate::coherence::average_mutual_coherence(&gamma).unwrap()
}

#[test]
fn soft_threshold_matches_scan_oracle() {
    // brute-force scan of |u| + (1/2)|u - 2|^2 over the real line
    let z = 2.0f64;
    let mut best = (f64::INFINITY, 0.0);
    let mut x = -1.0f64;
    while x <= 3.0 {
        let value = x.abs() + 0.5 * (x - z) * (x - z);
        if value < best.0 {
            best = (value, x);
        }
        x += 1e-4;
    }
    assert!((best.1 - 1.0).abs() < 1e-3, "scan argmin {}", best.1);

    let coh = coherence_of(2, vec![Complex64::new(2.0, 0.0)]);
    let u = soft_threshold_update_u(&coh, &dual_with_rho(1, 1.0));
    assert_relative_eq!(u.values()[0].re, 1.0, epsilon = 1e-12);
    assert_relative_eq!(u.values()[0].im, 0.0);
}

#[test]
fn soft_threshold_zeroes_small_inputs_and_keeps_phase() {
    let coh = coherence_of(2, vec![Complex64::new(0.6, 0.0)]);
    let u = soft_threshold_update_u(&coh, &dual_with_rho(1, 1.0));
    assert_eq!(u.values()[0], Complex64::default());

    let coh = coherence_of(2, vec![Complex64::new(0.0, 2.0)]);
    let u = soft_threshold_update_u(&coh, &dual_with_rho(1, 1.0));
    assert_relative_eq!(u.values()[0].re, 0.0);
    assert_relative_eq!(u.values()[0].im, 1.0, epsilon = 1e-12);
}

#[test]
fn soft_threshold_beats_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let objective = |u: Complex64, z: Complex64, rho: f64| u.norm() + 0.5 * rho * (u - z).norm_sqr();
    for _ in 0..1000 {
        let z = Complex64::new(rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0);
        let rho = 0.1 + rng.random::<f64>() * 5.0;
        let coh = coherence_of(2, vec![z]);
        let u = soft_threshold_update_u(&coh, &dual_with_rho(1, rho)).values()[0];
        let base = objective(u, z, rho);
        for _ in 0..8 {
            let angle = rng.random::<f64>() * std::f64::consts::TAU;
            let d = Complex64::from_polar(1e-4, angle);
            assert!(base <= objective(u + d, z, rho) + 1e-15);
        }
    }
}

#[test]
fn simplex_projection_examples() {
    let w = project_group_simplex(&[0.5, 0.5, 0.5, 0.5], 1.0);
    for v in &w {
        assert_relative_eq!(*v, 0.25, epsilon = 1e-15);
    }
    let w = project_group_simplex(&[2.0, 0.0, 0.0, 0.0], 1.0);
    assert_eq!(w, vec![1.0, 0.0, 0.0, 0.0]);
    let w = project_group_simplex(&[0.9, 0.5, 0.1, 0.1], 1.0);
    assert_relative_eq!(w[0], 0.7, epsilon = 1e-12);
    assert_relative_eq!(w[1], 0.3, epsilon = 1e-12);
    assert_eq!(w[2], 0.0);
    assert_eq!(w[3], 0.0);
}

#[test]
fn simplex_projection_satisfies_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..500 {
        let n = 2 + (rng.random::<u32>() % 6) as usize;
        let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let w = project_group_simplex(&v, 1.0);
        let sum: f64 = w.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12, "sum {sum}");
        assert!(w.iter().all(|&x| x >= 0.0));
        // Active coordinates share one multiplier; inactive ones sit below it.
        let active: Vec<f64> = v
            .iter()
            .zip(&w)
            .filter(|(_, &wi)| wi > 0.0)
            .map(|(&vi, &wi)| vi - wi)
            .collect();
        let theta = active.iter().sum::<f64>() / active.len() as f64;
        for t in &active {
            assert!((t - theta).abs() <= 1e-9);
        }
        for (vi, wi) in v.iter().zip(&w) {
            if *wi == 0.0 {
                assert!(*vi <= theta + 1e-9);
            }
        }
    }
}

/// Small hand instance: K=2, L=1, N_a=2, M=3, frame 0 free.
fn toy_instance() -> (crate::ris::ConfigurationMatrix, SensingDictionary) {
    let a = Array2::from_shape_vec(
        (2, 3),
        vec![
            Complex64::new(1.0, 0.2),
            Complex64::new(0.3, -0.4),
            Complex64::new(-0.5, 0.1),
            Complex64::new(0.2, -0.3),
            Complex64::new(0.8, 0.5),
            Complex64::new(0.4, 0.6),
        ],
    )
    .unwrap();
    let dictionary = SensingDictionary::from_matrix(a, 1, 2).unwrap();
    let frames = vec![
        crate::ris::FrameConfiguration::from_flat(1, 2, vec![0.5, 0.5]).unwrap(),
        crate::ris::FrameConfiguration::from_flat(1, 2, vec![0.3, 0.7]).unwrap(),
    ];
    let config = crate::ris::ConfigurationMatrix::new(frames, 1.0).unwrap();
    (config, dictionary)
}

#[test]
fn frame_context_matches_full_pipeline() {
    let dictionary = random_dictionary(8, 6, 2, 4, 21);
    let config = random_configuration(4, 2, 4, 3).unwrap();
    for k in 0..4 {
        let ctx = FrameContext::new(&config, k, &dictionary).unwrap();
        let t = config.frame(k).as_flat();
        let direct = mu_oracle(&config, k, t, &dictionary);
        assert_relative_eq!(ctx.mu(t), direct, epsilon = 1e-12);
        // and at a different candidate point
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let candidate: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
        let candidate = super::project_frame(&candidate, 2, 4);
        assert_relative_eq!(
            ctx.mu(&candidate),
            mu_oracle(&config, k, &candidate, &dictionary),
            epsilon = 1e-12
        );
    }
}

#[test]
fn lagrangian_value_examples() {
    let (config, dictionary) = toy_instance();
    let ctx = FrameContext::new(&config, 0, &dictionary).unwrap();
    let t = vec![0.5, 0.5];
    let coh = ctx.coherences(&t).unwrap();
    let dual = dual_with_rho(coh.values().len(), 2.0);

    // u = coh, beta = 0: the penalty vanishes
    let value = lagrangian_value(&t, &coh, &dual, &ctx);
    assert_relative_eq!(value, coh.l1_norm(), epsilon = 1e-14);

    // infeasible point: indicator fires
    let bad = vec![-0.1, 1.1];
    assert!(lagrangian_value(&bad, &coh, &dual, &ctx).is_infinite());

    // beta = 0, rho = 2, one pair offset by 0.1: penalty (rho/2)*0.01
    let mut shifted = coh.values().to_vec();
    shifted[0] += Complex64::new(0.1, 0.0);
    let u = coherence_of(3, shifted);
    let value = lagrangian_value(&t, &u, &dual, &ctx);
    assert_relative_eq!(value - u.l1_norm(), 0.01, epsilon = 1e-12);
}

#[test]
fn penalty_gradient_matches_central_differences() {
    let dictionary = random_dictionary(6, 5, 3, 2, 5);
    let config = random_configuration(3, 3, 2, 17).unwrap();
    let ctx = FrameContext::new(&config, 1, &dictionary).unwrap();
    let pairs = crate::coherence::pair_count(5);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let h = 1e-6;
    for trial in 0..10 {
        let kappa: Vec<Complex64> = (0..pairs)
            .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)) * 0.3)
            .collect();
        let rho = 0.5 + trial as f64 * 0.4;
        let raw: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
        let t = super::project_frame(&raw, 3, 2);
        let grad = ctx.penalty_gradient(&t, &kappa, rho);
        let scale = grad.iter().map(|g| g.abs()).fold(0.0f64, f64::max).max(1e-12);
        for d in 0..t.len() {
            let mut plus = t.clone();
            plus[d] += h;
            let mut minus = t.clone();
            minus[d] -= h;
            let fd = (ctx.penalty_value(&plus, &kappa, rho)
                - ctx.penalty_value(&minus, &kappa, rho))
                / (2.0 * h);
            assert!(
                (grad[d] - fd).abs() <= 1e-5 * scale.max(fd.abs()),
                "coordinate {d}: analytic {} vs fd {fd}",
                grad[d]
            );
        }
    }
}

#[test]
fn prox_update_stays_feasible_and_non_increasing() {
    let dictionary = random_dictionary(8, 7, 2, 4, 13);
    let config = random_configuration(3, 2, 4, 29).unwrap();
    let ctx = FrameContext::new(&config, 0, &dictionary).unwrap();
    let pairs = crate::coherence::pair_count(7);
    let params = FcaoParams::default();
    let dual = dual_with_rho(pairs, 1.5);
    let t0 = config.frame(0).as_flat().to_vec();
    let coh = ctx.coherences(&t0).unwrap();
    let u = soft_threshold_update_u(&coh, &dual);

    let kappa: Vec<Complex64> = u
        .values()
        .iter()
        .zip(&dual.multipliers)
        .map(|(uv, b)| uv + b / dual.rho)
        .collect();
    let before = ctx.penalty_value(&t0, &kappa, dual.rho);
    let t1 = prox_grad_update_t(&t0, &u, &dual, &ctx, &params);
    let after = ctx.penalty_value(&t1, &kappa, dual.rho);
    assert!(after <= before + 1e-15, "penalty rose: {before} -> {after}");
    assert!(super::frame_is_feasible(&t1, 2, 4));
}

#[test]
fn dual_update_rules() {
    let u = coherence_of(2, vec![Complex64::new(0.4, 0.1)]);
    let coh = coherence_of(2, vec![Complex64::new(0.4, 0.1)]);
    let state = dual_with_rho(1, 2.0);
    let next = update_duals(&u, &coh, &state);
    assert_eq!(next.multipliers[0], Complex64::default());
    assert_eq!(next.rho, 2.0);

    // beta' = beta + rho (u - coh)
    let u = coherence_of(2, vec![Complex64::new(0.5, 0.1)]);
    let next = update_duals(&u, &coh, &state);
    assert_relative_eq!(next.multipliers[0].re, 0.2, epsilon = 1e-15);
    assert_relative_eq!(next.multipliers[0].im, 0.0, epsilon = 1e-15);

    // stagnant residual doubles rho up to the cap
    let mut state = DualState::new(
        1,
        &FcaoParams { rho_initial: 2.0, rho_growth: 2.0, rho_max: 6.0, ..Default::default() },
    );
    state = update_duals(&u, &coh, &state); // baseline residual
    assert_eq!(state.rho, 2.0);
    state = update_duals(&u, &coh, &state);
    assert_eq!(state.rho, 4.0);
    state = update_duals(&u, &coh, &state);
    assert_eq!(state.rho, 6.0); // capped
    state = update_duals(&u, &coh, &state);
    assert_eq!(state.rho, 6.0);
}

/// Exhaustive 1e-3 grid over the free frame of the toy instance, scored
/// by the full measurement-matrix pipeline.
fn toy_grid_optimum() -> (f64, f64) {
    let (config, dictionary) = toy_instance();
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=1000 {
        let x = i as f64 * 1e-3;
        let mu = mu_oracle(&config, 0, &[x, 1.0 - x], &dictionary);
        if mu < best.0 {
            best = (mu, x);
        }
    }
    best
}

#[test]
fn augmented_lagrangian_matches_grid_search_on_toy() {
    let (config, dictionary) = toy_instance();
    let (grid_mu, _) = toy_grid_optimum();
    let ctx = FrameContext::new(&config, 0, &dictionary).unwrap();
    let solution = augmented_lagrangian_solve(&[0.5, 0.5], &ctx, &FcaoParams::default());
    assert!(
        solution.mu <= grid_mu + 1e-3,
        "AL mu {} vs grid optimum {grid_mu}",
        solution.mu
    );
    assert!(super::frame_is_feasible(&solution.t, 1, 2));
}

#[test]
fn pattern_search_reaches_grid_optimum_coarsely() {
    let (config, dictionary) = toy_instance();
    let (grid_mu, _) = toy_grid_optimum();
    let ctx = FrameContext::new(&config, 0, &dictionary).unwrap();
    let t = pattern_search_init(&ctx, &[0.5, 0.5], &FcaoParams::default());
    let mu = ctx.mu(&t);
    assert!(mu <= grid_mu + 5e-2, "pattern-search mu {mu} vs grid {grid_mu}");
    assert!(mu <= ctx.mu(&[0.5, 0.5]) + 1e-15);
}

#[test]
fn augmented_lagrangian_never_worse_than_init() {
    for seed in 0..5u64 {
        let dictionary = random_dictionary(8, 6, 2, 4, 100 + seed);
        let config = random_configuration(3, 2, 4, 200 + seed).unwrap();
        let ctx = FrameContext::new(&config, 0, &dictionary).unwrap();
        let init = config.frame(0).as_flat().to_vec();
        let solution = augmented_lagrangian_solve(&init, &ctx, &FcaoParams::default());
        assert!(solution.mu <= ctx.mu(&init) + 1e-15);
        // the surrogate u tracks the coherences of the final iterate
        assert_eq!(solution.u.values().len(), crate::coherence::pair_count(6));
    }
}

#[test]
fn residual_trace_decreases_on_logged_run() {
    let (config, dictionary) = toy_instance();
    let ctx = FrameContext::new(&config, 0, &dictionary).unwrap();
    let params = FcaoParams { lagrangian_rounds: 6, ..FcaoParams::default() };
    let solution = augmented_lagrangian_solve(&[0.5, 0.5], &ctx, &params);
    assert!(solution.residual_trace.len() >= 2);
    let first = solution.residual_trace[0];
    let last = *solution.residual_trace.last().unwrap();
    assert!(
        last <= first + 1e-12,
        "primal residual grew: {first} -> {last} ({:?})",
        solution.residual_trace
    );
}

#[test]
fn pattern_search_returns_locally_optimal_vertex() {
    // Instance crafted so mu increases away from the (0, 1) vertex of
    // frame 0; verified against a scan before polling.
    let a = Array2::from_shape_vec(
        (2, 3),
        vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.1),
            Complex64::new(1.0, -0.1),
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.3, 0.9),
        ],
    )
    .unwrap();
    let dictionary = SensingDictionary::from_matrix(a, 1, 2).unwrap();
    let frames = vec![
        crate::ris::FrameConfiguration::from_flat(1, 2, vec![0.0, 1.0]).unwrap(),
        crate::ris::FrameConfiguration::from_flat(1, 2, vec![0.5, 0.5]).unwrap(),
    ];
    let config = crate::ris::ConfigurationMatrix::new(frames, 1.0).unwrap();
    let ctx = FrameContext::new(&config, 0, &dictionary).unwrap();

    let vertex = vec![0.0, 1.0];
    let vertex_mu = ctx.mu(&vertex);
    let mut x = 1e-3;
    let mut is_local_min = true;
    while x <= 0.3 {
        if ctx.mu(&[x, 1.0 - x]) < vertex_mu {
            is_local_min = false;
            break;
        }
        x += 1e-3;
    }
    assert!(is_local_min, "chosen instance is not vertex-optimal; adjust constants");

    let out = pattern_search_init(&ctx, &vertex, &FcaoParams::default());
    assert_eq!(out, vertex);
}

#[test]
fn fcao_history_is_non_increasing() {
    let dictionary = random_dictionary(8, 10, 2, 4, 55);
    let initial = random_configuration(4, 2, 4, 66).unwrap();
    let params = FcaoParams {
        max_outer_iterations: 12,
        lagrangian_rounds: 2,
        alternating_rounds: 3,
        prox_steps: 8,
        pattern_budget: 60,
        ..FcaoParams::default()
    };
    let outcome = fcao_optimize(&initial, &dictionary, &params).unwrap();
    assert!(outcome.mu <= outcome.initial_mu);
    let mut previous = outcome.initial_mu;
    for record in &outcome.history {
        assert!(record.mu <= previous, "history rose at {record:?}");
        previous = record.mu;
        assert!(record.frame < 4);
    }
    assert!(validate_configuration(&outcome.matrix).is_ok());
}

#[test]
fn fcao_rejects_infeasible_start() {
    let dictionary = random_dictionary(8, 4, 2, 4, 3);
    let bad_frame =
        crate::ris::FrameConfiguration::from_flat(2, 4, vec![0.5; 8]).unwrap();
    let bad = crate::ris::ConfigurationMatrix::new(vec![bad_frame; 2], 1.0).unwrap();
    assert!(matches!(
        fcao_optimize(&bad, &dictionary, &FcaoParams::default()),
        Err(Error::InfeasibleConfiguration(_))
    ));
}
