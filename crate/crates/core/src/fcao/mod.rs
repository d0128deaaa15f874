//! Frame-configuration alternating optimization of the averaged mutual
//! coherence.
//!
//! The outer loop cycles over frames, re-optimizing one frame
//! configuration at a time: a derivative-free pattern search supplies
//! the starting point, then an augmented-Lagrangian solver alternates
//! closed-form soft-threshold updates of the coherence surrogate `u`
//! with simplex-projected proximal-gradient updates of the frame, and
//! ascends the duals after each inner sweep. A frame update is accepted
//! only when the averaged mutual coherence strictly decreases, which
//! makes the reported history non-increasing by construction.

mod context;

pub use context::FrameContext;

use num_complex::Complex64;

use crate::channel::SensingDictionary;
use crate::coherence::{average_mutual_coherence, measurement_matrix, CoherenceVector};
use crate::error::{Error, Result};
use crate::ris::{validate_configuration, ConfigurationMatrix, FrameConfiguration};

/// Budgets and penalty schedule of the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct FcaoParams {
    /// Hard cap on outer (per-frame) iterations.
    pub max_outer_iterations: usize,
    /// Augmented-Lagrangian rounds per frame (dual updates), N_AL.
    pub lagrangian_rounds: usize,
    /// Alternating-minimization sweeps per round, N_AM.
    pub alternating_rounds: usize,
    /// Proximal-gradient steps per t-update.
    pub prox_steps: usize,
    /// Initial proximal step size before backtracking.
    pub prox_initial_step: f64,
    /// Objective-evaluation budget of one pattern search.
    pub pattern_budget: usize,
    /// Initial pattern-search poll step.
    pub pattern_initial_step: f64,
    /// Pattern search stops once the poll step falls below this.
    pub pattern_min_step: f64,
    /// Initial penalty weight rho.
    pub rho_initial: f64,
    /// Multiplicative rho growth on stagnant primal residuals.
    pub rho_growth: f64,
    /// Upper cap on rho.
    pub rho_max: f64,
    /// Optimization stops early once mu falls to this value (0 disables).
    pub mu_tolerance: f64,
}

impl Default for FcaoParams {
    fn default() -> Self {
        Self {
            max_outer_iterations: 200,
            lagrangian_rounds: 5,
            alternating_rounds: 8,
            prox_steps: 20,
            prox_initial_step: 0.1,
            pattern_budget: 200,
            pattern_initial_step: 0.25,
            pattern_min_step: 1e-3,
            rho_initial: 1.0,
            rho_growth: 2.0,
            rho_max: 1e6,
            mu_tolerance: 0.0,
        }
    }
}

impl FcaoParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iterations == 0
            || self.lagrangian_rounds == 0
            || self.alternating_rounds == 0
            || self.prox_steps == 0
            || self.pattern_budget == 0
        {
            return Err(Error::InvalidParameter("FCAO iteration counts must be >= 1".into()));
        }
        if self.rho_initial <= 0.0 || self.rho_growth < 1.0 || self.rho_max < self.rho_initial {
            return Err(Error::InvalidParameter("invalid rho schedule".into()));
        }
        if self.prox_initial_step <= 0.0 || self.pattern_initial_step <= 0.0 {
            return Err(Error::InvalidParameter("step sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Lagrange multipliers and penalty weight of one augmented-Lagrangian
/// run, plus the residual bookkeeping that drives the rho schedule.
#[derive(Debug, Clone)]
pub struct DualState {
    pub multipliers: Vec<Complex64>,
    pub rho: f64,
    rho_growth: f64,
    rho_max: f64,
    last_residual: Option<f64>,
}

impl DualState {
    /// Zero multipliers at the initial penalty weight.
    pub fn new(pairs: usize, params: &FcaoParams) -> Self {
        Self {
            multipliers: vec![Complex64::default(); pairs],
            rho: params.rho_initial,
            rho_growth: params.rho_growth,
            rho_max: params.rho_max,
            last_residual: None,
        }
    }
}

/// Augmented Lagrangian value at `(t, u)`:
/// `||u||_1 + I(t) + sum Re[conj(beta) (u - coh)] + sum (rho/2)|u - coh|^2`
/// where `coh` are the coherences at `t` and the indicator I is infinite
/// off the per-group simplexes.
pub fn lagrangian_value(
    t: &[f64],
    u: &CoherenceVector,
    dual: &DualState,
    ctx: &FrameContext,
) -> f64 {
    if !frame_is_feasible(t, ctx.group_count(), ctx.state_count()) {
        return f64::INFINITY;
    }
    let w = ctx.variable_row(t);
    let Some(coh) = ctx.pair_coherences(&w) else {
        return f64::INFINITY;
    };
    let mut value = u.l1_norm();
    for ((uv, cv), beta) in u.values().iter().zip(&coh).zip(&dual.multipliers) {
        let diff = uv - cv;
        value += (beta.conj() * diff).re + 0.5 * dual.rho * diff.norm_sqr();
    }
    value
}

fn frame_is_feasible(t: &[f64], groups: usize, states: usize) -> bool {
    if t.len() != groups * states {
        return false;
    }
    for l in 0..groups {
        let row = &t[l * states..(l + 1) * states];
        if row.iter().any(|&v| v < 0.0) {
            return false;
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > crate::ris::SIMPLEX_SUM_TOL {
            return false;
        }
    }
    true
}

/// Exact minimizer of `||u||_1 + (rho/2) ||u - z||_2^2` with
/// `z = coh - beta/rho`: the complex soft threshold at 1/rho.
pub fn soft_threshold_update_u(coh: &CoherenceVector, dual: &DualState) -> CoherenceVector {
    let rho = dual.rho;
    let values = coh
        .values()
        .iter()
        .zip(&dual.multipliers)
        .map(|(c, beta)| {
            let z = c - beta / rho;
            let magnitude = z.norm();
            if magnitude * rho <= 1.0 {
                Complex64::default()
            } else {
                z * (1.0 - 1.0 / (rho * magnitude))
            }
        })
        .collect();
    CoherenceVector::from_values(coh.block_count(), values).expect("same pair count")
}

/// Euclidean projection onto `{w >= 0, sum w = total}` by sorting and
/// thresholding.
pub fn project_group_simplex(v: &[f64], total: f64) -> Vec<f64> {
    debug_assert!(total > 0.0);
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0; // j = 0 always qualifies, so this is overwritten
    for (j, &value) in sorted.iter().enumerate() {
        cumulative += value;
        let candidate = (cumulative - total) / (j + 1) as f64;
        if value > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn project_frame(t: &[f64], groups: usize, states: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    for l in 0..groups {
        out.extend(project_group_simplex(&t[l * states..(l + 1) * states], 1.0));
    }
    out
}

/// One batch of proximal-gradient steps on the smooth penalty
/// `sum (rho/2)|coh(t) - kappa|^2` with `kappa = u + beta/rho`, each step
/// projected back onto the per-group simplexes and backtracked until the
/// penalty decreases.
pub fn prox_grad_update_t(
    t: &[f64],
    u: &CoherenceVector,
    dual: &DualState,
    ctx: &FrameContext,
    params: &FcaoParams,
) -> Vec<f64> {
    let rho = dual.rho;
    let kappa: Vec<Complex64> = u
        .values()
        .iter()
        .zip(&dual.multipliers)
        .map(|(uv, beta)| uv + beta / rho)
        .collect();
    let groups = ctx.group_count();
    let states = ctx.state_count();

    let mut current = project_frame(t, groups, states);
    let mut current_value = ctx.penalty_value(&current, &kappa, rho);
    for _ in 0..params.prox_steps {
        let gradient = ctx.penalty_gradient(&current, &kappa, rho);
        let mut step = params.prox_initial_step;
        let mut accepted = false;
        while step >= 1e-14 {
            let candidate: Vec<f64> = current
                .iter()
                .zip(&gradient)
                .map(|(x, g)| x - step * g)
                .collect();
            let candidate = project_frame(&candidate, groups, states);
            let value = ctx.penalty_value(&candidate, &kappa, rho);
            if value < current_value {
                current = candidate;
                current_value = value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    current
}

/// Dual ascent `beta += rho (u - coh)`; rho grows by `rho_growth` (up to
/// `rho_max`) whenever the primal residual has not shrunk to a quarter
/// of its value at the previous dual update.
pub fn update_duals(u: &CoherenceVector, coh: &CoherenceVector, state: &DualState) -> DualState {
    let mut next = state.clone();
    let mut residual_sq = 0.0;
    for ((uv, cv), beta) in u.values().iter().zip(coh.values()).zip(&mut next.multipliers) {
        let diff = uv - cv;
        *beta += diff * state.rho;
        residual_sq += diff.norm_sqr();
    }
    let residual = residual_sq.sqrt();
    if let Some(previous) = state.last_residual {
        if residual > 0.25 * previous {
            next.rho = (state.rho * state.rho_growth).min(state.rho_max);
        }
    }
    next.last_residual = Some(residual);
    next
}

/// Result of one augmented-Lagrangian solve.
#[derive(Debug, Clone)]
pub struct AlSolution {
    /// Best frame configuration encountered, by resulting mu.
    pub t: Vec<f64>,
    /// Final coherence surrogate u.
    pub u: CoherenceVector,
    /// Averaged mutual coherence at `t`.
    pub mu: f64,
    /// Primal residual ||u - coh||_2 recorded at each dual update.
    pub residual_trace: Vec<f64>,
}

/// Runs `lagrangian_rounds` outer rounds of `alternating_rounds`
/// u-then-t sweeps with a dual update after each inner loop, returning
/// the best feasible frame by averaged mutual coherence (never worse
/// than the initial point).
pub fn augmented_lagrangian_solve(
    t_init: &[f64],
    ctx: &FrameContext,
    params: &FcaoParams,
) -> AlSolution {
    let groups = ctx.group_count();
    let states = ctx.state_count();
    let mut t = project_frame(t_init, groups, states);
    let mut best_t = t.clone();
    let mut best_mu = ctx.mu(&t);

    let pair_total = crate::coherence::pair_count(ctx.block_count());
    let mut dual = DualState::new(pair_total, params);
    let mut u = match ctx.coherences(&t) {
        Ok(coh) => coh,
        Err(_) => {
            // Degenerate start: fall back to the initial point.
            return AlSolution {
                t: best_t,
                u: CoherenceVector::from_values(
                    ctx.block_count(),
                    vec![Complex64::default(); pair_total],
                )
                .expect("pair count"),
                mu: best_mu,
                residual_trace: Vec::new(),
            };
        }
    };
    let mut residual_trace = Vec::with_capacity(params.lagrangian_rounds);

    for _round in 0..params.lagrangian_rounds {
        for _sweep in 0..params.alternating_rounds {
            if let Ok(coh) = ctx.coherences(&t) {
                u = soft_threshold_update_u(&coh, &dual);
            }
            t = prox_grad_update_t(&t, &u, &dual, ctx, params);
            let mu = ctx.mu(&t);
            if mu < best_mu {
                best_mu = mu;
                best_t = t.clone();
            }
        }
        if let Ok(coh) = ctx.coherences(&t) {
            let residual = u
                .values()
                .iter()
                .zip(coh.values())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            residual_trace.push(residual);
            dual = update_duals(&u, &coh, &dual);
        }
    }

    AlSolution { t: best_t, u, mu: best_mu, residual_trace }
}

/// Derivative-free warm start: polls +/- step along every duration
/// coordinate (projected back onto the owning group's simplex), restarts
/// from the first strict improvement, and halves the step after a full
/// failed poll. Never returns a point worse than the incumbent.
pub fn pattern_search_init(
    ctx: &FrameContext,
    incumbent: &[f64],
    params: &FcaoParams,
) -> Vec<f64> {
    let groups = ctx.group_count();
    let states = ctx.state_count();
    let mut t = project_frame(incumbent, groups, states);
    let mut mu = ctx.mu(&t);
    let mut step = params.pattern_initial_step;
    let mut evaluations = 0usize;

    while step >= params.pattern_min_step && evaluations < params.pattern_budget {
        let mut improved = false;
        'poll: for d in 0..t.len() {
            for sign in [1.0, -1.0] {
                if evaluations >= params.pattern_budget {
                    break 'poll;
                }
                let group = d / states;
                let mut candidate = t.clone();
                candidate[d] += sign * step;
                let row = project_group_simplex(
                    &candidate[group * states..(group + 1) * states],
                    1.0,
                );
                candidate[group * states..(group + 1) * states].copy_from_slice(&row);
                evaluations += 1;
                let candidate_mu = ctx.mu(&candidate);
                if candidate_mu < mu {
                    t = candidate;
                    mu = candidate_mu;
                    improved = true;
                    break 'poll;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    t
}

/// One row of the optimization history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// Outer iteration number, starting at 1.
    pub iteration: usize,
    /// Frame re-optimized during this iteration.
    pub frame: usize,
    /// Incumbent averaged mutual coherence after the iteration.
    pub mu: f64,
}

/// Outcome of a full FCAO run.
#[derive(Debug, Clone)]
pub struct FcaoOutcome {
    pub matrix: ConfigurationMatrix,
    /// Final averaged mutual coherence.
    pub mu: f64,
    /// Coherence of the starting matrix.
    pub initial_mu: f64,
    pub history: Vec<IterationRecord>,
}

/// Frame-wise alternating optimization: cycles the frames, warm-starts
/// each with pattern search, refines with the augmented-Lagrangian
/// solver, and accepts a frame only on strict coherence decrease.
/// Terminates after a full stagnant cycle (K consecutive non-improving
/// iterations) or at the iteration cap.
pub fn fcao_optimize(
    initial: &ConfigurationMatrix,
    dictionary: &SensingDictionary,
    params: &FcaoParams,
) -> Result<FcaoOutcome> {
    params.validate()?;
    let report = validate_configuration(initial);
    if !report.is_ok() {
        return Err(Error::InfeasibleConfiguration(report.violations.len()));
    }
    let gamma = measurement_matrix(initial, dictionary)?;
    let initial_mu = average_mutual_coherence(&gamma)?;

    let frames = initial.frame_count();
    let groups = initial.group_count();
    let states = initial.state_count();
    let mut matrix = initial.clone();
    let mut best_mu = initial_mu;
    let mut history = Vec::new();
    let mut stagnant = 0usize;
    let mut k = 0usize;

    for iteration in 1..=params.max_outer_iterations {
        let ctx = FrameContext::new(&matrix, k, dictionary)?;
        let warm = pattern_search_init(&ctx, matrix.frame(k).as_flat(), params);
        let solution = augmented_lagrangian_solve(&warm, &ctx, params);
        if solution.mu < best_mu {
            matrix.set_frame(k, FrameConfiguration::from_flat(groups, states, solution.t)?)?;
            best_mu = solution.mu;
            stagnant = 0;
        } else {
            stagnant += 1;
        }
        history.push(IterationRecord { iteration, frame: k, mu: best_mu });
        if stagnant >= frames || best_mu <= params.mu_tolerance {
            break;
        }
        k = (k + 1) % frames;
    }

    Ok(FcaoOutcome { matrix, mu: best_mu, initial_mu, history })
}

#[cfg(test)]
mod tests;
