//! Monte Carlo validation of a calibrated solution.
//!
//! Four independent diagnostics back the closed-form machinery:
//!
//! * constraint attainment — the terminal law of Y_T under a belief measure
//!   is sampled exactly (Y_T = ϑT + √T·Z), so the estimated P̃(X*_T ≥ L)
//!   carries only binomial noise, no discretization bias;
//! * budget attainment — E_P[ξ_T·X*_T] sampled the same way under the prior;
//! * replication — the self-financing Euler scheme
//!   X̂_{n+1} = X̂_n + e^{−r t_n}·h_y(t_n, Y_n)·ΔY_n applied to common
//!   Brownian paths at nested step counts, measuring the terminal hedging
//!   error against the discounted payoff;
//! * comparative statics — first-order stochastic dominance between belief
//!   measures must move (ξ̄, λ₁, ξ̲) monotonically.
//!
//! Every estimate is reproducible: path i draws from a counter-based RNG
//! stream keyed by (seed, i), so results are independent of thread count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::Prior;
use crate::market::{self, BeliefMeasure, MarketParams};
use crate::solver::{optimal_terminal_wealth, solve, ConstraintSpec, Regime, Solution};
use crate::strategy::StrategyContext;
use crate::utility::Utility;

/// A Monte Carlo point estimate with its standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

fn require_paths(n_paths: usize) -> Result<()> {
    if n_paths == 0 {
        return Err(Error::InvalidInput("need at least one path".into()));
    }
    Ok(())
}

/// Exact-terminal-law estimate of P̃(X*_T ≥ L) under `belief`.
#[allow(clippy::too_many_arguments)]
pub fn check_constraint(
    prior: &Prior,
    belief: &BeliefMeasure,
    params: &MarketParams,
    utility: &Utility,
    solution: &Solution,
    floor: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    params.validate()?;
    belief.check_support(prior)?;
    require_paths(n_paths)?;
    let t = params.horizon;
    let sqrt_t = t.sqrt();
    let hits: usize = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = market::path_rng(seed, i);
            let theta = market::draw_support(prior.values(), belief.weights(), &mut rng);
            let z: f64 = rng.sample(StandardNormal);
            let y_t = theta * t + z * sqrt_t;
            let xi = market::state_price(prior, params, t, y_t);
            let x = optimal_terminal_wealth(solution, utility, floor, xi)
                .expect("positive state price");
            usize::from(x >= floor)
        })
        .sum();
    let p = hits as f64 / n_paths as f64;
    Ok(McEstimate {
        estimate: p,
        stderr: (p * (1.0 - p) / n_paths as f64).sqrt(),
    })
}

/// Exact-terminal-law estimate of the budget E_P[ξ_T·X*_T].
pub fn check_budget(
    prior: &Prior,
    params: &MarketParams,
    utility: &Utility,
    solution: &Solution,
    floor: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    params.validate()?;
    require_paths(n_paths)?;
    let t = params.horizon;
    let sqrt_t = t.sqrt();
    let samples: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = market::path_rng(seed, i);
            let theta = market::draw_support(prior.values(), prior.probs(), &mut rng);
            let z: f64 = rng.sample(StandardNormal);
            let y_t = theta * t + z * sqrt_t;
            let xi = market::state_price(prior, params, t, y_t);
            xi * optimal_terminal_wealth(solution, utility, floor, xi)
                .expect("positive state price")
        })
        .collect();
    let n = n_paths as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(McEstimate {
        estimate: mean,
        stderr: (var / n).sqrt(),
    })
}

/// Terminal hedging error of the Euler-discretized strategy at one step count.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReplicationResult {
    pub n_steps: usize,
    pub rms_error: f64,
    pub mean_abs_error: f64,
}

/// Discretize the optimal strategy at each requested step count on common
/// Brownian paths (coarser grids sum the increments of the finest one) and
/// measure the terminal discounted hedging error. Step counts must divide
/// the largest one so all discretizations see the same randomness.
#[allow(clippy::too_many_arguments)]
pub fn check_replication(
    ctx: &StrategyContext,
    prior: &Prior,
    utility: &Utility,
    solution: &Solution,
    floor: f64,
    n_paths: usize,
    step_counts: &[usize],
    seed: u64,
) -> Result<Vec<ReplicationResult>> {
    require_paths(n_paths)?;
    if step_counts.is_empty() || step_counts.contains(&0) {
        return Err(Error::InvalidInput(
            "replication needs positive step counts".into(),
        ));
    }
    let finest = *step_counts.iter().max().unwrap();
    if step_counts.iter().any(|&n| !finest.is_multiple_of(n)) {
        return Err(Error::InvalidInput(format!(
            "every step count must divide the finest one ({finest}) so that all \
             discretizations share the same Brownian paths"
        )));
    }
    let params = *ctx.params();
    let t = params.horizon;
    let dt_fine = t / finest as f64;
    let sqrt_dt = dt_fine.sqrt();
    let disc_t = (-params.r * t).exp();
    let x_hat0 = ctx.h(0.0, 0.0)?;

    let errors: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = market::path_rng(seed, i);
            let theta = market::draw_support(prior.values(), prior.probs(), &mut rng);
            let mut increments = Vec::with_capacity(finest);
            for _ in 0..finest {
                let z: f64 = rng.sample(StandardNormal);
                increments.push(theta * dt_fine + z * sqrt_dt);
            }
            let y_terminal: f64 = increments.iter().sum();
            let xi = market::state_price(prior, &params, t, y_terminal);
            let target = disc_t
                * optimal_terminal_wealth(solution, utility, floor, xi)
                    .expect("positive state price");
            step_counts
                .iter()
                .map(|&n| {
                    let ratio = finest / n;
                    let dt = t / n as f64;
                    let mut x_hat = x_hat0;
                    let mut y = 0.0;
                    for step in 0..n {
                        let t_n = step as f64 * dt;
                        let h_y = ctx.h_y_fast(t_n, y);
                        let dy: f64 = increments[step * ratio..(step + 1) * ratio].iter().sum();
                        x_hat += (-params.r * t_n).exp() * h_y * dy;
                        y += dy;
                    }
                    x_hat - target
                })
                .collect()
        })
        .collect();

    let n = n_paths as f64;
    Ok(step_counts
        .iter()
        .enumerate()
        .map(|(k, &n_steps)| {
            let (mut sq, mut abs) = (0.0, 0.0);
            for row in &errors {
                sq += row[k] * row[k];
                abs += row[k].abs();
            }
            ReplicationResult {
                n_steps,
                rms_error: (sq / n).sqrt(),
                mean_abs_error: abs / n,
            }
        })
        .collect())
}

/// First-order stochastic dominance w.r.t. the sorted prior support:
/// `stronger` dominates `weaker` iff every upper-tail partial sum of
/// `stronger` is at least that of `weaker`.
pub fn is_fsd_dominated(weaker: &BeliefMeasure, stronger: &BeliefMeasure) -> bool {
    if weaker.len() != stronger.len() {
        return false;
    }
    let (mut tail_w, mut tail_s) = (0.0, 0.0);
    for (w, s) in weaker
        .weights()
        .iter()
        .rev()
        .zip(stronger.weights().iter().rev())
    {
        tail_w += w;
        tail_s += s;
        if tail_s < tail_w - 1e-12 {
            return false;
        }
    }
    true
}

/// Random FSD-ordered belief pairs on a support of size `k`: a Dirichlet-like
/// base draw plus a random number of upward mass transfers, which can only
/// increase upper-tail sums.
pub fn random_fsd_pairs(
    k: usize,
    n_pairs: usize,
    seed: u64,
) -> Result<Vec<(BeliefMeasure, BeliefMeasure)>> {
    if k < 2 {
        return Err(Error::InvalidInput(
            "FSD pairs need a support of at least two points".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n_pairs);
    while pairs.len() < n_pairs {
        let mut base: Vec<f64> = (0..k)
            .map(|_| -(rng.random::<f64>().max(1e-300)).ln())
            .collect();
        let total: f64 = base.iter().sum();
        base.iter_mut().for_each(|w| *w /= total);
        if base.iter().any(|&w| w < 1e-9) {
            continue; // keep weights comfortably positive
        }
        let mut upper = base.clone();
        let transfers = rng.random_range(1..=2 * k);
        for _ in 0..transfers {
            let i = rng.random_range(0..k - 1);
            let j = rng.random_range(i + 1..k);
            let delta = 0.9 * rng.random::<f64>() * upper[i];
            upper[i] -= delta;
            upper[j] += delta;
        }
        if upper.iter().any(|&w| w < 1e-9) {
            continue;
        }
        let renorm = |mut w: Vec<f64>| {
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            w
        };
        let weaker = BeliefMeasure::new(renorm(base))?;
        let stronger = BeliefMeasure::new(renorm(upper))?;
        debug_assert!(is_fsd_dominated(&weaker, &stronger));
        pairs.push((weaker, stronger));
    }
    Ok(pairs)
}

/// Calibration outputs for an FSD-ordered belief pair under the VaR
/// constraint, with the monotonicity verdict: moving belief mass upward must
/// weakly lower ξ̄ and λ₁ and weakly raise ξ̲.
#[derive(Debug, Clone, Serialize)]
pub struct FsdComparison {
    pub xi_upper_weak: f64,
    pub xi_upper_strong: f64,
    pub lambda1_weak: f64,
    pub lambda1_strong: f64,
    pub xi_lower_weak: f64,
    pub xi_lower_strong: f64,
    pub ok: bool,
}

pub fn check_fsd_pair(
    prior: &Prior,
    params: &MarketParams,
    utility: &Utility,
    floor: f64,
    beta: f64,
    weaker: &BeliefMeasure,
    stronger: &BeliefMeasure,
) -> Result<FsdComparison> {
    if !is_fsd_dominated(weaker, stronger) {
        return Err(Error::InvalidInput(
            "belief pair is not FSD-ordered (second must dominate first)".into(),
        ));
    }
    let solve_for = |belief: &BeliefMeasure| -> Result<Solution> {
        solve(
            prior,
            params,
            utility,
            &ConstraintSpec::Var {
                belief: belief.clone(),
                beta,
            },
            floor,
        )
    };
    let weak = solve_for(weaker)?;
    let strong = solve_for(stronger)?;
    let xi_u_w = weak.xi_upper.unwrap_or(f64::INFINITY);
    let xi_u_s = strong.xi_upper.unwrap_or(f64::INFINITY);
    let rtol = 1e-8;
    let ok = xi_u_w >= xi_u_s * (1.0 - rtol)
        && weak.lambda1 >= strong.lambda1 * (1.0 - rtol)
        && weak.xi_lower <= strong.xi_lower * (1.0 + rtol);
    Ok(FsdComparison {
        xi_upper_weak: xi_u_w,
        xi_upper_strong: xi_u_s,
        lambda1_weak: weak.lambda1,
        lambda1_strong: strong.lambda1,
        xi_lower_weak: weak.xi_lower,
        xi_lower_strong: strong.xi_lower,
        ok,
    })
}

/// Settings for [`run_validation`].
#[derive(Debug, Clone)]
pub struct ValidationSettings {
    /// Paths for the constraint and budget estimates.
    pub n_paths: usize,
    /// Paths for the replication check (0 disables it).
    pub replication_paths: usize,
    /// Step counts for the replication check.
    pub step_counts: Vec<usize>,
    /// Number of random FSD pairs (0 disables the check).
    pub fsd_pairs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintCheck {
    /// Index into the constraint's belief list; `None` flags the weighted
    /// aggregate Σ αᵢ·P̃ᵢ.
    pub belief_index: Option<usize>,
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BudgetCheck {
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
    pub quadrature_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WealthIdentityCheck {
    pub h00: f64,
    pub x0: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicationCheck {
    pub results: Vec<ReplicationResult>,
    /// rms(2n)/rms(n) for each consecutive doubling in the step counts.
    pub halving_factors: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FsdCheck {
    pub n_pairs: usize,
    pub violations: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub regime: Regime,
    pub lambda1: f64,
    pub xi_lower: f64,
    pub xi_upper: Option<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub constraint: Vec<ConstraintCheck>,
    pub budget: BudgetCheck,
    pub wealth_identity: Option<WealthIdentityCheck>,
    pub replication: Option<ReplicationCheck>,
    pub fsd: Option<FsdCheck>,
    pub pass: bool,
}

/// Budget-residual tolerance (absolute, in wealth units).
const BUDGET_RESIDUAL_TOL: f64 = 1e-4;
/// Initial-wealth identity tolerance for h(0, 0).
const WEALTH_IDENTITY_TOL: f64 = 1e-4;
/// Error-halving band expected of a Δt-rate discretization.
const HALVING_BAND: (f64, f64) = (0.4, 0.7);

fn belief_seed(seed: u64, index: usize) -> u64 {
    // Distinct deterministic stream families per belief check.
    seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index as u64 + 1))
}

/// Calibrate and run the full diagnostic suite.
pub fn run_validation(
    prior: &Prior,
    params: &MarketParams,
    utility: &Utility,
    constraint: &ConstraintSpec,
    floor: f64,
    settings: &ValidationSettings,
) -> Result<ValidationReport> {
    let solution = solve(prior, params, utility, constraint, floor)?;
    let mut pass = true;

    // Constraint attainment.
    let mut checks = Vec::new();
    match constraint {
        ConstraintSpec::Unconstrained => {}
        ConstraintSpec::Insurance => {
            let belief = BeliefMeasure::from_prior(prior);
            let est = check_constraint(
                prior,
                &belief,
                params,
                utility,
                &solution,
                floor,
                settings.n_paths,
                belief_seed(settings.seed, 0),
            )?;
            let ok = est.estimate >= 1.0 - 3.0 * est.stderr && est.estimate == 1.0;
            checks.push(ConstraintCheck {
                belief_index: None,
                estimate: est.estimate,
                stderr: est.stderr,
                target: 1.0,
                pass: ok,
            });
        }
        ConstraintSpec::Var { beta, .. } | ConstraintSpec::RobustMin { beta, .. } => {
            for (idx, belief) in constraint.beliefs().iter().enumerate() {
                let est = check_constraint(
                    prior,
                    belief,
                    params,
                    utility,
                    &solution,
                    floor,
                    settings.n_paths,
                    belief_seed(settings.seed, idx),
                )?;
                let target = 1.0 - beta;
                let ok = est.estimate >= target - 3.0 * est.stderr;
                checks.push(ConstraintCheck {
                    belief_index: Some(idx),
                    estimate: est.estimate,
                    stderr: est.stderr,
                    target,
                    pass: ok,
                });
            }
        }
        ConstraintSpec::Weighted { alphas, beta, .. } => {
            let (mut agg, mut var_agg) = (0.0, 0.0);
            for (idx, (alpha, belief)) in alphas.iter().zip(constraint.beliefs()).enumerate() {
                let est = check_constraint(
                    prior,
                    belief,
                    params,
                    utility,
                    &solution,
                    floor,
                    settings.n_paths,
                    belief_seed(settings.seed, idx),
                )?;
                agg += alpha * est.estimate;
                var_agg += (alpha * est.stderr) * (alpha * est.stderr);
            }
            let total: f64 = alphas.iter().sum();
            let target = total - beta;
            let stderr = var_agg.sqrt();
            let ok = agg >= target - 3.0 * stderr;
            checks.push(ConstraintCheck {
                belief_index: None,
                estimate: agg,
                stderr,
                target,
                pass: ok,
            });
        }
    }
    pass &= checks.iter().all(|c| c.pass);

    // Budget attainment: Monte Carlo against x₀ plus the quadrature residual.
    let budget_est = check_budget(
        prior,
        params,
        utility,
        &solution,
        floor,
        settings.n_paths,
        settings.seed.wrapping_add(0x5eed),
    )?;
    let budget_ok = (budget_est.estimate - params.x0).abs() <= 3.0 * budget_est.stderr
        && solution.budget_residual.abs() <= BUDGET_RESIDUAL_TOL;
    pass &= budget_ok;
    let budget_check = BudgetCheck {
        estimate: budget_est.estimate,
        stderr: budget_est.stderr,
        target: params.x0,
        quadrature_residual: solution.budget_residual,
        pass: budget_ok,
    };

    // Strategy-level checks exist only where the strategy does (power CRRA).
    let ctx = StrategyContext::new(prior, params, utility, &solution, floor).ok();
    let wealth_identity = ctx.as_ref().map(|c| {
        let h00 = c.h(0.0, 0.0).expect("t = 0 is in the domain");
        let ok = (h00 - params.x0).abs() <= WEALTH_IDENTITY_TOL;
        WealthIdentityCheck {
            h00,
            x0: params.x0,
            pass: ok,
        }
    });
    if let Some(w) = &wealth_identity {
        pass &= w.pass;
    }

    let replication = match &ctx {
        Some(c) if settings.replication_paths > 0 && !settings.step_counts.is_empty() => {
            let results = check_replication(
                c,
                prior,
                utility,
                &solution,
                floor,
                settings.replication_paths,
                &settings.step_counts,
                settings.seed.wrapping_add(0x4e9),
            )?;
            let mut sorted = results.clone();
            sorted.sort_by_key(|r| r.n_steps);
            let mut factors = Vec::new();
            for w in sorted.windows(2) {
                if w[1].n_steps == 2 * w[0].n_steps && w[0].rms_error > 0.0 {
                    factors.push(w[1].rms_error / w[0].rms_error);
                }
            }
            let ok = factors
                .iter()
                .all(|&f| f >= HALVING_BAND.0 && f <= HALVING_BAND.1);
            pass &= ok;
            Some(ReplicationCheck {
                results,
                halving_factors: factors,
                pass: ok,
            })
        }
        _ => None,
    };

    // Comparative statics under random FSD-ordered belief pairs; needs a β.
    let beta = match constraint {
        ConstraintSpec::Var { beta, .. }
        | ConstraintSpec::RobustMin { beta, .. }
        | ConstraintSpec::Weighted { beta, .. } => Some(*beta),
        _ => None,
    };
    let fsd = match beta {
        Some(beta) if settings.fsd_pairs > 0 && floor > 0.0 => {
            let pairs = random_fsd_pairs(
                prior.len(),
                settings.fsd_pairs,
                settings.seed.wrapping_add(0xf5d),
            )?;
            let mut violations = 0;
            for (weaker, stronger) in &pairs {
                let cmp = check_fsd_pair(prior, params, utility, floor, beta, weaker, stronger)?;
                if !cmp.ok {
                    violations += 1;
                }
            }
            let ok = violations == 0;
            pass &= ok;
            Some(FsdCheck {
                n_pairs: pairs.len(),
                violations,
                pass: ok,
            })
        }
        _ => None,
    };

    Ok(ValidationReport {
        regime: solution.regime,
        lambda1: solution.lambda1,
        xi_lower: solution.xi_lower,
        xi_upper: solution.xi_upper,
        n_paths: settings.n_paths,
        seed: settings.seed,
        constraint: checks,
        budget: budget_check,
        wealth_identity,
        replication,
        fsd,
        pass,
    })
}
