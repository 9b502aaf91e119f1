//! Calibration of the constrained optimal terminal wealth.
//!
//! Given utility U, floor L and a VaR-type constraint at level β, the optimal
//! terminal wealth is piecewise in the state-price density ξ_T:
//!
//!   X*_T = I(λ₁ξ_T)·1{ξ_T < ξ̲}  +  L·1{ξ̲ ≤ ξ_T < ξ̄}  +  I(λ₁ξ_T)·1{ξ̄ ≤ ξ_T}
//!
//! with ξ̲ = U′(L)/λ₁ and ξ̄ the β-quantile threshold of the belief-weighted
//! tail of ξ_T. Calibration order matters: ξ̄ depends only on the constraint
//! measure(s), so it is solved first; λ₁ then solves the budget
//! E[ξ_T X*_T] = x₀, with ξ̲ recomputed from λ₁ inside every iterate.
//!
//! All ξ-weighted expectations are evaluated under the risk-neutral measure
//! (E_P[ξ_T·g] = e^{−rT}·E_Q[g], Y_T ~ N(0, T) under Q), which removes the
//! mixture from the integrating density. Both roots use bisection: the tail
//! is strictly decreasing in ξ̄ and the budget strictly decreasing in λ₁, and
//! the budget integrand has a jump at the ξ̄ boundary where a derivative
//! method would misbehave.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::{self, Prior};
use crate::market::{xi_tail_prob, BeliefMeasure, MarketParams};
use crate::numeric::{self, norm_cdf};
use crate::utility::Utility;

/// Gauss–Legendre order per smooth sub-interval of the budget integral.
pub const BUDGET_GL_ORDER: usize = 2000;
/// Integration half-width in units of √T.
pub const QUAD_RANGE_SD: f64 = 8.0;
/// Relative tolerance on the calibrated λ₁.
pub const LAMBDA_RTOL: f64 = 1e-10;
/// Relative tolerance on the calibrated ξ̄.
pub const XI_UPPER_RTOL: f64 = 1e-10;

/// Which probability measure(s) define the terminal-wealth floor constraint
/// P(X_T ≥ L) ≥ 1 − β and at what level.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSpec {
    /// β = 1: the floor constraint never binds.
    Unconstrained,
    /// β = 0: the floor must hold almost surely.
    Insurance,
    /// Constraint under a single belief measure.
    Var { belief: BeliefMeasure, beta: f64 },
    /// Worst case over several beliefs: min_i P_i(X_T ≥ L) ≥ 1 − β.
    RobustMin {
        beliefs: Vec<BeliefMeasure>,
        beta: f64,
    },
    /// Weighted mixture Σ α_i P_i(X_T < L) ≤ β. The α are used exactly as
    /// given — no normalization is imposed.
    Weighted {
        alphas: Vec<f64>,
        beliefs: Vec<BeliefMeasure>,
        beta: f64,
    },
}

impl ConstraintSpec {
    pub fn validate(&self, prior: &Prior) -> Result<()> {
        let check_beta = |beta: f64| {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::InvalidInput(format!(
                    "beta must lie in (0, 1) for this constraint kind (got {beta}); \
                     use the unconstrained/insurance kinds for beta = 1/0"
                )));
            }
            Ok(())
        };
        match self {
            ConstraintSpec::Unconstrained | ConstraintSpec::Insurance => Ok(()),
            ConstraintSpec::Var { belief, beta } => {
                check_beta(*beta)?;
                belief.check_support(prior)
            }
            ConstraintSpec::RobustMin { beliefs, beta } => {
                check_beta(*beta)?;
                if beliefs.is_empty() {
                    return Err(Error::InvalidInput(
                        "robust_min needs at least one belief".into(),
                    ));
                }
                beliefs.iter().try_for_each(|b| b.check_support(prior))
            }
            ConstraintSpec::Weighted {
                alphas,
                beliefs,
                beta,
            } => {
                check_beta(*beta)?;
                if beliefs.is_empty() || alphas.len() != beliefs.len() {
                    return Err(Error::InvalidInput(format!(
                        "weighted constraint needs matching non-empty alphas/beliefs \
                         (got {}/{})",
                        alphas.len(),
                        beliefs.len()
                    )));
                }
                if alphas.iter().any(|&a| !(a >= 0.0) || !a.is_finite()) {
                    return Err(Error::InvalidInput(
                        "weighted alphas must be non-negative and finite".into(),
                    ));
                }
                if alphas.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::InvalidInput(
                        "weighted alphas must not all be zero".into(),
                    ));
                }
                beliefs.iter().try_for_each(|b| b.check_support(prior))
            }
        }
    }

    /// The beliefs this constraint evaluates probabilities under.
    pub fn beliefs(&self) -> &[BeliefMeasure] {
        match self {
            ConstraintSpec::Unconstrained | ConstraintSpec::Insurance => &[],
            ConstraintSpec::Var { belief, .. } => std::slice::from_ref(belief),
            ConstraintSpec::RobustMin { beliefs, .. } => beliefs,
            ConstraintSpec::Weighted { beliefs, .. } => beliefs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Merton,
    Constrained,
    Insurance,
}

/// Calibrated solution. `xi_upper` is `None` when no upper threshold exists
/// (unconstrained, insurance); in the merton regime reached because the
/// constraint does not bind, the computed ξ̄ is kept for diagnostics (then
/// xi_lower ≥ xi_upper). `xi_lower` is +∞ when L = 0.
#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    pub lambda1: f64,
    pub xi_lower: f64,
    pub xi_upper: Option<f64>,
    pub regime: Regime,
    /// budget(λ₁) − x₀ at the calibrated multiplier.
    pub budget_residual: f64,
    /// P_i(X*_T ≥ L) under each constraint belief, in input order.
    pub constraint_prob: Vec<f64>,
}

/// Affordability of the floor: true iff x₀ ≥ E[ξ_T·L·1{ξ_T ≤ ξ̄}]
/// = L·e^{−rT}·Q(ξ_T ≤ ξ̄). Closed form — {ξ_T ≤ ξ̄} = {Y_T ≥ ȳ} and Y_T is
/// standard Brownian under Q.
pub fn feasibility_check(
    prior: &Prior,
    params: &MarketParams,
    floor: f64,
    xi_upper: f64,
) -> Result<bool> {
    params.validate()?;
    if !(xi_upper > 0.0) {
        // Degenerate threshold: the insured event is empty, nothing to fund.
        return Ok(true);
    }
    if floor <= 0.0 {
        return Ok(true);
    }
    let cost = insured_floor_cost(prior, params, floor, xi_upper)?;
    Ok(params.x0 >= cost)
}

/// E[ξ_T·L·1{ξ_T ≤ ξ̄}], the cost of the floor payment on the insured event.
pub fn insured_floor_cost(
    prior: &Prior,
    params: &MarketParams,
    floor: f64,
    xi_upper: f64,
) -> Result<f64> {
    let t = params.horizon;
    let disc = (-params.r * t).exp();
    let q_insured = if xi_upper.is_infinite() {
        1.0
    } else {
        let y_bar = filter::inverse_f(prior, t, disc / xi_upper)?;
        1.0 - norm_cdf(y_bar / t.sqrt())
    };
    Ok(floor * disc * q_insured)
}

/// The β-quantile threshold ξ̄ for the parametric constraint kinds.
pub fn solve_xi_upper(
    prior: &Prior,
    params: &MarketParams,
    constraint: &ConstraintSpec,
) -> Result<f64> {
    params.validate()?;
    constraint.validate(prior)?;
    if !prior.strictly_monotone() {
        return Err(Error::Capability(
            "quantile threshold requires a non-negative prior support with some positive value"
                .into(),
        ));
    }
    match constraint {
        ConstraintSpec::Unconstrained | ConstraintSpec::Insurance => Err(Error::InvalidInput(
            "xi_upper exists only for var/robust_min/weighted constraints".into(),
        )),
        ConstraintSpec::Var { belief, beta } => tail_root(prior, params, &[(1.0, belief)], *beta),
        ConstraintSpec::RobustMin { beliefs, beta } => {
            let mut best = f64::NEG_INFINITY;
            for b in beliefs {
                best = best.max(tail_root(prior, params, &[(1.0, b)], *beta)?);
            }
            Ok(best)
        }
        ConstraintSpec::Weighted {
            alphas,
            beliefs,
            beta,
        } => {
            let weighted: Vec<(f64, &BeliefMeasure)> =
                alphas.iter().copied().zip(beliefs.iter()).collect();
            tail_root(prior, params, &weighted, *beta)
        }
    }
}

/// Root of Σ αᵢ·P̃ᵢ(ξ_T > x) = β in x, solved in log-space by bisection.
fn tail_root(
    prior: &Prior,
    params: &MarketParams,
    weighted_beliefs: &[(f64, &BeliefMeasure)],
    beta: f64,
) -> Result<f64> {
    let g = |u: f64| -> f64 {
        let x = u.exp();
        weighted_beliefs
            .iter()
            .map(|(a, b)| {
                if *a == 0.0 {
                    0.0
                } else {
                    a * xi_tail_prob(prior, b, params, x).expect("validated inputs")
                }
            })
            .sum::<f64>()
            - beta
    };
    let total: f64 = weighted_beliefs.iter().map(|(a, _)| a).sum();
    if total <= beta {
        return Err(Error::Numeric(format!(
            "no quantile root: total constraint weight {total} does not exceed beta {beta}"
        )));
    }
    let (a, b) = numeric::expand_bracket(g, 0.0, 1.0, 1.6, 200).map_err(|e| {
        Error::Numeric(format!(
            "quantile bracket search failed for beta={beta}: {e}"
        ))
    })?;
    if a == b {
        return Ok(a.exp());
    }
    Ok(numeric::bisect(g, a, b, 0.0, XI_UPPER_RTOL)?.exp())
}

/// Flat-region geometry in Y-space for the budget quadrature.
/// In ξ the flat region is [ξ̲, ξ̄); since ξ is decreasing in y it maps to
/// (ȳ, y̲] with ȳ ≤ y̲.
fn flat_region_y(
    prior: &Prior,
    params: &MarketParams,
    xi_lower: f64,
    xi_upper: Option<f64>,
) -> Result<Option<(f64, f64)>> {
    let xi_up = xi_upper.unwrap_or(f64::INFINITY);
    if !(xi_lower < xi_up) || xi_lower.is_infinite() {
        return Ok(None); // empty flat region: pure Merton-style payoff
    }
    let t = params.horizon;
    let disc = (-params.r * t).exp();
    let y_low = filter::inverse_f(prior, t, disc / xi_lower)?;
    let y_up = if xi_up.is_infinite() {
        f64::NEG_INFINITY
    } else {
        filter::inverse_f(prior, t, disc / xi_up)?
    };
    Ok(Some((y_up, y_low)))
}

/// The budget functional E[ξ_T·X*_T] for the piecewise map with the given
/// thresholds, by Gauss–Legendre quadrature in Y-space under Q, split at the
/// region boundaries.
pub fn budget(
    prior: &Prior,
    params: &MarketParams,
    utility: &Utility,
    floor: f64,
    xi_lower: f64,
    xi_upper: Option<f64>,
    lambda1: f64,
) -> Result<f64> {
    params.validate()?;
    utility.validate()?;
    if !(lambda1 > 0.0) || !lambda1.is_finite() {
        return Err(Error::InvalidInput(format!(
            "budget needs lambda1 > 0, got {lambda1}"
        )));
    }
    let t = params.horizon;
    let sqrt_t = t.sqrt();
    let half_width = QUAD_RANGE_SD * sqrt_t;
    let disc = (-params.r * t).exp();
    // Q-density of Y_T and the Merton-style integrand I(λ₁ξ(y)).
    let phi_t = |y: f64| numeric::norm_pdf(y / sqrt_t) / sqrt_t;
    let integrand = |y: f64| -> f64 {
        let xi = (-params.r * t - filter::log_mixture_f(prior, t, y)).exp();
        utility
            .inverse_marginal(lambda1 * xi)
            .expect("positive argument")
            * phi_t(y)
    };

    let region = flat_region_y(prior, params, xi_lower, xi_upper)?;
    let mut total = 0.0;
    match region {
        None => {
            total += numeric::gl_integrate(&integrand, -half_width, half_width, BUDGET_GL_ORDER);
        }
        Some((y_up, y_low)) => {
            let a = y_up.clamp(-half_width, half_width);
            let b = y_low.clamp(-half_width, half_width);
            // Worst states: ξ ≥ ξ̄  ⇔  Y ≤ ȳ.
            if a > -half_width {
                total += numeric::gl_integrate(&integrand, -half_width, a, BUDGET_GL_ORDER);
            }
            // Floor states: L·Q(ȳ < Y ≤ y̲).
            if b > a {
                total += floor * numeric::gl_integrate(&|y| phi_t(y), a, b, BUDGET_GL_ORDER);
            }
            // Good states: ξ < ξ̲  ⇔  Y > y̲.
            if b < half_width {
                total += numeric::gl_integrate(&integrand, b, half_width, BUDGET_GL_ORDER);
            }
        }
    }
    Ok(disc * total)
}

/// Solve budget(λ₁) = x₀ for λ₁ with ξ̲ = U′(L)/λ₁ recoupled at every
/// iterate. Returns (λ₁, ξ̲). `floor = 0` gives the unconstrained problem.
pub fn solve_lambda1(
    prior: &Prior,
    params: &MarketParams,
    utility: &Utility,
    floor: f64,
    xi_upper: Option<f64>,
) -> Result<(f64, f64)> {
    params.validate()?;
    utility.validate()?;
    if !(floor >= 0.0) || !floor.is_finite() {
        return Err(Error::InvalidInput(format!(
            "floor must be non-negative and finite, got {floor}"
        )));
    }
    let xi_lower_of = |lam: f64| -> f64 {
        if floor > 0.0 {
            utility.u_prime(floor).expect("positive floor") / lam
        } else {
            f64::INFINITY
        }
    };
    let f = |u: f64| -> f64 {
        let lam = u.exp();
        budget(
            prior,
            params,
            utility,
            floor,
            xi_lower_of(lam),
            xi_upper,
            lam,
        )
        .expect("validated inputs")
            - params.x0
    };
    // Seed from the marginal utility of initial wealth — the right order of
    // magnitude for every CRRA member.
    let u0 = utility
        .u_prime(params.x0)
        .expect("positive initial wealth")
        .ln();
    let (a, b) = numeric::expand_bracket(f, u0, std::f64::consts::LN_2, 1.7, 220)
        .map_err(|e| Error::Numeric(format!("lambda1 bracket search failed: {e}")))?;
    let u = if a == b {
        a
    } else {
        numeric::bisect(f, a, b, 0.0, LAMBDA_RTOL)?
    };
    let lam = u.exp();
    Ok((lam, xi_lower_of(lam)))
}

/// The piecewise optimal terminal wealth map at state price `xi`.
pub fn optimal_terminal_wealth(
    solution: &Solution,
    utility: &Utility,
    floor: f64,
    xi: f64,
) -> Result<f64> {
    if !(xi > 0.0) || !xi.is_finite() {
        return Err(Error::Domain(format!(
            "terminal wealth map needs xi > 0, got {xi}"
        )));
    }
    let merton = |xi: f64| utility.inverse_marginal(solution.lambda1 * xi);
    match solution.regime {
        Regime::Merton => merton(xi),
        Regime::Insurance => Ok(merton(xi)?.max(floor)),
        Regime::Constrained => {
            let xi_up = solution.xi_upper.expect("constrained regime has xi_upper");
            if xi >= solution.xi_lower && xi < xi_up {
                Ok(floor)
            } else {
                merton(xi)
            }
        }
    }
}

/// Full calibration: constraint threshold, feasibility, regime detection,
/// budget multiplier, diagnostics.
pub fn solve(
    prior: &Prior,
    params: &MarketParams,
    utility: &Utility,
    constraint: &ConstraintSpec,
    floor: f64,
) -> Result<Solution> {
    params.validate()?;
    utility.validate()?;
    constraint.validate(prior)?;
    if !(floor >= 0.0) || !floor.is_finite() {
        return Err(Error::InvalidInput(format!(
            "floor must be non-negative and finite, got {floor}"
        )));
    }
    if !prior.all_nonneg() {
        return Err(Error::Capability(
            "calibration requires a non-negative prior support".into(),
        ));
    }
    // Threshold computations invert the mixture, which needs some positive
    // support value; the pure Merton problem does not.
    let require_thresholds = |()| -> Result<()> {
        if !prior.strictly_monotone() {
            return Err(Error::Capability(
                "floor constraints require a prior support with some positive value".into(),
            ));
        }
        Ok(())
    };

    let tail = |belief: &BeliefMeasure, x: f64| -> Result<f64> {
        if x.is_infinite() {
            Ok(0.0)
        } else {
            xi_tail_prob(prior, belief, params, x)
        }
    };

    // A floor of zero makes any constraint vacuous.
    let vacuous = floor == 0.0;

    let build = |lambda1: f64,
                 xi_lower: f64,
                 xi_upper: Option<f64>,
                 regime: Regime,
                 switch: f64|
     -> Result<Solution> {
        // The payoff whose cost the residual reports is fixed by the regime,
        // not by the diagnostic thresholds (a Merton payoff has no flat
        // region even though ξ̲ is still reported).
        let (bxl, bxu) = match regime {
            Regime::Merton => (f64::INFINITY, None),
            Regime::Insurance => (xi_lower, None),
            Regime::Constrained => (xi_lower, xi_upper),
        };
        let residual = budget(prior, params, utility, floor, bxl, bxu, lambda1)? - params.x0;
        let mut probs = Vec::new();
        for b in constraint.beliefs() {
            probs.push(match regime {
                Regime::Insurance => 1.0,
                _ => 1.0 - tail(b, switch)?,
            });
        }
        Ok(Solution {
            lambda1,
            xi_lower,
            xi_upper,
            regime,
            budget_residual: residual,
            constraint_prob: probs,
        })
    };

    match constraint {
        _ if vacuous => {
            let (lam, xi_lower) = solve_lambda1(prior, params, utility, 0.0, None)?;
            build(lam, xi_lower, None, Regime::Merton, f64::INFINITY)
        }
        ConstraintSpec::Unconstrained => {
            let (lam, _) = solve_lambda1(prior, params, utility, 0.0, None)?;
            let xi_lower = utility.u_prime(floor)? / lam;
            build(lam, xi_lower, None, Regime::Merton, xi_lower)
        }
        ConstraintSpec::Insurance => {
            require_thresholds(())?;
            let cost = floor * (-params.r * params.horizon).exp();
            if params.x0 < cost {
                return Err(Error::Infeasible(format!(
                    "almost-sure floor {floor} costs {cost:.6} > initial wealth {}",
                    params.x0
                )));
            }
            let (lam, xi_lower) = solve_lambda1(prior, params, utility, floor, None)?;
            build(lam, xi_lower, None, Regime::Insurance, f64::INFINITY)
        }
        _ => {
            require_thresholds(())?;
            let xi_upper = solve_xi_upper(prior, params, constraint)?;
            if !feasibility_check(prior, params, floor, xi_upper)? {
                let cost = insured_floor_cost(prior, params, floor, xi_upper)?;
                return Err(Error::Infeasible(format!(
                    "floor {floor} on the insured event costs {cost:.6} > initial wealth {}",
                    params.x0
                )));
            }
            // If the unconstrained optimum already satisfies the constraint
            // (ξ̲ at the Merton multiplier reaches past ξ̄), it is optimal.
            let (lam_merton, _) = solve_lambda1(prior, params, utility, 0.0, None)?;
            let xi_lower_merton = utility.u_prime(floor)? / lam_merton;
            if xi_lower_merton >= xi_upper {
                return build(
                    lam_merton,
                    xi_lower_merton,
                    Some(xi_upper),
                    Regime::Merton,
                    xi_lower_merton,
                );
            }
            let (lam, xi_lower) = solve_lambda1(prior, params, utility, floor, Some(xi_upper))?;
            build(lam, xi_lower, Some(xi_upper), Regime::Constrained, xi_upper)
        }
    }
}
