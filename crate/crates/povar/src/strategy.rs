//! The optimal trading strategy replicating the constrained terminal wealth.
//!
//! For power utility the time-t wealth admits a quadrature representation.
//! With A = (λ₁e^{−rT})^{−1/γ}, G(u) = F(T, u)^{1/γ}, s = √(T−t) and the
//! Y-space images y̲ > ȳ of the thresholds ξ̲ < ξ̄ (the order reverses
//! because ξ is decreasing in y), conditioning on Y_t = y gives
//!
//!   h(t, y) = e^{−r(T−t)} [ A·(∫_{ã}^{∞} + ∫_{−∞}^{ā}) G(y + sz)φ(z) dz
//!                           + L·(Φ(ã) − Φ(ā)) ],
//!
//! where ã = (y̲ − y)/s and ā = (ȳ − y)/s. Differentiating in y, the
//! boundary terms at y̲ cancel exactly (A·G(y̲) = I(λ₁ξ̲) = L — the payoff
//! is continuous there) while the discontinuity at ȳ leaves a jump term:
//!
//!   h_y(t, y) = e^{−r(T−t)} [ (A/γ)·∫ G(y + sz)·θ̂(T, y + sz)·φ(z) dz
//!                             + (φ(ā)/s)·(L − I(λ₁ξ̄)) ],
//!
//! using G′ = G·θ̂/γ. The strategy follows without any Malliavin machinery:
//! the invested amount is π*(t) = h_y(t, Y_t)/σ and the invested fraction
//! h_y/(σh) — for a single-point prior this collapses to the constant
//! Merton fraction θ/(γσ).

use crate::error::{Error, Result};
use crate::filter::{self, Prior};
use crate::market::MarketParams;
use crate::numeric::{self, norm_cdf, norm_pdf};
use crate::solver::{Regime, Solution};
use crate::utility::Utility;

/// Strategy evaluation refuses t > T − TIME_GUARD: ever larger positions
/// arise as the remaining time shrinks near a flat-region boundary.
pub const TIME_GUARD: f64 = 1e-6;
/// Integration range in standard deviations of the remaining noise.
const Z_RANGE: f64 = 8.0;
/// Base order of the adaptive rule behind `h`/`h_y`.
const H_BASE_ORDER: usize = 24;
/// Fixed order of the replication fast path (per smooth segment).
const FAST_ORDER: usize = 24;

/// Precomputed evaluation context for h, h_y and the strategy.
#[derive(Debug, Clone)]
pub struct StrategyContext {
    prior: Prior,
    params: MarketParams,
    gamma: f64,
    floor: f64,
    regime: Regime,
    /// Y-space image of ξ̲ (upper edge of the flat region in y).
    y_lower: Option<f64>,
    /// Y-space image of ξ̄ (lower edge of the flat region in y).
    y_upper: Option<f64>,
    /// A = (λ₁ e^{−rT})^{−1/γ}.
    a_coef: f64,
    /// L − I(λ₁ξ̄), the payoff discontinuity at ξ̄ (0 without an upper cut).
    jump_size: f64,
    /// Absolute quadrature tolerance, scaled to the initial wealth.
    quad_tol: f64,
}

impl StrategyContext {
    pub fn new(
        prior: &Prior,
        params: &MarketParams,
        utility: &Utility,
        solution: &Solution,
        floor: f64,
    ) -> Result<Self> {
        params.validate()?;
        utility.validate()?;
        let gamma = match utility {
            Utility::Power { gamma } => *gamma,
            Utility::Log => {
                return Err(Error::Capability(
                    "the closed-form strategy is implemented for power utility only".into(),
                ))
            }
        };
        if !prior.all_nonneg() {
            return Err(Error::Capability(
                "strategy evaluation requires a non-negative prior support".into(),
            ));
        }
        if solution.regime != Regime::Merton && !prior.strictly_monotone() {
            // Threshold images need the mixture inverse, hence some positive
            // support value; the Merton strategy does not.
            return Err(Error::Capability(
                "floor-constrained strategies require a prior support with some positive value"
                    .into(),
            ));
        }
        if !(solution.lambda1 > 0.0) || !solution.lambda1.is_finite() {
            return Err(Error::InvalidInput(format!(
                "strategy needs lambda1 > 0, got {}",
                solution.lambda1
            )));
        }
        let t = params.horizon;
        let disc_t = (-params.r * t).exp();
        let a_coef = (solution.lambda1 * disc_t).powf(-1.0 / gamma);
        let (y_lower, y_upper, jump_size) = match solution.regime {
            Regime::Merton => (None, None, 0.0),
            Regime::Insurance => {
                let yl = filter::inverse_f(prior, t, disc_t / solution.xi_lower)?;
                (Some(yl), None, 0.0)
            }
            Regime::Constrained => {
                let xi_up = solution.xi_upper.ok_or_else(|| {
                    Error::InvalidInput(
                        "constrained solution is missing its upper threshold".into(),
                    )
                })?;
                let yl = filter::inverse_f(prior, t, disc_t / solution.xi_lower)?;
                let yu = filter::inverse_f(prior, t, disc_t / xi_up)?;
                let i_at_upper = (solution.lambda1 * xi_up).powf(-1.0 / gamma);
                (Some(yl), Some(yu), floor - i_at_upper)
            }
        };
        Ok(StrategyContext {
            prior: prior.clone(),
            params: *params,
            gamma,
            floor,
            regime: solution.regime,
            y_lower,
            y_upper,
            a_coef,
            jump_size,
            quad_tol: 1e-9 * params.x0,
        })
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn y_lower(&self) -> Option<f64> {
        self.y_lower
    }

    pub fn y_upper(&self) -> Option<f64> {
        self.y_upper
    }

    pub fn params(&self) -> &MarketParams {
        &self.params
    }

    fn remaining(&self, t: f64) -> Result<f64> {
        let horizon = self.params.horizon;
        if !(t >= 0.0) || !(t < horizon) {
            return Err(Error::Domain(format!(
                "wealth function needs t in [0, T), got t = {t} with T = {horizon}"
            )));
        }
        Ok(horizon - t)
    }

    /// G(u) = F(T, u)^{1/γ}.
    fn g_pow(&self, u: f64) -> f64 {
        (filter::log_mixture_f(&self.prior, self.params.horizon, u) / self.gamma).exp()
    }

    /// (G(u), G(u)·θ̂(T, u)) in a single likelihood pass.
    fn g_and_gtheta(&self, u: f64) -> (f64, f64) {
        let t = self.params.horizon;
        let values = self.prior.values();
        let probs = self.prior.probs();
        let mut m = f64::NEG_INFINITY;
        for &v in values {
            m = m.max(v * u - 0.5 * v * v * t);
        }
        let (mut f, mut fy) = (0.0, 0.0);
        for (&v, &p) in values.iter().zip(probs) {
            let w = p * (v * u - 0.5 * v * v * t - m).exp();
            f += w;
            fy += v * w;
        }
        let g = ((m + f.ln()) / self.gamma).exp();
        (g, g * fy / f)
    }

    /// The z-space cut points (ā, ã) for remaining time τ, plus √τ.
    fn cuts(&self, tau: f64, y: f64) -> (Option<f64>, Option<f64>, f64) {
        let s = tau.sqrt();
        let a_bar = self.y_upper.map(|yu| (yu - y) / s);
        let a_tilde = self.y_lower.map(|yl| (yl - y) / s);
        (a_bar, a_tilde, s)
    }

    /// Sum of the I-region integrals of `integrand` plus the flat-region mass
    /// term `flat_coef·(Φ(ã) − Φ(ā))`, with infinite-range pieces truncated
    /// at ±Z_RANGE standard deviations.
    fn piecewise<F: Fn(f64) -> f64, Q: Fn(&F, f64, f64) -> f64>(
        &self,
        a_bar: Option<f64>,
        a_tilde: Option<f64>,
        integrand: &F,
        quad: Q,
        flat_coef: f64,
    ) -> f64 {
        let z = Z_RANGE;
        let mut acc = 0.0;
        match (a_bar, a_tilde) {
            (None, None) => acc += quad(integrand, -z, z),
            (None, Some(ag)) => {
                if ag < z {
                    acc += quad(integrand, ag.max(-z), z);
                }
                acc += flat_coef * norm_cdf(ag);
            }
            (Some(ab), Some(ag)) => {
                if ab > -z {
                    acc += quad(integrand, -z, ab.min(z));
                }
                if ag < z {
                    acc += quad(integrand, ag.max(-z), z);
                }
                acc += flat_coef * (norm_cdf(ag) - norm_cdf(ab));
            }
            (Some(_), None) => unreachable!("an upper cut always comes with a lower cut"),
        }
        acc
    }

    /// Time-t wealth h(t, y) of the optimal strategy given Y_t = y.
    pub fn h(&self, t: f64, y: f64) -> Result<f64> {
        let tau = self.remaining(t)?;
        let (a_bar, a_tilde, s) = self.cuts(tau, y);
        let integrand = |z: f64| self.a_coef * self.g_pow(y + s * z) * norm_pdf(z);
        let tol = self.quad_tol;
        let acc = self.piecewise(
            a_bar,
            a_tilde,
            &integrand,
            |f, a, b| numeric::gl_adaptive(f, a, b, tol, H_BASE_ORDER),
            self.floor,
        );
        Ok((-self.params.r * tau).exp() * acc)
    }

    /// ∂h/∂y — the sensitivity of wealth to the observation process.
    pub fn h_y(&self, t: f64, y: f64) -> Result<f64> {
        let tau = self.remaining(t)?;
        Ok(self.h_y_inner(tau, y, None))
    }

    /// Fixed-order variant for the replication loop; same math, no adaptivity.
    pub(crate) fn h_y_fast(&self, t: f64, y: f64) -> f64 {
        let tau = self.params.horizon - t;
        debug_assert!(tau > 0.0);
        self.h_y_inner(tau, y, Some(FAST_ORDER))
    }

    fn h_y_inner(&self, tau: f64, y: f64, fixed_order: Option<usize>) -> f64 {
        let (a_bar, a_tilde, s) = self.cuts(tau, y);
        let scale = self.a_coef / self.gamma;
        let integrand = |z: f64| {
            let (_, gtheta) = self.g_and_gtheta(y + s * z);
            scale * gtheta * norm_pdf(z)
        };
        let tol = self.quad_tol;
        let mut acc = self.piecewise(
            a_bar,
            a_tilde,
            &integrand,
            |f: &_, a, b| match fixed_order {
                Some(n) => numeric::gl_integrate(f, a, b, n),
                None => numeric::gl_adaptive(f, a, b, tol, H_BASE_ORDER),
            },
            0.0,
        );
        if let Some(ab) = a_bar {
            acc += norm_pdf(ab) / s * self.jump_size;
        }
        (-self.params.r * tau).exp() * acc
    }

    fn check_strategy_time(&self, t: f64) -> Result<()> {
        let horizon = self.params.horizon;
        if !(t >= 0.0) || !(t <= horizon - TIME_GUARD) {
            return Err(Error::Domain(format!(
                "strategy evaluation needs t in [0, T − {TIME_GUARD:e}], got t = {t} with \
                 T = {horizon}"
            )));
        }
        Ok(())
    }

    /// Optimal invested amount π*(t) = h_y(t, Y_t)/σ given Y_t = y.
    pub fn pi_star(&self, t: f64, y: f64) -> Result<f64> {
        self.check_strategy_time(t)?;
        Ok(self.h_y(t, y)? / self.params.sigma)
    }

    /// Optimal invested fraction of wealth, h_y/(σ·h).
    pub fn pi_fraction(&self, t: f64, y: f64) -> Result<f64> {
        self.check_strategy_time(t)?;
        Ok(self.h_y(t, y)? / (self.params.sigma * self.h(t, y)?))
    }
}
