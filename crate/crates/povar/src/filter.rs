//! Bayesian filtering of the market price of risk.
//!
//! The unknown market price of risk θ takes one of finitely many values ϑ_k
//! with prior weights p_k. Observing Y(t) = W(t) + θt, the likelihood of
//! value ϑ is L_t(ϑ, y) = exp(ϑy − ½ϑ²t) and the prior-weighted mixture
//!
//!   F(t, y) = Σ_k p_k · exp(ϑ_k y − ½ϑ_k² t)
//!
//! carries everything downstream: the posterior is p_k L_t(ϑ_k, y)/F, the
//! drift estimate is θ̂ = F_y/F, and the state-price density of the filtered
//! market is e^{−rt}/F (see the `market` module).
//!
//! All mixture evaluations run in log space with a max-shift so that long
//! horizons and large |y| cannot overflow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;

/// Discrete prior over market-price-of-risk values. Canonically sorted by
/// value on construction; duplicate values are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    values: Vec<f64>,
    probs: Vec<f64>,
    all_nonneg: bool,
}

impl Prior {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::InvalidInput(format!(
                "prior needs matching non-empty values/probs (got {}/{})",
                values.len(),
                probs.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("prior values must be finite".into()));
        }
        if probs.iter().any(|&p| !(p > 0.0) || p > 1.0) {
            return Err(Error::InvalidInput(
                "prior probabilities must lie in (0, 1]".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "prior probabilities sum to {total}, expected 1 within 1e-12"
            )));
        }
        let mut pairs: Vec<(f64, f64)> = values.into_iter().zip(probs).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput("prior values must be distinct".into()));
        }
        let (values, probs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let all_nonneg = values[0] >= 0.0;
        Ok(Prior {
            values,
            probs,
            all_nonneg,
        })
    }

    /// Degenerate single-point prior (full information).
    pub fn single(theta: f64) -> Result<Self> {
        Prior::new(vec![theta], vec![1.0])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one support point
    }

    /// True iff every support value is ≥ 0. Monotonicity of y ↦ F(t, y) —
    /// and with it everything built on inverting F — additionally needs one
    /// strictly positive value; see [`Prior::strictly_monotone`].
    pub fn all_nonneg(&self) -> bool {
        self.all_nonneg
    }

    /// True iff F(t, ·) is strictly increasing: all values non-negative and
    /// at least one positive.
    pub fn strictly_monotone(&self) -> bool {
        self.all_nonneg && *self.values.last().unwrap() > 0.0
    }

    /// Prior mean of θ (the drift estimate at time zero).
    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| v * p)
            .sum()
    }

    fn require_monotone(&self) -> Result<()> {
        if !self.strictly_monotone() {
            return Err(Error::Capability(
                "operation requires a non-negative prior support with some positive value".into(),
            ));
        }
        Ok(())
    }
}

fn require_time(t: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be non-negative, got {t}")));
    }
    Ok(())
}

/// Likelihood weight L_t(ϑ, y) = exp(ϑy − ½ϑ²t).
pub fn likelihood(theta: f64, t: f64, y: f64) -> Result<f64> {
    require_time(t)?;
    Ok((theta * y - 0.5 * theta * theta * t).exp())
}

/// log F(t, y), the numerically safe primitive behind every mixture call.
pub(crate) fn log_mixture_f(prior: &Prior, t: f64, y: f64) -> f64 {
    numeric::log_sum_exp_weighted(
        prior
            .values
            .iter()
            .zip(&prior.probs)
            .map(|(&v, &p)| (v * y - 0.5 * v * v * t, p)),
    )
}

/// The mixture F(t, y) = Σ p_k L_t(ϑ_k, y).
pub fn mixture_f(prior: &Prior, t: f64, y: f64) -> Result<f64> {
    require_time(t)?;
    Ok(log_mixture_f(prior, t, y).exp())
}

/// ∂F/∂y = Σ p_k ϑ_k L_t(ϑ_k, y), computed with the same max-shift as F.
pub fn mixture_f_dy(prior: &Prior, t: f64, y: f64) -> Result<f64> {
    require_time(t)?;
    let m = prior
        .values
        .iter()
        .zip(&prior.probs)
        .map(|(&v, _)| v * y - 0.5 * v * v * t)
        .fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = prior
        .values
        .iter()
        .zip(&prior.probs)
        .map(|(&v, &p)| p * v * (v * y - 0.5 * v * v * t - m).exp())
        .sum();
    Ok(s * m.exp())
}

/// Inverse of y ↦ F(t, y) for monotone priors, by bracketed bisection with
/// geometric bracket expansion seeded from the single-point closed form
/// y ≈ (ln v + ½θ̂₀²t)/θ̂₀ at the prior-mean Sharpe ratio θ̂₀.
pub fn inverse_f(prior: &Prior, t: f64, v: f64) -> Result<f64> {
    require_time(t)?;
    prior.require_monotone()?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!(
            "inverse_f target must be positive and finite, got {v}"
        )));
    }
    let ln_v = v.ln();
    // When the smallest support value is 0 it contributes the constant p₁,
    // which is the infimum of F(t, ·); targets at or below it are unreachable.
    if prior.values[0] == 0.0 && ln_v <= prior.probs[0].ln() {
        return Err(Error::Range(format!(
            "target {v} is at or below the attainable infimum {} of the mixture",
            prior.probs[0]
        )));
    }
    let g = |y: f64| log_mixture_f(prior, t, y) - ln_v;
    let theta0 = prior.mean();
    let y0 = (ln_v + 0.5 * theta0 * theta0 * t) / theta0;
    let (a, b) = numeric::expand_bracket(g, y0, 1.0, 1.6, 200)?;
    if a == b {
        return Ok(a);
    }
    // Tolerance is relative on F, i.e. absolute on log F; bisection on y with
    // a width tolerance scaled by the local slope achieves it. The slope
    // θ̂ is bounded by the support, so a conservative absolute y-tolerance
    // derived from the smallest positive slope suffices.
    let root = numeric::bisect(g, a, b, 0.0, 1e-13)?;
    Ok(root)
}

/// Posterior distribution of θ given Y(t) = y.
///
/// Panics if `t < 0` (precondition); always returns a normalized vector.
pub fn posterior(prior: &Prior, t: f64, y: f64) -> Vec<f64> {
    assert!(t >= 0.0, "posterior: time must be non-negative");
    let logs: Vec<f64> = prior
        .values
        .iter()
        .map(|&v| v * y - 0.5 * v * v * t)
        .collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = logs
        .iter()
        .zip(&prior.probs)
        .map(|(&l, &p)| p * (l - m).exp())
        .collect();
    let z: f64 = unnorm.iter().sum();
    unnorm.into_iter().map(|w| w / z).collect()
}

/// Conditional mean estimate θ̂(t) = E[θ | Y(t) = y] = F_y/F.
///
/// Panics if `t < 0` (precondition).
pub fn theta_hat(prior: &Prior, t: f64, y: f64) -> f64 {
    posterior(prior, t, y)
        .iter()
        .zip(&prior.values)
        .map(|(w, v)| w * v)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reference_prior() -> Prior {
        Prior::new(vec![0.15, 0.25, 0.35], vec![1.0 / 3.0; 3]).unwrap()
    }

    #[test]
    fn prior_validation() {
        assert!(Prior::new(vec![0.1, 0.1], vec![0.5, 0.5]).is_err()); // duplicate
        assert!(Prior::new(vec![0.1, 0.2], vec![0.6, 0.6]).is_err()); // sum != 1
        assert!(Prior::new(vec![0.1, 0.2], vec![1.1, -0.1]).is_err()); // negative
        assert!(Prior::new(vec![], vec![]).is_err());
        let p = Prior::new(vec![0.35, 0.15, 0.25], vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(p.values(), &[0.15, 0.25, 0.35]); // canonical sort
        assert_eq!(p.probs(), &[0.5, 0.3, 0.2]);
        assert!(p.all_nonneg());
        let signed = Prior::new(vec![-0.1, 0.2], vec![0.5, 0.5]).unwrap();
        assert!(!signed.all_nonneg());
    }

    #[test]
    fn likelihood_values() {
        assert_eq!(likelihood(0.25, 0.0, 0.0).unwrap(), 1.0);
        assert_eq!(likelihood(0.0, 10.0, 3.0).unwrap(), 1.0);
        // exp(0.15·1 − ½·0.15²·10) = exp(0.0375)
        let l = likelihood(0.15, 10.0, 1.0).unwrap();
        assert!((l - 1.038_211_997_081_825).abs() < 1e-14);
        assert!(likelihood(0.25, -1.0, 0.0).is_err());
    }

    #[test]
    fn mixture_reference_values() {
        let p = reference_prior();
        assert!((mixture_f(&p, 0.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        // Σ⅓·exp(ϑ·5 − ½ϑ²·10) at ϑ = 0.15, 0.25, 0.35
        let f = mixture_f(&p, 10.0, 5.0).unwrap();
        assert!((f - 2.521_432_088_007_829_4).abs() < 1e-13);
        let f0 = mixture_f(&p, 10.0, 0.0).unwrap();
        assert!((f0 - 0.722_402_388_171_448_1).abs() < 1e-14);
        // Degenerate mixture equals the single likelihood.
        let single = Prior::single(0.3).unwrap();
        let f = mixture_f(&single, 7.0, 2.0).unwrap();
        assert!((f - likelihood(0.3, 7.0, 2.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn mixture_no_overflow_at_long_horizon() {
        let p = reference_prior();
        let f = mixture_f(&p, 1e6, 1e5).unwrap();
        assert!(f.is_finite() || f == f64::INFINITY);
        // The log form must stay finite regardless.
        assert!(log_mixture_f(&p, 1e6, 1e5).is_finite());
    }

    #[test]
    fn posterior_normalizes_and_updates() {
        let p = reference_prior();
        let at0 = posterior(&p, 0.0, 0.0);
        for (a, b) in at0.iter().zip(p.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
        let post = posterior(&p, 10.0, 3.5);
        let sum: f64 = post.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let expect = [0.295_574_92, 0.343_409_06, 0.361_016_02];
        for (a, b) in post.iter().zip(expect) {
            assert!((a - b).abs() < 1e-8, "posterior {a} vs {b}");
        }
        let single = Prior::single(0.2).unwrap();
        assert_eq!(posterior(&single, 5.0, 1.0), vec![1.0]);
    }

    #[test]
    fn theta_hat_reference_values() {
        let p = reference_prior();
        assert!((theta_hat(&p, 0.0, 0.0) - 0.25).abs() < 1e-15);
        let th = theta_hat(&p, 10.0, 3.5);
        assert!((th - 0.256_544_110_214_626_6).abs() < 1e-13);
        // Posterior concentrates on the largest value for large y; at
        // y = 200 the runner-up weight is ~e^{−19.7} ≈ 3e-9.
        let th = theta_hat(&p, 10.0, 200.0);
        assert!((th - 0.35).abs() < 1e-8, "theta_hat(10, 200) = {th}");
        let single = Prior::single(0.3).unwrap();
        assert_eq!(theta_hat(&single, 3.0, -2.0), 0.3);
    }

    #[test]
    fn theta_hat_equals_f_ratio() {
        let p = reference_prior();
        for &(t, y) in &[(0.5, 0.3), (10.0, 3.5), (25.0, -12.0), (40.0, 30.0)] {
            let ratio = mixture_f_dy(&p, t, y).unwrap() / mixture_f(&p, t, y).unwrap();
            assert!((theta_hat(&p, t, y) - ratio).abs() < 1e-10);
        }
    }

    #[test]
    fn inverse_f_round_trips_and_closed_form() {
        let p = reference_prior();
        let y = inverse_f(&p, 10.0, mixture_f(&p, 10.0, 2.5).unwrap()).unwrap();
        assert!((y - 2.5).abs() < 1e-9);
        // Frozen reference roots.
        let y1 = inverse_f(&p, 10.0, 1.0).unwrap();
        assert!((y1 - 1.365_356_484_972_285_7).abs() < 1e-9);
        let yh = inverse_f(&p, 10.0, 0.5).unwrap();
        assert!((yh - (-1.608_740_786_394_964_8)).abs() < 1e-9);
        // Single-point closed form (ln v + ½θ²t)/θ.
        let s = Prior::single(0.2).unwrap();
        let v = 1.7;
        let y = inverse_f(&s, 8.0, v).unwrap();
        assert!((y - (v.ln() + 0.5 * 0.04 * 8.0) / 0.2).abs() < 1e-9);
    }

    #[test]
    fn inverse_f_refuses_bad_inputs() {
        let signed = Prior::new(vec![-0.1, 0.2], vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            inverse_f(&signed, 1.0, 1.0),
            Err(Error::Capability(_))
        ));
        let zero_only = Prior::single(0.0).unwrap();
        assert!(inverse_f(&zero_only, 1.0, 1.0).is_err());
        let p = reference_prior();
        assert!(matches!(inverse_f(&p, 1.0, 0.0), Err(Error::Domain(_))));
        // Floor when the smallest value is 0: inf F = p₁.
        let with_zero = Prior::new(vec![0.0, 0.3], vec![0.4, 0.6]).unwrap();
        assert!(matches!(
            inverse_f(&with_zero, 5.0, 0.39),
            Err(Error::Range(_))
        ));
        assert!(inverse_f(&with_zero, 5.0, 0.41).is_ok());
    }

    #[test]
    fn mixture_is_monotone_in_y() {
        let p = reference_prior();
        let mut last = f64::NEG_INFINITY;
        for i in 0..=100 {
            let y = -20.0 + 0.4 * i as f64;
            let f = mixture_f(&p, 10.0, y).unwrap();
            assert!(f > last);
            last = f;
        }
    }
}
