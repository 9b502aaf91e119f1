//! The filtered ("observationally complete") market: parameters, state-price
//! density, the distribution of ξ_T under prior-weighted measures, and path
//! simulation under the physical measure P and the risk-neutral measure Q.
//!
//! Key identities used throughout:
//! - ξ(t) = e^{−rt}/F(t, Y(t)) is the state-price density; ξ(0) = 1.
//! - Under P the density of Y_T is F(T, y)·φ_T(y), a mixture of N(ϑ_k T, T);
//!   under Q, Y is standard Brownian motion. Hence E_P[ξ_T·g(Y_T)] =
//!   e^{−rT}·E_Q[g(Y_T)], the conversion the solver's budget quadrature uses.
//! - P̃(ξ_T > x) = Σ_k q_k·Φ((y*(x) − ϑ_k T)/√T) with y*(x) = F⁻¹(T, e^{−rT}/x),
//!   for any belief weights q on the same support.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{self, Prior};
use crate::numeric::norm_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    /// Risk-free rate per year.
    pub r: f64,
    /// Volatility per √year. Only scales the risky-asset position π*; the
    /// calibration itself is a function of the Sharpe ratios alone.
    pub sigma: f64,
    /// Horizon in years.
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Initial wealth.
    pub x0: f64,
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.r >= 0.0
            && self.r.is_finite()
            && self.sigma > 0.0
            && self.sigma.is_finite()
            && self.horizon > 0.0
            && self.horizon.is_finite()
            && self.x0 > 0.0
            && self.x0.is_finite();
        if !ok {
            return Err(Error::InvalidInput(format!(
                "market params need r ≥ 0, sigma > 0, T > 0, x0 > 0 \
                 (got r={}, sigma={}, T={}, x0={})",
                self.r, self.sigma, self.horizon, self.x0
            )));
        }
        Ok(())
    }
}

/// Probability weights over the same support as the institution's prior,
/// defining an alternative belief measure P̃ for the constraint side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefMeasure {
    weights: Vec<f64>,
}

impl BeliefMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput(
                "belief weights must be positive and finite".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "belief weights sum to {total}, expected 1 within 1e-12"
            )));
        }
        Ok(BeliefMeasure { weights })
    }

    /// The institution's own prior viewed as a belief measure.
    pub fn from_prior(prior: &Prior) -> Self {
        BeliefMeasure {
            weights: prior.probs().to_vec(),
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false // constructor guarantees at least one weight
    }

    pub(crate) fn check_support(&self, prior: &Prior) -> Result<()> {
        if self.weights.len() != prior.len() {
            return Err(Error::InvalidInput(format!(
                "belief has {} weights but the prior support has {} values",
                self.weights.len(),
                prior.len()
            )));
        }
        Ok(())
    }
}

/// State-price density ξ(t) = e^{−rt}/F(t, y) of the filtered market.
///
/// Panics if `t` is outside [0, T] (precondition).
pub fn state_price(prior: &Prior, params: &MarketParams, t: f64, y: f64) -> f64 {
    assert!(
        (0.0..=params.horizon).contains(&t),
        "state_price: t must lie in [0, T]"
    );
    (-params.r * t - filter::log_mixture_f(prior, t, y)).exp()
}

/// Tail probability P̃(ξ_T > x) under the belief measure.
///
/// Strictly decreasing in x on the interior of the attainable range;
/// returns 0 when the target e^{−rT}/x is at or below the infimum of
/// F (possible when the smallest support value is 0), and tends to 1 as
/// x → 0⁺.
pub fn xi_tail_prob(
    prior: &Prior,
    belief: &BeliefMeasure,
    params: &MarketParams,
    x: f64,
) -> Result<f64> {
    belief.check_support(prior)?;
    if !prior.strictly_monotone() {
        return Err(Error::Capability(
            "tail law of ξ_T needs a monotone mixture (non-negative support, some positive); \
             use xi_tail_prob_mc for signed supports"
                .into(),
        ));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "tail probability needs x > 0, got {x}"
        )));
    }
    let t = params.horizon;
    let v = (-params.r * t).exp() / x;
    // Below the attainable infimum of F the event {ξ_T > x} is empty.
    if prior.values()[0] == 0.0 && v <= prior.probs()[0] {
        return Ok(0.0);
    }
    let y_star = filter::inverse_f(prior, t, v)?;
    let sqrt_t = t.sqrt();
    Ok(prior
        .values()
        .iter()
        .zip(belief.weights())
        .map(|(&theta, &q)| q * norm_cdf((y_star - theta * t) / sqrt_t))
        .sum())
}

/// Monte Carlo estimate of P̃(ξ_T > x); the fallback for signed supports and
/// the cross-check oracle for the closed form. Returns (estimate, stderr).
pub fn xi_tail_prob_mc(
    prior: &Prior,
    belief: &BeliefMeasure,
    params: &MarketParams,
    x: f64,
    n_paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    belief.check_support(prior)?;
    if !(x > 0.0) {
        return Err(Error::Domain(format!(
            "tail probability needs x > 0, got {x}"
        )));
    }
    let t = params.horizon;
    let sqrt_t = t.sqrt();
    let hits: usize = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let theta = draw_support(prior.values(), belief.weights(), &mut rng);
            let z: f64 = rng.sample(StandardNormal);
            let y_t = z * sqrt_t + theta * t;
            let xi = state_price(prior, params, t, y_t);
            usize::from(xi > x)
        })
        .sum();
    let p = hits as f64 / n_paths as f64;
    Ok((p, (p * (1.0 - p) / n_paths as f64).sqrt()))
}

/// Simulated trajectories on a uniform mesh over [0, T]. Layout is flat with
/// stride `n_steps + 1` per path; `thetas` is present only for P-simulations.
#[derive(Debug, Clone)]
pub struct PathBundle {
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub thetas: Option<Vec<f64>>,
    w: Vec<f64>,
    y: Vec<f64>,
    xi: Vec<f64>,
    pub wealth: Option<Vec<f64>>,
}

impl PathBundle {
    fn stride(&self) -> usize {
        self.n_steps + 1
    }

    pub fn w_path(&self, i: usize) -> &[f64] {
        let s = self.stride();
        &self.w[i * s..(i + 1) * s]
    }

    pub fn y_path(&self, i: usize) -> &[f64] {
        let s = self.stride();
        &self.y[i * s..(i + 1) * s]
    }

    pub fn xi_path(&self, i: usize) -> &[f64] {
        let s = self.stride();
        &self.xi[i * s..(i + 1) * s]
    }

    pub fn terminal_y(&self, i: usize) -> f64 {
        self.y[i * self.stride() + self.n_steps]
    }

    pub fn terminal_xi(&self, i: usize) -> f64 {
        self.xi[i * self.stride() + self.n_steps]
    }

    /// One row per path: index, θ (empty under Q), Y_T, ξ_T, X_T (if given).
    pub fn write_terminal_csv(
        &self,
        out: &mut impl std::io::Write,
        terminal_wealth: Option<&[f64]>,
    ) -> Result<()> {
        writeln!(out, "path,theta,y_t,xi_t,x_t")?;
        for i in 0..self.n_paths {
            let theta = self
                .thetas
                .as_ref()
                .map(|t| t[i].to_string())
                .unwrap_or_default();
            let x = terminal_wealth
                .map(|w| w[i].to_string())
                .unwrap_or_default();
            writeln!(
                out,
                "{i},{theta},{},{},{x}",
                self.terminal_y(i),
                self.terminal_xi(i)
            )?;
        }
        Ok(())
    }
}

/// Independent, order-insensitive per-path generator: one ChaCha8 stream per
/// path index. Identical seeds give identical paths regardless of thread
/// count or scheduling.
pub(crate) fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64 + 1);
    rng
}

/// Inverse-CDF draw from a discrete distribution on `values`.
pub(crate) fn draw_support(values: &[f64], weights: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (&v, &w) in values.iter().zip(weights) {
        acc += w;
        if u < acc {
            return v;
        }
    }
    *values.last().unwrap()
}

fn check_sim_sizes(n_paths: usize, n_steps: usize) -> Result<()> {
    if n_paths == 0 || n_steps == 0 {
        return Err(Error::InvalidInput(
            "simulation needs n_paths ≥ 1 and n_steps ≥ 1".into(),
        ));
    }
    Ok(())
}

fn simulate(
    prior: &Prior,
    params: &MarketParams,
    theta_weights: Option<&[f64]>,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<PathBundle> {
    check_sim_sizes(n_paths, n_steps)?;
    params.validate()?;
    let t_max = params.horizon;
    let dt = t_max / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let stride = n_steps + 1;

    struct Row {
        theta: f64,
        w: Vec<f64>,
        y: Vec<f64>,
        xi: Vec<f64>,
    }
    let rows: Vec<Row> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let theta = match theta_weights {
                Some(q) => draw_support(prior.values(), q, &mut rng),
                None => 0.0,
            };
            let mut w = Vec::with_capacity(stride);
            let mut y = Vec::with_capacity(stride);
            let mut xi = Vec::with_capacity(stride);
            let mut w_acc = 0.0;
            for j in 0..=n_steps {
                if j > 0 {
                    let z: f64 = rng.sample(StandardNormal);
                    w_acc += z * sqrt_dt;
                }
                let t = (j as f64 * dt).min(t_max);
                // Under Q (no theta draw) Y is the Brownian motion itself.
                let y_t = match theta_weights {
                    Some(_) => w_acc + theta * t,
                    None => w_acc,
                };
                w.push(w_acc);
                y.push(y_t);
                xi.push(state_price(prior, params, t, y_t));
            }
            Row { theta, w, y, xi }
        })
        .collect();

    let mut w = Vec::with_capacity(n_paths * stride);
    let mut y = Vec::with_capacity(n_paths * stride);
    let mut xi = Vec::with_capacity(n_paths * stride);
    let mut thetas = Vec::with_capacity(n_paths);
    for row in rows {
        thetas.push(row.theta);
        w.extend(row.w);
        y.extend(row.y);
        xi.extend(row.xi);
    }
    Ok(PathBundle {
        n_paths,
        n_steps,
        dt,
        seed,
        thetas: theta_weights.map(|_| thetas),
        w,
        y,
        xi,
        wealth: None,
    })
}

/// Simulate under the physical measure P: each path draws θ from the prior
/// once, then Y(t) = W(t) + θt.
pub fn simulate_under_p(
    prior: &Prior,
    params: &MarketParams,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<PathBundle> {
    simulate(prior, params, Some(prior.probs()), n_paths, n_steps, seed)
}

/// Simulate under an alternative belief measure P̃ (θ drawn from `belief`).
pub fn simulate_under_belief(
    prior: &Prior,
    belief: &BeliefMeasure,
    params: &MarketParams,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<PathBundle> {
    belief.check_support(prior)?;
    simulate(
        prior,
        params,
        Some(belief.weights()),
        n_paths,
        n_steps,
        seed,
    )
}

/// Simulate under the risk-neutral measure Q, where Y is a standard Brownian
/// motion (θ plays no role and is left unset).
pub fn simulate_under_q(
    prior: &Prior,
    params: &MarketParams,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<PathBundle> {
    simulate(prior, params, None, n_paths, n_steps, seed)
}
