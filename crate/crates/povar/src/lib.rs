//! Expected-utility portfolio optimization when the market price of risk is
//! unobserved and must be filtered from prices, subject to Value-at-Risk-type
//! constraints on terminal wealth.
//!
//! The market has one risky asset with unknown, constant market price of risk
//! θ drawn from a known discrete prior. The investor observes prices only,
//! equivalently the process Y(t) = W(t) + θt. Bayesian filtering turns the
//! problem into an observationally complete market whose state-price density
//! is ξ(t) = e^{−rt}/F(t, Y(t)), where F is the prior-weighted likelihood
//! mixture. The martingale method then yields a three-region optimal terminal
//! wealth: Merton-style spending in good states, a guaranteed floor L in
//! intermediate states, and Merton-style again in the worst states beyond an
//! upper threshold ξ̄ chosen so that the floor is breached with probability
//! exactly β.
//!
//! Modules:
//! - [`filter`]: likelihoods, the mixture F and its inverse, posterior, drift
//!   estimate θ̂.
//! - [`market`]: market parameters, state-price density, tail law of ξ_T,
//!   path simulation under the physical and risk-neutral measures.
//! - [`utility`]: CRRA utilities with marginal and inverse-marginal maps.
//! - [`solver`]: calibration of (ξ̄, ξ̲, λ₁) for plain, robust worst-case and
//!   weighted-mixture constraints; the piecewise terminal-wealth map.
//! - [`strategy`]: the h-function representation of the optimal wealth
//!   process and trading strategy for power utility.
//! - [`montecarlo`]: simulation-based validation (constraint saturation,
//!   budget identity, replication convergence, dominance comparative
//!   statics).
//! - [`config`]: run configuration shared by the CLI and the C API.

// Guards like `!(x > 0.0)` are used throughout instead of `x <= 0.0`: the
// negated form is true for NaN, so malformed inputs are rejected rather than
// slipping through a comparison that is vacuously false.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod filter;
pub mod market;
pub mod montecarlo;
pub mod numeric;
pub mod solver;
pub mod strategy;
pub mod utility;

pub use error::{Error, Result};
