//! Shared numerical primitives: bisection with bracket expansion,
//! Gauss–Legendre quadrature (fixed-order and adaptive), and the standard
//! normal density/distribution.
//!
//! Bisection is deliberately preferred over Newton-type iterations: every
//! root solved in this crate is of a provably monotone function, and the
//! budget functional has kinks and a jump across the region boundaries where
//! derivatives behave badly.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex};

use gauss_quad::legendre::GaussLegendre;
use once_cell::sync::Lazy;

use crate::error::{Error, Result};

/// Hard cap on bisection steps; 2^-200 of the initial bracket is far below
/// any tolerance used here, so hitting the cap indicates a broken bracket.
pub const MAX_BISECT_ITER: usize = 200;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density φ(z).
#[inline]
pub fn norm_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal distribution function Φ(z), accurate in both tails.
/// Accepts ±∞ (returns 1/0) so callers can use degenerate cut points.
#[inline]
pub fn norm_cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        return 1.0;
    }
    if z == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * libm::erfc(-z / SQRT_2)
}

/// log(Σ exp(x_i) w_i) with max-shift; weights must be positive.
pub fn log_sum_exp_weighted(terms: impl Iterator<Item = (f64, f64)> + Clone) -> f64 {
    let m = terms
        .clone()
        .map(|(x, _)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = terms.map(|(x, w)| w * (x - m).exp()).sum();
    m + s.ln()
}

/// Root of `f` on [a, b] by bisection. Requires a sign change on the
/// bracket. Stops when the bracket width is below `atol + rtol·|mid|`.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rtol: f64, atol: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::Numeric(format!("bisect: empty bracket [{a}, {b}]")));
    }
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Numeric(format!(
            "bisect: no sign change on [{a}, {b}] (f(a)={fa:.6e}, f(b)={fb:.6e})"
        )));
    }
    for _ in 0..MAX_BISECT_ITER {
        let mid = 0.5 * (a + b);
        if (b - a) <= atol + rtol * mid.abs() {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Err(Error::Numeric(format!(
        "bisect: tolerance not reached after {MAX_BISECT_ITER} iterations on [{a}, {b}]"
    )))
}

/// Expand a bracket geometrically around `x0` until `f` changes sign.
/// Searches symmetrically: [x0 - w, x0 + w] with w growing by `grow`.
/// Returns a sub-bracket with a sign change between consecutive probes.
pub fn expand_bracket(
    f: impl Fn(f64) -> f64,
    x0: f64,
    step0: f64,
    grow: f64,
    max_expand: usize,
) -> Result<(f64, f64)> {
    let f0 = f(x0);
    if f0 == 0.0 {
        return Ok((x0, x0));
    }
    let mut w = step0;
    let (mut lo, mut hi) = (x0, x0);
    let (mut flo, mut fhi) = (f0, f0);
    for _ in 0..max_expand {
        let (a, b) = (x0 - w, x0 + w);
        let fa = f(a);
        if fa.signum() != flo.signum() {
            return Ok((a, lo));
        }
        lo = a;
        flo = fa;
        let fb = f(b);
        if fb.signum() != fhi.signum() {
            return Ok((hi, b));
        }
        hi = b;
        fhi = fb;
        w *= grow;
    }
    Err(Error::Numeric(format!(
        "expand_bracket: no sign change within [{lo}, {hi}] around {x0}"
    )))
}

/// One Gauss–Legendre rule as (node, weight) pairs on [-1, 1].
type GlRule = Arc<Vec<(f64, f64)>>;

/// Gauss–Legendre rules cached per order. Orders used in this crate are few
/// (the solver's 2000-point rule, the strategy's small rules), so a
/// mutex-guarded map is plenty.
static GL_CACHE: Lazy<Mutex<HashMap<usize, GlRule>>> = Lazy::new(|| Mutex::new(HashMap::new()));

pub fn gl_rule(n: usize) -> Arc<Vec<(f64, f64)>> {
    let mut cache = GL_CACHE.lock().unwrap();
    cache
        .entry(n)
        .or_insert_with(|| {
            let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("order must be positive"));
            Arc::new(rule.as_node_weight_pairs().to_vec())
        })
        .clone()
}

/// Fixed-order Gauss–Legendre integral of `f` over [a, b].
pub fn gl_integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    if a >= b {
        return 0.0;
    }
    let rule = gl_rule(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for &(x, w) in rule.iter() {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Adaptive Gauss–Legendre: compares orders n and 2n on each interval and
/// splits until the difference is below the absolute tolerance. The
/// integrands used here are analytic, so refinement almost never triggers;
/// the mechanism guards the few awkward geometries (tolerance inherited by
/// both halves, depth-capped).
pub fn gl_adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, n: usize) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, n: usize, depth: usize) -> f64 {
        let coarse = gl_integrate(f, a, b, n);
        let fine = gl_integrate(f, a, b, 2 * n);
        if (fine - coarse).abs() <= tol || depth >= 24 {
            return fine;
        }
        let mid = 0.5 * (a + b);
        rec(f, a, mid, 0.5 * tol, n, depth + 1) + rec(f, mid, b, 0.5 * tol, n, depth + 1)
    }
    if a >= b {
        return 0.0;
    }
    rec(f, a, b, tol, n, 0)
}
