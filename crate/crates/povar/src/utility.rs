//! CRRA utility functions with the marginal and inverse-marginal maps used
//! by the martingale method. Both satisfy the Inada conditions (marginal
//! utility diverges at 0 and vanishes at ∞), which is what guarantees the
//! interior optima the solver relies on.
//!
//! The set is a closed enumeration on purpose: the strategy module dispatches
//! to power-utility closed forms and must be able to refuse anything else.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Utility {
    /// U(x) = x^{1−γ}/(1−γ), γ > 0, γ ≠ 1.
    Power { gamma: f64 },
    /// U(x) = ln x — the γ → 1 limit.
    Log,
}

impl Utility {
    pub fn validate(&self) -> Result<()> {
        if let Utility::Power { gamma } = self {
            if !gamma.is_finite() || *gamma <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "power utility needs gamma > 0, got {gamma}"
                )));
            }
            if *gamma == 1.0 {
                return Err(Error::InvalidInput(
                    "gamma = 1 is the log utility; select kind = \"log\"".into(),
                ));
            }
        }
        Ok(())
    }

    fn check_domain(x: f64) -> Result<()> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("utility domain is x > 0, got {x}")));
        }
        Ok(())
    }

    /// U(x).
    pub fn u(&self, x: f64) -> Result<f64> {
        Self::check_domain(x)?;
        Ok(match self {
            Utility::Power { gamma } => x.powf(1.0 - gamma) / (1.0 - gamma),
            Utility::Log => x.ln(),
        })
    }

    /// Marginal utility U′(x).
    pub fn u_prime(&self, x: f64) -> Result<f64> {
        Self::check_domain(x)?;
        Ok(match self {
            Utility::Power { gamma } => x.powf(-gamma),
            Utility::Log => 1.0 / x,
        })
    }

    /// Inverse marginal utility I(x) = (U′)⁻¹(x); for power utility x^{−1/γ}.
    pub fn inverse_marginal(&self, x: f64) -> Result<f64> {
        Self::check_domain(x)?;
        Ok(match self {
            Utility::Power { gamma } => x.powf(-1.0 / gamma),
            Utility::Log => 1.0 / x,
        })
    }

    /// Relative risk aversion γ (1 for log).
    pub fn gamma(&self) -> f64 {
        match self {
            Utility::Power { gamma } => *gamma,
            Utility::Log => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Utility::Power { gamma: 3.0 }.validate().is_ok());
        assert!(Utility::Power { gamma: 0.0 }.validate().is_err());
        assert!(Utility::Power { gamma: -2.0 }.validate().is_err());
        assert!(Utility::Power { gamma: 1.0 }.validate().is_err());
        assert!(Utility::Log.validate().is_ok());
    }

    #[test]
    fn point_values() {
        assert_eq!(Utility::Power { gamma: 2.0 }.u(1.0).unwrap(), -1.0);
        // 2^{−2}/(−2) = −1/8
        assert!((Utility::Power { gamma: 3.0 }.u(2.0).unwrap() + 0.125).abs() < 1e-15);
        assert_eq!(Utility::Log.u(1.0).unwrap(), 0.0);
        assert_eq!(
            Utility::Power { gamma: 7.0 }.inverse_marginal(1.0).unwrap(),
            1.0
        );
        assert_eq!(
            Utility::Power { gamma: 2.0 }.inverse_marginal(4.0).unwrap(),
            0.5
        );
    }

    #[test]
    fn domain_errors() {
        for u in [Utility::Power { gamma: 2.0 }, Utility::Log] {
            assert!(u.u(0.0).is_err());
            assert!(u.u(-1.0).is_err());
            assert!(u.u_prime(0.0).is_err());
            assert!(u.inverse_marginal(-3.0).is_err());
        }
    }

    #[test]
    fn marginal_round_trip() {
        for u in [
            Utility::Power { gamma: 0.5 },
            Utility::Power { gamma: 2.0 },
            Utility::Power { gamma: 3.0 },
            Utility::Log,
        ] {
            for i in 1..=40 {
                let x = 10f64.powf(-4.0 + 0.2 * i as f64);
                let back = u.u_prime(u.inverse_marginal(x).unwrap()).unwrap();
                assert!(
                    (back - x).abs() <= 1e-12 * x,
                    "round trip failed for {u:?} at {x}"
                );
            }
        }
    }

    #[test]
    fn inada_limits() {
        for u in [Utility::Power { gamma: 3.0 }, Utility::Log] {
            assert!(u.inverse_marginal(1e-10).unwrap() > 1e3);
            assert!(u.inverse_marginal(1e10).unwrap() < 1e-3);
        }
    }

    #[test]
    fn concavity_by_second_differences() {
        let h = 1e-4;
        for u in [Utility::Power { gamma: 2.5 }, Utility::Log] {
            for i in 1..=30 {
                let x = 0.2 + 0.3 * i as f64;
                let dd = u.u(x + h).unwrap() - 2.0 * u.u(x).unwrap() + u.u(x - h).unwrap();
                assert!(dd < 0.0, "second difference not negative at {x}");
            }
        }
    }
}
