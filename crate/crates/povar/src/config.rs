//! TOML run configuration for the CLI, with a built-in reference scenario.
//!
//! The file mirrors the library types section by section; `to_parts` performs
//! all cross-field validation and returns the typed inputs the solver needs.
//! Fields that a given constraint kind does not use are tolerated but
//! reported through [`RunConfig::warnings`] so a mis-assembled file does not
//! silently do something else than intended.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::Prior;
use crate::market::{BeliefMeasure, MarketParams};
use crate::solver::ConstraintSpec;
use crate::utility::Utility;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketParams,
    pub prior: PriorSection,
    pub utility: Utility,
    pub constraint: ConstraintSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Unconstrained,
    Insurance,
    Var,
    RobustMin,
    Weighted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSection {
    pub kind: ConstraintKind,
    /// Terminal wealth floor L.
    #[serde(rename = "L")]
    pub floor: f64,
    /// Shortfall budget β ∈ (0, 1); required for var/robust_min/weighted.
    pub beta: Option<f64>,
    /// Belief weights for `var`; defaults to the prior weights.
    pub belief: Option<Vec<f64>>,
    /// Belief list for `robust_min`/`weighted`.
    pub beliefs: Option<Vec<Vec<f64>>>,
    /// Weights for `weighted`, used exactly as given (no normalization).
    pub alphas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub seed: u64,
    /// Paths for the constraint/budget Monte Carlo checks.
    pub paths: usize,
    /// Paths for the replication check (0 disables it).
    pub replication_paths: usize,
    /// Step counts for the replication check (each must divide the largest).
    pub steps: Vec<usize>,
    /// Random FSD pairs for the comparative-statics check (0 disables it).
    pub fsd_pairs: usize,
    /// ξ-grid "min:max:n" for the terminal-wealth curve artifact.
    pub grid: String,
    /// t-grid "min:max:n" for the strategy artifact.
    pub t_grid: String,
    /// y-grid "min:max:n" for the strategy artifact.
    pub y_grid: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            seed: 42,
            paths: 200_000,
            replication_paths: 2_000,
            steps: vec![250, 500],
            fsd_pairs: 8,
            grid: "0.5:2.5:501".into(),
            t_grid: "0:9.5:20".into(),
            y_grid: "-3:3:25".into(),
        }
    }
}

impl Default for RunConfig {
    /// The reference scenario: 3-point Sharpe prior, power utility γ = 3,
    /// VaR floor of 120 at β = 5% under the institution's own prior.
    fn default() -> Self {
        RunConfig {
            market: MarketParams {
                r: 0.03,
                sigma: 0.25,
                horizon: 10.0,
                x0: 100.0,
            },
            prior: PriorSection {
                values: vec![0.15, 0.25, 0.35],
                probs: vec![1.0 / 3.0; 3],
            },
            utility: Utility::Power { gamma: 3.0 },
            constraint: ConstraintSection {
                kind: ConstraintKind::Var,
                floor: 120.0,
                beta: Some(0.05),
                belief: None,
                beliefs: None,
                alphas: None,
            },
            output: OutputSection::default(),
        }
    }
}

/// Typed solver inputs extracted from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Parts {
    pub prior: Prior,
    pub params: MarketParams,
    pub utility: Utility,
    pub constraint: ConstraintSpec,
    pub floor: f64,
}

/// A parsed "start:stop:count" grid specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn parse(text: &str) -> Result<GridSpec> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "grid must look like \"start:stop:count\", got {text:?}"
            )));
        }
        let start: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad grid start {:?}", parts[0])))?;
        let stop: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad grid stop {:?}", parts[1])))?;
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad grid count {:?}", parts[2])))?;
        if !start.is_finite() || !stop.is_finite() || stop < start || count == 0 {
            return Err(Error::Config(format!(
                "grid needs finite start ≤ stop and count ≥ 1, got {text:?}"
            )));
        }
        if count == 1 && stop != start {
            return Err(Error::Config(format!(
                "a single-point grid needs start = stop, got {text:?}"
            )));
        }
        Ok(GridSpec { start, stop, count })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| self.start + step * i as f64)
            .collect()
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(format!("cannot parse config: {e}")))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Render the configuration as TOML (used by `--emit-config`).
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Cross-validate and build the typed solver inputs.
    pub fn to_parts(&self) -> Result<Parts> {
        let prior = Prior::new(self.prior.values.clone(), self.prior.probs.clone())?;
        self.market.validate()?;
        self.utility.validate()?;
        let c = &self.constraint;
        if !(c.floor >= 0.0) || !c.floor.is_finite() {
            return Err(Error::Config(format!(
                "constraint floor L must be non-negative and finite, got {}",
                c.floor
            )));
        }
        let need_beta = || -> Result<f64> {
            c.beta
                .ok_or_else(|| Error::Config(format!("constraint kind {:?} requires beta", c.kind)))
        };
        let belief_list = |field: &Option<Vec<Vec<f64>>>| -> Result<Vec<BeliefMeasure>> {
            let raw = field.as_ref().ok_or_else(|| {
                Error::Config(format!(
                    "constraint kind {:?} requires a beliefs list",
                    c.kind
                ))
            })?;
            raw.iter().map(|w| BeliefMeasure::new(w.clone())).collect()
        };
        let constraint = match c.kind {
            ConstraintKind::Unconstrained => ConstraintSpec::Unconstrained,
            ConstraintKind::Insurance => ConstraintSpec::Insurance,
            ConstraintKind::Var => {
                let belief = match &c.belief {
                    Some(w) => BeliefMeasure::new(w.clone())?,
                    None => BeliefMeasure::from_prior(&prior),
                };
                ConstraintSpec::Var {
                    belief,
                    beta: need_beta()?,
                }
            }
            ConstraintKind::RobustMin => ConstraintSpec::RobustMin {
                beliefs: belief_list(&c.beliefs)?,
                beta: need_beta()?,
            },
            ConstraintKind::Weighted => {
                let beliefs = belief_list(&c.beliefs)?;
                let alphas = c
                    .alphas
                    .clone()
                    .ok_or_else(|| Error::Config("weighted constraint requires alphas".into()))?;
                ConstraintSpec::Weighted {
                    alphas,
                    beliefs,
                    beta: need_beta()?,
                }
            }
        };
        let parts = Parts {
            prior,
            params: self.market,
            utility: self.utility,
            constraint,
            floor: c.floor,
        };
        parts.constraint.validate(&parts.prior)?;
        Ok(parts)
    }

    /// Non-fatal configuration oddities worth echoing to the user.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let c = &self.constraint;
        let ignores: &[(&str, bool)] = &[
            (
                "beta",
                c.beta.is_some()
                    && matches!(
                        c.kind,
                        ConstraintKind::Unconstrained | ConstraintKind::Insurance
                    ),
            ),
            (
                "belief",
                c.belief.is_some() && c.kind != ConstraintKind::Var,
            ),
            (
                "beliefs",
                c.beliefs.is_some()
                    && !matches!(c.kind, ConstraintKind::RobustMin | ConstraintKind::Weighted),
            ),
            (
                "alphas",
                c.alphas.is_some() && c.kind != ConstraintKind::Weighted,
            ),
        ];
        for (field, ignored) in ignores {
            if *ignored {
                out.push(format!(
                    "constraint.{field} is ignored for kind {:?}",
                    c.kind
                ));
            }
        }
        if c.kind == ConstraintKind::Weighted {
            if let Some(alphas) = &c.alphas {
                let total: f64 = alphas.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    out.push(format!(
                        "weighted alphas sum to {total}; they are used exactly as given, \
                         the effective shortfall budget is beta relative to that total"
                    ));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml_string();
        let back = RunConfig::from_toml_str(&text).unwrap();
        let parts = back.to_parts().unwrap();
        assert_eq!(parts.params.horizon, 10.0);
        assert_eq!(parts.floor, 120.0);
        assert!(matches!(parts.constraint, ConstraintSpec::Var { beta, .. } if beta == 0.05));
        assert!(back.warnings().is_empty());
    }

    #[test]
    fn parses_a_full_var_config() {
        let text = r#"
            [market]
            r = 0.03
            sigma = 0.25
            T = 10.0
            x0 = 100.0

            [prior]
            values = [0.15, 0.25, 0.35]
            probs = [0.3333333333333333, 0.3333333333333333, 0.3333333333333334]

            [utility]
            kind = "power"
            gamma = 2.0

            [constraint]
            kind = "var"
            L = 120.0
            beta = 0.05
            belief = [0.2, 0.4, 0.4]

            [output]
            seed = 7
            paths = 1000
        "#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.output.seed, 7);
        assert_eq!(cfg.output.paths, 1000);
        // Unspecified output fields fall back to defaults.
        assert_eq!(cfg.output.steps, vec![250, 500]);
        let parts = cfg.to_parts().unwrap();
        match parts.constraint {
            ConstraintSpec::Var { belief, beta } => {
                assert_eq!(beta, 0.05);
                assert_eq!(belief.weights(), &[0.2, 0.4, 0.4]);
            }
            other => panic!("wrong constraint {other:?}"),
        }
    }

    #[test]
    fn robust_and_weighted_kinds() {
        let text = r#"
            [market]
            r = 0.0
            sigma = 0.2
            T = 5.0
            x0 = 50.0

            [prior]
            values = [0.1, 0.3]
            probs = [0.5, 0.5]

            [utility]
            kind = "power"
            gamma = 3.0

            [constraint]
            kind = "robust_min"
            L = 40.0
            beta = 0.1
            beliefs = [[0.5, 0.5], [0.3, 0.7]]
        "#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        let parts = cfg.to_parts().unwrap();
        assert!(matches!(
            parts.constraint,
            ConstraintSpec::RobustMin { ref beliefs, .. } if beliefs.len() == 2
        ));
        let weighted = text.replace("robust_min", "weighted") + "\nalphas = [0.7, 0.5]\n";
        let cfg = RunConfig::from_toml_str(&weighted).unwrap();
        assert!(cfg.to_parts().is_ok());
        // Non-unit alpha total draws a warning but is accepted as-is.
        assert!(cfg
            .warnings()
            .iter()
            .any(|w| w.contains("alphas sum to 1.2")));
    }

    #[test]
    fn missing_beta_and_unknown_fields_are_config_errors() {
        let mut cfg = RunConfig::default();
        cfg.constraint.beta = None;
        assert!(matches!(cfg.to_parts(), Err(Error::Config(_))));
        let text = "[market]\nr = 0.03\nbogus = 1\n";
        assert!(matches!(
            RunConfig::from_toml_str(text),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn ignored_fields_warn() {
        let mut cfg = RunConfig::default();
        cfg.constraint.kind = ConstraintKind::Insurance;
        assert!(cfg.warnings().iter().any(|w| w.contains("beta is ignored")));
        // Insurance no longer needs beta present.
        assert!(cfg.to_parts().is_ok());
    }

    #[test]
    fn grid_parsing() {
        let g = GridSpec::parse("0.5:2.5:5").unwrap();
        assert_eq!(g.points(), vec![0.5, 1.0, 1.5, 2.0, 2.5]);
        let single = GridSpec::parse("1.5:1.5:1").unwrap();
        assert_eq!(single.points(), vec![1.5]);
        assert!(GridSpec::parse("1:2").is_err());
        assert!(GridSpec::parse("2:1:5").is_err());
        assert!(GridSpec::parse("1:2:0").is_err());
        assert!(GridSpec::parse("a:2:3").is_err());
        assert!(GridSpec::parse("-3 : 3 : 4").is_ok());
    }
}
