use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_DIVERGENCE_CAP: f64 = 1e12;
/// Step-norm threshold for asymptotic activation of safeguarding.
pub const DEFAULT_ACTIVATION_THRESHOLD: f64 = 1e-1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Plain Newton iteration.
    Newton,
    /// Newton-Anderson of depth `m` (closed-form coefficient when `m = 1`).
    Na,
    /// γ-safeguarded Newton-Anderson with fixed `r`.
    Gna,
    /// Adaptive γ-safeguarded Newton-Anderson with ceiling `r̂`.
    Agna,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Newton => "newton",
            Method::Na => "na",
            Method::Gna => "gna",
            Method::Agna => "agna",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "newton" | "newt" => Ok(Method::Newton),
            "na" => Ok(Method::Na),
            "gna" => Ok(Method::Gna),
            "agna" => Ok(Method::Agna),
            other => Err(ConfigError::Invalid(format!("unknown method `{other}`"))),
        }
    }
}

/// When safeguarding starts for `gna`/`agna`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "threshold")]
pub enum Activation {
    /// From the first mixing step onward.
    #[default]
    Always,
    /// Same schedule as `Always`: safeguard every mixing step, starting with
    /// the step that produces `x₂`.
    Preasymptotic,
    /// Plain Newton-Anderson until `‖w_{k+1}‖ < threshold`, safeguarded from
    /// then on.
    Asymptotic(f64),
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Always => f.write_str("always"),
            Activation::Preasymptotic => f.write_str("preasymptotic"),
            Activation::Asymptotic(t) => write!(f, "asymptotic({t})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Linesearch {
    #[default]
    None,
    Armijo {
        c1: f64,
        shrink: f64,
        max_backtracks: usize,
    },
}

impl Linesearch {
    pub fn armijo() -> Self {
        Linesearch::Armijo {
            c1: 1e-4,
            shrink: 0.5,
            max_backtracks: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    /// Anderson depth; only `na` uses values above 1.
    pub depth: usize,
    /// Fixed safeguarding parameter for `gna`.
    pub r: f64,
    /// Ceiling for the adaptive parameter of `agna`, and of the `m = 1`
    /// phase after a depth switch.
    pub r_hat: f64,
    pub activation: Activation,
    /// Run `na(m)` until `‖w_{k+1}‖` drops below this value, then continue
    /// as `agna` with `m = 1`.
    pub switch_to_m1_at: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub divergence_cap: f64,
    pub linesearch: Linesearch,
    /// Positive diagonal weights `d` of the step norm `‖w‖ = √(Σ dᵢ wᵢ²)`;
    /// `None` is the Euclidean norm.
    pub norm_weights: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Newton,
            depth: 1,
            r: 0.5,
            r_hat: 0.5,
            activation: Activation::Always,
            switch_to_m1_at: None,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            divergence_cap: DEFAULT_DIVERGENCE_CAP,
            linesearch: Linesearch::None,
            norm_weights: None,
        }
    }
}

impl SolverConfig {
    pub fn newton() -> Self {
        Self::default()
    }

    pub fn na(depth: usize) -> Self {
        Self {
            method: Method::Na,
            depth,
            ..Self::default()
        }
    }

    pub fn gna(r: f64) -> Self {
        Self {
            method: Method::Gna,
            r,
            ..Self::default()
        }
    }

    pub fn agna(r_hat: f64) -> Self {
        Self {
            method: Method::Agna,
            r_hat,
            ..Self::default()
        }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_linesearch(mut self, linesearch: Linesearch) -> Self {
        self.linesearch = linesearch;
        self
    }

    pub fn with_switch_to_m1_at(mut self, threshold: f64, r_hat: f64) -> Self {
        self.switch_to_m1_at = Some(threshold);
        self.r_hat = r_hat;
        self
    }

    /// Short human-readable label, e.g. `agna(0.5)` or `na(3)`.
    pub fn label(&self) -> String {
        let mut s = match self.method {
            Method::Newton => "newton".to_string(),
            Method::Na => format!("na({})", self.depth),
            Method::Gna => format!("gna({})", self.r),
            Method::Agna => format!("agna({})", self.r_hat),
        };
        if self.method != Method::Newton && self.method != Method::Na {
            if let Activation::Asymptotic(t) = self.activation {
                s.push_str(&format!("@{t}"));
            }
        }
        if let Some(t) = self.switch_to_m1_at {
            if self.method == Method::Na && self.depth > 1 {
                s.push_str(&format!("->agna({})@{t}", self.r_hat));
            }
        }
        if let Linesearch::Armijo { .. } = self.linesearch {
            s.push_str("+armijo");
        }
        s
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = |name: &'static str, value: f64| {
            if value > 0.0 && value < 1.0 {
                Ok(())
            } else {
                Err(ConfigError::OutOfUnitInterval { name, value })
            }
        };
        let positive = |name: &'static str, value: f64| {
            if value > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::NotPositive { name, value })
            }
        };
        match self.method {
            Method::Gna => unit("r", self.r)?,
            Method::Agna => unit("r_hat", self.r_hat)?,
            _ => {}
        }
        if self.depth == 0 {
            return Err(ConfigError::ZeroDepth);
        }
        if self.depth > 1 && self.method != Method::Na {
            return Err(ConfigError::Invalid(format!(
                "depth {} requires method na; safeguarding is defined for depth 1 only",
                self.depth
            )));
        }
        if let Activation::Asymptotic(t) = self.activation {
            positive("activation threshold", t)?;
        }
        if let Some(t) = self.switch_to_m1_at {
            positive("switch_to_m1_at", t)?;
            unit("r_hat", self.r_hat)?;
        }
        if !(self.tol >= 0.0) {
            return Err(ConfigError::Invalid(format!("tol must be nonnegative, got {}", self.tol)));
        }
        positive("divergence_cap", self.divergence_cap)?;
        if let Linesearch::Armijo { c1, shrink, .. } = self.linesearch {
            unit("c1", c1)?;
            unit("shrink", shrink)?;
        }
        if let Some(w) = &self.norm_weights {
            if w.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(ConfigError::Invalid("norm weights must be positive and finite".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r_and_r_hat_must_be_in_unit_interval() {
        assert!(SolverConfig::gna(0.0).validate().is_err());
        assert!(SolverConfig::gna(1.0).validate().is_err());
        assert!(SolverConfig::agna(1.5).validate().is_err());
        assert!(SolverConfig::agna(0.9).validate().is_ok());
        assert!(SolverConfig::gna(0.1).validate().is_ok());
    }

    #[test]
    fn depth_rules() {
        assert_eq!(SolverConfig::na(0).validate(), Err(ConfigError::ZeroDepth));
        assert!(SolverConfig::na(5).validate().is_ok());
        let mut cfg = SolverConfig::agna(0.5);
        cfg.depth = 2;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(SolverConfig::newton().label(), "newton");
        assert_eq!(SolverConfig::na(3).label(), "na(3)");
        assert_eq!(
            SolverConfig::agna(0.5)
                .with_activation(Activation::Asymptotic(0.1))
                .label(),
            "agna(0.5)@0.1"
        );
        assert_eq!(
            SolverConfig::na(3).with_switch_to_m1_at(1.0, 0.9).label(),
            "na(3)->agna(0.9)@1"
        );
    }

    #[test]
    fn method_parse() {
        assert_eq!("AGNA".parse::<Method>().unwrap(), Method::Agna);
        assert!("foo".parse::<Method>().is_err());
    }
}
