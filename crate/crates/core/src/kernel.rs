//! Positive definite kernels on the scalar output space.
//!
//! Four built-in families: Gaussian `exp(-x²/σ)`, Laplace `exp(-|x|/σ)`,
//! box indicator, and the linear kernel `y₁·y₂` on a bounded interval.
//! Every family reports a uniform bound `C` with `ℓ(y, y) ≤ C`, which the
//! deviation bound and the error machinery rely on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A positive definite kernel on the real output line.
///
/// Gaussian and Laplace use the bandwidth parameterization `exp(-x²/σ)` and
/// `exp(-|x|/σ)` (no squared-bandwidth variant). The box kernel is an
/// indicator and is not positive definite in general; it is accepted as a
/// smoother-style similarity but PSD spot checks skip it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum OutputKernel {
    Gaussian { sigma: f64 },
    Laplace { sigma: f64 },
    Box { b: f64 },
    /// `ℓ(y₁, y₂) = y₁·y₂`, valid on `[-domain_bound, domain_bound]`.
    Linear { domain_bound: f64 },
}

impl OutputKernel {
    /// Checks the family's parameter constraints (all strictly positive).
    pub fn validate(&self) -> Result<()> {
        let (name, v) = match self {
            OutputKernel::Gaussian { sigma } | OutputKernel::Laplace { sigma } => ("sigma", *sigma),
            OutputKernel::Box { b } => ("b", *b),
            OutputKernel::Linear { domain_bound } => ("domain_bound", *domain_bound),
        };
        if v <= 0.0 || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "output kernel parameter {name} must be a positive finite real, got {v}"
            )));
        }
        Ok(())
    }

    /// Evaluates `ℓ(y₁, y₂)`.
    ///
    /// The linear family errors on inputs outside its declared domain; the
    /// translation-invariant families accept any finite reals.
    pub fn eval(&self, y1: f64, y2: f64) -> Result<f64> {
        match *self {
            OutputKernel::Gaussian { sigma } => {
                let d = y1 - y2;
                Ok((-d * d / sigma).exp())
            }
            OutputKernel::Laplace { sigma } => Ok((-(y1 - y2).abs() / sigma).exp()),
            OutputKernel::Box { b } => Ok(if (y1 - y2).abs() < b { 1.0 } else { 0.0 }),
            OutputKernel::Linear { domain_bound } => {
                if y1.abs() > domain_bound || y2.abs() > domain_bound {
                    return Err(Error::DomainViolation(format!(
                        "linear kernel inputs ({y1}, {y2}) outside [-{domain_bound}, {domain_bound}]"
                    )));
                }
                Ok(y1 * y2)
            }
        }
    }

    /// Least declared uniform bound `C` with `ℓ(y, y) ≤ C` on the domain.
    pub fn sup_bound(&self) -> f64 {
        match *self {
            OutputKernel::Gaussian { .. } | OutputKernel::Laplace { .. } | OutputKernel::Box { .. } => 1.0,
            OutputKernel::Linear { domain_bound } => domain_bound * domain_bound,
        }
    }

    /// True when atoms at the given output value are valid for this kernel.
    pub fn admits(&self, y: f64) -> bool {
        match *self {
            OutputKernel::Linear { domain_bound } => y.abs() <= domain_bound,
            _ => y.is_finite(),
        }
    }
}
