//! Unconditional kernel mean embedding: batch average, streaming recursion,
//! and the finite-sample deviation bound.
//!
//! The streaming update `μ̂_n = μ̂_{n-1} - a_n(μ̂_{n-1} - ℓ(·,Y_n))` with
//! `a_n = 1/n` reproduces the batch empirical average weight-for-weight;
//! other square-summable stepsizes give the general stochastic-approximation
//! estimator through the same code path.

use crate::embedding::Embedding;
use crate::error::{Error, Result};

/// Streaming mean-embedding estimator state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KmeState {
    estimate: Embedding,
    count: usize,
}

impl KmeState {
    /// Empty state; the first update sets `μ̂_1 = ℓ(·, Y_1)`.
    pub fn new() -> Self {
        KmeState { estimate: Embedding::zero(), count: 0 }
    }

    pub fn estimate(&self) -> &Embedding {
        &self.estimate
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// One streaming step. On the first observation the stepsize is ignored
    /// and the state becomes the unit atom at `y`; afterwards existing
    /// weights scale by `1-a` and `y` joins with weight `a`, so the weights
    /// remain a probability vector for any `a ∈ (0,1]`.
    pub fn update(&mut self, y: f64, a: f64) -> Result<()> {
        if self.count == 0 {
            self.estimate = Embedding::dirac(y);
            self.count = 1;
            return Ok(());
        }
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "stepsize must lie in (0,1], got {a}"
            )));
        }
        self.estimate.merge_scaled(1.0 - a, a, &Embedding::dirac(y));
        self.count += 1;
        Ok(())
    }
}

/// Empirical mean embedding `(1/n) Σᵢ ℓ(·, yᵢ)`.
pub fn batch_kme(ys: &[f64]) -> Result<Embedding> {
    if ys.is_empty() {
        return Err(Error::InvalidParameter("batch KME needs at least one sample".into()));
    }
    let w = 1.0 / ys.len() as f64;
    Embedding::new(ys.to_vec(), vec![w; ys.len()])
}

/// High-probability deviation bound for the empirical mean embedding:
/// `sqrt(C/n) + sqrt(2·C·log(1/δ)/n)` bounds `‖μ̂_n - μ‖` with probability
/// at least `1-δ` when the kernel satisfies `ℓ(y,y) ≤ C`.
pub fn deviation_bound(c_ell: f64, n: usize, delta: f64) -> Result<f64> {
    if !(c_ell > 0.0 && c_ell.is_finite()) {
        return Err(Error::InvalidParameter(format!("kernel bound must be positive, got {c_ell}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be >= 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0,1), got {delta}")));
    }
    let nf = n as f64;
    Ok((c_ell / nf).sqrt() + (2.0 * c_ell * (1.0 / delta).ln() / nf).sqrt())
}
