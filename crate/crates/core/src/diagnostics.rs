//! Empirical proxies for the structural conditions behind consistency:
//! small-ball probability curves, weight-concentration summaries, and
//! stepsize partial sums. None of these are guarantees about finite data;
//! they exist to flag configurations that look inconsistent with the
//! assumptions before long runs are paid for.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{InputPoint, MetricSpace};
use crate::schedule::{MotherSmoother, RateSchedule, Rates};

/// Ratio values below this are flagged as potential small-ball violations.
pub const DEFAULT_RATIO_FLOOR: f64 = 0.01;

/// Fraction of the sample within distance `radius` of `x`.
pub fn small_ball_estimate(
    sample: &[InputPoint],
    x: &InputPoint,
    radius: f64,
    space: &MetricSpace,
) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidParameter("small-ball estimate needs a nonempty sample".into()));
    }
    if radius < 0.0 || radius.is_nan() {
        return Err(Error::InvalidParameter(format!("radius must be nonnegative, got {radius}")));
    }
    let mut hits = 0usize;
    for p in sample {
        if space.distance(p, x)? < radius {
            hits += 1;
        }
    }
    Ok(hits as f64 / sample.len() as f64)
}

/// One point of the small-ball ratio curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub n: usize,
    /// Empirical `Q̂_X(B(x, radius·h_n)) / r_n`; consistency wants this to
    /// stay away from zero as `n` grows.
    pub ratio: f64,
    pub flagged: bool,
}

/// Empirical small-ball ratios along a horizon list, using the smoother's
/// certified radius to size the balls.
pub fn small_ball_ratio_curve(
    sample: &[InputPoint],
    x: &InputPoint,
    schedule: &RateSchedule,
    mother: &MotherSmoother,
    space: &MetricSpace,
    ns: &[usize],
    floor: f64,
) -> Result<Vec<RatioPoint>> {
    if ns.is_empty() || ns.windows(2).any(|w| w[0] >= w[1]) || ns[0] == 0 {
        return Err(Error::InvalidParameter(
            "horizon list must be nonempty, positive and strictly increasing".into(),
        ));
    }
    // One distance pass serves every n: distances are compared against the
    // per-n ball radius afterwards.
    let mut dists = Vec::with_capacity(sample.len());
    for p in sample {
        dists.push(space.distance(p, x)?);
    }
    let mut curve = Vec::with_capacity(ns.len());
    for &n in ns {
        let Rates { r, h, .. } = schedule.rates(n);
        let ball = mother.radius() * h;
        let hits = dists.iter().filter(|&&d| d < ball).count();
        let ratio = hits as f64 / sample.len() as f64 / r;
        curve.push(RatioPoint { n, ratio, flagged: ratio < floor });
    }
    Ok(curve)
}

/// Summary of one probability-weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub sum: f64,
    pub max: f64,
    /// `1/Σwᵢ²`: the number of uniform weights with the same concentration.
    pub effective_size: f64,
}

pub fn weight_diagnostics(weights: &[f64]) -> WeightReport {
    let sum: f64 = weights.iter().sum();
    let max = weights.iter().cloned().fold(0.0, f64::max);
    let sq: f64 = weights.iter().map(|w| w * w).sum();
    let effective_size = if sq > 0.0 { 1.0 / sq } else { 0.0 };
    WeightReport { sum, max, effective_size }
}

/// Partial sums of the schedule's two series up to `horizon`, with their
/// analytic classifications (constant for this schedule family: `Σ aₙ` is a
/// scaled harmonic series, `Σ aₙ²/rₙ²` has exponent `1+ε > 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepsizeReport {
    pub horizon: usize,
    pub sum_a: f64,
    pub sum_a2_over_r2: f64,
    pub sum_a_divergent: bool,
    pub sum_a2_over_r2_convergent: bool,
}

pub fn stepsize_series(schedule: &RateSchedule, horizon: usize) -> Result<StepsizeReport> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be >= 1".into()));
    }
    let mut sum_a = 0.0;
    let mut sum_ratio = 0.0;
    for n in 1..=horizon {
        let Rates { a, r, .. } = schedule.rates(n);
        sum_a += a;
        sum_ratio += (a / r) * (a / r);
    }
    Ok(StepsizeReport {
        horizon,
        sum_a,
        sum_a2_over_r2: sum_ratio,
        sum_a_divergent: true,
        sum_a2_over_r2_convergent: true,
    })
}
