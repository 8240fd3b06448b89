//! Learning-rate schedules and mother smoothers.
//!
//! The estimator consumes a triple of decaying sequences: stepsizes
//! `a_n = a_scale/n`, smoothing levels `r_n = n^{-(1-ε)/2}`, and bandwidths
//! `h_n = r_n^{1/p}` where `p` is the input geometry's intrinsic dimension.
//! A mother smoother `K` turns distances into local-averaging weights via
//! `k_n(x, z) = (1/r_n)·K(d(x, z)/h_n)`.
//!
//! `validate_schedule` checks the conditions the consistency analysis needs:
//! divergent stepsize sum, convergent `Σ a_n²/r_n²`, and the strict bound
//! `sup K · a_n/r_n < 1` over applied steps. The first applied stepsize is
//! `a_2` (`n = 1` is absorbed by initialization), which is what makes the
//! strict bound satisfiable at `a_scale = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid resolution for the construction-time floor check on `K`.
const FLOOR_GRID_POINTS: usize = 10_000;

/// The `(a_n, r_n, h_n)` triple at one index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    /// Stepsize `a_scale/n`.
    pub a: f64,
    /// Smoothing level `n^{-(1-ε)/2}`.
    pub r: f64,
    /// Bandwidth `r^{1/p}`.
    pub h: f64,
}

/// Closed-form decay schedule; `epsilon` trades off smoothing against
/// stepsize summability and `p` is the intrinsic dimension driving the
/// bandwidth exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSchedule {
    pub epsilon: f64,
    pub p: usize,
    pub a_scale: f64,
}

impl RateSchedule {
    /// Builds a schedule; `epsilon ∈ (0,1)`, `p ≥ 1`, `a_scale > 0`.
    ///
    /// `a_scale` is deliberately not capped here: schedules whose update
    /// ratio would reach 1 must be constructible so `validate_schedule` can
    /// reject them with a named condition.
    pub fn new(epsilon: f64, p: usize, a_scale: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0,1), got {epsilon}"
            )));
        }
        if p == 0 {
            return Err(Error::InvalidParameter("intrinsic dimension p must be >= 1".into()));
        }
        if !(a_scale > 0.0 && a_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "a_scale must be a positive finite real, got {a_scale}"
            )));
        }
        Ok(RateSchedule { epsilon, p, a_scale })
    }

    /// The rate triple at index `n ≥ 1`.
    pub fn rates(&self, n: usize) -> Rates {
        assert!(n >= 1, "rate index starts at 1");
        let nf = n as f64;
        let a = self.a_scale / nf;
        let r = nf.powf(-(1.0 - self.epsilon) / 2.0);
        let h = r.powf(1.0 / self.p as f64);
        Rates { a, r, h }
    }
}

/// Scalar smoother profile `K`, normalized so `sup K ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SmootherFamily {
    /// `K(t) = 1 if |t| < b else 0`.
    Box { b: f64 },
    /// `K(t) = exp(-t²/σ)`.
    Gaussian { sigma: f64 },
    /// `K(t) = exp(-|t|/σ)`.
    Laplace { sigma: f64 },
    /// `K(t) = (3/4)(1-t²) on (-1,1)`, zero outside.
    Epanechnikov,
}

/// A validated mother smoother: the profile `K` together with its floor pair
/// `(floor, radius)` certifying `K(t) ≥ floor` whenever `|t| < radius`, and
/// the nonincreasing majorant `H = K` restricted to `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SmootherFamily", into = "SmootherFamily")]
pub struct MotherSmoother {
    family: SmootherFamily,
    floor: f64,
    radius: f64,
}

impl TryFrom<SmootherFamily> for MotherSmoother {
    type Error = Error;
    fn try_from(family: SmootherFamily) -> Result<Self> {
        MotherSmoother::new(family)
    }
}

impl From<MotherSmoother> for SmootherFamily {
    fn from(m: MotherSmoother) -> SmootherFamily {
        m.family
    }
}

impl MotherSmoother {
    /// Builds the smoother and verifies the floor pair on a dense grid over
    /// `[-2·radius, 2·radius]`.
    ///
    /// Unbounded-support families get radius 1 with the floor `K` attains
    /// there; Epanechnikov uses `(3/8, 1/2)`; the box is its own indicator.
    pub fn new(family: SmootherFamily) -> Result<Self> {
        let (floor, radius) = match family {
            SmootherFamily::Box { b } => {
                if !(b > 0.0 && b.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "box smoother width must be positive, got {b}"
                    )));
                }
                (1.0, b)
            }
            SmootherFamily::Gaussian { sigma } | SmootherFamily::Laplace { sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "smoother sigma must be positive, got {sigma}"
                    )));
                }
                ((-1.0 / sigma).exp(), 1.0)
            }
            SmootherFamily::Epanechnikov => (0.375, 0.5),
        };
        let m = MotherSmoother { family, floor, radius };
        m.check_floor_on_grid()?;
        Ok(m)
    }

    fn check_floor_on_grid(&self) -> Result<()> {
        let lo = -2.0 * self.radius;
        let step = 4.0 * self.radius / (FLOOR_GRID_POINTS - 1) as f64;
        for i in 0..FLOOR_GRID_POINTS {
            let t = lo + i as f64 * step;
            let k = self.eval_k(t);
            if !(0.0..=1.0).contains(&k) {
                return Err(Error::InvalidParameter(format!(
                    "smoother profile leaves [0,1] at t={t}: K(t)={k}"
                )));
            }
            if t.abs() < self.radius && k < self.floor - 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "smoother floor violated at t={t}: K(t)={k} < {}",
                    self.floor
                )));
            }
        }
        Ok(())
    }

    /// The profile `K(t)`; symmetric in `t`.
    pub fn eval_k(&self, t: f64) -> f64 {
        match self.family {
            SmootherFamily::Box { b } => {
                if t.abs() < b {
                    1.0
                } else {
                    0.0
                }
            }
            SmootherFamily::Gaussian { sigma } => (-t * t / sigma).exp(),
            SmootherFamily::Laplace { sigma } => (-t.abs() / sigma).exp(),
            SmootherFamily::Epanechnikov => {
                if t.abs() < 1.0 {
                    0.75 * (1.0 - t * t)
                } else {
                    0.0
                }
            }
        }
    }

    /// Nonincreasing majorant `H(t) = K(t)` for `t ≥ 0` (all built-in
    /// profiles are nonincreasing on the right half-line).
    pub fn majorant(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        self.eval_k(t)
    }

    pub fn sup_k(&self) -> f64 {
        match self.family {
            SmootherFamily::Epanechnikov => 0.75,
            _ => 1.0,
        }
    }

    /// Floor constant of the certified pair: `K ≥ floor` inside the radius.
    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Radius of the certified pair; also the locality radius of compactly
    /// supported profiles in bandwidth units.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn family(&self) -> SmootherFamily {
        self.family
    }

    /// True when `K` vanishes outside `radius` exactly (box, Epanechnikov).
    pub fn compact_support(&self) -> Option<f64> {
        match self.family {
            SmootherFamily::Box { b } => Some(b),
            SmootherFamily::Epanechnikov => Some(1.0),
            _ => None,
        }
    }
}

/// Smoother value `k_n(x, z) = (1/r_n)·K(d/h_n)` at distance `d ≥ 0`.
pub fn smoother_eval(mother: &MotherSmoother, schedule: &RateSchedule, n: usize, d: f64) -> f64 {
    debug_assert!(d >= 0.0, "distances are nonnegative");
    let Rates { r, h, .. } = schedule.rates(n);
    mother.eval_k(d / h) / r
}

/// Evidence gathered by [`validate_schedule`]; serializes as the report of
/// the `validate` CLI subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub horizon: usize,
    /// Partial sum `Σ_{n≤horizon} a_n` (grows without bound; harmonic type).
    pub sum_a: f64,
    /// Partial sum `Σ_{n≤horizon} a_n²/r_n²` (converges; exponent 1+ε).
    pub sum_a2_over_r2: f64,
    /// Analytic bound on the remaining tail: `a_scale²·horizon^{-ε}/ε`.
    pub tail_bound_a2_over_r2: f64,
    /// `sup_{2 ≤ n ≤ horizon} sup K · a_n/r_n`; must be < 1.
    pub sup_update_ratio: f64,
    pub accepted: bool,
}

/// Checks the schedule/smoother pair over `[1, horizon]` and errors with the
/// failing condition's name if the strict update-ratio bound is violated.
///
/// The ratio `a_n/r_n = a_scale·n^{-(1+ε)/2}` is decreasing, so its supremum
/// over applied steps sits at `n = 2`; the scan keeps the check honest
/// against future schedule shapes.
pub fn validate_schedule(
    mother: &MotherSmoother,
    schedule: &RateSchedule,
    horizon: usize,
) -> Result<ValidationReport> {
    if horizon < 2 {
        return Err(Error::InvalidParameter(format!(
            "validation horizon must be >= 2, got {horizon}"
        )));
    }
    let mut sum_a = 0.0;
    let mut sum_a2_over_r2 = 0.0;
    let mut sup_ratio = 0.0f64;
    for n in 1..=horizon {
        let Rates { a, r, .. } = schedule.rates(n);
        sum_a += a;
        sum_a2_over_r2 += (a / r) * (a / r);
        if n >= 2 {
            sup_ratio = sup_ratio.max(mother.sup_k() * a / r);
        }
    }
    let tail_bound = schedule.a_scale * schedule.a_scale
        * (horizon as f64).powf(-schedule.epsilon)
        / schedule.epsilon;
    if sup_ratio >= 1.0 {
        return Err(Error::ScheduleRejected(format!(
            "update-ratio condition violated: sup over n >= 2 of sup K * a_n/r_n = {sup_ratio} >= 1 \
             (reduce a_scale or the smoother's sup)"
        )));
    }
    Ok(ValidationReport {
        horizon,
        sum_a,
        sum_a2_over_r2,
        tail_bound_a2_over_r2: tail_bound,
        sup_update_ratio: sup_ratio,
        accepted: true,
    })
}
