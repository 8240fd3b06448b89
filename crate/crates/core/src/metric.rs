//! Input-space geometries: Euclidean space, the unit 2-sphere, and a class
//! of functions built from shifted Gaussian bumps compared in L2.
//!
//! Each geometry fixes a point representation, a distance, a validity check,
//! and an intrinsic dimension that feeds the bandwidth exponent of the rate
//! schedule. Samplers realize the input distribution for experiments.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the unit-norm constraint on sphere points.
const SPHERE_NORM_TOL: f64 = 1e-9;

/// A point in the input space; interpretation is fixed by the owning
/// [`MetricSpace`]. Sphere points are unit 3-vectors; functional points are
/// `[coefficients; shifts]` stacked into one vector of length `2m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputPoint {
    pub coords: Vec<f64>,
}

impl InputPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        InputPoint { coords }
    }
}

/// One of three input geometries with a metric.
///
/// `Functional { m, bound, psi_scale }` is the class of functions
/// `t ↦ Σᵢ λᵢ ψ(t - cᵢ)` with `ψ(t) = exp(-t²/(2s²))`, `i = 1..m`, and all
/// parameters in `[-bound, bound]`. Distinct parameter vectors can induce the
/// same function, so the functional distance is a pseudometric on parameters
/// (zero distance does not imply equal coordinates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpace {
    Euclidean { p: usize },
    Sphere2,
    Functional { m: usize, bound: f64, psi_scale: f64 },
}

impl MetricSpace {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MetricSpace::Euclidean { p } => {
                if p == 0 {
                    return Err(Error::InvalidParameter("euclidean dimension p must be >= 1".into()));
                }
            }
            MetricSpace::Sphere2 => {}
            MetricSpace::Functional { m, bound, psi_scale } => {
                if m == 0 {
                    return Err(Error::InvalidParameter("functional component count m must be >= 1".into()));
                }
                if !(bound > 0.0 && bound.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "functional parameter bound must be positive, got {bound}"
                    )));
                }
                if !(psi_scale > 0.0 && psi_scale.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "functional psi_scale must be positive, got {psi_scale}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Ambient coordinate count of a point.
    pub fn ambient_len(&self) -> usize {
        match *self {
            MetricSpace::Euclidean { p } => p,
            MetricSpace::Sphere2 => 3,
            MetricSpace::Functional { m, .. } => 2 * m,
        }
    }

    /// Exponent used for the bandwidth rate: `p` for Euclidean space, 2 for
    /// the sphere, and `2m` for the functional class (its parameter count).
    pub fn intrinsic_dimension(&self) -> usize {
        match *self {
            MetricSpace::Euclidean { p } => p,
            MetricSpace::Sphere2 => 2,
            MetricSpace::Functional { m, .. } => 2 * m,
        }
    }

    /// Checks that a point is a member of this space.
    pub fn check_point(&self, x: &InputPoint) -> Result<()> {
        let n = self.ambient_len();
        if x.coords.len() != n {
            return Err(Error::DomainViolation(format!(
                "point has {} coordinates, geometry expects {n}",
                x.coords.len()
            )));
        }
        if x.coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainViolation("point has non-finite coordinates".into()));
        }
        match *self {
            MetricSpace::Euclidean { .. } => {}
            MetricSpace::Sphere2 => {
                let norm = x.coords.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > SPHERE_NORM_TOL {
                    return Err(Error::DomainViolation(format!(
                        "sphere point norm {norm} deviates from 1 by more than {SPHERE_NORM_TOL}"
                    )));
                }
            }
            MetricSpace::Functional { bound, .. } => {
                if x.coords.iter().any(|v| v.abs() > bound) {
                    return Err(Error::DomainViolation(format!(
                        "functional parameters must lie in [-{bound}, {bound}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Distance between two valid points of this space.
    ///
    /// Euclidean: the usual norm. Sphere: great-circle angle
    /// `arccos(clamp(⟨x,y⟩, -1, 1))`; the clamp absorbs dot products pushed
    /// past ±1 by rounding. Functional: L2 distance between the induced
    /// functions, computed exactly through the Gram matrix of shifted bumps.
    pub fn distance(&self, x1: &InputPoint, x2: &InputPoint) -> Result<f64> {
        self.check_point(x1)?;
        self.check_point(x2)?;
        match *self {
            MetricSpace::Euclidean { .. } => {
                let s: f64 = x1
                    .coords
                    .iter()
                    .zip(&x2.coords)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                Ok(s.sqrt())
            }
            MetricSpace::Sphere2 => {
                let dot: f64 = x1.coords.iter().zip(&x2.coords).map(|(a, b)| a * b).sum();
                Ok(dot.clamp(-1.0, 1.0).acos())
            }
            MetricSpace::Functional { m, psi_scale, .. } => {
                let (lam1, off1) = x1.coords.split_at(m);
                let (lam2, off2) = x2.coords.split_at(m);
                let mut offsets = Vec::with_capacity(2 * m);
                offsets.extend_from_slice(off1);
                offsets.extend_from_slice(off2);
                let g = functional_gram(psi_scale, &offsets)?;
                // Signed coefficient vector [λ; -λ̃]; d² = cᵀGc, clamped since
                // the form is PSD analytically but can round negative.
                let mut c = Vec::with_capacity(2 * m);
                c.extend_from_slice(lam1);
                c.extend(lam2.iter().map(|v| -v));
                let mut d2 = 0.0;
                for (i, ci) in c.iter().enumerate() {
                    for (j, cj) in c.iter().enumerate() {
                        d2 += ci * cj * g[i][j];
                    }
                }
                Ok(d2.max(0.0).sqrt())
            }
        }
    }
}

/// L2 inner product of two unit-coefficient bumps at shift lag `u`:
/// `⟨ψ(·-a), ψ(·-b)⟩ = ρ(a-b)` with `ρ(u) = s·√π·exp(-u²/(4s²))`.
pub fn autocorrelation(s: f64, u: f64) -> f64 {
    s * std::f64::consts::PI.sqrt() * (-u * u / (4.0 * s * s)).exp()
}

/// Gram matrix `G[a][b] = ρ(offsets[a] - offsets[b])` of shifted bumps.
pub fn functional_gram(s: f64, offsets: &[f64]) -> Result<Vec<Vec<f64>>> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("psi_scale must be positive, got {s}")));
    }
    let n = offsets.len();
    let mut g = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            g[a][b] = autocorrelation(s, offsets[a] - offsets[b]);
        }
    }
    Ok(g)
}

/// Input distribution over a [`MetricSpace`]; realizes the draw of X.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputDistribution {
    /// Independent uniform coordinates on `[low, high]` (Euclidean only).
    UniformBox { low: f64, high: f64 },
    /// Independent standard normal coordinates (Euclidean only).
    StandardNormal,
    /// Uniform (rotation invariant) law on the unit sphere.
    SphereUniform,
    /// Uniform parameters on `[-bound, bound]^{2m}` for the functional class.
    FunctionalUniform,
}

impl InputDistribution {
    /// Checks this distribution can drive the given geometry.
    pub fn check_compatible(&self, space: &MetricSpace) -> Result<()> {
        let ok = matches!(
            (self, space),
            (InputDistribution::UniformBox { .. }, MetricSpace::Euclidean { .. })
                | (InputDistribution::StandardNormal, MetricSpace::Euclidean { .. })
                | (InputDistribution::SphereUniform, MetricSpace::Sphere2)
                | (InputDistribution::FunctionalUniform, MetricSpace::Functional { .. })
        );
        if !ok {
            return Err(Error::Incompatible(format!(
                "input distribution {self:?} cannot drive geometry {space:?}"
            )));
        }
        if let InputDistribution::UniformBox { low, high } = self {
            if !(low.is_finite() && high.is_finite() && low < high) {
                return Err(Error::InvalidParameter(format!(
                    "uniform box needs low < high, got [{low}, {high}]"
                )));
            }
        }
        Ok(())
    }
}

/// Draws one input point; deterministic given the rng state.
pub fn sample_input<R: Rng + ?Sized>(
    space: &MetricSpace,
    dist: &InputDistribution,
    rng: &mut R,
) -> Result<InputPoint> {
    dist.check_compatible(space)?;
    let point = match (dist, space) {
        (InputDistribution::UniformBox { low, high }, MetricSpace::Euclidean { p }) => {
            let coords = (0..*p).map(|_| low + (high - low) * rng.random::<f64>()).collect();
            InputPoint::new(coords)
        }
        (InputDistribution::StandardNormal, MetricSpace::Euclidean { p }) => {
            let coords = (0..*p).map(|_| StandardNormal.sample(rng)).collect();
            InputPoint::new(coords)
        }
        (InputDistribution::SphereUniform, MetricSpace::Sphere2) => {
            let v: [f64; 3] = UnitSphere.sample(rng);
            InputPoint::new(v.to_vec())
        }
        (InputDistribution::FunctionalUniform, MetricSpace::Functional { m, bound, .. }) => {
            let coords = (0..2 * m)
                .map(|_| -bound + 2.0 * bound * rng.random::<f64>())
                .collect();
            InputPoint::new(coords)
        }
        _ => unreachable!("compatibility checked above"),
    };
    Ok(point)
}
