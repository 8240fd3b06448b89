//! Finite-atom elements of the RKHS induced by an output kernel.
//!
//! An embedding is a weighted sum `Σᵢ wᵢ ℓ(·, yᵢ)`. All inner-product
//! arithmetic reduces to kernel evaluations between atom lists, so nothing
//! here ever materializes a function; distances, norms, and point evaluations
//! are plain double sums over the atoms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::OutputKernel;

/// `Σᵢ weights[i] · ℓ(·, atoms[i])` for a fixed output kernel.
///
/// Atoms may repeat; the representation is not canonicalized. Operations take
/// the kernel explicitly so an embedding stays a plain data object.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Embedding {
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Embedding {
    /// Builds `Σᵢ wᵢ ℓ(·, yᵢ)`; atom and weight lists must match in length.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "embedding has {} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        Ok(Embedding { atoms, weights })
    }

    /// The zero element (empty atom list).
    pub fn zero() -> Self {
        Embedding { atoms: Vec::new(), weights: Vec::new() }
    }

    /// A single unit-weight atom `ℓ(·, y)`.
    pub fn dirac(y: f64) -> Self {
        Embedding { atoms: vec![y], weights: vec![1.0] }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// RKHS inner product `⟨self, other⟩ = Σᵢⱼ wᵢ vⱼ ℓ(yᵢ, zⱼ)`.
    pub fn inner(&self, other: &Embedding, kernel: &OutputKernel) -> Result<f64> {
        let mut acc = 0.0;
        for (yi, wi) in self.atoms.iter().zip(&self.weights) {
            let mut row = 0.0;
            for (zj, vj) in other.atoms.iter().zip(&other.weights) {
                row += vj * kernel.eval(*yi, *zj)?;
            }
            acc += wi * row;
        }
        Ok(acc)
    }

    pub fn norm_sq(&self, kernel: &OutputKernel) -> Result<f64> {
        self.inner(self, kernel)
    }

    /// Squared RKHS distance, clamped at zero.
    ///
    /// The expansion `‖f‖² - 2⟨f, g⟩ + ‖g‖²` can come out at `-1e-16` for
    /// equal elements; downstream code takes square roots, so tiny negatives
    /// are clamped rather than propagated.
    pub fn squared_distance(&self, other: &Embedding, kernel: &OutputKernel) -> Result<f64> {
        let d2 = self.norm_sq(kernel)? - 2.0 * self.inner(other, kernel)? + other.norm_sq(kernel)?;
        Ok(d2.max(0.0))
    }

    pub fn distance(&self, other: &Embedding, kernel: &OutputKernel) -> Result<f64> {
        Ok(self.squared_distance(other, kernel)?.sqrt())
    }

    /// Pointwise value `f(y) = Σᵢ wᵢ ℓ(y, yᵢ)` via the reproducing property.
    pub fn evaluate(&self, y: f64, kernel: &OutputKernel) -> Result<f64> {
        let mut acc = 0.0;
        for (yi, wi) in self.atoms.iter().zip(&self.weights) {
            acc += wi * kernel.eval(y, *yi)?;
        }
        Ok(acc)
    }

    /// In-place update `self ← alpha·self + beta·other`, concatenating atoms.
    ///
    /// No coalescing of repeated atoms: exact recursive updates rely on the
    /// weight arithmetic alone, and tests compare weight vectors directly.
    pub fn merge_scaled(&mut self, alpha: f64, beta: f64, other: &Embedding) {
        for w in &mut self.weights {
            *w *= alpha;
        }
        self.atoms.extend_from_slice(&other.atoms);
        self.weights.extend(other.weights.iter().map(|v| beta * v));
    }

    /// Scales all weights in place.
    pub fn scale(&mut self, alpha: f64) {
        for w in &mut self.weights {
            *w *= alpha;
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let e: Embedding = serde_json::from_str(s)?;
        Embedding::new(e.atoms, e.weights)
    }
}

/// Pointwise values of one embedding's function, tabulated on a uniform grid
/// over `[lo, hi]` with linear interpolation between nodes.
///
/// Inner products against a large reference embedding (say 10⁵ atoms) cost
/// O(len·10⁵) kernel calls if done exactly; through the table each query is
/// O(1) after a one-time O(points·10⁵) build. Queries outside `[lo, hi]`
/// fall back to the exact sum. Interpolation error scales with the grid step
/// squared times the kernel's curvature, so this is for smooth kernels;
/// callers needing exactness should use [`Embedding::inner`] directly.
#[derive(Debug, Clone)]
pub struct FunctionTable {
    source: Embedding,
    kernel: OutputKernel,
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl FunctionTable {
    pub fn new(
        source: Embedding,
        kernel: OutputKernel,
        lo: f64,
        hi: f64,
        points: usize,
    ) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidParameter("table needs at least 2 points".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!("bad table range [{lo}, {hi}]")));
        }
        let step = (hi - lo) / (points - 1) as f64;
        let mut values = Vec::with_capacity(points);
        for i in 0..points {
            values.push(source.evaluate(lo + i as f64 * step, &kernel)?);
        }
        Ok(FunctionTable { source, kernel, lo, step, values })
    }

    pub fn source(&self) -> &Embedding {
        &self.source
    }

    /// `f(y)` for the tabulated embedding: interpolated inside the grid,
    /// exact outside it.
    pub fn evaluate(&self, y: f64) -> Result<f64> {
        let hi = self.lo + (self.values.len() - 1) as f64 * self.step;
        if !(self.lo..=hi).contains(&y) {
            return self.source.evaluate(y, &self.kernel);
        }
        let i = (((y - self.lo) / self.step) as usize).min(self.values.len() - 2);
        let t = (y - (self.lo + i as f64 * self.step)) / self.step;
        Ok(self.values[i] * (1.0 - t) + self.values[i + 1] * t)
    }

    /// `⟨source, other⟩` with the source side read from the table.
    pub fn inner(&self, other: &Embedding) -> Result<f64> {
        let mut acc = 0.0;
        for (y, w) in other.atoms.iter().zip(&other.weights) {
            acc += w * self.evaluate(*y)?;
        }
        Ok(acc)
    }

    /// `‖other − source‖`, with the cross term and the source norm read from
    /// the table and `‖other‖²` computed exactly.
    pub fn distance_to(&self, other: &Embedding) -> Result<f64> {
        let d2 =
            other.norm_sq(&self.kernel)? - 2.0 * self.inner(other)? + self.inner(&self.source)?;
        Ok(d2.max(0.0).sqrt())
    }
}
