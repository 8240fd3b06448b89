//! Streaming estimator of the conditional kernel mean map.
//!
//! For a fixed set of query points, the state keeps one coefficient vector
//! per query over a shared list of stored output atoms. Each observation
//! `(X, Y)` updates query `x` by the convex step
//!
//! ```text
//! μ_{n+1}(x) = (1 - g) μ_n(x) + g ℓ(·, Y),   g = a_{n+1} k_{n+1}(x, X),
//! ```
//!
//! so coefficients stay probability weights. When `g = 0` at a query
//! (compactly supported smoother, far observation) that query is left
//! untouched bit-for-bit; when `g = 0` at every query the atom is not even
//! stored. The closed product form of the same weights is available for
//! arbitrary `x` through [`batch_weights`], and the two routes agree to
//! floating-point accumulation error.

use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::kernel::OutputKernel;
use crate::metric::{InputPoint, MetricSpace};
use crate::oracle::OracleHandle;
use crate::schedule::{smoother_eval, MotherSmoother, RateSchedule};

/// Fixed evaluation sites, validated against the geometry up front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryGrid {
    points: Vec<InputPoint>,
}

impl QueryGrid {
    pub fn new(points: Vec<InputPoint>, space: &MetricSpace) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("query grid must be nonempty".into()));
        }
        for p in &points {
            space.check_point(p)?;
        }
        Ok(QueryGrid { points })
    }

    pub fn points(&self) -> &[InputPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Serialized form of a [`CkmeState`]: the data no spec object can rebuild.
/// Coefficient vectors are dense over the stored atoms (not over the raw
/// observation count; unstored no-op observations have no columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CkmeSnapshot {
    pub n: usize,
    pub atoms: Vec<f64>,
    /// 1-based observation index that produced each stored atom.
    pub atom_observation: Vec<usize>,
    /// One dense vector per query point, aligned with `atoms`.
    pub coefficients: Vec<Vec<f64>>,
}

/// Streaming conditional-embedding estimator over a query grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CkmeState {
    space: MetricSpace,
    mother: MotherSmoother,
    schedule: RateSchedule,
    grid: QueryGrid,
    atoms: Vec<f64>,
    atom_obs: Vec<usize>,
    /// Sparse coefficients per query: indices into `atoms` plus weights.
    coeff_idx: Vec<Vec<usize>>,
    coeff_w: Vec<Vec<f64>>,
    n: usize,
    truncation: Option<f64>,
}

impl CkmeState {
    /// Starts the stream: `μ_1(x) = ℓ(·, Y_1)` at every query point.
    pub fn init(
        space: MetricSpace,
        mother: MotherSmoother,
        schedule: RateSchedule,
        grid: QueryGrid,
        first_x: &InputPoint,
        first_y: f64,
    ) -> Result<Self> {
        space.validate()?;
        if schedule.p != space.intrinsic_dimension() {
            return Err(Error::Incompatible(format!(
                "schedule bandwidth exponent p={} does not match the geometry's intrinsic dimension {}",
                schedule.p,
                space.intrinsic_dimension()
            )));
        }
        space.check_point(first_x)?;
        if !first_y.is_finite() {
            return Err(Error::InvalidParameter(format!("output must be finite, got {first_y}")));
        }
        let m = grid.len();
        Ok(CkmeState {
            space,
            mother,
            schedule,
            grid,
            atoms: vec![first_y],
            atom_obs: vec![1],
            coeff_idx: vec![vec![0]; m],
            coeff_w: vec![vec![1.0]; m],
            n: 1,
            truncation: None,
        })
    }

    /// Enables coefficient truncation: after each update, per-query weights
    /// below `tau` are dropped and the rest renormalized to sum 1.
    ///
    /// This is a memory-control approximation; the streaming/batch weight
    /// identity no longer holds under truncation.
    pub fn with_truncation(mut self, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "truncation threshold must lie in (0,1), got {tau}"
            )));
        }
        self.truncation = Some(tau);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &QueryGrid {
        &self.grid
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    /// Gain `g = a_{n+1}·k_{n+1}(x_q, x)` for every query against one
    /// incoming observation; `n+1` is the observation's global index.
    fn gains(&self, x: &InputPoint) -> Result<Vec<f64>> {
        let idx = self.n + 1;
        let a = self.schedule.rates(idx).a;
        let mut gains = Vec::with_capacity(self.grid.len());
        for q in self.grid.points() {
            let d = self.space.distance(q, x)?;
            let g = a * smoother_eval(&self.mother, &self.schedule, idx, d);
            if g > 1.0 {
                return Err(Error::Internal(format!(
                    "update gain {g} exceeds 1 at observation {idx}; the schedule was not validated"
                )));
            }
            gains.push(g);
        }
        Ok(gains)
    }

    /// Applies one observation's gains. Queries with `g = 0` are not
    /// touched at all, and the atom is stored only if some query needs it.
    fn apply_gains(&mut self, gains: &[f64], y: f64) {
        debug_assert_eq!(gains.len(), self.grid.len());
        if gains.iter().any(|&g| g > 0.0) {
            self.atoms.push(y);
            self.atom_obs.push(self.n + 1);
            let new_idx = self.atoms.len() - 1;
            for (qi, &g) in gains.iter().enumerate() {
                if g > 0.0 {
                    for w in self.coeff_w[qi].iter_mut() {
                        *w *= 1.0 - g;
                    }
                    self.coeff_idx[qi].push(new_idx);
                    self.coeff_w[qi].push(g);
                }
            }
        }
        self.n += 1;
        if let Some(tau) = self.truncation {
            self.truncate(tau);
        }
    }

    /// Consumes observation `(x, y)` with global index `n+1`.
    pub fn update(&mut self, x: &InputPoint, y: f64) -> Result<()> {
        if !y.is_finite() {
            return Err(Error::InvalidParameter(format!("output must be finite, got {y}")));
        }
        let gains = self.gains(x)?;
        self.apply_gains(&gains, y);
        Ok(())
    }

    fn truncate(&mut self, tau: f64) {
        for qi in 0..self.grid.len() {
            let ws = &mut self.coeff_w[qi];
            if ws.iter().all(|&w| w >= tau) {
                continue;
            }
            let idxs = &mut self.coeff_idx[qi];
            let mut kept_sum = 0.0;
            let mut out = 0;
            for i in 0..ws.len() {
                if ws[i] >= tau {
                    ws[out] = ws[i];
                    idxs[out] = idxs[i];
                    kept_sum += ws[i];
                    out += 1;
                }
            }
            // Keep the largest weight if everything fell below tau.
            if out == 0 {
                let (imax, _) = self
                    .coeff_w[qi]
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, &w)| if w > acc.1 { (i, w) } else { acc });
                self.coeff_idx[qi] = vec![self.coeff_idx[qi][imax]];
                self.coeff_w[qi] = vec![1.0];
                continue;
            }
            ws.truncate(out);
            idxs.truncate(out);
            for w in ws.iter_mut() {
                *w /= kept_sum;
            }
        }
    }

    fn check_query(&self, q: usize) -> Result<()> {
        if q >= self.grid.len() {
            return Err(Error::InvalidParameter(format!(
                "query index {q} out of range for grid of {}",
                self.grid.len()
            )));
        }
        Ok(())
    }

    /// Sparse coefficients of query `q`: atom indices and matching weights.
    pub fn coefficients(&self, q: usize) -> Result<(&[usize], &[f64])> {
        self.check_query(q)?;
        Ok((&self.coeff_idx[q], &self.coeff_w[q]))
    }

    /// The estimate at query `q` as an embedding over the stored atoms.
    pub fn evaluate_at(&self, q: usize) -> Result<Embedding> {
        self.check_query(q)?;
        let atoms = self.coeff_idx[q].iter().map(|&i| self.atoms[i]).collect();
        Embedding::new(atoms, self.coeff_w[q].clone())
    }

    /// Query `q`'s weights spread over the full observation sequence
    /// (length `n`, zeros at observations this query never absorbed);
    /// directly comparable with [`batch_weights`].
    pub fn weights_over_sample(&self, q: usize) -> Result<Vec<f64>> {
        self.check_query(q)?;
        let mut out = vec![0.0; self.n];
        for (&i, &w) in self.coeff_idx[q].iter().zip(&self.coeff_w[q]) {
            out[self.atom_obs[i] - 1] = w;
        }
        Ok(out)
    }

    pub fn snapshot(&self) -> CkmeSnapshot {
        let mut coefficients = Vec::with_capacity(self.grid.len());
        for qi in 0..self.grid.len() {
            let mut dense = vec![0.0; self.atoms.len()];
            for (&i, &w) in self.coeff_idx[qi].iter().zip(&self.coeff_w[qi]) {
                dense[i] = w;
            }
            coefficients.push(dense);
        }
        CkmeSnapshot {
            n: self.n,
            atoms: self.atoms.clone(),
            atom_observation: self.atom_obs.clone(),
            coefficients,
        }
    }

    /// Rebuilds a state from a snapshot plus the configuration objects it
    /// was run with. Exact zeros in the dense vectors are dropped; they
    /// contribute nothing to any later update or evaluation.
    pub fn restore(
        space: MetricSpace,
        mother: MotherSmoother,
        schedule: RateSchedule,
        grid: QueryGrid,
        snap: &CkmeSnapshot,
    ) -> Result<Self> {
        if snap.atoms.len() != snap.atom_observation.len() {
            return Err(Error::InvalidParameter(
                "snapshot atom and observation-index lists differ in length".into(),
            ));
        }
        if snap.coefficients.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "snapshot has {} coefficient vectors for a grid of {}",
                snap.coefficients.len(),
                grid.len()
            )));
        }
        if snap.n < snap.atoms.len() || snap.atoms.is_empty() {
            return Err(Error::InvalidParameter("snapshot counts are inconsistent".into()));
        }
        let mut coeff_idx = Vec::with_capacity(grid.len());
        let mut coeff_w = Vec::with_capacity(grid.len());
        for dense in &snap.coefficients {
            if dense.len() != snap.atoms.len() {
                return Err(Error::InvalidParameter(
                    "snapshot coefficient vector length does not match atom count".into(),
                ));
            }
            let mut idx = Vec::new();
            let mut w = Vec::new();
            for (i, &v) in dense.iter().enumerate() {
                if v != 0.0 {
                    idx.push(i);
                    w.push(v);
                }
            }
            coeff_idx.push(idx);
            coeff_w.push(w);
        }
        Ok(CkmeState {
            space,
            mother,
            schedule,
            grid,
            atoms: snap.atoms.clone(),
            atom_obs: snap.atom_observation.clone(),
            coeff_idx,
            coeff_w,
            n: snap.n,
            truncation: None,
        })
    }
}

/// Closed product form of the streaming weights at an arbitrary point `x`:
/// the weight of observation `i` is its entry gain times the survival
/// factors `(1 - g_l)` of every later observation, with the first
/// observation entering at weight 1 (initialization). One backward pass.
pub fn batch_weights(
    sample: &[(InputPoint, f64)],
    x: &InputPoint,
    schedule: &RateSchedule,
    mother: &MotherSmoother,
    space: &MetricSpace,
) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::InvalidParameter("batch weights need at least one observation".into()));
    }
    space.check_point(x)?;
    let n = sample.len();
    let mut w = vec![0.0; n];
    let mut suffix = 1.0;
    for i in (0..n).rev() {
        let g = if i == 0 {
            1.0
        } else {
            let idx = i + 1;
            let d = space.distance(&sample[i].0, x)?;
            let g = schedule.rates(idx).a * smoother_eval(mother, schedule, idx, d);
            if g > 1.0 {
                return Err(Error::Internal(format!(
                    "update gain {g} exceeds 1 at observation {idx}; the schedule was not validated"
                )));
            }
            g
        };
        w[i] = suffix * g;
        suffix *= 1.0 - g;
    }
    Ok(w)
}

/// Monte-Carlo estimate of the integrated squared estimation error
/// `∫ ‖μ̂(x) - μ_*(x)‖² dQ_X(x)` over fresh input draws: per draw, the
/// squared RKHS distance expands into the estimate's norm, cross terms
/// against the reference map, and the reference norm, each supplied by the
/// oracle; per-draw values are clamped at zero before averaging.
pub fn l2_error_mc<F>(
    evaluator: F,
    oracle: &OracleHandle,
    x_draws: &[InputPoint],
    kernel: &OutputKernel,
) -> Result<f64>
where
    F: Fn(&InputPoint) -> Result<Embedding>,
{
    if x_draws.is_empty() {
        return Err(Error::InvalidParameter("error estimate needs at least one input draw".into()));
    }
    if oracle.kernel() != kernel {
        return Err(Error::Incompatible(
            "oracle was built for a different output kernel".into(),
        ));
    }
    let mut total = 0.0;
    for x in x_draws {
        let est = evaluator(x)?;
        let norm_est = est.norm_sq(kernel)?;
        let crosses = oracle.cross_batch(x, &est.atoms)?;
        let cross: f64 = est.weights.iter().zip(&crosses).map(|(w, c)| w * c).sum();
        let norm_star = oracle.norm_sq(x)?;
        total += (norm_est - 2.0 * cross + norm_star).max(0.0);
    }
    Ok(total / x_draws.len() as f64)
}
