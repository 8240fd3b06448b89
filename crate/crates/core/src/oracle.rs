//! Ground truth for synthetic experiments: conditional models with known
//! law, reference values of the conditional mean embedding, and the
//! agreement gate that certifies the closed form against Monte Carlo.
//!
//! All reference quantities reduce to two scalars per input point: the cross
//! term `E[ℓ(y, Y) | X=x]` and the reference norm `E[ℓ(Y, Y′) | X=x]` with
//! `Y, Y′` i.i.d. from the conditional law. For a Gaussian output kernel
//! with Gaussian noise both are closed-form; every other combination falls
//! back to Monte Carlo with reported standard errors. Closed forms are never
//! trusted until the gate has checked them against Monte Carlo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ckme::CkmeState;
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::kernel::OutputKernel;
use crate::metric::{sample_input, InputDistribution, InputPoint, MetricSpace};

/// Conditional mean function `m(x)`; the regression target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeanFunction {
    /// `m(x) = slope·x[coord] + intercept`.
    Affine { coord: usize, slope: f64, intercept: f64 },
    /// `m(x) = sin(2π·freq·x[0])`.
    SinFirstCoord { freq: f64 },
    /// `m(x) = arccos(x[2])`: great-circle distance to the pole (0,0,1).
    GeodesicToPole,
    /// Sum of the coefficient block of a functional point.
    CoefficientSum,
    Constant { value: f64 },
}

impl MeanFunction {
    pub fn check_compatible(&self, space: &MetricSpace) -> Result<()> {
        match self {
            MeanFunction::Affine { coord, slope, intercept } => {
                if *coord >= space.ambient_len() {
                    return Err(Error::Incompatible(format!(
                        "affine mean references coordinate {coord}, geometry has {}",
                        space.ambient_len()
                    )));
                }
                if !slope.is_finite() || !intercept.is_finite() {
                    return Err(Error::InvalidParameter("affine mean parameters must be finite".into()));
                }
            }
            MeanFunction::SinFirstCoord { freq } => {
                if !(freq.is_finite() && *freq != 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "sin mean frequency must be finite and nonzero, got {freq}"
                    )));
                }
            }
            MeanFunction::GeodesicToPole => {
                if !matches!(space, MetricSpace::Sphere2) {
                    return Err(Error::Incompatible(
                        "geodesic-to-pole mean requires the sphere geometry".into(),
                    ));
                }
            }
            MeanFunction::CoefficientSum => {
                if !matches!(space, MetricSpace::Functional { .. }) {
                    return Err(Error::Incompatible(
                        "coefficient-sum mean requires the functional geometry".into(),
                    ));
                }
            }
            MeanFunction::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidParameter("constant mean must be finite".into()));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, space: &MetricSpace, x: &InputPoint) -> f64 {
        match self {
            MeanFunction::Affine { coord, slope, intercept } => slope * x.coords[*coord] + intercept,
            MeanFunction::SinFirstCoord { freq } => {
                (2.0 * std::f64::consts::PI * freq * x.coords[0]).sin()
            }
            MeanFunction::GeodesicToPole => x.coords[2].clamp(-1.0, 1.0).acos(),
            MeanFunction::CoefficientSum => match space {
                MetricSpace::Functional { m, .. } => x.coords[..*m].iter().sum(),
                _ => unreachable!("compatibility checked at construction"),
            },
            MeanFunction::Constant { value } => *value,
        }
    }
}

/// Additive noise around the conditional mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Noise {
    Gaussian { s: f64 },
    Uniform { half_width: f64 },
}

impl Noise {
    pub fn validate(&self) -> Result<()> {
        let (name, v) = match self {
            Noise::Gaussian { s } => ("s", *s),
            Noise::Uniform { half_width } => ("half_width", *half_width),
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise parameter {name} must be a positive finite real, got {v}"
            )));
        }
        Ok(())
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Noise::Gaussian { s } => {
                let z: f64 = StandardNormal.sample(rng);
                s * z
            }
            Noise::Uniform { half_width } => half_width * (2.0 * rng.random::<f64>() - 1.0),
        }
    }
}

/// Synthetic joint law: `X ~ input_dist`, `Y | X=x ~ noise` centered at
/// `m(x)`. The conditional law is fully known, which is what makes exact
/// error measurement possible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionalModel {
    pub space: MetricSpace,
    pub input_dist: InputDistribution,
    pub mean_fn: MeanFunction,
    pub noise: Noise,
}

impl ConditionalModel {
    pub fn new(
        space: MetricSpace,
        input_dist: InputDistribution,
        mean_fn: MeanFunction,
        noise: Noise,
    ) -> Result<Self> {
        space.validate()?;
        input_dist.check_compatible(&space)?;
        mean_fn.check_compatible(&space)?;
        noise.validate()?;
        Ok(ConditionalModel { space, input_dist, mean_fn, noise })
    }

    /// Re-runs all construction checks (for models built by deserialization).
    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        self.input_dist.check_compatible(&self.space)?;
        self.mean_fn.check_compatible(&self.space)?;
        self.noise.validate()
    }

    pub fn mean_at(&self, x: &InputPoint) -> f64 {
        self.mean_fn.value(&self.space, x)
    }

    /// One conditional draw `Y | X=x`.
    pub fn draw_y<R: Rng + ?Sized>(&self, x: &InputPoint, rng: &mut R) -> f64 {
        self.mean_at(x) + self.noise.draw(rng)
    }

    /// One joint draw `(X, Y)`.
    pub fn draw_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(InputPoint, f64)> {
        let x = sample_input(&self.space, &self.input_dist, rng)?;
        let y = self.draw_y(&x, rng);
        Ok((x, y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleKind {
    /// Exact formulas; requires Gaussian output kernel and Gaussian noise.
    ClosedFormGaussian,
    /// `m`-sample conditional Monte Carlo (`m ≥ 2`: the reference norm
    /// averages over disjoint sample pairs, so at least one pair must exist).
    MonteCarlo { m: usize },
}

/// Reference access to `μ_*(x)` for a fixed model and output kernel.
///
/// Monte-Carlo draws are a pure function of `(mc_seed, x)`: the conditional
/// sample at an input point is always the same for one handle, so repeated
/// cross/norm queries at one `x` are mutually consistent and the whole
/// handle is safe to use from parallel workers.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleHandle {
    kind: OracleKind,
    model: ConditionalModel,
    kernel: OutputKernel,
    mc_seed: u64,
}

impl OracleHandle {
    pub fn new(
        kind: OracleKind,
        model: ConditionalModel,
        kernel: OutputKernel,
        mc_seed: u64,
    ) -> Result<Self> {
        model.validate()?;
        kernel.validate()?;
        match kind {
            OracleKind::ClosedFormGaussian => {
                let kernel_ok = matches!(kernel, OutputKernel::Gaussian { .. });
                let noise_ok = matches!(model.noise, Noise::Gaussian { .. });
                if !kernel_ok || !noise_ok {
                    return Err(Error::Incompatible(
                        "closed-form oracle requires a gaussian output kernel and gaussian noise".into(),
                    ));
                }
            }
            OracleKind::MonteCarlo { m } => {
                if m < 2 {
                    return Err(Error::InvalidParameter(format!(
                        "monte carlo oracle needs m >= 2 samples, got {m}"
                    )));
                }
            }
        }
        Ok(OracleHandle { kind, model, kernel, mc_seed })
    }

    pub fn kind(&self) -> OracleKind {
        self.kind
    }

    pub fn model(&self) -> &ConditionalModel {
        &self.model
    }

    pub fn kernel(&self) -> &OutputKernel {
        &self.kernel
    }

    fn closed_form_params(&self) -> (f64, f64) {
        match (&self.kernel, &self.model.noise) {
            (OutputKernel::Gaussian { sigma }, Noise::Gaussian { s }) => (*sigma, *s),
            _ => unreachable!("kind checked at construction"),
        }
    }

    /// The conditional Monte-Carlo sample at `x` for this handle.
    fn mc_sample(&self, x: &InputPoint, m: usize) -> Vec<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(point_stream_seed(self.mc_seed, x));
        (0..m).map(|_| self.model.draw_y(x, &mut rng)).collect()
    }

    /// `⟨ℓ(·,y), μ_*(x)⟩ = E[ℓ(y, Y) | X=x]`.
    pub fn cross(&self, x: &InputPoint, y: f64) -> Result<f64> {
        Ok(self.cross_with_se(x, y)?.0)
    }

    /// Cross term with its Monte-Carlo standard error (0 for closed form).
    pub fn cross_with_se(&self, x: &InputPoint, y: f64) -> Result<(f64, f64)> {
        self.model.space.check_point(x)?;
        match self.kind {
            OracleKind::ClosedFormGaussian => {
                let (sigma, s) = self.closed_form_params();
                let m = self.model.mean_at(x);
                let denom = sigma + 2.0 * s * s;
                let v = (sigma / denom).sqrt() * (-(y - m) * (y - m) / denom).exp();
                Ok((v, 0.0))
            }
            OracleKind::MonteCarlo { m } => {
                let sample = self.mc_sample(x, m);
                mean_and_se(sample.iter().map(|yj| self.kernel.eval(y, *yj)))
            }
        }
    }

    /// Cross terms for many probe outputs at one `x`, drawing the
    /// conditional sample once. Matches `cross` value-for-value.
    pub fn cross_batch(&self, x: &InputPoint, ys: &[f64]) -> Result<Vec<f64>> {
        self.model.space.check_point(x)?;
        match self.kind {
            OracleKind::ClosedFormGaussian => {
                ys.iter().map(|y| self.cross(x, *y)).collect()
            }
            OracleKind::MonteCarlo { m } => {
                let sample = self.mc_sample(x, m);
                ys.iter()
                    .map(|y| {
                        let mut acc = 0.0;
                        for yj in &sample {
                            acc += self.kernel.eval(*y, *yj)?;
                        }
                        Ok(acc / m as f64)
                    })
                    .collect()
            }
        }
    }

    /// `‖μ_*(x)‖² = E[ℓ(Y, Y′) | X=x]` with `Y, Y′` i.i.d. conditional.
    pub fn norm_sq(&self, x: &InputPoint) -> Result<f64> {
        Ok(self.norm_sq_with_se(x)?.0)
    }

    /// Reference norm with its Monte-Carlo standard error (0 for closed
    /// form). The MC estimate averages `ℓ` over ⌊m/2⌋ disjoint sample pairs:
    /// unbiased (no diagonal term) with an i.i.d.-mean standard error.
    pub fn norm_sq_with_se(&self, x: &InputPoint) -> Result<(f64, f64)> {
        self.model.space.check_point(x)?;
        match self.kind {
            OracleKind::ClosedFormGaussian => {
                let (sigma, s) = self.closed_form_params();
                Ok(((sigma / (sigma + 4.0 * s * s)).sqrt(), 0.0))
            }
            OracleKind::MonteCarlo { m } => {
                let sample = self.mc_sample(x, m);
                mean_and_se((0..m / 2).map(|j| self.kernel.eval(sample[2 * j], sample[2 * j + 1])))
            }
        }
    }
}

/// Sample mean and standard error of the mean.
fn mean_and_se(values: impl Iterator<Item = Result<f64>>) -> Result<(f64, f64)> {
    let vals: Vec<f64> = values.collect::<Result<_>>()?;
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return Ok((mean, 0.0));
    }
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Deterministic per-point stream seed: FNV-1a over the handle seed and the
/// coordinate bit patterns.
fn point_stream_seed(seed: u64, x: &InputPoint) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in seed.to_le_bytes() {
        h = (h ^ b as u64).wrapping_mul(PRIME);
    }
    for c in &x.coords {
        for b in c.to_bits().to_le_bytes() {
            h = (h ^ b as u64).wrapping_mul(PRIME);
        }
    }
    h
}

/// Empirical mean embedding of `M` conditional draws at `x`.
pub fn mc_oracle_embedding<R: Rng + ?Sized>(
    model: &ConditionalModel,
    x: &InputPoint,
    m: usize,
    rng: &mut R,
) -> Result<Embedding> {
    if m == 0 {
        return Err(Error::InvalidParameter("embedding needs at least one draw".into()));
    }
    model.space.check_point(x)?;
    let atoms: Vec<f64> = (0..m).map(|_| model.draw_y(x, rng)).collect();
    Embedding::new(atoms, vec![1.0 / m as f64; m])
}

/// Local-averaging regression value `Σᵢ Wᵢ(x_q)·Yᵢ` at query `q`.
///
/// Only meaningful under the linear output kernel, where the estimate's
/// action on the identity recovers the conditional mean; other kernels are
/// rejected rather than silently reinterpreted.
pub fn regression_estimate(st: &CkmeState, q: usize, kernel: &OutputKernel) -> Result<f64> {
    if !matches!(kernel, OutputKernel::Linear { .. }) {
        return Err(Error::Incompatible(
            "regression readout requires the linear output kernel".into(),
        ));
    }
    let e = st.evaluate_at(q)?;
    Ok(e.atoms.iter().zip(&e.weights).map(|(y, w)| w * y).sum())
}

/// Result of checking the closed-form oracle against Monte Carlo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub pairs: usize,
    pub mc_samples: usize,
    /// Worst `|closed_form - mc| / se` over the cross-term probes.
    pub max_cross_sigmas: f64,
    /// Worst `|closed_form - mc| / se` over the norm probes.
    pub max_norm_sigmas: f64,
    /// `|E_x[cross(x,y)] - E[ℓ(y,Y)]| / pooled se`: the averaged conditional
    /// reference must reproduce the unconditional mean embedding value.
    pub total_expectation_sigmas: f64,
    pub passed: bool,
}

impl GateReport {
    pub fn ensure_passed(&self) -> Result<()> {
        if self.passed {
            Ok(())
        } else {
            Err(Error::OracleGate(format!(
                "closed form disagrees with Monte Carlo: cross {:.2}σ, norm {:.2}σ, total-expectation {:.2}σ (limit 4σ)",
                self.max_cross_sigmas, self.max_norm_sigmas, self.total_expectation_sigmas
            )))
        }
    }
}

/// Ratio `|a - b| / se`, treating a zero standard error as exact agreement
/// required.
fn sigmas(a: f64, b: f64, se: f64) -> f64 {
    let diff = (a - b).abs();
    if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / se
    }
}

/// Certifies the closed-form oracle against an independent Monte-Carlo
/// oracle: cross terms and norms on `pairs` random probes (each within
/// 4 standard errors) plus the total-expectation identity
/// `E_X[μ_*(X)] = μ_Y` probed at one output value.
pub fn closed_form_gate(
    model: &ConditionalModel,
    kernel: &OutputKernel,
    pairs: usize,
    mc_samples: usize,
    lte_draws: usize,
    seed: u64,
) -> Result<GateReport> {
    if pairs == 0 || lte_draws < 2 {
        return Err(Error::InvalidParameter(
            "gate needs at least one probe pair and two total-expectation draws".into(),
        ));
    }
    let cf = OracleHandle::new(OracleKind::ClosedFormGaussian, model.clone(), kernel.clone(), 0)?;
    let mc = OracleHandle::new(
        OracleKind::MonteCarlo { m: mc_samples },
        model.clone(),
        kernel.clone(),
        seed ^ 0x9e37_79b9_7f4a_7c15,
    )?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let mut max_cross = 0.0f64;
    let mut max_norm = 0.0f64;
    for _ in 0..pairs {
        let x = sample_input(&model.space, &model.input_dist, &mut rng)?;
        let y = model.draw_y(&x, &mut rng);
        let cf_cross = cf.cross(&x, y)?;
        let (mc_cross, se_cross) = mc.cross_with_se(&x, y)?;
        max_cross = max_cross.max(sigmas(cf_cross, mc_cross, se_cross));
        let cf_norm = cf.norm_sq(&x)?;
        let (mc_norm, se_norm) = mc.norm_sq_with_se(&x)?;
        max_norm = max_norm.max(sigmas(cf_norm, mc_norm, se_norm));
    }

    // Total expectation: average the closed-form cross term over fresh X
    // draws and compare with a direct Monte-Carlo estimate of E[ℓ(y, Y)]
    // from independent joint draws.
    let y_probe = model.draw_pair(&mut rng)?.1;
    let mut conditional = Vec::with_capacity(lte_draws);
    let mut unconditional = Vec::with_capacity(lte_draws);
    for _ in 0..lte_draws {
        let x = sample_input(&model.space, &model.input_dist, &mut rng)?;
        conditional.push(Ok(cf.cross(&x, y_probe)?));
        let (_, yj) = model.draw_pair(&mut rng)?;
        unconditional.push(kernel.eval(y_probe, yj));
    }
    let (mean_cond, se_cond) = mean_and_se(conditional.into_iter())?;
    let (mean_marg, se_marg) = mean_and_se(unconditional.into_iter())?;
    let pooled = (se_cond * se_cond + se_marg * se_marg).sqrt();
    let lte_sigmas = sigmas(mean_cond, mean_marg, pooled);

    Ok(GateReport {
        pairs,
        mc_samples,
        max_cross_sigmas: max_cross,
        max_norm_sigmas: max_norm,
        total_expectation_sigmas: lte_sigmas,
        passed: max_cross < 4.0 && max_norm < 4.0 && lte_sigmas < 4.0,
    })
}
