//! Experiment execution.
//!
//! One seed is one independent replication: it derives its query grid,
//! training stream, held-out evaluation inputs, and oracle randomness from
//! disjoint substreams of a counter-based generator, so every replication is
//! a pure function of the seed. Seeds run in parallel (`CKME_THREADS` caps
//! the pool; unset or 0 means all cores) and results are merged in seed
//! order, which makes output files identical across thread counts. Emitted
//! wall times are zeroed for the same reason; real timings go to stderr.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::ckme::{batch_weights, l2_error_mc, CkmeState, QueryGrid};
use crate::diagnostics::{
    small_ball_ratio_curve, stepsize_series, weight_diagnostics, RatioPoint, StepsizeReport,
    DEFAULT_RATIO_FLOOR,
};
use crate::embedding::{Embedding, FunctionTable};
use crate::error::{Error, Result};
use crate::kernel::OutputKernel;
use crate::kme::{batch_kme, deviation_bound, KmeState};
use crate::metric::{sample_input, InputPoint};
use crate::oracle::{closed_form_gate, GateReport, OracleHandle, OracleKind};
use crate::schedule::{validate_schedule, ValidationReport};

use super::config::ResolvedExperiment;
use super::report::{median, CurveRow};

/// Substream labels carving one seed into independent generators.
const STREAM_GRID: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_HELDOUT: u64 = 3;
const STREAM_DIAG: u64 = 5;

/// Decorrelates oracle Monte Carlo draws from the training streams.
const ORACLE_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// Gate sizes for the precondition check before a closed-form run; the
/// standalone `oracle-check` command uses a heavier version.
const GATE_PAIRS: usize = 16;
const GATE_MC_SAMPLES: usize = 20_000;
const GATE_LTE_DRAWS: usize = 4_000;
const GATE_SEED: u64 = 17;

const SMALL_BALL_SAMPLE: usize = 50_000;
const SMALL_BALL_PROBES: usize = 8;

fn substream(seed: u64, label: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(label);
    rng
}

/// Reads `CKME_THREADS` and builds the pool (0 or unset: one per core).
fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("CKME_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| {
            Error::Config(format!("CKME_THREADS must be a nonnegative integer, got {v:?}"))
        })?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))
}

struct SeedRun {
    rows: Vec<CurveRow>,
    elapsed_ms: u128,
}

/// Runs every seed of a resolved experiment and returns the merged rows.
///
/// Refuses to start if the schedule fails validation at the experiment
/// horizon or, for closed-form oracles, if the oracle disagrees with an
/// independent Monte Carlo check.
pub fn run_experiment(exp: &ResolvedExperiment) -> Result<Vec<CurveRow>> {
    validate_schedule(&exp.mother, &exp.schedule, exp.horizon().max(2))?;
    if exp.oracle_kind == OracleKind::ClosedFormGaussian {
        closed_form_gate(&exp.model, &exp.kernel, GATE_PAIRS, GATE_MC_SAMPLES, GATE_LTE_DRAWS, GATE_SEED)?
            .ensure_passed()?;
    }
    let pool = thread_pool()?;
    let outcomes: Vec<Result<SeedRun>> =
        pool.install(|| exp.seeds.par_iter().map(|&seed| run_seed(exp, seed)).collect());
    let mut rows = Vec::new();
    for (seed, outcome) in exp.seeds.iter().zip(outcomes) {
        let run = outcome?;
        eprintln!("seed {seed}: {} checkpoints in {} ms", run.rows.len(), run.elapsed_ms);
        rows.extend(run.rows);
    }
    Ok(rows)
}

fn run_seed(exp: &ResolvedExperiment, seed: u64) -> Result<SeedRun> {
    let started = Instant::now();
    let space = &exp.model.space;
    let dist = &exp.model.input_dist;

    let mut grid_rng = substream(seed, STREAM_GRID);
    let grid_points: Result<Vec<InputPoint>> =
        (0..exp.grid_size).map(|_| sample_input(space, dist, &mut grid_rng)).collect();
    let grid = QueryGrid::new(grid_points?, space)?;

    let mut heldout_rng = substream(seed, STREAM_HELDOUT);
    let heldout: Result<Vec<InputPoint>> =
        (0..exp.mc_x_draws).map(|_| sample_input(space, dist, &mut heldout_rng)).collect();
    let heldout = heldout?;

    let oracle = OracleHandle::new(
        exp.oracle_kind,
        exp.model.clone(),
        exp.kernel.clone(),
        seed ^ ORACLE_SEED_SALT,
    )?;

    let mut train_rng = substream(seed, STREAM_TRAIN);
    let horizon = exp.horizon();
    let mut sample: Vec<(InputPoint, f64)> = Vec::with_capacity(horizon);
    let (x1, y1) = exp.model.draw_pair(&mut train_rng)?;
    let mut st = CkmeState::init(
        space.clone(),
        exp.mother,
        exp.schedule.clone(),
        grid,
        &x1,
        y1,
    )?;
    if let Some(tau) = exp.truncation {
        st = st.with_truncation(tau)?;
    }
    sample.push((x1, y1));

    let mut rows = Vec::new();
    let mut next_checkpoint = 0usize;
    if exp.checkpoints[0] == 1 {
        rows.push(score_checkpoint(exp, seed, &st, &sample, &heldout, &oracle)?);
        next_checkpoint = 1;
    }
    while sample.len() < horizon {
        let (x, y) = exp.model.draw_pair(&mut train_rng)?;
        st.update(&x, y)?;
        sample.push((x, y));
        if next_checkpoint < exp.checkpoints.len() && exp.checkpoints[next_checkpoint] == sample.len() {
            rows.push(score_checkpoint(exp, seed, &st, &sample, &heldout, &oracle)?);
            next_checkpoint += 1;
        }
    }
    Ok(SeedRun { rows, elapsed_ms: started.elapsed().as_millis() })
}

/// Drops weights below `tau` and renormalizes, keeping the largest weight
/// if nothing survives; matches the streaming truncation policy.
fn truncate_weights(atoms: &mut Vec<f64>, weights: &mut Vec<f64>, tau: f64) {
    let kept_sum: f64 = weights.iter().filter(|&&w| w >= tau).sum();
    if kept_sum <= 0.0 {
        let (imax, wmax) = weights
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &w)| if w > acc.1 { (i, w) } else { acc });
        let _ = wmax;
        *atoms = vec![atoms[imax]];
        *weights = vec![1.0];
        return;
    }
    let mut out = 0;
    for i in 0..weights.len() {
        if weights[i] >= tau {
            atoms[out] = atoms[i];
            weights[out] = weights[i] / kept_sum;
            out += 1;
        }
    }
    atoms.truncate(out);
    weights.truncate(out);
}

/// The estimate at an arbitrary input as a compact embedding: batch product
/// weights over the retained sample, zero-weight observations omitted.
fn batch_estimate(
    exp: &ResolvedExperiment,
    sample: &[(InputPoint, f64)],
    x: &InputPoint,
) -> Result<Embedding> {
    let w = batch_weights(sample, x, &exp.schedule, &exp.mother, &exp.model.space)?;
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (i, &wi) in w.iter().enumerate() {
        if wi != 0.0 {
            atoms.push(sample[i].1);
            weights.push(wi);
        }
    }
    if let Some(tau) = exp.truncation {
        truncate_weights(&mut atoms, &mut weights, tau);
    }
    Embedding::new(atoms, weights)
}

fn score_checkpoint(
    exp: &ResolvedExperiment,
    seed: u64,
    st: &CkmeState,
    sample: &[(InputPoint, f64)],
    heldout: &[InputPoint],
    oracle: &OracleHandle,
) -> Result<CurveRow> {
    let mut max_weights = Vec::with_capacity(st.grid().len());
    let mut effective_sizes = Vec::with_capacity(st.grid().len());
    for q in 0..st.grid().len() {
        let (_, w) = st.coefficients(q)?;
        let rep = weight_diagnostics(w);
        max_weights.push(rep.max);
        effective_sizes.push(rep.effective_size);
    }
    let l2_error =
        l2_error_mc(|x| batch_estimate(exp, sample, x), oracle, heldout, &exp.kernel)?;
    Ok(CurveRow {
        seed,
        n: sample.len(),
        l2_error,
        max_weight_median: median(&max_weights),
        effective_size_median: median(&effective_sizes),
        wall_ms: 0,
    })
}

/// One row of the unconditional-embedding demo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmeDemoRow {
    pub n: usize,
    pub distance: f64,
    pub bound: f64,
}

/// Streams standard normal draws through the recursive mean-embedding update
/// with stepsizes `1/k` and reports, at doubling checkpoints, the RKHS
/// distance to a large-sample reference embedding next to the
/// `√(C/n) + √(2C·log(1/δ)/n)` deviation bound (unit Gaussian kernel, C=1).
pub fn kme_demo(n: usize, delta: f64, seed: u64) -> Result<Vec<KmeDemoRow>> {
    if n == 0 {
        return Err(Error::InvalidParameter("demo stream length must be >= 1".into()));
    }
    deviation_bound(1.0, 1, delta)?;
    let kernel = OutputKernel::Gaussian { sigma: 1.0 };

    let reference_size = (50 * n).clamp(10_000, 100_000);
    let mut ref_rng = substream(seed, STREAM_HELDOUT);
    let ref_ys: Vec<f64> = (0..reference_size)
        .map(|_| StandardNormal.sample(&mut ref_rng))
        .collect();
    let lo = ref_ys.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let hi = ref_ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let table = FunctionTable::new(batch_kme(&ref_ys)?, kernel.clone(), lo, hi, 4096)?;

    let mut train_rng = substream(seed, STREAM_TRAIN);
    let mut state = KmeState::new();
    let mut rows = Vec::new();
    for k in 1..=n {
        let y: f64 = StandardNormal.sample(&mut train_rng);
        state.update(y, 1.0 / k as f64)?;
        if k == n || k.is_power_of_two() {
            rows.push(KmeDemoRow {
                n: k,
                distance: table.distance_to(state.estimate())?,
                bound: deviation_bound(1.0, k, delta)?,
            });
        }
    }
    Ok(rows)
}

/// Small-ball ratio curve at one probe input.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SmallBallCurve {
    pub probe: usize,
    pub curve: Vec<RatioPoint>,
}

/// Everything `diagnose` reports for a config.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DiagnoseReport {
    pub schedule: ValidationReport,
    pub stepsizes: StepsizeReport,
    pub ratio_floor: f64,
    pub small_ball: Vec<SmallBallCurve>,
}

/// Schedule validation, stepsize sums, and empirical small-ball ratio
/// curves at a few probe inputs (drawn like the first seed's query grid,
/// against a fixed-size reference sample).
pub fn diagnose(exp: &ResolvedExperiment) -> Result<DiagnoseReport> {
    let horizon = exp.horizon().max(2);
    let schedule = validate_schedule(&exp.mother, &exp.schedule, horizon)?;
    let stepsizes = stepsize_series(&exp.schedule, horizon)?;

    let seed = exp.seeds[0];
    let space = &exp.model.space;
    let dist = &exp.model.input_dist;
    let mut probe_rng = substream(seed, STREAM_GRID);
    let probes: Result<Vec<InputPoint>> = (0..exp.grid_size.min(SMALL_BALL_PROBES))
        .map(|_| sample_input(space, dist, &mut probe_rng))
        .collect();
    let mut sample_rng = substream(seed, STREAM_DIAG);
    let sample: Result<Vec<InputPoint>> =
        (0..SMALL_BALL_SAMPLE).map(|_| sample_input(space, dist, &mut sample_rng)).collect();
    let sample = sample?;

    let mut small_ball = Vec::new();
    for (i, probe) in probes?.iter().enumerate() {
        let curve = small_ball_ratio_curve(
            &sample,
            probe,
            &exp.schedule,
            &exp.mother,
            space,
            &exp.checkpoints,
            DEFAULT_RATIO_FLOOR,
        )?;
        small_ball.push(SmallBallCurve { probe: i, curve });
    }
    Ok(DiagnoseReport { schedule, stepsizes, ratio_floor: DEFAULT_RATIO_FLOOR, small_ball })
}

/// Heavier version of the run precondition: certifies the closed form
/// against Monte Carlo for this config's model and kernel.
pub fn oracle_check(exp: &ResolvedExperiment) -> Result<GateReport> {
    closed_form_gate(&exp.model, &exp.kernel, 50, 100_000, 10_000, exp.seeds[0])
}
