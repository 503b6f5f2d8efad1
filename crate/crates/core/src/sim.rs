//! Seeded master/worker simulation of coded multiplication.
//!
//! Workers run their coded jobs back to back and report each one as soon as
//! it finishes. Every trial draws its own straggler set and job-time noise
//! from a stream derived from `(seed, trial_index)`, so traces are
//! reproducible and different schemes can be compared on matched draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cuboid::{Axis, Cuboid};
use crate::error::{Error, Result};
use crate::hierarchical::{sum_rate_job_ops, HierarchicalPlan, LayerSpec};

/// Time taken by one coded job of `ops` basic operations on a non-straggler.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeModel {
    /// `ops · seconds_per_op`, no randomness.
    Deterministic { seconds_per_op: f64 },
    /// `ops · (shift + E / rate)` with `E ~ Exp(1)` drawn per job.
    ShiftedExponential { shift: f64, rate: f64 },
}

impl Default for TimeModel {
    fn default() -> Self {
        TimeModel::Deterministic {
            seconds_per_op: 1.0,
        }
    }
}

impl TimeModel {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            TimeModel::Deterministic { seconds_per_op } => {
                seconds_per_op.is_finite() && seconds_per_op > 0.0
            }
            TimeModel::ShiftedExponential { shift, rate } => {
                shift.is_finite() && shift >= 0.0 && rate.is_finite() && rate > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid time model {self:?}")))
        }
    }

    fn sample(&self, ops: f64, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            TimeModel::Deterministic { seconds_per_op } => ops * seconds_per_op,
            TimeModel::ShiftedExponential { shift, rate } => {
                let e: f64 = rng.sample(Exp1);
                ops * (shift + e / rate)
            }
        }
    }
}

fn default_slowdown() -> f64 {
    2.0
}

fn default_trials() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SimConfigRepr", into = "SimConfigRepr")]
pub struct SimConfig {
    pub n_workers: usize,
    pub straggler_prob: f64,
    pub straggler_slowdown: f64,
    pub time_model: TimeModel,
    pub seed: u64,
    pub trials: usize,
}

#[derive(Serialize, Deserialize)]
struct SimConfigRepr {
    n_workers: usize,
    straggler_prob: f64,
    #[serde(default = "default_slowdown")]
    straggler_slowdown: f64,
    #[serde(default)]
    time_model: TimeModel,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_trials")]
    trials: usize,
}

impl TryFrom<SimConfigRepr> for SimConfig {
    type Error = Error;
    fn try_from(r: SimConfigRepr) -> Result<Self> {
        let cfg = SimConfig {
            n_workers: r.n_workers,
            straggler_prob: r.straggler_prob,
            straggler_slowdown: r.straggler_slowdown,
            time_model: r.time_model,
            seed: r.seed,
            trials: r.trials,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<SimConfig> for SimConfigRepr {
    fn from(c: SimConfig) -> Self {
        SimConfigRepr {
            n_workers: c.n_workers,
            straggler_prob: c.straggler_prob,
            straggler_slowdown: c.straggler_slowdown,
            time_model: c.time_model,
            seed: c.seed,
            trials: c.trials,
        }
    }
}

impl SimConfig {
    /// Deterministic 1 s/op, slowdown 2, one trial.
    pub fn new(n_workers: usize, straggler_prob: f64, seed: u64) -> Result<Self> {
        let cfg = SimConfig {
            n_workers,
            straggler_prob,
            straggler_slowdown: default_slowdown(),
            time_model: TimeModel::default(),
            seed,
            trials: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_workers == 0 {
            return Err(Error::InvalidConfig("n_workers must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.straggler_prob) {
            return Err(Error::InvalidConfig(format!(
                "straggler_prob {} outside [0, 1]",
                self.straggler_prob
            )));
        }
        if !(self.straggler_slowdown >= 1.0 && self.straggler_slowdown.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "straggler_slowdown {} must be at least 1",
                self.straggler_slowdown
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        self.time_model.validate()
    }

    /// The random stream of one trial.
    pub fn rng(&self, trial_index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial_index as u64);
        rng
    }
}

/// One job completion: `(time, worker_id, layer_id)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub worker_id: usize,
    pub layer_id: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    /// Completions up to `finishing_time`, ordered by time then worker.
    pub events: Vec<Event>,
    pub finishing_time: f64,
    pub per_layer_done_time: Vec<f64>,
    pub stragglers: Vec<bool>,
}

/// Basic operations in one coded job of `layer`: one information block.
pub fn job_cost(layer: &LayerSpec) -> usize {
    let (x, z, y) = layer.block_dims();
    x * z * y
}

/// Cumulative completion times `t[n][j]` of `n_jobs` jobs of `ops[j]`
/// operations on every worker. Straggler flags are drawn first, then
/// job noise worker by worker, so any two schemes with the same job count
/// see the same draws.
fn timelines(ops: &[f64], cfg: &SimConfig, trial_index: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rng = cfg.rng(trial_index);
    let stragglers: Vec<bool> = (0..cfg.n_workers)
        .map(|_| rng.random::<f64>() < cfg.straggler_prob)
        .collect();
    let times = stragglers
        .iter()
        .map(|&slow| {
            let factor = if slow { cfg.straggler_slowdown } else { 1.0 };
            let mut t = 0.0;
            ops.iter()
                .map(|&o| {
                    t += cfg.time_model.sample(o, &mut rng) * factor;
                    t
                })
                .collect()
        })
        .collect();
    (times, stragglers)
}

fn kth_smallest(mut v: Vec<f64>, k: usize) -> f64 {
    v.sort_by(f64::total_cmp);
    v[k - 1]
}

fn collect_events(times: &[Vec<f64>], until: f64) -> Vec<Event> {
    let mut events: Vec<Event> = times
        .iter()
        .enumerate()
        .flat_map(|(w, row)| {
            row.iter().enumerate().map(move |(j, &time)| Event {
                time,
                worker_id: w + 1,
                layer_id: j + 1,
            })
        })
        .filter(|e| e.time <= until)
        .collect();
    events.sort_by(|a, b| {
        a.time
            .total_cmp(&b.time)
            .then(a.worker_id.cmp(&b.worker_id))
            .then(a.layer_id.cmp(&b.layer_id))
    });
    events
}

/// One trial of a hierarchical plan. Layer `ℓ` is done when `r_ℓ` workers
/// have finished their `ℓ`-th job; the trial is done when every layer is.
///
/// # Panics
/// If the plan and the config disagree on the number of workers.
pub fn simulate_trial(plan: &HierarchicalPlan, cfg: &SimConfig, trial_index: usize) -> SimTrace {
    assert_eq!(
        plan.n_workers(),
        cfg.n_workers,
        "plan and config worker counts differ"
    );
    let ops: Vec<f64> = plan.layers().iter().map(|l| job_cost(l) as f64).collect();
    let (times, stragglers) = timelines(&ops, cfg, trial_index);
    let per_layer_done_time: Vec<f64> = plan
        .layers()
        .iter()
        .enumerate()
        .map(|(j, l)| kth_smallest(times.iter().map(|row| row[j]).collect(), l.r))
        .collect();
    let finishing_time = per_layer_done_time.iter().copied().fold(0.0, f64::max);
    SimTrace {
        events: collect_events(&times, finishing_time),
        finishing_time,
        per_layer_done_time,
        stragglers,
    }
}

/// One trial of the sum-rate code for `plan` with `jobs_per_worker` jobs on
/// each worker. Any `Σ k_ℓ` completions decode everything. Events carry the
/// job slot in `layer_id`.
pub fn simulate_sum_rate(
    plan: &HierarchicalPlan,
    jobs_per_worker: usize,
    cfg: &SimConfig,
    trial_index: usize,
) -> Result<SimTrace> {
    let need = plan.k_total();
    if jobs_per_worker == 0 || need > plan.n_workers() * jobs_per_worker {
        return Err(Error::InvalidPlan(format!(
            "sum-rate threshold {need} exceeds {} jobs",
            plan.n_workers() * jobs_per_worker
        )));
    }
    if plan.n_workers() != cfg.n_workers {
        return Err(Error::InvalidConfig(
            "plan and config worker counts differ".into(),
        ));
    }
    let ops = vec![sum_rate_job_ops(plan) as f64; jobs_per_worker];
    let (times, stragglers) = timelines(&ops, cfg, trial_index);
    let finishing_time = kth_smallest(times.iter().flatten().copied().collect(), need);
    Ok(SimTrace {
        events: collect_events(&times, finishing_time),
        finishing_time,
        per_layer_done_time: vec![finishing_time],
        stragglers,
    })
}

/// One trial of the uncoded baseline: the cuboid split evenly along `x`,
/// one job per worker, done when the slowest worker is.
pub fn simulate_uncoded(cuboid: &Cuboid, cfg: &SimConfig, trial_index: usize) -> Result<SimTrace> {
    let n = cfg.n_workers;
    if !cuboid.nx().is_multiple_of(n) {
        return Err(Error::Divisibility {
            axis: Axis::X,
            len: cuboid.nx(),
            parts: n,
        });
    }
    let ops = [(cuboid.volume() / n) as f64];
    let (times, stragglers) = timelines(&ops, cfg, trial_index);
    let finishing_time = times.iter().map(|r| r[0]).fold(0.0, f64::max);
    Ok(SimTrace {
        events: collect_events(&times, finishing_time),
        finishing_time,
        per_layer_done_time: vec![finishing_time],
        stragglers,
    })
}

/// What to simulate.
#[derive(Clone, Copy, Debug)]
pub enum SimTarget<'a> {
    Hierarchical(&'a HierarchicalPlan),
    SumRate {
        plan: &'a HierarchicalPlan,
        jobs_per_worker: usize,
    },
    Uncoded(Cuboid),
}

impl SimTarget<'_> {
    pub fn run(&self, cfg: &SimConfig, trial_index: usize) -> Result<SimTrace> {
        match *self {
            SimTarget::Hierarchical(plan) => {
                if plan.n_workers() != cfg.n_workers {
                    return Err(Error::InvalidConfig(
                        "plan and config worker counts differ".into(),
                    ));
                }
                Ok(simulate_trial(plan, cfg, trial_index))
            }
            SimTarget::SumRate {
                plan,
                jobs_per_worker,
            } => simulate_sum_rate(plan, jobs_per_worker, cfg, trial_index),
            SimTarget::Uncoded(c) => simulate_uncoded(&c, cfg, trial_index),
        }
    }
}

/// Finishing time of trials `1..=cfg.trials`, in trial order. Trials run in
/// parallel; the result does not depend on the thread count.
pub fn finishing_times(target: SimTarget<'_>, cfg: &SimConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    (1..=cfg.trials)
        .into_par_iter()
        .map(|i| target.run(cfg, i).map(|t| t.finishing_time))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

impl Summary {
    /// Mean and standard error (sample deviation over `√n`) of `values`,
    /// summed in sorted order.
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let mean = v.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Summary {
            mean,
            stderr,
            trials: n,
        }
    }
}

pub fn average_finishing_time(target: SimTarget<'_>, cfg: &SimConfig) -> Result<Summary> {
    Ok(Summary::of(&finishing_times(target, cfg)?))
}

/// `P(X ≤ x)` for `X ~ Gamma(shape, rate)` with integer shape.
fn gamma_cdf(shape: usize, rate: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let lx = rate * x;
    let mut term = (-lx).exp();
    let mut tail = 0.0;
    for i in 0..shape {
        if i > 0 {
            term *= lx / i as f64;
        }
        tail += term;
    }
    (1.0 - tail).clamp(0.0, 1.0)
}

/// Probability that a non-straggler finishes `jobs` unit jobs by `t`.
fn finish_prob(model: &TimeModel, jobs: usize, t: f64) -> f64 {
    match *model {
        TimeModel::Deterministic { seconds_per_op } => {
            if jobs as f64 * seconds_per_op <= t {
                1.0
            } else {
                0.0
            }
        }
        TimeModel::ShiftedExponential { shift, rate } => {
            gamma_cdf(jobs, rate, t - jobs as f64 * shift)
        }
    }
}

/// Expected number of workers that finish their `jobs`-th unit job by `t`.
fn expected_done(cfg: &SimConfig, jobs: usize, t: f64) -> f64 {
    let p = cfg.straggler_prob;
    let fast = finish_prob(&cfg.time_model, jobs, t);
    let slow = finish_prob(&cfg.time_model, jobs, t / cfg.straggler_slowdown);
    cfg.n_workers as f64 * ((1.0 - p) * fast + p * slow)
}

/// A non-increasing layer profile `k_1 ≥ … ≥ k_L` summing to `k_total`,
/// sized so that layer `ℓ` asks for about as many results as workers are
/// expected to have finished `ℓ` equal jobs by a common deadline, less
/// `margin`. Each `k_ℓ` lies in `[1, N]`.
pub fn expected_completion_profile(
    layers: usize,
    k_total: usize,
    cfg: &SimConfig,
    margin: f64,
) -> Result<Vec<usize>> {
    cfg.validate()?;
    let n = cfg.n_workers;
    if layers == 0 || k_total < layers || k_total > layers * n {
        return Err(Error::InvalidPlan(format!(
            "cannot split {k_total} into {layers} layers of at most {n}"
        )));
    }
    let profile = |t: f64| -> Vec<usize> {
        (1..=layers)
            .map(|l| {
                let e = (expected_done(cfg, l, t) - margin).floor();
                (e.max(1.0) as usize).min(n)
            })
            .collect()
    };
    let total = |t: f64| profile(t).iter().sum::<usize>();
    let mut hi = 1.0;
    while total(hi) < k_total {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InvalidPlan("profile search did not converge".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) >= k_total {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut ks = profile(hi);
    while ks.iter().sum::<usize>() > k_total {
        let max = *ks.iter().max().expect("non-empty");
        let last = ks.iter().rposition(|&k| k == max).expect("max present");
        ks[last] -= 1;
    }
    Ok(ks)
}

/// Size of the interpolation system each decode solves: `r_ℓ` per layer for
/// the hierarchical code, and `Σ k_ℓ` for the single sum-rate code.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeCost {
    pub per_layer: Vec<usize>,
    pub sum_rate: usize,
}

pub fn decode_cost(plan: &HierarchicalPlan) -> DecodeCost {
    DecodeCost {
        per_layer: plan.thresholds(),
        sum_rate: plan.k_total(),
    }
}

/// A row of the per-trial CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub trial: usize,
    pub scheme: String,
    #[serde(rename = "L")]
    pub layers: usize,
    pub time_seconds: f64,
}

/// A row of the summary CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: String,
    #[serde(rename = "L")]
    pub layers: usize,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}
