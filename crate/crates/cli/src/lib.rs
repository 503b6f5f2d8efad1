//! Config-driven commands behind the `cmm` binary.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use cmm_core::codes::{CodedResult, Scheme};
use cmm_core::hierarchical::{
    self, build_plan, decode_layer, encode_plan, HierarchicalPlan, LayerStrategy, LayerSummary,
};
use cmm_core::sim::{
    self, decode_cost, expected_completion_profile, simulate_sum_rate, simulate_trial, DecodeCost,
    SimConfig, SimTarget, Summary, SummaryRow, TimeModel, TraceRow,
};
use cmm_core::{multiply, submatrix, Axis, Cuboid, Interval, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Relative Frobenius error a round trip must stay under.
pub const ROUNDTRIP_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDims {
    pub nx: usize,
    pub nz: usize,
    pub ny: usize,
}

fn default_prob() -> f64 {
    0.5
}

fn default_slowdown() -> f64 {
    2.0
}

fn default_trials() -> usize {
    1000
}

/// Straggler model; the worker count comes from the top level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_prob")]
    pub straggler_prob: f64,
    #[serde(default = "default_slowdown")]
    pub straggler_slowdown: f64,
    #[serde(default)]
    pub time_model: TimeModel,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            straggler_prob: default_prob(),
            straggler_slowdown: default_slowdown(),
            time_model: TimeModel::default(),
            seed: 0,
            trials: default_trials(),
        }
    }
}

/// How a sweep sizes the `L` layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepProfile {
    /// [`expected_completion_profile`] under the configured straggler model.
    Expected { margin: f64 },
    /// `k_ℓ ∝ ratio^(ℓ-1)`.
    Geometric { ratio: f64 },
    /// `k_per_layer` in every layer.
    Uniform,
}

fn default_k() -> usize {
    11
}

fn default_layers() -> Vec<usize> {
    vec![1, 2, 4, 8, 12]
}

fn default_profile() -> SweepProfile {
    SweepProfile::Expected { margin: 0.5 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Information dimension of the flat code; the hierarchical and sum-rate
    /// codes at `L` layers use `L` times as many blocks.
    #[serde(default = "default_k")]
    pub k_per_layer: usize,
    #[serde(default = "default_profile")]
    pub profile: SweepProfile,
    #[serde(default = "default_layers")]
    pub layers: Vec<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            k_per_layer: default_k(),
            profile: default_profile(),
            layers: default_layers(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundtripSection {
    /// Deliver only `r_ℓ - withhold` results per layer (or `K - withhold`
    /// for sum-rate) to exercise the failure path.
    #[serde(default)]
    pub withhold: usize,
    /// Jobs per worker for sum-rate; defaults to the number of layers.
    #[serde(default)]
    pub jobs_per_worker: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub matrix: MatrixDims,
    pub n_workers: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub strategy: Option<LayerStrategy>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub roundtrip: RoundtripSection,
}

fn default_scheme() -> Scheme {
    Scheme::Polynomial
}

impl Config {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: Config = serde_json::from_str(text).context("invalid config")?;
        cfg.sim_config()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn sim_config(&self) -> anyhow::Result<SimConfig> {
        let s = &self.sim;
        let cfg = SimConfig {
            n_workers: self.n_workers,
            straggler_prob: s.straggler_prob,
            straggler_slowdown: s.straggler_slowdown,
            time_model: s.time_model,
            seed: s.seed,
            trials: s.trials,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn strategy(&self) -> anyhow::Result<&LayerStrategy> {
        self.strategy
            .as_ref()
            .context("config has no strategy section")
    }

    /// The scheme the layers themselves use: sum-rate plans are built from
    /// polynomial layers.
    fn layer_scheme(&self) -> Scheme {
        match self.scheme {
            Scheme::SumRatePolynomial => Scheme::Polynomial,
            s => s,
        }
    }
}

/// Operands padded with zeros so that every edge meets its divisor.
#[derive(Clone, Debug, PartialEq)]
pub struct Padded {
    pub a: Matrix,
    pub b: Matrix,
    pub original: (usize, usize, usize),
}

fn round_up(n: usize, d: usize) -> usize {
    n.div_ceil(d) * d
}

/// Smallest dims at least `dims` whose edges are multiples of `divisors`.
pub fn padded_dims(
    dims: (usize, usize, usize),
    divisors: (usize, usize, usize),
) -> (usize, usize, usize) {
    (
        round_up(dims.0, divisors.0.max(1)),
        round_up(dims.1, divisors.1.max(1)),
        round_up(dims.2, divisors.2.max(1)),
    )
}

pub fn pad_to_divisible(
    a: &Matrix,
    b: &Matrix,
    divisors: (usize, usize, usize),
) -> anyhow::Result<Padded> {
    if a.cols() != b.rows() {
        bail!("cannot multiply {:?} by {:?}", a.shape(), b.shape());
    }
    let original = (a.rows(), a.cols(), b.cols());
    let (nx, nz, ny) = padded_dims(original, divisors);
    Ok(Padded {
        a: a.pad_to(nx, nz)?,
        b: b.pad_to(nz, ny)?,
        original,
    })
}

/// The top-left `nx × ny` corner of a padded product.
pub fn unpad(product: &Matrix, original: (usize, usize, usize)) -> anyhow::Result<Matrix> {
    Ok(submatrix(
        product,
        Interval::full(original.0)?,
        Interval::full(original.2)?,
    )?)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

fn axis_divisor(axis: Axis, along: usize) -> (usize, usize, usize) {
    match axis {
        Axis::X => (along, 1, 1),
        Axis::Z => (1, along, 1),
        Axis::Y => (1, 1, along),
    }
}

/// Edge divisors a strategy needs; explicit layers need none.
pub fn required_divisors(strategy: &LayerStrategy) -> (usize, usize, usize) {
    match strategy {
        LayerStrategy::Explicit { .. } => (1, 1, 1),
        LayerStrategy::Uniform { layers, cut, axis } => {
            let (dx, dz, dy) = axis_divisor(*axis, *layers);
            (dx * cut.mx(), dz * cut.mz(), dy * cut.my())
        }
        LayerStrategy::Geometric { k_total, axis, .. } => axis_divisor(*axis, *k_total),
        LayerStrategy::Profile { ks, axis } => axis_divisor(*axis, ks.iter().sum()),
    }
}

/// `cmd_plan` output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub plan: HierarchicalPlan,
    pub layers: Vec<LayerSummary>,
    pub decode_cost: DecodeCost,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sum_rate: Option<SumRateSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumRateSummary {
    pub k: usize,
    pub r: usize,
    pub jobs_per_worker: usize,
}

fn config_plan(cfg: &Config) -> anyhow::Result<HierarchicalPlan> {
    let m = cfg.matrix;
    let cuboid = Cuboid::new(m.nx, m.nz, m.ny)?;
    Ok(build_plan(
        &cuboid,
        cfg.n_workers,
        cfg.strategy()?,
        cfg.layer_scheme(),
    )?)
}

fn jobs_per_worker(cfg: &Config, plan: &HierarchicalPlan) -> usize {
    cfg.roundtrip.jobs_per_worker.unwrap_or(plan.layers().len())
}

pub fn cmd_plan(cfg: &Config) -> anyhow::Result<PlanDocument> {
    let plan = config_plan(cfg)?;
    let sum_rate = match cfg.scheme {
        Scheme::SumRatePolynomial => {
            let j = jobs_per_worker(cfg, &plan);
            let spec = hierarchical::sum_rate_spec(&plan, j)?;
            Some(SumRateSummary {
                k: spec.k(),
                r: spec.recovery_threshold(),
                jobs_per_worker: j,
            })
        }
        _ => None,
    };
    Ok(PlanDocument {
        layers: plan.summary(),
        decode_cost: decode_cost(&plan),
        sum_rate,
        plan,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub seed: u64,
    pub dims: (usize, usize, usize),
    pub padded_dims: (usize, usize, usize),
    pub results_used: Vec<usize>,
    pub relative_error: f64,
    pub passed: bool,
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0)).expect("finite entries")
}

/// Encodes seeded random operands, delivers results in the order a simulated
/// trial produces them, decodes and compares against a direct product.
pub fn cmd_roundtrip(cfg: &Config, seed: u64) -> anyhow::Result<RoundtripReport> {
    let m = cfg.matrix;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_matrix(m.nx, m.nz, &mut rng);
    let b = random_matrix(m.nz, m.ny, &mut rng);
    let padded = pad_to_divisible(&a, &b, required_divisors(cfg.strategy()?))?;
    let (nx, nz, ny) = (padded.a.rows(), padded.a.cols(), padded.b.cols());
    if (nx, nz, ny) != padded.original {
        log::info!("padded {:?} to {:?}", padded.original, (nx, nz, ny));
    }
    let cuboid = Cuboid::new(nx, nz, ny)?;
    let plan = build_plan(&cuboid, cfg.n_workers, cfg.strategy()?, cfg.layer_scheme())?;
    let mut sim_cfg = cfg.sim_config()?;
    sim_cfg.seed = seed;
    let withhold = cfg.roundtrip.withhold;

    let (product, results_used) = match cfg.scheme {
        Scheme::SumRatePolynomial => {
            let j = jobs_per_worker(cfg, &plan);
            let spec = hierarchical::sum_rate_spec(&plan, j)?;
            let queues = hierarchical::encode_sum_rate(&plan, &spec, &padded.a, &padded.b)?;
            let trace = simulate_sum_rate(&plan, j, &sim_cfg, 1)?;
            let take = spec.recovery_threshold().saturating_sub(withhold);
            let results = trace
                .events
                .iter()
                .take(take)
                .map(|e| queues[e.worker_id - 1].jobs[e.layer_id - 1].compute())
                .collect::<cmm_core::Result<Vec<_>>>()?;
            let layers = hierarchical::decode_sum_rate(&plan, &spec, &results)?;
            let products = plan
                .layers()
                .iter()
                .zip(layers)
                .map(|(l, p)| (l.task_block, Some(p)))
                .collect::<Vec<_>>();
            (
                hierarchical::assemble(&products, &cuboid)?,
                vec![results.len()],
            )
        }
        _ => {
            let queues = encode_plan(&plan, &padded.a, &padded.b)?;
            let trace = simulate_trial(&plan, &sim_cfg, 1);
            let mut products = Vec::with_capacity(plan.layers().len());
            let mut used = Vec::with_capacity(plan.layers().len());
            for (i, layer) in plan.layers().iter().enumerate() {
                let take = layer.r.saturating_sub(withhold);
                let results: Vec<CodedResult> = trace
                    .events
                    .iter()
                    .filter(|e| e.layer_id == i + 1)
                    .take(take)
                    .map(|e| queues[e.worker_id - 1].jobs[i].compute())
                    .collect::<cmm_core::Result<_>>()?;
                used.push(results.len());
                products.push((layer.task_block, Some(decode_layer(&results, layer)?)));
            }
            (hierarchical::assemble(&products, &cuboid)?, used)
        }
    };
    let got = unpad(&product, padded.original)?;
    let want = multiply(&a, &b)?;
    let relative_error = got.relative_error(&want)?;
    Ok(RoundtripReport {
        seed,
        dims: padded.original,
        padded_dims: (nx, nz, ny),
        results_used,
        relative_error,
        passed: relative_error < ROUNDTRIP_TOLERANCE,
    })
}

/// Summary rows plus the per-trial rows behind them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepOutput {
    pub summary: Vec<SummaryRow>,
    pub trace: Vec<TraceRow>,
}

impl SweepOutput {
    fn push(&mut self, scheme: &str, layers: usize, times: &[f64]) {
        let s = Summary::of(times);
        self.summary.push(SummaryRow {
            scheme: scheme.into(),
            layers,
            mean: s.mean,
            stderr: s.stderr,
            trials: s.trials,
        });
        self.trace
            .extend(times.iter().enumerate().map(|(i, &t)| TraceRow {
                trial: i + 1,
                scheme: scheme.into(),
                layers,
                time_seconds: t,
            }));
    }

    fn skip(&mut self, layers: usize) {
        self.summary.push(SummaryRow {
            scheme: "skipped".into(),
            layers,
            mean: f64::NAN,
            stderr: f64::NAN,
            trials: 0,
        });
    }

    /// The summary row for `(scheme, L)`.
    pub fn get(&self, scheme: &str, layers: usize) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.scheme == scheme && r.layers == layers)
    }
}

/// Layer profile with `L · k_per_layer` blocks for a sweep point.
pub fn sweep_profile(
    sweep: &SweepSection,
    layers: usize,
    sim: &SimConfig,
) -> anyhow::Result<Vec<usize>> {
    let k_total = layers * sweep.k_per_layer;
    Ok(match sweep.profile {
        SweepProfile::Expected { margin } => {
            expected_completion_profile(layers, k_total, sim, margin)?
        }
        SweepProfile::Geometric { ratio } => {
            hierarchical::geometric_profile(layers, k_total, ratio, sim.n_workers)?
        }
        SweepProfile::Uniform => vec![sweep.k_per_layer; layers],
    })
}

/// The sweep cuboid: the configured dims with `nx` padded so that the
/// uncoded split and every layer profile divide it.
pub fn sweep_cuboid(cfg: &Config, layers: &[usize]) -> anyhow::Result<Cuboid> {
    let k = cfg.sweep.k_per_layer;
    let dx = layers
        .iter()
        .fold(lcm(cfg.n_workers, k), |d, &l| lcm(d, l.max(1) * k));
    let m = cfg.matrix;
    let (nx, nz, ny) = padded_dims((m.nx, m.nz, m.ny), (dx, 1, 1));
    if nx != m.nx {
        log::info!("sweep pads nx from {} to {nx}", m.nx);
    }
    Ok(Cuboid::new(nx, nz, ny)?)
}

/// Finishing-time statistics for uncoded, flat polynomial, hierarchical and
/// sum-rate at each `L`. All schemes see the same straggler draws per trial.
pub fn cmd_sweep(cfg: &Config, layers: &[usize]) -> anyhow::Result<SweepOutput> {
    let sim_cfg = cfg.sim_config()?;
    let k = cfg.sweep.k_per_layer;
    if k == 0 || k > cfg.n_workers {
        bail!("k_per_layer must be in 1..={}", cfg.n_workers);
    }
    let cuboid = sweep_cuboid(cfg, layers)?;
    let n = cfg.n_workers;
    let profile_plan = |ks: Vec<usize>| {
        build_plan(
            &cuboid,
            n,
            &LayerStrategy::Profile { ks, axis: Axis::X },
            Scheme::Polynomial,
        )
    };
    let flat = profile_plan(vec![k])?;
    let uncoded = sim::finishing_times(SimTarget::Uncoded(cuboid), &sim_cfg)?;
    let poly = sim::finishing_times(SimTarget::Hierarchical(&flat), &sim_cfg)?;

    let mut out = SweepOutput::default();
    for &l in layers {
        let plan = match sweep_profile(&cfg.sweep, l, &sim_cfg).and_then(|ks| Ok(profile_plan(ks)?))
        {
            Ok(p) => p,
            Err(e) => {
                log::warn!("skipping L = {l}: {e:#}");
                out.skip(l);
                continue;
            }
        };
        log::debug!(
            "L = {l}: k = {:?}",
            plan.layers().iter().map(|x| x.k).collect::<Vec<_>>()
        );
        let hier = sim::finishing_times(SimTarget::Hierarchical(&plan), &sim_cfg)?;
        let sum = sim::finishing_times(
            SimTarget::SumRate {
                plan: &plan,
                jobs_per_worker: l,
            },
            &sim_cfg,
        )?;
        out.push("uncoded", l, &uncoded);
        out.push("polynomial", l, &poly);
        out.push("hierarchical", l, &hier);
        out.push("sum_rate", l, &sum);
    }
    Ok(out)
}

pub fn write_csv<T: Serialize>(rows: &[T], w: impl Write) -> anyhow::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Exit status for a failed command: 2 for numerical failures, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<cmm_core::Error>())
        .any(|e| e.is_numerical());
    if numerical {
        2
    } else {
        1
    }
}
