//! Layered (hierarchical) coded multiplication.
//!
//! The cuboid is first split into task blocks, one per layer. Each task block
//! is then cut into equal information blocks and coded on its own. Every
//! worker holds one coded job per layer and runs them in layer order, so a
//! layer can be decoded as soon as any `r_ℓ` workers have reached it.

use serde::{Deserialize, Serialize};

use crate::codes::{
    self, chebyshev_points, CodeSpec, CodedResult, EncodedJob, LayerBlocks, Scheme, SumRateLayer,
    SumRateLayout,
};
use crate::cuboid::{
    classify, extract_block_operands, partition_task_block, Axis, Cuboid, CutSpec, TaskBlock,
};
use crate::error::{Error, Result};
use crate::matrix::{Interval, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub task_block: TaskBlock,
    pub cut: CutSpec,
    pub k: usize,
    pub r: usize,
    pub code: CodeSpec,
}

impl LayerSpec {
    /// A layer coded with `scheme` at Chebyshev points for `n_workers`.
    pub fn new(
        task_block: TaskBlock,
        cut: CutSpec,
        scheme: Scheme,
        n_workers: usize,
    ) -> Result<Self> {
        let code = CodeSpec::with_chebyshev(scheme, cut, n_workers)?;
        let layer = LayerSpec {
            task_block,
            cut,
            k: cut.k(),
            r: code.recovery_threshold(),
            code,
        };
        layer.check(n_workers)?;
        Ok(layer)
    }

    fn check(&self, n_workers: usize) -> Result<()> {
        let id = self.task_block.layer_id;
        if self.k != self.cut.k() {
            return Err(Error::InvalidPlan(format!(
                "layer {id}: k = {} but the cut has {} blocks",
                self.k,
                self.cut.k()
            )));
        }
        if self.code.cut() != self.cut || self.code.n_workers() != n_workers {
            return Err(Error::InvalidPlan(format!(
                "layer {id}: code does not match the layer cut or worker count"
            )));
        }
        if self.code.scheme() == Scheme::SumRatePolynomial {
            return Err(Error::InvalidPlan(format!(
                "layer {id}: sum-rate codes span layers and cannot code a single layer"
            )));
        }
        if self.r != self.code.recovery_threshold() || self.r > n_workers {
            return Err(Error::InvalidPlan(format!(
                "layer {id}: threshold {} inconsistent with code threshold {} and N = {n_workers}",
                self.r,
                self.code.recovery_threshold()
            )));
        }
        partition_task_block(&self.task_block, &self.cut)?;
        Ok(())
    }

    /// Dimensions `(x, z, y)` of one information block.
    pub fn block_dims(&self) -> (usize, usize, usize) {
        let (x, z, y) = self.task_block.dims();
        (x / self.cut.mx(), z / self.cut.mz(), y / self.cut.my())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlanRepr", into = "PlanRepr")]
pub struct HierarchicalPlan {
    cuboid: Cuboid,
    n_workers: usize,
    layers: Vec<LayerSpec>,
}

#[derive(Serialize, Deserialize)]
struct PlanRepr {
    cuboid: Cuboid,
    n_workers: usize,
    layers: Vec<LayerSpec>,
}

impl TryFrom<PlanRepr> for HierarchicalPlan {
    type Error = Error;
    fn try_from(r: PlanRepr) -> Result<Self> {
        HierarchicalPlan::new(r.cuboid, r.n_workers, r.layers)
    }
}

impl From<HierarchicalPlan> for PlanRepr {
    fn from(p: HierarchicalPlan) -> Self {
        PlanRepr {
            cuboid: p.cuboid,
            n_workers: p.n_workers,
            layers: p.layers,
        }
    }
}

impl HierarchicalPlan {
    pub fn new(cuboid: Cuboid, n_workers: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        if n_workers == 0 {
            return Err(Error::InvalidPlan("n_workers must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidPlan("a plan needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.task_block.layer_id != i + 1 {
                return Err(Error::InvalidPlan(format!(
                    "layer at position {} has id {}",
                    i + 1,
                    l.task_block.layer_id
                )));
            }
            if !l.task_block.within(&cuboid) {
                return Err(Error::InvalidPlan(format!(
                    "layer {} leaves the cuboid",
                    i + 1
                )));
            }
            l.check(n_workers)?;
            if let Some(o) = layers[..i]
                .iter()
                .find(|o| o.task_block.overlaps(&l.task_block))
            {
                return Err(Error::InvalidPlan(format!(
                    "layers {} and {} overlap",
                    o.task_block.layer_id,
                    i + 1
                )));
            }
        }
        let covered: usize = layers.iter().map(|l| l.task_block.volume()).sum();
        if covered != cuboid.volume() {
            return Err(Error::InvalidPlan(format!(
                "layers cover {covered} of {} basic operations",
                cuboid.volume()
            )));
        }
        Ok(Self {
            cuboid,
            n_workers,
            layers,
        })
    }

    pub fn cuboid(&self) -> Cuboid {
        self.cuboid
    }

    pub fn n_workers(&self) -> usize {
        self.n_workers
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn k_total(&self) -> usize {
        self.layers.iter().map(|l| l.k).sum()
    }

    pub fn thresholds(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.r).collect()
    }

    pub fn summary(&self) -> Vec<LayerSummary> {
        self.layers
            .iter()
            .map(|l| LayerSummary {
                layer_id: l.task_block.layer_id,
                category: classify(&l.cut).to_string(),
                scheme: l.code.scheme(),
                k: l.k,
                r: l.r,
                block_dims: l.block_dims(),
            })
            .collect()
    }
}

/// One line of a plan report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub layer_id: usize,
    pub category: String,
    pub scheme: Scheme,
    pub k: usize,
    pub r: usize,
    pub block_dims: (usize, usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplicitLayer {
    pub x: Interval,
    pub z: Interval,
    pub y: Interval,
    pub cut: CutSpec,
}

fn default_axis() -> Axis {
    Axis::X
}

/// How the cuboid is split into layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerStrategy {
    /// User-given task blocks and cuts, in execution order.
    Explicit { layers: Vec<ExplicitLayer> },
    /// `layers` equal slabs along `axis`, each cut by `cut`.
    Uniform {
        layers: usize,
        cut: CutSpec,
        #[serde(default = "default_axis")]
        axis: Axis,
    },
    /// Slabs along `axis` whose information dimensions shrink by `ratio`
    /// per layer and add up to `k_total`.
    Geometric {
        layers: usize,
        k_total: usize,
        ratio: f64,
        #[serde(default = "default_axis")]
        axis: Axis,
    },
    /// Slabs along `axis` with the given information dimensions; layer `ℓ`
    /// is `ks[ℓ]` equal blocks cut along the same axis, so every block in the
    /// plan has the same size.
    Profile {
        ks: Vec<usize>,
        #[serde(default = "default_axis")]
        axis: Axis,
    },
}

fn slab(c: &Cuboid, axis: Axis, start: usize, len: usize, layer_id: usize) -> Result<TaskBlock> {
    let mut tb = c.as_task_block(layer_id);
    let iv = Interval::new(start, start + len - 1)?;
    match axis {
        Axis::X => tb.x = iv,
        Axis::Z => tb.z = iv,
        Axis::Y => tb.y = iv,
    }
    Ok(tb)
}

/// Splits `k_total` into `layers` positive parts proportional to
/// `ratio^(ℓ-1)`, each at most `cap`, using largest-remainder rounding.
pub fn geometric_profile(
    layers: usize,
    k_total: usize,
    ratio: f64,
    cap: usize,
) -> Result<Vec<usize>> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::InvalidPlan(format!(
            "geometric ratio {ratio} must be positive"
        )));
    }
    let weights: Vec<f64> = (0..layers).map(|l| ratio.powi(l as i32)).collect();
    apportion(&weights, k_total, cap)
}

/// Largest-remainder apportionment of `total` into parts in `[1, cap]`
/// proportional to `weights`.
pub fn apportion(weights: &[f64], total: usize, cap: usize) -> Result<Vec<usize>> {
    let n = weights.len();
    if n == 0 || total < n || total > n * cap {
        return Err(Error::InvalidPlan(format!(
            "cannot split {total} into {n} parts within [1, {cap}]"
        )));
    }
    let mut fixed: Vec<Option<usize>> = vec![None; n];
    loop {
        let rem = total - fixed.iter().flatten().sum::<usize>();
        let free_w: f64 = (0..n)
            .filter(|&i| fixed[i].is_none())
            .map(|i| weights[i])
            .sum();
        let share = |i: usize| weights[i] / free_w * rem as f64;
        let over: Vec<usize> = (0..n)
            .filter(|&i| fixed[i].is_none() && share(i) > cap as f64)
            .collect();
        let under: Vec<usize> = (0..n)
            .filter(|&i| fixed[i].is_none() && share(i) < 1.0)
            .collect();
        if !over.is_empty() {
            over.iter().for_each(|&i| fixed[i] = Some(cap));
            continue;
        }
        if !under.is_empty() {
            under.iter().for_each(|&i| fixed[i] = Some(1));
            continue;
        }
        let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
        let mut out: Vec<usize> = fixed.iter().map(|f| f.unwrap_or(0)).collect();
        let mut left = rem;
        for &i in &free {
            out[i] = share(i).floor() as usize;
            left -= out[i];
        }
        let mut order = free.clone();
        order.sort_by(|&i, &j| {
            let (fi, fj) = (share(i) - share(i).floor(), share(j) - share(j).floor());
            fj.total_cmp(&fi).then(i.cmp(&j))
        });
        for &i in order.iter().take(left) {
            out[i] += 1;
        }
        return Ok(out);
    }
}

pub fn build_plan(
    c: &Cuboid,
    n_workers: usize,
    strategy: &LayerStrategy,
    scheme: Scheme,
) -> Result<HierarchicalPlan> {
    let layers = match strategy {
        LayerStrategy::Explicit { layers } => layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                LayerSpec::new(
                    TaskBlock::new(i + 1, l.x, l.z, l.y),
                    l.cut,
                    scheme,
                    n_workers,
                )
            })
            .collect::<Result<Vec<_>>>()?,
        LayerStrategy::Uniform { layers, cut, axis } => {
            let edge = c.edge(*axis);
            if *layers == 0 || !edge.is_multiple_of(*layers) {
                return Err(Error::Divisibility {
                    axis: *axis,
                    len: edge,
                    parts: *layers,
                });
            }
            let len = edge / layers;
            (0..*layers)
                .map(|i| {
                    LayerSpec::new(
                        slab(c, *axis, 1 + i * len, len, i + 1)?,
                        *cut,
                        scheme,
                        n_workers,
                    )
                })
                .collect::<Result<Vec<_>>>()?
        }
        LayerStrategy::Geometric {
            layers,
            k_total,
            ratio,
            axis,
        } => {
            let ks = geometric_profile(*layers, *k_total, *ratio, n_workers)?;
            return build_plan(
                c,
                n_workers,
                &LayerStrategy::Profile { ks, axis: *axis },
                scheme,
            );
        }
        LayerStrategy::Profile { ks, axis } => {
            let total: usize = ks.iter().sum();
            let edge = c.edge(*axis);
            if ks.is_empty() || ks.contains(&0) || !edge.is_multiple_of(total) {
                return Err(Error::Divisibility {
                    axis: *axis,
                    len: edge,
                    parts: total,
                });
            }
            let unit = edge / total;
            let mut start = 1;
            let mut out = Vec::with_capacity(ks.len());
            for (i, &k) in ks.iter().enumerate() {
                let tb = slab(c, *axis, start, k * unit, i + 1)?;
                out.push(LayerSpec::new(
                    tb,
                    CutSpec::along(*axis, k)?,
                    scheme,
                    n_workers,
                )?);
                start += k * unit;
            }
            out
        }
    };
    HierarchicalPlan::new(*c, n_workers, layers)
}

/// The ordered coded jobs of one worker, one per layer (or per sum-rate
/// slot).
#[derive(Clone, Debug, PartialEq)]
pub struct WorkerQueue {
    pub worker_id: usize,
    pub jobs: Vec<EncodedJob>,
}

fn check_operands(plan: &HierarchicalPlan, a: &Matrix, b: &Matrix) -> Result<()> {
    let c = plan.cuboid;
    if a.shape() != (c.nx(), c.nz()) || b.shape() != (c.nz(), c.ny()) {
        return Err(Error::Shape {
            op: "encode_plan",
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

/// `(a_blocks, b_blocks)` in the order the layer's encoder expects.
fn layer_operands(
    cuboid: &Cuboid,
    layer: &LayerSpec,
    a: &Matrix,
    b: &Matrix,
) -> Result<(Vec<Matrix>, Vec<Matrix>)> {
    let blocks = partition_task_block(&layer.task_block, &layer.cut)?;
    let pick = |want: (usize, usize, usize)| {
        blocks
            .iter()
            .find(|blk| blk.index == want)
            .expect("block in grid")
    };
    let cut = layer.cut;
    match layer.code.scheme() {
        Scheme::Matdot => {
            let mut a_blocks = Vec::with_capacity(cut.mz());
            let mut b_blocks = Vec::with_capacity(cut.mz());
            for mz in 1..=cut.mz() {
                let (sa, sb) = extract_block_operands(a, b, cuboid, pick((1, mz, 1)))?;
                a_blocks.push(sa);
                b_blocks.push(sb);
            }
            Ok((a_blocks, b_blocks))
        }
        _ => {
            let a_blocks = (1..=cut.mx())
                .map(|mx| Ok(extract_block_operands(a, b, cuboid, pick((mx, 1, 1)))?.0))
                .collect::<Result<Vec<_>>>()?;
            let b_blocks = (1..=cut.my())
                .map(|my| Ok(extract_block_operands(a, b, cuboid, pick((1, 1, my)))?.1))
                .collect::<Result<Vec<_>>>()?;
            Ok((a_blocks, b_blocks))
        }
    }
}

fn encode_layer(
    cuboid: &Cuboid,
    layer: &LayerSpec,
    a: &Matrix,
    b: &Matrix,
) -> Result<Vec<EncodedJob>> {
    let (ab, bb) = layer_operands(cuboid, layer, a, b)?;
    match layer.code.scheme() {
        Scheme::Polynomial => codes::polynomial_encode(&ab, &bb, &layer.code),
        Scheme::Matdot => codes::matdot_encode(&ab, &bb, &layer.code),
        Scheme::SumRatePolynomial => unreachable!("rejected by LayerSpec::check"),
    }
}

/// One queue per worker; job `ℓ` of worker `n` is layer `ℓ`'s code evaluated
/// at the worker's point.
pub fn encode_plan(plan: &HierarchicalPlan, a: &Matrix, b: &Matrix) -> Result<Vec<WorkerQueue>> {
    check_operands(plan, a, b)?;
    let mut queues: Vec<WorkerQueue> = (1..=plan.n_workers)
        .map(|worker_id| WorkerQueue {
            worker_id,
            jobs: Vec::with_capacity(plan.layers.len()),
        })
        .collect();
    for layer in &plan.layers {
        for (q, job) in queues
            .iter_mut()
            .zip(encode_layer(&plan.cuboid, layer, a, b)?)
        {
            q.jobs.push(job);
        }
    }
    Ok(queues)
}

/// Whether each layer has at least `r_ℓ` results.
pub fn layer_decodable(received: &[usize], plan: &HierarchicalPlan) -> Vec<bool> {
    plan.layers
        .iter()
        .enumerate()
        .map(|(i, l)| received.get(i).copied().unwrap_or(0) >= l.r)
        .collect()
}

/// Places a `(mx, my)` grid of block products (ordered by `(m_x, m_y)`) into
/// one `mx·rows × my·cols` matrix.
fn stitch(blocks: &[Matrix], mx: usize, my: usize) -> Result<Matrix> {
    let (br, bc) = blocks[0].shape();
    let mut out = Matrix::zeros(br * mx, bc * my);
    for i in 0..mx {
        for j in 0..my {
            out.add_block(i * br, j * bc, &blocks[i * my + j])?;
        }
    }
    Ok(out)
}

/// The layer's task-block product from its decoded information-block
/// products (`(m_x, m_y)` order, or the single MatDot product).
pub fn layer_product(blocks: &[Matrix], layer: &LayerSpec) -> Result<Matrix> {
    let want = match layer.code.scheme() {
        Scheme::Matdot => 1,
        _ => layer.cut.mx() * layer.cut.my(),
    };
    if blocks.len() != want {
        return Err(Error::InvalidCode(format!(
            "layer {} needs {want} block products, got {}",
            layer.task_block.layer_id,
            blocks.len()
        )));
    }
    match layer.code.scheme() {
        Scheme::Matdot => Ok(blocks[0].clone()),
        _ => stitch(blocks, layer.cut.mx(), layer.cut.my()),
    }
}

/// `A[X_ℓ × Z_ℓ] · B[Z_ℓ × Y_ℓ]` from the layer's coded results.
pub fn decode_layer(results: &[CodedResult], layer: &LayerSpec) -> Result<Matrix> {
    layer_product(&codes::decode(results, &layer.code)?, layer)
}

/// Sums each layer's product into its `X_ℓ × Y_ℓ` footprint of the output.
pub fn assemble(layer_products: &[(TaskBlock, Option<Matrix>)], c: &Cuboid) -> Result<Matrix> {
    let missing: Vec<usize> = layer_products
        .iter()
        .filter(|(_, p)| p.is_none())
        .map(|(tb, _)| tb.layer_id)
        .collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteAssembly { missing });
    }
    let mut out = Matrix::zeros(c.nx(), c.ny());
    for (tb, p) in layer_products {
        let p = p.as_ref().expect("checked above");
        if p.shape() != (tb.x.len(), tb.y.len()) {
            return Err(Error::Shape {
                op: "assemble",
                left: p.shape(),
                right: (tb.x.len(), tb.y.len()),
            });
        }
        out.add_block(tb.x.start() - 1, tb.y.start() - 1, p)?;
    }
    Ok(out)
}

/// The sum-rate counterpart of `plan`: one polynomial code over all of the
/// plan's information blocks, with `jobs_per_worker` coded jobs per worker.
pub fn sum_rate_spec(plan: &HierarchicalPlan, jobs_per_worker: usize) -> Result<CodeSpec> {
    let layers = plan
        .layers
        .iter()
        .map(|l| {
            let (bx, _, by) = l.block_dims();
            SumRateLayer {
                cut: l.cut,
                block_rows: bx,
                block_cols: by,
            }
        })
        .collect();
    let layout = SumRateLayout {
        layers,
        jobs_per_worker,
    };
    let n_jobs = plan.n_workers * jobs_per_worker;
    CodeSpec::sum_rate(layout, plan.n_workers, chebyshev_points(n_jobs))
}

fn sum_rate_blocks(plan: &HierarchicalPlan, a: &Matrix, b: &Matrix) -> Result<Vec<LayerBlocks>> {
    plan.layers
        .iter()
        .map(|l| {
            if l.cut.mz() != 1 {
                return Err(Error::Unsupported(format!(
                    "sum-rate coding needs x/y-cut layers, layer {} cuts z",
                    l.task_block.layer_id
                )));
            }
            let (a_blocks, b_blocks) = layer_operands(&plan.cuboid, l, a, b)?;
            Ok(LayerBlocks { a_blocks, b_blocks })
        })
        .collect()
}

/// Worker queues for the sum-rate code built by [`sum_rate_spec`].
pub fn encode_sum_rate(
    plan: &HierarchicalPlan,
    spec: &CodeSpec,
    a: &Matrix,
    b: &Matrix,
) -> Result<Vec<WorkerQueue>> {
    check_operands(plan, a, b)?;
    let jobs = codes::sum_rate_encode(&sum_rate_blocks(plan, a, b)?, spec, spec.k())?;
    let per = spec.jobs_per_worker();
    let mut queues: Vec<WorkerQueue> = (1..=plan.n_workers)
        .map(|worker_id| WorkerQueue {
            worker_id,
            jobs: Vec::with_capacity(per),
        })
        .collect();
    for job in jobs {
        queues[job.worker_id - 1].jobs.push(job);
    }
    Ok(queues)
}

/// Decodes a sum-rate code and returns each layer's task-block product.
pub fn decode_sum_rate(
    plan: &HierarchicalPlan,
    spec: &CodeSpec,
    results: &[CodedResult],
) -> Result<Vec<Matrix>> {
    sum_rate_layer_products(plan, &codes::decode(results, spec)?)
}

/// Splits sum-rate block products (all layers, in order) into per-layer
/// task-block products.
pub fn sum_rate_layer_products(plan: &HierarchicalPlan, blocks: &[Matrix]) -> Result<Vec<Matrix>> {
    if blocks.len() != plan.k_total() {
        return Err(Error::InvalidCode(format!(
            "plan has {} blocks, got {}",
            plan.k_total(),
            blocks.len()
        )));
    }
    let mut rest = blocks;
    let mut out = Vec::with_capacity(plan.layers.len());
    for l in &plan.layers {
        let (head, tail) = rest.split_at(l.k);
        out.push(stitch(head, l.cut.mx(), l.cut.my())?);
        rest = tail;
    }
    Ok(out)
}

/// Multiply-and-accumulate operations in one sum-rate job for `plan`,
/// matching the operand shapes [`codes::sum_rate_encode`] produces.
pub fn sum_rate_job_ops(plan: &HierarchicalPlan) -> usize {
    let layers = &plan.layers;
    let rows = layers.iter().map(|l| l.block_dims().0).max().unwrap_or(0);
    let inner = layers
        .iter()
        .map(|l| l.task_block.z.len())
        .max()
        .unwrap_or(0);
    let cols = layers.iter().map(|l| l.block_dims().2).max().unwrap_or(0);
    let first = &layers[0].task_block;
    let shared_b = layers
        .iter()
        .all(|l| l.cut.my() == 1 && l.task_block.z == first.z && l.task_block.y == first.y);
    let shared_a = layers
        .iter()
        .all(|l| l.cut.mx() == 1 && l.task_block.x == first.x && l.task_block.z == first.z);
    let width = if shared_b || shared_a {
        1
    } else {
        layers.len()
    };
    rows * inner * cols * width
}
