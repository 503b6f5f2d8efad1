//! Geometric model of a matrix product: the `nx × nz × ny` lattice of
//! multiply-and-accumulate operations, axis-aligned cuts of it, and the
//! task/information blocks those cuts produce.
//!
//! An `A` entry `(i_x, i_z)` and a `B` entry `(i_z, i_y)` meet in the unit
//! cube `(i_x, i_z, i_y)`. Slicing along `x` splits the rows of `A`, along
//! `y` the columns of `B`, and along `z` the shared inner dimension.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{submatrix, Interval, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Z,
    Y,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Z => "z",
            Axis::Y => "y",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "CuboidRepr", into = "CuboidRepr")]
pub struct Cuboid {
    nx: usize,
    nz: usize,
    ny: usize,
}

#[derive(Serialize, Deserialize)]
struct CuboidRepr {
    nx: usize,
    nz: usize,
    ny: usize,
}

impl TryFrom<CuboidRepr> for Cuboid {
    type Error = Error;
    fn try_from(r: CuboidRepr) -> Result<Self> {
        Cuboid::new(r.nx, r.nz, r.ny)
    }
}

impl From<Cuboid> for CuboidRepr {
    fn from(c: Cuboid) -> Self {
        CuboidRepr {
            nx: c.nx,
            nz: c.nz,
            ny: c.ny,
        }
    }
}

impl Cuboid {
    pub fn new(nx: usize, nz: usize, ny: usize) -> Result<Self> {
        if nx == 0 || nz == 0 || ny == 0 {
            return Err(Error::InvalidPlan(format!(
                "cuboid edges must be positive, got ({nx}, {nz}, {ny})"
            )));
        }
        Ok(Self { nx, nz, ny })
    }

    /// The cuboid of the product `a · b`.
    pub fn of_product(a: &Matrix, b: &Matrix) -> Result<Self> {
        if a.cols() != b.rows() {
            return Err(Error::Shape {
                op: "cuboid",
                left: a.shape(),
                right: b.shape(),
            });
        }
        Self::new(a.rows(), a.cols(), b.cols())
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn edge(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.nx,
            Axis::Z => self.nz,
            Axis::Y => self.ny,
        }
    }

    pub fn volume(&self) -> usize {
        self.nx * self.nz * self.ny
    }

    /// The whole cuboid as a single task block.
    pub fn as_task_block(&self, layer_id: usize) -> TaskBlock {
        TaskBlock {
            layer_id,
            x: Interval::full(self.nx).expect("nx > 0"),
            z: Interval::full(self.nz).expect("nz > 0"),
            y: Interval::full(self.ny).expect("ny > 0"),
        }
    }
}

/// Cut multiplicities along each axis; `1` means the axis is not cut.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "CutRepr", into = "CutRepr")]
pub struct CutSpec {
    mx: usize,
    mz: usize,
    my: usize,
}

#[derive(Serialize, Deserialize)]
struct CutRepr {
    mx: usize,
    mz: usize,
    my: usize,
}

impl TryFrom<CutRepr> for CutSpec {
    type Error = Error;
    fn try_from(r: CutRepr) -> Result<Self> {
        CutSpec::new(r.mx, r.mz, r.my)
    }
}

impl From<CutSpec> for CutRepr {
    fn from(c: CutSpec) -> Self {
        CutRepr {
            mx: c.mx,
            mz: c.mz,
            my: c.my,
        }
    }
}

impl CutSpec {
    pub fn new(mx: usize, mz: usize, my: usize) -> Result<Self> {
        if mx == 0 || mz == 0 || my == 0 {
            return Err(Error::InvalidPlan(format!(
                "cut multiplicities must be positive, got ({mx}, {mz}, {my})"
            )));
        }
        Ok(Self { mx, mz, my })
    }

    pub const NONE: CutSpec = CutSpec {
        mx: 1,
        mz: 1,
        my: 1,
    };

    /// `k` cuts along one axis.
    pub fn along(axis: Axis, k: usize) -> Result<Self> {
        match axis {
            Axis::X => Self::new(k, 1, 1),
            Axis::Z => Self::new(1, k, 1),
            Axis::Y => Self::new(1, 1, k),
        }
    }

    pub fn mx(&self) -> usize {
        self.mx
    }

    pub fn mz(&self) -> usize {
        self.mz
    }

    pub fn my(&self) -> usize {
        self.my
    }

    pub fn along_axis(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.mx,
            Axis::Z => self.mz,
            Axis::Y => self.my,
        }
    }

    /// Information dimension: the number of blocks this cut produces.
    pub fn k(&self) -> usize {
        self.mx * self.mz * self.my
    }
}

/// The subset of axes a partition cuts along. There are eight of these.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CutCategory {
    pub x: bool,
    pub z: bool,
    pub y: bool,
}

impl CutCategory {
    pub fn axes(&self) -> Vec<Axis> {
        [(self.x, Axis::X), (self.z, Axis::Z), (self.y, Axis::Y)]
            .into_iter()
            .filter_map(|(on, a)| on.then_some(a))
            .collect()
    }

    /// All eight categories, uncut first.
    pub fn all() -> [CutCategory; 8] {
        std::array::from_fn(|bits| CutCategory {
            x: bits & 1 != 0,
            z: bits & 2 != 0,
            y: bits & 4 != 0,
        })
    }
}

impl fmt::Display for CutCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let axes: Vec<String> = self.axes().iter().map(Axis::to_string).collect();
        write!(f, "{{{}}}", axes.join(","))
    }
}

pub fn classify(cut: &CutSpec) -> CutCategory {
    CutCategory {
        x: cut.mx > 1,
        z: cut.mz > 1,
        y: cut.my > 1,
    }
}

/// A sub-cuboid `x × z × y` of consecutive global indices, assigned to one
/// layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskBlock {
    pub layer_id: usize,
    pub x: Interval,
    pub z: Interval,
    pub y: Interval,
}

impl TaskBlock {
    pub fn new(layer_id: usize, x: Interval, z: Interval, y: Interval) -> Self {
        Self { layer_id, x, z, y }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.x.len(), self.z.len(), self.y.len())
    }

    pub fn volume(&self) -> usize {
        self.x.len() * self.z.len() * self.y.len()
    }

    pub fn interval(&self, axis: Axis) -> Interval {
        match axis {
            Axis::X => self.x,
            Axis::Z => self.z,
            Axis::Y => self.y,
        }
    }

    pub fn within(&self, c: &Cuboid) -> bool {
        self.x.end() <= c.nx && self.z.end() <= c.nz && self.y.end() <= c.ny
    }

    pub fn overlaps(&self, other: &TaskBlock) -> bool {
        self.x.overlaps(&other.x) && self.z.overlaps(&other.z) && self.y.overlaps(&other.y)
    }
}

/// One of the `k` equal-sized pieces of a task block. Ranges are global
/// indices into `[nx]`, `[nz]`, `[ny]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InformationBlock {
    /// `(m_x, m_z, m_y)`, 1-based.
    pub index: (usize, usize, usize),
    pub x: Interval,
    pub z: Interval,
    pub y: Interval,
}

impl InformationBlock {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.x.len(), self.z.len(), self.y.len())
    }

    pub fn volume(&self) -> usize {
        self.x.len() * self.z.len() * self.y.len()
    }
}

fn split(interval: Interval, parts: usize, axis: Axis) -> Result<Vec<Interval>> {
    let len = interval.len();
    if !len.is_multiple_of(parts) {
        return Err(Error::Divisibility { axis, len, parts });
    }
    let step = len / parts;
    (0..parts).map(|m| interval.sub(m * step, step)).collect()
}

fn grid(tb: &TaskBlock, cut: &CutSpec) -> Result<Vec<InformationBlock>> {
    let xs = split(tb.x, cut.mx, Axis::X)?;
    let zs = split(tb.z, cut.mz, Axis::Z)?;
    let ys = split(tb.y, cut.my, Axis::Y)?;
    let mut out = Vec::with_capacity(cut.k());
    for (ix, x) in xs.iter().enumerate() {
        for (iz, z) in zs.iter().enumerate() {
            for (iy, y) in ys.iter().enumerate() {
                out.push(InformationBlock {
                    index: (ix + 1, iz + 1, iy + 1),
                    x: *x,
                    z: *z,
                    y: *y,
                });
            }
        }
    }
    Ok(out)
}

/// Cuts the whole cuboid into `cut.k()` equal sub-cuboids, ordered by
/// `(m_x, m_z, m_y)` lexicographically. Each comes back as a task block whose
/// `layer_id` is its 1-based position.
pub fn slice_cuboid(c: &Cuboid, cut: &CutSpec) -> Result<Vec<TaskBlock>> {
    Ok(grid(&c.as_task_block(1), cut)?
        .into_iter()
        .enumerate()
        .map(|(i, b)| TaskBlock::new(i + 1, b.x, b.z, b.y))
        .collect())
}

/// Splits a task block into `cut.k()` equal information blocks, ordered by
/// `(m_x, m_z, m_y)` lexicographically.
pub fn partition_task_block(tb: &TaskBlock, cut: &CutSpec) -> Result<Vec<InformationBlock>> {
    grid(tb, cut)
}

/// `(A[x × z], B[z × y])` for the block.
pub fn extract_block_operands(
    a: &Matrix,
    b: &Matrix,
    cuboid: &Cuboid,
    block: &InformationBlock,
) -> Result<(Matrix, Matrix)> {
    if a.shape() != (cuboid.nx, cuboid.nz) {
        return Err(Error::Shape {
            op: "extract_block_operands (A)",
            left: a.shape(),
            right: (cuboid.nx, cuboid.nz),
        });
    }
    if b.shape() != (cuboid.nz, cuboid.ny) {
        return Err(Error::Shape {
            op: "extract_block_operands (B)",
            left: b.shape(),
            right: (cuboid.nz, cuboid.ny),
        });
    }
    Ok((
        submatrix(a, block.x, block.z)?,
        submatrix(b, block.z, block.y)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::multiply;

    fn cut(mx: usize, mz: usize, my: usize) -> CutSpec {
        CutSpec::new(mx, mz, my).unwrap()
    }

    #[test]
    fn slice_polynomial_quadrants() {
        let c = Cuboid::new(10, 8, 6).unwrap();
        let blocks = slice_cuboid(&c, &cut(2, 1, 2)).unwrap();
        assert_eq!(blocks.len(), 4);
        for b in &blocks {
            assert_eq!(b.dims(), (5, 8, 3));
        }
        assert_eq!(blocks[1].x, Interval::new(1, 5).unwrap());
        assert_eq!(blocks[1].y, Interval::new(4, 6).unwrap());
    }

    #[test]
    fn slice_no_cut_is_whole() {
        let c = Cuboid::new(4, 4, 4).unwrap();
        let blocks = slice_cuboid(&c, &CutSpec::NONE).unwrap();
        assert_eq!(blocks, vec![c.as_task_block(1)]);
    }

    #[test]
    fn slice_divisibility_error_names_axis() {
        let c = Cuboid::new(10, 8, 6).unwrap();
        assert_eq!(
            slice_cuboid(&c, &cut(3, 1, 1)).unwrap_err(),
            Error::Divisibility {
                axis: Axis::X,
                len: 10,
                parts: 3
            }
        );
    }

    #[test]
    fn partition_examples() {
        let tb = Cuboid::new(8, 8, 8).unwrap().as_task_block(1);
        let blocks = partition_task_block(&tb, &cut(2, 2, 2)).unwrap();
        assert_eq!(blocks.len(), 8);
        assert!(blocks.iter().all(|b| b.dims() == (4, 4, 4)));
        assert_eq!(blocks[0].index, (1, 1, 1));
        assert_eq!(blocks[1].index, (1, 1, 2));
        assert_eq!(blocks[7].index, (2, 2, 2));

        let tb = Cuboid::new(5, 8, 3).unwrap().as_task_block(1);
        let one = partition_task_block(&tb, &CutSpec::NONE).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!((one[0].x, one[0].z, one[0].y), (tb.x, tb.z, tb.y));

        let tb = Cuboid::new(4, 2, 6).unwrap().as_task_block(1);
        let six = partition_task_block(&tb, &cut(2, 1, 3)).unwrap();
        assert_eq!(six.len(), 6);
        assert!(six.iter().all(|b| b.dims() == (2, 2, 2)));
    }

    #[test]
    fn partition_offsets_by_task_block_start() {
        let tb = TaskBlock::new(
            2,
            Interval::new(5, 8).unwrap(),
            Interval::new(1, 2).unwrap(),
            Interval::new(3, 3).unwrap(),
        );
        let blocks = partition_task_block(&tb, &cut(2, 1, 1)).unwrap();
        assert_eq!(blocks[0].x, Interval::new(5, 6).unwrap());
        assert_eq!(blocks[1].x, Interval::new(7, 8).unwrap());
    }

    #[test]
    fn classify_categories() {
        let xy = classify(&cut(2, 1, 2));
        assert_eq!(xy.axes(), vec![Axis::X, Axis::Y]);
        assert_eq!(xy.to_string(), "{x,y}");
        assert_eq!(classify(&cut(1, 4, 1)).axes(), vec![Axis::Z]);
        assert_eq!(classify(&CutSpec::NONE).to_string(), "{}");
        let all = CutCategory::all();
        assert_eq!(all.len(), 8);
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn extract_operands() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[[5.0, 6.0], [7.0, 8.0]]).unwrap();
        let c = Cuboid::new(2, 2, 2).unwrap();

        let whole = partition_task_block(&c.as_task_block(1), &CutSpec::NONE).unwrap();
        assert_eq!(
            extract_block_operands(&a, &b, &c, &whole[0]).unwrap(),
            (a.clone(), b.clone())
        );

        let rows = partition_task_block(&c.as_task_block(1), &cut(2, 1, 1)).unwrap();
        let (sa, sb) = extract_block_operands(&a, &b, &c, &rows[1]).unwrap();
        assert_eq!(sa, Matrix::from_rows(&[[3.0, 4.0]]).unwrap());
        assert_eq!(sb, b);

        let inner = partition_task_block(&c.as_task_block(1), &cut(1, 2, 1)).unwrap();
        let (sa, sb) = extract_block_operands(&a, &b, &c, &inner[1]).unwrap();
        assert_eq!(sa, Matrix::from_rows(&[[2.0], [4.0]]).unwrap());
        assert_eq!(sb, Matrix::from_rows(&[[7.0, 8.0]]).unwrap());

        assert!(matches!(
            extract_block_operands(&b, &Matrix::zeros(3, 2), &c, &whole[0]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn z_blocks_sum_to_product() {
        let a = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let b = Matrix::from_rows(&[[3.0], [4.0]]).unwrap();
        let c = Cuboid::of_product(&a, &b).unwrap();
        let blocks = partition_task_block(&c.as_task_block(1), &cut(1, 2, 1)).unwrap();
        let mut acc = Matrix::zeros(1, 1);
        for blk in &blocks {
            let (sa, sb) = extract_block_operands(&a, &b, &c, blk).unwrap();
            acc.axpy(1.0, &multiply(&sa, &sb).unwrap()).unwrap();
        }
        assert_eq!(acc, Matrix::from_rows(&[[11.0]]).unwrap());
    }
}
