//! Dense row-major `f64` matrices and the multiply/slice primitives the
//! rest of the crate is built from.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed interval `[start, end]` of 1-based indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[usize; 2]", into = "[usize; 2]")]
pub struct Interval {
    start: usize,
    end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start == 0 || end < start {
            return Err(Error::Index(format!(
                "interval [{start}..{end}] must satisfy 1 <= start <= end"
            )));
        }
        Ok(Self { start, end })
    }

    /// The interval `[1, len]`.
    pub fn full(len: usize) -> Result<Self> {
        Self::new(1, len)
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The `i`th element (1-based) of the interval.
    pub fn element(&self, i: usize) -> Option<usize> {
        (i >= 1 && i <= self.len()).then(|| self.start + i - 1)
    }

    /// `[len] + offset`, i.e. `{offset + 1, ..., offset + len}` relative to
    /// this interval's start.
    pub fn sub(&self, offset: usize, len: usize) -> Result<Self> {
        if len == 0 || offset + len > self.len() {
            return Err(Error::Index(format!(
                "sub-interval (offset {offset}, len {len}) outside {self}"
            )));
        }
        Self::new(self.start + offset, self.start + offset + len - 1)
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn contains(&self, other: &Interval) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub(crate) fn zero_based(&self) -> std::ops::Range<usize> {
        self.start - 1..self.end
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}..{}]", self.start, self.end)
    }
}

impl TryFrom<[usize; 2]> for Interval {
    type Error = Error;

    fn try_from(v: [usize; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [usize; 2] {
    fn from(i: Interval) -> Self {
        [i.start, i.end]
    }
}

/// Dense real matrix in row-major order. Entries are always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMatrix(format!(
                "dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for {rows}x{cols}, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite entry at row {}, col {}",
                pos / cols + 1,
                pos % cols + 1
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != m) {
            return Err(Error::InvalidMatrix("ragged rows".into()));
        }
        Self::new(
            n,
            m,
            rows.iter()
                .flat_map(|r| r.as_ref().iter().copied())
                .collect(),
        )
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from `f(i, j)` with 0-based indices.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// 0-based element access.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * alpha).collect(),
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Matrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape {
                op: "axpy",
                left: self.shape(),
                right: other.shape(),
            });
        }
        for (d, s) in self.data.iter_mut().zip(&other.data) {
            *d += alpha * s;
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `||self - reference||_F / ||reference||_F`, or the absolute error when
    /// the reference is zero.
    pub fn relative_error(&self, reference: &Matrix) -> Result<f64> {
        if self.shape() != reference.shape() {
            return Err(Error::Shape {
                op: "relative_error",
                left: self.shape(),
                right: reference.shape(),
            });
        }
        let diff = self
            .data
            .iter()
            .zip(&reference.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let norm = reference.frobenius_norm();
        Ok(if norm == 0.0 { diff } else { diff / norm })
    }

    /// Copies `self` into the top-left corner of a zero matrix of the given
    /// shape.
    pub fn pad_to(&self, rows: usize, cols: usize) -> Result<Matrix> {
        if rows < self.rows || cols < self.cols {
            return Err(Error::Shape {
                op: "pad_to",
                left: self.shape(),
                right: (rows, cols),
            });
        }
        let mut out = Matrix::zeros(rows, cols);
        out.add_block(0, 0, self)?;
        Ok(out)
    }

    /// Adds `block` into `self` with its top-left corner at 0-based
    /// `(row, col)`.
    pub fn add_block(&mut self, row: usize, col: usize, block: &Matrix) -> Result<()> {
        if row + block.rows > self.rows || col + block.cols > self.cols {
            return Err(Error::Index(format!(
                "{}x{} block at ({row}, {col}) exceeds {}x{}",
                block.rows, block.cols, self.rows, self.cols
            )));
        }
        for i in 0..block.rows {
            let dst = (row + i) * self.cols + col;
            for (d, s) in self.data[dst..dst + block.cols]
                .iter_mut()
                .zip(block.row(i))
            {
                *d += s;
            }
        }
        Ok(())
    }

    /// `[self | other]`.
    pub fn hconcat(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::Shape {
                op: "hconcat",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// `[self; other]`.
    pub fn vconcat(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::Shape {
                op: "vconcat",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }
}

/// Matrix product `a · b`, accumulated as `a.cols()` multiply-and-accumulate
/// steps per output entry in a fixed order.
pub fn multiply(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::Shape {
            op: "multiply",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (n, m) = (a.rows, b.cols);
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let out_row = &mut out[i * m..(i + 1) * m];
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in out_row.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    }
    Ok(Matrix {
        rows: n,
        cols: m,
        data: out,
    })
}

/// Copies the block `rows × cols` (1-based closed intervals) out of `m`.
pub fn submatrix(m: &Matrix, rows: Interval, cols: Interval) -> Result<Matrix> {
    if rows.end() > m.rows || cols.end() > m.cols {
        return Err(Error::Index(format!(
            "rows {rows} x cols {cols} outside {}x{} matrix",
            m.rows, m.cols
        )));
    }
    let cr = cols.zero_based();
    let mut data = Vec::with_capacity(rows.len() * cols.len());
    for i in rows.zero_based() {
        data.extend_from_slice(&m.row(i)[cr.clone()]);
    }
    Ok(Matrix {
        rows: rows.len(),
        cols: cols.len(),
        data,
    })
}

/// Number of multiply-and-accumulate operations in an `nx × nz` by `nz × ny`
/// product.
pub fn basic_op_count(nx: usize, nz: usize, ny: usize) -> usize {
    nx * nz * ny
}

impl fmt::Display for Matrix {
    /// Text format: `rows cols` on the first line, then one line per row.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

impl FromStr for Matrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidMatrix("missing header line".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidMatrix(format!("bad header {header:?}: {e}")))?;
        let [rows, cols] = dims[..] else {
            return Err(Error::InvalidMatrix(format!("bad header {header:?}")));
        };
        let mut data = Vec::with_capacity(rows * cols);
        for (n, line) in lines.enumerate() {
            let before = data.len();
            for tok in line.split_whitespace() {
                data.push(
                    tok.parse::<f64>().map_err(|e| {
                        Error::InvalidMatrix(format!("line {}: {tok:?}: {e}", n + 2))
                    })?,
                );
            }
            if data.len() - before != cols {
                return Err(Error::InvalidMatrix(format!(
                    "line {}: expected {cols} values, got {}",
                    n + 2,
                    data.len() - before
                )));
            }
        }
        Matrix::new(rows, cols, data)
    }
}
