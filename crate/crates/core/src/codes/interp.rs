//! Real-valued polynomial interpolation in the monomial basis.
//!
//! One Vandermonde inverse is computed per set of evaluation points and then
//! applied entrywise to every result matrix.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Largest accepted 1-norm condition estimate of the interpolation system.
pub const CONDITION_LIMIT: f64 = 1e10;

/// Chebyshev nodes of the first kind on `[-1, 1]`:
/// `t_n = cos((2n - 1) π / 2N)` for `n = 1..=N`.
pub fn chebyshev_points(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| ((2 * i - 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos())
        .collect()
}

/// `1, 2, ..., n`. Only useful to demonstrate why Chebyshev nodes are used.
pub fn integer_points(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64).collect()
}

/// Row-major `n × n` matrix with entry `(i, d) = t_i^d`.
pub fn vandermonde(points: &[f64]) -> Vec<f64> {
    let n = points.len();
    let mut v = Vec::with_capacity(n * n);
    for &t in points {
        let mut p = 1.0;
        for _ in 0..n {
            v.push(p);
            p *= t;
        }
    }
    v
}

fn one_norm(m: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|j| (0..n).map(|i| m[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverts a dense `n × n` matrix by Gaussian elimination with partial
/// pivoting. Returns `None` when a pivot vanishes.
fn invert(m: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = m.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))
            .expect("non-empty range");
        if a[pivot * n + col] == 0.0 || !a[pivot * n + col].is_finite() {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(pivot * n + j, col * n + j);
                inv.swap(pivot * n + j, col * n + j);
            }
        }
        let p = a[col * n + col];
        for j in 0..n {
            a[col * n + j] /= p;
            inv[col * n + j] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                a[r * n + j] -= f * a[col * n + j];
                inv[r * n + j] -= f * inv[col * n + j];
            }
        }
    }
    inv.iter().all(|v| v.is_finite()).then_some(inv)
}

/// `||V||_1 · ||V^{-1}||_1` for the Vandermonde matrix of `points`;
/// infinite when the system is singular.
pub fn condition_estimate(points: &[f64]) -> f64 {
    let n = points.len();
    let v = vandermonde(points);
    match invert(&v, n) {
        Some(inv) => one_norm(&v, n) * one_norm(&inv, n),
        None => f64::INFINITY,
    }
}

/// Maps `n` samples of a degree `< n` matrix polynomial back to its
/// coefficients.
#[derive(Clone, Debug)]
pub struct Interpolator {
    points: Vec<f64>,
    inverse: Vec<f64>,
    condition: f64,
}

impl Interpolator {
    pub fn new(points: &[f64]) -> Result<Self> {
        Self::with_limit(points, CONDITION_LIMIT)
    }

    pub fn with_limit(points: &[f64], limit: f64) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::InsufficientResults { have: 0, need: 1 });
        }
        for (i, a) in points.iter().enumerate() {
            if points[i + 1..].contains(a) {
                return Err(Error::InvalidCode(format!(
                    "interpolation points must be distinct, {a} repeats"
                )));
            }
        }
        let v = vandermonde(points);
        let inverse = invert(&v, n).ok_or(Error::Conditioning {
            estimate: f64::INFINITY,
            limit,
        })?;
        let condition = one_norm(&v, n) * one_norm(&inverse, n);
        if condition.is_nan() || condition > limit {
            return Err(Error::Conditioning {
                estimate: condition,
                limit,
            });
        }
        Ok(Self {
            points: points.to_vec(),
            inverse,
            condition,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Coefficient `degree` of the polynomial whose value at `points[i]` is
    /// `values[i]`.
    pub fn coefficient(&self, degree: usize, values: &[&Matrix]) -> Result<Matrix> {
        let n = self.points.len();
        if values.len() != n {
            return Err(Error::InsufficientResults {
                have: values.len(),
                need: n,
            });
        }
        if degree >= n {
            return Err(Error::InvalidCode(format!(
                "degree {degree} outside an interpolant of {n} points"
            )));
        }
        let shape = values[0].shape();
        let mut out = Matrix::zeros(shape.0, shape.1);
        for (i, v) in values.iter().enumerate() {
            out.axpy(self.inverse[degree * n + i], v)?;
        }
        Ok(out)
    }

    /// All `n` coefficients, lowest degree first.
    pub fn coefficients(&self, values: &[&Matrix]) -> Result<Vec<Matrix>> {
        (0..self.points.len())
            .map(|d| self.coefficient(d, values))
            .collect()
    }
}
