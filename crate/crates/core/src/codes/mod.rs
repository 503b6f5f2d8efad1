//! Polynomial-family erasure codes over one layer of information blocks:
//! polynomial codes (x/y cuts), MatDot codes (z cuts), and the sum-rate
//! polynomial code that spans several layers with a single code.

mod decode;
mod encode;
pub mod interp;

pub use decode::{blocks_from_coefficients, decode};
pub use encode::{matdot_encode, polynomial_encode, sum_rate_encode, LayerBlocks};
pub use interp::{chebyshev_points, Interpolator, CONDITION_LIMIT};

use serde::{Deserialize, Serialize};

use crate::cuboid::CutSpec;
use crate::error::{Error, Result};
use crate::matrix::{multiply, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Polynomial,
    Matdot,
    SumRatePolynomial,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Polynomial => "polynomial",
            Scheme::Matdot => "matdot",
            Scheme::SumRatePolynomial => "sum_rate_polynomial",
        })
    }
}

/// One layer as seen by the sum-rate code: its x/y cut and the shape of each
/// of its information-block products before padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SumRateLayer {
    pub cut: CutSpec,
    pub block_rows: usize,
    pub block_cols: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumRateLayout {
    pub layers: Vec<SumRateLayer>,
    /// Coded jobs each worker executes in sequence.
    pub jobs_per_worker: usize,
}

impl SumRateLayout {
    pub fn k_total(&self) -> usize {
        self.layers.iter().map(|l| l.cut.k()).sum()
    }

    /// Degree offset of each layer inside the joint product polynomial.
    pub fn offsets(&self) -> Vec<usize> {
        self.layers
            .iter()
            .scan(0, |acc, l| {
                let o = *acc;
                *acc += l.cut.k();
                Some(o)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CodeSpecRepr", into = "CodeSpecRepr")]
pub struct CodeSpec {
    scheme: Scheme,
    cut: CutSpec,
    n_workers: usize,
    eval_points: Vec<f64>,
    sum_rate: Option<SumRateLayout>,
}

#[derive(Serialize, Deserialize)]
struct CodeSpecRepr {
    scheme: Scheme,
    cut: CutSpec,
    n_workers: usize,
    eval_points: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sum_rate: Option<SumRateLayout>,
}

impl TryFrom<CodeSpecRepr> for CodeSpec {
    type Error = Error;
    fn try_from(r: CodeSpecRepr) -> Result<Self> {
        let spec = CodeSpec {
            scheme: r.scheme,
            cut: r.cut,
            n_workers: r.n_workers,
            eval_points: r.eval_points,
            sum_rate: r.sum_rate,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<CodeSpec> for CodeSpecRepr {
    fn from(s: CodeSpec) -> Self {
        CodeSpecRepr {
            scheme: s.scheme,
            cut: s.cut,
            n_workers: s.n_workers,
            eval_points: s.eval_points,
            sum_rate: s.sum_rate,
        }
    }
}

impl CodeSpec {
    /// A polynomial code (`mz == 1`) with the given evaluation points.
    pub fn polynomial(cut: CutSpec, n_workers: usize, eval_points: Vec<f64>) -> Result<Self> {
        let s = CodeSpec {
            scheme: Scheme::Polynomial,
            cut,
            n_workers,
            eval_points,
            sum_rate: None,
        };
        s.validate()?;
        Ok(s)
    }

    /// A MatDot code (`mx == my == 1`) with the given evaluation points.
    pub fn matdot(cut: CutSpec, n_workers: usize, eval_points: Vec<f64>) -> Result<Self> {
        let s = CodeSpec {
            scheme: Scheme::Matdot,
            cut,
            n_workers,
            eval_points,
            sum_rate: None,
        };
        s.validate()?;
        Ok(s)
    }

    /// A single polynomial code over every layer in `layout`;
    /// `eval_points.len()` must be `n_workers * layout.jobs_per_worker`.
    pub fn sum_rate(
        layout: SumRateLayout,
        n_workers: usize,
        eval_points: Vec<f64>,
    ) -> Result<Self> {
        let s = CodeSpec {
            scheme: Scheme::SumRatePolynomial,
            cut: CutSpec::NONE,
            n_workers,
            eval_points,
            sum_rate: Some(layout),
        };
        s.validate()?;
        Ok(s)
    }

    /// Polynomial or MatDot code at Chebyshev points.
    pub fn with_chebyshev(scheme: Scheme, cut: CutSpec, n_workers: usize) -> Result<Self> {
        let pts = chebyshev_points(n_workers);
        match scheme {
            Scheme::Polynomial => Self::polynomial(cut, n_workers, pts),
            Scheme::Matdot => Self::matdot(cut, n_workers, pts),
            Scheme::SumRatePolynomial => Err(Error::InvalidCode(
                "sum-rate codes are built from a layout, see CodeSpec::sum_rate".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_workers == 0 {
            return Err(Error::InvalidCode("n_workers must be positive".into()));
        }
        match self.scheme {
            Scheme::Polynomial if self.cut.mz() != 1 => {
                return Err(Error::InvalidCode(format!(
                    "polynomial codes cut along x and y only, got mz = {}",
                    self.cut.mz()
                )))
            }
            Scheme::Matdot if self.cut.mx() != 1 || self.cut.my() != 1 => {
                return Err(Error::InvalidCode(format!(
                    "matdot codes cut along z only, got mx = {}, my = {}",
                    self.cut.mx(),
                    self.cut.my()
                )))
            }
            Scheme::SumRatePolynomial => {
                let layout = self.sum_rate.as_ref().ok_or_else(|| {
                    Error::InvalidCode("sum-rate code without a layer layout".into())
                })?;
                if layout.layers.is_empty() || layout.jobs_per_worker == 0 {
                    return Err(Error::InvalidCode(
                        "sum-rate layout needs at least one layer and one job per worker".into(),
                    ));
                }
                if let Some(l) = layout.layers.iter().find(|l| l.cut.mz() != 1) {
                    return Err(Error::Unsupported(format!(
                        "sum-rate layers must cut along x/y only, found mz = {}",
                        l.cut.mz()
                    )));
                }
                if layout
                    .layers
                    .iter()
                    .any(|l| l.block_rows == 0 || l.block_cols == 0)
                {
                    return Err(Error::InvalidCode("empty sum-rate block shape".into()));
                }
            }
            _ => {}
        }
        if self.scheme != Scheme::SumRatePolynomial && self.sum_rate.is_some() {
            return Err(Error::InvalidCode(format!(
                "{} code carries a sum-rate layout",
                self.scheme
            )));
        }
        if self.eval_points.len() != self.n_jobs() {
            return Err(Error::InvalidCode(format!(
                "expected {} evaluation points, got {}",
                self.n_jobs(),
                self.eval_points.len()
            )));
        }
        for (i, t) in self.eval_points.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::InvalidCode(format!(
                    "evaluation point {t} is not finite"
                )));
            }
            if self.eval_points[i + 1..].contains(t) {
                return Err(Error::InvalidCode(format!("evaluation point {t} repeats")));
            }
        }
        let r = self.recovery_threshold();
        if r > self.n_jobs() {
            return Err(Error::InvalidCode(format!(
                "recovery threshold {r} exceeds the {} coded jobs",
                self.n_jobs()
            )));
        }
        Ok(())
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn cut(&self) -> CutSpec {
        self.cut
    }

    pub fn n_workers(&self) -> usize {
        self.n_workers
    }

    pub fn eval_points(&self) -> &[f64] {
        &self.eval_points
    }

    pub fn sum_rate_layout(&self) -> Option<&SumRateLayout> {
        self.sum_rate.as_ref()
    }

    pub fn jobs_per_worker(&self) -> usize {
        self.sum_rate.as_ref().map_or(1, |l| l.jobs_per_worker)
    }

    /// Total number of coded jobs across all workers.
    pub fn n_jobs(&self) -> usize {
        self.n_workers * self.jobs_per_worker()
    }

    /// Information dimension.
    pub fn k(&self) -> usize {
        match self.scheme {
            Scheme::Polynomial | Scheme::Matdot => self.cut.k(),
            Scheme::SumRatePolynomial => self.sum_rate.as_ref().map_or(0, SumRateLayout::k_total),
        }
    }

    /// Number of distinct results that suffices to decode: `mx·my` for
    /// polynomial codes, `2·mz − 1` for MatDot, the total information
    /// dimension for sum-rate.
    pub fn recovery_threshold(&self) -> usize {
        match self.scheme {
            Scheme::Polynomial => self.cut.mx() * self.cut.my(),
            Scheme::Matdot => 2 * self.cut.mz() - 1,
            Scheme::SumRatePolynomial => self.k(),
        }
    }

    /// Worker (1-based) that executes coded job `job` (0-based).
    pub fn worker_of_job(&self, job: usize) -> usize {
        job / self.jobs_per_worker() + 1
    }
}

pub fn recovery_threshold(spec: &CodeSpec) -> usize {
    spec.recovery_threshold()
}

/// The encoded operand pair handed to one worker.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedJob {
    pub worker_id: usize,
    pub eval_point: f64,
    pub a_tilde: Matrix,
    pub b_tilde: Matrix,
}

impl EncodedJob {
    pub fn compute(&self) -> Result<CodedResult> {
        Ok(CodedResult {
            worker_id: self.worker_id,
            eval_point: self.eval_point,
            product: multiply(&self.a_tilde, &self.b_tilde)?,
        })
    }

    /// Multiply-and-accumulate operations in this job.
    pub fn basic_ops(&self) -> usize {
        self.a_tilde.rows() * self.a_tilde.cols() * self.b_tilde.cols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodedResult {
    pub worker_id: usize,
    pub eval_point: f64,
    pub product: Matrix,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cut(mx: usize, mz: usize, my: usize) -> CutSpec {
        CutSpec::new(mx, mz, my).unwrap()
    }

    #[test]
    fn thresholds() {
        let p = CodeSpec::with_chebyshev(Scheme::Polynomial, cut(2, 1, 2), 6).unwrap();
        assert_eq!((p.k(), recovery_threshold(&p)), (4, 4));
        let m = CodeSpec::with_chebyshev(Scheme::Matdot, cut(1, 2, 1), 4).unwrap();
        assert_eq!((m.k(), recovery_threshold(&m)), (2, 3));
        let r = CodeSpec::with_chebyshev(Scheme::Polynomial, CutSpec::NONE, 3).unwrap();
        assert_eq!(recovery_threshold(&r), 1);
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(CodeSpec::with_chebyshev(Scheme::Polynomial, cut(1, 2, 1), 4).is_err());
        assert!(CodeSpec::with_chebyshev(Scheme::Matdot, cut(2, 2, 1), 4).is_err());
        assert!(CodeSpec::with_chebyshev(Scheme::Polynomial, cut(2, 1, 2), 3).is_err());
        assert!(CodeSpec::polynomial(cut(2, 1, 1), 2, vec![0.5, 0.5]).is_err());
        assert!(CodeSpec::polynomial(cut(2, 1, 1), 2, vec![0.5]).is_err());
    }

    #[test]
    fn sum_rate_threshold_is_total_dimension() {
        let layers = [8, 4, 3, 1]
            .iter()
            .map(|&k| SumRateLayer {
                cut: cut(k, 1, 1),
                block_rows: 1,
                block_cols: 1,
            })
            .collect();
        let layout = SumRateLayout {
            layers,
            jobs_per_worker: 2,
        };
        assert_eq!(layout.offsets(), vec![0, 8, 12, 15]);
        let spec = CodeSpec::sum_rate(layout, 8, chebyshev_points(16)).unwrap();
        assert_eq!((spec.k(), spec.recovery_threshold()), (16, 16));
        assert_eq!(spec.worker_of_job(0), 1);
        assert_eq!(spec.worker_of_job(3), 2);
    }

    #[test]
    fn sum_rate_rejects_z_cut_layers() {
        let layout = SumRateLayout {
            layers: vec![SumRateLayer {
                cut: cut(1, 2, 1),
                block_rows: 1,
                block_cols: 1,
            }],
            jobs_per_worker: 1,
        };
        assert!(matches!(
            CodeSpec::sum_rate(layout, 4, chebyshev_points(4)),
            Err(Error::Unsupported(_))
        ));
    }
}
