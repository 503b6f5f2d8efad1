use crate::error::{Error, Result};
use crate::matrix::{submatrix, Interval, Matrix};

use super::interp::Interpolator;
use super::{CodeSpec, CodedResult, Scheme};

/// Coefficient index of each output block, in output order, plus the shape
/// each block is trimmed to (`None` keeps the decoded shape).
fn coefficient_map(spec: &CodeSpec) -> Vec<(usize, Option<(usize, usize)>)> {
    match spec.scheme() {
        Scheme::Polynomial => {
            let (mx, my) = (spec.cut().mx(), spec.cut().my());
            (0..mx)
                .flat_map(|i| (0..my).map(move |j| (i + j * mx, None)))
                .collect()
        }
        Scheme::Matdot => vec![(spec.cut().mz() - 1, None)],
        Scheme::SumRatePolynomial => {
            let layout = spec.sum_rate_layout().expect("validated sum-rate spec");
            layout
                .layers
                .iter()
                .zip(layout.offsets())
                .flat_map(|(l, o)| {
                    let (mx, my) = (l.cut.mx(), l.cut.my());
                    let shape = Some((l.block_rows, l.block_cols));
                    (0..mx).flat_map(move |i| (0..my).map(move |j| (o + i + j * mx, shape)))
                })
                .collect()
        }
    }
}

fn trim(m: Matrix, shape: Option<(usize, usize)>) -> Result<Matrix> {
    match shape {
        Some((r, c)) if (r, c) != m.shape() => {
            submatrix(&m, Interval::full(r)?, Interval::full(c)?)
        }
        _ => Ok(m),
    }
}

/// Maps product-polynomial coefficients (lowest degree first) to
/// information-block products in canonical order. Coefficients beyond
/// `coeffs.len()` are taken to be zero.
pub fn blocks_from_coefficients(coeffs: &[Matrix], spec: &CodeSpec) -> Result<Vec<Matrix>> {
    let (r, c) = coeffs
        .first()
        .ok_or(Error::InsufficientResults { have: 0, need: 1 })?
        .shape();
    coefficient_map(spec)
        .into_iter()
        .map(|(d, shape)| {
            let m = coeffs
                .get(d)
                .cloned()
                .unwrap_or_else(|| Matrix::zeros(r, c));
            trim(m, shape)
        })
        .collect()
}

/// Recovers the information-block products from any `R` results with
/// distinct evaluation points.
///
/// Polynomial codes return `mx·my` blocks ordered by `(m_x, m_y)`; MatDot
/// returns the single product `A·B`; sum-rate returns every layer's blocks
/// in layer order, each trimmed back to its unpadded shape.
pub fn decode(results: &[CodedResult], spec: &CodeSpec) -> Result<Vec<Matrix>> {
    let need = spec.recovery_threshold();
    let mut chosen: Vec<&CodedResult> = Vec::with_capacity(need);
    for r in results {
        if chosen.len() == need {
            break;
        }
        if !chosen.iter().any(|c| c.eval_point == r.eval_point) {
            chosen.push(r);
        }
    }
    if chosen.len() < need {
        return Err(Error::InsufficientResults {
            have: chosen.len(),
            need,
        });
    }
    let shape = chosen[0].product.shape();
    if let Some(bad) = chosen.iter().find(|c| c.product.shape() != shape) {
        return Err(Error::Shape {
            op: "decode",
            left: shape,
            right: bad.product.shape(),
        });
    }

    let points: Vec<f64> = chosen.iter().map(|c| c.eval_point).collect();
    let values: Vec<&Matrix> = chosen.iter().map(|c| &c.product).collect();
    let interp = Interpolator::new(&points)?;
    coefficient_map(spec)
        .into_iter()
        .map(|(d, s)| trim(interp.coefficient(d, &values)?, s))
        .collect()
}
