use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::{CodeSpec, EncodedJob, Scheme};

/// `Σ terms[i].1 · t^{terms[i].0}`, summed in the order given.
fn evaluate(terms: &[(usize, &Matrix)], t: f64) -> Result<Matrix> {
    let (r, c) = terms[0].1.shape();
    let mut out = Matrix::zeros(r, c);
    for (exp, m) in terms {
        out.axpy(t.powi(*exp as i32), m)?;
    }
    Ok(out)
}

fn same_shape(blocks: &[Matrix], what: &'static str) -> Result<(usize, usize)> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::InvalidCode(format!("no {what} supplied")))?
        .shape();
    if let Some(b) = blocks.iter().find(|b| b.shape() != first) {
        return Err(Error::Shape {
            op: what,
            left: first,
            right: b.shape(),
        });
    }
    Ok(first)
}

fn check_scheme(spec: &CodeSpec, want: Scheme) -> Result<()> {
    if spec.scheme() != want {
        return Err(Error::InvalidCode(format!(
            "expected a {want} spec, got {}",
            spec.scheme()
        )));
    }
    Ok(())
}

/// Polynomial code: `Ã(t) = Σ A_{m_x} t^{m_x−1}` and
/// `B̃(t) = Σ B_{m_y} t^{(m_y−1)·mx}`, one job per evaluation point.
pub fn polynomial_encode(
    a_blocks: &[Matrix],
    b_blocks: &[Matrix],
    spec: &CodeSpec,
) -> Result<Vec<EncodedJob>> {
    check_scheme(spec, Scheme::Polynomial)?;
    let (mx, my) = (spec.cut().mx(), spec.cut().my());
    if a_blocks.len() != mx || b_blocks.len() != my {
        return Err(Error::InvalidCode(format!(
            "expected {mx} A blocks and {my} B blocks, got {} and {}",
            a_blocks.len(),
            b_blocks.len()
        )));
    }
    let sa = same_shape(a_blocks, "polynomial_encode A blocks")?;
    let sb = same_shape(b_blocks, "polynomial_encode B blocks")?;
    if sa.1 != sb.0 {
        return Err(Error::Shape {
            op: "polynomial_encode",
            left: sa,
            right: sb,
        });
    }
    let a_terms: Vec<_> = a_blocks.iter().enumerate().collect();
    let b_terms: Vec<_> = b_blocks
        .iter()
        .enumerate()
        .map(|(j, b)| (j * mx, b))
        .collect();
    spec.eval_points()
        .iter()
        .enumerate()
        .map(|(n, &t)| {
            Ok(EncodedJob {
                worker_id: n + 1,
                eval_point: t,
                a_tilde: evaluate(&a_terms, t)?,
                b_tilde: evaluate(&b_terms, t)?,
            })
        })
        .collect()
}

/// MatDot code over inner-dimension splits: `Ã(t) = Σ A_j t^{j−1}` and
/// `B̃(t) = Σ B_j t^{mz−j}`. The coefficient of `t^{mz−1}` in the product is
/// `Σ A_j B_j = A·B`.
pub fn matdot_encode(
    a_blocks: &[Matrix],
    b_blocks: &[Matrix],
    spec: &CodeSpec,
) -> Result<Vec<EncodedJob>> {
    check_scheme(spec, Scheme::Matdot)?;
    let mz = spec.cut().mz();
    if a_blocks.len() != mz || b_blocks.len() != mz {
        return Err(Error::InvalidCode(format!(
            "expected {mz} A and B blocks, got {} and {}",
            a_blocks.len(),
            b_blocks.len()
        )));
    }
    let sa = same_shape(a_blocks, "matdot_encode A blocks")?;
    let sb = same_shape(b_blocks, "matdot_encode B blocks")?;
    if sa.1 != sb.0 {
        return Err(Error::Shape {
            op: "matdot_encode",
            left: sa,
            right: sb,
        });
    }
    let a_terms: Vec<_> = a_blocks.iter().enumerate().collect();
    let b_terms: Vec<_> = b_blocks
        .iter()
        .enumerate()
        .map(|(j, b)| (mz - 1 - j, b))
        .collect();
    spec.eval_points()
        .iter()
        .enumerate()
        .map(|(n, &t)| {
            Ok(EncodedJob {
                worker_id: n + 1,
                eval_point: t,
                a_tilde: evaluate(&a_terms, t)?,
                b_tilde: evaluate(&b_terms, t)?,
            })
        })
        .collect()
}

/// The operands of one x/y-cut layer: `a_blocks` indexed by `m_x`,
/// `b_blocks` by `m_y`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerBlocks {
    pub a_blocks: Vec<Matrix>,
    pub b_blocks: Vec<Matrix>,
}

enum Sharing {
    /// Every layer uses the same single B block.
    SharedB,
    /// Every layer uses the same single A block.
    SharedA,
    /// Layers are placed side by side along the inner dimension.
    Concatenated,
}

/// A single polynomial code over the information blocks of every layer.
///
/// Layer `ℓ` contributes `t^{o_ℓ} · Ã_ℓ(t) · B̃_ℓ(t)` to each job, where
/// `Ã_ℓ`, `B̃_ℓ` are that layer's polynomial-code encodings and `o_ℓ` is the
/// running sum of the preceding layers' information dimensions, so the joint
/// product polynomial has degree `k_total − 1` and every coefficient is one
/// information-block product. Blocks are zero-padded to common shapes.
///
/// When all layers share one B block (x-only cuts of the same rows of `B`)
/// or one A block, the per-layer terms factor and each job is a single
/// block-sized product; otherwise the layers are concatenated along the
/// inner dimension.
pub fn sum_rate_encode(
    layers: &[LayerBlocks],
    spec: &CodeSpec,
    k_total: usize,
) -> Result<Vec<EncodedJob>> {
    check_scheme(spec, Scheme::SumRatePolynomial)?;
    let layout = spec.sum_rate_layout().expect("validated sum-rate spec");
    if layers.len() != layout.layers.len() {
        return Err(Error::InvalidCode(format!(
            "layout has {} layers, got blocks for {}",
            layout.layers.len(),
            layers.len()
        )));
    }
    if k_total != layout.k_total() {
        return Err(Error::InvalidCode(format!(
            "k_total {k_total} disagrees with the layout's {}",
            layout.k_total()
        )));
    }

    let (mut rows, mut inner, mut cols) = (0, 0, 0);
    for (blocks, shape) in layers.iter().zip(&layout.layers) {
        if blocks.a_blocks.len() != shape.cut.mx() || blocks.b_blocks.len() != shape.cut.my() {
            return Err(Error::InvalidCode(format!(
                "layer cut {:?} needs {} A and {} B blocks, got {} and {}",
                shape.cut,
                shape.cut.mx(),
                shape.cut.my(),
                blocks.a_blocks.len(),
                blocks.b_blocks.len()
            )));
        }
        let sa = same_shape(&blocks.a_blocks, "sum_rate_encode A blocks")?;
        let sb = same_shape(&blocks.b_blocks, "sum_rate_encode B blocks")?;
        if sa.1 != sb.0 || sa.0 != shape.block_rows || sb.1 != shape.block_cols {
            return Err(Error::Shape {
                op: "sum_rate_encode",
                left: sa,
                right: sb,
            });
        }
        rows = rows.max(sa.0);
        inner = inner.max(sa.1);
        cols = cols.max(sb.1);
    }

    let padded: Vec<(Vec<Matrix>, Vec<Matrix>)> = layers
        .iter()
        .map(|l| {
            Ok((
                l.a_blocks
                    .iter()
                    .map(|a| a.pad_to(rows, inner))
                    .collect::<Result<_>>()?,
                l.b_blocks
                    .iter()
                    .map(|b| b.pad_to(inner, cols))
                    .collect::<Result<_>>()?,
            ))
        })
        .collect::<Result<_>>()?;

    let sharing = if padded
        .iter()
        .all(|(_, b)| b.len() == 1 && b[0] == padded[0].1[0])
    {
        Sharing::SharedB
    } else if padded
        .iter()
        .all(|(a, _)| a.len() == 1 && a[0] == padded[0].0[0])
    {
        Sharing::SharedA
    } else {
        Sharing::Concatenated
    };

    // Exponents of each layer's A and B terms, offset included.
    let offsets = layout.offsets();
    let shifted_a: Vec<(usize, &Matrix)> = padded
        .iter()
        .zip(&offsets)
        .flat_map(|((a, _), &o)| a.iter().enumerate().map(move |(i, m)| (o + i, m)))
        .collect();
    let shifted_b: Vec<(usize, &Matrix)> = padded
        .iter()
        .zip(&offsets)
        .zip(&layout.layers)
        .flat_map(|(((_, b), &o), shape)| {
            let mx = shape.cut.mx();
            b.iter().enumerate().map(move |(j, m)| (o + j * mx, m))
        })
        .collect();

    spec.eval_points()
        .iter()
        .enumerate()
        .map(|(job, &t)| {
            let (a_tilde, b_tilde) = match sharing {
                Sharing::SharedB => (evaluate(&shifted_a, t)?, padded[0].1[0].clone()),
                Sharing::SharedA => (padded[0].0[0].clone(), evaluate(&shifted_b, t)?),
                Sharing::Concatenated => {
                    let mut a_cat: Option<Matrix> = None;
                    let mut b_cat: Option<Matrix> = None;
                    for (((a, b), &o), shape) in padded.iter().zip(&offsets).zip(&layout.layers) {
                        let at: Vec<_> = a.iter().enumerate().map(|(i, m)| (o + i, m)).collect();
                        let bt: Vec<_> = b
                            .iter()
                            .enumerate()
                            .map(|(j, m)| (j * shape.cut.mx(), m))
                            .collect();
                        let (ea, eb) = (evaluate(&at, t)?, evaluate(&bt, t)?);
                        a_cat = Some(match a_cat {
                            None => ea,
                            Some(acc) => acc.hconcat(&ea)?,
                        });
                        b_cat = Some(match b_cat {
                            None => eb,
                            Some(acc) => acc.vconcat(&eb)?,
                        });
                    }
                    (a_cat.expect("non-empty"), b_cat.expect("non-empty"))
                }
            };
            Ok(EncodedJob {
                worker_id: spec.worker_of_job(job),
                eval_point: t,
                a_tilde,
                b_tilde,
            })
        })
        .collect()
}
