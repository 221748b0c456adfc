//! Local training objectives.
//!
//! The FedGPS objective on a (local batch, surrogate batch) pair is
//!
//! ```text
//! CE(local) + w_s · CE(surrogate)
//!   + λ1 · mean_{c ∈ local ∩ surr} ‖m_c - s_c‖²
//!   + λ2 · mean_{c ∈ surr}          ‖s_c - G_c‖²
//!   + (weight_decay / 2) · ‖θ‖²
//! ```
//!
//! where `m_c`, `s_c` are per-class mean embeddings of the local and
//! surrogate batch and `G_c` are the downloaded global prototypes (treated
//! as constants).

use super::hyper::FedGpsHyper;
use super::prototypes::class_means;
use crate::error::{Error, Result};
use crate::nn::{softmax_cross_entropy, Matrix, MlpModel, ParamVector};

/// Individual terms of the FedGPS objective.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub ce_local: f64,
    pub ce_surrogate: f64,
    pub align_local: f64,
    pub align_global: f64,
    pub decay: f64,
}

impl LossBreakdown {
    /// The weighted summands of `total`.
    pub fn terms(&self, surrogate_ce_weight: f64) -> Vec<f64> {
        vec![
            self.ce_local,
            surrogate_ce_weight * self.ce_surrogate,
            self.align_local,
            self.align_global,
            self.decay,
        ]
    }
}

fn add_decay(model: &MlpModel, weight_decay: f64, grad: &mut ParamVector) -> f64 {
    if weight_decay == 0.0 {
        return 0.0;
    }
    let theta = model.flatten();
    grad.axpy(weight_decay, &theta);
    0.5 * weight_decay * theta.norm_sq()
}

/// Mean cross-entropy plus `(weight_decay / 2) · ‖θ‖²`.
pub fn ce_loss_and_grad(
    model: &MlpModel,
    x: &Matrix,
    y: &[usize],
    weight_decay: f64,
) -> Result<(f64, ParamVector)> {
    let trace = model.forward(x)?;
    let (ce, d_logits) = softmax_cross_entropy(&trace.logits, y)?;
    let mut grad = model.backward(&trace, &d_logits, None)?;
    let decay = add_decay(model, weight_decay, &mut grad);
    Ok((ce + decay, grad))
}

/// Class means of one block of rows in the stacked batch.
struct MeanMatch<'a> {
    means: &'a Matrix,
    counts: &'a [usize],
    rows: std::ops::Range<usize>,
    labels: &'a [usize],
}

/// Returns `weight · mean_{c ∈ classes} ‖a_c - target_c‖²` and accumulates
/// its embedding gradient. `b`, when given, is the block that produced
/// `target` and receives the opposite gradient.
fn class_match(
    a: MeanMatch<'_>,
    b: Option<MeanMatch<'_>>,
    target: &Matrix,
    classes: &[usize],
    weight: f64,
    d_emb: &mut Matrix,
) -> f64 {
    if classes.is_empty() || weight == 0.0 {
        return 0.0;
    }
    let scale = weight / classes.len() as f64;
    let d = target.cols();
    let mut diffs = Matrix::zeros(target.rows(), d);
    let mut value = 0.0;
    for &c in classes {
        for j in 0..d {
            let diff = a.means.get(c, j) - target.get(c, j);
            diffs.set(c, j, diff);
            value += diff * diff;
        }
    }
    for (row, &y) in a.rows.clone().zip(a.labels) {
        if !classes.contains(&y) {
            continue;
        }
        let coef = 2.0 * scale / a.counts[y] as f64;
        for (g, df) in d_emb.row_mut(row).iter_mut().zip(diffs.row(y)) {
            *g += coef * df;
        }
    }
    if let Some(b) = b {
        for (row, &y) in b.rows.clone().zip(b.labels) {
            if !classes.contains(&y) {
                continue;
            }
            let coef = 2.0 * scale / b.counts[y] as f64;
            for (g, df) in d_emb.row_mut(row).iter_mut().zip(diffs.row(y)) {
                *g -= coef * df;
            }
        }
    }
    scale * value
}

/// Loss and gradient of the FedGPS local objective.
///
/// Without a surrogate batch this is exactly [`ce_loss_and_grad`]. A missing
/// `global_prototypes` drops the λ2 term.
pub fn fedgps_loss_and_grad(
    model: &MlpModel,
    local: (&Matrix, &[usize]),
    surrogate: Option<(&Matrix, &[usize])>,
    global_prototypes: Option<&Matrix>,
    hyper: &FedGpsHyper,
    weight_decay: f64,
) -> Result<(LossBreakdown, ParamVector)> {
    let (x, y) = local;
    if x.rows() == 0 {
        return Err(Error::InvalidArgument("empty local batch".into()));
    }
    let Some((xs, ys)) = surrogate else {
        let trace = model.forward(x)?;
        let (ce, d_logits) = softmax_cross_entropy(&trace.logits, y)?;
        let mut grad = model.backward(&trace, &d_logits, None)?;
        let decay = add_decay(model, weight_decay, &mut grad);
        let out = LossBreakdown {
            total: ce + decay,
            ce_local: ce,
            decay,
            ..LossBreakdown::default()
        };
        return Ok((out, grad));
    };
    if xs.rows() == 0 {
        return Err(Error::InvalidArgument("empty surrogate batch".into()));
    }
    let c = model.num_classes();
    if let Some(g) = global_prototypes {
        if g.rows() != c || g.cols() != model.embed_dim() {
            return Err(Error::dims(
                "global prototypes",
                c * model.embed_dim(),
                g.rows() * g.cols(),
            ));
        }
    }

    let n = x.rows();
    let m = xs.rows();
    let trace = model.forward(&x.vstack(xs)?)?;
    let (ce_local, g_local) = softmax_cross_entropy(&trace.logits.slice_rows(0, n), y)?;
    let (ce_surr, g_surr) = softmax_cross_entropy(&trace.logits.slice_rows(n, n + m), ys)?;
    let mut d_logits = Matrix::zeros(n + m, c);
    d_logits.as_mut_slice()[..g_local.as_slice().len()].copy_from_slice(g_local.as_slice());
    let w_s = hyper.surrogate_ce_weight;
    for (dst, src) in d_logits.as_mut_slice()[g_local.as_slice().len()..]
        .iter_mut()
        .zip(g_surr.as_slice())
    {
        *dst = w_s * src;
    }

    let emb = trace.embeddings();
    let (local_means, local_counts) = class_means(&emb.slice_rows(0, n), y, c);
    let (surr_means, surr_counts) = class_means(&emb.slice_rows(n, n + m), ys, c);
    let mut d_emb = Matrix::zeros(n + m, emb.cols());

    let stage1_classes: Vec<usize> = (0..c)
        .filter(|&k| local_counts[k] > 0 && surr_counts[k] > 0)
        .collect();
    let align_local = class_match(
        MeanMatch {
            means: &local_means,
            counts: &local_counts,
            rows: 0..n,
            labels: y,
        },
        Some(MeanMatch {
            means: &surr_means,
            counts: &surr_counts,
            rows: n..n + m,
            labels: ys,
        }),
        &surr_means,
        &stage1_classes,
        hyper.lambda1,
        &mut d_emb,
    );

    let align_global = match global_prototypes {
        Some(g) => {
            let stage2_classes: Vec<usize> = (0..c).filter(|&k| surr_counts[k] > 0).collect();
            class_match(
                MeanMatch {
                    means: &surr_means,
                    counts: &surr_counts,
                    rows: n..n + m,
                    labels: ys,
                },
                None,
                g,
                &stage2_classes,
                hyper.lambda2,
                &mut d_emb,
            )
        }
        None => 0.0,
    };

    let mut grad = model.backward(&trace, &d_logits, Some(&d_emb))?;
    let decay = add_decay(model, weight_decay, &mut grad);
    let out = LossBreakdown {
        total: ce_local + w_s * ce_surr + align_local + align_global + decay,
        ce_local,
        ce_surrogate: ce_surr,
        align_local,
        align_global,
        decay,
    };
    Ok((out, grad))
}
