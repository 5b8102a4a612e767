use crate::attention::{item_channels, pair_backward, pair_forward};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::GraphBundle;
use crate::hyperparams::Hyperparams;
use crate::params::{Gradients, ModelParams};
use crate::propagation::{backward_all, forward_all, EmbeddingGrads, PropagatedEmbeddings};
use crate::scalar::{dot, Scalar};
use serde::Serialize;

/// One training batch of (user, positive item, negative item) triples.
#[derive(Debug, Clone)]
pub struct TripletBatch {
    pub triples: Vec<(u32, u32, u32)>,
}

/// The three loss terms plus their weighted sum. With production weights
/// the sum satisfies `total = bpr + alpha * mmbpr + beta * contrastive`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub bpr: f64,
    pub mmbpr: f64,
    pub contrastive: f64,
}

/// Extra multipliers on the three terms, used to isolate one term at a
/// time when checking gradients. Production training uses all ones.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights {
    pub bpr: f64,
    pub mmbpr: f64,
    pub contrastive: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            bpr: 1.0,
            mmbpr: 1.0,
            contrastive: 1.0,
        }
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Pairwise ranking loss: mean softplus of the negated score margin.
/// When `grad` is given, `coef` times the margin gradient is accumulated.
fn bpr_term<S: Scalar>(
    emb: &PropagatedEmbeddings<S>,
    triples: &[(u32, u32, u32)],
    hp: &Hyperparams,
    mut grad: Option<(&mut EmbeddingGrads<S>, f64)>,
) -> Result<f64> {
    let b = triples.len() as f64;
    let mut loss = 0.0;
    for &(u, p, n) in triples {
        let user = emb.user.row(u as usize);
        let pos = item_channels(emb, p as usize);
        let neg = item_channels(emb, n as usize);
        let (sp, cache_p) = pair_forward(user, &pos, hp)?;
        let (sn, cache_n) = pair_forward(user, &neg, hp)?;
        let margin = sp - sn;
        loss += softplus(-margin);
        if let Some((eg, coef)) = grad.as_mut() {
            let d_margin = -sigmoid(-margin) / b * *coef;
            for (item, cache, sign) in [(p, &cache_p, 1.0), (n, &cache_n, -1.0)] {
                let i = item as usize;
                let d_user = eg.user.row_mut(u as usize);
                let mut d_items = [
                    eg.item_id.row_mut(i),
                    eg.item_visual.row_mut(i),
                    eg.item_textual.row_mut(i),
                    eg.item_fused.row_mut(i),
                ];
                let items = item_channels(emb, i);
                pair_backward(
                    emb.user.row(u as usize),
                    &items,
                    cache,
                    hp,
                    d_margin * sign,
                    d_user,
                    &mut d_items,
                );
            }
        }
    }
    Ok(loss / b)
}

/// Ranking loss applied to each content channel separately: the user should
/// score the positive item's visual (and textual) embedding above the
/// negative item's. Mean over triples and the two channels.
fn mm_bpr_term<S: Scalar>(
    emb: &PropagatedEmbeddings<S>,
    triples: &[(u32, u32, u32)],
    mut grad: Option<(&mut EmbeddingGrads<S>, f64)>,
) -> Result<f64> {
    let b = triples.len() as f64;
    let mut loss = 0.0;
    for &(u, p, n) in triples {
        let user = emb.user.row(u as usize);
        for ch in 0..2 {
            let chan = if ch == 0 {
                &emb.item_visual
            } else {
                &emb.item_textual
            };
            let margin = dot(user, chan.row(p as usize)) - dot(user, chan.row(n as usize));
            loss += softplus(-margin);
            if let Some((eg, coef)) = grad.as_mut() {
                let g = -sigmoid(-margin) / (2.0 * b) * *coef;
                let d_chan = if ch == 0 {
                    &mut eg.item_visual
                } else {
                    &mut eg.item_textual
                };
                for (item, sign) in [(p, g), (n, -g)] {
                    let row = d_chan.row_mut(item as usize);
                    for (o, &v) in row.iter_mut().zip(user.iter()) {
                        *o = *o + S::from_f64(sign * v.as_f64());
                    }
                }
                let d_user = eg.user.row_mut(u as usize);
                let pr = chan.row(p as usize);
                let nr = chan.row(n as usize);
                for ((o, &pv), &nv) in d_user.iter_mut().zip(pr.iter()).zip(nr.iter()) {
                    *o = *o + S::from_f64(g * (pv.as_f64() - nv.as_f64()));
                }
            }
        }
    }
    Ok(loss / (2.0 * b))
}

fn cosine_with_grads(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let mut d = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        d += x * y;
        na += x * x;
        nb += y * y;
    }
    (d, na.sqrt(), nb.sqrt())
}

/// Alignment loss between the id channel and each content channel over the
/// unique items of the batch: temperature-scaled cosine similarities with
/// in-batch negatives, symmetrized over both matching directions. A batch
/// with a single unique item has nothing to contrast and scores exactly 0.
fn contrastive_term<S: Scalar>(
    emb: &PropagatedEmbeddings<S>,
    items: &[u32],
    tau: f64,
    mut grad: Option<(&mut EmbeddingGrads<S>, f64)>,
) -> Result<f64> {
    let b = items.len();
    if b == 0 {
        return Err(Error::InvalidInput(
            "contrastive loss needs at least one item".into(),
        ));
    }
    if b == 1 {
        return Ok(0.0);
    }
    let anchors: Vec<Vec<f64>> = items
        .iter()
        .map(|&i| emb.item_id.row(i as usize).iter().map(|v| v.as_f64()).collect())
        .collect();
    let norm = 1.0 / (4.0 * b as f64);
    let mut loss = 0.0;
    for ch in 0..2 {
        let chan = if ch == 0 {
            &emb.item_visual
        } else {
            &emb.item_textual
        };
        let contents: Vec<Vec<f64>> = items
            .iter()
            .map(|&i| chan.row(i as usize).iter().map(|v| v.as_f64()).collect())
            .collect();
        // m[k][l] = cos(anchor_k, content_l) / tau
        let mut m = vec![vec![0.0f64; b]; b];
        let mut norms_a = vec![0.0f64; b];
        let mut norms_c = vec![0.0f64; b];
        for k in 0..b {
            for l in 0..b {
                let (d, na, nc) = cosine_with_grads(&anchors[k], &contents[l]);
                norms_a[k] = na;
                norms_c[l] = nc;
                m[k][l] = if na == 0.0 || nc == 0.0 {
                    0.0
                } else {
                    d / (na * nc) / tau
                };
            }
        }
        let row_lse: Vec<f64> = m.iter().map(|row| log_sum_exp(row)).collect();
        let col_lse: Vec<f64> = (0..b)
            .map(|l| {
                let col: Vec<f64> = (0..b).map(|k| m[k][l]).collect();
                log_sum_exp(&col)
            })
            .collect();
        for k in 0..b {
            loss += (row_lse[k] - m[k][k]) + (col_lse[k] - m[k][k]);
        }
        if let Some((eg, coef)) = grad.as_mut() {
            let d_chan = if ch == 0 {
                &mut eg.item_visual
            } else {
                &mut eg.item_textual
            };
            for k in 0..b {
                for l in 0..b {
                    let p_row = (m[k][l] - row_lse[k]).exp();
                    let p_col = (m[k][l] - col_lse[l]).exp();
                    let mut dm = p_row + p_col;
                    if k == l {
                        dm -= 2.0;
                    }
                    dm *= norm * *coef;
                    if dm == 0.0 || norms_a[k] == 0.0 || norms_c[l] == 0.0 {
                        continue;
                    }
                    let cos = m[k][l] * tau;
                    let g = dm / tau;
                    let a = &anchors[k];
                    let c = &contents[l];
                    // d cos / d a = (c / |c| - cos * a / |a|) / |a|
                    let anchor_row = eg.item_id.row_mut(items[k] as usize);
                    for (o, (&av, &cv)) in anchor_row.iter_mut().zip(a.iter().zip(c.iter())) {
                        let da = (cv / norms_c[l] - cos * av / norms_a[k]) / norms_a[k];
                        *o = *o + S::from_f64(g * da);
                    }
                    let content_row = d_chan.row_mut(items[l] as usize);
                    for (o, (&av, &cv)) in content_row.iter_mut().zip(a.iter().zip(c.iter())) {
                        let dc = (av / norms_a[k] - cos * cv / norms_c[l]) / norms_c[l];
                        *o = *o + S::from_f64(g * dc);
                    }
                }
            }
        }
    }
    Ok(loss * norm)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Unique sorted positive items of a batch.
pub fn unique_positives(triples: &[(u32, u32, u32)]) -> Vec<u32> {
    let mut items: Vec<u32> = triples.iter().map(|&(_, p, _)| p).collect();
    items.sort_unstable();
    items.dedup();
    items
}

/// Forward-only ranking loss.
pub fn bpr_loss<S: Scalar>(
    emb: &PropagatedEmbeddings<S>,
    batch: &TripletBatch,
    hp: &Hyperparams,
) -> Result<f64> {
    check_batch(batch)?;
    bpr_term(emb, &batch.triples, hp, None)
}

/// Forward-only per-channel ranking loss.
pub fn mm_bpr_loss<S: Scalar>(
    emb: &PropagatedEmbeddings<S>,
    batch: &TripletBatch,
) -> Result<f64> {
    check_batch(batch)?;
    mm_bpr_term(emb, &batch.triples, None)
}

/// Forward-only alignment loss over the batch's unique positive items.
pub fn contrastive_loss<S: Scalar>(
    emb: &PropagatedEmbeddings<S>,
    batch: &TripletBatch,
    tau: f64,
) -> Result<f64> {
    check_batch(batch)?;
    contrastive_term(emb, &unique_positives(&batch.triples), tau, None)
}

fn check_batch(batch: &TripletBatch) -> Result<()> {
    if batch.triples.is_empty() {
        return Err(Error::InvalidInput("empty training batch".into()));
    }
    Ok(())
}

/// Full training step math: run every channel forward, evaluate the three
/// loss terms, and push their gradients back to the parameters.
pub fn forward_backward<S: Scalar>(
    params: &ModelParams<S>,
    graphs: &GraphBundle<S>,
    visual: &DenseMatrix<S>,
    textual: &DenseMatrix<S>,
    batch: &TripletBatch,
    hp: &Hyperparams,
) -> Result<(LossBreakdown, Gradients<S>)> {
    forward_backward_with_weights(params, graphs, visual, textual, batch, hp, &LossWeights::default())
}

/// Same as [`forward_backward`] with extra per-term multipliers.
pub fn forward_backward_with_weights<S: Scalar>(
    params: &ModelParams<S>,
    graphs: &GraphBundle<S>,
    visual: &DenseMatrix<S>,
    textual: &DenseMatrix<S>,
    batch: &TripletBatch,
    hp: &Hyperparams,
    w: &LossWeights,
) -> Result<(LossBreakdown, Gradients<S>)> {
    check_batch(batch)?;
    let (emb, _) = forward_all(params, graphs, visual, textual, hp)?;
    let mut eg = EmbeddingGrads::zeros(params.n_users(), params.n_items(), params.dim());
    let breakdown = accumulate_losses(&emb, batch, hp, w, Some(&mut eg))?;
    let grads = backward_all(&eg, params, graphs, visual, textual, hp)?;
    grads.check_finite()?;
    Ok((breakdown, grads))
}

/// Forward-only version of [`forward_backward`]; used by gradient checks.
pub fn compute_loss<S: Scalar>(
    params: &ModelParams<S>,
    graphs: &GraphBundle<S>,
    visual: &DenseMatrix<S>,
    textual: &DenseMatrix<S>,
    batch: &TripletBatch,
    hp: &Hyperparams,
    w: &LossWeights,
) -> Result<LossBreakdown> {
    check_batch(batch)?;
    let (emb, _) = forward_all(params, graphs, visual, textual, hp)?;
    accumulate_losses(&emb, batch, hp, w, None)
}

fn accumulate_losses<S: Scalar>(
    emb: &PropagatedEmbeddings<S>,
    batch: &TripletBatch,
    hp: &Hyperparams,
    w: &LossWeights,
    mut eg: Option<&mut EmbeddingGrads<S>>,
) -> Result<LossBreakdown> {
    let alpha = hp.alpha as f64;
    let beta = hp.beta as f64;
    let bpr = bpr_term(
        emb,
        &batch.triples,
        hp,
        eg.as_deref_mut().map(|g| (g, w.bpr)),
    )?;
    let (mmbpr, contrastive) = if hp.use_multimodal {
        let mm = mm_bpr_term(
            emb,
            &batch.triples,
            eg.as_deref_mut().map(|g| (g, w.mmbpr * alpha)),
        )?;
        let items = unique_positives(&batch.triples);
        let c = contrastive_term(
            emb,
            &items,
            hp.tau as f64,
            eg.as_deref_mut().map(|g| (g, w.contrastive * beta)),
        )?;
        (mm, c)
    } else {
        (0.0, 0.0)
    };
    let total = w.bpr * bpr + w.mmbpr * alpha * mmbpr + w.contrastive * beta * contrastive;
    Ok(LossBreakdown {
        total,
        bpr,
        mmbpr,
        contrastive,
    })
}
