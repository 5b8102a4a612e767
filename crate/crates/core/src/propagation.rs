use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::GraphBundle;
use crate::hyperparams::{CfModel, Hyperparams};
use crate::params::{Gradients, ModelParams};
use crate::scalar::Scalar;
use crate::sparse::SparseAdjacency;

/// Mean over propagation layers 0..=n_layers: the input itself plus each
/// successive smoothing by the (frozen, normalized) adjacency.
pub fn propagate<S: Scalar>(
    adj: &SparseAdjacency<S>,
    x: &DenseMatrix<S>,
    n_layers: usize,
) -> Result<DenseMatrix<S>> {
    if n_layers == 0 {
        return Ok(x.clone());
    }
    let mut acc = x.to_f64_values();
    let mut h = x.clone();
    for _ in 0..n_layers {
        h = adj.spmm(&h)?;
        for (a, &v) in acc.iter_mut().zip(h.values().iter()) {
            *a += v.as_f64();
        }
    }
    let scale = 1.0 / (n_layers as f64 + 1.0);
    let mut out = DenseMatrix::zeros(x.n_rows(), x.n_cols());
    for (o, a) in out.values_mut().iter_mut().zip(acc.iter()) {
        *o = S::from_f64(a * scale);
    }
    Ok(out)
}

/// Layer-mean propagation over the bipartite graph with users stacked on
/// top of items. Returns the smoothed user and item blocks separately.
pub fn propagate_bipartite<S: Scalar>(
    interaction: &SparseAdjacency<S>,
    user_emb: &DenseMatrix<S>,
    item_emb: &DenseMatrix<S>,
    n_layers: usize,
) -> Result<(DenseMatrix<S>, DenseMatrix<S>)> {
    let n_users = user_emb.n_rows();
    let n_items = item_emb.n_rows();
    if interaction.n_rows() != n_users + n_items {
        return Err(Error::ShapeMismatch(format!(
            "interaction graph has {} nodes, embeddings give {}",
            interaction.n_rows(),
            n_users + n_items
        )));
    }
    if user_emb.n_cols() != item_emb.n_cols() {
        return Err(Error::ShapeMismatch(
            "user and item embedding widths differ".into(),
        ));
    }
    let stacked = DenseMatrix::vstack(user_emb, item_emb)?;
    let out = propagate(interaction, &stacked, n_layers)?;
    Ok(out.split_rows(n_users))
}

/// Per-channel embeddings after projection and propagation, for all users
/// and items. Field names follow the channel order: id, visual, textual,
/// blended content.
#[derive(Debug, Clone)]
pub struct PropagatedEmbeddings<S = f32> {
    pub user: DenseMatrix<S>,
    pub item_id: DenseMatrix<S>,
    pub item_visual: DenseMatrix<S>,
    pub item_textual: DenseMatrix<S>,
    pub item_fused: DenseMatrix<S>,
}

/// Intermediate values the backward pass needs again.
#[derive(Debug, Clone)]
pub struct ForwardCache<S = f32> {
    /// Projected visual features before propagation.
    pub z_v: DenseMatrix<S>,
    /// Projected textual features before propagation.
    pub z_t: DenseMatrix<S>,
}

/// Run every channel forward: project raw features into the shared space,
/// smooth each over its own graph, blend the two projections and smooth the
/// blend over the fused graph, and propagate id embeddings over the
/// interaction graph (or pass them through for the plain factorization
/// backbone).
pub fn forward_all<S: Scalar>(
    params: &ModelParams<S>,
    graphs: &GraphBundle<S>,
    visual: &DenseMatrix<S>,
    textual: &DenseMatrix<S>,
    hp: &Hyperparams,
) -> Result<(PropagatedEmbeddings<S>, ForwardCache<S>)> {
    let z_v = visual.matmul(&params.proj_v)?;
    let z_t = textual.matmul(&params.proj_t)?;
    let mut z_m = DenseMatrix::zeros(z_v.n_rows(), z_v.n_cols());
    let half = S::from_f64(0.5);
    for ((m, &v), &t) in z_m
        .values_mut()
        .iter_mut()
        .zip(z_v.values().iter())
        .zip(z_t.values().iter())
    {
        *m = half * (v + t);
    }
    let item_visual = propagate(&graphs.visual, &z_v, hp.n_layers_item)?;
    let item_textual = propagate(&graphs.textual, &z_t, hp.n_layers_item)?;
    let item_fused = propagate(&graphs.fused, &z_m, hp.n_layers_item)?;
    let (user, item_id) = match hp.cf_model {
        CfModel::LightGcn => propagate_bipartite(
            &graphs.interaction,
            &params.user_emb,
            &params.item_emb,
            hp.n_layers_ui,
        )?,
        CfModel::Mf => (params.user_emb.clone(), params.item_emb.clone()),
    };
    Ok((
        PropagatedEmbeddings {
            user,
            item_id,
            item_visual,
            item_textual,
            item_fused,
        },
        ForwardCache { z_v, z_t },
    ))
}

/// Gradients with respect to the propagated embeddings, accumulated per
/// row while walking a batch.
#[derive(Debug, Clone)]
pub struct EmbeddingGrads<S = f32> {
    pub user: DenseMatrix<S>,
    pub item_id: DenseMatrix<S>,
    pub item_visual: DenseMatrix<S>,
    pub item_textual: DenseMatrix<S>,
    pub item_fused: DenseMatrix<S>,
}

impl<S: Scalar> EmbeddingGrads<S> {
    pub fn zeros(n_users: usize, n_items: usize, d: usize) -> Self {
        Self {
            user: DenseMatrix::zeros(n_users, d),
            item_id: DenseMatrix::zeros(n_items, d),
            item_visual: DenseMatrix::zeros(n_items, d),
            item_textual: DenseMatrix::zeros(n_items, d),
            item_fused: DenseMatrix::zeros(n_items, d),
        }
    }
}

/// Pull gradients at the propagated embeddings back to the parameters.
/// Propagation through a frozen symmetric-normalized graph is linear, so
/// its adjoint is the same layer-mean propagation with the transposed
/// adjacency; projections pull back through the feature matrices.
pub fn backward_all<S: Scalar>(
    grads_out: &EmbeddingGrads<S>,
    params: &ModelParams<S>,
    graphs: &GraphBundle<S>,
    visual: &DenseMatrix<S>,
    textual: &DenseMatrix<S>,
    hp: &Hyperparams,
) -> Result<Gradients<S>> {
    let mut out = Gradients::zeros_like(params);

    // id channel
    match hp.cf_model {
        CfModel::LightGcn => {
            let adj_t = graphs.interaction.transpose();
            let (du, di) = propagate_bipartite(
                &adj_t,
                &grads_out.user,
                &grads_out.item_id,
                hp.n_layers_ui,
            )?;
            out.user_emb = du;
            out.item_emb = di;
        }
        CfModel::Mf => {
            out.user_emb = grads_out.user.clone();
            out.item_emb = grads_out.item_id.clone();
        }
    }

    // content channels: adjoint of propagate, then split the blended
    // channel evenly between the two projections it was built from
    let d_zv_own = propagate(&graphs.visual.transpose(), &grads_out.item_visual, hp.n_layers_item)?;
    let d_zt_own = propagate(
        &graphs.textual.transpose(),
        &grads_out.item_textual,
        hp.n_layers_item,
    )?;
    let d_zm = propagate(&graphs.fused.transpose(), &grads_out.item_fused, hp.n_layers_item)?;
    let half = S::from_f64(0.5);
    let mut d_zv = d_zv_own;
    let mut d_zt = d_zt_own;
    for ((v, t), &m) in d_zv
        .values_mut()
        .iter_mut()
        .zip(d_zt.values_mut().iter_mut())
        .zip(d_zm.values().iter())
    {
        *v = *v + half * m;
        *t = *t + half * m;
    }
    out.proj_v = visual.transpose_matmul(&d_zv)?;
    out.proj_t = textual.transpose_matmul(&d_zt)?;
    Ok(out)
}
