use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::SparseAdjacency;
use rayon::prelude::*;

/// Cosine similarity accumulated in f64; zero-norm vectors compare as 0.
pub fn cosine_similarity<S: Scalar>(a: &[S], b: &[S]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "cosine of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(cosine_unchecked(a, b))
}

/// Same as [`cosine_similarity`] for slices already known to match in
/// length, such as rows of one matrix.
pub(crate) fn cosine_unchecked<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let (x, y) = (x.as_f64(), y.as_f64());
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// Nearest-neighbor item graph: for every item keep the `top_n` most cosine-
/// similar other items (ties broken toward the smaller index), then clamp
/// negative similarities to zero. Row i holds the neighbors of item i.
pub fn build_knn_graph(features: &DenseMatrix<f32>, top_n: usize) -> Result<SparseAdjacency<f32>> {
    let n = features.n_rows();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 items to build a neighbor graph, got {}",
            n
        )));
    }
    if top_n == 0 {
        return Err(Error::InvalidInput("top_n must be at least 1".into()));
    }
    if let Some((r, c)) = features.find_non_finite() {
        return Err(Error::NonFiniteFeature { row: r, col: c });
    }
    let rows: Vec<Vec<(u32, f32)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let fi = features.row(i);
            let mut sims: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, cosine_unchecked(fi, features.row(j))))
                .collect();
            sims.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            sims.truncate(top_n);
            sims.sort_by_key(|&(j, _)| j);
            sims.into_iter()
                .map(|(j, s)| (j as u32, s.max(0.0) as f32))
                .collect()
        })
        .collect();
    SparseAdjacency::from_rows(n, &rows)
}

fn merge_rows<S: Scalar>(
    a: (&[u32], &[S]),
    b: (&[u32], &[S]),
    combine: impl Fn(Option<S>, Option<S>) -> S,
) -> Vec<(u32, S)> {
    let (ac, aw) = a;
    let (bc, bw) = b;
    let mut out = Vec::with_capacity(ac.len() + bc.len());
    let (mut i, mut j) = (0, 0);
    while i < ac.len() || j < bc.len() {
        let next = match (ac.get(i), bc.get(j)) {
            (Some(&ca), Some(&cb)) if ca == cb => {
                let e = (ca, combine(Some(aw[i]), Some(bw[j])));
                i += 1;
                j += 1;
                e
            }
            (Some(&ca), Some(&cb)) if ca < cb => {
                let e = (ca, combine(Some(aw[i]), None));
                i += 1;
                e
            }
            (Some(_), Some(&cb)) => {
                let e = (cb, combine(None, Some(bw[j])));
                j += 1;
                e
            }
            (Some(&ca), None) => {
                let e = (ca, combine(Some(aw[i]), None));
                i += 1;
                e
            }
            (None, Some(&cb)) => {
                let e = (cb, combine(None, Some(bw[j])));
                j += 1;
                e
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}

/// Symmetrize by elementwise max with the transpose, then apply the usual
/// D^{-1/2} S D^{-1/2} scaling where degrees are row sums of the symmetrized
/// matrix. Zero degrees produce zero weights.
pub fn normalize_sym(adj: &SparseAdjacency<f32>) -> Result<SparseAdjacency<f32>> {
    if adj.n_rows() != adj.n_cols() {
        return Err(Error::ShapeMismatch(format!(
            "normalize_sym needs a square graph, got {}x{}",
            adj.n_rows(),
            adj.n_cols()
        )));
    }
    let t = adj.transpose();
    let n = adj.n_rows();
    let sym: Vec<Vec<(u32, f32)>> = (0..n)
        .map(|r| {
            merge_rows(adj.row(r), t.row(r), |a, b| {
                a.unwrap_or(0.0).max(b.unwrap_or(0.0))
            })
        })
        .collect();
    let deg: Vec<f64> = sym
        .iter()
        .map(|row| row.iter().map(|&(_, w)| w as f64).sum())
        .collect();
    let rows: Vec<Vec<(u32, f32)>> = sym
        .iter()
        .enumerate()
        .map(|(r, row)| {
            row.iter()
                .map(|&(c, w)| {
                    let denom = deg[r] * deg[c as usize];
                    let v = if denom > 0.0 {
                        w as f64 / denom.sqrt()
                    } else {
                        0.0
                    };
                    (c, v as f32)
                })
                .collect()
        })
        .collect();
    SparseAdjacency::from_rows(n, &rows)
}

/// Convex blend of two graphs over the union of their sparsity patterns.
/// The endpoints return an exact copy of the corresponding input.
pub fn fuse_graphs(
    g_visual: &SparseAdjacency<f32>,
    g_textual: &SparseAdjacency<f32>,
    lambda: f32,
) -> Result<SparseAdjacency<f32>> {
    if g_visual.n_rows() != g_textual.n_rows() || g_visual.n_cols() != g_textual.n_cols() {
        return Err(Error::ShapeMismatch(format!(
            "graph shapes differ: {}x{} vs {}x{}",
            g_visual.n_rows(),
            g_visual.n_cols(),
            g_textual.n_rows(),
            g_textual.n_cols()
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidInput(format!(
            "lambda = {} outside [0, 1]",
            lambda
        )));
    }
    if lambda == 0.0 {
        return Ok(g_textual.clone());
    }
    if lambda == 1.0 {
        return Ok(g_visual.clone());
    }
    let n = g_visual.n_rows();
    let rows: Vec<Vec<(u32, f32)>> = (0..n)
        .map(|r| {
            merge_rows(g_visual.row(r), g_textual.row(r), |v, t| {
                lambda * v.unwrap_or(0.0) + (1.0 - lambda) * t.unwrap_or(0.0)
            })
        })
        .collect();
    SparseAdjacency::from_rows(g_visual.n_cols(), &rows)
}

/// Symmetrically normalized user-item graph over `n_users + n_items` nodes;
/// users come first, item i sits at node `n_users + i`. Duplicate pairs are
/// collapsed before degrees are counted.
pub fn build_interaction_graph(
    train: &[(u32, u32)],
    n_users: usize,
    n_items: usize,
) -> Result<SparseAdjacency<f32>> {
    if train.is_empty() {
        return Err(Error::InvalidInput(
            "cannot build an interaction graph from an empty train split".into(),
        ));
    }
    let mut item_lists: Vec<Vec<u32>> = vec![Vec::new(); n_users];
    for &(u, i) in train {
        if u as usize >= n_users || i as usize >= n_items {
            return Err(Error::InvalidInput(format!(
                "pair ({}, {}) out of range ({} users, {} items)",
                u, i, n_users, n_items
            )));
        }
        item_lists[u as usize].push(i);
    }
    let mut user_lists: Vec<Vec<u32>> = vec![Vec::new(); n_items];
    for list in item_lists.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    for (u, list) in item_lists.iter().enumerate() {
        for &i in list {
            user_lists[i as usize].push(u as u32);
        }
    }
    let n = n_users + n_items;
    let mut rows: Vec<Vec<(u32, f32)>> = Vec::with_capacity(n);
    let weight = |u: usize, i: usize| -> f32 {
        let d = (item_lists[u].len() as f64) * (user_lists[i].len() as f64);
        (1.0 / d.sqrt()) as f32
    };
    for (u, list) in item_lists.iter().enumerate() {
        rows.push(
            list.iter()
                .map(|&i| ((n_users as u32) + i, weight(u, i as usize)))
                .collect(),
        );
    }
    for (i, list) in user_lists.iter().enumerate() {
        rows.push(list.iter().map(|&u| (u, weight(u as usize, i))).collect());
    }
    SparseAdjacency::from_rows(n, &rows)
}

/// Everything the forward pass needs about graph structure, built once
/// before training and never updated by gradients.
#[derive(Debug, Clone)]
pub struct GraphBundle<S = f32> {
    /// Normalized visual neighbor graph.
    pub visual: SparseAdjacency<S>,
    /// Normalized textual neighbor graph.
    pub textual: SparseAdjacency<S>,
    /// Convex blend of the two normalized content graphs.
    pub fused: SparseAdjacency<S>,
    /// Normalized bipartite user-item graph.
    pub interaction: SparseAdjacency<S>,
}

impl GraphBundle<f32> {
    /// Build all four graphs from features and training interactions.
    pub fn build(
        visual: &DenseMatrix<f32>,
        textual: &DenseMatrix<f32>,
        train: &[(u32, u32)],
        n_users: usize,
        top_n: usize,
        lambda: f32,
    ) -> Result<Self> {
        let gv = normalize_sym(&build_knn_graph(visual, top_n)?)?;
        let gt = normalize_sym(&build_knn_graph(textual, top_n)?)?;
        let fused = fuse_graphs(&gv, &gt, lambda)?;
        let interaction = build_interaction_graph(train, n_users, visual.n_rows())?;
        Ok(Self {
            visual: gv,
            textual: gt,
            fused,
            interaction,
        })
    }

    pub fn to_f64(&self) -> GraphBundle<f64> {
        GraphBundle {
            visual: self.visual.to_f64(),
            textual: self.textual.to_f64(),
            fused: self.fused.to_f64(),
            interaction: self.interaction.to_f64(),
        }
    }
}
