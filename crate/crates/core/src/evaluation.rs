use crate::attention::{score_items_for_user, top_k};
use crate::error::Result;
use crate::hyperparams::Hyperparams;
use crate::propagation::PropagatedEmbeddings;
use crate::scalar::Scalar;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashSet;

/// Fraction of the user's relevant items that made it into the first `k`
/// ranks. `None` when the user has no relevant items to find.
pub fn recall_at_k(ranked: &[u32], relevant: &HashSet<u32>, k: usize) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let hits = ranked
        .iter()
        .take(k)
        .filter(|i| relevant.contains(i))
        .count();
    Some(hits as f64 / relevant.len() as f64)
}

/// Rank-discounted hit quality: each hit at 1-based position p contributes
/// 1/log2(p+1), normalized by the best achievable arrangement. `None` when
/// the user has no relevant items.
pub fn ndcg_at_k(ranked: &[u32], relevant: &HashSet<u32>, k: usize) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let mut dcg = 0.0;
    for (pos, item) in ranked.iter().take(k).enumerate() {
        if relevant.contains(item) {
            dcg += 1.0 / ((pos + 2) as f64).log2();
        }
    }
    let ideal_hits = relevant.len().min(k);
    let idcg: f64 = (0..ideal_hits).map(|p| 1.0 / ((p + 2) as f64).log2()).sum();
    Some(dcg / idcg)
}

/// Which holdout split to score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(crate::error::Error::InvalidInput(format!(
                "unknown split '{}' (expected val or test)",
                other
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalReport {
    pub k: usize,
    pub recall: f64,
    pub ndcg: f64,
    /// Users that had at least one relevant item in the holdout split.
    pub n_users_evaluated: usize,
}

/// Rank all items for every user with holdout interactions, excluding each
/// user's training items from the candidate pool, and average both metrics
/// over the evaluated users. Users are processed independently and reduced
/// in index order, so the result does not depend on thread count.
pub fn evaluate<S: Scalar>(
    emb: &PropagatedEmbeddings<S>,
    train: &[(u32, u32)],
    holdout: &[(u32, u32)],
    hp: &Hyperparams,
) -> Result<EvalReport> {
    let n_users = emb.user.n_rows();
    let n_items = emb.item_id.n_rows();
    let mut train_items: Vec<Vec<u32>> = vec![Vec::new(); n_users];
    for &(u, i) in train {
        train_items[u as usize].push(i);
    }
    let mut relevant: Vec<HashSet<u32>> = vec![HashSet::new(); n_users];
    for &(u, i) in holdout {
        relevant[u as usize].insert(i);
    }
    let k = hp.k_eval;
    let per_user: Vec<Result<Option<(f64, f64)>>> = (0..n_users)
        .into_par_iter()
        .map(|u| {
            if relevant[u].is_empty() {
                return Ok(None);
            }
            let scores = score_items_for_user(emb.user.row(u), emb, hp)?;
            let mut excluded = vec![false; n_items];
            for &i in &train_items[u] {
                excluded[i as usize] = true;
            }
            let ranked = top_k(&scores, k, &excluded);
            let r = recall_at_k(&ranked, &relevant[u], k);
            let n = ndcg_at_k(&ranked, &relevant[u], k);
            Ok(r.zip(n))
        })
        .collect();
    let mut recall_sum = 0.0;
    let mut ndcg_sum = 0.0;
    let mut count = 0usize;
    for res in per_user {
        if let Some((r, n)) = res? {
            recall_sum += r;
            ndcg_sum += n;
            count += 1;
        }
    }
    let denom = count.max(1) as f64;
    Ok(EvalReport {
        k,
        recall: recall_sum / denom,
        ndcg: ndcg_sum / denom,
        n_users_evaluated: count,
    })
}

/// Run the forward pass with the given parameters and score one holdout
/// split of the dataset.
pub fn evaluate_model(
    params: &crate::params::ModelParams<f32>,
    graphs: &crate::graph::GraphBundle<f32>,
    ds: &crate::dataset::Dataset,
    split: Split,
    hp: &Hyperparams,
) -> Result<EvalReport> {
    let (emb, _) = crate::propagation::forward_all(params, graphs, &ds.visual, &ds.textual, hp)?;
    let holdout = match split {
        Split::Val => &ds.val,
        Split::Test => &ds.test,
    };
    evaluate(&emb, &ds.train, holdout, hp)
}
