use crate::dense::FeatureMatrix;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;

/// The four embedding channels a user/item pair is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modality {
    Id,
    Visual,
    Textual,
    Multimodal,
}

/// Fixed channel order used everywhere attention weights are stored.
pub const MODALITIES: [Modality; 4] = [
    Modality::Id,
    Modality::Visual,
    Modality::Textual,
    Modality::Multimodal,
];

/// Interactions with raw tokens replaced by dense indices, in first-seen
/// order, together with the vocabularies needed to map back.
#[derive(Debug, Clone)]
pub struct RemappedInteractions {
    pub pairs: Vec<(u32, u32)>,
    pub user_tokens: Vec<String>,
    pub item_tokens: Vec<String>,
}

impl RemappedInteractions {
    pub fn n_users(&self) -> usize {
        self.user_tokens.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_tokens.len()
    }
}

/// Assign each distinct user and item token a contiguous index in order of
/// first appearance. Duplicate pairs are kept.
pub fn remap_ids(raw: &[(String, String)]) -> RemappedInteractions {
    use std::collections::HashMap;
    let mut user_index: HashMap<&str, u32> = HashMap::new();
    let mut item_index: HashMap<&str, u32> = HashMap::new();
    let mut user_tokens = Vec::new();
    let mut item_tokens = Vec::new();
    let mut pairs = Vec::with_capacity(raw.len());
    for (u, i) in raw {
        let uid = *user_index.entry(u.as_str()).or_insert_with(|| {
            user_tokens.push(u.clone());
            (user_tokens.len() - 1) as u32
        });
        let iid = *item_index.entry(i.as_str()).or_insert_with(|| {
            item_tokens.push(i.clone());
            (item_tokens.len() - 1) as u32
        });
        pairs.push((uid, iid));
    }
    RemappedInteractions {
        pairs,
        user_tokens,
        item_tokens,
    }
}

/// Per-user holdout split. Users with fewer than three interactions keep
/// everything in train; otherwise 10% (at least one) goes to test, another
/// 10% (at least one) to validation, and the rest to train. Each user's
/// interactions are shuffled before slicing; users are processed in index
/// order so the split depends only on the RNG seed.
pub fn split_dataset<R: Rng>(
    pairs: &[(u32, u32)],
    n_users: usize,
    rng: &mut R,
) -> (Vec<(u32, u32)>, Vec<(u32, u32)>, Vec<(u32, u32)>) {
    let mut by_user: Vec<Vec<u32>> = vec![Vec::new(); n_users];
    for &(u, i) in pairs {
        by_user[u as usize].push(i);
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for (u, items) in by_user.iter_mut().enumerate() {
        let u = u as u32;
        let n = items.len();
        if n < 3 {
            train.extend(items.iter().map(|&i| (u, i)));
            continue;
        }
        items.shuffle(rng);
        let n_test = ((n as f64 * 0.1).floor() as usize).max(1);
        let n_val = n_test;
        let n_train = n - n_val - n_test;
        train.extend(items[..n_train].iter().map(|&i| (u, i)));
        val.extend(items[n_train..n_train + n_val].iter().map(|&i| (u, i)));
        test.extend(items[n_train + n_val..].iter().map(|&i| (u, i)));
    }
    (train, val, test)
}

/// A complete training corpus: split interactions plus per-item feature
/// matrices for both content channels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub n_users: usize,
    pub n_items: usize,
    pub train: Vec<(u32, u32)>,
    pub val: Vec<(u32, u32)>,
    pub test: Vec<(u32, u32)>,
    pub visual: FeatureMatrix,
    pub textual: FeatureMatrix,
}

impl Dataset {
    /// Items grouped per user for one split.
    pub fn items_by_user(pairs: &[(u32, u32)], n_users: usize) -> Vec<Vec<u32>> {
        let mut by_user = vec![Vec::new(); n_users];
        for &(u, i) in pairs {
            by_user[u as usize].push(i);
        }
        by_user
    }
}

/// Check index ranges, feature shapes and finiteness, and that every user
/// appearing in a holdout split also has training history.
pub fn validate_dataset(ds: &Dataset) -> Result<()> {
    if ds.n_users == 0 || ds.n_items == 0 {
        return Err(Error::InvalidInput(
            "dataset has no users or no items".into(),
        ));
    }
    if ds.train.is_empty() {
        return Err(Error::InvalidInput("train split is empty".into()));
    }
    for (name, m) in [("visual", &ds.visual), ("textual", &ds.textual)] {
        if m.n_rows() != ds.n_items {
            return Err(Error::ShapeMismatch(format!(
                "{} features have {} rows, expected {}",
                name,
                m.n_rows(),
                ds.n_items
            )));
        }
        if let Some((r, c)) = m.find_non_finite() {
            return Err(Error::NonFiniteFeature { row: r, col: c });
        }
    }
    let mut seen_in_train = vec![false; ds.n_users];
    for (split, pairs) in [("train", &ds.train), ("val", &ds.val), ("test", &ds.test)] {
        for &(u, i) in pairs.iter() {
            if u as usize >= ds.n_users || i as usize >= ds.n_items {
                return Err(Error::InvalidInput(format!(
                    "{} pair ({}, {}) out of range ({} users, {} items)",
                    split, u, i, ds.n_users, ds.n_items
                )));
            }
            if split == "train" {
                seen_in_train[u as usize] = true;
            }
        }
    }
    for (split, pairs) in [("val", &ds.val), ("test", &ds.test)] {
        for &(u, _) in pairs.iter() {
            if !seen_in_train[u as usize] {
                return Err(Error::ColdStartUser { user: u, split });
            }
        }
    }
    Ok(())
}
