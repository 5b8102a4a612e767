use super::{atomic_write, features, graph_cache, interactions};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::GraphBundle;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// Summary written alongside the caches so later commands can sanity-check
/// the directory without re-deriving anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareMeta {
    pub n_users: usize,
    pub n_items: usize,
    pub d_visual: usize,
    pub d_textual: usize,
    pub top_n: usize,
    pub lambda: f32,
    pub seed: u64,
}

/// Everything a prepared directory holds, loaded back into memory.
pub struct PreparedData {
    pub dataset: Dataset,
    pub graphs: GraphBundle<f32>,
    pub user_tokens: Vec<String>,
    pub item_tokens: Vec<String>,
    pub meta: PrepareMeta,
}

pub fn write_prepared(
    dir: &Path,
    dataset: &Dataset,
    graphs: &GraphBundle<f32>,
    user_tokens: &[String],
    item_tokens: &[String],
    meta: &PrepareMeta,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    interactions::save_vocab(&dir.join("users.txt"), user_tokens)?;
    interactions::save_vocab(&dir.join("items.txt"), item_tokens)?;
    interactions::save_pairs(&dir.join("train.txt"), &dataset.train)?;
    interactions::save_pairs(&dir.join("val.txt"), &dataset.val)?;
    interactions::save_pairs(&dir.join("test.txt"), &dataset.test)?;
    features::save(&dir.join("visual.mmf"), &dataset.visual)?;
    features::save(&dir.join("textual.mmf"), &dataset.textual)?;
    graph_cache::save(&dir.join("g_visual.csr"), &graphs.visual)?;
    graph_cache::save(&dir.join("g_textual.csr"), &graphs.textual)?;
    graph_cache::save(&dir.join("g_fused.csr"), &graphs.fused)?;
    graph_cache::save(&dir.join("g_interaction.csr"), &graphs.interaction)?;
    let json = serde_json::to_vec_pretty(meta)
        .map_err(|e| Error::Format(format!("meta encode: {e}")))?;
    atomic_write(&dir.join("prepare.json"), &json)?;
    Ok(())
}

pub fn load_prepared(dir: &Path) -> Result<PreparedData> {
    let meta: PrepareMeta = serde_json::from_slice(&fs::read(dir.join("prepare.json"))?)
        .map_err(|e| Error::Format(format!("prepare.json: {e}")))?;
    let user_tokens = interactions::load_vocab(&dir.join("users.txt"))?;
    let item_tokens = interactions::load_vocab(&dir.join("items.txt"))?;
    let dataset = Dataset {
        n_users: meta.n_users,
        n_items: meta.n_items,
        train: interactions::load_pairs(&dir.join("train.txt"))?,
        val: interactions::load_pairs(&dir.join("val.txt"))?,
        test: interactions::load_pairs(&dir.join("test.txt"))?,
        visual: features::load(&dir.join("visual.mmf"))?,
        textual: features::load(&dir.join("textual.mmf"))?,
    };
    let graphs = GraphBundle {
        visual: graph_cache::load(&dir.join("g_visual.csr"))?,
        textual: graph_cache::load(&dir.join("g_textual.csr"))?,
        fused: graph_cache::load(&dir.join("g_fused.csr"))?,
        interaction: graph_cache::load(&dir.join("g_interaction.csr"))?,
    };
    check_consistency(&meta, &dataset, &graphs, &user_tokens, &item_tokens)?;
    Ok(PreparedData {
        dataset,
        graphs,
        user_tokens,
        item_tokens,
        meta,
    })
}

fn check_consistency(
    meta: &PrepareMeta,
    dataset: &Dataset,
    graphs: &GraphBundle<f32>,
    user_tokens: &[String],
    item_tokens: &[String],
) -> Result<()> {
    let checks = [
        (user_tokens.len() == meta.n_users, "user vocab size"),
        (item_tokens.len() == meta.n_items, "item vocab size"),
        (dataset.visual.n_rows() == meta.n_items, "visual rows"),
        (dataset.textual.n_rows() == meta.n_items, "textual rows"),
        (dataset.visual.n_cols() == meta.d_visual, "visual dim"),
        (dataset.textual.n_cols() == meta.d_textual, "textual dim"),
        (graphs.visual.n_rows() == meta.n_items, "visual graph size"),
        (graphs.textual.n_rows() == meta.n_items, "textual graph size"),
        (graphs.fused.n_rows() == meta.n_items, "fused graph size"),
        (
            graphs.interaction.n_rows() == meta.n_users + meta.n_items,
            "interaction graph size",
        ),
    ];
    for (ok, what) in checks {
        if !ok {
            return Err(Error::Format(format!(
                "prepared directory inconsistent: {what} does not match prepare.json"
            )));
        }
    }
    Ok(())
}
