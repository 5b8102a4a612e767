use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Collaborative-filtering backbone used for the id channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CfModel {
    LightGcn,
    Mf,
}

impl std::str::FromStr for CfModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lightgcn" => Ok(CfModel::LightGcn),
            "mf" => Ok(CfModel::Mf),
            other => Err(Error::InvalidInput(format!(
                "unknown cf_model '{}' (expected lightgcn or mf)",
                other
            ))),
        }
    }
}

/// Every knob the pipeline reads, with defaults that work on small data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Embedding width shared by all channels.
    pub d: usize,
    /// Neighbors kept per item when building content graphs.
    pub top_n: usize,
    /// Visual share in the fused content graph.
    pub lambda: f32,
    /// Visual share in the fused content embedding.
    pub mu: f32,
    /// Weight of the modality ranking loss.
    pub alpha: f32,
    /// Weight of the contrastive loss.
    pub beta: f32,
    /// Contrastive temperature.
    pub tau: f32,
    pub lr: f32,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Consecutive non-improving validation epochs tolerated before stopping.
    pub patience: usize,
    pub k_eval: usize,
    pub seed: u64,
    /// Propagation depth on the user-item graph.
    pub n_layers_ui: usize,
    /// Propagation depth on the fused item graph.
    pub n_layers_item: usize,
    pub cf_model: CfModel,
    /// When false, scoring uses only the id channel plus the static content
    /// mix instead of per-pair attention.
    pub use_attention: bool,
    /// When false, content channels are dropped entirely and only the
    /// pairwise ranking loss is trained.
    pub use_multimodal: bool,
    /// Decoupled weight decay applied at the optimizer step.
    pub l2_reg: f32,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            d: 64,
            top_n: 10,
            lambda: 0.5,
            mu: 0.5,
            alpha: 1e-3,
            beta: 1e-3,
            tau: 0.2,
            lr: 1e-3,
            batch_size: 2048,
            max_epochs: 1000,
            patience: 20,
            k_eval: 20,
            seed: 0,
            n_layers_ui: 2,
            n_layers_item: 1,
            cf_model: CfModel::LightGcn,
            use_attention: true,
            use_multimodal: true,
            l2_reg: 0.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        fn unit(name: &str, v: f32) -> Result<()> {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{} = {} outside [0, 1]",
                    name, v
                )));
            }
            Ok(())
        }
        fn positive(name: &str, v: f32) -> Result<()> {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{} = {} must be positive and finite",
                    name, v
                )));
            }
            Ok(())
        }
        fn non_negative(name: &str, v: f32) -> Result<()> {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{} = {} must be non-negative and finite",
                    name, v
                )));
            }
            Ok(())
        }
        unit("lambda", self.lambda)?;
        unit("mu", self.mu)?;
        non_negative("alpha", self.alpha)?;
        non_negative("beta", self.beta)?;
        non_negative("l2_reg", self.l2_reg)?;
        positive("tau", self.tau)?;
        positive("lr", self.lr)?;
        for (name, v) in [
            ("d", self.d),
            ("top_n", self.top_n),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("k_eval", self.k_eval),
        ] {
            if v == 0 {
                return Err(Error::InvalidInput(format!("{} must be at least 1", name)));
            }
        }
        Ok(())
    }
}
