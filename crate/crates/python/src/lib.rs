//! Python bindings for the recommendation engine. The module mirrors the
//! Rust pipeline: build a `Dataset` (synthetic or from files) and `train`
//! it into a `Model` that can score and explain recommendations.

use mmrec_core::dataset::validate_dataset;
use mmrec_core::evaluation::{self, Split};
use mmrec_core::io::{atomic_write, checkpoint, features};
use mmrec_core::synthetic::{generate, SyntheticConfig};
use mmrec_core::trainer::{fit, StopReason};
use mmrec_core::{
    remap_ids, split_dataset, Dataset, GraphBundle, Hyperparams, ModelParams,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::path::Path;

fn to_py(e: mmrec_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Training and model hyperparameters. Unset keywords keep the Rust
/// defaults; `lambda` is spelled `lambda_` because of the Python keyword.
#[pyclass(name = "Hyperparams", skip_from_py_object)]
#[derive(Clone)]
struct PyHyperparams {
    inner: Hyperparams,
}

#[pymethods]
impl PyHyperparams {
    #[new]
    #[pyo3(signature = (*, d=None, top_n=None, lambda_=None, mu=None, alpha=None,
        beta=None, tau=None, lr=None, batch_size=None, max_epochs=None,
        patience=None, k_eval=None, seed=None, n_layers_ui=None,
        n_layers_item=None, cf_model=None, use_attention=None,
        use_multimodal=None, l2_reg=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        d: Option<usize>,
        top_n: Option<usize>,
        lambda_: Option<f32>,
        mu: Option<f32>,
        alpha: Option<f32>,
        beta: Option<f32>,
        tau: Option<f32>,
        lr: Option<f32>,
        batch_size: Option<usize>,
        max_epochs: Option<usize>,
        patience: Option<usize>,
        k_eval: Option<usize>,
        seed: Option<u64>,
        n_layers_ui: Option<usize>,
        n_layers_item: Option<usize>,
        cf_model: Option<&str>,
        use_attention: Option<bool>,
        use_multimodal: Option<bool>,
        l2_reg: Option<f32>,
    ) -> PyResult<Self> {
        let mut h = Hyperparams::default();
        macro_rules! put {
            ($($field:ident $(<- $arg:ident)?),*) => {
                $( put!(@one $field $(, $arg)?); )*
            };
            (@one $field:ident) => {
                if let Some(v) = $field { h.$field = v; }
            };
            (@one $field:ident, $arg:ident) => {
                if let Some(v) = $arg { h.$field = v; }
            };
        }
        put!(
            d, top_n, lambda <- lambda_, mu, alpha, beta, tau, lr, batch_size,
            max_epochs, patience, k_eval, seed, n_layers_ui, n_layers_item,
            use_attention, use_multimodal, l2_reg
        );
        if let Some(name) = cf_model {
            h.cf_model = name.parse().map_err(to_py)?;
        }
        h.validate().map_err(to_py)?;
        Ok(Self { inner: h })
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }
    #[getter]
    fn top_n(&self) -> usize {
        self.inner.top_n
    }
    #[getter]
    fn lambda_(&self) -> f32 {
        self.inner.lambda
    }
    #[getter]
    fn mu(&self) -> f32 {
        self.inner.mu
    }
    #[getter]
    fn alpha(&self) -> f32 {
        self.inner.alpha
    }
    #[getter]
    fn beta(&self) -> f32 {
        self.inner.beta
    }
    #[getter]
    fn tau(&self) -> f32 {
        self.inner.tau
    }
    #[getter]
    fn lr(&self) -> f32 {
        self.inner.lr
    }
    #[getter]
    fn batch_size(&self) -> usize {
        self.inner.batch_size
    }
    #[getter]
    fn max_epochs(&self) -> usize {
        self.inner.max_epochs
    }
    #[getter]
    fn patience(&self) -> usize {
        self.inner.patience
    }
    #[getter]
    fn k_eval(&self) -> usize {
        self.inner.k_eval
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }
    #[getter]
    fn n_layers_ui(&self) -> usize {
        self.inner.n_layers_ui
    }
    #[getter]
    fn n_layers_item(&self) -> usize {
        self.inner.n_layers_item
    }
    #[getter]
    fn cf_model(&self) -> String {
        match self.inner.cf_model {
            mmrec_core::CfModel::LightGcn => "lightgcn".into(),
            mmrec_core::CfModel::Mf => "mf".into(),
        }
    }
    #[getter]
    fn use_attention(&self) -> bool {
        self.inner.use_attention
    }
    #[getter]
    fn use_multimodal(&self) -> bool {
        self.inner.use_multimodal
    }
    #[getter]
    fn l2_reg(&self) -> f32 {
        self.inner.l2_reg
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Interactions split into train/val/test plus the two raw feature
/// matrices. Token lists are present only when loaded from files.
#[pyclass(name = "Dataset")]
struct PyDataset {
    inner: Dataset,
    user_tokens: Option<Vec<String>>,
    item_tokens: Option<Vec<String>>,
}

#[pymethods]
impl PyDataset {
    /// Block-structured toy data with planted user tastes.
    #[staticmethod]
    #[pyo3(signature = (*, n_users=None, n_items=None, n_blocks=None,
        interactions_per_user=None, within_block_prob=None, d_visual=None,
        d_textual=None, feature_noise=None, taste_sharpness=None, seed=None))]
    #[allow(clippy::too_many_arguments)]
    fn synthetic(
        n_users: Option<usize>,
        n_items: Option<usize>,
        n_blocks: Option<usize>,
        interactions_per_user: Option<usize>,
        within_block_prob: Option<f64>,
        d_visual: Option<usize>,
        d_textual: Option<usize>,
        feature_noise: Option<f32>,
        taste_sharpness: Option<f64>,
        seed: Option<u64>,
    ) -> PyResult<Self> {
        let mut cfg = SyntheticConfig::default();
        macro_rules! put {
            ($($field:ident),*) => {
                $( if let Some(v) = $field { cfg.$field = v; } )*
            };
        }
        put!(
            n_users, n_items, n_blocks, interactions_per_user,
            within_block_prob, d_visual, d_textual, feature_noise,
            taste_sharpness, seed
        );
        let inner = generate(&cfg).map_err(to_py)?;
        Ok(Self {
            inner,
            user_tokens: None,
            item_tokens: None,
        })
    }

    /// Load a whitespace-separated interactions file plus one TSV feature
    /// file per modality (row r describes the r-th distinct item), then
    /// split per user with the given seed.
    #[staticmethod]
    #[pyo3(signature = (interactions, visual, textual, *, seed=0))]
    fn from_files(interactions: &str, visual: &str, textual: &str, seed: u64) -> PyResult<Self> {
        let raw =
            mmrec_core::io::interactions::load_interactions(Path::new(interactions)).map_err(to_py)?;
        let remapped = remap_ids(&raw);
        let visual = features::load(Path::new(visual)).map_err(to_py)?;
        let textual = features::load(Path::new(textual)).map_err(to_py)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (train, val, test) = split_dataset(&remapped.pairs, remapped.n_users(), &mut rng);
        let ds = Dataset {
            n_users: remapped.n_users(),
            n_items: remapped.n_items(),
            train,
            val,
            test,
            visual,
            textual,
        };
        validate_dataset(&ds).map_err(to_py)?;
        Ok(Self {
            inner: ds,
            user_tokens: Some(remapped.user_tokens),
            item_tokens: Some(remapped.item_tokens),
        })
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.inner.n_users
    }
    #[getter]
    fn n_items(&self) -> usize {
        self.inner.n_items
    }
    #[getter]
    fn train(&self) -> Vec<(u32, u32)> {
        self.inner.train.clone()
    }
    #[getter]
    fn val(&self) -> Vec<(u32, u32)> {
        self.inner.val.clone()
    }
    #[getter]
    fn test(&self) -> Vec<(u32, u32)> {
        self.inner.test.clone()
    }
    #[getter]
    fn d_visual(&self) -> usize {
        self.inner.visual.n_cols()
    }
    #[getter]
    fn d_textual(&self) -> usize {
        self.inner.textual.n_cols()
    }
    #[getter]
    fn user_tokens(&self) -> Option<Vec<String>> {
        self.user_tokens.clone()
    }
    #[getter]
    fn item_tokens(&self) -> Option<Vec<String>> {
        self.item_tokens.clone()
    }

    fn visual_row(&self, item: usize) -> PyResult<Vec<f32>> {
        if item >= self.inner.n_items {
            return Err(PyValueError::new_err(format!("item {} out of range", item)));
        }
        Ok(self.inner.visual.row(item).to_vec())
    }

    fn textual_row(&self, item: usize) -> PyResult<Vec<f32>> {
        if item >= self.inner.n_items {
            return Err(PyValueError::new_err(format!("item {} out of range", item)));
        }
        Ok(self.inner.textual.row(item).to_vec())
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n_users={}, n_items={}, train={}, val={}, test={})",
            self.inner.n_users,
            self.inner.n_items,
            self.inner.train.len(),
            self.inner.val.len(),
            self.inner.test.len()
        )
    }
}

/// One epoch of the training log.
#[pyclass(name = "TrainEpoch", skip_from_py_object)]
#[derive(Clone)]
struct PyTrainEpoch {
    #[pyo3(get)]
    epoch: usize,
    #[pyo3(get)]
    loss_total: f64,
    #[pyo3(get)]
    loss_bpr: f64,
    #[pyo3(get)]
    loss_mmbpr: f64,
    #[pyo3(get)]
    loss_contrastive: f64,
    #[pyo3(get)]
    val_recall: f64,
    #[pyo3(get)]
    val_ndcg: f64,
}

#[pyclass(name = "TrainReport")]
struct PyTrainReport {
    #[pyo3(get)]
    epochs: Vec<PyTrainEpoch>,
    /// 1-based epoch whose parameters the model kept.
    #[pyo3(get)]
    best_epoch: usize,
    #[pyo3(get)]
    best_val_recall: f64,
    #[pyo3(get)]
    stop_reason: String,
}

/// Trained parameters bound to the graphs and data they were fit on.
#[pyclass(name = "Model")]
struct PyModel {
    params: ModelParams<f32>,
    hp: Hyperparams,
    graphs: GraphBundle<f32>,
    dataset: Dataset,
}

impl PyModel {
    fn embeddings(&self) -> PyResult<mmrec_core::propagation::PropagatedEmbeddings<f32>> {
        let (emb, _) = mmrec_core::propagation::forward_all(
            &self.params,
            &self.graphs,
            &self.dataset.visual,
            &self.dataset.textual,
            &self.hp,
        )
        .map_err(to_py)?;
        Ok(emb)
    }
}

#[pymethods]
impl PyModel {
    /// Mean Recall@k and NDCG@k over users with holdout interactions.
    #[pyo3(signature = (*, split="test", k=None))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        split: &str,
        k: Option<usize>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let split: Split = split.parse().map_err(to_py)?;
        let mut hp = self.hp.clone();
        if let Some(k) = k {
            hp.k_eval = k;
        }
        let report = evaluation::evaluate_model(&self.params, &self.graphs, &self.dataset, split, &hp)
            .map_err(to_py)?;
        let out = PyDict::new(py);
        out.set_item("k", report.k)?;
        out.set_item("recall", report.recall)?;
        out.set_item("ndcg", report.ndcg)?;
        out.set_item("n_users_evaluated", report.n_users_evaluated)?;
        Ok(out)
    }

    /// Top-k items for one user, excluding their training items, as
    /// (item, score) pairs sorted by descending score.
    #[pyo3(signature = (user, k=10))]
    fn recommend(&self, user: u32, k: usize) -> PyResult<Vec<(u32, f64)>> {
        if user as usize >= self.dataset.n_users {
            return Err(PyValueError::new_err(format!("user {} out of range", user)));
        }
        let emb = self.embeddings()?;
        let scores = mmrec_core::attention::score_items_for_user(
            emb.user.row(user as usize),
            &emb,
            &self.hp,
        )
        .map_err(to_py)?;
        let mut excluded = vec![false; self.dataset.n_items];
        for &(u, i) in &self.dataset.train {
            if u == user {
                excluded[i as usize] = true;
            }
        }
        let ranked = mmrec_core::attention::top_k(&scores, k, &excluded);
        Ok(ranked
            .into_iter()
            .map(|i| (i, scores[i as usize]))
            .collect())
    }

    /// Attention over the four channels (id, visual, textual, blended) for
    /// one user-item pair. Positive and summing to one.
    fn attention_weights(&self, user: u32, item: u32) -> PyResult<(f64, f64, f64, f64)> {
        if user as usize >= self.dataset.n_users {
            return Err(PyValueError::new_err(format!("user {} out of range", user)));
        }
        if item as usize >= self.dataset.n_items {
            return Err(PyValueError::new_err(format!("item {} out of range", item)));
        }
        let emb = self.embeddings()?;
        let i = item as usize;
        let w = mmrec_core::attention::attention_weights(
            emb.user.row(user as usize),
            &[
                emb.item_id.row(i),
                emb.item_visual.row(i),
                emb.item_textual.row(i),
                emb.item_fused.row(i),
            ],
        )
        .map_err(to_py)?;
        Ok((w[0], w[1], w[2], w[3]))
    }

    /// Write `model.mmp` and `hyperparams.json` into a directory, the same
    /// layout the command-line trainer produces.
    fn save(&self, dir: &str) -> PyResult<()> {
        let dir = Path::new(dir);
        std::fs::create_dir_all(dir)
            .map_err(|e| PyValueError::new_err(format!("create {}: {}", dir.display(), e)))?;
        checkpoint::save(&dir.join("model.mmp"), &self.params).map_err(to_py)?;
        let hp_json = serde_json::to_vec_pretty(&self.hp)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        atomic_write(&dir.join("hyperparams.json"), &hp_json).map_err(to_py)?;
        Ok(())
    }

    /// Read a saved model directory back, rebuilding the graphs from the
    /// dataset it was trained on.
    #[staticmethod]
    fn load(dataset: &PyDataset, dir: &str) -> PyResult<Self> {
        let dir = Path::new(dir);
        let params = checkpoint::load(&dir.join("model.mmp")).map_err(to_py)?;
        let text = std::fs::read_to_string(dir.join("hyperparams.json"))
            .map_err(|e| PyValueError::new_err(format!("hyperparams.json: {}", e)))?;
        let hp: Hyperparams =
            serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let ds = dataset.inner.clone();
        let graphs = GraphBundle::build(&ds.visual, &ds.textual, &ds.train, ds.n_users, hp.top_n, hp.lambda)
            .map_err(to_py)?;
        Ok(Self {
            params,
            hp,
            graphs,
            dataset: ds,
        })
    }

    #[getter]
    fn hyperparams(&self) -> PyHyperparams {
        PyHyperparams {
            inner: self.hp.clone(),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(n_users={}, n_items={}, d={})",
            self.dataset.n_users, self.dataset.n_items, self.hp.d
        )
    }
}

/// Train on a dataset and return the model with its per-epoch log. The
/// interpreter lock is released for the duration of the fit.
#[pyfunction]
#[pyo3(signature = (dataset, hp=None))]
fn train(
    py: Python<'_>,
    dataset: &PyDataset,
    hp: Option<&PyHyperparams>,
) -> PyResult<(PyModel, PyTrainReport)> {
    let hp = hp.map(|h| h.inner.clone()).unwrap_or_default();
    let ds = dataset.inner.clone();
    let (graphs, outcome) = py
        .detach(|| -> mmrec_core::Result<_> {
            let graphs =
                GraphBundle::build(&ds.visual, &ds.textual, &ds.train, ds.n_users, hp.top_n, hp.lambda)?;
            let outcome = fit(&ds, &graphs, &hp, |_| {})?;
            Ok((graphs, outcome))
        })
        .map_err(to_py)?;
    let report = PyTrainReport {
        epochs: outcome
            .report
            .epochs
            .iter()
            .map(|e| PyTrainEpoch {
                epoch: e.epoch,
                loss_total: e.loss.total,
                loss_bpr: e.loss.bpr,
                loss_mmbpr: e.loss.mmbpr,
                loss_contrastive: e.loss.contrastive,
                val_recall: e.val_recall,
                val_ndcg: e.val_ndcg,
            })
            .collect(),
        best_epoch: outcome.report.best_epoch,
        best_val_recall: outcome.report.best_val_recall,
        stop_reason: match outcome.report.stop_reason {
            StopReason::EarlyStopping => "early_stopping".into(),
            StopReason::MaxEpochs => "max_epochs".into(),
        },
    };
    let model = PyModel {
        params: outcome.params,
        hp,
        graphs,
        dataset: ds,
    };
    Ok((model, report))
}

/// Cosine similarity with f64 accumulation; zero-norm inputs give 0.
#[pyfunction]
fn cosine_similarity(a: Vec<f32>, b: Vec<f32>) -> PyResult<f64> {
    mmrec_core::graph::cosine_similarity(&a, &b).map_err(to_py)
}

/// Fraction of the relevant set found in the first k of `ranked`; None
/// when the relevant set is empty.
#[pyfunction]
fn recall_at_k(ranked: Vec<u32>, relevant: Vec<u32>, k: usize) -> Option<f64> {
    let relevant: HashSet<u32> = relevant.into_iter().collect();
    evaluation::recall_at_k(&ranked, &relevant, k)
}

/// Rank-discounted hit quality in the first k, normalized by the ideal
/// ordering; None when the relevant set is empty.
#[pyfunction]
fn ndcg_at_k(ranked: Vec<u32>, relevant: Vec<u32>, k: usize) -> Option<f64> {
    let relevant: HashSet<u32> = relevant.into_iter().collect();
    evaluation::ndcg_at_k(&ranked, &relevant, k)
}

#[pymodule]
fn mmrec(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHyperparams>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyTrainEpoch>()?;
    m.add_class::<PyTrainReport>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(recall_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(ndcg_at_k, m)?)?;
    Ok(())
}
