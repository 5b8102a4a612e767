use crate::dataset::{Dataset, validate_dataset};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_model, EvalReport, Split};
use crate::graph::GraphBundle;
use crate::hyperparams::Hyperparams;
use crate::losses::{forward_backward, LossBreakdown, TripletBatch};
use crate::params::{Gradients, ModelParams};
use crate::scalar::Scalar;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::HashSet;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Uniform init in [-b, b) with b = sqrt(6 / (rows + cols)), filled in
/// row-major order so the RNG stream position is well defined.
pub fn xavier_init<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix<f32> {
    let bound = (6.0 / (rows + cols) as f64).sqrt() as f32;
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    DenseMatrix::from_vec(rows, cols, data).unwrap()
}

/// Fresh parameters, drawn in a fixed tensor order: user embeddings, item
/// embeddings, visual projection, textual projection.
pub fn init_params<R: Rng>(
    n_users: usize,
    n_items: usize,
    d: usize,
    d_visual: usize,
    d_textual: usize,
    rng: &mut R,
) -> ModelParams<f32> {
    ModelParams {
        user_emb: xavier_init(n_users, d, rng),
        item_emb: xavier_init(n_items, d, rng),
        proj_v: xavier_init(d_visual, d, rng),
        proj_t: xavier_init(d_textual, d, rng),
    }
}

/// Adam with decoupled weight decay. Moment tensors mirror the parameter
/// shapes; all arithmetic runs in f64.
#[derive(Debug, Clone)]
pub struct AdamState<S = f32> {
    t: u64,
    m: Gradients<S>,
    v: Gradients<S>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(params: &ModelParams<S>) -> Self {
        Self {
            t: 0,
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
        }
    }

    pub fn step(
        &mut self,
        params: &mut ModelParams<S>,
        grads: &Gradients<S>,
        lr: f64,
        weight_decay: f64,
    ) {
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        let tensors = [
            (
                &mut params.user_emb,
                &grads.user_emb,
                &mut self.m.user_emb,
                &mut self.v.user_emb,
            ),
            (
                &mut params.item_emb,
                &grads.item_emb,
                &mut self.m.item_emb,
                &mut self.v.item_emb,
            ),
            (
                &mut params.proj_v,
                &grads.proj_v,
                &mut self.m.proj_v,
                &mut self.v.proj_v,
            ),
            (
                &mut params.proj_t,
                &grads.proj_t,
                &mut self.m.proj_t,
                &mut self.v.proj_t,
            ),
        ];
        for (p, g, m, v) in tensors {
            let p = p.values_mut();
            let g = g.values();
            let m = m.values_mut();
            let v = v.values_mut();
            for i in 0..p.len() {
                let gi = g[i].as_f64();
                let mi = ADAM_BETA1 * m[i].as_f64() + (1.0 - ADAM_BETA1) * gi;
                let vi = ADAM_BETA2 * v[i].as_f64() + (1.0 - ADAM_BETA2) * gi * gi;
                m[i] = S::from_f64(mi);
                v[i] = S::from_f64(vi);
                let m_hat = mi / bc1;
                let v_hat = vi / bc2;
                let pi = p[i].as_f64();
                let delta = lr * (m_hat / (v_hat.sqrt() + ADAM_EPS) + weight_decay * pi);
                p[i] = S::from_f64(pi - delta);
            }
        }
    }
}

/// Draw one negative item per user by rejection against that user's
/// positive set. Gives up after 50 * n_items failed draws for a user.
pub fn sample_negatives<R: Rng>(
    users: &[u32],
    positives: &[HashSet<u32>],
    n_items: usize,
    rng: &mut R,
) -> Result<Vec<u32>> {
    let cap = 50usize.saturating_mul(n_items);
    let mut out = Vec::with_capacity(users.len());
    for &u in users {
        let pos = &positives[u as usize];
        let mut found = None;
        for _ in 0..cap {
            let j = rng.random_range(0..n_items as u32);
            if !pos.contains(&j) {
                found = Some(j);
                break;
            }
        }
        match found {
            Some(j) => out.push(j),
            None => return Err(Error::SamplingExhausted { user: u }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStopping,
    MaxEpochs,
}

/// Validation-driven stopping: strictly higher recall resets the counter,
/// anything else burns patience. `patience` is the number of non-improving
/// epochs tolerated; one more stops the run.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    best: f64,
    bad_epochs: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::NEG_INFINITY,
            bad_epochs: 0,
        }
    }

    /// Returns `(improved, should_stop)`.
    pub fn observe(&mut self, metric: f64) -> (bool, bool) {
        if metric > self.best {
            self.best = metric;
            self.bad_epochs = 0;
            (true, false)
        } else {
            self.bad_epochs += 1;
            (false, self.bad_epochs > self.patience)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub val_recall: f64,
    pub val_ndcg: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (highest validation recall).
    pub best_epoch: usize,
    pub best_val_recall: f64,
    pub stop_reason: StopReason,
    pub thread_count: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams<f32>,
    pub report: TrainReport,
}

/// Full training loop: initialize, iterate shuffled mini-batches with
/// sampled negatives, update with Adam, score the validation split every
/// epoch, and keep the parameters of the best validation epoch.
///
/// All randomness flows through one seeded generator in a fixed order
/// (init tensors, then per epoch: pair shuffle, then negative draws batch
/// by batch), so a seed pins the entire run.
pub fn fit(
    ds: &Dataset,
    graphs: &GraphBundle<f32>,
    hp: &Hyperparams,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    hp.validate()?;
    validate_dataset(ds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut params = init_params(
        ds.n_users,
        ds.n_items,
        hp.d,
        ds.visual.n_cols(),
        ds.textual.n_cols(),
        &mut rng,
    );
    let mut adam = AdamState::new(&params);
    let mut positives: Vec<HashSet<u32>> = vec![HashSet::new(); ds.n_users];
    for &(u, i) in &ds.train {
        positives[u as usize].insert(i);
    }
    let mut pairs = ds.train.clone();
    let mut stopper = EarlyStopper::new(hp.patience);
    let mut best_params = params.clone();
    let mut best_epoch = 0usize;
    let mut best_recall = f64::NEG_INFINITY;
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;
    for epoch in 1..=hp.max_epochs {
        pairs.shuffle(&mut rng);
        let mut sums = LossBreakdown {
            total: 0.0,
            bpr: 0.0,
            mmbpr: 0.0,
            contrastive: 0.0,
        };
        let mut n_triples = 0usize;
        for chunk in pairs.chunks(hp.batch_size) {
            let users: Vec<u32> = chunk.iter().map(|&(u, _)| u).collect();
            let negs = sample_negatives(&users, &positives, ds.n_items, &mut rng)?;
            let triples: Vec<(u32, u32, u32)> = chunk
                .iter()
                .zip(negs.iter())
                .map(|(&(u, p), &n)| (u, p, n))
                .collect();
            let batch = TripletBatch { triples };
            let (loss, grads) = forward_backward(
                &params,
                graphs,
                &ds.visual,
                &ds.textual,
                &batch,
                hp,
            )?;
            adam.step(&mut params, &grads, hp.lr as f64, hp.l2_reg as f64);
            let w = batch.triples.len() as f64;
            sums.total += loss.total * w;
            sums.bpr += loss.bpr * w;
            sums.mmbpr += loss.mmbpr * w;
            sums.contrastive += loss.contrastive * w;
            n_triples += batch.triples.len();
        }
        let denom = n_triples.max(1) as f64;
        let epoch_loss = LossBreakdown {
            total: sums.total / denom,
            bpr: sums.bpr / denom,
            mmbpr: sums.mmbpr / denom,
            contrastive: sums.contrastive / denom,
        };
        let val = validate(&params, graphs, ds, hp)?;
        let record = EpochRecord {
            epoch,
            loss: epoch_loss,
            val_recall: val.recall,
            val_ndcg: val.ndcg,
        };
        progress(&record);
        epochs.push(record);
        let (improved, stop) = stopper.observe(val.recall);
        if improved {
            best_params = params.clone();
            best_epoch = epoch;
            best_recall = val.recall;
        }
        if stop {
            stop_reason = StopReason::EarlyStopping;
            break;
        }
    }
    Ok(TrainOutcome {
        params: best_params,
        report: TrainReport {
            epochs,
            best_epoch,
            best_val_recall: best_recall,
            stop_reason,
            thread_count: rayon::current_num_threads(),
        },
    })
}

/// Score the validation split with the current parameters.
pub fn validate(
    params: &ModelParams<f32>,
    graphs: &GraphBundle<f32>,
    ds: &Dataset,
    hp: &Hyperparams,
) -> Result<EvalReport> {
    evaluate_model(params, graphs, ds, Split::Val, hp)
}
