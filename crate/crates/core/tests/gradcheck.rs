//! Full-pipeline gradient verification: analytic gradients through graph
//! propagation, attention fusion, and all three loss terms are compared
//! against central finite differences computed entirely in f64.

use mmrec_core::dense::DenseMatrix;
use mmrec_core::graph::GraphBundle;
use mmrec_core::hyperparams::{CfModel, Hyperparams};
use mmrec_core::losses::{compute_loss, forward_backward_with_weights, LossWeights, TripletBatch};
use mmrec_core::params::ModelParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N_USERS: usize = 5;
const N_ITEMS: usize = 8;
const D: usize = 4;
const D_V: usize = 6;
const D_T: usize = 5;
const STEP: f64 = 1e-3;
const TOL: f64 = 1e-4;

struct Instance {
    params: ModelParams<f64>,
    graphs: GraphBundle<f64>,
    visual: DenseMatrix<f64>,
    textual: DenseMatrix<f64>,
    batch: TripletBatch,
    hp: Hyperparams,
}

fn random_matrix_f32(rows: usize, cols: usize, scale: f32, rng: &mut ChaCha8Rng) -> DenseMatrix<f32> {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    DenseMatrix::from_vec(rows, cols, data).unwrap()
}

fn random_matrix_f64(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> DenseMatrix<f64> {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    DenseMatrix::from_vec(rows, cols, data).unwrap()
}

fn build_instance(seed: u64, cf_model: CfModel) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let visual32 = random_matrix_f32(N_ITEMS, D_V, 1.0, &mut rng);
    let textual32 = random_matrix_f32(N_ITEMS, D_T, 1.0, &mut rng);

    // every user gets three distinct training items
    let mut train = Vec::new();
    for u in 0..N_USERS as u32 {
        let mut items: Vec<u32> = Vec::new();
        while items.len() < 3 {
            let i = rng.random_range(0..N_ITEMS as u32);
            if !items.contains(&i) {
                items.push(i);
            }
        }
        for i in items {
            train.push((u, i));
        }
    }

    let graphs = GraphBundle::build(&visual32, &textual32, &train, N_USERS, 3, 0.5)
        .unwrap()
        .to_f64();

    let params = ModelParams {
        user_emb: random_matrix_f64(N_USERS, D, 0.5, &mut rng),
        item_emb: random_matrix_f64(N_ITEMS, D, 0.5, &mut rng),
        proj_v: random_matrix_f64(D_V, D, 0.5, &mut rng),
        proj_t: random_matrix_f64(D_T, D, 0.5, &mut rng),
    };

    let by_user = mmrec_core::Dataset::items_by_user(&train, N_USERS);
    let mut triples = Vec::new();
    for _ in 0..8 {
        let u = rng.random_range(0..N_USERS as u32);
        let pos_items = &by_user[u as usize];
        let pos = pos_items[rng.random_range(0..pos_items.len())];
        let neg = loop {
            let j = rng.random_range(0..N_ITEMS as u32);
            if !pos_items.contains(&j) {
                break j;
            }
        };
        triples.push((u, pos, neg));
    }

    let hp = Hyperparams {
        d: D,
        top_n: 3,
        alpha: 1.0,
        beta: 1.0,
        mu: 0.3,
        tau: 0.2,
        cf_model,
        ..Hyperparams::default()
    };

    Instance {
        params,
        graphs,
        visual: visual32.to_f64(),
        textual: textual32.to_f64(),
        batch: TripletBatch { triples },
        hp,
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn check_instance(inst: &Instance, weights: &LossWeights, label: &str) {
    let (_, analytic) = forward_backward_with_weights(
        &inst.params,
        &inst.graphs,
        &inst.visual,
        &inst.textual,
        &inst.batch,
        &inst.hp,
        weights,
    )
    .unwrap();

    let loss_at = |params: &ModelParams<f64>| -> f64 {
        compute_loss(
            params,
            &inst.graphs,
            &inst.visual,
            &inst.textual,
            &inst.batch,
            &inst.hp,
            weights,
        )
        .unwrap()
        .total
    };

    for tensor_idx in 0..4 {
        let n = analytic.tensors()[tensor_idx].1.values().len();
        for flat in 0..n {
            // fourth-order central stencil at the base step: the plain
            // two-point formula leaves O(step^2) truncation right at the
            // tolerance for small-magnitude coordinates
            let at = |offset: f64| -> f64 {
                let mut p = inst.params.clone();
                p.tensors_mut()[tensor_idx].1.values_mut()[flat] += offset;
                loss_at(&p)
            };
            let fd = (8.0 * (at(STEP) - at(-STEP)) - (at(2.0 * STEP) - at(-2.0 * STEP)))
                / (12.0 * STEP);
            let (name, g) = analytic.tensors()[tensor_idx];
            let an = g.values()[flat];
            let err = rel_err(fd, an);
            assert!(
                err < TOL,
                "{label}: {name}[{flat}] analytic {an:.3e} vs fd {fd:.3e} (rel {err:.3e})"
            );
        }
    }
}

#[test]
fn total_loss_gradients_match_finite_differences() {
    for seed in 0..10 {
        let inst = build_instance(seed, CfModel::LightGcn);
        check_instance(&inst, &LossWeights::default(), &format!("seed {seed} total"));
    }
}

#[test]
fn each_loss_term_gradient_matches_finite_differences() {
    let configs = [
        ("bpr", LossWeights { bpr: 1.0, mmbpr: 0.0, contrastive: 0.0 }),
        ("mmbpr", LossWeights { bpr: 0.0, mmbpr: 1.0, contrastive: 0.0 }),
        ("contrastive", LossWeights { bpr: 0.0, mmbpr: 0.0, contrastive: 1.0 }),
    ];
    for seed in 0..10 {
        let inst = build_instance(seed, CfModel::LightGcn);
        for (name, w) in &configs {
            check_instance(&inst, w, &format!("seed {seed} {name}"));
        }
    }
}

#[test]
fn gradients_match_under_mf_backbone_and_ablations() {
    let inst = build_instance(0, CfModel::Mf);
    check_instance(&inst, &LossWeights::default(), "mf backbone");

    let mut inst = build_instance(1, CfModel::LightGcn);
    inst.hp.use_attention = false;
    check_instance(&inst, &LossWeights::default(), "attention off");

    let mut inst = build_instance(2, CfModel::LightGcn);
    inst.hp.use_multimodal = false;
    check_instance(&inst, &LossWeights::default(), "multimodal off");
}
