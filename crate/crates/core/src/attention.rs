use crate::error::{Error, Result};
use crate::hyperparams::Hyperparams;
use crate::propagation::PropagatedEmbeddings;
use crate::scalar::{dot, Scalar};

/// Channel count and order used for every per-pair array in this module:
/// id, visual, textual, blended content.
pub const N_CHANNELS: usize = 4;

/// Max-subtracted softmax over four logits. Subtracting the max makes the
/// result invariant to a common shift of the logits and keeps the
/// exponentials bounded.
pub fn softmax4(logits: [f64; N_CHANNELS]) -> [f64; N_CHANNELS] {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut weights = [0.0f64; N_CHANNELS];
    let mut sum = 0.0;
    for (w, &l) in weights.iter_mut().zip(logits.iter()) {
        *w = (l - max).exp();
        sum += *w;
    }
    for w in weights.iter_mut() {
        *w /= sum;
    }
    weights
}

/// Softmax over scaled dot products between the user and one item's four
/// channel embeddings.
pub fn attention_weights<S: Scalar>(user: &[S], items: &[&[S]; N_CHANNELS]) -> Result<[f64; N_CHANNELS]> {
    let scale = 1.0 / (user.len() as f64).sqrt();
    let mut logits = [0.0f64; N_CHANNELS];
    for (q, item) in items.iter().enumerate() {
        logits[q] = dot(user, item) * scale;
        if !logits[q].is_finite() {
            return Err(Error::NonFiniteInput(format!(
                "attention logit for channel {} is {}",
                q, logits[q]
            )));
        }
    }
    Ok(softmax4(logits))
}

/// Values from the forward pass of one (user, item) pair that the backward
/// pass reuses: attention weights, raw channel dots, and their
/// attention-weighted mean.
#[derive(Debug, Clone, Copy)]
pub struct PairCache {
    pub weights: [f64; N_CHANNELS],
    pub dots: [f64; N_CHANNELS],
    pub mean_dot: f64,
}

/// Score one (user, item) pair. The full path blends the four channels by
/// attention, adds the static visual/textual mix, stacks both on the id
/// channel, and takes the dot with the user. The ablation flags reduce this
/// to id plus static mix, or to the id channel alone.
pub fn pair_forward<S: Scalar>(
    user: &[S],
    items: &[&[S]; N_CHANNELS],
    hp: &Hyperparams,
) -> Result<(f64, PairCache)> {
    let mut cache = PairCache {
        weights: [0.0; N_CHANNELS],
        dots: [0.0; N_CHANNELS],
        mean_dot: 0.0,
    };
    let mu = hp.mu as f64;
    if !hp.use_multimodal {
        let score = dot(user, items[0]);
        cache.dots[0] = score;
        return Ok((score, cache));
    }
    for (q, item) in items.iter().enumerate() {
        cache.dots[q] = dot(user, item);
    }
    let static_mix = mu * cache.dots[1] + (1.0 - mu) * cache.dots[2];
    if !hp.use_attention {
        return Ok((cache.dots[0] + static_mix, cache));
    }
    cache.weights = attention_weights(user, items)?;
    cache.mean_dot = cache
        .weights
        .iter()
        .zip(cache.dots.iter())
        .map(|(&a, &c)| a * c)
        .sum();
    Ok((cache.dots[0] + static_mix + cache.mean_dot, cache))
}

/// Accumulate `g` times the score gradient of one pair into the user row
/// and the four item channel rows.
pub fn pair_backward<S: Scalar>(
    user: &[S],
    items: &[&[S]; N_CHANNELS],
    cache: &PairCache,
    hp: &Hyperparams,
    g: f64,
    d_user: &mut [S],
    d_items: &mut [&mut [S]; N_CHANNELS],
) {
    let d = user.len();
    let mu = hp.mu as f64;
    let add = |dst: &mut [S], src: &[S], coef: f64| {
        for (o, &v) in dst.iter_mut().zip(src.iter()) {
            *o = *o + S::from_f64(coef * v.as_f64());
        }
    };
    if !hp.use_multimodal {
        add(d_user, items[0], g);
        add(d_items[0], user, g);
        return;
    }
    if !hp.use_attention {
        add(d_user, items[0], g);
        add(d_user, items[1], g * mu);
        add(d_user, items[2], g * (1.0 - mu));
        add(d_items[0], user, g);
        add(d_items[1], user, g * mu);
        add(d_items[2], user, g * (1.0 - mu));
        return;
    }
    let scale = 1.0 / (d as f64).sqrt();
    // per-channel item gradients: fixed coefficients from the direct terms
    // plus the softmax coupling w_q = a_q (1 + (c_q - cbar) / sqrt(d))
    let mut w = [0.0f64; N_CHANNELS];
    for q in 0..N_CHANNELS {
        w[q] = cache.weights[q] * (1.0 + (cache.dots[q] - cache.mean_dot) * scale);
    }
    add(d_items[0], user, g * (1.0 + w[0]));
    add(d_items[1], user, g * (mu + w[1]));
    add(d_items[2], user, g * ((1.0 - mu) + w[2]));
    add(d_items[3], user, g * w[3]);
    // user gradient: y plus the softmax coupling term
    add(d_user, items[0], g * (1.0 + cache.weights[0]));
    add(d_user, items[1], g * (mu + cache.weights[1]));
    add(d_user, items[2], g * ((1.0 - mu) + cache.weights[2]));
    add(d_user, items[3], g * cache.weights[3]);
    for q in 0..N_CHANNELS {
        let coef = cache.weights[q] * (cache.dots[q] - cache.mean_dot) * scale;
        add(d_user, items[q], g * coef);
    }
}

/// Gather the four channel rows for one item.
pub fn item_channels<S: Scalar>(emb: &PropagatedEmbeddings<S>, item: usize) -> [&[S]; N_CHANNELS] {
    [
        emb.item_id.row(item),
        emb.item_visual.row(item),
        emb.item_textual.row(item),
        emb.item_fused.row(item),
    ]
}

/// Score every item for one user.
pub fn score_items_for_user<S: Scalar>(
    user: &[S],
    emb: &PropagatedEmbeddings<S>,
    hp: &Hyperparams,
) -> Result<Vec<f64>> {
    let n_items = emb.item_id.n_rows();
    let mut scores = Vec::with_capacity(n_items);
    for i in 0..n_items {
        let (s, _) = pair_forward(user, &item_channels(emb, i), hp)?;
        scores.push(s);
    }
    Ok(scores)
}

/// Indices of the `k` highest scores, ties broken toward the smaller index,
/// skipping items where `excluded` is true.
pub fn top_k(scores: &[f64], k: usize, excluded: &[bool]) -> Vec<u32> {
    let mut idx: Vec<u32> = (0..scores.len() as u32)
        .filter(|&i| !excluded[i as usize])
        .collect();
    idx.sort_by(|&a, &b| {
        scores[b as usize]
            .total_cmp(&scores[a as usize])
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn hp_full() -> Hyperparams {
        Hyperparams {
            mu: 0.3,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn equal_logits_give_uniform_weights() {
        let user = [1.0f64, 0.0];
        let item = [1.0f64, 1.0];
        let items = [&item[..], &item[..], &item[..], &item[..]];
        let w = attention_weights(&user, &items).unwrap();
        for q in 0..N_CHANNELS {
            assert_abs_diff_eq!(w[q], 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn hand_computed_softmax() {
        // d = 1, logits are the raw products
        let user = [1.0f64];
        let (a, b, c, m) = ([0.0f64], [1.0f64], [2.0f64], [-1.0f64]);
        let items = [&a[..], &b[..], &c[..], &m[..]];
        let w = attention_weights(&user, &items).unwrap();
        let exps = [0.0f64.exp(), 1.0f64.exp(), 2.0f64.exp(), (-1.0f64).exp()];
        let z: f64 = exps.iter().sum();
        for q in 0..N_CHANNELS {
            assert_abs_diff_eq!(w[q], exps[q] / z, epsilon = 1e-12);
        }
    }

    #[test]
    fn unit_logit_weights() {
        // d = 1 so the scale factor is 1 and logits equal the raw dots
        let user = [1.0f64];
        let (a, b) = ([1.0f64], [0.0f64]);
        let items = [&a[..], &b[..], &b[..], &b[..]];
        let w = attention_weights(&user, &items).unwrap();
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(w[0], e / (e + 3.0), epsilon = 1e-12);
        for q in 1..N_CHANNELS {
            assert_abs_diff_eq!(w[q], 1.0 / (e + 3.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn softmax_shift_invariance_exact() {
        // dyadic logits and power-of-two shifts add exactly in binary
        // floating point, so the max-subtracted softmax is bit-identical
        let logits = [0.5f64, -1.25, 2.0, 0.0];
        for shift in [1.0f64, 4.0, 512.0, -64.0] {
            let shifted = [
                logits[0] + shift,
                logits[1] + shift,
                logits[2] + shift,
                logits[3] + shift,
            ];
            assert_eq!(softmax4(logits), softmax4(shifted));
        }
    }

    #[test]
    fn large_magnitudes_stay_finite() {
        let user = vec![80.0f32; 8];
        let big = vec![90.0f32; 8];
        let small = vec![-90.0f32; 8];
        let items = [&big[..], &small[..], &big[..], &small[..]];
        let w = attention_weights(&user, &items).unwrap();
        let sum: f64 = w.iter().sum();
        assert!(w.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn ablation_paths() {
        let user = [0.5f64, -1.0, 2.0];
        let ki = [1.0f64, 0.0, 1.0];
        let kv = [0.0f64, 1.0, 0.0];
        let kt = [2.0f64, 2.0, -1.0];
        let km = [0.1f64, 0.1, 0.1];
        let items = [&ki[..], &kv[..], &kt[..], &km[..]];

        let mut hp = hp_full();
        hp.use_multimodal = false;
        let (s, _) = pair_forward(&user, &items, &hp).unwrap();
        assert_abs_diff_eq!(s, dot(&user, &ki), epsilon = 1e-12);

        let mut hp = hp_full();
        hp.use_attention = false;
        let mu = hp.mu as f64;
        let (s, _) = pair_forward(&user, &items, &hp).unwrap();
        let expect = dot(&user, &ki) + mu * dot(&user, &kv) + (1.0 - mu) * dot(&user, &kt);
        assert_abs_diff_eq!(s, expect, epsilon = 1e-12);
    }

    #[test]
    fn full_score_matches_reference() {
        let user = [0.5f64, -1.0, 2.0];
        let ki = [1.0f64, 0.0, 1.0];
        let kv = [0.0f64, 1.0, 0.0];
        let kt = [2.0f64, 2.0, -1.0];
        let km = [0.1f64, 0.1, 0.1];
        let items = [&ki[..], &kv[..], &kt[..], &km[..]];
        let hp = hp_full();
        let (s, cache) = pair_forward(&user, &items, &hp).unwrap();
        // independent reference computation
        let scale = 1.0 / 3.0f64.sqrt();
        let dots = [
            dot(&user, &ki),
            dot(&user, &kv),
            dot(&user, &kt),
            dot(&user, &km),
        ];
        let max = dots.iter().cloned().fold(f64::NEG_INFINITY, f64::max) * scale;
        let exps: Vec<f64> = dots.iter().map(|&c| (c * scale - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let attn: f64 = exps
            .iter()
            .zip(dots.iter())
            .map(|(&e, &c)| (e / z) * c)
            .sum();
        let mu = hp.mu as f64;
        let expect = dots[0] + mu * dots[1] + (1.0 - mu) * dots[2] + attn;
        assert_abs_diff_eq!(s, expect, epsilon = 1e-12);
        assert_abs_diff_eq!(cache.mean_dot, attn, epsilon = 1e-12);
    }

    /// Finite-difference check of the pair backward for every flag setting.
    #[test]
    fn pair_backward_matches_finite_differences() {
        let configs = [(true, true), (true, false), (false, true)];
        for &(use_mm, use_attn) in &configs {
            let mut hp = hp_full();
            hp.use_multimodal = use_mm;
            hp.use_attention = use_attn;
            let d = 4;
            let user: Vec<f64> = (0..d).map(|i| 0.3 * (i as f64) - 0.5).collect();
            let base: Vec<Vec<f64>> = (0..N_CHANNELS)
                .map(|q| (0..d).map(|i| 0.1 * (q as f64 + 1.0) * (i as f64 - 1.5)).collect())
                .collect();

            let score = |user: &[f64], items: &[Vec<f64>]| -> f64 {
                let refs = [&items[0][..], &items[1][..], &items[2][..], &items[3][..]];
                pair_forward(user, &refs, &hp).unwrap().0
            };

            let refs = [&base[0][..], &base[1][..], &base[2][..], &base[3][..]];
            let (_, cache) = pair_forward(&user, &refs, &hp).unwrap();
            let mut d_user = vec![0.0f64; d];
            let mut d_items: Vec<Vec<f64>> = vec![vec![0.0; d]; N_CHANNELS];
            {
                let mut slices: Vec<&mut [f64]> = d_items.iter_mut().map(|v| &mut v[..]).collect();
                let mut arr: [&mut [f64]; N_CHANNELS] = slices
                    .drain(..)
                    .collect::<Vec<_>>()
                    .try_into()
                    .unwrap();
                pair_backward(&user, &refs, &cache, &hp, 1.0, &mut d_user, &mut arr);
            }

            let eps = 1e-6;
            for i in 0..d {
                let mut up = user.clone();
                let mut dn = user.clone();
                up[i] += eps;
                dn[i] -= eps;
                let fd = (score(&up, &base) - score(&dn, &base)) / (2.0 * eps);
                assert_abs_diff_eq!(d_user[i], fd, epsilon = 1e-8);
            }
            for q in 0..N_CHANNELS {
                for i in 0..d {
                    let mut up = base.clone();
                    let mut dn = base.clone();
                    up[q][i] += eps;
                    dn[q][i] -= eps;
                    let fd = (score(&user, &up) - score(&user, &dn)) / (2.0 * eps);
                    assert_abs_diff_eq!(
                        d_items[q][i],
                        fd,
                        epsilon = 1e-8
                    );
                }
            }
        }
    }

    #[test]
    fn top_k_order_and_exclusion() {
        let scores = [0.5, 2.0, 2.0, -1.0, 3.0];
        let mut excluded = vec![false; 5];
        assert_eq!(top_k(&scores, 3, &excluded), vec![4, 1, 2]);
        excluded[4] = true;
        assert_eq!(top_k(&scores, 3, &excluded), vec![1, 2, 0]);
        assert_eq!(top_k(&scores, 10, &excluded), vec![1, 2, 0, 3]);
    }

    proptest! {
        #[test]
        fn weights_form_distribution(
            d in 1usize..12,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut gen = |n: usize| -> Vec<f32> {
                (0..n).map(|_| rng.random_range(-10.0f32..10.0)).collect()
            };
            let user = gen(d);
            let rows: Vec<Vec<f32>> = (0..N_CHANNELS).map(|_| gen(d)).collect();
            let items = [&rows[0][..], &rows[1][..], &rows[2][..], &rows[3][..]];
            let w = attention_weights(&user, &items).unwrap();
            let sum: f64 = w.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            for q in 0..N_CHANNELS {
                prop_assert!(w[q] >= 0.0 && w[q] <= 1.0 && w[q].is_finite());
            }
        }
    }
}
