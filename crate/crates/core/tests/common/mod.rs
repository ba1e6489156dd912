#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transtarec::ingest::TimeKey;
use transtarec::model::TENSOR_NAMES;
use transtarec::training::{batch_gradient, batch_loss};
use transtarec::{HyperParams, Model, ModelParams, TrainingExample, Triplet};

pub fn random_time(rng: &mut impl Rng) -> TimeKey {
    TimeKey::new(
        rng.gen_range(1..=12),
        rng.gen_range(0..7),
        rng.gen_range(0..24),
    )
    .unwrap()
}

/// Parameters with every entry uniform in `[-scale, scale]`.
pub fn random_params(
    rng: &mut impl Rng,
    n_users: usize,
    n_pois: usize,
    d: usize,
    scale: f64,
) -> ModelParams {
    let mut p = ModelParams::zeros(n_users, n_pois, d);
    for t in p.tensors_mut() {
        for v in t.iter_mut() {
            *v = rng.gen_range(-scale..=scale);
        }
    }
    p
}

pub fn random_triplet(rng: &mut impl Rng, n_users: usize, n_pois: usize) -> Triplet {
    Triplet {
        user: rng.gen_range(0..n_users),
        prev_poi: rng.gen_range(0..n_pois),
        prev_time: random_time(rng),
        next_poi: rng.gen_range(0..n_pois),
        next_time: random_time(rng),
    }
}

pub fn random_example(
    rng: &mut impl Rng,
    n_users: usize,
    n_pois: usize,
    n_neg: usize,
) -> TrainingExample {
    let positive = random_triplet(rng, n_users, n_pois);
    let mut negatives = Vec::new();
    while negatives.len() < n_neg {
        let p = rng.gen_range(0..n_pois);
        if p != positive.next_poi && !negatives.contains(&p) {
            negatives.push(p);
        }
    }
    TrainingExample {
        positive,
        negatives,
    }
}

/// Distance of the batch from the nearest kink of the hinge or the penalty.
fn kink_distance(model: &Model, batch: &[TrainingExample]) -> f64 {
    let mut closest = f64::INFINITY;
    for ex in batch {
        let pos = model.score_triplet(&ex.positive).unwrap();
        for &n in &ex.negatives {
            let neg = model
                .score_triplet(&Triplet {
                    next_poi: n,
                    ..ex.positive
                })
                .unwrap();
            closest = closest.min((pos + model.hyper.margin - neg).abs());
        }
        let t = &ex.positive;
        let w = model.fuse_normal(t.prev_time, t.user, t.next_time).unwrap();
        let v = model.fuse_translation(t.prev_time, t.user, t.next_time);
        let c: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        let q: f64 = v.iter().map(|a| a * a).sum();
        closest = closest.min((c * c / q - model.hyper.epsilon.powi(2)).abs());
    }
    closest
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_tensor: &'static str,
    pub coords: usize,
}

/// Largest coordinate-wise relative error between the analytic batch
/// gradient and central differences with step `h`.
pub fn gradient_check(model: &Model, batch: &[TrainingExample], h: f64) -> GradCheck {
    let (grads, _) = batch_gradient(model, batch).unwrap();
    let analytic = grads.to_dense(&model.params);
    let mut probe = model.clone();
    let mut out = GradCheck {
        max_rel_error: 0.0,
        worst_tensor: "",
        coords: 0,
    };
    for (t, name) in TENSOR_NAMES.iter().enumerate() {
        let len = analytic[t].len();
        for k in 0..len {
            let orig = probe.params.tensors_mut()[t][k];
            probe.params.tensors_mut()[t][k] = orig + h;
            let up = batch_loss(&probe, batch).unwrap().total;
            probe.params.tensors_mut()[t][k] = orig - h;
            let down = batch_loss(&probe, batch).unwrap().total;
            probe.params.tensors_mut()[t][k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[t][k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if rel > out.max_rel_error {
                out.max_rel_error = rel;
                out.worst_tensor = name;
            }
            out.coords += 1;
        }
    }
    out
}

/// A random instance at least `gap` away from every kink of the loss.
pub fn smooth_instance(
    rng: &mut ChaCha8Rng,
    n_users: usize,
    n_pois: usize,
    d: usize,
    batch: usize,
    gap: f64,
) -> (Model, Vec<TrainingExample>) {
    loop {
        let hyper = HyperParams {
            dim: d,
            ..Default::default()
        };
        let mut params = random_params(rng, n_users, n_pois, d, 0.5);
        params.h_bias.iter_mut().for_each(|b| *b += 0.5);
        let model = Model::new(hyper, params);
        let examples: Vec<_> = (0..batch)
            .map(|_| random_example(rng, n_users, n_pois, 3))
            .collect();
        if kink_distance(&model, &examples) > gap {
            return (model, examples);
        }
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn time_vec(p: &ModelParams, t: TimeKey) -> Vec<f64> {
    let m = p.month_emb.row(usize::from(t.month) - 1);
    let w = p.weekday_emb.row(usize::from(t.weekday));
    let h = p.hour_emb.row(usize::from(t.hour));
    (0..p.dim()).map(|k| m[k] + w[k] + h[k]).collect()
}

fn affine(weight: &transtarec::linalg::Table, bias: &[f64], x: &[f64]) -> Vec<f64> {
    (0..bias.len())
        .map(|r| bias[r] + weight.row(r).iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

/// Scores of every POI for one query, computed straight from the raw
/// tensors without going through the model's forward code.
pub fn oracle_scores(
    model: &Model,
    user: usize,
    t_i: TimeKey,
    prev: usize,
    t_j: TimeKey,
    mode: transtarec::RankMode,
) -> Vec<f64> {
    let p = &model.params;
    let d = p.dim();
    let (v, w) = if model.hyper.baseline_mode {
        (p.user_emb.row(user).to_vec(), None)
    } else {
        let mut x = time_vec(p, t_i);
        x.extend_from_slice(p.user_emb.row(user));
        x.extend(time_vec(p, t_j));
        let v = affine(&p.g_weight, &p.g_bias, &x);
        let r = affine(&p.h_weight, &p.h_bias, &x);
        let n = r.iter().map(|a| a * a).sum::<f64>().sqrt();
        (v, Some(r.iter().map(|a| a / n).collect::<Vec<_>>()))
    };
    let perp = |e: &[f64]| -> Vec<f64> {
        match &w {
            None => e.to_vec(),
            Some(w) => {
                let c: f64 = w.iter().zip(e).map(|(a, b)| a * b).sum();
                e.iter().zip(w).map(|(a, b)| a - c * b).collect()
            }
        }
    };
    let pi = perp(p.poi_emb.row(prev));
    let q: Vec<f64> = (0..d).map(|k| pi[k] + v[k]).collect();
    (0..p.n_pois())
        .map(|j| {
            let pj = perp(p.poi_emb.row(j));
            match mode {
                transtarec::RankMode::Inner => q.iter().zip(&pj).map(|(a, b)| a * b).sum(),
                transtarec::RankMode::NegL2 => {
                    q.iter().zip(&pj).map(|(a, b)| (a - b) * (a - b)).sum()
                }
            }
        })
        .collect()
}

/// 1-based rank of `target` after a plain sort, best first, ties by index.
pub fn brute_force_rank(scores: &[f64], target: usize, mode: transtarec::RankMode) -> usize {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let c = match mode {
            transtarec::RankMode::Inner => scores[b].partial_cmp(&scores[a]).unwrap(),
            transtarec::RankMode::NegL2 => scores[a].partial_cmp(&scores[b]).unwrap(),
        };
        c.then(a.cmp(&b))
    });
    order.iter().position(|&p| p == target).unwrap() + 1
}

pub fn random_vec(rng: &mut impl Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-scale..=scale)).collect()
}
