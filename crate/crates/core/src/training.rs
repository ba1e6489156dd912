//! Margin-ranking training with negative sampling and plain SGD.
//!
//! Per example the objective is
//!
//! ```text
//! sum_neg [ f(p_i, p_j) + margin - f(p_i, p_neg) ]_+
//!   + C * [ (w_ut . v_ut)^2 / |v_ut|^2 - eps^2 ]_+
//! ```
//!
//! and a step descends the mean over the batch. Gradients are derived by
//! hand and flow through the fusion layers, the normal's normalization and
//! the hyperplane projection.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::TimeKey;
use crate::linalg::{axpy, clamp_to_unit_ball, dot, Table};
use crate::model::{HyperParams, Model, ModelParams, Triplet, DEGENERATE_NORMAL_NORM};
use crate::split::{Split, Task};

/// Below this squared norm the translation counts as zero and the soft
/// constraint is skipped.
const ZERO_TRANSLATION_SQ: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Negatives drawn per positive.
    pub neg_samples: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Rescale user and POI rows into the unit ball after every step.
    pub clamp_entities: bool,
    /// Half-width of the uniform noise added to the fusion weights at init.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 50,
            neg_samples: 1,
            batch_size: 64,
            seed: 42,
            clamp_entities: true,
            init_scale: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be > 0");
        }
        if self.epochs == 0 {
            return bad("epochs must be > 0");
        }
        if self.neg_samples == 0 {
            return bad("neg_samples must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be > 0");
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad("init_scale must be >= 0");
        }
        Ok(())
    }
}

/// Random initialization.
///
/// Embedding tables are uniform in `[-6/sqrt(d), 6/sqrt(d)]` (user and POI
/// rows then clamped into the unit ball when `clamp_entities` is set). The
/// translation layer starts at `[0 | I | 0]` so that `v_ut = v_u`, plus
/// uniform noise of half-width `init_scale`; the normal layer gets uniform
/// weights of the same scale and a constant bias of norm 1.
pub fn init_params(
    n_users: usize,
    n_pois: usize,
    hyper: &HyperParams,
    config: &TrainConfig,
) -> Result<ModelParams> {
    hyper.validate()?;
    config.validate()?;
    if n_users == 0 || n_pois == 0 {
        return Err(Error::InvalidArgument(
            "vocabulary sizes must be >= 1".into(),
        ));
    }
    let d = hyper.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::zeros(n_users, n_pois, d);

    let bound = 6.0 / (d as f64).sqrt();
    for table in [
        &mut params.user_emb,
        &mut params.poi_emb,
        &mut params.month_emb,
        &mut params.weekday_emb,
        &mut params.hour_emb,
    ] {
        fill_uniform(&mut rng, table.as_mut_slice(), bound);
    }
    if config.clamp_entities {
        clamp_all_rows(&mut params.user_emb);
        clamp_all_rows(&mut params.poi_emb);
    }

    fill_uniform(&mut rng, params.g_weight.as_mut_slice(), config.init_scale);
    for k in 0..d {
        params.g_weight.row_mut(k)[d + k] += 1.0;
    }
    fill_uniform(&mut rng, params.h_weight.as_mut_slice(), config.init_scale);
    params.h_bias = vec![1.0 / (d as f64).sqrt(); d];
    Ok(params)
}

fn fill_uniform(rng: &mut ChaCha8Rng, values: &mut [f64], bound: f64) {
    if bound == 0.0 {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    for v in values {
        *v = rng.gen_range(-bound..=bound);
    }
}

fn clamp_all_rows(table: &mut Table) {
    for r in 0..table.rows() {
        clamp_to_unit_ball(table.row_mut(r));
    }
}

/// Draws `n` distinct POIs uniformly from everything except `positive` and
/// `also_excluded`.
pub fn sample_negatives<R: Rng + ?Sized>(
    rng: &mut R,
    n_pois: usize,
    positive: usize,
    also_excluded: &[usize],
    n: usize,
) -> Result<Vec<usize>> {
    let mut excluded: Vec<usize> = also_excluded
        .iter()
        .copied()
        .chain(std::iter::once(positive))
        .filter(|&p| p < n_pois)
        .collect();
    excluded.sort_unstable();
    excluded.dedup();
    let eligible = n_pois - excluded.len();
    if eligible < n {
        return Err(Error::ExhaustedCandidates {
            eligible,
            requested: n,
        });
    }
    if 4 * n >= eligible {
        let pool: Vec<usize> = (0..n_pois)
            .filter(|p| excluded.binary_search(p).is_err())
            .collect();
        return Ok(rand::seq::index::sample(rng, eligible, n)
            .into_iter()
            .map(|i| pool[i])
            .collect());
    }
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = rng.gen_range(0..n_pois);
        if excluded.binary_search(&p).is_err() && !out.contains(&p) {
            out.push(p);
        }
    }
    Ok(out)
}

/// A golden triplet and the corrupted next POIs contrasted with it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub positive: Triplet,
    pub negatives: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub hinge: f64,
    pub soft_constraint: f64,
    /// `hinge + C * soft_constraint`.
    pub total: f64,
}

impl LossBreakdown {
    fn new(hinge: f64, soft_constraint: f64, soft_c: f64) -> Self {
        Self {
            hinge,
            soft_constraint,
            total: hinge + soft_c * soft_constraint,
        }
    }

    fn scaled(self, s: f64) -> Self {
        Self {
            hinge: self.hinge * s,
            soft_constraint: self.soft_constraint * s,
            total: self.total * s,
        }
    }

    fn add(&mut self, other: Self) {
        self.hinge += other.hinge;
        self.soft_constraint += other.soft_constraint;
        self.total += other.total;
    }
}

/// `[pos + margin - neg]_+`.
pub fn margin_hinge(pos: f64, neg: f64, margin: f64) -> f64 {
    (pos + margin - neg).max(0.0)
}

/// `[(w . v)^2 / |v|^2 - eps^2]_+`, zero for a vanishing translation.
pub fn orthogonality_penalty(normal: &[f64], translation: &[f64], epsilon: f64) -> f64 {
    let q = dot(translation, translation);
    if q <= ZERO_TRANSLATION_SQ {
        return 0.0;
    }
    let c = dot(normal, translation);
    (c * c / q - epsilon * epsilon).max(0.0)
}

/// Loss of one example, evaluated through the model's public forward path.
pub fn loss(model: &Model, example: &TrainingExample) -> Result<LossBreakdown> {
    let pos = model.score_triplet(&example.positive)?;
    let mut hinge = 0.0;
    for &neg in &example.negatives {
        let f_neg = model.score_triplet(&Triplet {
            next_poi: neg,
            ..example.positive
        })?;
        hinge += margin_hinge(pos, f_neg, model.hyper.margin);
    }
    let soft = if model.hyper.baseline_mode {
        0.0
    } else {
        let t = &example.positive;
        let w = model.fuse_normal(t.prev_time, t.user, t.next_time)?;
        let v = model.fuse_translation(t.prev_time, t.user, t.next_time);
        orthogonality_penalty(&w, &v, model.hyper.epsilon)
    };
    Ok(LossBreakdown::new(hinge, soft, model.hyper.soft_c))
}

/// Mean loss over a batch.
pub fn batch_loss(model: &Model, batch: &[TrainingExample]) -> Result<LossBreakdown> {
    let mut acc = LossBreakdown::default();
    for ex in batch {
        acc.add(loss(model, ex)?);
    }
    Ok(acc.scaled(1.0 / batch.len().max(1) as f64))
}

/// Gradient of a loss with respect to every tensor. Embedding rows are kept
/// sparse; the fusion layers are dense.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub user_emb: BTreeMap<usize, Vec<f64>>,
    pub poi_emb: BTreeMap<usize, Vec<f64>>,
    pub month_emb: BTreeMap<usize, Vec<f64>>,
    pub weekday_emb: BTreeMap<usize, Vec<f64>>,
    pub hour_emb: BTreeMap<usize, Vec<f64>>,
    pub g_weight: Table,
    pub g_bias: Vec<f64>,
    pub h_weight: Table,
    pub h_bias: Vec<f64>,
    fusion_touched: bool,
}

impl Gradients {
    pub fn zeros(dim: usize) -> Self {
        Self {
            user_emb: BTreeMap::new(),
            poi_emb: BTreeMap::new(),
            month_emb: BTreeMap::new(),
            weekday_emb: BTreeMap::new(),
            hour_emb: BTreeMap::new(),
            g_weight: Table::zeros(dim, 3 * dim),
            g_bias: vec![0.0; dim],
            h_weight: Table::zeros(dim, 3 * dim),
            h_bias: vec![0.0; dim],
            fusion_touched: false,
        }
    }

    /// Dense copy in [`crate::model::TENSOR_NAMES`] order.
    pub fn to_dense(&self, params: &ModelParams) -> [Vec<f64>; 9] {
        let d = params.dim();
        let dense = |rows: usize, sparse: &BTreeMap<usize, Vec<f64>>| {
            let mut out = vec![0.0; rows * d];
            for (&r, g) in sparse {
                out[r * d..(r + 1) * d].copy_from_slice(g);
            }
            out
        };
        [
            dense(params.n_users(), &self.user_emb),
            dense(params.n_pois(), &self.poi_emb),
            dense(params.month_emb.rows(), &self.month_emb),
            dense(params.weekday_emb.rows(), &self.weekday_emb),
            dense(params.hour_emb.rows(), &self.hour_emb),
            self.g_weight.as_slice().to_vec(),
            self.g_bias.clone(),
            self.h_weight.as_slice().to_vec(),
            self.h_bias.clone(),
        ]
    }

    fn all_finite(&self) -> bool {
        let sparse_ok = [
            &self.user_emb,
            &self.poi_emb,
            &self.month_emb,
            &self.weekday_emb,
            &self.hour_emb,
        ]
        .iter()
        .all(|m| m.values().flatten().all(|v| v.is_finite()));
        sparse_ok
            && self.g_weight.all_finite()
            && self.h_weight.all_finite()
            && self
                .g_bias
                .iter()
                .chain(&self.h_bias)
                .all(|v| v.is_finite())
    }
}

fn add_row(map: &mut BTreeMap<usize, Vec<f64>>, row: usize, alpha: f64, g: &[f64]) {
    let slot = map.entry(row).or_insert_with(|| vec![0.0; g.len()]);
    axpy(alpha, g, slot);
}

fn add_time_rows(grads: &mut Gradients, t: TimeKey, g: &[f64]) {
    add_row(&mut grads.month_emb, usize::from(t.month) - 1, 1.0, g);
    add_row(&mut grads.weekday_emb, usize::from(t.weekday), 1.0, g);
    add_row(&mut grads.hour_emb, usize::from(t.hour), 1.0, g);
}

/// Residual `z = a_perp + v` of a triplet with `a = p_i - p_j`.
fn residual(a: &[f64], v: &[f64], w: Option<&[f64]>) -> Vec<f64> {
    let mut z = a.to_vec();
    if let Some(w) = w {
        axpy(-dot(w, a), w, &mut z);
    }
    axpy(1.0, v, &mut z);
    z
}

fn difference(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Adds `scale * d(loss)/d(params)` of one example to `grads`.
fn accumulate_example(
    model: &Model,
    ex: &TrainingExample,
    scale: f64,
    grads: &mut Gradients,
) -> Result<LossBreakdown> {
    let params = &model.params;
    let hyper = &model.hyper;
    let d = params.dim();
    let t = &ex.positive;
    let p_i = params.poi_emb.row(t.prev_poi);

    // Forward.
    let (x, v, w, r_norm) = if hyper.baseline_mode {
        (Vec::new(), params.user_emb.row(t.user).to_vec(), None, 1.0)
    } else {
        let x = params.fusion_input(t.prev_time, t.user, t.next_time);
        let v = params.translation_affine(&x);
        let r = params.normal_affine(&x);
        let n = dot(&r, &r).sqrt();
        if n.is_nan() || n <= DEGENERATE_NORMAL_NORM {
            return Err(Error::DegenerateNormal(n));
        }
        let w: Vec<f64> = r.iter().map(|ri| ri / n).collect();
        (x, v, Some(w), n)
    };
    let w_ref = w.as_deref();

    let a_pos = difference(p_i, params.poi_emb.row(t.next_poi));
    let z_pos = residual(&a_pos, &v, w_ref);
    let f_pos = dot(&z_pos, &z_pos);

    let mut dv = vec![0.0; d];
    let mut dw = vec![0.0; d];
    let mut hinge = 0.0;

    // Accumulates sign * df/d(.) for a triplet with residual z and a = p_i - p_j.
    let mut backprop_score =
        |sign: f64, a: &[f64], z: &[f64], p_j: usize, grads: &mut Gradients| {
            let g: Vec<f64> = z.iter().map(|zk| 2.0 * zk).collect();
            axpy(sign, &g, &mut dv);
            let mut da = g.clone();
            if let Some(w) = w_ref {
                let wg = dot(w, &g);
                axpy(-wg, w, &mut da);
                let wa = dot(w, a);
                axpy(-sign * wg, a, &mut dw);
                axpy(-sign * wa, &g, &mut dw);
            }
            add_row(&mut grads.poi_emb, t.prev_poi, sign * scale, &da);
            add_row(&mut grads.poi_emb, p_j, -sign * scale, &da);
        };

    for &neg in &ex.negatives {
        let a_neg = difference(p_i, params.poi_emb.row(neg));
        let z_neg = residual(&a_neg, &v, w_ref);
        let f_neg = dot(&z_neg, &z_neg);
        let h = f_pos + hyper.margin - f_neg;
        if h > 0.0 {
            hinge += h;
            backprop_score(1.0, &a_pos, &z_pos, t.next_poi, grads);
            backprop_score(-1.0, &a_neg, &z_neg, neg, grads);
        }
    }

    let mut soft = 0.0;
    if let Some(w) = w_ref {
        let q = dot(&v, &v);
        if q > ZERO_TRANSLATION_SQ {
            let c = dot(w, &v);
            let s = c * c / q - hyper.epsilon * hyper.epsilon;
            if s > 0.0 {
                soft = s;
                let k = hyper.soft_c;
                axpy(k * 2.0 * c / q, &v, &mut dw);
                axpy(k * 2.0 * c / q, w, &mut dv);
                axpy(-k * 2.0 * c * c / (q * q), &v, &mut dv);
            }
        }
    }

    let active = dv.iter().chain(&dw).any(|g| *g != 0.0);
    if active {
        match w_ref {
            None => add_row(&mut grads.user_emb, t.user, scale, &dv),
            Some(w) => {
                // Through w = r / |r|.
                let wdw = dot(w, &dw);
                let mut dr = dw.clone();
                axpy(-wdw, w, &mut dr);
                dr.iter_mut().for_each(|g| *g /= r_norm);

                grads.g_weight.add_outer(scale, &dv, &x);
                axpy(scale, &dv, &mut grads.g_bias);
                grads.h_weight.add_outer(scale, &dr, &x);
                axpy(scale, &dr, &mut grads.h_bias);
                grads.fusion_touched = true;

                let mut dx = params.g_weight.matvec_t(&dv);
                axpy(1.0, &params.h_weight.matvec_t(&dr), &mut dx);
                dx.iter_mut().for_each(|g| *g *= scale);
                add_time_rows(grads, t.prev_time, &dx[..d]);
                add_row(&mut grads.user_emb, t.user, 1.0, &dx[d..2 * d]);
                add_time_rows(grads, t.next_time, &dx[2 * d..]);
            }
        }
    }
    Ok(LossBreakdown::new(hinge, soft, hyper.soft_c))
}

/// Gradient of the batch-mean loss, with the loss itself.
pub fn batch_gradient(
    model: &Model,
    batch: &[TrainingExample],
) -> Result<(Gradients, LossBreakdown)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grads = Gradients::zeros(model.params.dim());
    let mut acc = LossBreakdown::default();
    for ex in batch {
        acc.add(accumulate_example(model, ex, scale, &mut grads)?);
    }
    Ok((grads, acc.scaled(scale)))
}

fn apply_rows(table: &mut Table, rows: &BTreeMap<usize, Vec<f64>>, lr: f64, clamp: bool) {
    for (&r, g) in rows {
        let row = table.row_mut(r);
        axpy(-lr, g, row);
        if clamp {
            clamp_to_unit_ball(row);
        }
    }
}

/// One SGD step on the batch-mean loss. Returns the loss before the update.
/// Nothing is modified when the gradient is not finite.
pub fn grad_step(
    model: &mut Model,
    batch: &[TrainingExample],
    config: &TrainConfig,
) -> Result<LossBreakdown> {
    let (grads, loss) = batch_gradient(model, batch)?;
    if !grads.all_finite() || !loss.total.is_finite() {
        return Err(Error::NonFiniteGradient { epoch: 0, step: 0 });
    }
    let lr = config.learning_rate;
    let clamp = config.clamp_entities;
    let p = &mut model.params;
    apply_rows(&mut p.user_emb, &grads.user_emb, lr, clamp);
    apply_rows(&mut p.poi_emb, &grads.poi_emb, lr, clamp);
    apply_rows(&mut p.month_emb, &grads.month_emb, lr, false);
    apply_rows(&mut p.weekday_emb, &grads.weekday_emb, lr, false);
    apply_rows(&mut p.hour_emb, &grads.hour_emb, lr, false);
    if grads.fusion_touched {
        axpy(-lr, grads.g_weight.as_slice(), p.g_weight.as_mut_slice());
        axpy(-lr, &grads.g_bias, &mut p.g_bias);
        axpy(-lr, grads.h_weight.as_slice(), p.h_weight.as_mut_slice());
        axpy(-lr, &grads.h_bias, &mut p.h_bias);
    }
    Ok(loss)
}

/// A positive transition plus what negative sampling needs to know about it.
#[derive(Debug, Clone, Copy)]
struct Positive {
    triplet: Triplet,
    next_timestamp: i64,
}

/// Consecutive training transitions and, per user, the POIs visited at each
/// training timestamp.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    positives: Vec<Positive>,
    visits_at: Vec<HashMap<i64, Vec<usize>>>,
    n_pois: usize,
}

impl TrainingSet {
    pub fn from_split(split: &Split) -> Self {
        let corpus = split.corpus();
        let mut positives = Vec::new();
        let mut visits_at = vec![HashMap::new(); corpus.n_users()];
        for cut in split.users() {
            let seq = split.train(cut);
            for v in seq {
                let at: &mut Vec<usize> = visits_at[cut.user].entry(v.timestamp).or_default();
                if !at.contains(&v.poi) {
                    at.push(v.poi);
                }
            }
            for (i, j) in split.train_transitions(cut, Task::Next) {
                positives.push(Positive {
                    triplet: Triplet {
                        user: cut.user,
                        prev_poi: seq[i].poi,
                        prev_time: seq[i].time,
                        next_poi: seq[j].poi,
                        next_time: seq[j].time,
                    },
                    next_timestamp: seq[j].timestamp,
                });
            }
        }
        Self {
            positives,
            visits_at,
            n_pois: corpus.n_pois(),
        }
    }

    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }

    /// POIs the user visited at exactly `timestamp` in the training data.
    pub fn visits_at(&self, user: usize, timestamp: i64) -> &[usize] {
        self.visits_at[user]
            .get(&timestamp)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Example `index` with freshly sampled negatives.
    pub fn example<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        index: usize,
        neg_samples: usize,
    ) -> Result<TrainingExample> {
        let pos = self.positives[index];
        let t = pos.triplet;
        let negatives = sample_negatives(
            rng,
            self.n_pois,
            t.next_poi,
            self.visits_at(t.user, pos.next_timestamp),
            neg_samples,
        )?;
        Ok(TrainingExample {
            positive: t,
            negatives,
        })
    }
}

/// Mean losses of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_hinge: f64,
    pub mean_soft_constraint: f64,
    pub mean_total: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: Vec<EpochStats>,
}

/// Trains a fresh model on the consecutive transitions of the training split.
pub fn train(
    split: &Split,
    hyper: &HyperParams,
    config: &TrainConfig,
    progress: &mut dyn FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    hyper.validate()?;
    config.validate()?;
    let data = TrainingSet::from_split(split);
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let corpus = split.corpus();
    let params = init_params(corpus.n_users(), corpus.n_pois(), hyper, config)?;
    let mut model = Model::new(*hyper, params);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut sum = LossBreakdown::default();
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = chunk
                .iter()
                .map(|&i| data.example(&mut rng, i, config.neg_samples))
                .collect::<Result<Vec<_>>>()?;
            let loss = grad_step(&mut model, &batch, config).map_err(|e| match e {
                Error::NonFiniteGradient { .. } => Error::NonFiniteGradient { epoch, step },
                other => other,
            })?;
            sum.add(loss.scaled(batch.len() as f64));
        }
        let mean = sum.scaled(1.0 / data.len() as f64);
        let stats = EpochStats {
            epoch,
            mean_hinge: mean.hinge,
            mean_soft_constraint: mean.soft_constraint,
            mean_total: mean.total,
            seconds: started.elapsed().as_secs_f64(),
        };
        progress(&stats);
        history.push(stats);
    }
    Ok(TrainOutcome { model, history })
}
