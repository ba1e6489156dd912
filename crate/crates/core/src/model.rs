//! Forward computation of the time-adaptive translation model.
//!
//! A transition `(p_i, t_i) -> (p_j, t_j)` of user `u` is modelled as a
//! translation on a hyperplane:
//!
//! ```text
//! x      = [time(t_i) ; v_u ; time(t_j)]          (3d)
//! v_ut   = G x + g                                 translation
//! w_ut   = normalize(H x + h)                      hyperplane normal
//! p_perp = p - (w_ut . p) w_ut
//! score  = || p_i_perp + v_ut - p_j_perp ||^2      low is plausible
//! ```
//!
//! where `time(t) = month[t.month] + weekday[t.weekday] + hour[t.hour]`.
//! With `baseline_mode` set, the model collapses to the time-blind
//! `|| p_i + v_u - p_j ||^2` (no fusion, no projection).

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ingest::TimeKey;
use crate::linalg::{axpy, dot, norm, Table};

pub const MONTHS: usize = 12;
pub const WEEKDAYS: usize = 7;
pub const HOURS: usize = 24;

/// Raw normal vectors at or below this norm cannot be normalized.
pub const DEGENERATE_NORMAL_NORM: f64 = 1e-12;
/// Allowed deviation from unit length for a hyperplane normal.
pub const UNIT_NORMAL_TOLERANCE: f64 = 1e-6;

/// How candidates are ordered at inference time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankMode {
    /// Descending `(p_i_perp + v_ut) . p_perp`.
    Inner,
    /// Ascending triplet score `|| p_i_perp + v_ut - p_perp ||^2`.
    NegL2,
}

impl FromStr for RankMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inner" => Ok(RankMode::Inner),
            "neg-l2" | "neg_l2" => Ok(RankMode::NegL2),
            other => Err(format!("unknown rank mode `{other}`")),
        }
    }
}

impl fmt::Display for RankMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankMode::Inner => "inner",
            RankMode::NegL2 => "neg-l2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub dim: usize,
    /// Hinge margin.
    pub margin: f64,
    /// Weight of the soft orthogonality penalty.
    pub soft_c: f64,
    /// Slack of the orthogonality constraint.
    pub epsilon: f64,
    pub rank_mode: RankMode,
    /// Time-blind ablation: translation is `v_u`, no projection.
    pub baseline_mode: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            dim: 100,
            margin: 1.0,
            soft_c: 1.0,
            epsilon: 0.001,
            rank_mode: RankMode::Inner,
            baseline_mode: false,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if self.dim < 1 {
            return bad("dim must be >= 1");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be > 0");
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return bad("margin must be >= 0");
        }
        if !(self.soft_c >= 0.0 && self.soft_c.is_finite()) {
            return bad("soft_c must be >= 0");
        }
        Ok(())
    }
}

/// Every learnable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub user_emb: Table,
    pub poi_emb: Table,
    pub month_emb: Table,
    pub weekday_emb: Table,
    pub hour_emb: Table,
    /// `d x 3d` translation fusion weights.
    pub g_weight: Table,
    pub g_bias: Vec<f64>,
    /// `d x 3d` normal fusion weights.
    pub h_weight: Table,
    pub h_bias: Vec<f64>,
}

/// Tensor names in archive and gradient-check order.
pub const TENSOR_NAMES: [&str; 9] = [
    "user_emb",
    "poi_emb",
    "month_emb",
    "weekday_emb",
    "hour_emb",
    "g_weight",
    "g_bias",
    "h_weight",
    "h_bias",
];

impl ModelParams {
    pub fn zeros(n_users: usize, n_pois: usize, dim: usize) -> Self {
        Self {
            user_emb: Table::zeros(n_users, dim),
            poi_emb: Table::zeros(n_pois, dim),
            month_emb: Table::zeros(MONTHS, dim),
            weekday_emb: Table::zeros(WEEKDAYS, dim),
            hour_emb: Table::zeros(HOURS, dim),
            g_weight: Table::zeros(dim, 3 * dim),
            g_bias: vec![0.0; dim],
            h_weight: Table::zeros(dim, 3 * dim),
            h_bias: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.g_bias.len()
    }

    pub fn n_users(&self) -> usize {
        self.user_emb.rows()
    }

    pub fn n_pois(&self) -> usize {
        self.poi_emb.rows()
    }

    /// `(name, rows, cols, values)` for all nine tensors, in [`TENSOR_NAMES`] order.
    pub fn tensors(&self) -> [(&'static str, usize, usize, &[f64]); 9] {
        let d = self.dim();
        [
            (
                "user_emb",
                self.user_emb.rows(),
                d,
                self.user_emb.as_slice(),
            ),
            ("poi_emb", self.poi_emb.rows(), d, self.poi_emb.as_slice()),
            ("month_emb", MONTHS, d, self.month_emb.as_slice()),
            ("weekday_emb", WEEKDAYS, d, self.weekday_emb.as_slice()),
            ("hour_emb", HOURS, d, self.hour_emb.as_slice()),
            ("g_weight", d, 3 * d, self.g_weight.as_slice()),
            ("g_bias", 1, d, &self.g_bias),
            ("h_weight", d, 3 * d, self.h_weight.as_slice()),
            ("h_bias", 1, d, &self.h_bias),
        ]
    }

    /// Mutable flat views of the nine tensors, in [`TENSOR_NAMES`] order.
    pub fn tensors_mut(&mut self) -> [&mut [f64]; 9] {
        [
            self.user_emb.as_mut_slice(),
            self.poi_emb.as_mut_slice(),
            self.month_emb.as_mut_slice(),
            self.weekday_emb.as_mut_slice(),
            self.hour_emb.as_mut_slice(),
            self.g_weight.as_mut_slice(),
            &mut self.g_bias,
            self.h_weight.as_mut_slice(),
            &mut self.h_bias,
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, _, _, v)| v.iter().all(|x| x.is_finite()))
    }

    /// `month[t.month] + weekday[t.weekday] + hour[t.hour]`.
    pub fn time_embedding(&self, t: TimeKey) -> Vec<f64> {
        let mut out = self.month_emb.row(usize::from(t.month) - 1).to_vec();
        axpy(1.0, self.weekday_emb.row(usize::from(t.weekday)), &mut out);
        axpy(1.0, self.hour_emb.row(usize::from(t.hour)), &mut out);
        out
    }

    /// The 3d fusion input `[time(t_i) ; v_u ; time(t_j)]`.
    pub fn fusion_input(&self, t_i: TimeKey, user: usize, t_j: TimeKey) -> Vec<f64> {
        let mut x = self.time_embedding(t_i);
        x.extend_from_slice(self.user_emb.row(user));
        x.extend(self.time_embedding(t_j));
        x
    }

    /// `G x + g` without the baseline shortcut.
    pub fn translation_affine(&self, x: &[f64]) -> Vec<f64> {
        let mut v = self.g_weight.matvec(x);
        axpy(1.0, &self.g_bias, &mut v);
        v
    }

    /// `H x + h` before normalization.
    pub fn normal_affine(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.h_weight.matvec(x);
        axpy(1.0, &self.h_bias, &mut r);
        r
    }
}

/// Scales `raw` to unit length.
pub fn normalize_normal(raw: &[f64]) -> Result<Vec<f64>> {
    let n = norm(raw);
    if n.is_nan() || n <= DEGENERATE_NORMAL_NORM {
        return Err(Error::DegenerateNormal(n));
    }
    Ok(raw.iter().map(|x| x / n).collect())
}

/// `v - (w . v) w` for a unit normal `w`.
pub fn project_to_hyperplane(v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let wn = norm(w);
    if (wn - 1.0).abs() > UNIT_NORMAL_TOLERANCE {
        return Err(Error::NonUnitNormal(wn));
    }
    Ok(project_unchecked(v, w))
}

fn project_unchecked(v: &[f64], w: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    axpy(-dot(w, v), w, &mut out);
    out
}

/// A golden or corrupted transition `{(p_i, t_i), u, (p_j, t_j)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub user: usize,
    pub prev_poi: usize,
    pub prev_time: TimeKey,
    pub next_poi: usize,
    pub next_time: TimeKey,
}

/// Hyperparameters plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub hyper: HyperParams,
    pub params: ModelParams,
}

/// Everything about a `(u, t_i, p_i, t_j)` query that does not depend on
/// the candidate.
#[derive(Debug, Clone)]
pub struct QueryContext {
    pub translation: Vec<f64>,
    /// `None` in baseline mode.
    pub normal: Option<Vec<f64>>,
    /// `p_i_perp + v_ut`.
    pub query: Vec<f64>,
}

impl QueryContext {
    fn project(&self, p: &[f64]) -> Vec<f64> {
        match &self.normal {
            Some(w) => project_unchecked(p, w),
            None => p.to_vec(),
        }
    }

    /// Candidate score in `mode`'s own units: the inner product for
    /// [`RankMode::Inner`], the squared residual for [`RankMode::NegL2`].
    pub fn score(&self, candidate: &[f64], mode: RankMode) -> f64 {
        let p = self.project(candidate);
        match mode {
            RankMode::Inner => dot(&self.query, &p),
            RankMode::NegL2 => self
                .query
                .iter()
                .zip(&p)
                .map(|(q, x)| (q - x) * (q - x))
                .sum(),
        }
    }
}

/// Ordering of two `(poi, score)` entries, best first, ties by index.
pub fn rank_order(mode: RankMode, a: (usize, f64), b: (usize, f64)) -> Ordering {
    let by_score = match mode {
        RankMode::Inner => b.1.total_cmp(&a.1),
        RankMode::NegL2 => a.1.total_cmp(&b.1),
    };
    by_score.then(a.0.cmp(&b.0))
}

impl Model {
    pub fn new(hyper: HyperParams, params: ModelParams) -> Self {
        Self { hyper, params }
    }

    fn check_user(&self, user: usize) -> Result<()> {
        if user >= self.params.n_users() {
            return Err(Error::InvalidArgument(format!(
                "user index {user} out of range"
            )));
        }
        Ok(())
    }

    fn check_poi(&self, poi: usize) -> Result<()> {
        if poi >= self.params.n_pois() {
            return Err(Error::InvalidArgument(format!(
                "poi index {poi} out of range"
            )));
        }
        Ok(())
    }

    pub fn time_embedding(&self, t: TimeKey) -> Vec<f64> {
        self.params.time_embedding(t)
    }

    /// Translation vector `v_ut`; `v_u` itself in baseline mode.
    pub fn fuse_translation(&self, t_i: TimeKey, user: usize, t_j: TimeKey) -> Vec<f64> {
        if self.hyper.baseline_mode {
            return self.params.user_emb.row(user).to_vec();
        }
        let x = self.params.fusion_input(t_i, user, t_j);
        self.params.translation_affine(&x)
    }

    /// Unit hyperplane normal `w_ut`.
    pub fn fuse_normal(&self, t_i: TimeKey, user: usize, t_j: TimeKey) -> Result<Vec<f64>> {
        let x = self.params.fusion_input(t_i, user, t_j);
        normalize_normal(&self.params.normal_affine(&x))
    }

    pub fn query(
        &self,
        user: usize,
        t_i: TimeKey,
        prev_poi: usize,
        t_j: TimeKey,
    ) -> Result<QueryContext> {
        self.check_user(user)?;
        self.check_poi(prev_poi)?;
        let p_i = self.params.poi_emb.row(prev_poi);
        if self.hyper.baseline_mode {
            let translation = self.params.user_emb.row(user).to_vec();
            let mut query = p_i.to_vec();
            axpy(1.0, &translation, &mut query);
            return Ok(QueryContext {
                translation,
                normal: None,
                query,
            });
        }
        let x = self.params.fusion_input(t_i, user, t_j);
        let translation = self.params.translation_affine(&x);
        let normal = normalize_normal(&self.params.normal_affine(&x))?;
        let mut query = project_unchecked(p_i, &normal);
        axpy(1.0, &translation, &mut query);
        Ok(QueryContext {
            translation,
            normal: Some(normal),
            query,
        })
    }

    /// `|| p_i_perp + v_ut - p_j_perp ||^2`.
    pub fn score_triplet(&self, trip: &Triplet) -> Result<f64> {
        self.check_poi(trip.next_poi)?;
        let ctx = self.query(trip.user, trip.prev_time, trip.prev_poi, trip.next_time)?;
        Ok(ctx.score(self.params.poi_emb.row(trip.next_poi), RankMode::NegL2))
    }

    /// Candidates with their scores, best first; equal scores keep index order.
    pub fn rank_candidates(
        &self,
        user: usize,
        t_i: TimeKey,
        prev_poi: usize,
        t_j: TimeKey,
        candidates: &[usize],
        mode: RankMode,
    ) -> Result<Vec<(usize, f64)>> {
        if candidates.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        for &c in candidates {
            self.check_poi(c)?;
        }
        let ctx = self.query(user, t_i, prev_poi, t_j)?;
        let mut scored: Vec<(usize, f64)> = candidates
            .iter()
            .map(|&p| (p, ctx.score(self.params.poi_emb.row(p), mode)))
            .collect();
        scored.sort_by(|&a, &b| rank_order(mode, a, b));
        Ok(scored)
    }

    /// Scores of every POI, indexed by POI.
    pub fn score_all(&self, ctx: &QueryContext, mode: RankMode) -> Vec<f64> {
        self.params
            .poi_emb
            .iter_rows()
            .map(|p| ctx.score(p, mode))
            .collect()
    }

    /// 1-based rank of `target` in the full-vocabulary ranking of `ctx`.
    pub fn rank_of(&self, ctx: &QueryContext, target: usize, mode: RankMode) -> usize {
        let scores = self.score_all(ctx, mode);
        rank_in_scores(&scores, target, mode)
    }
}

/// 1-based position of `target` when `scores` (indexed by POI) are sorted
/// with [`rank_order`].
pub fn rank_in_scores(scores: &[f64], target: usize, mode: RankMode) -> usize {
    let t = (target, scores[target]);
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(p, &s)| rank_order(mode, (p, s), t) == Ordering::Less)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tk(month: u8, weekday: u8, hour: u8) -> TimeKey {
        TimeKey::new(month, weekday, hour).unwrap()
    }

    fn tiny_model(d: usize, n_users: usize, n_pois: usize) -> Model {
        let mut params = ModelParams::zeros(n_users, n_pois, d);
        params.h_bias[0] = 1.0;
        Model::new(
            HyperParams {
                dim: d,
                ..HyperParams::default()
            },
            params,
        )
    }

    #[test]
    fn time_embedding_sums_rows() {
        let mut m = tiny_model(2, 1, 1);
        assert_eq!(m.time_embedding(tk(3, 2, 5)), vec![0.0, 0.0]);
        m.params.month_emb.row_mut(2).copy_from_slice(&[1.5, -2.0]);
        assert_eq!(m.time_embedding(tk(3, 2, 5)), vec![1.5, -2.0]);
        m.params
            .weekday_emb
            .row_mut(2)
            .copy_from_slice(&[0.25, 1.0]);
        m.params.hour_emb.row_mut(5).copy_from_slice(&[-1.0, 4.0]);
        // (1.5 + 0.25 - 1.0, -2.0 + 1.0 + 4.0)
        assert_eq!(m.time_embedding(tk(3, 2, 5)), vec![0.75, 3.0]);
    }

    #[test]
    fn zero_weight_translation_is_bias() {
        let mut m = tiny_model(2, 1, 1);
        m.params.g_bias = vec![0.3, -0.7];
        m.params.user_emb.row_mut(0).copy_from_slice(&[5.0, 6.0]);
        assert_eq!(
            m.fuse_translation(tk(1, 0, 0), 0, tk(2, 1, 1)),
            vec![0.3, -0.7]
        );
    }

    #[test]
    fn block_identity_translation_is_user() {
        let d = 3;
        let mut m = tiny_model(d, 2, 1);
        for k in 0..d {
            m.params.g_weight.row_mut(k)[d + k] = 1.0;
        }
        m.params
            .user_emb
            .row_mut(1)
            .copy_from_slice(&[0.1, -0.2, 0.3]);
        m.params
            .month_emb
            .row_mut(0)
            .copy_from_slice(&[9.0, 9.0, 9.0]);
        assert_eq!(
            m.fuse_translation(tk(1, 0, 0), 1, tk(1, 0, 0)),
            vec![0.1, -0.2, 0.3]
        );
    }

    #[test]
    fn translation_matches_explicit_matvec() {
        let mut m = tiny_model(2, 1, 1);
        let w = [
            0.5, -1.0, 2.0, 0.0, 1.0, 3.0, -0.5, 0.25, 1.0, 1.0, -2.0, 0.5,
        ];
        m.params.g_weight.as_mut_slice().copy_from_slice(&w);
        m.params.g_bias = vec![0.1, 0.2];
        m.params.hour_emb.row_mut(4).copy_from_slice(&[1.0, 2.0]);
        m.params.user_emb.row_mut(0).copy_from_slice(&[3.0, -1.0]);
        m.params
            .weekday_emb
            .row_mut(6)
            .copy_from_slice(&[-2.0, 0.5]);
        let x = [1.0, 2.0, 3.0, -1.0, -2.0, 0.5];
        let mut expected = [0.1, 0.2];
        for r in 0..2 {
            for c in 0..6 {
                expected[r] += w[r * 6 + c] * x[c];
            }
        }
        let got = m.fuse_translation(tk(1, 0, 4), 0, tk(1, 6, 0));
        assert!((got[0] - expected[0]).abs() < 1e-12);
        assert!((got[1] - expected[1]).abs() < 1e-12);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_normal(&[3.0, 4.0]).unwrap(), vec![0.6, 0.8]);
        assert_eq!(normalize_normal(&[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        assert!(matches!(
            normalize_normal(&[0.0, 0.0, 0.0]),
            Err(Error::DegenerateNormal(_))
        ));
    }

    #[test]
    fn projection_cases() {
        let w = [1.0, 0.0, 0.0];
        assert_eq!(
            project_to_hyperplane(&[3.0, 4.0, 0.0], &w).unwrap(),
            vec![0.0, 4.0, 0.0]
        );
        assert_eq!(
            project_to_hyperplane(&[0.0, 4.0, -1.0], &w).unwrap(),
            vec![0.0, 4.0, -1.0]
        );
        assert_eq!(
            project_to_hyperplane(&[2.0, 0.0, 0.0], &w).unwrap(),
            vec![0.0, 0.0, 0.0]
        );
        assert!(matches!(
            project_to_hyperplane(&[1.0, 1.0, 1.0], &[1.0, 1.0, 0.0]),
            Err(Error::NonUnitNormal(_))
        ));
    }

    /// d=2 instance: normal along x, translation (0,1).
    fn hand_instance() -> Model {
        let mut m = tiny_model(2, 1, 3);
        m.params.poi_emb.row_mut(0).copy_from_slice(&[1.0, 0.0]);
        m.params.poi_emb.row_mut(1).copy_from_slice(&[0.0, 0.0]);
        m.params.g_bias = vec![0.0, 1.0];
        m.params.h_bias = vec![1.0, 0.0];
        m
    }

    #[test]
    fn hand_score() {
        let m = hand_instance();
        let trip = Triplet {
            user: 0,
            prev_poi: 0,
            prev_time: tk(1, 0, 0),
            next_poi: 1,
            next_time: tk(1, 0, 0),
        };
        assert_eq!(m.score_triplet(&trip).unwrap(), 1.0);
    }

    #[test]
    fn golden_triplet_scores_zero() {
        let mut m = hand_instance();
        // p_j = p_i_perp + v_ut = (0, 1)
        m.params.poi_emb.row_mut(2).copy_from_slice(&[0.0, 1.0]);
        let trip = Triplet {
            user: 0,
            prev_poi: 0,
            prev_time: tk(1, 0, 0),
            next_poi: 2,
            next_time: tk(1, 0, 0),
        };
        assert_eq!(m.score_triplet(&trip).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_normal_propagates() {
        let mut m = hand_instance();
        m.params.h_bias = vec![0.0, 0.0];
        let trip = Triplet {
            user: 0,
            prev_poi: 0,
            prev_time: tk(1, 0, 0),
            next_poi: 1,
            next_time: tk(1, 0, 0),
        };
        assert!(matches!(
            m.score_triplet(&trip),
            Err(Error::DegenerateNormal(_))
        ));
    }

    #[test]
    fn ranking_by_inner_product() {
        let mut m = hand_instance();
        // query = (0,0) + (0,1) = (0,1); projections drop the x component.
        m.params.poi_emb.row_mut(1).copy_from_slice(&[5.0, 2.0]);
        m.params.poi_emb.row_mut(2).copy_from_slice(&[-3.0, -1.0]);
        let t = tk(1, 0, 0);
        let ranked = m
            .rank_candidates(0, t, 0, t, &[2, 1], RankMode::Inner)
            .unwrap();
        assert_eq!(ranked, vec![(1, 2.0), (2, -1.0)]);
    }

    #[test]
    fn ranking_edge_cases() {
        let m = hand_instance();
        let t = tk(1, 0, 0);
        let single = m
            .rank_candidates(0, t, 0, t, &[1], RankMode::Inner)
            .unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].0, 1);
        assert!(matches!(
            m.rank_candidates(0, t, 0, t, &[], RankMode::Inner),
            Err(Error::EmptyCandidates)
        ));
        assert!(m
            .rank_candidates(0, t, 0, t, &[7], RankMode::Inner)
            .is_err());
    }

    #[test]
    fn ties_broken_by_index() {
        let mut m = hand_instance();
        m.params.poi_emb.row_mut(1).copy_from_slice(&[0.5, 0.5]);
        m.params.poi_emb.row_mut(2).copy_from_slice(&[0.5, 0.5]);
        let t = tk(1, 0, 0);
        for mode in [RankMode::Inner, RankMode::NegL2] {
            let ranked = m.rank_candidates(0, t, 0, t, &[2, 1], mode).unwrap();
            assert_eq!(ranked[0].0, 1);
            assert_eq!(ranked[1].0, 2);
            let ctx = m.query(0, t, 0, t).unwrap();
            assert_eq!(m.rank_of(&ctx, 1, mode) + 1, m.rank_of(&ctx, 2, mode));
        }
    }

    #[test]
    fn baseline_score_is_plain_translation() {
        let mut m = hand_instance();
        m.hyper.baseline_mode = true;
        m.params.user_emb.row_mut(0).copy_from_slice(&[0.5, 0.5]);
        m.params.poi_emb.row_mut(2).copy_from_slice(&[2.0, 2.0]);
        let trip = Triplet {
            user: 0,
            prev_poi: 0,
            prev_time: tk(1, 0, 0),
            next_poi: 2,
            next_time: tk(1, 0, 0),
        };
        // (1,0) + (0.5,0.5) - (2,2) = (-0.5,-1.5)
        assert_eq!(m.score_triplet(&trip).unwrap(), 2.5);
    }

    #[test]
    fn hyper_validation() {
        assert!(HyperParams::default().validate().is_ok());
        let bad = [
            HyperParams {
                dim: 0,
                ..Default::default()
            },
            HyperParams {
                epsilon: 0.0,
                ..Default::default()
            },
            HyperParams {
                margin: -1.0,
                ..Default::default()
            },
            HyperParams {
                soft_c: f64::NAN,
                ..Default::default()
            },
        ];
        for h in bad {
            assert!(h.validate().is_err());
        }
    }
}
