//! Influence-weighted group ratings, top-k selection, and the recommender
//! strategy interface.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{CandidateSet, MemberId, Millis, RatingBook, RestaurantId};
use crate::leaderrank::{composite_matrix, leaderrank_scores, select_leader, InfluenceScores, LeaderRankParams};
use crate::matrix::PairMatrix;

pub const DEFAULT_TOP_K: usize = 3;

/// Everything a recommender sees for one recomputation.
#[derive(Debug, Clone, Copy)]
pub struct GroupContext<'a> {
    pub members: &'a [MemberId],
    pub ratings: &'a RatingBook,
    pub candidates: &'a CandidateSet,
    pub similarity: &'a PairMatrix,
    pub trust: &'a PairMatrix,
    pub k: usize,
    pub tick: Millis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRestaurant {
    pub restaurant: RestaurantId,
    pub rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationSnapshot {
    /// `proposed` or `baseline`.
    pub algorithm: String,
    pub tick: Millis,
    pub leader: Option<MemberId>,
    pub k: usize,
    pub ranked: Vec<RankedRestaurant>,
    /// Group rating of every candidate.
    pub group_ratings: BTreeMap<RestaurantId, f64>,
    /// Per-member weight the algorithm assigned (influence scores or leader
    /// sums, depending on the algorithm).
    pub member_scores: BTreeMap<MemberId, f64>,
    /// The pairwise matrix the algorithm ranked members on.
    pub matrix: Option<PairMatrix>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl RecommendationSnapshot {
    pub fn restaurants(&self) -> Vec<&RestaurantId> {
        self.ranked.iter().map(|r| &r.restaurant).collect()
    }
}

pub trait GroupRecommender: Send + Sync {
    /// Registry key, e.g. `leaderrank`.
    fn name(&self) -> &str;
    /// Snapshot tag, e.g. `proposed`.
    fn tag(&self) -> &str;
    fn recommend(&self, ctx: &GroupContext<'_>) -> RecommendationSnapshot;
}

/// `sum_u w(u) * rating(u, r)` with `w` the influence scores normalized to sum 1.
/// Unrated restaurants count as 0.
pub fn group_ratings(
    scores: &InfluenceScores,
    ratings: &RatingBook,
    candidates: &CandidateSet,
) -> BTreeMap<RestaurantId, f64> {
    let weights = scores.normalized();
    candidates
        .iter()
        .map(|r| {
            let total = scores
                .members
                .iter()
                .zip(&weights)
                .map(|(m, w)| w * ratings.effective(m, r))
                .sum();
            (r.clone(), total)
        })
        .collect()
}

/// Ratings that agree to this many decimal places are ordered by id.
const RANK_QUANTUM: f64 = 1e-9;

fn rank_key(rating: f64) -> i64 {
    (rating / RANK_QUANTUM).round() as i64
}

/// Highest `k` ratings, descending; equal ratings go to the smaller id.
pub fn top_k(ratings: &BTreeMap<RestaurantId, f64>, k: usize) -> Vec<RankedRestaurant> {
    let mut all: Vec<(&RestaurantId, f64)> = ratings.iter().map(|(r, v)| (r, *v)).collect();
    all.sort_by(|a, b| rank_key(b.1).cmp(&rank_key(a.1)).then_with(|| a.0.cmp(b.0)));
    all.into_iter()
        .take(k)
        .map(|(r, v)| RankedRestaurant {
            restaurant: r.clone(),
            rating: v,
        })
        .collect()
}

/// Composite similarity/trust graph, LeaderRank influence, weighted ratings.
#[derive(Debug, Clone, Default)]
pub struct LeaderRankRecommender {
    pub params: LeaderRankParams,
}

impl LeaderRankRecommender {
    pub fn new(params: LeaderRankParams) -> Self {
        Self { params }
    }

    pub fn influence(&self, ctx: &GroupContext<'_>) -> (PairMatrix, InfluenceScores) {
        let composite = composite_matrix(ctx.similarity, ctx.trust, self.params.lambda1, self.params.lambda2)
            .expect("similarity and trust share the member order");
        let scores = leaderrank_scores(&composite.matrix, &self.params);
        (composite.matrix, scores)
    }
}

impl GroupRecommender for LeaderRankRecommender {
    fn name(&self) -> &str {
        "leaderrank"
    }

    fn tag(&self) -> &str {
        "proposed"
    }

    fn recommend(&self, ctx: &GroupContext<'_>) -> RecommendationSnapshot {
        let (composite, scores) = self.influence(ctx);
        let ratings = group_ratings(&scores, ctx.ratings, ctx.candidates);
        let ranked = top_k(&ratings, ctx.k);
        let diagnostics = BTreeMap::from([
            ("ground".to_owned(), scores.ground),
            ("iterations".to_owned(), scores.iterations as f64),
            ("converged".to_owned(), if scores.converged { 1.0 } else { 0.0 }),
            ("mass_growth".to_owned(), scores.mass_growth),
        ]);
        RecommendationSnapshot {
            algorithm: self.tag().to_owned(),
            tick: ctx.tick,
            leader: select_leader(&scores),
            k: ctx.k,
            ranked,
            group_ratings: ratings,
            member_scores: scores.iter().map(|(m, s)| (m.clone(), s)).collect(),
            matrix: Some(composite),
            diagnostics,
        }
    }
}
