//! Influence-based group recommendation baseline.
//!
//! Pairwise trust is the harmonic mean of partnership (co-rating overlap) and
//! distance (closeness of co-ratings); similarity is Pearson correlation. The
//! influence of `v` on `u` is the harmonic mean of the trust and similarity
//! `u` has towards `v`. Each member's ratings are blended with the others'
//! ratings under those influence weights, the leader's weight is multiplied by
//! the leader impact factor, and the group rating is the mean of the blended
//! ratings.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain::{CandidateSet, MemberId, Millis, RatingBook, RestaurantId};
use crate::matrix::PairMatrix;
use crate::recommender::{top_k, GroupContext, GroupRecommender, RecommendationSnapshot};
use crate::similarity::{pcc, similarity_matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IbgrParams {
    /// Multiplier on the leader's influence weight, at least 1.
    pub leader_impact: f64,
}

impl Default for IbgrParams {
    fn default() -> Self {
        Self { leader_impact: 1.5 }
    }
}

/// `|I_u ∩ I_v| / |I_u|`; 0 when `u` rated nothing.
pub fn partnership_sets<T: Ord>(items_u: &BTreeSet<T>, items_v: &BTreeSet<T>) -> f64 {
    if items_u.is_empty() {
        return 0.0;
    }
    items_u.intersection(items_v).count() as f64 / items_u.len() as f64
}

pub fn partnership(u: &MemberId, v: &MemberId, ratings: &RatingBook) -> f64 {
    let items = |m: &MemberId| {
        ratings
            .of(m)
            .map(|(r, _)| r.clone())
            .collect::<BTreeSet<RestaurantId>>()
    };
    partnership_sets(&items(u), &items(v))
}

/// `1 / (1 + sqrt(sum (r_u - r_v)^2))` over co-rated pairs; 1 for no overlap.
pub fn distance_pairs(co_rated: &[(f64, f64)]) -> f64 {
    let sq: f64 = co_rated.iter().map(|(a, b)| (a - b).powi(2)).sum();
    1.0 / (1.0 + sq.sqrt())
}

pub fn distance(u: &MemberId, v: &MemberId, ratings: &RatingBook) -> f64 {
    distance_pairs(&ratings.co_rated(u, v))
}

/// `2ab / (a + b)`, or 0 unless both inputs are positive.
pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

pub fn ibgr_trust(partnership: f64, distance: f64) -> f64 {
    harmonic_mean(partnership, distance)
}

pub fn ibgr_similarity(u: &MemberId, v: &MemberId, ratings: &RatingBook) -> f64 {
    pcc(u, v, ratings)
}

/// Harmonic mean of trust and similarity; non-positive inputs give 0.
pub fn influence_weight(trust: f64, similarity: f64) -> f64 {
    harmonic_mean(trust, similarity)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbgrModel {
    /// `trust[u][v]`: trust `u` places in `v`.
    pub trust: PairMatrix,
    pub similarity: PairMatrix,
    /// `influence[v][u]`: influence of `v` on `u`.
    pub influence: PairMatrix,
    /// Trust plus similarity each member receives from the others.
    pub leader_scores: BTreeMap<MemberId, f64>,
    pub leader: Option<MemberId>,
}

impl IbgrModel {
    pub fn build(members: &[MemberId], ratings: &RatingBook) -> Self {
        let trust = PairMatrix::from_fn(members.iter().cloned(), |u, v| {
            ibgr_trust(partnership(u, v, ratings), distance(u, v, ratings))
        });
        let similarity = similarity_matrix(members, ratings);
        let n = trust.len();
        let mut influence = PairMatrix::zeros(members.iter().cloned());
        for v in 0..n {
            for u in 0..n {
                if u != v {
                    influence.set(v, u, influence_weight(trust.get(u, v), similarity.get(u, v)));
                }
            }
        }
        let leader_scores: BTreeMap<MemberId, f64> = trust
            .members()
            .iter()
            .enumerate()
            .map(|(u, m)| {
                let received = (0..n)
                    .filter(|v| *v != u)
                    .map(|v| trust.get(v, u) + similarity.get(v, u))
                    .sum();
                (m.clone(), received)
            })
            .collect();
        let leader = argmax(&leader_scores);
        Self {
            trust,
            similarity,
            influence,
            leader_scores,
            leader,
        }
    }

    /// Blended rating of every member for every candidate. `leader` (if any)
    /// has its influence on the others multiplied by `leader_impact`.
    pub fn adjusted_ratings(
        &self,
        ratings: &RatingBook,
        candidates: &CandidateSet,
        leader: Option<&MemberId>,
        leader_impact: f64,
    ) -> BTreeMap<MemberId, BTreeMap<RestaurantId, f64>> {
        let members = self.influence.members();
        let leader_idx = leader.and_then(|l| self.influence.index_of(l));
        members
            .iter()
            .enumerate()
            .map(|(u, mu)| {
                let weights: Vec<(usize, f64)> = (0..members.len())
                    .filter(|v| *v != u)
                    .map(|v| {
                        let w = self.influence.get(v, u).max(0.0);
                        (v, if Some(v) == leader_idx { w * leader_impact } else { w })
                    })
                    .collect();
                let total: f64 = 1.0 + weights.iter().map(|(_, w)| w).sum::<f64>();
                let row = candidates
                    .iter()
                    .map(|r| {
                        let mut sum = ratings.effective(mu, r);
                        for (v, w) in &weights {
                            sum += w * ratings.effective(&members[*v], r);
                        }
                        (r.clone(), sum / total)
                    })
                    .collect();
                (mu.clone(), row)
            })
            .collect()
    }

    /// Mean adjusted rating per candidate.
    pub fn group_ratings(
        &self,
        ratings: &RatingBook,
        candidates: &CandidateSet,
        leader: Option<&MemberId>,
        leader_impact: f64,
    ) -> BTreeMap<RestaurantId, f64> {
        let adjusted = self.adjusted_ratings(ratings, candidates, leader, leader_impact);
        let n = adjusted.len().max(1) as f64;
        candidates
            .iter()
            .map(|r| (r.clone(), adjusted.values().map(|row| row[r]).sum::<f64>() / n))
            .collect()
    }
}

fn argmax(scores: &BTreeMap<MemberId, f64>) -> Option<MemberId> {
    let max = scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let floor = max - crate::leaderrank::TIE_TOLERANCE * max.abs().max(1.0);
    scores.iter().find(|(_, s)| **s >= floor).map(|(m, _)| m.clone())
}

pub fn ibgr_group_recommend(
    members: &[MemberId],
    ratings: &RatingBook,
    candidates: &CandidateSet,
    params: &IbgrParams,
    k: usize,
    tick: Millis,
) -> RecommendationSnapshot {
    let model = IbgrModel::build(members, ratings);
    let group = model.group_ratings(ratings, candidates, model.leader.as_ref(), params.leader_impact);
    let ranked = top_k(&group, k);
    RecommendationSnapshot {
        algorithm: "baseline".to_owned(),
        tick,
        leader: model.leader.clone(),
        k,
        ranked,
        group_ratings: group,
        member_scores: model.leader_scores.clone(),
        matrix: Some(model.influence),
        diagnostics: BTreeMap::from([("leader_impact".to_owned(), params.leader_impact)]),
    }
}

#[derive(Debug, Clone, Default)]
pub struct IbgrRecommender {
    pub params: IbgrParams,
}

impl IbgrRecommender {
    pub fn new(params: IbgrParams) -> Self {
        Self { params }
    }
}

impl GroupRecommender for IbgrRecommender {
    fn name(&self) -> &str {
        "ibgr"
    }

    fn tag(&self) -> &str {
        "baseline"
    }

    fn recommend(&self, ctx: &GroupContext<'_>) -> RecommendationSnapshot {
        ibgr_group_recommend(ctx.members, ctx.ratings, ctx.candidates, &self.params, ctx.k, ctx.tick)
    }
}
