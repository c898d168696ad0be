//! One recomputation: similarity and trust matrices, then every recommender.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain::{CandidateSet, GroupId, MemberId, Millis, Phase, PhaseReason, RatingBook, RestaurantId};
use crate::matrix::PairMatrix;
use crate::recommender::{GroupContext, RecommendationSnapshot};
use crate::registry::Strategies;
use crate::similarity::similarity_matrix;
use crate::termination::EntropyTick;
use crate::trust::{trust_matrix, DirectedMessageLedger, TrustInputs, TrustParams};

/// Inputs of one recomputation, borrowed from the session state.
#[derive(Debug, Clone, Copy)]
pub struct PipelineInput<'a> {
    pub members: &'a [MemberId],
    pub ratings: &'a RatingBook,
    pub candidates: &'a CandidateSet,
    pub ledger: &'a DirectedMessageLedger,
    pub trust_params: &'a TrustParams,
    pub t_now: Millis,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub similarity: PairMatrix,
    pub trust: PairMatrix,
    /// Keyed by algorithm tag.
    pub recommendations: BTreeMap<String, RecommendationSnapshot>,
}

impl PipelineOutput {
    pub fn empty() -> Self {
        Self {
            similarity: PairMatrix::empty(),
            trust: PairMatrix::empty(),
            recommendations: BTreeMap::new(),
        }
    }
}

/// Matrices and recommendations; empty when fewer than two members.
pub fn run_pipeline(input: &PipelineInput<'_>, strategies: &Strategies) -> PipelineOutput {
    if input.members.len() < 2 {
        return PipelineOutput::empty();
    }
    let similarity = similarity_matrix(input.members, input.ratings);
    let trust = trust_matrix(
        input.members,
        &TrustInputs {
            ledger: input.ledger,
            ratings: input.ratings,
            group_size: input.members.len(),
            t_now: input.t_now,
            params: input.trust_params,
        },
    );
    let ctx = GroupContext {
        members: input.members,
        ratings: input.ratings,
        candidates: input.candidates,
        similarity: &similarity,
        trust: &trust,
        k: input.k,
        tick: input.t_now,
    };
    let recommendations = strategies
        .recommenders()
        .into_iter()
        .map(|r| {
            let mut snap = r.recommend(&ctx);
            snap.algorithm = r.tag().to_owned();
            (r.tag().to_owned(), snap)
        })
        .collect();
    PipelineOutput {
        similarity,
        trust,
        recommendations,
    }
}

/// Derived view of a session as of one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub group: Option<GroupId>,
    /// Last event folded into this view.
    pub seq: Option<u64>,
    /// Session time the view was computed at.
    pub at: Millis,
    pub phase: Phase,
    /// Why the discussion ended, once it has.
    pub ended_by: Option<PhaseReason>,
    pub members: Vec<MemberId>,
    pub candidates: Vec<RestaurantId>,
    pub similarity: PairMatrix,
    pub trust: PairMatrix,
    pub recommendations: BTreeMap<String, RecommendationSnapshot>,
    pub entropy: Vec<EntropyTick>,
}

impl Snapshot {
    pub fn empty() -> Self {
        Self {
            group: None,
            seq: None,
            at: 0,
            phase: Phase::Lobby,
            ended_by: None,
            members: Vec::new(),
            candidates: Vec::new(),
            similarity: PairMatrix::empty(),
            trust: PairMatrix::empty(),
            recommendations: BTreeMap::new(),
            entropy: Vec::new(),
        }
    }

    pub fn leader(&self, tag: &str) -> Option<&MemberId> {
        self.recommendations.get(tag)?.leader.as_ref()
    }

    pub fn top(&self, tag: &str) -> Vec<RestaurantId> {
        self.recommendations
            .get(tag)
            .map(|r| r.ranked.iter().map(|x| x.restaurant.clone()).collect())
            .unwrap_or_default()
    }
}

/// One recomputation, reduced to what the side-by-side comparison needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub seq: u64,
    pub at: Millis,
    pub phase: Phase,
    pub proposed_leader: Option<MemberId>,
    pub baseline_leader: Option<MemberId>,
    pub proposed_top: Vec<RestaurantId>,
    pub baseline_top: Vec<RestaurantId>,
    pub top_overlap: usize,
    /// Kendall tau between the two group-rating orders; `None` under two candidates.
    pub rank_correlation: Option<f64>,
}

impl TraceRow {
    pub fn from_snapshot(s: &Snapshot) -> Self {
        let proposed_top = s.top("proposed");
        let baseline_top = s.top("baseline");
        let overlap = proposed_top
            .iter()
            .collect::<BTreeSet<_>>()
            .intersection(&baseline_top.iter().collect())
            .count();
        let rank_correlation = match (s.recommendations.get("proposed"), s.recommendations.get("baseline")) {
            (Some(p), Some(b)) => kendall_tau(&p.group_ratings, &b.group_ratings),
            _ => None,
        };
        Self {
            seq: s.seq.unwrap_or(0),
            at: s.at,
            phase: s.phase,
            proposed_leader: s.leader("proposed").cloned(),
            baseline_leader: s.leader("baseline").cloned(),
            proposed_top,
            baseline_top,
            top_overlap: overlap,
            rank_correlation,
        }
    }
}

/// Kendall tau-a over the keys both maps share. Pairs tied in either map
/// count as neither concordant nor discordant.
pub fn kendall_tau(a: &BTreeMap<RestaurantId, f64>, b: &BTreeMap<RestaurantId, f64>) -> Option<f64> {
    let shared: Vec<(f64, f64)> = a.iter().filter_map(|(k, x)| b.get(k).map(|y| (*x, *y))).collect();
    let n = shared.len();
    if n < 2 {
        return None;
    }
    let mut score = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let dx = shared[i].0 - shared[j].0;
            let dy = shared[i].1 - shared[j].1;
            score += match (dx * dy).partial_cmp(&0.0) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    Some(score as f64 / (n * (n - 1) / 2) as f64)
}
