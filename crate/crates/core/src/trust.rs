//! Directed trust between members.
//!
//! `Trust(u, v)` is the trust `u` places in `v`. Chat trust blends how much of
//! the pair's traffic `u` directs at `v` with the tone of their exchanges, both
//! under exponential time decay. Save trust compares co-rated restaurants,
//! weighting each by how unusual the rating is for `u`. Every component is 0
//! when there is no evidence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ChatMessage, MemberId, Millis, RatingBook};
use crate::matrix::PairMatrix;
use crate::resolver::RecipientAssignment;
use crate::sentiment::SentimentScore;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrustError {
    #[error("message time {t_i} ms is after the evaluation time {t_now} ms")]
    FutureMessage { t_i: Millis, t_now: Millis },
    #[error("invalid trust parameters: {0}")]
    Params(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrustParams {
    /// Decay rate per second.
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Default for TrustParams {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            beta1: 0.5,
            beta2: 0.5,
            gamma1: 0.5,
            gamma2: 0.5,
        }
    }
}

impl TrustParams {
    pub fn validate(&self) -> Result<(), TrustError> {
        let bad = |m: &str| Err(TrustError::Params(m.to_owned()));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if (self.beta1 + self.beta2 - 1.0).abs() > 1e-9 {
            return bad("beta1 + beta2 must be 1");
        }
        if (self.gamma1 + self.gamma2 - 1.0).abs() > 1e-9 {
            return bad("gamma1 + gamma2 must be 1");
        }
        Ok(())
    }
}

/// `exp(-alpha * elapsed_seconds)`.
pub fn decay_weight(t_i: Millis, t_now: Millis, alpha: f64) -> Result<f64, TrustError> {
    if t_i > t_now {
        return Err(TrustError::FutureMessage { t_i, t_now });
    }
    Ok(decay(t_now - t_i, alpha))
}

fn decay(elapsed_ms: Millis, alpha: f64) -> f64 {
    (-alpha * elapsed_ms as f64 / 1000.0).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectedMessage {
    pub at: Millis,
    /// Share of the message addressed to the receiver, in [0, 1].
    pub weight: f64,
    pub sentiment: f64,
}

/// Directed messages per ordered (sender, receiver) pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DirectedMessageLedger {
    pairs: BTreeMap<(MemberId, MemberId), Vec<DirectedMessage>>,
}

impl DirectedMessageLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, message: &ChatMessage, assignment: &RecipientAssignment, sentiment: SentimentScore) {
        for (to, w) in &assignment.weights {
            if *w > 0.0 && *to != message.sender {
                self.pairs
                    .entry((message.sender.clone(), to.clone()))
                    .or_default()
                    .push(DirectedMessage {
                        at: message.at,
                        weight: *w,
                        sentiment: sentiment.compound(),
                    });
            }
        }
    }

    pub fn push(&mut self, from: &MemberId, to: &MemberId, message: DirectedMessage) {
        self.pairs.entry((from.clone(), to.clone())).or_default().push(message);
    }

    pub fn directed(&self, from: &MemberId, to: &MemberId) -> &[DirectedMessage] {
        self.pairs.get(&(from.clone(), to.clone())).map_or(&[], Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn decayed_mass(&self, from: &MemberId, to: &MemberId, t_now: Millis, alpha: f64) -> f64 {
        self.directed(from, to)
            .iter()
            .filter(|m| m.at <= t_now)
            .map(|m| m.weight * decay(t_now - m.at, alpha))
            .sum()
    }
}

/// Decayed share of the pair's traffic that `u` sends to `v`.
pub fn chat_frequency_trust(
    u: &MemberId,
    v: &MemberId,
    ledger: &DirectedMessageLedger,
    t_now: Millis,
    params: &TrustParams,
) -> f64 {
    let out = ledger.decayed_mass(u, v, t_now, params.alpha);
    let back = ledger.decayed_mass(v, u, t_now, params.alpha);
    if out + back == 0.0 {
        0.0
    } else {
        out / (out + back)
    }
}

/// Decay-weighted mean compound sentiment over messages in both directions.
pub fn chat_sentiment_trust(
    u: &MemberId,
    v: &MemberId,
    ledger: &DirectedMessageLedger,
    t_now: Millis,
    params: &TrustParams,
) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for m in ledger
        .directed(u, v)
        .iter()
        .chain(ledger.directed(v, u))
        .filter(|m| m.at <= t_now)
    {
        let w = m.weight * decay(t_now - m.at, params.alpha);
        num += w * m.sentiment;
        den += w;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn chat_trust(
    u: &MemberId,
    v: &MemberId,
    ledger: &DirectedMessageLedger,
    t_now: Millis,
    params: &TrustParams,
) -> f64 {
    params.beta1 * chat_frequency_trust(u, v, ledger, t_now, params)
        + params.beta2 * chat_sentiment_trust(u, v, ledger, t_now, params)
}

/// Mean and population standard deviation of a member's explicit ratings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingHabitStats {
    pub mean: f64,
    pub std_dev: f64,
    pub count: usize,
}

impl RatingHabitStats {
    pub fn of(member: &MemberId, ratings: &RatingBook) -> Self {
        let values: Vec<f64> = ratings.of(member).map(|(_, v)| f64::from(v)).collect();
        if values.is_empty() {
            return Self {
                mean: 0.0,
                std_dev: 0.0,
                count: 0,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std_dev: var.sqrt(),
            count: values.len(),
        }
    }

    /// `1 + |rating - mean| / std_dev`, or 1 when the spread is undefined.
    pub fn weight(&self, rating: f64) -> f64 {
        if self.count < 2 || self.std_dev == 0.0 {
            1.0
        } else {
            1.0 + (rating - self.mean).abs() / self.std_dev
        }
    }
}

/// Habit-weighted agreement over restaurants both members rated explicitly.
pub fn save_trust(u: &MemberId, v: &MemberId, ratings: &RatingBook, group_size: usize) -> f64 {
    save_trust_with(&RatingHabitStats::of(u, ratings), &ratings.co_rated(u, v), group_size)
}

/// Same as [`save_trust`] from precomputed stats for `u` and co-rated pairs `(u_i, v_i)`.
pub fn save_trust_with(stats: &RatingHabitStats, co_rated: &[(f64, f64)], group_size: usize) -> f64 {
    if co_rated.is_empty() || group_size == 0 {
        return 0.0;
    }
    let n = group_size as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for (ui, vi) in co_rated {
        let w = stats.weight(*ui);
        num += w * (1.0 - (ui - vi).abs() / n);
        den += w;
    }
    num / den
}

/// Inputs needed to evaluate every trust component for one snapshot.
#[derive(Debug, Clone, Copy)]
pub struct TrustInputs<'a> {
    pub ledger: &'a DirectedMessageLedger,
    pub ratings: &'a RatingBook,
    pub group_size: usize,
    pub t_now: Millis,
    pub params: &'a TrustParams,
}

pub fn trust_degree(u: &MemberId, v: &MemberId, inputs: &TrustInputs<'_>) -> f64 {
    let p = inputs.params;
    p.gamma1 * chat_trust(u, v, inputs.ledger, inputs.t_now, p)
        + p.gamma2 * save_trust(u, v, inputs.ratings, inputs.group_size)
}

pub fn trust_matrix(members: &[MemberId], inputs: &TrustInputs<'_>) -> PairMatrix {
    let stats: BTreeMap<&MemberId, RatingHabitStats> = members
        .iter()
        .map(|m| (m, RatingHabitStats::of(m, inputs.ratings)))
        .collect();
    let p = inputs.params;
    PairMatrix::from_fn(members.iter().cloned(), |u, v| {
        let save = save_trust_with(&stats[u], &inputs.ratings.co_rated(u, v), inputs.group_size);
        p.gamma1 * chat_trust(u, v, inputs.ledger, inputs.t_now, p) + p.gamma2 * save
    })
}
