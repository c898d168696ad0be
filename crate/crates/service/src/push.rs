//! Messages fanned out to push subscribers.

use std::collections::BTreeMap;

use groupdine_core::domain::{Event, EventKind, MemberId, Millis, Phase, PhaseReason, RestaurantId};
use groupdine_core::pipeline::Snapshot;
use serde::{Deserialize, Serialize};

/// A log record as JSON: `seq`, `at`, `type` and the same fields the log
/// payload carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireEvent {
    pub seq: u64,
    pub at: Millis,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl From<&Event> for WireEvent {
    fn from(e: &Event) -> Self {
        Self {
            seq: e.seq,
            at: e.at,
            kind: e.kind.clone(),
        }
    }
}

impl From<WireEvent> for Event {
    fn from(w: WireEvent) -> Self {
        Event {
            seq: w.seq,
            at: w.at,
            kind: w.kind,
        }
    }
}

/// Compact summary sent after every recomputation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Digest {
    pub seq: Option<u64>,
    pub at: Millis,
    pub phase: Phase,
    pub ended_by: Option<PhaseReason>,
    pub leaders: BTreeMap<String, Option<MemberId>>,
    pub top: BTreeMap<String, Vec<RestaurantId>>,
    pub entropy_ticks: usize,
}

impl From<&Snapshot> for Digest {
    fn from(s: &Snapshot) -> Self {
        Self {
            seq: s.seq,
            at: s.at,
            phase: s.phase,
            ended_by: s.ended_by,
            leaders: s
                .recommendations
                .iter()
                .map(|(tag, r)| (tag.clone(), r.leader.clone()))
                .collect(),
            top: s.recommendations.keys().map(|tag| (tag.clone(), s.top(tag))).collect(),
            entropy_ticks: s.entropy.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Push {
    Event(WireEvent),
    Digest(Digest),
}

impl Push {
    /// SSE event name: the log type tag, or `snapshot` for digests.
    pub fn name(&self) -> &'static str {
        match self {
            Push::Event(e) => e.kind.type_tag(),
            Push::Digest(_) => "snapshot",
        }
    }

    /// SSE id; only log records carry one, so clients can resume from it.
    pub fn id(&self) -> Option<u64> {
        match self {
            Push::Event(e) => Some(e.seq),
            Push::Digest(_) => None,
        }
    }

    pub fn data(&self) -> String {
        match self {
            Push::Event(e) => serde_json::to_string(e),
            Push::Digest(d) => serde_json::to_string(d),
        }
        .expect("push messages serialize")
    }
}
