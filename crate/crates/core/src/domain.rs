//! Identifiers, ratings and interaction events shared by every other module.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Milliseconds since the session was created.
pub type Millis = u64;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(
    /// A group member. Ordering is lexicographic and is used for every tie-break.
    MemberId
);
string_id!(GroupId);
string_id!(RestaurantId);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("rating {0} is outside -5..=-1 and 1..=5")]
    RatingOutOfRange(i64),
    #[error("rating {0} must be positive (1..=5) for a bookmark")]
    ExpectedPositive(i8),
    #[error("rating {0} must be negative (-5..=-1) for a negative rating")]
    ExpectedNegative(i8),
}

/// Accepts a rating on the positive (1..=5) or negative (-5..=-1) scale.
///
/// Zero is rejected: an unrated restaurant is neutral by absence.
pub fn validate_rating(value: i64) -> Result<i8, DomainError> {
    match value {
        -5..=-1 | 1..=5 => Ok(value as i8),
        _ => Err(DomainError::RatingOutOfRange(value)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub member: MemberId,
    pub restaurant: RestaurantId,
    pub value: i8,
    pub at: Millis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    /// Sequence number of the event that carried the message.
    pub id: u64,
    pub sender: MemberId,
    pub text: String,
    pub at: Millis,
    pub shared_restaurant: Option<RestaurantId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaveEvent {
    pub saver: MemberId,
    pub source: MemberId,
    pub restaurant: RestaurantId,
    pub rating: i8,
    pub at: Millis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Lobby,
    Bookmarking,
    Discussion,
    Results,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Lobby => "lobby",
            Phase::Bookmarking => "bookmarking",
            Phase::Discussion => "discussion",
            Phase::Results => "results",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "lobby" => Phase::Lobby,
            "bookmarking" => Phase::Bookmarking,
            "discussion" => Phase::Discussion,
            "results" => Phase::Results,
            _ => return None,
        })
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Why a phase transition happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseReason {
    Admin,
    Deadline,
    /// One of the entropy stop criteria (1, 2 or 3) held long enough.
    Criterion(u8),
    HardStop,
}

impl PhaseReason {
    pub fn encode(self) -> String {
        match self {
            PhaseReason::Admin => "admin".into(),
            PhaseReason::Deadline => "deadline".into(),
            PhaseReason::Criterion(i) => format!("criterion{i}"),
            PhaseReason::HardStop => "hard".into(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "admin" => PhaseReason::Admin,
            "deadline" => PhaseReason::Deadline,
            "hard" => PhaseReason::HardStop,
            other => {
                let i: u8 = other.strip_prefix("criterion")?.parse().ok()?;
                if !(1..=3).contains(&i) {
                    return None;
                }
                PhaseReason::Criterion(i)
            }
        })
    }
}

/// Payload of one interaction event. Timestamps and sequence numbers live on
/// the enclosing [`Event`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum EventKind {
    Create {
        group: GroupId,
        epoch_ms: u64,
    },
    Join {
        member: MemberId,
        nickname: String,
    },
    Phase {
        phase: Phase,
        reason: PhaseReason,
    },
    /// Rate a restaurant on the positive scale and bookmark it.
    Rate {
        member: MemberId,
        restaurant: RestaurantId,
        value: i8,
    },
    Negative {
        member: MemberId,
        restaurant: RestaurantId,
        value: i8,
    },
    /// Bookmark a restaurant found on another member's list.
    Save {
        saver: MemberId,
        source: MemberId,
        restaurant: RestaurantId,
        value: i8,
    },
    Chat {
        sender: MemberId,
        text: String,
        restaurant: Option<RestaurantId>,
    },
    /// Clock tick driving recomputation and entropy sampling.
    Tick,
}

impl EventKind {
    pub fn type_tag(&self) -> &'static str {
        match self {
            EventKind::Create { .. } => "create",
            EventKind::Join { .. } => "join",
            EventKind::Phase { .. } => "phase",
            EventKind::Rate { .. } => "rate",
            EventKind::Negative { .. } => "negative",
            EventKind::Save { .. } => "save",
            EventKind::Chat { .. } => "chat",
            EventKind::Tick => "tick",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub at: Millis,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Members of a session with their display nicknames.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Roster {
    nicknames: BTreeMap<MemberId, String>,
}

impl Roster {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, member: MemberId, nickname: impl Into<String>) {
        self.nicknames.insert(member, nickname.into());
    }

    pub fn contains(&self, member: &MemberId) -> bool {
        self.nicknames.contains_key(member)
    }

    pub fn nickname(&self, member: &MemberId) -> Option<&str> {
        self.nicknames.get(member).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.nicknames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nicknames.is_empty()
    }

    /// Members in sorted order.
    pub fn members(&self) -> impl Iterator<Item = &MemberId> {
        self.nicknames.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MemberId, &str)> {
        self.nicknames.iter().map(|(m, n)| (m, n.as_str()))
    }
}

impl<M: Into<MemberId>, N: Into<String>> FromIterator<(M, N)> for Roster {
    fn from_iter<I: IntoIterator<Item = (M, N)>>(iter: I) -> Self {
        Self {
            nicknames: iter.into_iter().map(|(m, n)| (m.into(), n.into())).collect(),
        }
    }
}

/// Ordered set of restaurants that appear on at least one preferred list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CandidateSet {
    restaurants: BTreeSet<RestaurantId>,
}

impl CandidateSet {
    pub fn insert(&mut self, restaurant: RestaurantId) {
        self.restaurants.insert(restaurant);
    }

    pub fn contains(&self, restaurant: &RestaurantId) -> bool {
        self.restaurants.contains(restaurant)
    }

    pub fn len(&self) -> usize {
        self.restaurants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.restaurants.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RestaurantId> {
        self.restaurants.iter()
    }

    pub fn to_vec(&self) -> Vec<RestaurantId> {
        self.restaurants.iter().cloned().collect()
    }
}

impl FromIterator<RestaurantId> for CandidateSet {
    fn from_iter<I: IntoIterator<Item = RestaurantId>>(iter: I) -> Self {
        Self {
            restaurants: iter.into_iter().collect(),
        }
    }
}

/// Union of the restaurants bookmarked (rated positively or saved) by anyone.
///
/// Negative ratings never add a candidate: they only target restaurants that
/// are already on someone else's list.
pub fn build_candidate_set<'a>(events: impl IntoIterator<Item = &'a Event>) -> CandidateSet {
    events
        .into_iter()
        .filter_map(|e| match &e.kind {
            EventKind::Rate { restaurant, .. } | EventKind::Save { restaurant, .. } => Some(restaurant.clone()),
            _ => None,
        })
        .collect()
}

/// Explicit ratings, last write wins. Absence means neutral.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RatingBook {
    by_member: BTreeMap<MemberId, BTreeMap<RestaurantId, i8>>,
}

impl RatingBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, member: &MemberId, restaurant: &RestaurantId, value: i8) {
        self.by_member
            .entry(member.clone())
            .or_default()
            .insert(restaurant.clone(), value);
    }

    pub fn get(&self, member: &MemberId, restaurant: &RestaurantId) -> Option<i8> {
        self.by_member.get(member)?.get(restaurant).copied()
    }

    /// Explicit value, else 0.
    pub fn effective(&self, member: &MemberId, restaurant: &RestaurantId) -> f64 {
        self.get(member, restaurant).map_or(0.0, f64::from)
    }

    pub fn of(&self, member: &MemberId) -> impl Iterator<Item = (&RestaurantId, i8)> {
        self.by_member
            .get(member)
            .into_iter()
            .flat_map(|m| m.iter().map(|(r, v)| (r, *v)))
    }

    pub fn count(&self, member: &MemberId) -> usize {
        self.by_member.get(member).map_or(0, BTreeMap::len)
    }

    /// Pairs of (u's rating, v's rating) over restaurants both rated explicitly,
    /// in restaurant order.
    pub fn co_rated(&self, u: &MemberId, v: &MemberId) -> Vec<(f64, f64)> {
        let (Some(ru), Some(rv)) = (self.by_member.get(u), self.by_member.get(v)) else {
            return Vec::new();
        };
        ru.iter()
            .filter_map(|(r, a)| rv.get(r).map(|b| (f64::from(*a), f64::from(*b))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(seq: u64, kind: EventKind) -> Event {
        Event {
            seq,
            at: seq * 1000,
            kind,
        }
    }

    fn rate(m: &str, r: &str, v: i8) -> EventKind {
        EventKind::Rate {
            member: m.into(),
            restaurant: r.into(),
            value: v,
        }
    }

    #[test]
    fn rating_scale() {
        assert_eq!(validate_rating(5), Ok(5));
        assert_eq!(validate_rating(-3), Ok(-3));
        assert_eq!(validate_rating(-5), Ok(-5));
        assert_eq!(validate_rating(0), Err(DomainError::RatingOutOfRange(0)));
        assert!(validate_rating(6).is_err());
        assert!(validate_rating(-6).is_err());
    }

    #[test]
    fn candidates_from_no_events() {
        assert!(build_candidate_set(&[]).is_empty());
    }

    #[test]
    fn candidates_are_union_of_bookmarks() {
        let events = vec![
            ev(1, rate("a", "r1", 4)),
            ev(2, rate("b", "r1", 3)),
            ev(3, rate("b", "r2", 5)),
        ];
        let c = build_candidate_set(&events);
        assert_eq!(c.to_vec(), vec![RestaurantId::from("r1"), RestaurantId::from("r2")]);
    }

    #[test]
    fn negative_rating_alone_adds_nothing() {
        let events = vec![
            ev(1, rate("a", "r1", 4)),
            ev(
                2,
                EventKind::Negative {
                    member: "b".into(),
                    restaurant: "r1".into(),
                    value: -2,
                },
            ),
            ev(
                3,
                EventKind::Negative {
                    member: "b".into(),
                    restaurant: "r9".into(),
                    value: -4,
                },
            ),
        ];
        assert_eq!(build_candidate_set(&events).to_vec(), vec![RestaurantId::from("r1")]);
    }

    #[test]
    fn rating_book_last_write_wins() {
        let mut book = RatingBook::new();
        let (a, r) = (MemberId::from("a"), RestaurantId::from("r"));
        book.set(&a, &r, 2);
        book.set(&a, &r, -4);
        assert_eq!(book.get(&a, &r), Some(-4));
        assert_eq!(book.effective(&a, &"other".into()), 0.0);
    }

    #[test]
    fn phase_reason_codes() {
        for r in [
            PhaseReason::Admin,
            PhaseReason::Deadline,
            PhaseReason::HardStop,
            PhaseReason::Criterion(2),
        ] {
            assert_eq!(PhaseReason::parse(&r.encode()), Some(r));
        }
        assert_eq!(PhaseReason::parse("criterion4"), None);
    }

    proptest::proptest! {
        #[test]
        fn candidate_set_is_monotone(ops in proptest::collection::vec((0u8..3, 0u8..4, 0u8..6), 0..40)) {
            let mut events = Vec::new();
            let mut previous = CandidateSet::default();
            for (i, (kind, m, r)) in ops.into_iter().enumerate() {
                let member = format!("m{m}");
                let restaurant = format!("r{r}");
                let k = match kind {
                    0 => rate(&member, &restaurant, 3),
                    1 => EventKind::Negative { member: member.as_str().into(), restaurant: restaurant.as_str().into(), value: -1 },
                    _ => EventKind::Save { saver: member.as_str().into(), source: "m9".into(), restaurant: restaurant.as_str().into(), value: 2 },
                };
                events.push(ev(i as u64, k));
                let now = build_candidate_set(&events);
                proptest::prop_assert!(previous.iter().all(|r| now.contains(r)));
                previous = now;
            }
        }
    }
}
