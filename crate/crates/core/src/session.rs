//! Event-sourced group session.
//!
//! All state is a fold over the event log. Clock-driven events (recomputation
//! ticks, deadline and termination phase changes) are generated by
//! [`Session::advance_to`] and appended to the log like any other event, so
//! folding a persisted log reproduces the live session exactly.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::domain::{
    validate_rating, CandidateSet, ChatMessage, DomainError, Event, EventKind, GroupId, MemberId, Millis, Phase,
    PhaseReason, RatingBook, RestaurantId, Roster,
};
use crate::pipeline::{run_pipeline, PipelineInput, Snapshot, TraceRow};
use crate::registry::Strategies;
use crate::resolver::DialogueContext;
use crate::termination::{Decision, StopReason, TerminationMonitor};
use crate::trust::DirectedMessageLedger;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("session has not been created")]
    NotCreated,
    #[error("session already created")]
    AlreadyCreated,
    #[error("unknown member `{0}`")]
    UnknownMember(MemberId),
    #[error("member `{0}` already joined")]
    DuplicateMember(MemberId),
    #[error("{event} is not allowed during {phase}")]
    PhaseViolation { event: &'static str, phase: Phase },
    #[error("cannot move from {from} to {to} by {reason}")]
    IllegalTransition { from: Phase, to: Phase, reason: String },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("expected sequence number {expected}, got {got}")]
    Sequence { expected: u64, got: u64 },
    #[error("event time {at} precedes the previous event at {last}")]
    TimeReversal { at: Millis, last: Millis },
}

impl SessionError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            SessionError::NotCreated => "not_created",
            SessionError::AlreadyCreated | SessionError::DuplicateMember(_) => "conflict",
            SessionError::UnknownMember(_) => "unknown_member",
            SessionError::PhaseViolation { .. } | SessionError::IllegalTransition { .. } => "phase_violation",
            SessionError::Validation(_) | SessionError::Domain(_) => "validation",
            SessionError::Sequence { .. } | SessionError::TimeReversal { .. } => "out_of_order",
        }
    }
}

/// A failure while folding an existing log.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("event {index}: {error}")]
pub struct ReplayError {
    pub index: usize,
    pub error: SessionError,
}

fn positive(value: i8) -> Result<i8, SessionError> {
    let v = validate_rating(value.into())?;
    if v < 0 {
        return Err(DomainError::ExpectedPositive(v).into());
    }
    Ok(v)
}

fn negative(value: i8) -> Result<i8, SessionError> {
    let v = validate_rating(value.into())?;
    if v > 0 {
        return Err(DomainError::ExpectedNegative(v).into());
    }
    Ok(v)
}

fn next_phase(p: Phase) -> Option<Phase> {
    match p {
        Phase::Lobby => Some(Phase::Bookmarking),
        Phase::Bookmarking => Some(Phase::Discussion),
        Phase::Discussion => Some(Phase::Results),
        Phase::Results => None,
    }
}

/// Public per-member view of bookmarks, used by clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberList {
    pub member: MemberId,
    pub nickname: String,
    pub bookmarks: BTreeMap<RestaurantId, i8>,
}

pub struct Session {
    config: Config,
    strategies: Strategies,
    events: Vec<Event>,
    group: Option<GroupId>,
    epoch_ms: Millis,
    phase: Phase,
    phase_started: Millis,
    ended_by: Option<PhaseReason>,
    roster: Roster,
    ratings: RatingBook,
    lists: BTreeMap<MemberId, BTreeSet<RestaurantId>>,
    candidates: CandidateSet,
    ledger: DirectedMessageLedger,
    context: DialogueContext,
    monitor: TerminationMonitor,
    last_tick: Option<Millis>,
    pending_stop: Option<StopReason>,
    snapshot: Snapshot,
    trace: Vec<TraceRow>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("group", &self.group)
            .field("phase", &self.phase)
            .field("events", &self.events.len())
            .finish()
    }
}

impl Session {
    pub fn new(config: Config, strategies: Strategies) -> Self {
        let context = DialogueContext::new(config.session.context_window);
        let monitor = TerminationMonitor::new(config.termination);
        Self {
            config,
            strategies,
            events: Vec::new(),
            group: None,
            epoch_ms: 0,
            phase: Phase::Lobby,
            phase_started: 0,
            ended_by: None,
            roster: Roster::new(),
            ratings: RatingBook::new(),
            lists: BTreeMap::new(),
            candidates: CandidateSet::default(),
            ledger: DirectedMessageLedger::new(),
            context,
            monitor,
            last_tick: None,
            pending_stop: None,
            snapshot: Snapshot::empty(),
            trace: Vec::new(),
        }
    }

    /// Folds a complete log.
    pub fn replay(
        config: Config,
        strategies: Strategies,
        events: impl IntoIterator<Item = Event>,
    ) -> Result<Self, ReplayError> {
        let mut s = Self::new(config, strategies);
        for (index, e) in events.into_iter().enumerate() {
            s.apply(e).map_err(|error| ReplayError { index, error })?;
        }
        Ok(s)
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn group(&self) -> Option<&GroupId> {
        self.group.as_ref()
    }

    pub fn epoch_ms(&self) -> Millis {
        self.epoch_ms
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn phase_started(&self) -> Millis {
        self.phase_started
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn ratings(&self) -> &RatingBook {
        &self.ratings
    }

    pub fn candidates(&self) -> &CandidateSet {
        &self.candidates
    }

    pub fn monitor(&self) -> &TerminationMonitor {
        &self.monitor
    }

    /// Latest derived view. Changes only on ticks and phase changes.
    pub fn snapshot(&self) -> &Snapshot {
        &self.snapshot
    }

    /// Every recomputation so far, in order.
    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn last_at(&self) -> Millis {
        self.events.last().map_or(0, |e| e.at)
    }

    pub fn next_seq(&self) -> u64 {
        self.events.len() as u64
    }

    /// When the current phase ends on its own, if it has a deadline.
    pub fn phase_deadline(&self) -> Option<Millis> {
        match self.phase {
            Phase::Bookmarking => Some(self.phase_started + self.config.session.bookmarking_s * 1000),
            Phase::Discussion => Some(self.phase_started + self.config.termination.hard_stop_ms()),
            _ => None,
        }
    }

    pub fn bookmarks(&self, member: &MemberId) -> BTreeSet<RestaurantId> {
        self.lists.get(member).cloned().unwrap_or_default()
    }

    pub fn member_lists(&self) -> Vec<MemberList> {
        self.roster
            .iter()
            .map(|(m, nick)| MemberList {
                member: m.clone(),
                nickname: nick.to_owned(),
                bookmarks: self
                    .bookmarks(m)
                    .into_iter()
                    .filter_map(|r| self.ratings.get(m, &r).map(|v| (r, v)))
                    .collect(),
            })
            .collect()
    }

    /// Restaurants `member` may rate negatively: on someone else's list and
    /// not yet rated by `member`.
    pub fn negative_options(&self, member: &MemberId) -> BTreeSet<RestaurantId> {
        self.lists
            .iter()
            .filter(|(m, _)| *m != member)
            .flat_map(|(_, l)| l.iter().cloned())
            .filter(|r| self.ratings.get(member, r).is_none())
            .collect()
    }

    fn tick_ms(&self) -> Millis {
        self.config.session.tick_s * 1000
    }

    /// The earliest clock-driven event still to be generated. A pending
    /// termination comes first, then deadlines, then ticks.
    pub fn next_due(&self) -> Option<(Millis, EventKind)> {
        let phase_change = |phase, reason| EventKind::Phase { phase, reason };
        let tick_at = self.last_tick.unwrap_or(self.phase_started) + self.tick_ms();
        match self.phase {
            Phase::Lobby | Phase::Results => None,
            Phase::Bookmarking => {
                let deadline = self.phase_deadline().expect("bookmarking has a deadline");
                if deadline <= tick_at {
                    Some((deadline, phase_change(Phase::Discussion, PhaseReason::Deadline)))
                } else {
                    Some((tick_at, EventKind::Tick))
                }
            }
            Phase::Discussion => {
                if let Some(reason) = self.pending_stop {
                    let reason = match reason {
                        StopReason::Criterion(i) => PhaseReason::Criterion(i),
                        StopReason::HardStop => PhaseReason::HardStop,
                    };
                    return Some((self.last_at(), phase_change(Phase::Results, reason)));
                }
                let hard = self.phase_deadline().expect("discussion has a deadline");
                if hard <= tick_at {
                    Some((hard, phase_change(Phase::Results, PhaseReason::HardStop)))
                } else {
                    Some((tick_at, EventKind::Tick))
                }
            }
        }
    }

    /// Generates and applies every clock-driven event due at or before `now`.
    pub fn advance_to(&mut self, now: Millis) -> Vec<Event> {
        let mut out = Vec::new();
        while let Some((at, kind)) = self.next_due() {
            if at > now {
                break;
            }
            let event = Event {
                seq: self.next_seq(),
                at: at.max(self.last_at()),
                kind,
            };
            self.apply(event.clone()).expect("generated events are valid");
            out.push(event);
        }
        out
    }

    /// Validates and appends a new event at `at`. Callers advance the clock
    /// first so that due ticks and deadlines precede it in the log.
    pub fn append(&mut self, kind: EventKind, at: Millis) -> Result<Event, SessionError> {
        let event = Event {
            seq: self.next_seq(),
            at,
            kind,
        };
        self.apply(event.clone())?;
        Ok(event)
    }

    /// Checks `kind` against the current state without applying it.
    pub fn check(&self, kind: &EventKind, at: Millis) -> Result<(), SessionError> {
        if at < self.last_at() {
            return Err(SessionError::TimeReversal {
                at,
                last: self.last_at(),
            });
        }
        if let EventKind::Create { .. } = kind {
            return if self.events.is_empty() {
                Ok(())
            } else {
                Err(SessionError::AlreadyCreated)
            };
        }
        if self.group.is_none() {
            return Err(SessionError::NotCreated);
        }
        let tag = kind.type_tag();
        let in_phase = |allowed: &[Phase]| {
            if allowed.contains(&self.phase) {
                Ok(())
            } else {
                Err(SessionError::PhaseViolation {
                    event: tag,
                    phase: self.phase,
                })
            }
        };
        let known = |m: &MemberId| {
            if self.roster.contains(m) {
                Ok(())
            } else {
                Err(SessionError::UnknownMember(m.clone()))
            }
        };
        const RATING_PHASES: &[Phase] = &[Phase::Bookmarking, Phase::Discussion];
        match kind {
            EventKind::Create { .. } => unreachable!(),
            EventKind::Join { member, nickname } => {
                in_phase(&[Phase::Lobby, Phase::Bookmarking])?;
                if self.roster.contains(member) {
                    return Err(SessionError::DuplicateMember(member.clone()));
                }
                if member.as_str().is_empty() || nickname.trim().is_empty() {
                    return Err(SessionError::Validation(
                        "member id and nickname must be non-empty".into(),
                    ));
                }
            }
            EventKind::Phase { phase, reason } => self.check_transition(*phase, *reason, at)?,
            EventKind::Rate {
                member,
                restaurant,
                value,
            } => {
                in_phase(RATING_PHASES)?;
                known(member)?;
                positive(*value)?;
                if restaurant.as_str().is_empty() {
                    return Err(SessionError::Validation("restaurant id must be non-empty".into()));
                }
            }
            EventKind::Negative {
                member,
                restaurant,
                value,
            } => {
                in_phase(RATING_PHASES)?;
                known(member)?;
                negative(*value)?;
                if self.lists.get(member).is_some_and(|l| l.contains(restaurant)) {
                    return Err(SessionError::Validation(format!(
                        "`{restaurant}` is on {member}'s own list"
                    )));
                }
                let on_other = self.lists.iter().any(|(m, l)| m != member && l.contains(restaurant));
                if !on_other {
                    return Err(SessionError::Validation(format!(
                        "`{restaurant}` is not on another member's list"
                    )));
                }
            }
            EventKind::Save {
                saver,
                source,
                restaurant,
                value,
            } => {
                in_phase(RATING_PHASES)?;
                known(saver)?;
                known(source)?;
                positive(*value)?;
                if saver == source {
                    return Err(SessionError::Validation("cannot save from one's own list".into()));
                }
                if !self.lists.get(source).is_some_and(|l| l.contains(restaurant)) {
                    return Err(SessionError::Validation(format!(
                        "`{restaurant}` is not on {source}'s list"
                    )));
                }
            }
            EventKind::Chat {
                sender,
                text,
                restaurant,
            } => {
                in_phase(&[Phase::Discussion])?;
                known(sender)?;
                if text.trim().is_empty() && restaurant.is_none() {
                    return Err(SessionError::Validation("empty chat message".into()));
                }
                if let Some(r) = restaurant {
                    if !self.candidates.contains(r) {
                        return Err(SessionError::Validation(format!("`{r}` is not a candidate")));
                    }
                }
            }
            EventKind::Tick => in_phase(RATING_PHASES)?,
        }
        Ok(())
    }

    fn check_transition(&self, to: Phase, reason: PhaseReason, at: Millis) -> Result<(), SessionError> {
        let illegal = || SessionError::IllegalTransition {
            from: self.phase,
            to,
            reason: reason.encode(),
        };
        if next_phase(self.phase) != Some(to) {
            return Err(illegal());
        }
        let elapsed = at.saturating_sub(self.phase_started);
        let ok = match (to, reason) {
            (_, PhaseReason::Admin) => true,
            (Phase::Discussion, PhaseReason::Deadline) => elapsed >= self.config.session.bookmarking_s * 1000,
            (Phase::Results, PhaseReason::HardStop) => elapsed >= self.config.termination.hard_stop_ms(),
            (Phase::Results, PhaseReason::Criterion(i)) => self.pending_stop == Some(StopReason::Criterion(i)),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(illegal())
        }
    }

    /// Validates and folds one event.
    pub fn apply(&mut self, event: Event) -> Result<(), SessionError> {
        if event.seq != self.next_seq() {
            return Err(SessionError::Sequence {
                expected: self.next_seq(),
                got: event.seq,
            });
        }
        self.check(&event.kind, event.at)?;
        let at = event.at;
        let seq = event.seq;
        match &event.kind {
            EventKind::Create { group, epoch_ms } => {
                self.group = Some(group.clone());
                self.epoch_ms = *epoch_ms;
                self.phase_started = at;
            }
            EventKind::Join { member, nickname } => self.roster.insert(member.clone(), nickname.clone()),
            EventKind::Phase { phase, reason } => {
                self.phase = *phase;
                self.phase_started = at;
                self.last_tick = None;
                self.pending_stop = None;
                if *phase == Phase::Discussion {
                    self.monitor = TerminationMonitor::new(self.config.termination);
                }
                if *phase == Phase::Results {
                    self.ended_by = Some(*reason);
                }
            }
            EventKind::Rate {
                member,
                restaurant,
                value,
            } => {
                self.ratings.set(member, restaurant, *value);
                self.lists.entry(member.clone()).or_default().insert(restaurant.clone());
                self.candidates.insert(restaurant.clone());
            }
            EventKind::Negative {
                member,
                restaurant,
                value,
            } => self.ratings.set(member, restaurant, *value),
            EventKind::Save {
                saver,
                restaurant,
                value,
                ..
            } => {
                self.ratings.set(saver, restaurant, *value);
                self.lists.entry(saver.clone()).or_default().insert(restaurant.clone());
                self.candidates.insert(restaurant.clone());
            }
            EventKind::Chat {
                sender,
                text,
                restaurant,
            } => {
                let message = ChatMessage {
                    id: seq,
                    sender: sender.clone(),
                    text: text.clone(),
                    at,
                    shared_restaurant: restaurant.clone(),
                };
                let assignment = self.strategies.resolver.resolve(&message, &self.context, &self.roster);
                let score = self.strategies.scorer.score(text);
                self.ledger.record(&message, &assignment, score);
                self.context.push((&message).into());
            }
            EventKind::Tick => self.last_tick = Some(at),
        }
        let recompute = matches!(
            event.kind,
            EventKind::Create { .. } | EventKind::Phase { .. } | EventKind::Tick
        );
        self.events.push(event);
        if recompute {
            self.recompute(seq, at);
        }
        Ok(())
    }

    fn recompute(&mut self, seq: u64, at: Millis) {
        let members: Vec<MemberId> = self.roster.members().cloned().collect();
        let out = run_pipeline(
            &PipelineInput {
                members: &members,
                ratings: &self.ratings,
                candidates: &self.candidates,
                ledger: &self.ledger,
                trust_params: &self.config.trust,
                t_now: at,
                k: self.config.session.top_k,
            },
            &self.strategies,
        );
        if self.phase == Phase::Discussion {
            let elapsed = at - self.phase_started;
            if elapsed >= self.monitor.next_recording_ms() || self.monitor.ticks().is_empty() {
                self.monitor
                    .record_tick(&out.trust, &out.similarity, elapsed)
                    .expect("recordings are spaced by the interval");
                if let Decision::Stop(reason) = self.monitor.should_terminate(elapsed) {
                    self.pending_stop = Some(reason);
                }
            }
        }
        self.snapshot = Snapshot {
            group: self.group.clone(),
            seq: Some(seq),
            at,
            phase: self.phase,
            ended_by: self.ended_by,
            members,
            candidates: self.candidates.to_vec(),
            similarity: out.similarity,
            trust: out.trust,
            recommendations: out.recommendations,
            entropy: self.monitor.ticks().to_vec(),
        };
        self.trace.push(TraceRow::from_snapshot(&self.snapshot));
    }
}
