//! Seeded synthetic group sessions.
//!
//! A persona file lists the restaurants on offer and one persona per member.
//! [`plan`] turns it into a time-ordered script of member actions using one
//! ChaCha stream per persona; [`run_plan`] feeds the script to an
//! [`EventSink`], which may be an in-memory [`Session`] or a running service.
//! Actions the session rejects (for example chat after the discussion ended)
//! are skipped.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::domain::{EventKind, MemberId, Millis, Phase, PhaseReason, RestaurantId};
use crate::registry::{RegistryError, Strategies};
use crate::session::Session;

const S: Millis = 1000;
const LIKE_THRESHOLD: f64 = 3.0;
const DISLIKE_THRESHOLD: f64 = 0.0;
const SAVE_ATTEMPTS: usize = 3;
const MENTION_PROBABILITY: f64 = 0.5;
const SHARE_PROBABILITY: f64 = 0.3;

fn default_prominence() -> f64 {
    1.0
}

fn default_noise() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub member: MemberId,
    pub nickname: String,
    /// Preference for each restaurant in the file's order, on -5..=5.
    pub taste: Vec<f64>,
    /// Chat messages per minute during the discussion.
    pub chattiness: f64,
    /// Probability of saving from others and of echoing agreement in chat.
    pub agreement_bias: f64,
    /// Probability of negatively rating a disliked restaurant seen on another list.
    pub negative_propensity: f64,
    /// Relative chance that others address or save from this member.
    #[serde(default = "default_prominence")]
    pub prominence: f64,
    /// Half-width of the uniform noise added to taste when rating.
    #[serde(default = "default_noise")]
    pub rating_noise: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaFile {
    #[serde(default = "default_group")]
    pub group: String,
    pub restaurants: Vec<RestaurantId>,
    pub personas: Vec<Persona>,
}

fn default_group() -> String {
    "sim".into()
}

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("at least two personas are required, found {0}")]
    TooFewPersonas(usize),
    #[error("persona `{member}` has {got} taste values for {expected} restaurants")]
    TasteLength {
        member: MemberId,
        expected: usize,
        got: usize,
    },
    #[error("duplicate persona `{0}`")]
    DuplicateMember(MemberId),
    #[error("persona `{member}`: {message}")]
    BadPersona { member: MemberId, message: String },
    #[error("persona file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("event sink: {0}")]
    Sink(String),
}

impl PersonaFile {
    pub fn parse(json: &str) -> Result<Self, SimulateError> {
        let file: PersonaFile = serde_json::from_str(json)?;
        file.validate()?;
        Ok(file)
    }

    pub fn validate(&self) -> Result<(), SimulateError> {
        if self.personas.len() < 2 {
            return Err(SimulateError::TooFewPersonas(self.personas.len()));
        }
        let mut seen = BTreeSet::new();
        for p in &self.personas {
            if !seen.insert(&p.member) {
                return Err(SimulateError::DuplicateMember(p.member.clone()));
            }
            if p.taste.len() != self.restaurants.len() {
                return Err(SimulateError::TasteLength {
                    member: p.member.clone(),
                    expected: self.restaurants.len(),
                    got: p.taste.len(),
                });
            }
            let bad = |message: &str| {
                Err(SimulateError::BadPersona {
                    member: p.member.clone(),
                    message: message.into(),
                })
            };
            let unit = |x: f64| (0.0..=1.0).contains(&x);
            if !(p.chattiness >= 0.0 && p.chattiness.is_finite()) {
                return bad("chattiness must be non-negative");
            }
            if !unit(p.agreement_bias) || !unit(p.negative_propensity) {
                return bad("agreement_bias and negative_propensity must be in [0, 1]");
            }
            if !(p.prominence >= 0.0 && p.prominence.is_finite()) || !(p.rating_noise >= 0.0) {
                return bad("prominence and rating_noise must be non-negative");
            }
            if p.nickname.trim().is_empty() {
                return bad("nickname must be non-empty");
            }
        }
        Ok(())
    }

    /// `n` personas with identical, fully deterministic behaviour.
    pub fn uniform(n: usize, restaurants: usize) -> Self {
        let restaurants: Vec<RestaurantId> = (1..=restaurants).map(|i| RestaurantId::new(format!("r{i}"))).collect();
        let taste: Vec<f64> = (0..restaurants.len()).map(|i| 5.0 - (i % 6) as f64 * 1.5).collect();
        Self {
            group: default_group(),
            personas: (1..=n)
                .map(|i| Persona {
                    member: MemberId::new(format!("u{i}")),
                    nickname: format!("Member{i}"),
                    taste: taste.clone(),
                    chattiness: 0.0,
                    agreement_bias: 0.0,
                    negative_propensity: 0.0,
                    prominence: 1.0,
                    rating_noise: 0.0,
                    seed: 0,
                })
                .collect(),
            restaurants,
        }
    }
}

/// One scripted action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedEvent {
    pub at: Millis,
    pub kind: EventKind,
}

fn persona_rng(seed: u64, persona: &Persona, index: usize) -> ChaCha8Rng {
    let mix = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(persona.seed.rotate_left(17))
        .wrapping_add(index as u64);
    ChaCha8Rng::seed_from_u64(mix)
}

fn clamp_rating(x: f64, lo: i8, hi: i8) -> i8 {
    (x.round() as i64).clamp(lo.into(), hi.into()) as i8
}

fn weighted_pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [(T, f64)]) -> Option<&'a T> {
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    if !(total > 0.0) {
        return None;
    }
    let mut x = rng.random::<f64>() * total;
    for (item, w) in items {
        if x < *w {
            return Some(item);
        }
        x -= w;
    }
    items.last().map(|(i, _)| i)
}

fn time_in(rng: &mut ChaCha8Rng, from_s: u64, to_s: u64) -> Millis {
    rng.random_range(from_s * S..to_s * S)
}

const POSITIVE: &[&str] = &[
    "{r} sounds great",
    "I really like {r}",
    "{r} is delicious",
    "good choice, {r} is nice",
    "love {r}",
];
const NEGATIVE: &[&str] = &[
    "{r} is not good",
    "I hate {r}",
    "{r} seems bland",
    "{r} is too expensive",
    "{r} is awful",
];
const AGREE: &[&str] = &["I agree", "yes, sure", "ok"];
const DISAGREE: &[&str] = &["I disagree", "not sure about that"];

/// Turns a persona file into a time-ordered script. Same file and seed give
/// the same script.
pub fn plan(file: &PersonaFile, config: &Config, duration_s: u64, seed: u64) -> Vec<PlannedEvent> {
    let bookmarking_s = config.session.bookmarking_s;
    let discussion_end_s = (bookmarking_s + config.termination.hard_stop_s).min(duration_s);
    let mut rngs: Vec<ChaCha8Rng> = file
        .personas
        .iter()
        .enumerate()
        .map(|(i, p)| persona_rng(seed, p, i))
        .collect();
    // (time, persona index, order within persona) keeps the merge stable
    let mut script: Vec<(Millis, usize, usize, EventKind)> = Vec::new();
    let push = |script: &mut Vec<_>, at: Millis, who: usize, kind: EventKind| {
        let order = script.len();
        script.push((at, who, order, kind));
    };

    push(
        &mut script,
        0,
        0,
        EventKind::Create {
            group: file.group.clone().into(),
            epoch_ms: 0,
        },
    );
    for (i, p) in file.personas.iter().enumerate() {
        push(
            &mut script,
            0,
            i,
            EventKind::Join {
                member: p.member.clone(),
                nickname: p.nickname.clone(),
            },
        );
    }
    push(
        &mut script,
        0,
        usize::MAX,
        EventKind::Phase {
            phase: Phase::Bookmarking,
            reason: PhaseReason::Admin,
        },
    );

    // bookmarks: every liked restaurant, at a random time in the first part of the phase
    let bookmark_end = (bookmarking_s * 5 / 6).max(2);
    let mut lists: Vec<BTreeMap<RestaurantId, (Millis, i8)>> = vec![BTreeMap::new(); file.personas.len()];
    for (i, p) in file.personas.iter().enumerate() {
        let rng = &mut rngs[i];
        for (r, taste) in file.restaurants.iter().zip(&p.taste) {
            if *taste >= LIKE_THRESHOLD {
                let at = time_in(rng, 1, bookmark_end);
                let noise = if p.rating_noise > 0.0 {
                    rng.random_range(-p.rating_noise..=p.rating_noise)
                } else {
                    0.0
                };
                let value = clamp_rating(taste + noise, 1, 5);
                lists[i].insert(r.clone(), (at, value));
                push(
                    &mut script,
                    at,
                    i,
                    EventKind::Rate {
                        member: p.member.clone(),
                        restaurant: r.clone(),
                        value,
                    },
                );
            }
        }
    }

    // saves from prominent members' lists
    let save_from = (bookmarking_s / 3).max(1);
    let save_to = bookmarking_s.saturating_sub(5).max(save_from + 1);
    for (i, p) in file.personas.iter().enumerate() {
        let rng = &mut rngs[i];
        let sources: Vec<(usize, f64)> = file
            .personas
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(j, q)| (j, q.prominence))
            .collect();
        for _ in 0..SAVE_ATTEMPTS {
            if rng.random::<f64>() >= p.agreement_bias {
                continue;
            }
            let Some(&j) = weighted_pick(rng, &sources) else {
                continue;
            };
            let at = time_in(rng, save_from, save_to);
            let options: Vec<(&RestaurantId, i8)> = lists[j]
                .iter()
                .filter(|(r, (t, _))| *t < at && !lists[i].contains_key(*r))
                .map(|(r, (_, v))| (r, *v))
                .collect();
            if options.is_empty() {
                continue;
            }
            let (r, source_value) = options[rng.random_range(0..options.len())];
            let own = p.taste[file.restaurants.iter().position(|x| x == r).expect("known restaurant")];
            let value = clamp_rating(
                (1.0 - p.agreement_bias) * own + p.agreement_bias * f64::from(source_value),
                1,
                5,
            );
            let r = r.clone();
            lists[i].insert(r.clone(), (at, value));
            push(
                &mut script,
                at,
                i,
                EventKind::Save {
                    saver: p.member.clone(),
                    source: file.personas[j].member.clone(),
                    restaurant: r,
                    value,
                },
            );
        }
    }

    // negative ratings on disliked restaurants seen on other lists
    for (i, p) in file.personas.iter().enumerate() {
        let rng = &mut rngs[i];
        let at = time_in(rng, save_from, save_to);
        let seen: BTreeSet<&RestaurantId> = lists
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, l)| l.iter().filter(|(_, (t, _))| *t < at).map(|(r, _)| r))
            .filter(|r| !lists[i].contains_key(*r))
            .collect();
        for (k, r) in seen.into_iter().enumerate() {
            let taste = p.taste[file.restaurants.iter().position(|x| x == r).expect("known restaurant")];
            if taste <= DISLIKE_THRESHOLD && rng.random::<f64>() < p.negative_propensity {
                push(
                    &mut script,
                    at + k as Millis,
                    i,
                    EventKind::Negative {
                        member: p.member.clone(),
                        restaurant: r.clone(),
                        value: clamp_rating(taste, -5, -1),
                    },
                );
            }
        }
    }

    // discussion chat
    let candidates: Vec<&RestaurantId> = lists
        .iter()
        .flat_map(|l| l.keys())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let start = (bookmarking_s + 1) * S;
    let end = discussion_end_s * S;
    for (i, p) in file.personas.iter().enumerate() {
        if p.chattiness <= 0.0 || candidates.is_empty() || end <= start {
            continue;
        }
        let rng = &mut rngs[i];
        let per_ms = p.chattiness / 60_000.0;
        let targets: Vec<(usize, f64)> = file
            .personas
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(j, q)| (j, q.prominence))
            .collect();
        let mut t = start as f64;
        loop {
            let u: f64 = rng.random::<f64>();
            t += -(1.0 - u).ln() / per_ms;
            if t >= end as f64 {
                break;
            }
            let r = candidates[rng.random_range(0..candidates.len())];
            let taste = p.taste[file.restaurants.iter().position(|x| x == r).expect("known restaurant")];
            let pool = if taste >= 1.0 { POSITIVE } else { NEGATIVE };
            let mut text = pool[rng.random_range(0..pool.len())].replace("{r}", r.as_str());
            if rng.random::<f64>() < MENTION_PROBABILITY {
                if let Some(&j) = weighted_pick(rng, &targets) {
                    text = format!("{}, {text}", file.personas[j].nickname);
                }
            }
            let echo = if rng.random::<f64>() < p.agreement_bias {
                AGREE
            } else {
                DISAGREE
            };
            if rng.random::<f64>() < 0.3 {
                text = format!("{} {text}", echo[rng.random_range(0..echo.len())]);
            }
            let restaurant = (rng.random::<f64>() < SHARE_PROBABILITY).then(|| r.clone());
            push(
                &mut script,
                t as Millis,
                i,
                EventKind::Chat {
                    sender: p.member.clone(),
                    text,
                    restaurant,
                },
            );
        }
    }

    script.sort_by_key(|a| (a.0, a.1, a.2));
    script
        .into_iter()
        .map(|(at, _, _, kind)| PlannedEvent { at, kind })
        .collect()
}

/// Something that accepts scripted actions in time order.
pub trait EventSink {
    /// Runs the clock forward to `at`.
    fn advance(&mut self, at: Millis) -> Result<(), String>;
    /// Submits one action. `Ok(false)` means the session rejected it.
    fn submit(&mut self, at: Millis, kind: EventKind) -> Result<bool, String>;
}

impl EventSink for Session {
    fn advance(&mut self, at: Millis) -> Result<(), String> {
        self.advance_to(at);
        Ok(())
    }

    fn submit(&mut self, at: Millis, kind: EventKind) -> Result<bool, String> {
        Ok(self.append(kind, at).is_ok())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub accepted: usize,
    pub rejected: usize,
}

impl fmt::Display for RunStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} accepted, {} rejected", self.accepted, self.rejected)
    }
}

/// Feeds `script` to `sink`, then runs the clock to `end`.
pub fn run_plan(script: &[PlannedEvent], sink: &mut impl EventSink, end: Millis) -> Result<RunStats, SimulateError> {
    let mut stats = RunStats::default();
    for p in script {
        sink.advance(p.at).map_err(SimulateError::Sink)?;
        if sink.submit(p.at, p.kind.clone()).map_err(SimulateError::Sink)? {
            stats.accepted += 1;
        } else {
            stats.rejected += 1;
        }
    }
    sink.advance(end).map_err(SimulateError::Sink)?;
    Ok(stats)
}

/// Plans and runs a session in memory.
pub fn simulate(file: &PersonaFile, config: &Config, duration_s: u64, seed: u64) -> Result<Session, SimulateError> {
    file.validate()?;
    let strategies = Strategies::from_config(config)?;
    let mut session = Session::new(config.clone(), strategies);
    let script = plan(file, config, duration_s, seed);
    run_plan(&script, &mut session, duration_s * S)?;
    Ok(session)
}

/// A persona file with `n` members and randomised traits, for property tests
/// and ensembles.
pub fn random_personas(n: usize, restaurants: usize, seed: u64) -> PersonaFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let restaurants: Vec<RestaurantId> = (1..=restaurants).map(|i| RestaurantId::new(format!("r{i}"))).collect();
    let personas = (1..=n)
        .map(|i| Persona {
            member: MemberId::new(format!("u{i}")),
            nickname: format!("Member{i}"),
            taste: restaurants.iter().map(|_| rng.random_range(-5.0..=5.0)).collect(),
            chattiness: rng.random_range(0.5..4.0),
            agreement_bias: rng.random_range(0.0..1.0),
            negative_propensity: rng.random_range(0.0..1.0),
            prominence: rng.random_range(0.2..3.0),
            rating_noise: 0.5,
            seed: rng.random(),
        })
        .collect();
    PersonaFile {
        group: format!("sim-{seed}"),
        restaurants,
        personas,
    }
}
