//! Acceptance suite: one PASS/FAIL line per criterion. Run with
//! `cargo test -p groupdine-cli --test acceptance`.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use groupdine_cli::{replay_file, replay_text};
use groupdine_core::config::Config;
use groupdine_core::domain::{
    CandidateSet, ChatMessage, EventKind, MemberId, Millis, Phase, PhaseReason, RatingBook, RestaurantId, Roster,
};
use groupdine_core::eventlog::{encode_line, parse_log};
use groupdine_core::ibgr::{
    distance, distance_pairs, harmonic_mean, ibgr_group_recommend, ibgr_trust, influence_weight, partnership,
    partnership_sets, IbgrModel, IbgrParams,
};
use groupdine_core::leaderrank::{
    leaderrank_scores, select_leader, InfluenceScores, LeaderRankGraph, LeaderRankParams,
};
use groupdine_core::matrix::PairMatrix;
use groupdine_core::recommender::{group_ratings, top_k};
use groupdine_core::registry::Strategies;
use groupdine_core::report::{Format, ReplayReport};
use groupdine_core::resolver::{ContextMessage, DialogueContext, HeuristicResolver, RecipientResolver};
use groupdine_core::sentiment::{LexiconScorer, SentimentScorer, DEFAULT_LEXICON};
use groupdine_core::session::Session;
use groupdine_core::similarity::{pearson, similarity_matrix};
use groupdine_core::simulate::{random_personas, simulate, PersonaFile};
use groupdine_core::termination::{update_streak, Decision, StopReason, TerminationConfig, TerminationMonitor};
use groupdine_core::trust::{
    chat_frequency_trust, chat_sentiment_trust, save_trust, trust_degree, trust_matrix, DirectedMessage,
    DirectedMessageLedger, TrustInputs, TrustParams,
};
use groupdine_service::drive::simulate_over_http;
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Check = Result<String, String>;
type Criterion = (u8, &'static str, fn() -> Check);

fn manifest(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(started: Instant, budget: Duration) -> Result<(), String> {
    let spent = started.elapsed();
    ensure(spent < budget, || format!("took {spent:.2?}, budget {budget:?}"))
}

fn m(i: usize) -> MemberId {
    MemberId::new(format!("m{i}"))
}

fn r(i: usize) -> RestaurantId {
    RestaurantId::new(format!("r{i}"))
}

fn members(n: usize) -> Vec<MemberId> {
    (0..n).map(m).collect()
}

fn square(rows: Vec<Vec<f64>>) -> PairMatrix {
    PairMatrix::from_rows(members(rows.len()), rows)
}

// ---------------------------------------------------------------------------
// 1. trust formulas against the randomized direct-evaluation oracle

fn trust_oracle() -> Check {
    let started = Instant::now();
    let doc: Value = serde_json::from_str(
        &fs::read_to_string(manifest("../core/tests/fixtures/trust_cases.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let cases = doc["cases"].as_array().ok_or("no cases")?;
    ensure(cases.len() >= 1000, || format!("only {} fixtures", cases.len()))?;
    let (mut pairs, mut worst) = (0usize, 0.0f64);
    for (ci, case) in cases.iter().enumerate() {
        let f = |k: &str| case[k].as_f64().unwrap();
        let params = TrustParams {
            alpha: f("alpha"),
            beta1: f("beta1"),
            beta2: f("beta2"),
            gamma1: f("gamma1"),
            gamma2: f("gamma2"),
        };
        let ids: Vec<MemberId> = case["members"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| MemberId::new(v.as_str().unwrap()))
            .collect();
        let mut ratings = RatingBook::new();
        for (member, row) in case["ratings"].as_object().unwrap() {
            for (rest, v) in row.as_object().unwrap() {
                ratings.set(
                    &member.as_str().into(),
                    &rest.as_str().into(),
                    v.as_i64().unwrap() as i8,
                );
            }
        }
        let mut ledger = DirectedMessageLedger::new();
        for msg in case["messages"].as_array().unwrap() {
            ledger.push(
                &msg["from"].as_str().unwrap().into(),
                &msg["to"].as_str().unwrap().into(),
                DirectedMessage {
                    at: msg["at"].as_u64().unwrap(),
                    weight: msg["weight"].as_f64().unwrap(),
                    sentiment: msg["sentiment"].as_f64().unwrap(),
                },
            );
        }
        let t_now = case["t_now"].as_u64().unwrap();
        let inputs = TrustInputs {
            ledger: &ledger,
            ratings: &ratings,
            group_size: ids.len(),
            t_now,
            params: &params,
        };
        let matrix = trust_matrix(&ids, &inputs);
        for e in case["expected"].as_array().unwrap() {
            let u: MemberId = e["u"].as_str().unwrap().into();
            let v: MemberId = e["v"].as_str().unwrap().into();
            let got = [
                ("frequency", chat_frequency_trust(&u, &v, &ledger, t_now, &params)),
                ("sentiment", chat_sentiment_trust(&u, &v, &ledger, t_now, &params)),
                ("save", save_trust(&u, &v, &ratings, ids.len())),
                ("degree", trust_degree(&u, &v, &inputs)),
                ("degree", matrix.entry(&u, &v).unwrap()),
            ];
            for (key, value) in got {
                let want = e[key].as_f64().unwrap();
                let err = (value - want).abs();
                worst = worst.max(err);
                ensure(err <= 1e-10, || {
                    format!("fixture {ci} {u}->{v} {key}: {value} vs oracle {want}")
                })?;
            }
            pairs += 1;
        }
    }
    within_budget(started, Duration::from_secs(10))?;
    Ok(format!(
        "{} fixtures, {pairs} ordered pairs x 4 formulas, max error {worst:.1e}, {:.2?}",
        cases.len(),
        started.elapsed()
    ))
}

// ---------------------------------------------------------------------------
// 2. ground-node ranking against a dense reference

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 0.0 } else { rng.random_range(-1.0..1.0) })
                .collect()
        })
        .collect()
}

fn leaderrank_equivalence() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1EAD);
    let defaults = LeaderRankParams::default();
    let conserving = LeaderRankParams {
        epsilon_ground: 0.0,
        ..defaults
    };
    let (mut count, mut worst, mut mass_worst) = (0, 0.0f64, 0.0f64);
    for n in 2..=5 {
        for k in 0..200 {
            let rows = random_matrix(&mut rng, n);
            let pm = square(rows.clone());
            let got = leaderrank_scores(&pm, &defaults);
            let want = support::dense_leaderrank(&rows, defaults.epsilon_ground, 1e-13, 100_000);
            for (a, b) in got.scores.iter().zip(&want) {
                worst = worst.max((a - b).abs());
            }
            ensure(worst <= 1e-8, || {
                format!("n={n} matrix {k}: {:?} vs dense {want:?}", got.scores)
            })?;
            let leader = select_leader(&got);
            for c in [0.1, 1.0, 10.0] {
                let scaled = square(rows.iter().map(|row| row.iter().map(|x| x * c).collect()).collect());
                let l = select_leader(&leaderrank_scores(&scaled, &defaults));
                ensure(l == leader, || {
                    format!("n={n} matrix {k}: leader {l:?} at c={c}, {leader:?} at c=1")
                })?;
            }
            // without the ground bonus every step preserves total score n + 1
            let graph = LeaderRankGraph::new(&pm, 0.0);
            let total = (n + 1) as f64;
            let mut x = vec![1.0; n + 1];
            for _ in 0..200 {
                x = graph.step(&x);
                mass_worst = mass_worst.max((x.iter().sum::<f64>() - total).abs());
            }
            let plain = leaderrank_scores(&pm, &conserving);
            mass_worst = mass_worst.max((plain.scores.iter().sum::<f64>() - total).abs());
            ensure(mass_worst <= 1e-9, || {
                format!("n={n} matrix {k}: mass drift {mass_worst:e}")
            })?;
            count += 1;
        }
    }
    within_budget(started, Duration::from_secs(30))?;
    Ok(format!(
        "{count} matrices (n=2..5), max error {worst:.1e}, leader stable for c in {{0.1, 1, 10}}, mass drift {mass_worst:.1e}, {:.2?}",
        started.elapsed()
    ))
}

// ---------------------------------------------------------------------------
// 3. baseline closed forms

fn book(rows: &[(&str, &[(&str, i8)])]) -> RatingBook {
    let mut b = RatingBook::new();
    for (member, items) in rows {
        for (rest, v) in *items {
            b.set(&(*member).into(), &(*rest).into(), *v);
        }
    }
    b
}

fn ibgr_closed_forms() -> Check {
    let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<String>>();
    let (abcd, ab) = (set(&["a", "b", "c", "d"]), set(&["a", "b"]));
    ensure(partnership_sets(&abcd, &ab) == 0.5, || {
        "partnership {a,b,c,d} vs {a,b} != 0.5".into()
    })?;
    ensure(partnership_sets(&ab, &abcd) == 1.0, || {
        "partnership {a,b} vs {a,b,c,d} != 1".into()
    })?;
    ensure(partnership_sets(&ab, &set(&["x"])) == 0.0, || {
        "disjoint partnership != 0".into()
    })?;
    ensure(distance_pairs(&[(1.0, 5.0)]) == 0.2, || {
        "distance for ratings 1 vs 5 != 0.2".into()
    })?;
    ensure(distance_pairs(&[(3.0, 3.0), (4.0, 4.0)]) == 1.0, || {
        "identical ratings distance != 1".into()
    })?;
    let hm = harmonic_mean(0.5, 0.2);
    ensure((hm - 2.0 / 7.0).abs() <= 1e-15, || {
        format!("harmonic mean (0.5, 0.2) = {hm}")
    })?;
    ensure(ibgr_trust(0.375, 0.375) == 0.375, || "harmonic mean of equals".into())?;
    ensure(ibgr_trust(0.0, 0.7) == 0.0, || {
        "zero partnership must annihilate".into()
    })?;
    let w = influence_weight(2.0 / 7.0, 0.5);
    ensure((w - 4.0 / 11.0).abs() <= 1e-15, || {
        format!("influence weight (2/7, 0.5) = {w}")
    })?;
    ensure(influence_weight(0.4, -0.1) == 0.0, || {
        "negative similarity must give 0".into()
    })?;

    // the same ratios through the rating book
    let b = book(&[
        ("u", &[("a", 4), ("b", 2), ("c", 5), ("d", 1)]),
        ("v", &[("a", 4), ("b", 3)]),
    ]);
    let (u, v) = ("u".into(), "v".into());
    ensure(partnership(&u, &v, &b) == 0.5 && partnership(&v, &u, &b) == 1.0, || {
        "book partnership".into()
    })?;
    ensure(distance(&u, &v, &b) == 0.5, || {
        format!("book distance {}", distance(&u, &v, &b))
    })?;

    // three-member pipeline computed step by step in tests/oracles/ibgr_oracle.py
    let three = book(&[
        ("a", &[("x", 5), ("y", 3), ("z", 1)]),
        ("b", &[("x", 4), ("y", 3), ("z", 2), ("w", 5)]),
        ("c", &[("x", 2), ("y", 4), ("w", -3)]),
    ]);
    let ids: Vec<MemberId> = ["a", "b", "c"].into_iter().map(MemberId::from).collect();
    let cands: CandidateSet = ["w", "x", "y", "z"].into_iter().map(RestaurantId::from).collect();
    let rec = ibgr_group_recommend(&ids, &three, &cands, &IbgrParams { leader_impact: 1.5 }, 3, 0);
    ensure(rec.leader == Some("a".into()), || format!("leader {:?}", rec.leader))?;
    for (item, want) in [
        ("w", 0.5235741983817892),
        ("x", 3.695285160323642),
        ("y", 3.3333333333333335),
        ("z", 0.9713815063430244),
    ] {
        let got = rec.group_ratings[&RestaurantId::from(item)];
        ensure((got - want).abs() <= 1e-12, || {
            format!("group rating {item}: {got} vs {want}")
        })?;
    }

    // L = 1 makes the leader path a no-op on random groups; L = 1.5 is live
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut live = 0;
    for trial in 0..300 {
        let n = rng.random_range(2..=5);
        let ids = members(n);
        let mut ratings = RatingBook::new();
        for id in &ids {
            for j in 0..6 {
                if rng.random_bool(0.7) {
                    let v: i8 = rng.random_range(1..=5);
                    ratings.set(id, &r(j), if rng.random_bool(0.1) { -v } else { v });
                }
            }
        }
        let cands: CandidateSet = (0..6).map(r).collect();
        let model = IbgrModel::build(&ids, &ratings);
        let leaderless = model.group_ratings(&ratings, &cands, None, 1.0);
        let unit = ibgr_group_recommend(&ids, &ratings, &cands, &IbgrParams { leader_impact: 1.0 }, 3, 0);
        ensure(unit.group_ratings == leaderless, || {
            format!("trial {trial}: L = 1 differs from leaderless")
        })?;
        let boosted = ibgr_group_recommend(&ids, &ratings, &cands, &IbgrParams { leader_impact: 1.5 }, 3, 0);
        if boosted.group_ratings != leaderless {
            live += 1;
        }
    }
    ensure(live > 0, || "leader impact never changed a rating".into())?;
    Ok(format!(
        "2/7, 0.2, 0.5/1.0 ratios and 3-member pipeline exact; L = 1 no-op on 300 groups ({live} differ at L = 1.5)"
    ))
}

// ---------------------------------------------------------------------------
// 4. termination monitor

fn frozen_pair(rng: &mut ChaCha8Rng, n: usize) -> (PairMatrix, PairMatrix) {
    // similarity concentrated on one entry, trust spread evenly: criterion 1 stays off
    let mut sim = vec![vec![0.0; n]; n];
    sim[0][1] = 1.0;
    sim[1][0] = rng.random_range(0.0..0.1);
    let trust = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 0.0 } else { 0.5 + rng.random_range(0.0..0.01) })
                .collect()
        })
        .collect();
    (square(trust), square(sim))
}

fn discussion_session(config: Config, start: Millis) -> Result<Session, String> {
    let strategies = Strategies::from_config(&config).map_err(|e| e.to_string())?;
    let mut s = Session::new(config, strategies);
    let admin = |phase| EventKind::Phase {
        phase,
        reason: PhaseReason::Admin,
    };
    let script = [
        (
            0,
            EventKind::Create {
                group: "t".into(),
                epoch_ms: 0,
            },
        ),
        (
            10,
            EventKind::Join {
                member: "u1".into(),
                nickname: "Ann".into(),
            },
        ),
        (
            20,
            EventKind::Join {
                member: "u2".into(),
                nickname: "Bo".into(),
            },
        ),
        (
            30,
            EventKind::Join {
                member: "u3".into(),
                nickname: "Cy".into(),
            },
        ),
        (1000, admin(Phase::Bookmarking)),
        (
            1500,
            EventKind::Rate {
                member: "u1".into(),
                restaurant: "r1".into(),
                value: 5,
            },
        ),
        (
            1600,
            EventKind::Rate {
                member: "u2".into(),
                restaurant: "r1".into(),
                value: 4,
            },
        ),
        (
            1700,
            EventKind::Rate {
                member: "u2".into(),
                restaurant: "r2".into(),
                value: 2,
            },
        ),
        (
            1800,
            EventKind::Rate {
                member: "u3".into(),
                restaurant: "r2".into(),
                value: 3,
            },
        ),
        (
            1900,
            EventKind::Rate {
                member: "u1".into(),
                restaurant: "r2".into(),
                value: 1,
            },
        ),
        (start, admin(Phase::Discussion)),
    ];
    for (at, kind) in script {
        s.advance_to(at);
        s.append(kind, at).map_err(|e| e.to_string())?;
    }
    Ok(s)
}

fn ended_at(s: &Session) -> Option<(Millis, PhaseReason)> {
    s.events().iter().rev().find_map(|e| match &e.kind {
        EventKind::Phase {
            phase: Phase::Results,
            reason,
        } => Some((e.at, *reason)),
        _ => None,
    })
}

fn termination_monitor() -> Check {
    let config = TerminationConfig::default();
    let c = config.consecutive;
    let interval = config.interval_ms();
    let mut rng = ChaCha8Rng::seed_from_u64(44);

    // frozen matrices: one-step changes are 0 from the second recording on
    for trial in 0..100 {
        let n = rng.random_range(3..=5);
        let (trust, sim) = frozen_pair(&mut rng, n);
        let mut mon = TerminationMonitor::new(config);
        let mut fired = None;
        let mut t = 0;
        while t < config.hard_stop_ms() {
            mon.record_tick(&trust, &sim, t).map_err(|e| e.to_string())?;
            if let Decision::Stop(reason) = mon.should_terminate(t) {
                fired = Some((t, reason));
                break;
            }
            t += interval;
        }
        let limit = config.arm_ms() + (c as u64 - 1) * interval;
        ensure(fired == Some((limit, StopReason::Criterion(2))), || {
            format!("trial {trial}: fired {fired:?}, expected criterion 2 at {limit}")
        })?;
    }

    // the same in a session left idle through the discussion
    let idle = discussion_session(Config::default(), 70_000)?;
    let mut idle = idle;
    idle.advance_to(70_000 + 1_300_000);
    let (at, reason) = ended_at(&idle).ok_or("idle session never ended")?;
    let elapsed = at - 70_000;
    ensure(
        matches!(reason, PhaseReason::Criterion(_)) && elapsed <= config.arm_ms() + (c as u64 - 1) * interval,
        || format!("idle session ended by {reason:?} after {elapsed} ms"),
    )?;

    // adversarial series: the hard stop fires at exactly 1200 s, never earlier
    let hard = config.hard_stop_ms();
    for trial in 0..200 {
        let mut mon = TerminationMonitor::new(config);
        let mut t = 0;
        let calm = trial % 2 == 0;
        let mut k = 0;
        while t < hard {
            let (et, es) = if calm {
                (3.0, 3.0 + rng.random_range(0.0..1e-3))
            } else {
                (3.0 + (k % 2) as f64, 1.0)
            };
            mon.record_entropies(et, es, t).map_err(|e| e.to_string())?;
            k += 1;
            let d = mon.should_terminate(t);
            ensure(d != Decision::Stop(StopReason::HardStop), || {
                format!("trial {trial}: hard stop at {t}")
            })?;
            if !calm {
                ensure(d == Decision::Continue, || {
                    format!("trial {trial}: {d:?} at {t} on an unsettled series")
                })?;
            }
            t += interval + rng.random_range(0..3) * 1000;
        }
        for probe in [hard - 1, hard, hard + 1, hard + rng.random_range(0..600_000)] {
            let d = mon.should_terminate(probe);
            let want_hard = probe >= hard;
            ensure((d == Decision::Stop(StopReason::HardStop)) == want_hard, || {
                format!("trial {trial}: {d:?} at {probe}")
            })?;
        }
    }
    let mut never = Config::default();
    never.termination.consecutive = 10_000;
    for start in [70_000, 70_123, 99_999, 360_999] {
        let mut s = discussion_session(never.clone(), start)?;
        s.advance_to(start + 1_500_000);
        let end = ended_at(&s);
        ensure(end == Some((start + hard, PhaseReason::HardStop)), || {
            format!("discussion from {start}: ended {end:?}")
        })?;
    }

    // a single failing recording resets the streak
    runner(256)
        .run(&proptest::collection::vec(any::<bool>(), 0..40), |holds| {
            let trailing = holds.iter().rev().take_while(|h| **h).count();
            let folded = holds.iter().fold(0, |s, h| update_streak(s, *h));
            prop_assert_eq!(folded, trailing);
            let mut mon = TerminationMonitor::new(config);
            let mut et = 5.0;
            let arm = config.arm_ms();
            mon.record_entropies(et, 1.0, arm - interval).unwrap();
            let mut misses = 0;
            for (i, h) in holds.iter().enumerate() {
                if !h {
                    et += if misses % 2 == 0 { 1.0 } else { -1.0 };
                    misses += 1;
                }
                mon.record_entropies(et, 1.0, arm + i as u64 * interval).unwrap();
                let run = holds[..=i].iter().rev().take_while(|h| **h).count();
                prop_assert_eq!(mon.streaks()[1], run);
                prop_assert_eq!(mon.streaks()[0], 0);
            }
            Ok(())
        })
        .map_err(|e| format!("streak property: {e}"))?;

    Ok(format!(
        "frozen matrices stop by criterion 2 on armed recording {} (100 trials, plus idle session ended by {reason:?} after {elapsed} ms); hard stop exact on 200 series and 4 session starts; streak reset holds on 256 sequences",
        c
    ))
}

// ---------------------------------------------------------------------------
// 5. service versus batch replay

fn online_offline() -> Check {
    let started = Instant::now();
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut restarts = 0;
    for seed in 0..50u64 {
        let file = random_personas(3 + (seed % 3) as usize, 8, seed);
        let duration = 1500;
        let mut variants = vec![None];
        if seed % 5 == 0 {
            variants.push(Some(200_000 + seed * 13_001));
        }
        let mut reference: Option<String> = None;
        for restart_at in variants {
            let mut config = Config::default();
            config.server.data_dir = root.path().join(format!("s{seed}-{}", restart_at.is_some()));
            let run = simulate_over_http(&file, &config, duration, seed, restart_at)
                .map_err(|e| format!("seed {seed}: {e}"))?;
            ensure(run.log == run.log_file, || {
                format!("seed {seed}: log endpoint differs from the file")
            })?;
            let path = config.server.data_dir.join(format!("{}.log", file.group));
            let batch = replay_text(&run.log_file, &path, &config).map_err(|e| format!("seed {seed}: {e}"))?;
            ensure(batch.snapshot() == &run.snapshot, || {
                format!("seed {seed}: snapshot differs")
            })?;
            let online: Value = serde_json::from_str(&run.snapshot_json).map_err(|e| e.to_string())?;
            let offline = serde_json::to_value(batch.snapshot()).map_err(|e| e.to_string())?;
            for (key, value) in online.as_object().unwrap() {
                ensure(offline.get(key) == Some(value), || {
                    format!("seed {seed}: field `{key}` differs")
                })?;
            }
            ensure(
                online.as_object().unwrap().len() == offline.as_object().unwrap().len(),
                || format!("seed {seed}: field sets differ"),
            )?;
            match &reference {
                None => reference = Some(run.snapshot_json.clone()),
                Some(first) => {
                    restarts += 1;
                    ensure(first == &run.snapshot_json, || {
                        format!("seed {seed}: restart changed the snapshot")
                    })?;
                }
            }
        }
    }
    Ok(format!(
        "50 sessions over HTTP match batch replay field for field, {restarts} restart variants identical, {:.2?}",
        started.elapsed()
    ))
}

// ---------------------------------------------------------------------------
// 6. golden fixture

fn close(a: &Value, b: &Value, tol: f64) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => (x.as_f64().unwrap() - y.as_f64().unwrap()).abs() <= tol,
        (Value::Array(x), Value::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(a, b)| close(a, b, tol)),
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| close(v, w, tol)))
        }
        _ => a == b,
    }
}

fn golden_fixture() -> Check {
    let log = manifest("../core/tests/fixtures/golden.log");
    let expected: Value = serde_json::from_str(
        &fs::read_to_string(manifest("../core/tests/fixtures/golden_expected.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    ensure(expected["generator"].is_string(), || {
        "expected values carry no generator note".into()
    })?;
    let config = Config::default();
    let s = replay_file(&log, &config).map_err(|e| e.to_string())?;
    let text = fs::read_to_string(&log).map_err(|e| e.to_string())?;
    let reencoded: String = s.events().iter().map(|e| encode_line(e) + "\n").collect();
    ensure(reencoded == text, || "log does not round-trip byte for byte".into())?;
    let snap = serde_json::to_value(s.snapshot()).map_err(|e| e.to_string())?;
    let tol = 1e-9;
    ensure(snap["at"] == expected["at"], || "snapshot time".into())?;
    ensure(snap["members"] == expected["members"], || "members".into())?;
    ensure(snap["candidates"] == expected["candidates"], || "candidates".into())?;
    ensure(close(&snap["similarity"]["rows"], &expected["similarity"], tol), || {
        "similarity matrix".into()
    })?;
    ensure(close(&snap["trust"]["rows"], &expected["trust"], tol), || {
        "trust matrix".into()
    })?;
    for tag in ["proposed", "baseline"] {
        let got = &snap["recommendations"][tag];
        let want = &expected[tag];
        ensure(got["leader"] == want["leader"], || {
            format!("{tag} leader {} vs {}", got["leader"], want["leader"])
        })?;
        let top: Vec<Value> = got["ranked"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x["restaurant"].clone())
            .collect();
        ensure(Value::Array(top.clone()) == want["top"], || {
            format!("{tag} top {top:?}")
        })?;
        ensure(close(&got["member_scores"], &want["member_scores"], tol), || {
            format!("{tag} member scores")
        })?;
        ensure(close(&got["group_ratings"], &want["group_ratings"], tol), || {
            format!("{tag} group ratings")
        })?;
    }
    let ticks = snap["entropy"].as_array().unwrap();
    let want_ticks = expected["entropy"].as_array().unwrap();
    ensure(ticks.len() == want_ticks.len(), || "entropy recordings".into())?;
    for (g, w) in ticks.iter().zip(want_ticks) {
        for (k, v) in w.as_object().unwrap() {
            ensure(close(&g[k], v, tol), || format!("entropy {k}"))?;
        }
    }
    for (fixture, format) in [
        ("golden_replay.txt", Format::Text),
        ("golden_replay.json", Format::Machine),
    ] {
        let pinned = fs::read_to_string(manifest("tests/fixtures").join(fixture)).map_err(|e| e.to_string())?;
        ensure(ReplayReport::from_session(&s).render(format) == pinned, || {
            format!("{fixture} differs")
        })?;
    }
    Ok(format!(
        "matrices, leaders ({} / {}), top-3 and entropy match the oracle; pinned reports identical",
        expected["proposed"]["leader"], expected["baseline"]["leader"]
    ))
}

// ---------------------------------------------------------------------------
// 7. invariant suites

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        RunnerConfig {
            cases,
            failure_persistence: None,
            ..RunnerConfig::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    )
}

fn rating_book(n: usize, items: usize) -> impl Strategy<Value = RatingBook> {
    proptest::collection::vec(
        proptest::collection::vec(prop_oneof![Just(0i8), -5i8..=-1, 1i8..=5], items),
        n,
    )
    .prop_map(|rows| {
        let mut b = RatingBook::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if *v != 0 {
                    b.set(&m(i), &r(j), *v);
                }
            }
        }
        b
    })
}

fn messages(n: usize) -> impl Strategy<Value = Vec<(usize, usize, Millis, f64, f64)>> {
    proptest::collection::vec(
        (0..n, 1..n, 0u64..600_000, 0.05f64..1.0, -1.0f64..1.0)
            .prop_map(move |(a, d, at, w, s)| (a, (a + d) % n, at, w, s)),
        0..12,
    )
}

fn ledger_of(msgs: &[(usize, usize, Millis, f64, f64)], shift: Millis) -> DirectedMessageLedger {
    let mut l = DirectedMessageLedger::new();
    for (a, b, at, w, s) in msgs {
        l.push(
            &m(*a),
            &m(*b),
            DirectedMessage {
                at: at - shift.min(*at),
                weight: *w,
                sentiment: *s,
            },
        );
    }
    l
}

fn lexicon_terms() -> (Vec<String>, Vec<String>) {
    let mut section = "";
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for line in DEFAULT_LEXICON.lines() {
        let line = line.trim();
        if line.starts_with('[') {
            section = line;
            continue;
        }
        if section != "[valence]" || line.is_empty() || line.starts_with('#') || line.starts_with('@') {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(term), Some(v)) = (parts.next(), parts.next()) else {
            continue;
        };
        let v: f64 = v.parse().unwrap_or(0.0);
        if term.chars().all(|c| c.is_ascii_alphanumeric()) {
            if v > 0.0 {
                pos.push(term.to_owned());
            } else if v < 0.0 {
                neg.push(term.to_owned());
            }
        }
    }
    (pos, neg)
}

fn personas_strategy() -> impl Strategy<Value = (PersonaFile, u64)> {
    (3usize..=5, any::<u64>()).prop_map(|(n, seed)| (random_personas(n, 6, seed), seed))
}

fn fmt<T: std::fmt::Debug>(r: Result<(), TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

fn invariant_suites() -> Check {
    let mut failures = Vec::new();
    let mut passed = 0;
    let mut check = |name: &str, result: Result<(), String>| match result {
        Ok(()) => passed += 1,
        Err(e) => failures.push(format!("{name}: {e}")),
    };
    let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol;

    // domain and session
    check(
        "replay determinism",
        fmt(runner(8).run(&personas_strategy(), |(file, seed)| {
            let config = Config::default();
            let s = simulate(&file, &config, 900, seed).unwrap();
            let text: String = s.events().iter().map(|e| encode_line(e) + "\n").collect();
            let again = replay_text(&text, Path::new("sim.log"), &config).unwrap();
            prop_assert!(again.snapshot() == s.snapshot());
            prop_assert!(again.trace() == s.trace());
            let reencoded: String = again.events().iter().map(|e| encode_line(e) + "\n").collect();
            prop_assert_eq!(reencoded, text);
            Ok(())
        })),
    );
    check(
        "candidate monotonicity and tick cadence",
        fmt(runner(8).run(&personas_strategy(), |(file, seed)| {
            let config = Config::default();
            let s = simulate(&file, &config, 900, seed).unwrap();
            let mut folded = Session::new(config.clone(), Strategies::from_config(&config).unwrap());
            let mut before: Vec<RestaurantId> = Vec::new();
            for e in s.events() {
                folded.apply(e.clone()).unwrap();
                let now = folded.candidates().to_vec();
                prop_assert!(before.iter().all(|c| now.contains(c)));
                before = now;
            }
            let tick = config.session.tick_s * 1000;
            for w in s.trace().windows(2) {
                if w[0].phase == w[1].phase {
                    prop_assert!(w[1].at >= w[0].at + tick, "recomputed at {} and {}", w[0].at, w[1].at);
                }
            }
            Ok(())
        })),
    );
    check(
        "replay of a simulation is a fixed point",
        fmt(runner(6).run(&personas_strategy(), |(file, seed)| {
            let config = Config::default();
            let s = simulate(&file, &config, 900, seed).unwrap();
            let text: String = s.events().iter().map(|e| encode_line(e) + "\n").collect();
            let again = replay_text(&text, Path::new("sim.log"), &config).unwrap();
            prop_assert_eq!(
                ReplayReport::from_session(&again).render(Format::Machine),
                ReplayReport::from_session(&s).render(Format::Machine)
            );
            prop_assert_eq!(parse_log(&text).unwrap().len(), s.events().len());
            Ok(())
        })),
    );

    // similarity
    check(
        "similarity symmetric and bounded",
        fmt(runner(256).run(
            &(2usize..=5).prop_flat_map(|n| (Just(n), rating_book(n, 6))),
            |(n, b)| {
                let s = similarity_matrix(&members(n), &b);
                prop_assert!(s.is_symmetric(0.0));
                prop_assert!(s.off_diagonal().all(|x| (-1.0 - 1e-12..=1.0 + 1e-12).contains(&x)));
                Ok(())
            },
        )),
    );
    check(
        "pearson shift and scale invariance",
        fmt(runner(256).run(
            &(
                proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..8),
                -10.0f64..10.0,
                0.1f64..10.0,
            ),
            |(pairs, shift, scale)| {
                let moved: Vec<(f64, f64)> = pairs.iter().map(|(a, b)| (a * scale + shift, *b)).collect();
                let (p, q) = (pearson(&pairs), pearson(&moved));
                prop_assert!(
                    close(p, q, 1e-9) || (p.abs() < 1e-6 && q.abs() < 1e-6),
                    "{} vs {}",
                    p,
                    q
                );
                Ok(())
            },
        )),
    );

    // sentiment
    let (pos, neg) = lexicon_terms();
    let scorer = LexiconScorer::default();
    check(
        "sentiment sign consistency",
        fmt(runner(256).run(
            &(
                proptest::collection::vec(0..pos.len(), 1..6),
                proptest::collection::vec(0..neg.len(), 1..6),
            ),
            |(pi, ni)| {
                let p: Vec<&str> = pi.iter().map(|i| pos[*i].as_str()).collect();
                let n: Vec<&str> = ni.iter().map(|i| neg[*i].as_str()).collect();
                prop_assert!(scorer.score(&p.join(" ")).compound() > 0.0, "{:?}", p);
                prop_assert!(scorer.score(&n.join(" ")).compound() < 0.0, "{:?}", n);
                Ok(())
            },
        )),
    );
    check(
        "sentiment bounded",
        fmt(runner(512).run(&any::<String>(), |text| {
            let c = scorer.score(&text).compound();
            prop_assert!(c.abs() <= 1.0);
            Ok(())
        })),
    );

    // recipient resolution
    let nicknames = ["Ann", "Bo", "Cy", "Di", "Ed"];
    check(
        "recipient weights normalized, sender excluded, deterministic",
        fmt(runner(256).run(
            &(2usize..=5).prop_flat_map(|n| {
                (
                    Just(n),
                    0..n,
                    proptest::collection::vec(0..n, 0..5),
                    proptest::collection::vec(prop_oneof![Just(None), (0..5usize).prop_map(Some)], 0..6),
                )
            }),
            |(n, sender, ctx_senders, words)| {
                let roster: Roster = (0..n).map(|i| (m(i), nicknames[i])).collect();
                let mut ctx = DialogueContext::new(5);
                for (k, s) in ctx_senders.iter().enumerate() {
                    ctx.push(ContextMessage {
                        sender: m(*s),
                        text: "hm".into(),
                        at: k as u64,
                    });
                }
                let text: Vec<&str> = words.iter().map(|w| w.map_or("ok", |i| nicknames[i])).collect();
                let msg = ChatMessage {
                    id: 9,
                    sender: m(sender),
                    text: text.join(" "),
                    at: 100,
                    shared_restaurant: None,
                };
                let a = HeuristicResolver.resolve(&msg, &ctx, &roster);
                prop_assert!(close(a.total(), 1.0, 1e-12));
                prop_assert!(!a.weights.contains_key(&m(sender)));
                prop_assert!(a.weights.values().all(|w| *w >= 0.0));
                prop_assert_eq!(a, HeuristicResolver.resolve(&msg, &ctx, &roster));
                Ok(())
            },
        )),
    );

    // trust
    let params = TrustParams::default();
    check(
        "frequency complementarity and shift invariance",
        fmt(runner(256).run(
            &(2usize..=5).prop_flat_map(|n| (Just(n), messages(n), 1u64..100_000)),
            |(n, msgs, d)| {
                let t_now = 600_000;
                let l = ledger_of(&msgs, 0);
                let earlier: Vec<_> = msgs.iter().map(|(a, b, at, w, s)| (*a, *b, at + d, *w, *s)).collect();
                let shifted = ledger_of(&earlier, 0);
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        let f = chat_frequency_trust(&m(i), &m(j), &l, t_now, &params);
                        let g = chat_frequency_trust(&m(j), &m(i), &l, t_now, &params);
                        prop_assert!((0.0..=1.0).contains(&f));
                        if !l.directed(&m(i), &m(j)).is_empty() || !l.directed(&m(j), &m(i)).is_empty() {
                            prop_assert!(close(f + g, 1.0, 1e-12));
                        }
                        // every message moved later by d relative to a later t_now is the same as moving all earlier
                        let f2 = chat_frequency_trust(&m(i), &m(j), &shifted, t_now + d, &params);
                        let f3 = chat_frequency_trust(&m(i), &m(j), &l, t_now + 2 * d, &params);
                        prop_assert!(close(f, f2, 1e-12));
                        prop_assert!(close(f, f3, 1e-9), "{} vs {}", f, f3);
                        let st = chat_sentiment_trust(&m(i), &m(j), &l, t_now, &params);
                        prop_assert!((-1.0..=1.0).contains(&st));
                    }
                }
                Ok(())
            },
        )),
    );
    check(
        "sentiment trust follows the more recent message",
        fmt(runner(256).run(
            &(0.05f64..1.0, 0u64..300_000, 1u64..300_000, any::<bool>()),
            |(mag, t0, gap, pos_last)| {
                let mut l = DirectedMessageLedger::new();
                let (first, last) = if pos_last { (-mag, mag) } else { (mag, -mag) };
                l.push(
                    &m(0),
                    &m(1),
                    DirectedMessage {
                        at: t0,
                        weight: 1.0,
                        sentiment: first,
                    },
                );
                l.push(
                    &m(1),
                    &m(0),
                    DirectedMessage {
                        at: t0 + gap,
                        weight: 1.0,
                        sentiment: last,
                    },
                );
                let s = chat_sentiment_trust(&m(0), &m(1), &l, 700_000, &params);
                prop_assert!(s.signum() == last.signum(), "{} vs {}", s, last);
                Ok(())
            },
        )),
    );
    check(
        "save trust fallback and range",
        fmt(runner(256).run(&(rating_book(5, 6), 1i8..=5), |(b, flat)| {
            for i in 0..5 {
                for j in 0..5 {
                    if i != j {
                        let s = save_trust(&m(i), &m(j), &b, 5);
                        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&s), "{}", s);
                    }
                }
            }
            // a member with constant ratings weighs every co-rated item equally
            let mut c = b.clone();
            for (j, _) in b.of(&m(0)).map(|(r, v)| (r.clone(), v)).collect::<Vec<_>>() {
                c.set(&m(0), &j, flat);
            }
            let co = c.co_rated(&m(0), &m(1));
            if !co.is_empty() {
                let mean = co.iter().map(|(a, b)| 1.0 - (a - b).abs() / 5.0).sum::<f64>() / co.len() as f64;
                prop_assert!(close(save_trust(&m(0), &m(1), &c, 5), mean, 1e-12));
            }
            Ok(())
        })),
    );

    // ground-node ranking
    check(
        "ranking permutation equivariance and total score",
        fmt(runner(256).run(
            &(2usize..=5).prop_flat_map(|n| {
                (
                    proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, n), n),
                    Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
                )
            }),
            |(mut rows, perm)| {
                let n = rows.len();
                for (i, row) in rows.iter_mut().enumerate() {
                    row[i] = 0.0;
                }
                let params = LeaderRankParams::default();
                let a = leaderrank_scores(&square(rows.clone()), &params);
                let permuted: Vec<Vec<f64>> = (0..n)
                    .map(|i| (0..n).map(|j| rows[perm[i]][perm[j]]).collect())
                    .collect();
                let b = leaderrank_scores(&square(permuted), &params);
                for i in 0..n {
                    prop_assert!(close(b.scores[i], a.scores[perm[i]], 1e-8));
                }
                prop_assert!(close(a.scores.iter().sum::<f64>(), (n + 1) as f64, 1e-9));
                Ok(())
            },
        )),
    );

    // weighted group ratings
    check(
        "group ratings: scale invariance, unanimity, monotonicity",
        fmt(runner(256).run(
            &(
                rating_book(4, 5),
                proptest::collection::vec(0.01f64..5.0, 4),
                0.01f64..100.0,
                0usize..4,
                0usize..5,
                1i8..=5,
            ),
            |(b, raw, c, who, item, s)| {
                let cands: CandidateSet = (0..5).map(r).collect();
                let scores = |xs: Vec<f64>| InfluenceScores {
                    members: members(4),
                    scores: xs,
                    ground: 0.0,
                    iterations: 0,
                    converged: true,
                    mass_growth: 1.0,
                };
                let base = group_ratings(&scores(raw.clone()), &b, &cands);
                let scaled = group_ratings(&scores(raw.iter().map(|x| x * c).collect()), &b, &cands);
                let names = |v: Vec<groupdine_core::recommender::RankedRestaurant>| {
                    v.into_iter().map(|x| x.restaurant).collect::<Vec<_>>()
                };
                prop_assert_eq!(names(top_k(&base, 5)), names(top_k(&scaled, 5)));
                let mut same = b.clone();
                for i in 0..4 {
                    same.set(&m(i), &r(item), s);
                }
                let g = group_ratings(&scores(raw.clone()), &same, &cands);
                prop_assert!(close(g[&r(item)], f64::from(s), 1e-12));
                let rank = |g: &BTreeMap<RestaurantId, f64>| names(top_k(g, 5)).iter().position(|x| *x == r(item));
                let mut raised = b.clone();
                let current = b.get(&m(who), &r(item)).unwrap_or(0);
                if current < 5 {
                    raised.set(&m(who), &r(item), if current == -1 { 1 } else { current + 1 });
                    let after = group_ratings(&scores(raw.clone()), &raised, &cands);
                    prop_assert!(rank(&after) <= rank(&base));
                }
                Ok(())
            },
        )),
    );

    // baseline
    check(
        "baseline symmetry, harmonic bounds, convex adjustment",
        fmt(runner(256).run(
            &(2usize..=5).prop_flat_map(|n| (Just(n), rating_book(n, 6))),
            |(n, b)| {
                let ids = members(n);
                for u in &ids {
                    for v in &ids {
                        prop_assert_eq!(distance(u, v, &b), distance(v, u, &b));
                        let (p, d) = (partnership(u, v, &b), distance(u, v, &b));
                        let h = ibgr_trust(p, d);
                        prop_assert!(h >= 0.0 && h <= 2.0 * p.min(d) + 1e-12);
                        if p > 0.0 {
                            prop_assert!(close(h, 2.0 * p * d / (p + d), 1e-12));
                        }
                    }
                }
                let cands: CandidateSet = (0..6).map(r).collect();
                let model = IbgrModel::build(&ids, &b);
                let adjusted = model.adjusted_ratings(&b, &cands, model.leader.as_ref(), 1.5);
                for item in cands.iter() {
                    let raw: Vec<f64> = ids.iter().map(|u| b.effective(u, item)).collect();
                    let (lo, hi) = raw
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
                    for row in adjusted.values() {
                        prop_assert!(row[item] >= lo - 1e-12 && row[item] <= hi + 1e-12);
                    }
                }
                Ok(())
            },
        )),
    );

    // partnership asymmetry is kept as is
    let b = book(&[("u", &[("a", 1), ("b", 2)]), ("v", &[("a", 3)])]);
    check(
        "partnership asymmetry",
        ensure(
            partnership(&"u".into(), &"v".into(), &b) == 0.5 && partnership(&"v".into(), &"u".into(), &b) == 1.0,
            || "partnership was symmetrized".into(),
        ),
    );

    if failures.is_empty() {
        Ok(format!("{passed} property suites green"))
    } else {
        Err(failures.join("; "))
    }
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        (1, "trust formulas match the direct-evaluation oracle", trust_oracle),
        (
            2,
            "influence ranking matches the dense reference",
            leaderrank_equivalence,
        ),
        (3, "baseline closed forms", ibgr_closed_forms),
        (4, "termination monitor", termination_monitor),
        (5, "online and offline snapshots agree", online_offline),
        (6, "golden session fixture", golden_fixture),
        (7, "module invariant suites", invariant_suites),
    ];
    let mut failed = 0;
    for (n, name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {n}: {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {n}: {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
