//! Replay and comparison reports in text and key-sorted JSON form.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::domain::{GroupId, Phase, PhaseReason};
use crate::matrix::PairMatrix;
use crate::pipeline::{Snapshot, TraceRow};
use crate::session::Session;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Machine,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Format::Text),
            "machine" | "json" => Ok(Format::Machine),
            other => Err(format!("unknown format `{other}` (expected text or machine)")),
        }
    }
}

/// Recursively orders object keys so output does not depend on map
/// implementation details.
pub fn sorted_value(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, sorted_value(v));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sorted_value).collect()),
        other => other,
    }
}

pub fn to_sorted_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report types serialize");
    let mut s = serde_json::to_string_pretty(&sorted_value(v)).expect("json values serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub group: Option<GroupId>,
    pub events: usize,
    pub phase: Phase,
    pub ended_by: Option<PhaseReason>,
    pub snapshot: Snapshot,
    pub trace: Vec<TraceRow>,
}

impl ReplayReport {
    pub fn from_session(s: &Session) -> Self {
        Self {
            group: s.group().cloned(),
            events: s.events().len(),
            phase: s.phase(),
            ended_by: s.snapshot().ended_by,
            snapshot: s.snapshot().clone(),
            trace: s.trace().to_vec(),
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Machine => to_sorted_json(self),
            Format::Text => self.to_text(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let snap = &self.snapshot;
        let _ = writeln!(out, "group: {}", self.group.as_ref().map_or("-", |g| g.as_str()));
        let _ = writeln!(out, "events: {}", self.events);
        let _ = writeln!(
            out,
            "phase: {}{}",
            self.phase,
            self.ended_by
                .map(|r| format!(" (ended by {})", r.encode()))
                .unwrap_or_default()
        );
        let _ = writeln!(
            out,
            "snapshot: seq {} at {} ms",
            snap.seq.map_or("-".into(), |s| s.to_string()),
            snap.at
        );
        let _ = writeln!(out, "members: {}", join(snap.members.iter()));
        let _ = writeln!(out, "candidates: {}", join(snap.candidates.iter()));
        for (tag, rec) in &snap.recommendations {
            let _ = writeln!(
                out,
                "\n[{tag}] leader {}",
                rec.leader.as_ref().map_or("-", |l| l.as_str())
            );
            for (i, r) in rec.ranked.iter().enumerate() {
                let _ = writeln!(out, "  {}. {} {:.6}", i + 1, r.restaurant, r.rating);
            }
            let _ = writeln!(out, "  member scores:");
            for (m, s) in &rec.member_scores {
                let _ = writeln!(out, "    {m} {s:.6}");
            }
        }
        write_matrix(&mut out, "similarity", &snap.similarity);
        write_matrix(&mut out, "trust", &snap.trust);
        let _ = writeln!(out, "\nentropy ticks: {}", snap.entropy.len());
        for t in &snap.entropy {
            let _ = writeln!(
                out,
                "  #{:<3} {:>7.1}s trust {:.6} similarity {:.6}",
                t.index,
                t.elapsed_ms as f64 / 1000.0,
                t.entropy_trust,
                t.entropy_similarity
            );
        }
        let _ = writeln!(out, "\nrecomputations: {}", self.trace.len());
        out
    }
}

fn join<T: std::fmt::Display>(items: impl Iterator<Item = T>) -> String {
    let v: Vec<String> = items.map(|x| x.to_string()).collect();
    if v.is_empty() {
        "-".into()
    } else {
        v.join(" ")
    }
}

fn write_matrix(out: &mut String, name: &str, m: &PairMatrix) {
    let _ = writeln!(out, "\n{name} matrix:");
    if m.is_empty() {
        let _ = writeln!(out, "  (empty)");
        return;
    }
    let _ = write!(out, "  {:>10}", "");
    for c in m.members() {
        let _ = write!(out, " {c:>10}");
    }
    out.push('\n');
    for (i, r) in m.members().iter().enumerate() {
        let _ = write!(out, "  {r:>10}");
        for j in 0..m.len() {
            let _ = write!(out, " {:>10.6}", m.get(i, j));
        }
        out.push('\n');
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub rows: usize,
    /// Share of rows where both algorithms name the same leader.
    pub leader_agreement: Option<f64>,
    pub mean_top_overlap: Option<f64>,
    pub mean_rank_correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub rows: Vec<TraceRow>,
    pub summary: CompareSummary,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, s) = xs.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| s / n as f64)
}

impl CompareReport {
    pub fn from_trace(trace: &[TraceRow]) -> Self {
        let led: Vec<&TraceRow> = trace
            .iter()
            .filter(|r| r.proposed_leader.is_some() || r.baseline_leader.is_some())
            .collect();
        let summary = CompareSummary {
            rows: trace.len(),
            leader_agreement: mean(led.iter().map(|r| {
                if r.proposed_leader == r.baseline_leader {
                    1.0
                } else {
                    0.0
                }
            })),
            mean_top_overlap: mean(led.iter().map(|r| r.top_overlap as f64)),
            mean_rank_correlation: mean(trace.iter().filter_map(|r| r.rank_correlation)),
        };
        Self {
            rows: trace.to_vec(),
            summary,
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Machine => to_sorted_json(self),
            Format::Text => self.to_text(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>6} {:>9} {:<11} {:<10} {:<10} {:>5} {:>7} {:>7}  {:<24} {:<24}",
            "seq", "at_s", "phase", "proposed", "baseline", "same", "overlap", "tau", "proposed_top", "baseline_top"
        );
        for r in &self.rows {
            let leader = |l: &Option<crate::domain::MemberId>| l.as_ref().map_or("-".to_owned(), |m| m.to_string());
            let _ = writeln!(
                out,
                "{:>6} {:>9.1} {:<11} {:<10} {:<10} {:>5} {:>7} {:>7}  {:<24} {:<24}",
                r.seq,
                r.at as f64 / 1000.0,
                r.phase.as_str(),
                leader(&r.proposed_leader),
                leader(&r.baseline_leader),
                if r.proposed_leader == r.baseline_leader {
                    "yes"
                } else {
                    "no"
                },
                r.top_overlap,
                r.rank_correlation.map_or("-".into(), |t| format!("{t:.3}")),
                join(r.proposed_top.iter()),
                join(r.baseline_top.iter()),
            );
        }
        let s = &self.summary;
        let opt = |x: Option<f64>| x.map_or("-".into(), |v| format!("{v:.4}"));
        let _ = writeln!(
            out,
            "\nrows {} | leader agreement {} | mean top-k overlap {} | mean rank correlation {}",
            s.rows,
            opt(s.leader_agreement),
            opt(s.mean_top_overlap),
            opt(s.mean_rank_correlation)
        );
        out
    }
}
