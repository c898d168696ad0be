//! Entropy-based discussion termination.
//!
//! The trust and similarity matrices are reduced to one entropy value each at
//! every recording. Once the monitor is armed, a stop criterion that holds on
//! `consecutive` successive recordings ends the discussion; the hard stop ends
//! it unconditionally.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Millis;
use crate::matrix::PairMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum TerminationError {
    #[error("arm time {arm_s}s must precede hard stop {hard_stop_s}s")]
    ArmAfterHardStop { arm_s: u64, hard_stop_s: u64 },
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("recording at {at_ms}ms is earlier than {earliest_ms}ms")]
    OutOfOrder { at_ms: Millis, earliest_ms: Millis },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TerminationConfig {
    pub arm_s: u64,
    pub hard_stop_s: u64,
    pub epsilon: f64,
    /// Recordings a criterion must hold on in a row.
    pub consecutive: usize,
    /// Number of one-step changes averaged by the third criterion.
    pub window: usize,
    pub interval_s: u64,
}

impl Default for TerminationConfig {
    fn default() -> Self {
        Self {
            arm_s: 600,
            hard_stop_s: 1200,
            epsilon: 0.01,
            consecutive: 3,
            window: 3,
            interval_s: 30,
        }
    }
}

impl TerminationConfig {
    pub fn validate(&self) -> Result<(), TerminationError> {
        if self.arm_s >= self.hard_stop_s {
            return Err(TerminationError::ArmAfterHardStop {
                arm_s: self.arm_s,
                hard_stop_s: self.hard_stop_s,
            });
        }
        if self.consecutive == 0 {
            return Err(TerminationError::ZeroCount("consecutive"));
        }
        if self.window == 0 {
            return Err(TerminationError::ZeroCount("window"));
        }
        if self.interval_s == 0 {
            return Err(TerminationError::ZeroCount("interval_s"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(TerminationError::BadEpsilon(self.epsilon));
        }
        Ok(())
    }

    pub fn arm_ms(&self) -> Millis {
        self.arm_s * 1000
    }

    pub fn hard_stop_ms(&self) -> Millis {
        self.hard_stop_s * 1000
    }

    pub fn interval_ms(&self) -> Millis {
        self.interval_s * 1000
    }
}

/// Shannon entropy (nats) of the off-diagonal entries read as a distribution.
/// Negative entries are lifted by the minimum first; an all-zero result is 0.
pub fn matrix_entropy(m: &PairMatrix) -> f64 {
    let entries: Vec<f64> = m.off_diagonal().collect();
    entropy_of(&entries)
}

pub fn entropy_of(entries: &[f64]) -> f64 {
    let min = entries.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if min < 0.0 { -min } else { 0.0 };
    let total: f64 = entries.iter().map(|x| x + shift).sum();
    if !(total > 0.0) {
        return 0.0;
    }
    let h: f64 = entries
        .iter()
        .map(|x| (x + shift) / total)
        .filter(|p| *p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    h.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyTick {
    pub index: usize,
    /// Time since the discussion started.
    pub elapsed_ms: Millis,
    pub entropy_trust: f64,
    pub entropy_similarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Criterion(u8),
    HardStop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Continue,
    Stop(StopReason),
}

/// Length of the trailing run of satisfied recordings after one more.
pub fn update_streak(streak: usize, holds: bool) -> usize {
    if holds {
        streak + 1
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminationMonitor {
    config: TerminationConfig,
    ticks: Vec<EntropyTick>,
    streaks: [usize; 3],
}

impl TerminationMonitor {
    pub fn new(config: TerminationConfig) -> Self {
        Self {
            config,
            ticks: Vec::new(),
            streaks: [0; 3],
        }
    }

    pub fn config(&self) -> &TerminationConfig {
        &self.config
    }

    pub fn ticks(&self) -> &[EntropyTick] {
        &self.ticks
    }

    pub fn streaks(&self) -> [usize; 3] {
        self.streaks
    }

    /// Elapsed time at which the next recording is due.
    pub fn next_recording_ms(&self) -> Millis {
        self.ticks
            .last()
            .map_or(0, |t| t.elapsed_ms + self.config.interval_ms())
    }

    pub fn record_tick(
        &mut self,
        trust: &PairMatrix,
        similarity: &PairMatrix,
        elapsed_ms: Millis,
    ) -> Result<EntropyTick, TerminationError> {
        self.record_entropies(matrix_entropy(trust), matrix_entropy(similarity), elapsed_ms)
    }

    pub fn record_entropies(
        &mut self,
        entropy_trust: f64,
        entropy_similarity: f64,
        elapsed_ms: Millis,
    ) -> Result<EntropyTick, TerminationError> {
        if !self.ticks.is_empty() && elapsed_ms < self.next_recording_ms() {
            return Err(TerminationError::OutOfOrder {
                at_ms: elapsed_ms,
                earliest_ms: self.next_recording_ms(),
            });
        }
        let tick = EntropyTick {
            index: self.ticks.len(),
            elapsed_ms,
            entropy_trust,
            entropy_similarity,
        };
        self.ticks.push(tick);
        if elapsed_ms >= self.config.arm_ms() {
            let held = self.criteria_on_latest();
            for (streak, holds) in self.streaks.iter_mut().zip(held) {
                *streak = update_streak(*streak, holds);
            }
        }
        Ok(tick)
    }

    /// Which of the three criteria hold on the latest recording.
    pub fn criteria_on_latest(&self) -> [bool; 3] {
        let eps = self.config.epsilon;
        let n = self.ticks.len();
        let Some(last) = self.ticks.last() else {
            return [false; 3];
        };
        let c1 = last.entropy_trust < last.entropy_similarity;
        let change = |i: usize| {
            let (a, b) = (&self.ticks[i], &self.ticks[i - 1]);
            (
                (a.entropy_trust - b.entropy_trust).abs(),
                (a.entropy_similarity - b.entropy_similarity).abs(),
            )
        };
        let c2 = n >= 2 && {
            let (dt, ds) = change(n - 1);
            dt < eps && ds < eps
        };
        // changes between t-i and t-i-1 for i = 1..=window
        let w = self.config.window;
        let c3 = n >= w + 2 && {
            let (st, ss) = (1..=w).fold((0.0, 0.0), |(st, ss), i| {
                let (dt, ds) = change(n - 1 - i);
                (st + dt, ss + ds)
            });
            st / (w as f64) < eps && ss / (w as f64) < eps
        };
        [c1, c2, c3]
    }

    /// Hard stop first, then the lowest-numbered criterion with a full streak.
    pub fn should_terminate(&self, elapsed_ms: Millis) -> Decision {
        if elapsed_ms >= self.config.hard_stop_ms() {
            return Decision::Stop(StopReason::HardStop);
        }
        if elapsed_ms < self.config.arm_ms() {
            return Decision::Continue;
        }
        self.streaks
            .iter()
            .position(|s| *s >= self.config.consecutive)
            .map_or(Decision::Continue, |i| {
                Decision::Stop(StopReason::Criterion(i as u8 + 1))
            })
    }
}
