//! LeaderRank over the composite similarity/trust graph.
//!
//! Members are nodes; an edge `v -> u` carries `max(M[v][u], 0)` where
//! `M = lambda1 * similarity + lambda2 * trust`, divided by the largest such
//! entry so that member edges and ground edges share a scale (this makes the
//! ranking independent of any positive rescaling of `M`). A ground node is
//! linked to every member in both directions with weight 1. Each step moves every node's
//! score along its out-edges in proportion to edge weight; members
//! additionally receive `epsilon_ground * R(g)`. After convergence the ground
//! node's score is split evenly across members.
//!
//! With `epsilon_ground = 0` this is the canonical algorithm and total score
//! stays at `n + 1`. With `epsilon_ground > 0` the extra term injects mass on
//! every step, so scores are rescaled back to `n + 1` after each step and the
//! per-step growth factor is reported as [`InfluenceScores::mass_growth`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::MemberId;
use crate::matrix::PairMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LeaderRankError {
    #[error("matrix dimension mismatch: {0} vs {1} members")]
    DimensionMismatch(usize, usize),
    #[error("matrices are over different members")]
    MemberMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LeaderRankParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub epsilon_ground: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for LeaderRankParams {
    fn default() -> Self {
        Self {
            lambda1: 0.5,
            lambda2: 0.5,
            epsilon_ground: 0.1,
            tolerance: 1e-9,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeMatrix {
    pub matrix: PairMatrix,
    pub lambda1: f64,
    pub lambda2: f64,
}

pub fn composite_matrix(
    similarity: &PairMatrix,
    trust: &PairMatrix,
    lambda1: f64,
    lambda2: f64,
) -> Result<CompositeMatrix, LeaderRankError> {
    if similarity.len() != trust.len() {
        return Err(LeaderRankError::DimensionMismatch(similarity.len(), trust.len()));
    }
    if similarity.members() != trust.members() {
        return Err(LeaderRankError::MemberMismatch);
    }
    let n = similarity.len();
    let mut matrix = PairMatrix::zeros(similarity.members().iter().cloned());
    for i in 0..n {
        for j in 0..n {
            if i != j {
                matrix.set(i, j, lambda1 * similarity.get(i, j) + lambda2 * trust.get(i, j));
            }
        }
    }
    Ok(CompositeMatrix {
        matrix,
        lambda1,
        lambda2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceScores {
    pub members: Vec<MemberId>,
    /// Final member scores, ground share included.
    pub scores: Vec<f64>,
    /// Ground node score at convergence, before redistribution.
    pub ground: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Ratio of total score after to before the last raw step (1 when mass is conserved).
    pub mass_growth: f64,
}

impl InfluenceScores {
    pub fn score(&self, member: &MemberId) -> Option<f64> {
        let i = self.members.binary_search(member).ok()?;
        Some(self.scores[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MemberId, f64)> {
        self.members.iter().zip(self.scores.iter().copied())
    }

    /// Scores divided by their sum; uniform when the sum is not positive.
    pub fn normalized(&self) -> Vec<f64> {
        let total: f64 = self.scores.iter().sum();
        let n = self.scores.len();
        if total > 0.0 && total.is_finite() {
            self.scores.iter().map(|s| s / total).collect()
        } else {
            vec![1.0 / n.max(1) as f64; n]
        }
    }
}

/// Row-normalized transition structure of the ground-augmented graph.
/// Node `n` is the ground node.
#[derive(Debug, Clone)]
pub struct LeaderRankGraph {
    n: usize,
    /// `weights[v][u]` for members, clamped at 0, diagonal 0.
    weights: Vec<Vec<f64>>,
    /// Member out-degree including the unit edge to the ground node.
    out_degree: Vec<f64>,
    epsilon_ground: f64,
}

impl LeaderRankGraph {
    pub fn new(m: &PairMatrix, epsilon_ground: f64) -> Self {
        let n = m.len();
        let mut weights: Vec<Vec<f64>> = (0..n)
            .map(|v| {
                (0..n)
                    .map(|u| if u == v { 0.0 } else { m.get(v, u).max(0.0) })
                    .collect()
            })
            .collect();
        let largest = weights.iter().flatten().copied().fold(0.0, f64::max);
        if largest > 0.0 {
            weights.iter_mut().flatten().for_each(|w| *w /= largest);
        }
        let out_degree = weights.iter().map(|row| row.iter().sum::<f64>() + 1.0).collect();
        Self {
            n,
            weights,
            out_degree,
            epsilon_ground,
        }
    }

    pub fn node_count(&self) -> usize {
        self.n + 1
    }

    /// One raw propagation step over `n + 1` scores, without rescaling.
    pub fn step(&self, scores: &[f64]) -> Vec<f64> {
        let n = self.n;
        let ground = scores[n];
        let mut next = vec![0.0; n + 1];
        for ((score, degree), row) in scores.iter().zip(&self.out_degree).zip(&self.weights) {
            let share = score / degree;
            for (u, w) in row.iter().enumerate() {
                if *w > 0.0 {
                    next[u] += w * share;
                }
            }
            next[n] += share;
        }
        if n > 0 {
            let from_ground = ground / n as f64 + self.epsilon_ground * ground;
            next.iter_mut().take(n).for_each(|x| *x += from_ground);
        }
        next
    }
}

pub fn leaderrank_scores(m: &PairMatrix, params: &LeaderRankParams) -> InfluenceScores {
    let members = m.members().to_vec();
    let n = members.len();
    if n == 0 {
        return InfluenceScores {
            members,
            scores: Vec::new(),
            ground: 0.0,
            iterations: 0,
            converged: true,
            mass_growth: 1.0,
        };
    }
    let graph = LeaderRankGraph::new(m, params.epsilon_ground);
    let total = (n + 1) as f64;
    let mut scores = vec![1.0; n + 1];
    let mut iterations = 0;
    let mut converged = false;
    let mut mass_growth = 1.0;
    while iterations < params.max_iter {
        let mut next = graph.step(&scores);
        iterations += 1;
        if params.epsilon_ground != 0.0 {
            let sum: f64 = next.iter().sum();
            mass_growth = sum / total;
            next.iter_mut().for_each(|x| *x *= total / sum);
        }
        let delta = next.iter().zip(&scores).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        scores = next;
        if delta < params.tolerance {
            converged = true;
            break;
        }
    }
    let ground = scores[n];
    scores.truncate(n);
    scores.iter_mut().for_each(|s| *s += ground / n as f64);
    InfluenceScores {
        members,
        scores,
        ground,
        iterations,
        converged,
        mass_growth,
    }
}

/// Relative width within which two scores count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Highest-scoring member; ties go to the smallest id.
pub fn select_leader(scores: &InfluenceScores) -> Option<MemberId> {
    let max = scores.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let floor = max - TIE_TOLERANCE * max.abs().max(1.0);
    scores.iter().find(|(_, s)| *s >= floor).map(|(m, _)| m.clone())
}
