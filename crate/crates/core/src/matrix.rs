use serde::{Deserialize, Serialize};

use crate::domain::MemberId;

/// Square member-by-member matrix, rows and columns in sorted member order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMatrix {
    members: Vec<MemberId>,
    rows: Vec<Vec<f64>>,
}

impl PairMatrix {
    /// Zero matrix over `members`, which are sorted and deduplicated.
    pub fn zeros(members: impl IntoIterator<Item = MemberId>) -> Self {
        let mut members: Vec<MemberId> = members.into_iter().collect();
        members.sort();
        members.dedup();
        let n = members.len();
        Self {
            members,
            rows: vec![vec![0.0; n]; n],
        }
    }

    /// Fills every off-diagonal entry from `f(row, col)`; the diagonal stays 0.
    pub fn from_fn(
        members: impl IntoIterator<Item = MemberId>,
        mut f: impl FnMut(&MemberId, &MemberId) -> f64,
    ) -> Self {
        let mut m = Self::zeros(members);
        for i in 0..m.len() {
            for j in 0..m.len() {
                if i != j {
                    m.rows[i][j] = f(&m.members[i], &m.members[j]);
                }
            }
        }
        m
    }

    /// Builds from explicit rows. Panics if `rows` is not `members.len()` square
    /// or members are not sorted and unique.
    pub fn from_rows(members: Vec<MemberId>, rows: Vec<Vec<f64>>) -> Self {
        assert!(
            members.windows(2).all(|w| w[0] < w[1]),
            "members must be sorted and unique"
        );
        assert_eq!(rows.len(), members.len());
        assert!(rows.iter().all(|r| r.len() == members.len()));
        Self { members, rows }
    }

    pub fn empty() -> Self {
        Self::zeros(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[MemberId] {
        &self.members
    }

    pub fn index_of(&self, member: &MemberId) -> Option<usize> {
        self.members.binary_search(member).ok()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.rows[i][j] = value;
    }

    pub fn entry(&self, from: &MemberId, to: &MemberId) -> Option<f64> {
        Some(self.rows[self.index_of(from)?][self.index_of(to)?])
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn transpose(&self) -> Self {
        let n = self.len();
        let mut rows = vec![vec![0.0; n]; n];
        for (i, row) in self.rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                rows[j][i] = *v;
            }
        }
        Self {
            members: self.members.clone(),
            rows,
        }
    }

    pub fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().filter(move |(j, _)| *j != i).map(|(_, v)| *v))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.len();
        (0..n).all(|i| (0..n).all(|j| (self.rows[i][j] - self.rows[j][i]).abs() <= tol))
    }
}
