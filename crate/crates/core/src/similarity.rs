//! Pearson rating similarity between members.

use crate::domain::{MemberId, RatingBook};
use crate::matrix::PairMatrix;

/// Pearson correlation over restaurants explicitly rated by both members.
///
/// Means are taken over the co-rated set. Fewer than two co-rated restaurants,
/// or zero variance on either side, yields 0.
pub fn pcc(u: &MemberId, v: &MemberId, ratings: &RatingBook) -> f64 {
    pearson(&ratings.co_rated(u, v))
}

/// Pearson correlation of paired samples, with the same degenerate-case rule as [`pcc`].
pub fn pearson(pairs: &[(f64, f64)]) -> f64 {
    if pairs.len() < 2 {
        return 0.0;
    }
    let n = pairs.len() as f64;
    let mean_u = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_v = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut cov, mut var_u, mut var_v) = (0.0, 0.0, 0.0);
    for (a, b) in pairs {
        let (du, dv) = (a - mean_u, b - mean_v);
        cov += du * dv;
        var_u += du * du;
        var_v += dv * dv;
    }
    if var_u == 0.0 || var_v == 0.0 {
        return 0.0;
    }
    (cov / (var_u.sqrt() * var_v.sqrt())).clamp(-1.0, 1.0)
}

pub fn similarity_matrix(members: &[MemberId], ratings: &RatingBook) -> PairMatrix {
    PairMatrix::from_fn(members.iter().cloned(), |u, v| pcc(u, v, ratings))
}
