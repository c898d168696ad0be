//! Independent reference implementations shared by integration tests.

#![allow(dead_code)]

/// Ground-node ranking by explicit dense power iteration over the full
/// `(n+1) x (n+1)` row-stochastic transition matrix.
pub fn dense_leaderrank(m: &[Vec<f64>], eps: f64, tol: f64, max_iter: usize) -> Vec<f64> {
    let n = m.len();
    if n == 0 {
        return Vec::new();
    }
    let mut w: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { m[i][j].max(0.0) }).collect())
        .collect();
    let top = w.iter().flatten().copied().fold(0.0, f64::max);
    if top > 0.0 {
        for x in w.iter_mut().flatten() {
            *x /= top;
        }
    }
    let mut p = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        let deg: f64 = w[i].iter().sum::<f64>() + 1.0;
        for j in 0..n {
            p[i][j] = w[i][j] / deg;
        }
        p[i][n] = 1.0 / deg;
    }
    for j in 0..n {
        p[n][j] = 1.0 / n as f64;
    }
    let mut x = vec![1.0; n + 1];
    for _ in 0..max_iter {
        let mut next: Vec<f64> = (0..=n).map(|j| (0..=n).map(|i| x[i] * p[i][j]).sum()).collect();
        if eps != 0.0 {
            for v in next.iter_mut().take(n) {
                *v += eps * x[n];
            }
            let total: f64 = next.iter().sum();
            for v in next.iter_mut() {
                *v *= (n + 1) as f64 / total;
            }
        }
        let delta = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        if delta < tol {
            break;
        }
    }
    (0..n).map(|i| x[i] + x[n] / n as f64).collect()
}

/// Index of the largest score; the first index wins ties within `1e-9`.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = max - 1e-9 * max.abs().max(1.0);
    scores.iter().position(|s| *s >= floor)
}
