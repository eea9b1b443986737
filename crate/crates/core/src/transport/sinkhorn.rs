//! Entropic transport in the log domain, rounded onto the exact marginals.

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornOutput {
    /// Dense normalized coupling, row-major `n x m`, with exact marginals.
    pub coupling: Vec<f64>,
    /// Potential on the sinks.
    pub g: Vec<f64>,
    pub iterations: usize,
    /// L1 row-marginal error before rounding.
    pub marginal_error: f64,
}

fn logsumexp(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let top = vals.clone().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + vals.map(|v| (v - top).exp()).sum::<f64>().ln()
}

/// Alternating scaling for probability vectors `a` (rows) and `b` (columns)
/// with cost matrix `cost` (row-major). Stops once the row marginals are
/// within `tol` in L1.
pub fn solve(a: &[f64], b: &[f64], cost: &[f64], eps: f64, max_iter: usize, tol: f64) -> Result<SinkhornOutput> {
    let (n, m) = (a.len(), b.len());
    let la: Vec<f64> = a.iter().map(|v| v.ln()).collect();
    let lb: Vec<f64> = b.iter().map(|v| v.ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut err = f64::INFINITY;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        for i in 0..n {
            let row = &cost[i * m..(i + 1) * m];
            f[i] = eps * (la[i] - logsumexp((0..m).map(|j| (g[j] - row[j]) / eps)));
        }
        for j in 0..m {
            g[j] = eps * (lb[j] - logsumexp((0..n).map(|i| (f[i] - cost[i * m + j]) / eps)));
        }
        err = 0.0;
        for i in 0..n {
            let row = &cost[i * m..(i + 1) * m];
            let s: f64 = (0..m).map(|j| ((f[i] + g[j] - row[j]) / eps).exp()).sum();
            err += (s - a[i]).abs();
        }
        if err <= tol {
            break;
        }
    }
    if err > tol {
        return Err(LabError::Convergence { iterations: it, residual: err });
    }
    let mut p: Vec<f64> = (0..n * m)
        .map(|k| ((f[k / m] + g[k % m] - cost[k]) / eps).exp())
        .collect();
    round_to_marginals(&mut p, a, b);
    Ok(SinkhornOutput { coupling: p, g, iterations: it, marginal_error: err })
}

/// Projects a nonnegative matrix onto the coupling polytope of `(a, b)`
/// (Altschuler, Weed and Rigollet rounding).
fn round_to_marginals(p: &mut [f64], a: &[f64], b: &[f64]) {
    let (n, m) = (a.len(), b.len());
    for i in 0..n {
        let r: f64 = p[i * m..(i + 1) * m].iter().sum();
        if r > a[i] {
            let s = a[i] / r;
            p[i * m..(i + 1) * m].iter_mut().for_each(|v| *v *= s);
        }
    }
    for j in 0..m {
        let c: f64 = (0..n).map(|i| p[i * m + j]).sum();
        if c > b[j] {
            let s = b[j] / c;
            (0..n).for_each(|i| p[i * m + j] *= s);
        }
    }
    let er: Vec<f64> = (0..n).map(|i| (a[i] - p[i * m..(i + 1) * m].iter().sum::<f64>()).max(0.0)).collect();
    let ec: Vec<f64> = (0..m).map(|j| (b[j] - (0..n).map(|i| p[i * m + j]).sum::<f64>()).max(0.0)).collect();
    let norm: f64 = ec.iter().sum();
    if norm > 0.0 {
        for i in 0..n {
            for j in 0..m {
                p[i * m + j] += er[i] * ec[j] / norm;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_hits_marginals() {
        let a = [0.3, 0.7];
        let b = [0.5, 0.25, 0.25];
        let mut p = vec![0.2, 0.1, 0.0, 0.1, 0.4, 0.3];
        round_to_marginals(&mut p, &a, &b);
        for i in 0..2 {
            assert!((p[i * 3..i * 3 + 3].iter().sum::<f64>() - a[i]).abs() < 1e-15);
        }
        for j in 0..3 {
            assert!((p[j] + p[3 + j] - b[j]).abs() < 1e-15);
        }
        assert!(p.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn two_point_problem() {
        let out = solve(&[1.0], &[1.0], &[2.0], 0.1, 10, 1e-12).unwrap();
        assert_eq!(out.coupling, vec![1.0]);
    }

    #[test]
    fn reports_non_convergence() {
        let cost = [0.0, 1.0, 1.0, 0.0];
        let r = solve(&[0.9, 0.1], &[0.1, 0.9], &cost, 0.01, 1, 1e-15);
        assert!(matches!(r, Err(LabError::Convergence { iterations: 1, .. })));
    }
}
