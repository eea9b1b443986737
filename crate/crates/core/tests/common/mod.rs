#![allow(dead_code)]

use rand::Rng;
use sediment_lab::grid::GridSpec;
use sediment_lab::transport::{distance, DiscreteMeasure};

/// Minimum transport cost by enumerating every basis of the transportation
/// polytope: each spanning tree of the bipartite source/sink graph fixes a
/// unique flow, and the optimum is attained at a nonnegative one.
pub fn brute_force_cost(supply: &[f64], demand: &[f64], cost: &dyn Fn(usize, usize) -> f64) -> f64 {
    let (n, m) = (supply.len(), demand.len());
    let arcs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let k = n + m - 1;
    let mut best = f64::INFINITY;
    let mut pick: Vec<usize> = (0..k).collect();
    loop {
        if let Some(c) = tree_cost(&pick, &arcs, supply, demand, cost) {
            best = best.min(c);
        }
        // next k-combination of arcs
        let Some(i) = (0..k).rev().find(|&i| pick[i] < arcs.len() - k + i) else {
            return best;
        };
        pick[i] += 1;
        for t in i + 1..k {
            pick[t] = pick[t - 1] + 1;
        }
    }
}

fn tree_cost(
    pick: &[usize],
    arcs: &[(usize, usize)],
    supply: &[f64],
    demand: &[f64],
    cost: &dyn Fn(usize, usize) -> f64,
) -> Option<f64> {
    let n = supply.len();
    let nodes = n + demand.len();
    let mut rest: Vec<f64> = supply.iter().chain(demand).copied().collect();
    let mut degree = vec![0usize; nodes];
    for &a in pick {
        let (i, j) = arcs[a];
        degree[i] += 1;
        degree[n + j] += 1;
    }
    if degree.contains(&0) {
        return None;
    }
    let mut used = vec![false; pick.len()];
    let mut total = 0.0;
    // peel leaves; a forest with a cycle never empties
    for _ in 0..pick.len() {
        let leaf = (0..nodes).find(|&u| degree[u] == 1)?;
        let slot = (0..pick.len()).find(|&s| {
            let (i, j) = arcs[pick[s]];
            !used[s] && (i == leaf || n + j == leaf)
        })?;
        used[slot] = true;
        let (i, j) = arcs[pick[slot]];
        let other = if i == leaf { n + j } else { i };
        let f = rest[leaf];
        if f < -1e-12 {
            return None;
        }
        total += f * cost(i, j);
        rest[other] -= f;
        rest[leaf] = 0.0;
        degree[leaf] -= 1;
        degree[other] -= 1;
    }
    Some(total)
}

/// Oracle for the L1 cost between two measures on a grid. Shared mass is
/// cancelled first, which leaves the metric transport cost unchanged.
pub fn oracle_cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let g = *mu.grid();
    let net: Vec<f64> = mu.masses().iter().zip(nu.masses()).map(|(a, b)| a - b).collect();
    let src: Vec<usize> = (0..g.cells()).filter(|&k| net[k] > 0.0).collect();
    let dst: Vec<usize> = (0..g.cells()).filter(|&k| net[k] < 0.0).collect();
    if src.is_empty() {
        return 0.0;
    }
    let supply: Vec<f64> = src.iter().map(|&k| net[k]).collect();
    let demand: Vec<f64> = dst.iter().map(|&k| -net[k]).collect();
    brute_force_cost(&supply, &demand, &|i, j| distance(&g, src[i], dst[j]))
}

/// Random balanced pair of measures with total mass one.
pub fn random_pair<R: Rng>(g: GridSpec, rng: &mut R, density: f64) -> (DiscreteMeasure, DiscreteMeasure) {
    let draw = |rng: &mut R| -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..g.cells())
                .map(|_| if rng.random::<f64>() < density { rng.random_range(0.05..1.0) } else { 0.0 })
                .collect();
            let s: f64 = v.iter().sum();
            if s > 0.0 {
                return v.into_iter().map(|x| x / s).collect();
            }
        }
    };
    let a = draw(rng);
    let b = draw(rng);
    let mu = DiscreteMeasure::new(g, a).unwrap();
    let nu = DiscreteMeasure::new(g, b).unwrap();
    let nu = nu.scaled(mu.total() / nu.total()).unwrap();
    (mu, nu)
}
