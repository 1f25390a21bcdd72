//! Test-only oracles, independent of the library's sampling code.
#![allow(dead_code)]

use std::collections::HashMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Exact probability of every attachment history (parent array of nodes
/// `1..n`) for the discrete PA chain started from the seed edge.
pub fn enumerate_histories(f: impl Fn(u32) -> f64 + Copy, n: usize) -> HashMap<Vec<u32>, f64> {
    fn go(
        f: impl Fn(u32) -> f64 + Copy,
        n: usize,
        parents: &mut Vec<u32>,
        deg: &mut Vec<u32>,
        prob: f64,
        out: &mut HashMap<Vec<u32>, f64>,
    ) {
        if deg.len() == n {
            *out.entry(parents.clone()).or_default() += prob;
            return;
        }
        let total: f64 = deg.iter().map(|&d| f(d)).sum();
        for v in 0..deg.len() {
            let p = f(deg[v]) / total;
            deg[v] += 1;
            deg.push(1);
            parents.push(v as u32);
            go(f, n, parents, deg, prob * p, out);
            parents.pop();
            deg.pop();
            deg[v] -= 1;
        }
    }
    let mut out = HashMap::new();
    go(f, n, &mut vec![0], &mut vec![1, 1], 1.0, &mut out);
    out
}

/// Pearson chi-square p-value of observed counts against probabilities.
pub fn chi_square_p(observed: &[u64], probs: &[f64]) -> f64 {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = (observed.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// Chi-square p-value for observed histories against the exact table.
pub fn history_p_value(counts: &HashMap<Vec<u32>, u64>, exact: &HashMap<Vec<u32>, f64>) -> f64 {
    assert!(
        counts.keys().all(|k| exact.contains_key(k)),
        "impossible history observed"
    );
    let mut keys: Vec<_> = exact.keys().cloned().collect();
    keys.sort();
    let obs: Vec<u64> = keys
        .iter()
        .map(|k| counts.get(k).copied().unwrap_or(0))
        .collect();
    let probs: Vec<f64> = keys.iter().map(|k| exact[k]).collect();
    chi_square_p(&obs, &probs)
}

/// Degrees by explicit adjacency lists.
pub fn adjacency_degrees(parents: &[u32]) -> Vec<u32> {
    let n = parents.len() + 1;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &p) in parents.iter().enumerate() {
        adj[i + 1].push(p as usize);
        adj[p as usize].push(i + 1);
    }
    adj.iter().map(|a| a.len() as u32).collect()
}
