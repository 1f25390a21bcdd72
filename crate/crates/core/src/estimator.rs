//! Snapshot-only estimation of the rescaled preference `r_k`.
//!
//! `r̂_k(n) = N_{>k}(n) / N_k(n)` needs nothing but the final degree
//! census. When the evolution log happens to be available,
//! [`lemma_check`] confirms that the number of arrivals that picked a
//! degree-`k` node equals `N_{>k}`.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::pa_model::{DegreeCensus, EvolutionLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Raw,
    ByDegreeOne,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateEntry {
    pub k: u32,
    pub n_k: u64,
    pub n_gt_k: u64,
    /// Absent when `N_k = 0`.
    pub r_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateTable {
    pub entries: Vec<EstimateEntry>,
    pub n: u64,
    pub normalization: Normalization,
}

impl EstimateTable {
    pub fn get(&self, k: u32) -> Option<&EstimateEntry> {
        k.checked_sub(1).and_then(|i| self.entries.get(i as usize))
    }

    /// `r̂_k`, or `None` when undefined or beyond the observed degrees.
    pub fn r_hat(&self, k: u32) -> Option<f64> {
        self.get(k).and_then(|e| e.r_hat)
    }

    pub fn present(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.entries
            .iter()
            .filter_map(|e| e.r_hat.map(|r| (e.k, r)))
    }

    /// CSV with header `k,N_k,N_gt_k,r_hat`; absent estimates are empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["k", "N_k", "N_gt_k", "r_hat"])?;
        for e in &self.entries {
            let r = e.r_hat.map(|r| r.to_string()).unwrap_or_default();
            out.write_record([e.k.to_string(), e.n_k.to_string(), e.n_gt_k.to_string(), r])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `r̂_k = N_{>k}/N_k` for `k = 1..=max degree`.
pub fn estimate(census: &DegreeCensus) -> Result<EstimateTable> {
    if census.n() < 2 {
        return Err(Error::Data(format!(
            "need a tree with at least 2 nodes, census has {}",
            census.n()
        )));
    }
    let tail = census.tail_counts();
    let entries = (1..=census.max_degree())
        .map(|k| {
            let n_k = census.count(k);
            let n_gt_k = tail[k as usize];
            EstimateEntry {
                k,
                n_k,
                n_gt_k,
                r_hat: (n_k > 0).then(|| n_gt_k as f64 / n_k as f64),
            }
        })
        .collect();
    Ok(EstimateTable {
        entries,
        n: census.n(),
        normalization: Normalization::Raw,
    })
}

/// Divides every estimate by `r̂_1`.
pub fn normalize_by_degree_one(t: &EstimateTable) -> Result<EstimateTable> {
    let r1 = match t.r_hat(1) {
        Some(r) if r > 0.0 => r,
        Some(_) => return Err(Error::Normalization("r_hat_1 is zero".into())),
        None => {
            return Err(Error::Normalization(
                "r_hat_1 is undefined (no degree-1 nodes)".into(),
            ))
        }
    };
    let entries = t
        .entries
        .iter()
        .map(|e| EstimateEntry {
            r_hat: e.r_hat.map(|r| r / r1),
            ..*e
        })
        .collect();
    Ok(EstimateTable {
        entries,
        n: t.n,
        normalization: Normalization::ByDegreeOne,
    })
}

/// Replaces the present estimates by their nondecreasing rearrangement.
pub fn monotonize(t: &EstimateTable) -> EstimateTable {
    let mut values: Vec<f64> = t.entries.iter().filter_map(|e| e.r_hat).collect();
    values.sort_by(f64::total_cmp);
    let mut sorted = values.into_iter();
    let entries = t
        .entries
        .iter()
        .map(|e| EstimateEntry {
            r_hat: e.r_hat.and_then(|_| sorted.next()),
            ..*e
        })
        .collect();
    EstimateTable {
        entries,
        n: t.n,
        normalization: t.normalization,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaMismatch {
    pub k: u32,
    /// Arrivals that picked a degree-`k` node.
    pub attachments: u64,
    pub n_gt_k: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaReport {
    pub checked_up_to: u32,
    pub mismatches: Vec<LemmaMismatch>,
}

impl LemmaReport {
    pub fn holds(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Compares `N_{→k}` from the log with `N_{>k}` from the census for every
/// `k` where either can be nonzero.
pub fn lemma_check(census: &DegreeCensus, log: &EvolutionLog) -> LemmaReport {
    let attachments = log.attachment_counts();
    let tail = census.tail_counts();
    let upto = census
        .max_degree()
        .max(attachments.len().saturating_sub(1) as u32)
        .max(1);
    let mismatches = (1..=upto)
        .filter_map(|k| {
            let a = attachments.get(k as usize).copied().unwrap_or(0);
            let g = tail.get(k as usize).copied().unwrap_or(0);
            (a != g).then_some(LemmaMismatch {
                k,
                attachments: a,
                n_gt_k: g,
            })
        })
        .collect();
    LemmaReport {
        checked_up_to: upto,
        mismatches,
    }
}

/// Reads whitespace separated `u v` pairs, checks that they form a tree
/// and returns its degree census.
///
/// Node labels are arbitrary integers; blank lines and `#` comments are
/// skipped.
pub fn census_from_edges<R: Read>(r: R) -> Result<DegreeCensus> {
    let mut ids: HashMap<u64, usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let s = line.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        let mut it = s.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<u64> {
            tok.and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Format(format!("line {}: expected two integers", lineno + 1)))
        };
        let (u, v) = (parse(it.next())?, parse(it.next())?);
        if it.next().is_some() {
            return Err(Error::Format(format!(
                "line {}: expected two integers",
                lineno + 1
            )));
        }
        if u == v {
            return Err(Error::Structure(format!("self-loop at node {u}")));
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return Err(Error::Structure(format!("duplicate edge {u} {v}")));
        }
        let next = ids.len();
        let a = *ids.entry(u).or_insert(next);
        let next = ids.len();
        let b = *ids.entry(v).or_insert(next);
        edges.push((a, b));
    }
    let n = ids.len();
    if n < 2 || edges.len() != n - 1 {
        return Err(Error::Structure(format!(
            "{} edges on {n} nodes is not a tree",
            edges.len()
        )));
    }
    let mut uf = UnionFind::new(n);
    let mut degree = vec![0u32; n];
    for &(a, b) in &edges {
        if !uf.union(a, b) {
            return Err(Error::Structure("edges contain a cycle".into()));
        }
        degree[a] += 1;
        degree[b] += 1;
    }
    Ok(DegreeCensus::from_degrees(degree))
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}
