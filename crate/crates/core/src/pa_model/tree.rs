use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use crate::error::{Error, Result};

pub type NodeId = u32;

const BINARY_MAGIC: &[u8; 4] = b"PAT1";

/// A tree grown from the seed edge `{0, 1}`, stored as a parent array.
///
/// `parent(i)` is defined for `1 <= i < n` and always satisfies
/// `parent(i) < i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeSnapshot {
    parents: Vec<NodeId>,
}

impl TreeSnapshot {
    /// Builds a snapshot from `parents[i - 1] = parent of node i`.
    pub fn from_parents(parents: Vec<NodeId>) -> Result<Self> {
        if parents.is_empty() {
            return Err(Error::Structure(
                "a tree needs at least the seed edge (n >= 2)".into(),
            ));
        }
        for (idx, &p) in parents.iter().enumerate() {
            let node = idx + 1;
            if p as usize >= node {
                return Err(Error::Structure(format!(
                    "parent[{node}] = {p} is not smaller than {node}"
                )));
            }
        }
        Ok(TreeSnapshot { parents })
    }

    pub(crate) fn from_parents_unchecked(parents: Vec<NodeId>) -> Self {
        debug_assert!(!parents.is_empty());
        TreeSnapshot { parents }
    }

    pub fn n(&self) -> usize {
        self.parents.len() + 1
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        (node as usize)
            .checked_sub(1)
            .and_then(|i| self.parents.get(i).copied())
    }

    /// `parents()[i - 1]` is the parent of node `i`.
    pub fn parents(&self) -> &[NodeId] {
        &self.parents
    }

    pub fn degrees(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.n()];
        for (idx, &p) in self.parents.iter().enumerate() {
            deg[idx + 1] += 1;
            deg[p as usize] += 1;
        }
        deg
    }

    /// Text format: line `i` (1-based) holds the parent of node `i`.
    pub fn write_text<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        for p in &self.parents {
            writeln!(w, "{p}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_text<R: Read>(r: R) -> Result<Self> {
        let parents = read_integer_lines(r, "parent")?;
        TreeSnapshot::from_parents(parents)
    }

    /// Binary format: `PAT1`, node count as little-endian `u64`, then the
    /// `n - 1` parents as little-endian `u32`.
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.n() as u64).to_le_bytes())?;
        for p in &self.parents {
            w.write_all(&p.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Format("not a binary tree snapshot".into()));
        }
        let mut buf8 = [0u8; 8];
        r.read_exact(&mut buf8)?;
        let n = u64::from_le_bytes(buf8);
        if n < 2 || n > u32::MAX as u64 {
            return Err(Error::Format(format!("invalid node count {n}")));
        }
        let mut parents = Vec::with_capacity(n as usize - 1);
        let mut buf4 = [0u8; 4];
        for _ in 1..n {
            r.read_exact(&mut buf4)?;
            parents.push(u32::from_le_bytes(buf4));
        }
        TreeSnapshot::from_parents(parents)
    }

    /// Reads either format, detected by the binary magic.
    pub fn read_any(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(BINARY_MAGIC) {
            TreeSnapshot::read_binary(bytes)
        } else {
            TreeSnapshot::read_text(bytes)
        }
    }
}

fn read_integer_lines<R: Read, T: std::str::FromStr>(r: R, what: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        let v = s
            .parse::<T>()
            .map_err(|_| Error::Format(format!("line {}: invalid {what} {s:?}", i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

/// Node counts per degree, `N_k(n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeCensus {
    /// `counts[k] = N_k`; index 0 is always zero.
    counts: Vec<u64>,
    n: u64,
}

impl DegreeCensus {
    pub fn from_degrees<I: IntoIterator<Item = u32>>(degrees: I) -> Self {
        let mut counts = vec![0u64];
        let mut n = 0;
        for d in degrees {
            let d = d as usize;
            if d >= counts.len() {
                counts.resize(d + 1, 0);
            }
            counts[d] += 1;
            n += 1;
        }
        DegreeCensus { counts, n }
    }

    /// Builds a census from `(k, N_k)` pairs; degree 0 is rejected.
    pub fn from_counts<I: IntoIterator<Item = (u32, u64)>>(pairs: I) -> Result<Self> {
        let mut counts = vec![0u64];
        let mut n = 0;
        for (k, c) in pairs {
            if k == 0 && c > 0 {
                return Err(Error::Structure(
                    "isolated nodes (degree 0) are not allowed".into(),
                ));
            }
            let k = k as usize;
            if k >= counts.len() {
                counts.resize(k + 1, 0);
            }
            counts[k] += c;
            n += c;
        }
        Ok(DegreeCensus { counts, n })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn count(&self, k: u32) -> u64 {
        self.counts.get(k as usize).copied().unwrap_or(0)
    }

    pub fn max_degree(&self) -> u32 {
        self.counts.iter().rposition(|&c| c > 0).unwrap_or(0) as u32
    }

    /// `(k, N_k)` for every degree with `N_k > 0`.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| (k as u32, c))
    }

    /// `tail[k] = N_{>k}` for `k = 0..=max_degree`.
    pub fn tail_counts(&self) -> Vec<u64> {
        let d = self.max_degree() as usize;
        let mut tail = vec![0u64; d + 1];
        let mut acc = 0;
        for k in (0..=d).rev() {
            tail[k] = acc;
            acc += self.counts[k];
        }
        tail
    }

    pub fn tail_count(&self, k: u32) -> u64 {
        self.counts.iter().skip(k as usize + 1).sum()
    }

    /// `Σ_k k · N_k`.
    pub fn degree_sum(&self) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .map(|(k, &c)| k as u64 * c)
            .sum()
    }

    /// `Σ_k k · N_k = 2 (n - 1)`.
    pub fn satisfies_handshake(&self) -> bool {
        self.n >= 2 && self.degree_sum() == 2 * (self.n - 1)
    }

    /// Empirical degree law `P_k(n) = N_k / n`.
    pub fn proportion(&self, k: u32) -> f64 {
        self.count(k) as f64 / self.n as f64
    }
}

/// Degree census of a snapshot, with both seed nodes at their plain degree.
pub fn census_from_snapshot(t: &TreeSnapshot) -> DegreeCensus {
    DegreeCensus::from_degrees(t.degrees())
}

/// Degree of the chosen parent at each attachment.
///
/// `chosen_degree()[j]` belongs to node `j + 2`; the seed edge has no entry.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EvolutionLog {
    chosen_degree: Vec<u32>,
}

impl EvolutionLog {
    pub fn from_chosen_degrees(chosen_degree: Vec<u32>) -> Result<Self> {
        if let Some(j) = chosen_degree.iter().position(|&d| d == 0) {
            return Err(Error::Structure(format!(
                "node {} attached to a degree-0 node",
                j + 2
            )));
        }
        Ok(EvolutionLog { chosen_degree })
    }

    pub(crate) fn with_capacity(cap: usize) -> Self {
        EvolutionLog {
            chosen_degree: Vec::with_capacity(cap),
        }
    }

    pub(crate) fn push(&mut self, degree: u32) {
        self.chosen_degree.push(degree);
    }

    pub fn chosen_degrees(&self) -> &[u32] {
        &self.chosen_degree
    }

    pub fn chosen_degrees_mut(&mut self) -> &mut Vec<u32> {
        &mut self.chosen_degree
    }

    pub fn len(&self) -> usize {
        self.chosen_degree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chosen_degree.is_empty()
    }

    /// `attachments[k] = N_{→k}`, the number of arrivals that picked a
    /// degree-`k` node.
    pub fn attachment_counts(&self) -> Vec<u64> {
        let max = self.chosen_degree.iter().copied().max().unwrap_or(0) as usize;
        let mut counts = vec![0u64; max + 1];
        for &d in &self.chosen_degree {
            counts[d as usize] += 1;
        }
        counts
    }

    pub fn write_text<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        for d in &self.chosen_degree {
            writeln!(w, "{d}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_text<R: Read>(r: R) -> Result<Self> {
        EvolutionLog::from_chosen_degrees(read_integer_lines(r, "degree")?)
    }
}
