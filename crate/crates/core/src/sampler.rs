//! Dynamic sampler over existing nodes with probability `f(deg)/F(G)`.
//!
//! Nodes are bucketed by degree. A Fenwick tree over the degree classes
//! stores the class weights `N_k · f(k)`, so a draw costs one prefix
//! search over `D` classes (the current capacity) plus one uniform pick
//! inside the class. Promotions move a node between neighbouring classes
//! with a swap-remove.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::pa_model::{NodeId, PaFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Slot {
    /// 0 marks an absent node.
    degree: u32,
    index: u32,
}

const ABSENT: Slot = Slot {
    degree: 0,
    index: 0,
};

/// Fenwick tree over classes `1..=cap`, `cap` a power of two.
#[derive(Debug, Clone)]
struct WeightTree {
    tree: Vec<f64>,
}

impl WeightTree {
    fn with_capacity(cap: usize) -> Self {
        debug_assert!(cap.is_power_of_two());
        WeightTree {
            tree: vec![0.0; cap + 1],
        }
    }

    fn capacity(&self) -> usize {
        self.tree.len() - 1
    }

    fn from_weights(cap: usize, weights: impl Fn(usize) -> f64) -> Self {
        let mut tree = vec![0.0; cap + 1];
        for i in 1..=cap {
            tree[i] += weights(i);
            let j = i + (i & i.wrapping_neg());
            if j <= cap {
                tree[j] += tree[i];
            }
        }
        WeightTree { tree }
    }

    fn add(&mut self, mut i: usize, delta: f64, touched: &Cell<u64>) {
        let cap = self.capacity();
        let mut t = 0;
        while i <= cap {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
            t += 1;
        }
        touched.set(touched.get() + t);
    }

    fn prefix(&self, mut i: usize) -> f64 {
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    fn total(&self) -> f64 {
        self.tree[self.capacity()]
    }

    /// Smallest class `i` with `prefix(i) > target`, clamped to the capacity.
    fn find(&self, mut target: f64, touched: &Cell<u64>) -> usize {
        let cap = self.capacity();
        let mut pos = 0;
        let mut step = cap;
        let mut t = 0;
        while step > 0 {
            let next = pos + step;
            if next <= cap {
                t += 1;
                if self.tree[next] <= target {
                    pos = next;
                    target -= self.tree[next];
                }
            }
            step >>= 1;
        }
        touched.set(touched.get() + t);
        (pos + 1).min(cap)
    }
}

/// Degree-class index maintaining the total preference `F(G) = Σ_v f(deg v)`.
///
/// Single-owner and not `Sync`; use one instance per simulation.
#[derive(Debug, Clone)]
pub struct DegreeClassIndex {
    f: PaFunction,
    /// `f_values[k] = f(k)`, grown on demand.
    f_values: Vec<f64>,
    members: Vec<Vec<NodeId>>,
    position: Vec<Slot>,
    weights: WeightTree,
    total_weight: f64,
    len: usize,
    touched: Cell<u64>,
}

impl DegreeClassIndex {
    pub fn new(f: PaFunction) -> Self {
        DegreeClassIndex::with_capacity(f, 0)
    }

    /// Pre-sizes the node table for `nodes` ids.
    pub fn with_capacity(f: PaFunction, nodes: usize) -> Self {
        let cap = 16;
        let mut idx = DegreeClassIndex {
            f,
            f_values: vec![f64::NAN],
            members: vec![Vec::new(); cap + 1],
            position: Vec::with_capacity(nodes),
            weights: WeightTree::with_capacity(cap),
            total_weight: 0.0,
            len: 0,
            touched: Cell::new(0),
        };
        idx.ensure_f(cap);
        idx
    }

    fn ensure_f(&mut self, k: usize) {
        while self.f_values.len() <= k {
            let next = self.f_values.len() as u64;
            self.f_values.push(self.f.value(next));
        }
    }

    fn ensure_class(&mut self, k: usize) {
        let cap = self.weights.capacity();
        if k <= cap {
            return;
        }
        let new_cap = k.next_power_of_two().max(cap * 2);
        self.ensure_f(new_cap);
        self.members.resize(new_cap + 1, Vec::new());
        let members = &self.members;
        let f_values = &self.f_values;
        self.weights = WeightTree::from_weights(new_cap, |i| members[i].len() as f64 * f_values[i]);
        self.touched.set(self.touched.get() + new_cap as u64);
    }

    pub fn function(&self) -> &PaFunction {
        &self.f
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The incrementally maintained `F(G)`.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// `F(G)` recomputed from the class sizes.
    pub fn recompute_total(&self) -> f64 {
        self.members
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, m)| m.len() as f64 * self.f_values[k])
            .sum()
    }

    /// Weight-tree entries touched so far (array reads and writes).
    pub fn touched(&self) -> u64 {
        self.touched.get()
    }

    /// Number of degree classes the weight tree currently spans.
    pub fn class_capacity(&self) -> usize {
        self.weights.capacity()
    }

    pub fn degree(&self, node: NodeId) -> Option<u32> {
        match self.position.get(node as usize) {
            Some(s) if s.degree > 0 => Some(s.degree),
            _ => None,
        }
    }

    pub fn class(&self, k: u32) -> &[NodeId] {
        self.members
            .get(k as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Current maximum degree among indexed nodes.
    pub fn max_degree(&self) -> u32 {
        self.members
            .iter()
            .rposition(|m| !m.is_empty())
            .unwrap_or(0) as u32
    }

    /// Adds `node` with degree 1.
    pub fn insert_leaf(&mut self, node: NodeId) -> Result<()> {
        let i = node as usize;
        if i >= self.position.len() {
            self.position.resize(i + 1, ABSENT);
        } else if self.position[i].degree > 0 {
            return Err(Error::Logic(format!("node {node} is already indexed")));
        }
        let class = &mut self.members[1];
        self.position[i] = Slot {
            degree: 1,
            index: class.len() as u32,
        };
        class.push(node);
        let w = self.f_values[1];
        self.weights.add(1, w, &self.touched);
        self.total_weight += w;
        self.len += 1;
        Ok(())
    }

    /// Moves `node` from degree `k` to `k + 1` and returns the new degree.
    pub fn promote(&mut self, node: NodeId) -> Result<u32> {
        let slot = match self.position.get(node as usize) {
            Some(s) if s.degree > 0 => *s,
            _ => return Err(Error::Logic(format!("node {node} is not indexed"))),
        };
        let k = slot.degree as usize;
        self.ensure_class(k + 1);

        let class = &mut self.members[k];
        class.swap_remove(slot.index as usize);
        if let Some(&moved) = class.get(slot.index as usize) {
            self.position[moved as usize].index = slot.index;
        }
        let up = &mut self.members[k + 1];
        self.position[node as usize] = Slot {
            degree: (k + 1) as u32,
            index: up.len() as u32,
        };
        up.push(node);

        let (fk, fk1) = (self.f_values[k], self.f_values[k + 1]);
        self.weights.add(k, -fk, &self.touched);
        self.weights.add(k + 1, fk1, &self.touched);
        self.total_weight += fk1 - fk;
        Ok((k + 1) as u32)
    }

    /// Draws a node with probability `f(deg v) / F(G)`.
    ///
    /// `u_class` picks the degree class through the weight tree, `u_member`
    /// picks uniformly inside it. Both must lie in `[0, 1)`.
    pub fn sample(&self, u_class: f64, u_member: f64) -> Result<NodeId> {
        if self.len == 0 {
            return Err(Error::State("cannot sample from an empty index".into()));
        }
        let target = u_class * self.weights.total();
        let mut k = self.weights.find(target, &self.touched);
        if self.members[k].is_empty() {
            // Rounding residue in the tree can point at an empty class.
            k = self.nearest_occupied(k);
        }
        let class = &self.members[k];
        let j = ((u_member * class.len() as f64) as usize).min(class.len() - 1);
        Ok(class[j])
    }

    fn nearest_occupied(&self, k: usize) -> usize {
        (1..k)
            .rev()
            .chain(k + 1..self.members.len())
            .find(|&j| !self.members[j].is_empty())
            .expect("index is non-empty")
    }

    /// Selection probability of `node` as implied by the weight tree:
    /// (class weight / tree total) · (1 / class size).
    pub fn selection_probability(&self, node: NodeId) -> Option<f64> {
        let k = self.degree(node)? as usize;
        let class_weight = self.weights.prefix(k) - self.weights.prefix(k - 1);
        Some(class_weight / self.weights.total() / self.members[k].len() as f64)
    }

    /// Checks the structural invariants; returns a description of the
    /// first violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut seen = 0;
        for (k, class) in self.members.iter().enumerate() {
            for (j, &node) in class.iter().enumerate() {
                let s = self.position.get(node as usize).copied().unwrap_or(ABSENT);
                if s.degree as usize != k || s.index as usize != j {
                    return Err(format!(
                        "node {node} at class {k} slot {j} but recorded as {s:?}"
                    ));
                }
                seen += 1;
            }
        }
        if seen != self.len {
            return Err(format!("{seen} nodes in classes, {} recorded", self.len));
        }
        let total = self.recompute_total();
        let tol = 1e-9 * total.max(f64::MIN_POSITIVE);
        if (total - self.total_weight).abs() > tol {
            return Err(format!(
                "total weight drift: {} vs {}",
                self.total_weight, total
            ));
        }
        for k in 1..self.members.len() {
            let expect: f64 = (1..=k)
                .map(|i| self.members[i].len() as f64 * self.f_values[i])
                .sum();
            if (self.weights.prefix(k) - expect).abs() > tol {
                return Err(format!(
                    "prefix sum at class {k} off: {} vs {expect}",
                    self.weights.prefix(k)
                ));
            }
        }
        Ok(())
    }
}
