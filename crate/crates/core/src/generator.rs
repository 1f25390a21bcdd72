//! Discrete PA tree growth from the seed edge.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pa_model::{EvolutionLog, NodeId, PaFunction, TreeSnapshot};
use crate::rng::{rng_from_seed, SimRng};
use crate::sampler::DegreeClassIndex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthConfig {
    pub n_target: u64,
    pub f: PaFunction,
    pub seed: u64,
    #[serde(default)]
    pub record_log: bool,
}

impl GrowthConfig {
    pub fn new(f: PaFunction, n_target: u64, seed: u64) -> Self {
        GrowthConfig {
            n_target,
            f,
            seed,
            record_log: false,
        }
    }

    pub fn with_log(mut self) -> Self {
        self.record_log = true;
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.n_target < 2 {
            return Err(Error::Config(format!(
                "n_target must be at least 2, got {}",
                self.n_target
            )));
        }
        if self.n_target > NodeId::MAX as u64 {
            return Err(Error::Config(format!(
                "n_target {} exceeds the node id range",
                self.n_target
            )));
        }
        Ok(())
    }
}

/// Growth state that can be advanced in stages.
///
/// Growing to `m` and then to `n` consumes the random stream exactly as
/// growing to `n` in one call.
#[derive(Debug, Clone)]
pub struct Grower {
    index: DegreeClassIndex,
    parents: Vec<NodeId>,
    log: Option<EvolutionLog>,
    rng: SimRng,
}

impl Grower {
    /// Starts from the seed edge `{0, 1}`.
    pub fn new(f: PaFunction, seed: u64, record_log: bool) -> Self {
        Grower::with_rng(f, rng_from_seed(seed), record_log, 0)
    }

    pub fn with_rng(f: PaFunction, rng: SimRng, record_log: bool, expected_n: usize) -> Self {
        let mut index = DegreeClassIndex::with_capacity(f, expected_n);
        index.insert_leaf(0).expect("fresh index");
        index.insert_leaf(1).expect("fresh index");
        let mut parents = Vec::with_capacity(expected_n.saturating_sub(1));
        parents.push(0);
        Grower {
            index,
            parents,
            log: record_log.then(|| EvolutionLog::with_capacity(expected_n.saturating_sub(2))),
            rng,
        }
    }

    pub fn n(&self) -> usize {
        self.parents.len() + 1
    }

    pub fn index(&self) -> &DegreeClassIndex {
        &self.index
    }

    /// Attaches one new node and returns its parent.
    pub fn step(&mut self) -> NodeId {
        let u_class: f64 = self.rng.random();
        let u_member: f64 = self.rng.random();
        let parent = self
            .index
            .sample(u_class, u_member)
            .expect("tree is never empty");
        let new = self.n() as NodeId;
        if let Some(log) = self.log.as_mut() {
            log.push(self.index.degree(parent).expect("sampled node is indexed"));
        }
        self.index.insert_leaf(new).expect("fresh node id");
        self.index.promote(parent).expect("sampled node is indexed");
        self.parents.push(parent);
        parent
    }

    pub fn grow_to(&mut self, n: usize) {
        if n > self.parents.capacity() + 1 {
            self.parents.reserve(n - 1 - self.parents.len());
        }
        while self.n() < n {
            self.step();
        }
    }

    pub fn snapshot(&self) -> TreeSnapshot {
        TreeSnapshot::from_parents_unchecked(self.parents.clone())
    }

    pub fn log(&self) -> Option<&EvolutionLog> {
        self.log.as_ref()
    }

    pub fn finish(self) -> (TreeSnapshot, Option<EvolutionLog>) {
        (TreeSnapshot::from_parents_unchecked(self.parents), self.log)
    }
}

/// Grows a tree of `cfg.n_target` nodes; deterministic in `cfg.seed`.
pub fn grow(cfg: &GrowthConfig) -> Result<(TreeSnapshot, Option<EvolutionLog>)> {
    cfg.check()?;
    let n = cfg.n_target as usize;
    let mut g = Grower::with_rng(cfg.f.clone(), rng_from_seed(cfg.seed), cfg.record_log, n);
    g.grow_to(n);
    Ok(g.finish())
}

/// Replays the log against the parent array: true iff every logged degree
/// equals the parent's degree at the moment of attachment.
pub fn replay_check(t: &TreeSnapshot, log: &EvolutionLog) -> Result<bool> {
    let n = t.n();
    if log.len() != n - 2 {
        return Err(Error::Structure(format!(
            "log has {} entries, tree needs {}",
            log.len(),
            n - 2
        )));
    }
    let mut deg = vec![0u32; n];
    deg[0] = 1;
    deg[1] = 1;
    for (j, &chosen) in log.chosen_degrees().iter().enumerate() {
        let node = j + 2;
        let p = t.parents()[node - 1] as usize;
        if deg[p] != chosen {
            return Ok(false);
        }
        deg[p] += 1;
        deg[node] = 1;
    }
    Ok(true)
}
