//! Continuous-time branching process embedding of PA growth.
//!
//! Every individual carries an exponential clock. An individual whose
//! degree (children plus one) is `d` gives birth at rate `f(d)`; the
//! newborn enters with degree 1. By memorylessness only the parent's clock
//! is redrawn at a birth, so each event costs one heap pop and two pushes.
//!
//! [`RootMode::TwoRoots`] starts from the seed edge, both ends at degree 1:
//! two independent single-root processes whose union is the discrete PA
//! tree. [`RootMode::SingleRoot`] starts from one individual whose degree
//! counts one higher than its child count, as in the adapted model.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pa_model::{NodeId, PaFunction, TreeSnapshot};
use crate::rng::{rng_from_seed, SimRng};
use crate::stats::ols_slope;
use crate::theory::MalthusianSolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootMode {
    SingleRoot,
    TwoRoots,
}

impl std::str::FromStr for RootMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single_root" => Ok(RootMode::SingleRoot),
            "two_roots" => Ok(RootMode::TwoRoots),
            other => Err(Error::Config(format!("unknown root mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pending {
    time: f64,
    node: NodeId,
}

impl Eq for Pending {}

impl Ord for Pending {
    // Reversed: the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Population `Z1`, and the counts of individuals with degree equal to
/// and greater than the tracked degree, at calendar time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub z1: u64,
    pub z_eq: u64,
    pub z_gt: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Tracked degree `k`.
    pub k: u32,
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&TrajectoryPoint> {
        self.points.last()
    }

    /// CSV with header `t,Z1,Z_eq_k,Z_gt_k`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "Z1", "Z_eq_k", "Z_gt_k"])?;
        for p in &self.points {
            out.write_record([
                p.t.to_string(),
                p.z1.to_string(),
                p.z_eq.to_string(),
                p.z_gt.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// One birth: `parent` got child `child` at time `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Birth {
    pub time: f64,
    pub parent: NodeId,
    pub child: NodeId,
}

/// Event-queue simulator state.
#[derive(Debug, Clone)]
pub struct CtbpSim {
    f: PaFunction,
    mode: RootMode,
    rng: SimRng,
    time: f64,
    degree: Vec<u32>,
    parents: Vec<NodeId>,
    queue: BinaryHeap<Pending>,
    k: u32,
    z_eq: u64,
    z_gt: u64,
}

impl CtbpSim {
    pub fn new(f: PaFunction, mode: RootMode, tracked_degree: u32, seed: u64) -> Result<Self> {
        if tracked_degree == 0 {
            return Err(Error::Config("tracked degree must be at least 1".into()));
        }
        let mut sim = CtbpSim {
            f,
            mode,
            rng: rng_from_seed(seed),
            time: 0.0,
            degree: Vec::new(),
            parents: Vec::new(),
            queue: BinaryHeap::new(),
            k: tracked_degree,
            z_eq: 0,
            z_gt: 0,
        };
        let roots = match mode {
            RootMode::SingleRoot => 1,
            RootMode::TwoRoots => 2,
        };
        for _ in 0..roots {
            sim.add_individual()?;
        }
        if mode == RootMode::TwoRoots {
            sim.parents.push(0);
        }
        Ok(sim)
    }

    fn draw_clock(&mut self, node: NodeId) -> Result<()> {
        let rate = self.f.value(self.degree[node as usize] as u64);
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::Numeric(format!(
                "birth rate {rate} of node {node} is not positive and finite"
            )));
        }
        let u: f64 = self.rng.random();
        let wait = -(1.0 - u).ln() / rate;
        self.queue.push(Pending {
            time: self.time + wait,
            node,
        });
        Ok(())
    }

    fn add_individual(&mut self) -> Result<NodeId> {
        let id = self.degree.len() as NodeId;
        self.degree.push(1);
        if self.k == 1 {
            self.z_eq += 1;
        }
        self.draw_clock(id)?;
        Ok(id)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn population(&self) -> usize {
        self.degree.len()
    }

    pub fn mode(&self) -> RootMode {
        self.mode
    }

    /// Total birth rate `F(G) = Σ_x f(deg x)`.
    pub fn total_rate(&self) -> f64 {
        self.degree.iter().map(|&d| self.f.value(d as u64)).sum()
    }

    pub fn point(&self) -> TrajectoryPoint {
        TrajectoryPoint {
            t: self.time,
            z1: self.degree.len() as u64,
            z_eq: self.z_eq,
            z_gt: self.z_gt,
        }
    }

    /// Time of the next pending birth.
    pub fn next_event_time(&self) -> Option<f64> {
        self.queue.peek().map(|p| p.time)
    }

    /// Replaces every pending clock with a fresh draw from a new stream.
    /// Memorylessness makes this distributionally invisible.
    pub fn resample_clocks(&mut self, seed: u64) -> Result<()> {
        self.rng = rng_from_seed(seed);
        self.queue.clear();
        for node in 0..self.degree.len() as NodeId {
            self.draw_clock(node)?;
        }
        Ok(())
    }

    /// Fires the earliest clock.
    pub fn step(&mut self) -> Result<Birth> {
        let next = self
            .queue
            .pop()
            .expect("every individual has a pending clock");
        self.time = next.time;
        let parent = next.node;
        let d = &mut self.degree[parent as usize];
        if *d == self.k {
            self.z_eq -= 1;
            self.z_gt += 1;
        } else if *d + 1 == self.k {
            self.z_eq += 1;
        }
        *d += 1;
        self.draw_clock(parent)?;
        let child = self.add_individual()?;
        self.parents.push(parent);
        Ok(Birth {
            time: self.time,
            parent,
            child,
        })
    }

    /// Genealogical tree; `None` for a lone single root.
    pub fn snapshot(&self) -> Option<TreeSnapshot> {
        match self.mode {
            RootMode::TwoRoots => Some(TreeSnapshot::from_parents_unchecked(self.parents.clone())),
            RootMode::SingleRoot if !self.parents.is_empty() => {
                Some(TreeSnapshot::from_parents_unchecked(self.parents.clone()))
            }
            RootMode::SingleRoot => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop as soon as the population reaches this size.
    Size(usize),
    /// Stop at this calendar time (births after it are not applied).
    Time(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtbpOutcome {
    pub snapshot: Option<TreeSnapshot>,
    pub trajectory: Trajectory,
}

/// Runs `sim` until `stop`, recording a trajectory point every
/// `record_every` births (and always the first and last state).
pub fn run(sim: &mut CtbpSim, stop: StopRule, record_every: usize) -> Result<CtbpOutcome> {
    let every = record_every.max(1);
    let mut points = vec![sim.point()];
    let mut births = 0usize;
    loop {
        match stop {
            StopRule::Size(n) if sim.population() >= n => break,
            StopRule::Time(t) if sim.next_event_time().is_none_or(|next| next > t) => {
                sim.time = sim.time.max(t);
                break;
            }
            _ => {}
        }
        sim.step()?;
        births += 1;
        if births.is_multiple_of(every) {
            points.push(sim.point());
        }
    }
    if !births.is_multiple_of(every) || matches!(stop, StopRule::Time(_)) {
        let last = sim.point();
        if points.last() != Some(&last) {
            points.push(last);
        }
    }
    Ok(CtbpOutcome {
        snapshot: sim.snapshot(),
        trajectory: Trajectory { k: sim.k, points },
    })
}

/// Grows the branching process until the population is `n_target`.
pub fn simulate_until_size(
    f: &PaFunction,
    n_target: usize,
    seed: u64,
    mode: RootMode,
    tracked_degree: u32,
) -> Result<CtbpOutcome> {
    let min = match mode {
        RootMode::SingleRoot => 1,
        RootMode::TwoRoots => 2,
    };
    if n_target < min {
        return Err(Error::Config(format!(
            "n_target must be at least {min} in {mode:?} mode"
        )));
    }
    if n_target > NodeId::MAX as usize {
        return Err(Error::Config(format!(
            "n_target {n_target} exceeds the node id range"
        )));
    }
    let mut sim = CtbpSim::new(f.clone(), mode, tracked_degree, seed)?;
    run(&mut sim, StopRule::Size(n_target), 1)
}

/// Default fraction of the time span used by [`estimate_growth_rate`].
pub const GROWTH_WINDOW: f64 = 0.5;

/// Least-squares slope of `log Z1` against `t` over the last `window`
/// fraction of the time span.
pub fn estimate_growth_rate(trajectory: &Trajectory, window: f64) -> Result<f64> {
    let (first, last) = match (trajectory.points.first(), trajectory.points.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Data("empty trajectory".into())),
    };
    if last.z1 < 100 {
        return Err(Error::Data(format!("population {} is below 100", last.z1)));
    }
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::Config(format!(
            "window must lie in (0, 1], got {window}"
        )));
    }
    let cut = last.t - window * (last.t - first.t);
    let (ts, logs): (Vec<f64>, Vec<f64>) = trajectory
        .points
        .iter()
        .filter(|p| p.t >= cut)
        .map(|p| (p.t, (p.z1 as f64).ln()))
        .unzip();
    if ts.len() < 3 {
        return Err(Error::Data(format!(
            "only {} trajectory points in the fitting window",
            ts.len()
        )));
    }
    ols_slope(&ts, &logs).ok_or_else(|| Error::Data("degenerate fitting window".into()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioCheck {
    pub k: u32,
    /// `Z_gt / Z_eq` at the end of the trajectory; absent when `Z_eq = 0`.
    pub observed: Option<f64>,
    /// `p_{>k} / p_k` from the limit law.
    pub theoretical: f64,
}

pub fn ratio_limit_check(trajectory: &Trajectory, sol: &MalthusianSolution) -> Result<RatioCheck> {
    let last = trajectory
        .last()
        .ok_or_else(|| Error::Data("empty trajectory".into()))?;
    let k = trajectory.k;
    let theoretical = match (sol.p(k as usize), sol.p_gt(k as usize)) {
        (Some(p), Some(gt)) if p > 0.0 => gt / p,
        _ => sol.function().value(k as u64) / sol.lambda_star,
    };
    let observed = (last.z_eq > 0).then(|| last.z_gt as f64 / last.z_eq as f64);
    Ok(RatioCheck {
        k,
        observed,
        theoretical,
    })
}
