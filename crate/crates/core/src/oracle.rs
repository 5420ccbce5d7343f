//! Exact reference solver for small merging instances.
//!
//! The search enumerates semi-active schedules: allocations are appended one
//! at a time to a channel and start as early as the channel, the ONU and the
//! request allow. Placements are generated in non-decreasing start order,
//! which loses no optimum (any schedule can be left-shifted into one of
//! that shape without delaying an allocation) and removes most permutations.
//! Unused channels are interchangeable, so only the lowest one is tried.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dtwa::{assign_resource, DtwaConfig};
use crate::error::{ConstraintViolation, Error, Result};
use crate::model::{
    Allocation, ChannelState, FlowId, MergedFrame, Nanos, OnuTable, PriorityKey, SlaTable, DEFAULT_GUARD_TIME,
};
use crate::swa::OnuChannelMap;

pub const MAX_ORACLE_ALLOCATIONS: usize = 12;
pub const MAX_ORACLE_CHANNELS: usize = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// ONU serialization and tuning gaps are enforced, as in the heuristics.
    #[default]
    Physical,
    /// Only channel exclusivity (with guard), single assignment and no early start.
    Literal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleInstance {
    pub allocations: Vec<Allocation>,
    pub n_channels: usize,
    pub tuning_time: Nanos,
    #[serde(default = "default_guard")]
    pub guard_time: Nanos,
    /// Length of the frame the instance was cut from; informational.
    #[serde(default)]
    pub horizon: Nanos,
    pub sla_table: SlaTable,
    #[serde(default)]
    pub mode: OracleMode,
}

fn default_guard() -> Nanos {
    DEFAULT_GUARD_TIME
}

impl OracleInstance {
    /// Builds an instance and fills in every allocation's `max_time`.
    pub fn new(mut allocations: Vec<Allocation>, n_channels: usize, tuning_time: Nanos, sla_table: SlaTable) -> Result<Self> {
        for a in &mut allocations {
            let class = sla_table.get(a.sla_id).ok_or(Error::UnknownSla {
                seq: a.seq,
                vno_id: a.vno_id,
                onu_id: a.onu_id,
                sla_id: a.sla_id,
            })?;
            a.max_time = Some(a.start_time + class.max_latency);
        }
        let horizon = allocations.iter().map(|a| a.end_time()).max().unwrap_or_default();
        Ok(OracleInstance {
            allocations,
            n_channels,
            tuning_time,
            guard_time: DEFAULT_GUARD_TIME,
            horizon,
            sla_table,
            mode: OracleMode::Physical,
        })
    }

    pub fn with_mode(mut self, mode: OracleMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_guard(mut self, guard_time: Nanos) -> Self {
        self.guard_time = guard_time;
        self
    }

    pub fn len(&self) -> usize {
        self.allocations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.allocations.is_empty()
    }

    pub fn validate(&self, max_allocations: usize, max_channels: usize) -> Result<()> {
        if self.n_channels == 0 {
            return Err(Error::config("n_channels", "at least one channel is required"));
        }
        if self.allocations.len() > max_allocations || self.n_channels > max_channels {
            return Err(Error::OracleSizeLimit {
                allocations: self.allocations.len(),
                channels: self.n_channels,
                max_allocations,
                max_channels,
            });
        }
        for a in &self.allocations {
            if a.max_time.is_none() {
                return Err(Error::config(
                    "allocations",
                    format!("allocation #{} has no max_time", a.seq),
                ));
            }
            if self.sla_table.get(a.sla_id).is_none() {
                return Err(Error::UnknownSla {
                    seq: a.seq,
                    vno_id: a.vno_id,
                    onu_id: a.onu_id,
                    sla_id: a.sla_id,
                });
            }
        }
        Ok(())
    }

    fn threshold(&self, flow: FlowId) -> Option<f64> {
        self.sla_table
            .get(flow.sla_id)
            .filter(|c| !c.best_effort)
            .map(|c| c.breach_threshold)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse {
            context: "oracle instance".into(),
            message: e.to_string(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            context: "oracle instance".into(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        OracleInstance::from_json(&text)
    }
}

/// Channel and start time given to allocation `index` of the instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub index: usize,
    pub channel: usize,
    pub sched_time: Nanos,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchLog {
    pub nodes: u64,
    pub pruned: u64,
    pub leaves: u64,
    pub improvements: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    /// One placement per allocation, in instance order.
    pub assignment: Vec<Placement>,
    /// Number of breached flows.
    pub objective: usize,
    pub total_delay: Nanos,
    pub proof: SearchLog,
}

/// Breached-flow count and total delay of a full assignment, after checking
/// that the assignment is feasible for the instance.
pub fn evaluate_objective(assignment: &[Placement], instance: &OracleInstance) -> Result<(usize, Nanos)> {
    let allocs = &instance.allocations;

    let mut expected: BTreeMap<FlowId, usize> = BTreeMap::new();
    for a in allocs {
        *expected.entry(a.flow()).or_default() += 1;
    }
    let mut assigned: BTreeMap<FlowId, usize> = expected.keys().map(|f| (*f, 0)).collect();
    for p in assignment {
        let a = allocs.get(p.index).ok_or(ConstraintViolation::NotAssignedOnce {
            index: p.index,
            count: 1,
        })?;
        *assigned.entry(a.flow()).or_default() += 1;
    }
    for (flow, got) in &assigned {
        let want = expected.get(flow).copied().unwrap_or(0);
        if *got != want {
            return Err(ConstraintViolation::FlowConservation {
                flow: *flow,
                assigned: *got,
                expected: want,
            }
            .into());
        }
    }

    let mut seen = vec![0usize; allocs.len()];
    for p in assignment {
        seen[p.index] += 1;
    }
    if let Some((index, count)) = seen.iter().enumerate().find(|(_, c)| **c != 1) {
        return Err(ConstraintViolation::NotAssignedOnce { index, count: *count }.into());
    }

    for p in assignment {
        if p.channel >= instance.n_channels {
            return Err(ConstraintViolation::ChannelOutOfRange {
                index: p.index,
                channel: p.channel,
                channels: instance.n_channels,
            }
            .into());
        }
        let a = &allocs[p.index];
        if p.sched_time < a.start_time {
            return Err(ConstraintViolation::EarlyTransmission {
                index: p.index,
                sched_ns: p.sched_time.0,
                start_ns: a.start_time.0,
            }
            .into());
        }
    }

    let mut order: Vec<&Placement> = assignment.iter().collect();
    order.sort_by_key(|p| (p.sched_time, p.channel, p.index));
    let mut channel_last: Vec<Option<(Nanos, usize)>> = vec![None; instance.n_channels];
    let mut onu_last: HashMap<u16, (Nanos, usize, usize)> = HashMap::new();
    for p in order {
        let a = &allocs[p.index];
        let end = p.sched_time + a.size;
        if let Some((prev_end, prev)) = channel_last[p.channel] {
            if p.sched_time < prev_end + instance.guard_time {
                return Err(ConstraintViolation::ChannelOverlap {
                    channel: p.channel,
                    first: prev,
                    second: p.index,
                }
                .into());
            }
        }
        channel_last[p.channel] = Some((end, p.index));

        if instance.mode == OracleMode::Physical {
            if let Some((prev_end, prev_channel, prev)) = onu_last.get(&a.onu_id).copied() {
                if p.sched_time < prev_end + instance.guard_time {
                    return Err(ConstraintViolation::OnuOverlap {
                        onu_id: a.onu_id,
                        first: prev,
                        second: p.index,
                    }
                    .into());
                }
                if prev_channel != p.channel && p.sched_time < prev_end + instance.guard_time + instance.tuning_time {
                    return Err(ConstraintViolation::TuningGap {
                        onu_id: a.onu_id,
                        first: prev,
                        second: p.index,
                        gap_ns: p.sched_time.saturating_sub(prev_end).0,
                        tuning_ns: instance.tuning_time.0,
                    }
                    .into());
                }
            }
            onu_last.insert(a.onu_id, (end, p.channel, p.index));
        }
    }

    let mut delayed: BTreeMap<FlowId, usize> = BTreeMap::new();
    let mut total_delay = Nanos::ZERO;
    for p in assignment {
        let a = &allocs[p.index];
        total_delay = total_delay + p.sched_time.saturating_sub(a.start_time);
        if p.sched_time > a.deadline() {
            *delayed.entry(a.flow()).or_default() += 1;
        }
    }
    let breached = expected
        .iter()
        .filter(|(flow, n)| {
            instance
                .threshold(**flow)
                .is_some_and(|thr| delayed.get(flow).copied().unwrap_or(0) as f64 / **n as f64 > thr)
        })
        .count();
    Ok((breached, total_delay))
}

/// Turns a merged schedule into per-allocation placements. Allocations are
/// matched by `seq`, which must be unique within the instance.
pub fn placements_from_merged(instance: &OracleInstance, merged: &MergedFrame) -> Result<Vec<Placement>> {
    let by_seq: HashMap<u64, usize> = instance.allocations.iter().enumerate().map(|(i, a)| (a.seq, i)).collect();
    if by_seq.len() != instance.allocations.len() {
        return Err(Error::config("allocations", "seq numbers must be unique"));
    }
    let mut out = Vec::with_capacity(instance.len());
    for s in merged.iter().flatten() {
        let index = *by_seq.get(&s.allocation.seq).ok_or_else(|| {
            Error::config("merged", format!("allocation #{} is not part of the instance", s.allocation.seq))
        })?;
        out.push(Placement {
            index,
            channel: s.channel,
            sched_time: s.sched_time,
        });
    }
    out.sort_by_key(|p| p.index);
    Ok(out)
}

/// DTWA on the instance from empty tables with no breach history.
pub fn dtwa_schedule(instance: &OracleInstance) -> Result<Vec<Placement>> {
    let cfg = DtwaConfig::new(instance.n_channels, 25.0, instance.tuning_time).with_guard(instance.guard_time);
    cfg.validate()?;
    let mut keyed: Vec<(PriorityKey, Allocation)> =
        instance.allocations.iter().map(|a| (PriorityKey::new(a, 0.0), *a)).collect();
    keyed.sort_unstable_by(|x, y| x.0.cmp(&y.0));
    let sorted: Vec<Allocation> = keyed.into_iter().map(|(_, a)| a).collect();
    let merged = assign_resource(
        &sorted,
        &mut ChannelState::new(instance.n_channels),
        &mut OnuTable::new(),
        &cfg,
    )?;
    placements_from_merged(instance, &merged)
}

/// SWA on the instance with a fixed ONU to channel map.
pub fn swa_schedule(instance: &OracleInstance, map: &OnuChannelMap) -> Result<Vec<Placement>> {
    let w = instance.n_channels;
    let mut parts: Vec<Vec<(PriorityKey, usize)>> = vec![Vec::new(); w];
    for (i, a) in instance.allocations.iter().enumerate() {
        let ch = map.channel(a.onu_id).filter(|c| *c < w).ok_or(Error::UnmappedOnu {
            seq: a.seq,
            vno_id: a.vno_id,
            onu_id: a.onu_id,
        })?;
        parts[ch].push((PriorityKey::new(a, 0.0), i));
    }
    let mut onu_free: HashMap<u16, Nanos> = HashMap::new();
    let mut out = Vec::with_capacity(instance.len());
    for (ch, mut part) in parts.into_iter().enumerate() {
        part.sort_unstable_by(|x, y| x.0.cmp(&y.0));
        let mut free = Nanos::ZERO;
        for (_, i) in part {
            let a = &instance.allocations[i];
            let onu = onu_free.entry(a.onu_id).or_default();
            let t = free.max(*onu).max(a.start_time);
            free = t + a.size + instance.guard_time;
            *onu = free;
            out.push(Placement {
                index: i,
                channel: ch,
                sched_time: t,
            });
        }
    }
    out.sort_by_key(|p| p.index);
    Ok(out)
}

/// Minimises the breached-flow count, then total delay, by branch and bound.
pub fn solve_exact(instance: &OracleInstance) -> Result<OracleSolution> {
    solve_exact_with_limits(instance, MAX_ORACLE_ALLOCATIONS, MAX_ORACLE_CHANNELS)
}

pub fn solve_exact_with_limits(
    instance: &OracleInstance,
    max_allocations: usize,
    max_channels: usize,
) -> Result<OracleSolution> {
    instance.validate(max_allocations, max_channels)?;
    if instance.is_empty() {
        return Ok(OracleSolution {
            assignment: Vec::new(),
            objective: 0,
            total_delay: Nanos::ZERO,
            proof: SearchLog::default(),
        });
    }

    let incumbent = dtwa_schedule(instance)?;
    let (ub_breach, ub_delay) = evaluate_objective(&incumbent, instance)?;
    let mut search = Search::new(instance, (ub_breach, ub_delay.0));
    search.run();
    let assignment = match search.best_assignment.take() {
        Some(mut a) => {
            a.sort_by_key(|p| p.index);
            a
        }
        None => incumbent,
    };
    let (objective, total_delay) = evaluate_objective(&assignment, instance)?;
    Ok(OracleSolution {
        assignment,
        objective,
        total_delay,
        proof: search.log,
    })
}

struct Search<'a> {
    inst: &'a OracleInstance,
    physical: bool,
    /// Candidate order: earliest deadline, then request time, then index.
    order: Vec<usize>,
    /// Indices by ascending size, for the shortest-first delay bound.
    by_size: Vec<usize>,
    onu_slot: Vec<usize>,
    flow_slot: Vec<usize>,
    /// Largest number of delayed allocations a flow may have without breaching.
    flow_allowance: Vec<usize>,
    chan_free: Vec<Nanos>,
    chan_used: Vec<bool>,
    onu_free: Vec<Nanos>,
    onu_chan: Vec<Option<usize>>,
    flow_delayed: Vec<usize>,
    placed: Vec<bool>,
    stack: Vec<Placement>,
    /// Objective of the incumbent heuristic schedule; only strictly worse bounds prune against it.
    upper: (usize, u64),
    best: Option<(usize, u64)>,
    best_assignment: Option<Vec<Placement>>,
    log: SearchLog,
}

impl<'a> Search<'a> {
    fn new(inst: &'a OracleInstance, upper: (usize, u64)) -> Self {
        let n = inst.len();
        let mut onu_ids: Vec<u16> = inst.allocations.iter().map(|a| a.onu_id).collect();
        onu_ids.sort_unstable();
        onu_ids.dedup();
        let mut flows: Vec<FlowId> = inst.allocations.iter().map(|a| a.flow()).collect();
        flows.sort_unstable();
        flows.dedup();
        let onu_slot = inst
            .allocations
            .iter()
            .map(|a| onu_ids.binary_search(&a.onu_id).unwrap())
            .collect();
        let flow_slot: Vec<usize> = inst
            .allocations
            .iter()
            .map(|a| flows.binary_search(&a.flow()).unwrap())
            .collect();
        let mut flow_size = vec![0; flows.len()];
        for f in &flow_slot {
            flow_size[*f] += 1;
        }
        let flow_allowance = flows
            .iter()
            .zip(&flow_size)
            .map(|(f, n)| match inst.threshold(*f) {
                // Largest d with d / n <= thr.
                Some(thr) => (0..=*n).rev().find(|d| *d as f64 / *n as f64 <= thr).unwrap_or(0),
                None => usize::MAX,
            })
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|i| {
            let a = &inst.allocations[*i];
            (a.deadline(), a.start_time, *i)
        });
        let mut by_size: Vec<usize> = (0..n).collect();
        by_size.sort_by_key(|i| (inst.allocations[*i].size, *i));
        Search {
            inst,
            physical: inst.mode == OracleMode::Physical,
            order,
            by_size,
            onu_slot,
            flow_slot,
            flow_allowance,
            chan_free: vec![Nanos::ZERO; inst.n_channels],
            chan_used: vec![false; inst.n_channels],
            onu_free: vec![Nanos::ZERO; onu_ids.len()],
            onu_chan: vec![None; onu_ids.len()],
            flow_delayed: vec![0; flows.len()],
            placed: vec![false; n],
            stack: Vec::with_capacity(n),
            upper,
            best: None,
            best_assignment: None,
            log: SearchLog::default(),
        }
    }

    fn run(&mut self) {
        self.dfs(Nanos::ZERO, 0);
    }

    fn start_on(&self, i: usize, k: usize) -> Nanos {
        let a = &self.inst.allocations[i];
        let mut t = self.chan_free[k].max(a.start_time);
        if self.physical {
            let o = self.onu_slot[i];
            let ready = match self.onu_chan[o] {
                Some(c) if c != k => self.onu_free[o] + self.inst.tuning_time,
                _ => self.onu_free[o],
            };
            t = t.max(ready);
        }
        t
    }

    /// Lower bound on (breached flows, total delay) of any completion.
    fn bound(&self, last: Nanos, delay: u64) -> (usize, u64) {
        let min_free = self.chan_free.iter().copied().min().unwrap_or_default();
        let mut forced = self.flow_delayed.clone();
        let mut delay_lb = delay;
        for (i, a) in self.inst.allocations.iter().enumerate() {
            if self.placed[i] {
                continue;
            }
            let mut t = a.start_time.max(min_free).max(last);
            if self.physical {
                t = t.max(self.onu_free[self.onu_slot[i]]);
            }
            delay_lb += (t - a.start_time).0;
            if t > a.deadline() {
                forced[self.flow_slot[i]] += 1;
            }
        }
        let breached = forced.iter().zip(&self.flow_allowance).filter(|(d, allow)| **d > **allow).count();

        // Shortest-first list scheduling minimises the sum of start times
        // when release dates and ONUs are ignored.
        let mut avail: Vec<Nanos> = self.chan_free.iter().map(|f| (*f).max(last)).collect();
        let mut spt_sum = 0u64;
        let mut release_sum = 0u64;
        for &i in &self.by_size {
            if self.placed[i] {
                continue;
            }
            let a = &self.inst.allocations[i];
            let k = (0..avail.len()).min_by_key(|k| avail[*k]).unwrap();
            spt_sum += avail[k].0;
            avail[k] = avail[k] + a.size + self.inst.guard_time;
            release_sum += a.start_time.0;
        }
        let delay_lb = delay_lb.max(delay + spt_sum.saturating_sub(release_sum));
        (breached, delay_lb)
    }

    fn dfs(&mut self, last: Nanos, delay: u64) {
        self.log.nodes += 1;
        if self.stack.len() == self.inst.len() {
            self.log.leaves += 1;
            let breached = self
                .flow_delayed
                .iter()
                .zip(&self.flow_allowance)
                .filter(|(d, allow)| **d > **allow)
                .count();
            let value = (breached, delay);
            if self.best.map_or(value <= self.upper, |b| value < b) {
                self.best = Some(value);
                self.best_assignment = Some(self.stack.clone());
                self.log.improvements += 1;
            }
            return;
        }
        let lb = self.bound(last, delay);
        if lb > self.upper || self.best.is_some_and(|b| lb >= b) {
            self.log.pruned += 1;
            return;
        }

        let first_unused = self.chan_used.iter().position(|u| !u);
        for oi in 0..self.order.len() {
            let i = self.order[oi];
            if self.placed[i] {
                continue;
            }
            for k in 0..self.inst.n_channels {
                if !self.chan_used[k] && Some(k) != first_unused {
                    continue;
                }
                let t = self.start_on(i, k);
                if t < last {
                    continue;
                }
                self.place(i, k, t, last, delay);
            }
        }
    }

    fn place(&mut self, i: usize, k: usize, t: Nanos, last: Nanos, delay: u64) {
        let a = self.inst.allocations[i];
        let o = self.onu_slot[i];
        let f = self.flow_slot[i];
        let saved = (self.chan_free[k], self.chan_used[k], self.onu_free[o], self.onu_chan[o]);
        let late = t > a.deadline();

        let next_free = t + a.size + self.inst.guard_time;
        self.chan_free[k] = next_free;
        self.chan_used[k] = true;
        self.onu_free[o] = next_free;
        self.onu_chan[o] = Some(k);
        self.placed[i] = true;
        if late {
            self.flow_delayed[f] += 1;
        }
        self.stack.push(Placement {
            index: i,
            channel: k,
            sched_time: t,
        });

        self.dfs(t.max(last), delay + (t - a.start_time).0);

        self.stack.pop();
        if late {
            self.flow_delayed[f] -= 1;
        }
        self.placed[i] = false;
        (self.chan_free[k], self.chan_used[k], self.onu_free[o], self.onu_chan[o]) = saved;
    }
}

/// Parameters for random small instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomInstanceConfig {
    pub min_allocations: usize,
    pub max_allocations: usize,
    pub min_channels: usize,
    pub max_channels: usize,
    pub n_vnos: u16,
    pub n_onus: u16,
    pub sla_fraction: f64,
    /// Offered work relative to channel capacity over the request window; above 1
    /// the requests contend and some must be delayed.
    pub load: f64,
    pub tuning_time: Nanos,
    pub min_burst: Nanos,
    pub max_burst: Nanos,
}

impl Default for RandomInstanceConfig {
    fn default() -> Self {
        RandomInstanceConfig {
            min_allocations: 4,
            max_allocations: MAX_ORACLE_ALLOCATIONS,
            min_channels: 1,
            max_channels: MAX_ORACLE_CHANNELS,
            n_vnos: 3,
            n_onus: 6,
            sla_fraction: 0.5,
            load: 2.0,
            tuning_time: Nanos(250),
            min_burst: Nanos(840),
            max_burst: Nanos(7_000),
        }
    }
}

pub fn random_instance<R: Rng + ?Sized>(
    cfg: &RandomInstanceConfig,
    sla_table: &SlaTable,
    rng: &mut R,
) -> Result<OracleInstance> {
    if cfg.min_allocations > cfg.max_allocations || cfg.min_channels == 0 || cfg.min_channels > cfg.max_channels {
        return Err(Error::config("random_instance", "empty allocation or channel range"));
    }
    if !(cfg.load > 0.0) || !(0.0..=1.0).contains(&cfg.sla_fraction) || cfg.n_vnos == 0 || cfg.n_onus == 0 {
        return Err(Error::config("random_instance", "load, sla_fraction, n_vnos or n_onus out of range"));
    }
    let n = rng.gen_range(cfg.min_allocations..=cfg.max_allocations);
    let w = rng.gen_range(cfg.min_channels..=cfg.max_channels);
    let sla_ids: Vec<u16> = sla_table.guaranteed().map(|c| c.id).collect();
    let be = sla_table.best_effort_id();

    let sizes: Vec<Nanos> = (0..n)
        .map(|_| Nanos(rng.gen_range(cfg.min_burst.0..=cfg.max_burst.0)))
        .collect();
    let work: u64 = sizes.iter().map(|s| s.0).sum();
    let window = (work as f64 / (w as f64 * cfg.load)).round() as u64;

    let mut allocations = Vec::with_capacity(n);
    let mut onu_free: HashMap<u16, Nanos> = HashMap::new();
    let mut sla_count = 0usize;
    for (seq, size) in sizes.into_iter().enumerate() {
        let onu_id = rng.gen_range(0..cfg.n_onus);
        let vno_id = onu_id % cfg.n_vnos;
        let is_sla = !sla_ids.is_empty() && (be.is_none() || rng.gen_bool(cfg.sla_fraction));
        let sla_id = if is_sla {
            sla_count += 1;
            sla_ids[(sla_count - 1) % sla_ids.len()]
        } else {
            be.unwrap()
        };
        let free = onu_free.entry(onu_id).or_default();
        let start = Nanos(rng.gen_range(0..=window)).max(*free);
        *free = start + size;
        allocations.push(Allocation::new(vno_id, onu_id, sla_id, start, size, seq as u64));
    }
    OracleInstance::new(allocations, w, cfg.tuning_time, sla_table.clone())
}
