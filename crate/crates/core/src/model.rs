//! Domain types shared by the merging engines.
//!
//! Time is carried as integer nanoseconds ([`Nanos`]); the public reporting
//! unit is microseconds. An allocation's `size` is its transmission time at
//! the channel line rate, so every quantity in a schedule is a duration.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upstream frame period.
pub const FRAME: Nanos = Nanos(125_000);
/// Size of one allocation unit in bytes.
pub const ALLOCATION_UNIT_BYTES: u64 = 160;
/// Idle interval appended after every burst.
pub const DEFAULT_GUARD_TIME: Nanos = Nanos(210);

/// A point in time or a duration, in nanoseconds.
///
/// `Nanos::INFINITY` is the sentinel used for best-effort deadlines; all
/// arithmetic on it saturates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Nanos(pub u64);

impl Nanos {
    pub const ZERO: Nanos = Nanos(0);
    pub const INFINITY: Nanos = Nanos(u64::MAX);

    pub fn from_micros(us: f64) -> Nanos {
        if us.is_infinite() && us > 0.0 {
            return Nanos::INFINITY;
        }
        Nanos((us * 1_000.0).round().max(0.0) as u64)
    }

    pub fn as_micros(self) -> f64 {
        if self.is_infinite() {
            f64::INFINITY
        } else {
            self.0 as f64 / 1_000.0
        }
    }

    pub fn is_infinite(self) -> bool {
        self == Nanos::INFINITY
    }

    pub fn saturating_sub(self, rhs: Nanos) -> Nanos {
        Nanos(self.0.saturating_sub(rhs.0))
    }
}

impl Add for Nanos {
    type Output = Nanos;
    fn add(self, rhs: Nanos) -> Nanos {
        Nanos(self.0.saturating_add(rhs.0))
    }
}

impl Sub for Nanos {
    type Output = Nanos;
    fn sub(self, rhs: Nanos) -> Nanos {
        Nanos(self.0 - rhs.0)
    }
}

impl fmt::Display for Nanos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{:.3}us", self.as_micros())
        }
    }
}

/// Duration of one allocation unit on a channel running at `rate_gbps`.
///
/// 160 bytes at 25 Gb/s is 51.2 ns; the result is rounded to whole ns.
pub fn allocation_unit(rate_gbps: f64) -> Nanos {
    Nanos((ALLOCATION_UNIT_BYTES as f64 * 8.0 / rate_gbps).round() as u64)
}

/// A service level: maximum merging delay plus the fraction of allocations
/// that must meet it over the compliance window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlaClass {
    pub id: u16,
    pub max_latency: Nanos,
    pub compliance: f64,
    pub breach_threshold: f64,
    pub best_effort: bool,
}

impl SlaClass {
    pub fn new(id: u16, max_latency: Nanos, compliance: f64) -> Result<SlaClass> {
        if !(compliance > 0.0 && compliance <= 1.0) {
            return Err(Error::config(
                format!("sla[{id}].compliance"),
                format!("must be in (0, 1], got {compliance}"),
            ));
        }
        Ok(SlaClass {
            id,
            max_latency,
            compliance,
            breach_threshold: 1.0 - compliance,
            best_effort: false,
        })
    }

    pub fn best_effort(id: u16) -> SlaClass {
        SlaClass {
            id,
            max_latency: Nanos::INFINITY,
            compliance: 0.0,
            breach_threshold: 1.0,
            best_effort: true,
        }
    }

    /// The two guaranteed classes used throughout the experiments
    /// (12.5 us at 90 %, 25 us at 95 %) followed by best effort.
    pub fn standard_classes() -> Vec<SlaClass> {
        vec![
            SlaClass::new(0, Nanos(12_500), 0.90).unwrap(),
            SlaClass::new(1, Nanos(25_000), 0.95).unwrap(),
            SlaClass::best_effort(2),
        ]
    }
}

/// Lookup table from `sla_id` to its class.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SlaTable {
    classes: Vec<SlaClass>,
}

impl SlaTable {
    pub fn new(classes: Vec<SlaClass>) -> SlaTable {
        SlaTable { classes }
    }

    pub fn standard() -> SlaTable {
        SlaTable::new(SlaClass::standard_classes())
    }

    pub fn get(&self, id: u16) -> Option<&SlaClass> {
        self.classes.iter().find(|c| c.id == id)
    }

    pub fn classes(&self) -> &[SlaClass] {
        &self.classes
    }

    /// Guaranteed (non best-effort) classes in table order.
    pub fn guaranteed(&self) -> impl Iterator<Item = &SlaClass> {
        self.classes.iter().filter(|c| !c.best_effort)
    }

    pub fn best_effort_id(&self) -> Option<u16> {
        self.classes.iter().find(|c| c.best_effort).map(|c| c.id)
    }
}

/// A traffic flow: one tenant's traffic of one SLA class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlowId {
    pub vno_id: u16,
    pub sla_id: u16,
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "vno{}/sla{}", self.vno_id, self.sla_id)
    }
}

/// One upstream grant request from a tenant's virtual bandwidth map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Allocation {
    pub vno_id: u16,
    pub onu_id: u16,
    pub sla_id: u16,
    pub start_time: Nanos,
    pub size: Nanos,
    /// Latest start that still meets the class latency; set by [`calc_max_time`].
    pub max_time: Option<Nanos>,
    pub seq: u64,
}

impl Allocation {
    pub fn new(vno_id: u16, onu_id: u16, sla_id: u16, start_time: Nanos, size: Nanos, seq: u64) -> Self {
        Allocation {
            vno_id,
            onu_id,
            sla_id,
            start_time,
            size,
            max_time: None,
            seq,
        }
    }

    pub fn flow(&self) -> FlowId {
        FlowId {
            vno_id: self.vno_id,
            sla_id: self.sla_id,
        }
    }

    pub fn end_time(&self) -> Nanos {
        self.start_time + self.size
    }

    /// Deadline for priority purposes; an unset deadline sorts as best effort.
    pub fn deadline(&self) -> Nanos {
        self.max_time.unwrap_or(Nanos::INFINITY)
    }
}

/// One tenant's requested bandwidth map for a frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualBMap {
    pub vno_id: u16,
    pub frame_index: u64,
    pub allocations: Vec<Allocation>,
}

impl VirtualBMap {
    pub fn new(vno_id: u16, frame_index: u64) -> Self {
        VirtualBMap {
            vno_id,
            frame_index,
            allocations: Vec::new(),
        }
    }

    pub fn total_size(&self) -> Nanos {
        self.allocations.iter().fold(Nanos::ZERO, |acc, a| acc + a.size)
    }
}

/// Earliest reallocation time and per-frame grant counter for each channel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelState {
    pub free_time: Vec<Nanos>,
    pub alloc_count: Vec<u32>,
}

impl ChannelState {
    pub fn new(channels: usize) -> Self {
        ChannelState {
            free_time: vec![Nanos::ZERO; channels],
            alloc_count: vec![0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.free_time.len()
    }

    pub fn reset_counts(&mut self) {
        self.alloc_count.iter_mut().for_each(|c| *c = 0);
    }
}

/// Transceiver state of one ONU.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnuState {
    pub tuned_channel: Option<usize>,
    pub free_time: Nanos,
}

/// Per-ONU transceiver table, indexed by `onu_id` and grown on demand.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnuTable {
    onus: Vec<OnuState>,
}

impl OnuTable {
    pub fn new() -> Self {
        OnuTable::default()
    }

    pub fn get(&self, onu_id: u16) -> OnuState {
        self.onus.get(onu_id as usize).copied().unwrap_or_default()
    }

    pub fn get_mut(&mut self, onu_id: u16) -> &mut OnuState {
        let idx = onu_id as usize;
        if idx >= self.onus.len() {
            self.onus.resize(idx + 1, OnuState::default());
        }
        &mut self.onus[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = (u16, &OnuState)> {
        self.onus.iter().enumerate().map(|(i, s)| (i as u16, s))
    }
}

/// An allocation bound to a channel and a transmission start.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledAllocation {
    pub allocation: Allocation,
    pub channel: usize,
    pub sched_time: Nanos,
}

impl ScheduledAllocation {
    pub fn delay(&self) -> Nanos {
        self.sched_time.saturating_sub(self.allocation.start_time)
    }

    pub fn end_time(&self) -> Nanos {
        self.sched_time + self.allocation.size
    }

    /// Strictly later than the allocation's deadline.
    pub fn is_delayed(&self) -> bool {
        self.sched_time > self.allocation.deadline()
    }
}

/// Channel-wise merged maps for one frame, each list ordered by `sched_time`.
pub type MergedFrame = Vec<Vec<ScheduledAllocation>>;

/// Sets `max_time = start_time + max_latency` on every allocation.
pub fn calc_max_time(bmaps: &mut [VirtualBMap], sla_table: &SlaTable) -> Result<()> {
    for bmap in bmaps.iter_mut() {
        for alloc in bmap.allocations.iter_mut() {
            let class = sla_table.get(alloc.sla_id).ok_or(Error::UnknownSla {
                seq: alloc.seq,
                vno_id: alloc.vno_id,
                onu_id: alloc.onu_id,
                sla_id: alloc.sla_id,
            })?;
            alloc.max_time = Some(if class.best_effort {
                Nanos::INFINITY
            } else {
                alloc.start_time + class.max_latency
            });
        }
    }
    Ok(())
}

/// Source of the current per-flow breach fraction.
pub trait BreachLookup {
    /// Fraction of delayed allocations in the current window; 0 when unknown.
    fn breach(&self, flow: FlowId) -> f64;
}

impl BreachLookup for HashMap<FlowId, f64> {
    fn breach(&self, flow: FlowId) -> f64 {
        self.get(&flow).copied().unwrap_or(0.0)
    }
}

/// Sort key equivalent to [`compare_alloc`], precomputed once per allocation.
#[derive(Clone, Copy, Debug)]
pub struct PriorityKey {
    pub breach: f64,
    pub max_time: Nanos,
    pub size: Nanos,
    pub seq: u64,
    pub vno_id: u16,
    pub onu_id: u16,
    pub start_time: Nanos,
}

impl PriorityKey {
    pub fn new(alloc: &Allocation, breach: f64) -> Self {
        PriorityKey {
            breach,
            max_time: alloc.deadline(),
            size: alloc.size,
            seq: alloc.seq,
            vno_id: alloc.vno_id,
            onu_id: alloc.onu_id,
            start_time: alloc.start_time,
        }
    }
}

impl PartialEq for PriorityKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for PriorityKey {}

impl PartialOrd for PriorityKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PriorityKey {
    fn cmp(&self, other: &Self) -> Ordering {
        // Higher breach first; the rest ascending.
        other
            .breach
            .total_cmp(&self.breach)
            .then(self.max_time.cmp(&other.max_time))
            .then(self.size.cmp(&other.size))
            .then(self.seq.cmp(&other.seq))
            .then(self.vno_id.cmp(&other.vno_id))
            .then(self.onu_id.cmp(&other.onu_id))
            .then(self.start_time.cmp(&other.start_time))
    }
}

/// Merging priority: descending flow breach, then ascending deadline, then
/// ascending size, then ascending sequence number.
///
/// `Ordering::Less` means `a` is scheduled before `b`.
pub fn compare_alloc<B: BreachLookup + ?Sized>(a: &Allocation, b: &Allocation, breach: &B) -> Ordering {
    PriorityKey::new(a, breach.breach(a.flow())).cmp(&PriorityKey::new(b, breach.breach(b.flow())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alloc(vno: u16, sla: u16, start_us: f64, size_us: f64, seq: u64) -> Allocation {
        Allocation::new(vno, 0, sla, Nanos::from_micros(start_us), Nanos::from_micros(size_us), seq)
    }

    fn one_map(allocs: Vec<Allocation>) -> Vec<VirtualBMap> {
        let mut map = VirtualBMap::new(allocs[0].vno_id, 0);
        map.allocations = allocs;
        vec![map]
    }

    #[test]
    fn max_time_adds_class_latency() {
        let table = SlaTable::new(vec![
            SlaClass::new(0, Nanos(12_500), 0.9).unwrap(),
            SlaClass::new(1, Nanos::ZERO, 0.9).unwrap(),
            SlaClass::best_effort(2),
        ]);
        let mut maps = one_map(vec![alloc(0, 0, 2.0, 1.0, 0), alloc(0, 1, 7.3, 1.0, 1), alloc(0, 2, 0.0, 1.0, 2)]);
        calc_max_time(&mut maps, &table).unwrap();
        let a = &maps[0].allocations;
        assert_eq!(a[0].max_time, Some(Nanos(14_500)));
        assert_eq!(a[1].max_time, Some(Nanos(7_300)));
        assert_eq!(a[2].max_time, Some(Nanos::INFINITY));
    }

    #[test]
    fn max_time_is_idempotent() {
        let table = SlaTable::standard();
        let mut maps = one_map(vec![alloc(0, 0, 1.0, 1.0, 0), alloc(0, 1, 3.0, 1.0, 1)]);
        calc_max_time(&mut maps, &table).unwrap();
        let once = maps.clone();
        calc_max_time(&mut maps, &table).unwrap();
        assert_eq!(once, maps);
    }

    #[test]
    fn unknown_sla_names_the_allocation() {
        let mut maps = one_map(vec![alloc(3, 9, 1.0, 1.0, 42)]);
        let err = calc_max_time(&mut maps, &SlaTable::standard()).unwrap_err();
        assert_eq!(
            err,
            Error::UnknownSla {
                seq: 42,
                vno_id: 3,
                onu_id: 0,
                sla_id: 9
            }
        );
    }

    #[test]
    fn sla_class_threshold_is_complement() {
        let c = SlaClass::new(0, Nanos(25_000), 0.95).unwrap();
        assert_eq!(c.breach_threshold, 1.0 - 0.95);
        assert!(SlaClass::new(0, Nanos(1), 0.0).is_err());
        assert!(SlaClass::new(0, Nanos(1), 1.5).is_err());
        assert!(SlaClass::best_effort(2).max_latency.is_infinite());
    }

    #[test]
    fn higher_breach_goes_first() {
        let mut a = alloc(3, 0, 5.0, 1.0, 1);
        let mut b = alloc(1, 0, 0.0, 1.0, 0);
        a.max_time = Some(Nanos(20_000));
        b.max_time = Some(Nanos(10_000));
        let mut breach = HashMap::new();
        breach.insert(a.flow(), 0.02);
        breach.insert(b.flow(), 0.0);
        assert_eq!(compare_alloc(&a, &b, &breach), Ordering::Less);
        assert_eq!(compare_alloc(&b, &a, &breach), Ordering::Greater);
    }

    #[test]
    fn equal_breach_orders_by_deadline_then_size() {
        let mut a = alloc(0, 0, 0.0, 3.0, 5);
        let mut b = alloc(1, 0, 0.0, 1.0, 1);
        a.max_time = Some(Nanos(10_000));
        b.max_time = Some(Nanos(12_000));
        let none: HashMap<FlowId, f64> = HashMap::new();
        assert_eq!(compare_alloc(&a, &b, &none), Ordering::Less);
        b.max_time = Some(Nanos(10_000));
        assert_eq!(compare_alloc(&a, &b, &none), Ordering::Greater);
        assert_eq!(compare_alloc(&a, &a, &none), Ordering::Equal);
    }

    #[test]
    fn allocation_unit_matches_line_rate() {
        assert_eq!(allocation_unit(25.0), Nanos(51));
        assert_eq!(allocation_unit(50.0), Nanos(26));
        assert_eq!(allocation_unit(200.0), Nanos(6));
    }

    #[test]
    fn nanos_saturates_at_infinity() {
        assert_eq!(Nanos::INFINITY + Nanos(5), Nanos::INFINITY);
        assert_eq!(Nanos::from_micros(f64::INFINITY), Nanos::INFINITY);
        assert_eq!(Nanos::from_micros(14.5), Nanos(14_500));
    }
}
