//! Dynamic time and wavelength allocation.
//!
//! All tenants' allocations are merged into one list ordered by breach-aware
//! priority, then each is placed greedily on the channel that lets it start
//! earliest, paying the ONU tuning time whenever it leaves its current
//! wavelength.

use serde::{Deserialize, Serialize};

use crate::engine::{FrameOutcome, MergeEngine};
use crate::error::{Error, Result};
use crate::model::{
    calc_max_time, Allocation, BreachLookup, ChannelState, MergedFrame, Nanos, OnuTable, PriorityKey,
    ScheduledAllocation, SlaTable, VirtualBMap, DEFAULT_GUARD_TIME,
};
use crate::sla::FlowBreachState;

/// Channel plant shared by both merging engines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtwaConfig {
    pub n_channels: usize,
    pub channel_tuning_time: Nanos,
    pub line_rate_gbps: f64,
    /// Idle gap appended after each burst; zero it to reproduce guard-free arithmetic.
    pub guard_time: Nanos,
}

impl DtwaConfig {
    pub fn new(n_channels: usize, line_rate_gbps: f64, channel_tuning_time: Nanos) -> Self {
        DtwaConfig {
            n_channels,
            channel_tuning_time,
            line_rate_gbps,
            guard_time: DEFAULT_GUARD_TIME,
        }
    }

    pub fn with_guard(mut self, guard_time: Nanos) -> Self {
        self.guard_time = guard_time;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_channels == 0 {
            return Err(Error::config("n_channels", "at least one channel is required"));
        }
        if !(self.line_rate_gbps > 0.0 && self.line_rate_gbps.is_finite()) {
            return Err(Error::config(
                "line_rate_gbps",
                format!("must be positive, got {}", self.line_rate_gbps),
            ));
        }
        Ok(())
    }

    pub fn capacity_gbps(&self) -> f64 {
        self.n_channels as f64 * self.line_rate_gbps
    }
}

/// Flattens all maps and orders them by [`compare_alloc`](crate::model::compare_alloc).
pub fn sort_bmaps<B: BreachLookup + ?Sized>(bmaps: &[VirtualBMap], breach: &B) -> Vec<Allocation> {
    let mut keyed: Vec<(PriorityKey, &Allocation)> = bmaps
        .iter()
        .flat_map(|m| m.allocations.iter())
        .map(|a| (PriorityKey::new(a, breach.breach(a.flow())), a))
        .collect();
    keyed.sort_unstable_by(|x, y| x.0.cmp(&y.0));
    keyed.into_iter().map(|(_, a)| *a).collect()
}

/// Channel with the earliest free time; ties go to the channel with fewer
/// grants this frame, then to the lowest index.
pub fn find_min_index(free_times: &[Nanos], alloc_counts: &[u32]) -> usize {
    debug_assert_eq!(free_times.len(), alloc_counts.len());
    let mut best = 0;
    for k in 1..free_times.len() {
        let better = match free_times[k].cmp(&free_times[best]) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Equal => alloc_counts[k] < alloc_counts[best],
            std::cmp::Ordering::Greater => false,
        };
        if better {
            best = k;
        }
    }
    best
}

/// Places `sorted` allocations in order, updating channel and ONU tables.
pub fn assign_resource(
    sorted: &[Allocation],
    channels: &mut ChannelState,
    onus: &mut OnuTable,
    cfg: &DtwaConfig,
) -> Result<MergedFrame> {
    let w = cfg.n_channels;
    if w == 0 {
        return Err(Error::config("n_channels", "at least one channel is required"));
    }
    if channels.channels() != w {
        return Err(Error::config(
            "channel_state",
            format!("table has {} channels, config has {w}", channels.channels()),
        ));
    }
    channels.reset_counts();
    let mut out: MergedFrame = vec![Vec::new(); w];

    for alloc in sorted {
        let earliest = find_min_index(&channels.free_time, &channels.alloc_count);
        let onu = onus.get_mut(alloc.onu_id);
        let (channel, sched_time) = match onu.tuned_channel {
            None => (
                earliest,
                channels.free_time[earliest].max(onu.free_time).max(alloc.start_time),
            ),
            Some(current) => {
                let same = channels.free_time[current].max(onu.free_time).max(alloc.start_time);
                if earliest == current {
                    (current, same)
                } else {
                    let switch = channels.free_time[earliest]
                        .max(onu.free_time + cfg.channel_tuning_time)
                        .max(alloc.start_time);
                    if switch < same {
                        (earliest, switch)
                    } else {
                        (current, same)
                    }
                }
            }
        };

        let next_free = sched_time + alloc.size + cfg.guard_time;
        channels.free_time[channel] = next_free;
        channels.alloc_count[channel] += 1;
        onu.free_time = next_free;
        onu.tuned_channel = Some(channel);
        out[channel].push(ScheduledAllocation {
            allocation: *alloc,
            channel,
            sched_time,
        });
    }
    Ok(out)
}

/// DTWA merging engine; owns its state tables across frames.
#[derive(Clone, Debug)]
pub struct DtwaScheduler {
    cfg: DtwaConfig,
    sla_table: SlaTable,
    channels: ChannelState,
    onus: OnuTable,
    breach: FlowBreachState,
}

impl DtwaScheduler {
    pub fn new(cfg: DtwaConfig, sla_table: SlaTable) -> Result<Self> {
        cfg.validate()?;
        Ok(DtwaScheduler {
            channels: ChannelState::new(cfg.n_channels),
            onus: OnuTable::new(),
            breach: FlowBreachState::new(),
            cfg,
            sla_table,
        })
    }

    pub fn channels(&self) -> &ChannelState {
        &self.channels
    }

    pub fn channels_mut(&mut self) -> &mut ChannelState {
        &mut self.channels
    }

    pub fn onus(&self) -> &OnuTable {
        &self.onus
    }

    pub fn onus_mut(&mut self) -> &mut OnuTable {
        &mut self.onus
    }

    /// One frame: deadlines, priority sort, channel assignment, breach update.
    pub fn dtwa_frame(&mut self, bmaps: &mut [VirtualBMap]) -> Result<FrameOutcome> {
        calc_max_time(bmaps, &self.sla_table)?;
        let sorted = sort_bmaps(bmaps, &self.breach);
        let merged = assign_resource(&sorted, &mut self.channels, &mut self.onus, &self.cfg)?;
        let report = self.breach.update_breach(&merged, &self.sla_table);
        Ok(FrameOutcome { merged, report })
    }
}

impl MergeEngine for DtwaScheduler {
    fn merge_frame(&mut self, bmaps: &mut [VirtualBMap]) -> Result<FrameOutcome> {
        self.dtwa_frame(bmaps)
    }

    fn config(&self) -> &DtwaConfig {
        &self.cfg
    }

    fn breach_state(&self) -> &FlowBreachState {
        &self.breach
    }

    fn channel_free_times(&self) -> &[Nanos] {
        &self.channels.free_time
    }

    fn onu_table(&self) -> &OnuTable {
        &self.onus
    }
}
