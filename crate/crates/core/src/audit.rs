//! Independent feasibility checks for merged schedules.
//!
//! [`ScheduleAuditor`] remembers the last burst on every channel and every
//! ONU, so it can audit a run frame by frame, including the carry-over at
//! frame boundaries.

use std::collections::HashMap;

use crate::error::ConstraintViolation;
use crate::model::{Allocation, MergedFrame, Nanos, ScheduledAllocation};

#[derive(Clone, Copy, Debug)]
struct LastBurst {
    end: Nanos,
    channel: usize,
    seq: u64,
}

#[derive(Clone, Debug)]
pub struct ScheduleAuditor {
    n_channels: usize,
    guard_time: Nanos,
    tuning_time: Nanos,
    channels: Vec<Option<LastBurst>>,
    onus: HashMap<u16, LastBurst>,
    frames: u64,
    allocations: u64,
}

impl ScheduleAuditor {
    pub fn new(n_channels: usize, guard_time: Nanos, tuning_time: Nanos) -> Self {
        ScheduleAuditor {
            n_channels,
            guard_time,
            tuning_time,
            channels: vec![None; n_channels],
            onus: HashMap::new(),
            frames: 0,
            allocations: 0,
        }
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn allocations(&self) -> u64 {
        self.allocations
    }

    /// Checks one merged frame against the allocations that were submitted.
    pub fn check_frame(&mut self, submitted: &[Allocation], merged: &MergedFrame) -> Result<(), ConstraintViolation> {
        if merged.len() != self.n_channels {
            return Err(ConstraintViolation::ChannelOutOfRange {
                index: 0,
                channel: merged.len().saturating_sub(1),
                channels: self.n_channels,
            });
        }
        check_conservation(submitted, merged)?;

        let mut all: Vec<&ScheduledAllocation> = Vec::with_capacity(submitted.len());
        for (ch, list) in merged.iter().enumerate() {
            for s in list {
                if s.channel != ch {
                    return Err(ConstraintViolation::ChannelOutOfRange {
                        index: s.allocation.seq as usize,
                        channel: s.channel,
                        channels: self.n_channels,
                    });
                }
                if s.sched_time < s.allocation.start_time {
                    return Err(ConstraintViolation::EarlyTransmission {
                        index: s.allocation.seq as usize,
                        sched_ns: s.sched_time.0,
                        start_ns: s.allocation.start_time.0,
                    });
                }
                all.push(s);
            }
        }
        all.sort_by_key(|s| (s.sched_time, s.channel));

        for s in all {
            let seq = s.allocation.seq;
            if let Some(prev) = self.channels[s.channel] {
                if s.sched_time < prev.end + self.guard_time {
                    return Err(ConstraintViolation::ChannelOverlap {
                        channel: s.channel,
                        first: prev.seq as usize,
                        second: seq as usize,
                    });
                }
            }
            let onu_id = s.allocation.onu_id;
            if let Some(prev) = self.onus.get(&onu_id) {
                if s.sched_time < prev.end + self.guard_time {
                    return Err(ConstraintViolation::OnuOverlap {
                        onu_id,
                        first: prev.seq as usize,
                        second: seq as usize,
                    });
                }
                if prev.channel != s.channel && s.sched_time < prev.end + self.tuning_time {
                    return Err(ConstraintViolation::TuningGap {
                        onu_id,
                        first: prev.seq as usize,
                        second: seq as usize,
                        gap_ns: s.sched_time.saturating_sub(prev.end).0,
                        tuning_ns: self.tuning_time.0,
                    });
                }
            }
            let last = LastBurst {
                end: s.end_time(),
                channel: s.channel,
                seq,
            };
            self.channels[s.channel] = Some(last);
            self.onus.insert(onu_id, last);
        }
        self.frames += 1;
        self.allocations += submitted.len() as u64;
        Ok(())
    }
}

/// Every submitted allocation appears in the merged output exactly once.
pub fn check_conservation(submitted: &[Allocation], merged: &MergedFrame) -> Result<(), ConstraintViolation> {
    let key = |a: &Allocation| (a.seq, a.vno_id, a.onu_id, a.sla_id, a.start_time, a.size);
    let mut counts: HashMap<_, (usize, usize)> = HashMap::with_capacity(submitted.len());
    for a in submitted {
        counts.entry(key(a)).or_insert((0, 0)).0 += 1;
    }
    for s in merged.iter().flatten() {
        counts.entry(key(&s.allocation)).or_insert((0, 0)).1 += 1;
    }
    let mut bad: Vec<_> = counts.into_iter().filter(|(_, (want, got))| want != got).collect();
    bad.sort_by_key(|(k, _)| k.0);
    match bad.first() {
        None => Ok(()),
        Some((k, (_, got))) => Err(ConstraintViolation::NotAssignedOnce {
            index: k.0 as usize,
            count: *got,
        }),
    }
}
