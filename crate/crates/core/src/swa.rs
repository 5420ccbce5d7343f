//! Static wavelength allocation: every ONU keeps one wavelength for the whole
//! run, so each channel is merged independently.

use crate::dtwa::DtwaConfig;
use crate::engine::{FrameOutcome, MergeEngine};
use crate::error::{Error, Result};
use crate::model::{
    calc_max_time, Allocation, BreachLookup, ChannelState, MergedFrame, Nanos, OnuTable, PriorityKey,
    ScheduledAllocation, SlaTable, VirtualBMap,
};
use crate::sla::FlowBreachState;

/// Fixed channel per `onu_id`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OnuChannelMap {
    channels: Vec<usize>,
}

impl OnuChannelMap {
    /// `onu_id % n_channels` for ids `0..n_onus`.
    pub fn round_robin(n_onus: usize, n_channels: usize) -> Self {
        OnuChannelMap {
            channels: (0..n_onus).map(|o| o % n_channels.max(1)).collect(),
        }
    }

    pub fn from_vec(channels: Vec<usize>) -> Self {
        OnuChannelMap { channels }
    }

    pub fn channel(&self, onu_id: u16) -> Option<usize> {
        self.channels.get(onu_id as usize).copied()
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.channels
    }
}

/// Splits the maps into one list per channel, preserving input order.
pub fn partition_by_channel(
    bmaps: &[VirtualBMap],
    onu_channel_map: &OnuChannelMap,
    n_channels: usize,
) -> Result<Vec<Vec<Allocation>>> {
    let mut out = vec![Vec::new(); n_channels];
    for a in bmaps.iter().flat_map(|m| m.allocations.iter()) {
        let ch = onu_channel_map
            .channel(a.onu_id)
            .filter(|c| *c < n_channels)
            .ok_or(Error::UnmappedOnu {
                seq: a.seq,
                vno_id: a.vno_id,
                onu_id: a.onu_id,
            })?;
        out[ch].push(*a);
    }
    Ok(out)
}

/// SWA merging engine.
#[derive(Clone, Debug)]
pub struct SwaScheduler {
    cfg: DtwaConfig,
    sla_table: SlaTable,
    onu_channel_map: OnuChannelMap,
    channels: ChannelState,
    onus: OnuTable,
    breach: FlowBreachState,
}

impl SwaScheduler {
    pub fn new(cfg: DtwaConfig, sla_table: SlaTable, onu_channel_map: OnuChannelMap) -> Result<Self> {
        cfg.validate()?;
        if let Some(bad) = onu_channel_map.as_slice().iter().find(|c| **c >= cfg.n_channels) {
            return Err(Error::config(
                "onu_channel_map",
                format!("channel {bad} out of range for {} channels", cfg.n_channels),
            ));
        }
        let mut onus = OnuTable::new();
        for (onu, ch) in onu_channel_map.as_slice().iter().enumerate() {
            onus.get_mut(onu as u16).tuned_channel = Some(*ch);
        }
        Ok(SwaScheduler {
            channels: ChannelState::new(cfg.n_channels),
            onus,
            breach: FlowBreachState::new(),
            onu_channel_map,
            cfg,
            sla_table,
        })
    }

    pub fn onu_channel_map(&self) -> &OnuChannelMap {
        &self.onu_channel_map
    }

    pub fn swa_frame(&mut self, bmaps: &mut [VirtualBMap]) -> Result<FrameOutcome> {
        calc_max_time(bmaps, &self.sla_table)?;
        let parts = partition_by_channel(bmaps, &self.onu_channel_map, self.cfg.n_channels)?;
        let mut merged: MergedFrame = Vec::with_capacity(parts.len());
        self.channels.reset_counts();
        for (ch, part) in parts.into_iter().enumerate() {
            let mut keyed: Vec<(PriorityKey, Allocation)> = part
                .into_iter()
                .map(|a| (PriorityKey::new(&a, self.breach.breach(a.flow())), a))
                .collect();
            keyed.sort_unstable_by(|x, y| x.0.cmp(&y.0));

            let mut list = Vec::with_capacity(keyed.len());
            let mut free = self.channels.free_time[ch];
            for (_, alloc) in keyed {
                let onu = self.onus.get_mut(alloc.onu_id);
                let sched_time = free.max(onu.free_time).max(alloc.start_time);
                free = sched_time + alloc.size + self.cfg.guard_time;
                onu.free_time = free;
                list.push(ScheduledAllocation {
                    allocation: alloc,
                    channel: ch,
                    sched_time,
                });
            }
            self.channels.free_time[ch] = free;
            self.channels.alloc_count[ch] = list.len() as u32;
            merged.push(list);
        }
        let report = self.breach.update_breach(&merged, &self.sla_table);
        Ok(FrameOutcome { merged, report })
    }
}

impl MergeEngine for SwaScheduler {
    fn merge_frame(&mut self, bmaps: &mut [VirtualBMap]) -> Result<FrameOutcome> {
        self.swa_frame(bmaps)
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

#[cfg(test)]
mod tests {
    use super::*;

    fn us(v: f64) -> Nanos {
        Nanos::from_micros(v)
    }

    fn map_of(vno: u16, allocs: Vec<Allocation>) -> VirtualBMap {
        let mut m = VirtualBMap::new(vno, 0);
        m.allocations = allocs;
        m
    }

    #[test]
    fn round_robin_balances_onus() {
        let map = OnuChannelMap::round_robin(64, 8);
        for ch in 0..8 {
            assert_eq!(map.as_slice().iter().filter(|c| **c == ch).count(), 8);
        }
    }

    #[test]
    fn partition_conserves_allocations() {
        let map = OnuChannelMap::round_robin(64, 4);
        let maps = vec![
            map_of(0, (0..5).map(|i| Allocation::new(0, i, 0, us(i as f64), us(1.0), i as u64)).collect()),
            map_of(1, (5..12).map(|i| Allocation::new(1, i, 0, us(0.0), us(1.0), i as u64)).collect()),
        ];
        let parts = partition_by_channel(&maps, &map, 4).unwrap();
        assert_eq!(parts.iter().map(Vec::len).sum::<usize>(), 12);
        for (ch, part) in parts.iter().enumerate() {
            assert!(part.iter().all(|a| a.onu_id as usize % 4 == ch));
        }
        let single = partition_by_channel(&maps, &OnuChannelMap::round_robin(64, 1), 1).unwrap();
        let flat: Vec<_> = maps.iter().flat_map(|m| m.allocations.clone()).collect();
        assert_eq!(single[0], flat);
    }

    #[test]
    fn unmapped_onu_is_config_error() {
        let map = OnuChannelMap::round_robin(4, 2);
        let maps = vec![map_of(2, vec![Allocation::new(2, 9, 0, us(0.0), us(1.0), 3)])];
        assert_eq!(
            partition_by_channel(&maps, &map, 2).unwrap_err(),
            Error::UnmappedOnu {
                seq: 3,
                vno_id: 2,
                onu_id: 9
            }
        );
    }

    #[test]
    fn single_channel_follows_deadlines() {
        let cfg = DtwaConfig::new(1, 200.0, Nanos::ZERO);
        let mut swa = SwaScheduler::new(cfg, SlaTable::standard(), OnuChannelMap::round_robin(64, 1)).unwrap();
        // sla 1 (25 us) requested first, sla 0 (12.5 us) later but with an earlier deadline.
        let mut maps = vec![
            map_of(0, vec![Allocation::new(0, 0, 1, us(0.0), us(3.0), 0)]),
            map_of(1, vec![Allocation::new(1, 1, 0, us(1.0), us(3.0), 1)]),
        ];
        let out = swa.swa_frame(&mut maps).unwrap();
        let order: Vec<_> = out.merged[0].iter().map(|s| s.allocation.seq).collect();
        assert_eq!(order, vec![1, 0]);
        assert_eq!(out.merged[0][0].sched_time, us(1.0));
        assert_eq!(out.merged[0][1].sched_time, us(4.21));
    }

    #[test]
    fn tuning_time_is_irrelevant() {
        let maps: Vec<VirtualBMap> = (0..3)
            .map(|v| {
                map_of(
                    v,
                    (0..6)
                        .map(|i| Allocation::new(v, v * 6 + i, i % 2, us(i as f64 * 0.7), us(2.5), (v * 6 + i) as u64))
                        .collect(),
                )
            })
            .collect();
        let run = |tuning: Nanos| {
            let cfg = DtwaConfig::new(4, 50.0, tuning);
            let mut swa = SwaScheduler::new(cfg, SlaTable::standard(), OnuChannelMap::round_robin(64, 4)).unwrap();
            swa.swa_frame(&mut maps.clone()).unwrap().merged
        };
        assert_eq!(run(Nanos::ZERO), run(us(15.0)));
    }

    #[test]
    fn empty_frame() {
        let cfg = DtwaConfig::new(2, 25.0, Nanos::ZERO);
        let mut swa = SwaScheduler::new(cfg, SlaTable::standard(), OnuChannelMap::round_robin(64, 2)).unwrap();
        let out = swa.swa_frame(&mut []).unwrap();
        assert_eq!(out.merged, vec![Vec::new(), Vec::new()]);
        assert_eq!(swa.channel_free_times(), &[Nanos::ZERO, Nanos::ZERO]);
    }
}
