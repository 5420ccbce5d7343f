use serde::{Deserialize, Serialize};

use crate::dtwa::DtwaConfig;
use crate::error::Result;
use crate::model::{MergedFrame, Nanos, OnuTable, VirtualBMap};
use crate::sla::{FlowBreachState, FrameBreachReport};

/// Merged maps of one frame plus the breach flags they produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameOutcome {
    pub merged: MergedFrame,
    pub report: FrameBreachReport,
}

impl FrameOutcome {
    pub fn allocation_count(&self) -> usize {
        self.merged.iter().map(Vec::len).sum()
    }
}

/// A stateful merging engine, invoked once per frame.
pub trait MergeEngine {
    /// Merges the tenants' maps for the next frame. Sets `max_time` on the
    /// input allocations as a side effect.
    fn merge_frame(&mut self, bmaps: &mut [VirtualBMap]) -> Result<FrameOutcome>;

    fn config(&self) -> &DtwaConfig;

    fn breach_state(&self) -> &FlowBreachState;

    fn channel_free_times(&self) -> &[Nanos];

    fn onu_table(&self) -> &OnuTable;

    /// FNV-1a digest over channel, ONU and breach tables.
    fn state_digest(&self) -> u64 {
        let mut h = Fnv::new();
        for t in self.channel_free_times() {
            h.write_u64(t.0);
        }
        for (id, onu) in self.onu_table().iter() {
            h.write_u64(id as u64);
            h.write_u64(onu.tuned_channel.map_or(u64::MAX, |c| c as u64));
            h.write_u64(onu.free_time.0);
        }
        for (flow, win) in self.breach_state().flows() {
            h.write_u64(((flow.vno_id as u64) << 16) | flow.sla_id as u64);
            h.write_u64(win.window_delayed());
            h.write_u64(win.window_total());
            h.write_u64(win.breach_events);
        }
        h.finish()
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write_u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}
