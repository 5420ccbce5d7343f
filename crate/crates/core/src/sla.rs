//! Stateful SLA breach tracking over a sliding compliance window.
//!
//! Every merged frame contributes one `(delayed, total)` sample per flow. The
//! breach fraction of a flow is the ratio of the sums over the last
//! [`WINDOW_FRAMES`] samples, and a guaranteed flow is breached for that
//! window when the fraction is strictly above its class threshold.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::model::{BreachLookup, FlowId, MergedFrame, SlaTable};

/// 8 frames of 125 us: the 1 ms compliance window.
pub const WINDOW_FRAMES: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowWindow {
    samples: VecDeque<(u32, u32)>,
    delayed: u64,
    total: u64,
    pub fraction: f64,
    pub breach_events: u64,
}

impl FlowWindow {
    fn new() -> Self {
        FlowWindow {
            samples: VecDeque::with_capacity(WINDOW_FRAMES + 1),
            delayed: 0,
            total: 0,
            fraction: 0.0,
            breach_events: 0,
        }
    }

    fn push(&mut self, delayed: u32, total: u32, window: usize) {
        self.samples.push_back((delayed, total));
        self.delayed += delayed as u64;
        self.total += total as u64;
        while self.samples.len() > window {
            let (d, t) = self.samples.pop_front().unwrap();
            self.delayed -= d as u64;
            self.total -= t as u64;
        }
        self.fraction = if self.total == 0 {
            0.0
        } else {
            self.delayed as f64 / self.total as f64
        };
    }

    pub fn window_delayed(&self) -> u64 {
        self.delayed
    }

    pub fn window_total(&self) -> u64 {
        self.total
    }
}

/// Outcome of one window for one flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowFlag {
    pub flow: FlowId,
    pub fraction: f64,
    /// The window contains at least one allocation of this flow.
    pub active: bool,
    pub breached: bool,
    pub best_effort: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameBreachReport {
    pub flags: Vec<FlowFlag>,
    pub delayed: u64,
    pub sla_allocations: u64,
}

/// Rolling per-flow breach statistics owned by one scheduler instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowBreachState {
    window: usize,
    flows: BTreeMap<FlowId, FlowWindow>,
}

impl Default for FlowBreachState {
    fn default() -> Self {
        FlowBreachState::new()
    }
}

impl FlowBreachState {
    pub fn new() -> Self {
        FlowBreachState::with_window(WINDOW_FRAMES)
    }

    pub fn with_window(window: usize) -> Self {
        assert!(window > 0, "breach window must hold at least one frame");
        FlowBreachState {
            window,
            flows: BTreeMap::new(),
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn flow(&self, flow: FlowId) -> Option<&FlowWindow> {
        self.flows.get(&flow)
    }

    pub fn flows(&self) -> impl Iterator<Item = (&FlowId, &FlowWindow)> {
        self.flows.iter()
    }

    /// Slides every known flow's window by one frame using `scheduled`.
    pub fn update_breach(&mut self, scheduled: &MergedFrame, sla_table: &SlaTable) -> FrameBreachReport {
        let mut frame: BTreeMap<FlowId, (u32, u32)> = BTreeMap::new();
        for s in scheduled.iter().flatten() {
            let entry = frame.entry(s.allocation.flow()).or_insert((0, 0));
            entry.1 += 1;
            if s.is_delayed() {
                entry.0 += 1;
            }
        }
        for flow in frame.keys() {
            self.flows.entry(*flow).or_insert_with(FlowWindow::new);
        }

        let mut report = FrameBreachReport::default();
        for (flow, win) in self.flows.iter_mut() {
            let (delayed, total) = frame.get(flow).copied().unwrap_or((0, 0));
            win.push(delayed, total, self.window);

            let class = sla_table.get(flow.sla_id);
            let best_effort = class.is_none_or(|c| c.best_effort);
            let threshold = class.map_or(1.0, |c| c.breach_threshold);
            let breached = !best_effort && win.fraction > threshold;
            if breached {
                win.breach_events += 1;
            }
            if !best_effort {
                report.delayed += delayed as u64;
                report.sla_allocations += total as u64;
            }
            report.flags.push(FlowFlag {
                flow: *flow,
                fraction: win.fraction,
                active: win.total > 0,
                breached,
                best_effort,
            });
        }
        report
    }

    /// Same as calling [`update_breach`](Self::update_breach) once per frame.
    pub fn update_many(&mut self, frames: &[MergedFrame], sla_table: &SlaTable) -> Vec<FrameBreachReport> {
        frames.iter().map(|f| self.update_breach(f, sla_table)).collect()
    }
}

impl BreachLookup for FlowBreachState {
    fn breach(&self, flow: FlowId) -> f64 {
        self.flows.get(&flow).map_or(0.0, |w| w.fraction)
    }
}

/// Per-flow window outcomes accumulated over a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BreachHistory {
    flows: BTreeMap<FlowId, Vec<bool>>,
    delayed: u64,
    sla_allocations: u64,
}

impl BreachHistory {
    pub fn new() -> Self {
        BreachHistory::default()
    }

    /// Records the guaranteed flows of one frame report. Windows without any
    /// traffic of the flow are not counted.
    pub fn record(&mut self, report: &FrameBreachReport) {
        for flag in report.flags.iter().filter(|f| !f.best_effort && f.active) {
            self.flows.entry(flag.flow).or_default().push(flag.breached);
        }
        self.delayed += report.delayed;
        self.sla_allocations += report.sla_allocations;
    }

    pub fn push_flag(&mut self, flow: FlowId, breached: bool) {
        self.flows.entry(flow).or_default().push(breached);
    }

    pub fn flows(&self) -> impl Iterator<Item = (&FlowId, &Vec<bool>)> {
        self.flows.iter()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplianceSummary {
    /// Share of (flow, window) pairs that were not breached.
    pub compliance: f64,
    pub breached_windows: u64,
    pub total_windows: u64,
    pub delayed_allocations: u64,
    pub sla_allocations: u64,
}

/// Pooled compliance over all guaranteed flows and windows; 1.0 for a run
/// with no guaranteed traffic.
pub fn compliance_metric(history: &BreachHistory) -> ComplianceSummary {
    let total_windows: u64 = history.flows.values().map(|v| v.len() as u64).sum();
    let breached_windows: u64 = history
        .flows
        .values()
        .map(|v| v.iter().filter(|b| **b).count() as u64)
        .sum();
    let compliance = if total_windows == 0 {
        1.0
    } else {
        1.0 - breached_windows as f64 / total_windows as f64
    };
    ComplianceSummary {
        compliance,
        breached_windows,
        total_windows,
        delayed_allocations: history.delayed,
        sla_allocations: history.sla_allocations,
    }
}
