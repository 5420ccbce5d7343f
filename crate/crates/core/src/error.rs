use thiserror::Error;

use crate::model::FlowId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A scenario, scheduler or traffic parameter is out of its valid range.
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("allocation #{seq} (vno {vno_id}, onu {onu_id}) references unknown SLA class {sla_id}")]
    UnknownSla {
        seq: u64,
        vno_id: u16,
        onu_id: u16,
        sla_id: u16,
    },

    #[error("allocation #{seq} (vno {vno_id}, onu {onu_id}) has no fixed channel in the ONU map")]
    UnmappedOnu { seq: u64, vno_id: u16, onu_id: u16 },

    /// The generator could not fit the requested load inside one frame.
    #[error(
        "load infeasible: allocation {index} for vno {vno_id} would start at {start_ns} ns, past the {frame_ns} ns frame"
    )]
    LoadInfeasible {
        index: usize,
        vno_id: u16,
        start_ns: u64,
        frame_ns: u64,
    },

    #[error("oracle instance too large: {allocations} allocations / {channels} channels (limit {max_allocations} / {max_channels})")]
    OracleSizeLimit {
        allocations: usize,
        channels: usize,
        max_allocations: usize,
        max_channels: usize,
    },

    #[error(transparent)]
    Constraint(#[from] ConstraintViolation),

    #[error("{context}: {message}")]
    Parse { context: String, message: String },

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by user input rather than broken invariants.
    pub fn is_config(&self) -> bool {
        !matches!(self, Error::Constraint(_))
    }
}

/// A schedule that breaks one of the merging constraints.
///
/// The first three variants are the formulation's own constraints (channel
/// exclusivity, single assignment, per-flow conservation); the rest are
/// physical feasibility rules it leaves implicit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintViolation {
    #[error("channel exclusivity violated: channel {channel} carries allocations {first} and {second} in overlapping slots")]
    ChannelOverlap {
        channel: usize,
        first: usize,
        second: usize,
    },
    #[error("single assignment violated: allocation {index} assigned {count} times")]
    NotAssignedOnce { index: usize, count: usize },
    #[error("flow conservation violated: flow {flow} has {assigned} assigned allocations, expected {expected}")]
    FlowConservation {
        flow: FlowId,
        assigned: usize,
        expected: usize,
    },
    #[error("allocation {index} assigned to channel {channel} but only {channels} exist")]
    ChannelOutOfRange {
        index: usize,
        channel: usize,
        channels: usize,
    },
    #[error("allocation {index} transmits at {sched_ns} ns before its requested start {start_ns} ns")]
    EarlyTransmission {
        index: usize,
        sched_ns: u64,
        start_ns: u64,
    },
    #[error("onu {onu_id} transmits allocations {first} and {second} at overlapping times")]
    OnuOverlap {
        onu_id: u16,
        first: usize,
        second: usize,
    },
    #[error("onu {onu_id} retunes between allocations {first} and {second} with only {gap_ns} ns gap (tuning {tuning_ns} ns)")]
    TuningGap {
        onu_id: u16,
        first: usize,
        second: usize,
        gap_ns: u64,
        tuning_ns: u64,
    },
}
