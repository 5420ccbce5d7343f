//! Merging of per-tenant virtual bandwidth maps onto the shared wavelengths
//! of a TWDM-PON, with SLA-aware priorities and an exact reference solver.

pub mod audit;
pub mod dtwa;
pub mod engine;
pub mod error;
pub mod model;
pub mod oracle;
pub mod sla;
pub mod swa;
pub mod traffic;

pub use audit::{check_conservation, ScheduleAuditor};
pub use dtwa::{assign_resource, find_min_index, sort_bmaps, DtwaConfig, DtwaScheduler};
pub use engine::{FrameOutcome, MergeEngine};
pub use error::{ConstraintViolation, Error, Result};
pub use model::{
    allocation_unit, calc_max_time, compare_alloc, Allocation, BreachLookup, ChannelState, FlowId, MergedFrame, Nanos,
    OnuState, OnuTable, PriorityKey, ScheduledAllocation, SlaClass, SlaTable, VirtualBMap, FRAME,
};
pub use sla::{compliance_metric, BreachHistory, ComplianceSummary, FlowBreachState, FrameBreachReport};
pub use swa::{partition_by_channel, OnuChannelMap, SwaScheduler};
pub use traffic::{ArrivalSampler, ChannelPlan, Distribution, FrameGenerator, Topology, TrafficConfig};
pub use oracle::{
    evaluate_objective, random_instance, solve_exact, OracleInstance, OracleMode, OracleSolution, Placement,
    RandomInstanceConfig,
};
