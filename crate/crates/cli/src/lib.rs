//! Scenario execution, sweeps, runtime profiling and solver comparison for
//! the TWDM-PON merging engines.

pub mod compare;
pub mod profile;
pub mod run;
pub mod scenario;
pub mod sim;
pub mod stats;
pub mod sweep;

pub use compare::{compare_corpus, compare_instance, generate_instances, load_corpus, summarize, CompareRow, CompareSummary};
pub use profile::{profile_runtime, ProfileConfig, ProfileRow};
pub use run::{run_scenario, write_csv, PointResult, PointRow, RunResult};
pub use scenario::{Algorithm, ChannelConfig, Scenario, QUICK_FRAMES, SCHEMA_VERSION};
pub use sim::{build_engine, OracleEngine, RepResult, Simulation};
pub use sweep::{sweep, DistributionSummary, SweepConfig, SweepResult};
