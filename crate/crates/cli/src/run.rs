use serde::{Deserialize, Serialize};
use twdm_core::Result;

use crate::scenario::{Algorithm, Scenario, SCHEMA_VERSION};
use crate::sim::{RepResult, Simulation};
use crate::stats::{mean, sample_std, RuntimeStats};

/// Aggregate over all repetitions at one SLA fraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub sla_fraction: f64,
    pub compliance_mean: f64,
    pub compliance_std: f64,
    pub breached_windows: u64,
    pub total_windows: u64,
    pub delayed_allocations: u64,
    pub sla_allocations: u64,
    pub runtime: RuntimeStats,
    pub repetitions: Vec<RepResult>,
    /// Per-frame merge wall time, frames x repetitions values.
    pub runtime_samples_us: Vec<f64>,
}

impl PointResult {
    fn from_reps(sla_fraction: f64, repetitions: Vec<RepResult>) -> Self {
        let compliance: Vec<f64> = repetitions.iter().map(|r| r.compliance).collect();
        let runtime_samples_us: Vec<f64> = repetitions.iter().flat_map(|r| r.runtime_us.iter().copied()).collect();
        PointResult {
            sla_fraction,
            compliance_mean: mean(&compliance),
            compliance_std: sample_std(&compliance),
            breached_windows: repetitions.iter().map(|r| r.breached_windows).sum(),
            total_windows: repetitions.iter().map(|r| r.total_windows).sum(),
            delayed_allocations: repetitions.iter().map(|r| r.delayed_allocations).sum(),
            sla_allocations: repetitions.iter().map(|r| r.sla_allocations).sum(),
            runtime: RuntimeStats::from_samples(&runtime_samples_us),
            repetitions,
            runtime_samples_us,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub schema_version: u32,
    pub scenario_id: String,
    pub channel_config: String,
    pub capacity_gbps: f64,
    pub tuning_time_us: f64,
    pub load: f64,
    pub distribution: String,
    pub algorithm: Algorithm,
    pub frames: u64,
    pub seed: u64,
    pub points: Vec<PointResult>,
}

impl RunResult {
    /// Copy with every wall-clock field cleared, for reproducibility checks.
    pub fn without_timing(&self) -> RunResult {
        let mut r = self.clone();
        for p in &mut r.points {
            p.runtime = RuntimeStats::default();
            p.runtime_samples_us.clear();
            for rep in &mut p.repetitions {
                rep.runtime_us.clear();
            }
        }
        r
    }

    pub fn mean_compliance(&self) -> f64 {
        mean(&self.points.iter().map(|p| p.compliance_mean).collect::<Vec<_>>())
    }
}

/// Runs every SLA fraction and repetition of `scenario`, frames strictly in
/// sequence against one engine per repetition.
pub fn run_scenario(scenario: &Scenario) -> Result<RunResult> {
    scenario.validate()?;
    let mut points = Vec::new();
    if scenario.frames > 0 {
        for &s in &scenario.sla_fractions {
            let reps = (0..scenario.repetitions)
                .map(|rep| Simulation::new(scenario, s, rep)?.run(scenario.frames))
                .collect::<Result<Vec<_>>>()?;
            points.push(PointResult::from_reps(s, reps));
        }
    }
    Ok(RunResult {
        schema_version: SCHEMA_VERSION,
        scenario_id: scenario.id.clone(),
        channel_config: scenario.channel_config.to_string(),
        capacity_gbps: scenario.channel_config.capacity_gbps(),
        tuning_time_us: scenario.tuning_time_us,
        load: scenario.load,
        distribution: scenario.distribution.name().to_string(),
        algorithm: scenario.algorithm,
        frames: scenario.frames,
        seed: scenario.seed,
        points,
    })
}

/// One flat output row per SLA fraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRow {
    pub schema_version: u32,
    pub scenario_id: String,
    pub channel_config: String,
    pub capacity_gbps: f64,
    pub tuning_time_us: f64,
    pub load: f64,
    pub distribution: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub frames: u64,
    pub repetitions: usize,
    pub sla_fraction: f64,
    pub compliance_mean: f64,
    pub compliance_std: f64,
    pub breached_windows: u64,
    pub total_windows: u64,
    pub delayed_allocations: u64,
    pub sla_allocations: u64,
    pub runtime_median_us: f64,
    pub runtime_iqr_us: f64,
}

impl RunResult {
    pub fn rows(&self) -> Vec<PointRow> {
        self.points
            .iter()
            .map(|p| PointRow {
                schema_version: self.schema_version,
                scenario_id: self.scenario_id.clone(),
                channel_config: self.channel_config.clone(),
                capacity_gbps: self.capacity_gbps,
                tuning_time_us: self.tuning_time_us,
                load: self.load,
                distribution: self.distribution.clone(),
                algorithm: self.algorithm,
                seed: self.seed,
                frames: self.frames,
                repetitions: p.repetitions.len(),
                sla_fraction: p.sla_fraction,
                compliance_mean: p.compliance_mean,
                compliance_std: p.compliance_std,
                breached_windows: p.breached_windows,
                total_windows: p.total_windows,
                delayed_allocations: p.delayed_allocations,
                sla_allocations: p.sla_allocations,
                runtime_median_us: p.runtime.median_us,
                runtime_iqr_us: p.runtime.iqr_us,
            })
            .collect()
    }
}

pub fn write_csv<T: Serialize, W: std::io::Write>(rows: &[T], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
