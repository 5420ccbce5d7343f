//! One seeded repetition of a scenario at a single SLA fraction.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use twdm_core::oracle::solve_exact;
use twdm_core::{
    calc_max_time, compliance_metric, Allocation, BreachHistory, ChannelPlan, DtwaConfig, DtwaScheduler, FlowBreachState,
    FrameGenerator, FrameOutcome, MergeEngine, MergedFrame, Nanos, OnuChannelMap, OnuTable, OracleInstance, Result,
    ScheduleAuditor, ScheduledAllocation, SlaTable, SwaScheduler, Topology, VirtualBMap,
};

use crate::scenario::{mix_seed, Algorithm, Scenario};

/// Per-frame exact solver wrapped as a merging engine. Every frame is solved
/// from empty channel and ONU tables.
#[derive(Clone, Debug)]
pub struct OracleEngine {
    cfg: DtwaConfig,
    sla_table: SlaTable,
    breach: FlowBreachState,
    free: Vec<Nanos>,
    onus: OnuTable,
}

impl OracleEngine {
    pub fn new(cfg: DtwaConfig, sla_table: SlaTable) -> Result<Self> {
        cfg.validate()?;
        Ok(OracleEngine {
            free: vec![Nanos::ZERO; cfg.n_channels],
            cfg,
            sla_table,
            breach: FlowBreachState::new(),
            onus: OnuTable::new(),
        })
    }
}

impl MergeEngine for OracleEngine {
    fn merge_frame(&mut self, bmaps: &mut [VirtualBMap]) -> Result<FrameOutcome> {
        calc_max_time(bmaps, &self.sla_table)?;
        let allocations = bmaps.iter().flat_map(|b| b.allocations.iter().copied()).collect();
        let instance = OracleInstance::new(allocations, self.cfg.n_channels, self.cfg.channel_tuning_time, self.sla_table.clone())?
            .with_guard(self.cfg.guard_time);
        let solution = solve_exact(&instance)?;
        let mut merged: MergedFrame = vec![Vec::new(); self.cfg.n_channels];
        for p in &solution.assignment {
            merged[p.channel].push(ScheduledAllocation {
                allocation: instance.allocations[p.index],
                channel: p.channel,
                sched_time: p.sched_time,
            });
        }
        for list in &mut merged {
            list.sort_by_key(|s| s.sched_time);
        }
        let report = self.breach.update_breach(&merged, &self.sla_table);
        Ok(FrameOutcome { merged, report })
    }

    fn config(&self) -> &DtwaConfig {
        &self.cfg
    }

    fn breach_state(&self) -> &FlowBreachState {
        &self.breach
    }

    fn channel_free_times(&self) -> &[Nanos] {
        &self.free
    }

    fn onu_table(&self) -> &OnuTable {
        &self.onus
    }
}

pub fn build_engine(scenario: &Scenario, algorithm: Algorithm, sla_table: &SlaTable) -> Result<Box<dyn MergeEngine + Send>> {
    let w = scenario.channel_config.channels();
    let cfg = DtwaConfig::new(w, scenario.channel_config.rate_gbps(), scenario.tuning_time())
        .with_guard(Nanos::from_micros(scenario.traffic.guard_time_us));
    Ok(match algorithm {
        Algorithm::Dtwa => Box::new(DtwaScheduler::new(cfg, sla_table.clone())?),
        Algorithm::Swa => {
            let map = match &scenario.onu_channel_map {
                Some(v) => OnuChannelMap::from_vec(v.clone()),
                None => OnuChannelMap::round_robin(scenario.n_onus, w),
            };
            Box::new(SwaScheduler::new(cfg, sla_table.clone(), map)?)
        }
        Algorithm::Oracle => Box::new(OracleEngine::new(cfg, sla_table.clone())?),
    })
}

/// Outcome of one repetition at one SLA fraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepResult {
    pub repetition: u32,
    pub seed: u64,
    pub compliance: f64,
    pub breached_windows: u64,
    pub total_windows: u64,
    pub delayed_allocations: u64,
    pub sla_allocations: u64,
    pub allocations: u64,
    /// Engine state digest after the last frame.
    pub state_digest: u64,
    #[serde(skip)]
    pub runtime_us: Vec<f64>,
}

/// A running simulation: generator, topology and one engine whose state
/// carries across frames.
pub struct Simulation {
    generator: FrameGenerator,
    topology: Topology,
    rng: ChaCha8Rng,
    engine: Box<dyn MergeEngine + Send>,
    auditor: Option<ScheduleAuditor>,
    fresh_auditor: bool,
    history: BreachHistory,
    submitted: Vec<Allocation>,
    frame: u64,
    allocations: u64,
    runtime_us: Vec<f64>,
    repetition: u32,
    seed: u64,
    audit_cfg: (usize, Nanos, Nanos),
}

impl Simulation {
    /// Seeds depend on the scenario seed and the repetition only, so every
    /// algorithm and SLA fraction of a repetition sees the same topology and
    /// the same random stream.
    pub fn new(scenario: &Scenario, sla_fraction: f64, repetition: u32) -> Result<Self> {
        Simulation::with_algorithm(scenario, scenario.algorithm, sla_fraction, repetition)
    }

    pub fn with_algorithm(scenario: &Scenario, algorithm: Algorithm, sla_fraction: f64, repetition: u32) -> Result<Self> {
        scenario.validate()?;
        let seed = mix_seed(scenario.seed, &[repetition as u64]);
        let sla_table = SlaTable::standard();
        let traffic = scenario.traffic_config(sla_fraction, seed)?;
        let plan = ChannelPlan {
            n_channels: scenario.channel_config.channels(),
            rate_gbps: scenario.channel_config.rate_gbps(),
        };
        let generator = FrameGenerator::new(traffic, plan, &sla_table)?;
        let topology = Topology::randomized(
            scenario.n_onus,
            scenario.n_vnos,
            &mut ChaCha8Rng::seed_from_u64(mix_seed(seed, &[0])),
        )?;
        let engine = build_engine(scenario, algorithm, &sla_table)?;
        let audit_cfg = (plan.n_channels, engine.config().guard_time, engine.config().channel_tuning_time);
        let auditor = scenario
            .audit
            .then(|| ScheduleAuditor::new(audit_cfg.0, audit_cfg.1, audit_cfg.2));
        Ok(Simulation {
            generator,
            topology,
            rng: ChaCha8Rng::seed_from_u64(mix_seed(seed, &[1])),
            engine,
            auditor,
            fresh_auditor: algorithm == Algorithm::Oracle,
            history: BreachHistory::new(),
            submitted: Vec::new(),
            frame: 0,
            allocations: 0,
            runtime_us: Vec::new(),
            repetition,
            seed,
            audit_cfg,
        })
    }

    pub fn engine(&self) -> &dyn MergeEngine {
        self.engine.as_ref()
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// Allocations generated for the most recent frame, before merging.
    pub fn last_submitted(&self) -> &[Allocation] {
        &self.submitted
    }

    pub fn frames_done(&self) -> u64 {
        self.frame
    }

    /// Generates, merges, audits and accounts for the next frame.
    pub fn step(&mut self) -> Result<FrameOutcome> {
        let mut bmaps = self.generator.generate_frame(&self.topology, self.frame, &mut self.rng)?;
        self.submitted.clear();
        self.submitted.extend(bmaps.iter().flat_map(|b| b.allocations.iter().copied()));

        let t0 = Instant::now();
        let outcome = self.engine.merge_frame(&mut bmaps)?;
        self.runtime_us.push(t0.elapsed().as_secs_f64() * 1e6);

        if self.fresh_auditor && self.auditor.is_some() {
            let (w, guard, tuning) = self.audit_cfg;
            self.auditor = Some(ScheduleAuditor::new(w, guard, tuning));
        }
        if let Some(auditor) = &mut self.auditor {
            auditor.check_frame(&self.submitted, &outcome.merged)?;
        }
        self.history.record(&outcome.report);
        self.allocations += self.submitted.len() as u64;
        self.frame += 1;
        Ok(outcome)
    }

    pub fn run(mut self, frames: u64) -> Result<RepResult> {
        for _ in 0..frames {
            self.step()?;
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> RepResult {
        let summary = compliance_metric(&self.history);
        RepResult {
            repetition: self.repetition,
            seed: self.seed,
            compliance: summary.compliance,
            breached_windows: summary.breached_windows,
            total_windows: summary.total_windows,
            delayed_allocations: summary.delayed_allocations,
            sla_allocations: summary.sla_allocations,
            allocations: self.allocations,
            state_digest: self.engine.state_digest(),
            runtime_us: self.runtime_us,
        }
    }
}
