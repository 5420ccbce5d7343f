//! Merge-time profiling across line capacities.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use twdm_core::{ChannelPlan, Error, FrameGenerator, Result, SlaTable, Topology, VirtualBMap};

use crate::scenario::{mix_seed, Algorithm, ChannelConfig, Scenario, SCHEMA_VERSION};
use crate::sim::build_engine;
use crate::stats::RuntimeStats;

pub const PROFILE_RATE_GBPS: f64 = 25.0;
pub const MIN_PROFILE_FRAMES: u64 = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub capacities_gbps: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    /// Raised to at least 1000.
    pub frames: u64,
    pub load: f64,
    pub sla_fraction: f64,
    pub tuning_time_us: f64,
    pub seed: u64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            capacities_gbps: vec![50.0, 100.0, 200.0],
            algorithms: vec![Algorithm::Dtwa, Algorithm::Swa],
            frames: MIN_PROFILE_FRAMES,
            load: 0.5,
            sla_fraction: 0.5,
            tuning_time_us: 0.25,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub schema_version: u32,
    pub capacity_gbps: f64,
    pub channels: usize,
    pub algorithm: Algorithm,
    pub frames: u64,
    pub median_us: f64,
    pub q1_us: f64,
    pub q3_us: f64,
    pub iqr_us: f64,
}

/// Each capacity C runs C/25 channels at 25 Gb/s. Frames are generated up
/// front; the algorithms then merge identical copies of each frame in
/// alternating order so drift in machine state hits them equally. Only the
/// merge call is timed.
pub fn profile_runtime(cfg: &ProfileConfig) -> Result<Vec<ProfileRow>> {
    if cfg.algorithms.is_empty() {
        return Err(Error::config("algorithms", "at least one algorithm is required"));
    }
    if cfg.algorithms.contains(&Algorithm::Oracle) {
        return Err(Error::config("algorithms", "the exact solver cannot merge full frames"));
    }
    let frames = cfg.frames.max(MIN_PROFILE_FRAMES);
    let sla_table = SlaTable::standard();
    let mut rows = Vec::new();
    for &capacity in &cfg.capacities_gbps {
        if !(capacity > 0.0 && capacity.is_finite()) {
            return Err(Error::config("capacities", format!("must be positive, got {capacity}")));
        }
        let channels = ((capacity / PROFILE_RATE_GBPS).round() as usize).max(1);
        let scenario = Scenario {
            id: format!("profile-{capacity}"),
            channel_config: ChannelConfig::Custom {
                channels,
                rate_gbps: PROFILE_RATE_GBPS,
            },
            tuning_time_us: cfg.tuning_time_us,
            load: cfg.load,
            sla_fractions: vec![cfg.sla_fraction],
            seed: cfg.seed,
            audit: false,
            ..Scenario::default()
        };
        scenario.validate()?;
        let seed = mix_seed(cfg.seed, &[capacity.to_bits()]);
        let plan = ChannelPlan {
            n_channels: channels,
            rate_gbps: PROFILE_RATE_GBPS,
        };
        let generator = FrameGenerator::new(scenario.traffic_config(cfg.sla_fraction, seed)?, plan, &sla_table)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topology = Topology::randomized(scenario.n_onus, scenario.n_vnos, &mut rng)?;
        let frames_data: Vec<Vec<VirtualBMap>> = (0..frames)
            .map(|f| generator.generate_frame(&topology, f, &mut rng))
            .collect::<Result<_>>()?;

        let mut engines = cfg
            .algorithms
            .iter()
            .map(|a| build_engine(&scenario, *a, &sla_table))
            .collect::<Result<Vec<_>>>()?;
        let mut samples = vec![Vec::with_capacity(frames as usize); engines.len()];
        let n = engines.len();
        for (f, maps) in frames_data.iter().enumerate() {
            for k in 0..n {
                let i = if f % 2 == 0 { k } else { n - 1 - k };
                let mut copy = maps.clone();
                let t0 = Instant::now();
                engines[i].merge_frame(&mut copy)?;
                samples[i].push(t0.elapsed().as_secs_f64() * 1e6);
            }
        }
        for (a, s) in cfg.algorithms.iter().zip(&samples) {
            let st = RuntimeStats::from_samples(s);
            rows.push(ProfileRow {
                schema_version: SCHEMA_VERSION,
                capacity_gbps: capacity,
                channels,
                algorithm: *a,
                frames,
                median_us: st.median_us,
                q1_us: st.q1_us,
                q3_us: st.q3_us,
                iqr_us: st.iqr_us,
            });
        }
    }
    Ok(rows)
}
