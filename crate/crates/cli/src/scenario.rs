use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use twdm_core::traffic::{Distribution, TrafficConfig};
use twdm_core::{Error, Nanos, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const QUICK_FRAMES: u64 = 100;

/// Channel plant: one of the three 200G presets or an explicit plan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelConfig {
    Preset(ChannelPreset),
    Custom { channels: usize, rate_gbps: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelPreset {
    #[serde(rename = "8x25G")]
    Ch8x25,
    #[serde(rename = "4x50G")]
    Ch4x50,
    #[serde(rename = "1x200G")]
    Ch1x200,
}

impl ChannelConfig {
    pub const PRESETS: [ChannelConfig; 3] = [
        ChannelConfig::Preset(ChannelPreset::Ch8x25),
        ChannelConfig::Preset(ChannelPreset::Ch4x50),
        ChannelConfig::Preset(ChannelPreset::Ch1x200),
    ];

    pub fn channels(&self) -> usize {
        match self {
            ChannelConfig::Preset(ChannelPreset::Ch8x25) => 8,
            ChannelConfig::Preset(ChannelPreset::Ch4x50) => 4,
            ChannelConfig::Preset(ChannelPreset::Ch1x200) => 1,
            ChannelConfig::Custom { channels, .. } => *channels,
        }
    }

    pub fn rate_gbps(&self) -> f64 {
        match self {
            ChannelConfig::Preset(ChannelPreset::Ch8x25) => 25.0,
            ChannelConfig::Preset(ChannelPreset::Ch4x50) => 50.0,
            ChannelConfig::Preset(ChannelPreset::Ch1x200) => 200.0,
            ChannelConfig::Custom { rate_gbps, .. } => *rate_gbps,
        }
    }

    pub fn capacity_gbps(&self) -> f64 {
        self.channels() as f64 * self.rate_gbps()
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels() == 0 {
            return Err(Error::config("channel_config.channels", "at least one channel is required"));
        }
        if !(self.rate_gbps() > 0.0 && self.rate_gbps().is_finite()) {
            return Err(Error::config(
                "channel_config.rate_gbps",
                format!("must be positive, got {}", self.rate_gbps()),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for ChannelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}G", self.channels(), self.rate_gbps())
    }
}

impl FromStr for ChannelConfig {
    type Err = Error;

    /// Accepts `WxRG` (for example `8x25G` or `2x12.5G`).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("channel_config", format!("expected <channels>x<rate>G, got `{s}`"));
        let lower = s.trim().to_ascii_lowercase();
        let (w, rate) = lower.split_once('x').ok_or_else(bad)?;
        let w: usize = w.parse().map_err(|_| bad())?;
        let rate: f64 = rate.trim_end_matches('g').parse().map_err(|_| bad())?;
        let cfg = match (w, rate) {
            (8, 25.0) => ChannelConfig::Preset(ChannelPreset::Ch8x25),
            (4, 50.0) => ChannelConfig::Preset(ChannelPreset::Ch4x50),
            (1, 200.0) => ChannelConfig::Preset(ChannelPreset::Ch1x200),
            (channels, rate_gbps) => ChannelConfig::Custom { channels, rate_gbps },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dtwa,
    Swa,
    Oracle,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dtwa => "dtwa",
            Algorithm::Swa => "swa",
            Algorithm::Oracle => "oracle",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dtwa" => Ok(Algorithm::Dtwa),
            "swa" => Ok(Algorithm::Swa),
            "oracle" => Ok(Algorithm::Oracle),
            other => Err(Error::config("algorithm", format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Arrival and burst parameters shared by every point of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficParams {
    pub arrival_range_au: u32,
    pub poisson_lambda: f64,
    pub zipf_s: f64,
    pub zipf_q: f64,
    pub pareto_alpha: f64,
    pub min_burst_us: f64,
    pub max_burst_us: f64,
    pub guard_time_us: f64,
}

impl Default for TrafficParams {
    fn default() -> Self {
        let t = TrafficConfig::default();
        TrafficParams {
            arrival_range_au: t.arrival_range_au,
            poisson_lambda: t.poisson_lambda,
            zipf_s: t.zipf_s,
            zipf_q: t.zipf_q,
            pareto_alpha: t.pareto_alpha,
            min_burst_us: t.min_burst.as_micros(),
            max_burst_us: t.max_burst.as_micros(),
            guard_time_us: t.guard_time.as_micros(),
        }
    }
}

pub fn default_sla_fractions() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub channel_config: ChannelConfig,
    pub tuning_time_us: f64,
    pub load: f64,
    pub sla_fractions: Vec<f64>,
    pub distribution: Distribution,
    pub traffic: TrafficParams,
    pub algorithm: Algorithm,
    pub frames: u64,
    pub seed: u64,
    pub repetitions: u32,
    pub n_onus: usize,
    pub n_vnos: usize,
    /// Fixed channel per ONU for SWA; round-robin when absent.
    pub onu_channel_map: Option<Vec<usize>>,
    /// Check every merged frame against the feasibility rules.
    pub audit: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            id: "scenario".into(),
            channel_config: ChannelConfig::Preset(ChannelPreset::Ch8x25),
            tuning_time_us: 0.0,
            load: 0.5,
            sla_fractions: default_sla_fractions(),
            distribution: Distribution::Uniform,
            traffic: TrafficParams::default(),
            algorithm: Algorithm::Dtwa,
            frames: 1000,
            seed: 1,
            repetitions: 1,
            n_onus: 64,
            n_vnos: 5,
            onu_channel_map: None,
            audit: true,
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| parse_error("scenario", &e))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Scenario::from_json(&read_file(path)?)
    }

    pub fn tuning_time(&self) -> Nanos {
        Nanos::from_micros(self.tuning_time_us)
    }

    pub fn validate(&self) -> Result<()> {
        self.channel_config.validate()?;
        if !(self.tuning_time_us >= 0.0 && self.tuning_time_us.is_finite()) {
            return Err(Error::config("tuning_time_us", format!("must be >= 0, got {}", self.tuning_time_us)));
        }
        if !(self.load > 0.0 && self.load <= 1.0) {
            return Err(Error::config("load", format!("must be in (0, 1], got {}", self.load)));
        }
        if self.sla_fractions.is_empty() {
            return Err(Error::config("sla_fractions", "at least one value is required"));
        }
        for s in &self.sla_fractions {
            if !(0.0..=1.0).contains(s) {
                return Err(Error::config("sla_fractions", format!("{s} is outside [0, 1]")));
            }
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions", "must be at least 1"));
        }
        if self.n_vnos == 0 || self.n_onus < self.n_vnos || self.n_onus > u16::MAX as usize {
            return Err(Error::config(
                "n_onus",
                format!("need n_vnos >= 1 and n_vnos <= n_onus <= 65535, got {} / {}", self.n_vnos, self.n_onus),
            ));
        }
        if let Some(map) = &self.onu_channel_map {
            if map.len() < self.n_onus {
                return Err(Error::config(
                    "onu_channel_map",
                    format!("covers {} ONUs, scenario has {}", map.len(), self.n_onus),
                ));
            }
            if let Some(bad) = map.iter().find(|c| **c >= self.channel_config.channels()) {
                return Err(Error::config("onu_channel_map", format!("channel {bad} out of range")));
            }
        }
        self.traffic_config(self.sla_fractions[0], 0)?.validate()
    }

    /// Traffic generator settings for one sweep point.
    pub fn traffic_config(&self, sla_fraction: f64, seed: u64) -> Result<TrafficConfig> {
        let t = &self.traffic;
        for (field, v) in [
            ("traffic.min_burst_us", t.min_burst_us),
            ("traffic.max_burst_us", t.max_burst_us),
            ("traffic.guard_time_us", t.guard_time_us),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(field, format!("must be >= 0, got {v}")));
            }
        }
        let cfg = TrafficConfig {
            distribution: self.distribution,
            arrival_range_au: t.arrival_range_au,
            poisson_lambda: t.poisson_lambda,
            zipf_s: t.zipf_s,
            zipf_q: t.zipf_q,
            pareto_alpha: t.pareto_alpha,
            min_burst: Nanos::from_micros(t.min_burst_us),
            max_burst: Nanos::from_micros(t.max_burst_us),
            guard_time: Nanos::from_micros(t.guard_time_us),
            load_fraction: self.load,
            sla_fraction,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub(crate) fn parse_error(context: &str, e: &serde_json::Error) -> Error {
    Error::Parse {
        context: format!("{context} (line {}, column {})", e.line(), e.column()),
        message: e.to_string(),
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// SplitMix64 step, used to derive independent stream seeds.
pub fn mix_seed(base: u64, parts: &[u64]) -> u64 {
    let mut x = base;
    for p in parts {
        x ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(x << 6).wrapping_add(x >> 2);
        x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x = z ^ (z >> 31);
    }
    x
}
