//! Cartesian sweeps over scenario axes.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twdm_core::{Distribution, Result};

use crate::run::{run_scenario, PointRow};
use crate::scenario::{parse_error, read_file, Algorithm, ChannelConfig, Scenario, SCHEMA_VERSION};
use crate::stats::mean;

/// A base scenario plus the axes to vary. An empty axis keeps the base value.
/// Each cell runs the base's full `sla_fractions` list.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub id: String,
    pub base: Scenario,
    pub channel_configs: Vec<ChannelConfig>,
    pub tuning_times_us: Vec<f64>,
    pub loads: Vec<f64>,
    pub distributions: Vec<Distribution>,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text).map_err(|e| parse_error("sweep config", &e))?;
        cfg.base.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        SweepConfig::from_json(&read_file(path)?)
    }

    /// Every cell in stable order: channel config, tuning, load,
    /// distribution, algorithm, seed (last varies fastest).
    pub fn cells(&self) -> Vec<Scenario> {
        fn axis<T: Clone>(v: &[T], base: T) -> Vec<T> {
            if v.is_empty() {
                vec![base]
            } else {
                v.to_vec()
            }
        }
        let b = &self.base;
        let mut out = Vec::new();
        for cc in axis(&self.channel_configs, b.channel_config) {
            for t in axis(&self.tuning_times_us, b.tuning_time_us) {
                for l in axis(&self.loads, b.load) {
                    for d in axis(&self.distributions, b.distribution) {
                        for a in axis(&self.algorithms, b.algorithm) {
                            for s in axis(&self.seeds, b.seed) {
                                let id = if self.id.is_empty() { b.id.clone() } else { self.id.clone() };
                                out.push(Scenario {
                                    id: format!("{id}/{cc}/t{t}/l{l}/{}/{}/s{s}", d.name(), a.name()),
                                    channel_config: cc,
                                    tuning_time_us: t,
                                    load: l,
                                    distribution: d,
                                    algorithm: a,
                                    seed: s,
                                    ..b.clone()
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn expected_rows(&self) -> usize {
        self.cells().len() * self.base.sla_fractions.len()
    }
}

/// Mean compliance of one distribution over every other axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub schema_version: u32,
    pub distribution: String,
    pub cells: usize,
    pub compliance_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub schema_version: u32,
    pub id: String,
    pub rows: Vec<PointRow>,
    pub distribution_summary: Vec<DistributionSummary>,
}

/// Runs all cells, in parallel across cells, and returns rows in cell order.
pub fn sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    let cells = cfg.cells();
    for c in &cells {
        c.validate()?;
    }
    let results = cells.par_iter().map(run_scenario).collect::<Result<Vec<_>>>()?;
    let rows: Vec<PointRow> = results.iter().flat_map(|r| r.rows()).collect();
    Ok(SweepResult {
        schema_version: SCHEMA_VERSION,
        id: cfg.id.clone(),
        distribution_summary: summarize_by_distribution(&rows),
        rows,
    })
}

pub fn summarize_by_distribution(rows: &[PointRow]) -> Vec<DistributionSummary> {
    let mut by: BTreeMap<usize, (String, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let order = Distribution::ALL
            .iter()
            .position(|d| d.name() == r.distribution)
            .unwrap_or(usize::MAX);
        by.entry(order)
            .or_insert_with(|| (r.distribution.clone(), Vec::new()))
            .1
            .push(r.compliance_mean);
    }
    by.into_values()
        .map(|(distribution, v)| DistributionSummary {
            schema_version: SCHEMA_VERSION,
            distribution,
            cells: v.len(),
            compliance_mean: mean(&v),
        })
        .collect()
}
