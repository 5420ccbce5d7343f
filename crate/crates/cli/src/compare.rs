//! Heuristics against the exact solver on a corpus of small instances.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twdm_core::oracle::{dtwa_schedule, swa_schedule};
use twdm_core::{
    evaluate_objective, random_instance, solve_exact, Error, OnuChannelMap, OracleInstance, RandomInstanceConfig,
    Result, SlaTable,
};

use crate::scenario::{default_sla_fractions, mix_seed, SCHEMA_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub schema_version: u32,
    pub name: String,
    pub allocations: usize,
    pub channels: usize,
    /// Share of allocations with a guaranteed class.
    pub sla_share: f64,
    pub oracle_breaches: usize,
    pub dtwa_breaches: usize,
    pub swa_breaches: usize,
    pub oracle_delay_us: f64,
    pub dtwa_delay_us: f64,
    pub search_nodes: u64,
}

impl CompareRow {
    pub fn dtwa_optimal(&self) -> bool {
        self.dtwa_breaches == self.oracle_breaches
    }

    /// Neither heuristic beats the exact optimum.
    pub fn dominance_holds(&self) -> bool {
        self.oracle_breaches <= self.dtwa_breaches && self.oracle_breaches <= self.swa_breaches
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub schema_version: u32,
    pub instances: usize,
    pub dtwa_optimal: usize,
    pub swa_optimal: usize,
    pub dominance_violations: usize,
}

pub fn summarize(rows: &[CompareRow]) -> CompareSummary {
    CompareSummary {
        schema_version: SCHEMA_VERSION,
        instances: rows.len(),
        dtwa_optimal: rows.iter().filter(|r| r.dtwa_optimal()).count(),
        swa_optimal: rows.iter().filter(|r| r.swa_breaches == r.oracle_breaches).count(),
        dominance_violations: rows.iter().filter(|r| !r.dominance_holds()).count(),
    }
}

/// SWA's map for an instance: ONUs round-robin over its channels.
pub fn instance_onu_map(instance: &OracleInstance) -> OnuChannelMap {
    let n_onus = instance.allocations.iter().map(|a| a.onu_id as usize + 1).max().unwrap_or(0);
    OnuChannelMap::round_robin(n_onus, instance.n_channels)
}

pub fn compare_instance(name: &str, instance: &OracleInstance) -> Result<CompareRow> {
    let exact = solve_exact(instance)?;
    let (dtwa, dtwa_delay) = evaluate_objective(&dtwa_schedule(instance)?, instance)?;
    let (swa, _) = evaluate_objective(&swa_schedule(instance, &instance_onu_map(instance))?, instance)?;
    let guaranteed = instance
        .allocations
        .iter()
        .filter(|a| instance.sla_table.get(a.sla_id).is_some_and(|c| !c.best_effort))
        .count();
    Ok(CompareRow {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        allocations: instance.len(),
        channels: instance.n_channels,
        sla_share: if instance.is_empty() { 0.0 } else { guaranteed as f64 / instance.len() as f64 },
        oracle_breaches: exact.objective,
        dtwa_breaches: dtwa,
        swa_breaches: swa,
        oracle_delay_us: exact.total_delay.as_micros(),
        dtwa_delay_us: dtwa_delay.as_micros(),
        search_nodes: exact.proof.nodes,
    })
}

pub fn compare_corpus(corpus: &[(String, OracleInstance)]) -> Result<Vec<CompareRow>> {
    corpus.par_iter().map(|(name, inst)| compare_instance(name, inst)).collect()
}

/// `n` random instances, cycling through SLA fractions 0.1 to 1.0.
pub fn generate_instances(n: usize, seed: u64, base: &RandomInstanceConfig) -> Result<Vec<(String, OracleInstance)>> {
    let fractions = default_sla_fractions();
    let table = SlaTable::standard();
    (0..n)
        .map(|i| {
            let s = fractions[i % fractions.len()];
            let cfg = RandomInstanceConfig {
                sla_fraction: s,
                ..base.clone()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[i as u64]));
            let inst = random_instance(&cfg, &table, &mut rng)?;
            Ok((format!("instance_{i:05}_s{:02}", (s * 10.0).round() as u32), inst))
        })
        .collect()
}

pub fn write_corpus(dir: &Path, corpus: &[(String, OracleInstance)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    corpus
        .iter()
        .map(|(name, inst)| {
            let path = dir.join(format!("{name}.json"));
            inst.save(&path)?;
            Ok(path)
        })
        .collect()
}

/// Loads every `*.json` file in `dir`, sorted by file name.
pub fn load_corpus(dir: &Path) -> Result<Vec<(String, OracleInstance)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let inst = OracleInstance::load(&p).map_err(|e| match e {
                Error::Parse { message, .. } => Error::Parse {
                    context: p.display().to_string(),
                    message,
                },
                other => other,
            })?;
            Ok((name, inst))
        })
        .collect()
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}
