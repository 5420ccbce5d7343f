//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Pareto, Poisson};
use twdm_core::{
    ArrivalSampler, Distribution, MergedFrame, Nanos, RandomInstanceConfig, ScheduledAllocation, TrafficConfig,
};
use twdm_sim::compare::{compare_corpus, generate_instances};
use twdm_sim::{
    profile_runtime, run_scenario, Algorithm, ChannelConfig, ProfileConfig, RunResult, Scenario, Simulation,
};

type Check = Result<String, String>;

const CONFIGS: [&str; 3] = ["8x25G", "4x50G", "1x200G"];
const TUNINGS: [f64; 4] = [0.0, 0.25, 1.0, 15.0];
const LOADS: [f64; 3] = [0.2, 0.5, 0.8];

fn cfg(s: &str) -> ChannelConfig {
    s.parse().unwrap()
}

fn fractions(range: std::ops::RangeInclusive<u32>) -> Vec<f64> {
    range.map(|i| i as f64 / 10.0).collect()
}

fn scenario(channels: &str, tuning: f64, load: f64, sla: Vec<f64>, frames: u64, seed: u64) -> Scenario {
    Scenario {
        id: format!("{channels}-t{tuning}-l{load}"),
        channel_config: cfg(channels),
        tuning_time_us: tuning,
        load,
        sla_fractions: sla,
        frames,
        seed,
        ..Scenario::default()
    }
}

fn run(s: &Scenario) -> RunResult {
    run_scenario(s).unwrap_or_else(|e| panic!("{}: {e}", s.id))
}

fn compliance_at(r: &RunResult, sla: f64) -> f64 {
    r.points
        .iter()
        .find(|p| (p.sla_fraction - sla).abs() < 1e-9)
        .map(|p| p.compliance_mean)
        .unwrap()
}

/// Counts physical violations in a stream of merged frames without using the
/// library auditor.
struct IndependentChecker {
    guard: u64,
    tuning: u64,
    channel_end: HashMap<usize, u64>,
    onu_last: HashMap<u16, (u64, usize)>,
    double_bookings: u64,
    conservation: u64,
    onu_overlaps: u64,
    tuning_gaps: u64,
    early: u64,
}

impl IndependentChecker {
    fn new(guard: Nanos, tuning: Nanos) -> Self {
        IndependentChecker {
            guard: guard.0,
            tuning: tuning.0,
            channel_end: HashMap::new(),
            onu_last: HashMap::new(),
            double_bookings: 0,
            conservation: 0,
            onu_overlaps: 0,
            tuning_gaps: 0,
            early: 0,
        }
    }

    fn frame(&mut self, submitted: &[twdm_core::Allocation], merged: &MergedFrame) {
        let mut want: Vec<_> = submitted
            .iter()
            .map(|a| (a.seq, a.vno_id, a.onu_id, a.sla_id, a.start_time, a.size))
            .collect();
        let mut got: Vec<_> = merged
            .iter()
            .flatten()
            .map(|s| {
                let a = &s.allocation;
                (a.seq, a.vno_id, a.onu_id, a.sla_id, a.start_time, a.size)
            })
            .collect();
        want.sort();
        got.sort();
        if want != got {
            self.conservation += 1;
        }
        let mut all: Vec<&ScheduledAllocation> = merged.iter().flatten().collect();
        all.sort_by_key(|s| (s.sched_time, s.channel));
        for s in all {
            let t = s.sched_time.0;
            let end = t + s.allocation.size.0;
            if t < s.allocation.start_time.0 {
                self.early += 1;
            }
            if let Some(prev) = self.channel_end.get(&s.channel) {
                if t < prev + self.guard {
                    self.double_bookings += 1;
                }
            }
            if let Some((prev_end, prev_ch)) = self.onu_last.get(&s.allocation.onu_id) {
                if t < prev_end + self.guard {
                    self.onu_overlaps += 1;
                }
                if *prev_ch != s.channel && t < prev_end + self.tuning {
                    self.tuning_gaps += 1;
                }
            }
            self.channel_end.insert(s.channel, end);
            self.onu_last.insert(s.allocation.onu_id, (end, s.channel));
        }
    }

    fn total(&self) -> u64 {
        self.double_bookings + self.conservation + self.onu_overlaps + self.tuning_gaps + self.early
    }
}

fn c1_constraints() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let mut frames = 0u64;
    let mut allocations = 0u64;
    let mut violations = Vec::new();
    for c in CONFIGS {
        for t in TUNINGS {
            for l in LOADS {
                for d in Distribution::ALL {
                    for alg in [Algorithm::Dtwa, Algorithm::Swa] {
                        let sla = rng.gen_range(0..=10) as f64 / 10.0;
                        let mut s = scenario(c, t, l, vec![sla], 0, rng.gen());
                        s.distribution = d;
                        s.audit = false;
                        let mut sim = Simulation::with_algorithm(&s, alg, sla, 0).unwrap();
                        let cfg = *sim.engine().config();
                        let mut checker = IndependentChecker::new(cfg.guard_time, cfg.channel_tuning_time);
                        for _ in 0..36 {
                            let out = sim.step().unwrap();
                            checker.frame(sim.last_submitted(), &out.merged);
                            allocations += sim.last_submitted().len() as u64;
                            frames += 1;
                        }
                        if checker.total() > 0 {
                            violations.push(format!(
                                "{c} t{t} l{l} {} {}: double {} conservation {} onu {} tuning {} early {}",
                                d.name(),
                                alg.name(),
                                checker.double_bookings,
                                checker.conservation,
                                checker.onu_overlaps,
                                checker.tuning_gaps,
                                checker.early
                            ));
                        }
                    }
                }
            }
        }
    }
    let detail = format!("{frames} frames, {allocations} allocations, {} violating runs", violations.len());
    if frames >= 10_000 && violations.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", violations.join("; ")))
    }
}

fn c2_low_load() -> Check {
    let mut bad = Vec::new();
    let mut min = f64::INFINITY;
    let mut cells = 0;
    for c in CONFIGS {
        for l in [0.2, 0.5] {
            let r = run(&scenario(c, 0.0, l, fractions(1..=9), 1000, 2));
            for p in &r.points {
                cells += 1;
                min = min.min(p.compliance_mean);
                if p.compliance_mean < 0.98 {
                    bad.push(format!("{c}@{l}/s{}={:.3}", p.sla_fraction, p.compliance_mean));
                }
            }
        }
    }
    let detail = format!("{cells} cells, min compliance {min:.3}");
    if bad.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {} below 0.98: {}", bad.len(), bad.join(" ")))
    }
}

fn c3_high_load_shape() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    let mut at_08 = HashMap::new();
    for c in CONFIGS {
        let mut s = scenario(c, 0.0, 0.8, vec![0.4, 0.8, 1.0], 1000, 3);
        s.repetitions = 5;
        let r = run(&s);
        let (a, b, e) = (compliance_at(&r, 0.4), compliance_at(&r, 0.8), compliance_at(&r, 1.0));
        at_08.insert(c, b);
        let drop = e < a;
        ok &= drop;
        parts.push(format!("{c}: s0.4={a:.3} s1.0={e:.3}{}", if drop { "" } else { " (no drop)" }));
    }
    let overhead = at_08["8x25G"] >= at_08["1x200G"];
    ok &= overhead;
    parts.push(format!(
        "s0.8: 8x25G={:.3} {} 1x200G={:.3}",
        at_08["8x25G"],
        if overhead { ">=" } else { "<" },
        at_08["1x200G"]
    ));
    if ok {
        Ok(parts.join(", "))
    } else {
        Err(parts.join(", "))
    }
}

fn schedule_digest(s: &Scenario, sla: f64) -> u64 {
    let mut sim = Simulation::new(s, sla, 0).unwrap();
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for _ in 0..s.frames {
        for x in sim.step().unwrap().merged.iter().flatten() {
            for v in [x.allocation.seq, x.channel as u64, x.sched_time.0] {
                h = (h ^ v).wrapping_mul(0x0100_0000_01b3);
            }
        }
    }
    h
}

fn c4_tuning() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for c in ["8x25G", "4x50G"] {
        let means: Vec<f64> = TUNINGS
            .iter()
            .map(|&t| {
                let all: Vec<f64> = LOADS
                    .iter()
                    .flat_map(|&l| run(&scenario(c, t, l, fractions(1..=10), 1000, 4)).points)
                    .map(|p| p.compliance_mean)
                    .collect();
                all.iter().sum::<f64>() / all.len() as f64
            })
            .collect();
        let mono = means.windows(2).all(|w| w[1] <= w[0]);
        ok &= mono;
        let shown: Vec<String> = means.iter().map(|m| format!("{m:.4}")).collect();
        parts.push(format!("{c} [{}]{}", shown.join(" "), if mono { "" } else { " not monotone" }));
    }
    let mut differing = 0;
    let mut runs = 0;
    for l in LOADS {
        for sla in fractions(1..=10) {
            let digests: Vec<u64> = TUNINGS
                .iter()
                .map(|&t| schedule_digest(&scenario("1x200G", t, l, vec![sla], 1000, 4), sla))
                .collect();
            runs += 1;
            if digests.iter().any(|d| *d != digests[0]) {
                differing += 1;
            }
        }
    }
    ok &= differing == 0;
    parts.push(format!("1x200G schedules identical across tunings in {}/{runs} cells", runs - differing));
    if ok {
        Ok(parts.join(", "))
    } else {
        Err(parts.join(", "))
    }
}

fn c5_swa_vs_dtwa() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for c in CONFIGS {
        let mut s = scenario(c, 15.0, 0.8, fractions(1..=10), 1000, 5);
        let dtwa = run(&s);
        s.algorithm = Algorithm::Swa;
        let swa = run(&s);
        let diff: f64 = dtwa
            .points
            .iter()
            .zip(&swa.points)
            .map(|(a, b)| (a.compliance_mean - b.compliance_mean).abs())
            .sum::<f64>()
            / dtwa.points.len() as f64;
        ok &= diff <= 0.05;
        parts.push(format!(
            "{c}: mean|diff|={diff:.4} (dtwa {:.3}, swa {:.3})",
            dtwa.mean_compliance(),
            swa.mean_compliance()
        ));
    }
    if ok {
        Ok(parts.join(", "))
    } else {
        Err(parts.join(", "))
    }
}

fn c6_distributions() -> Check {
    let mut means = HashMap::new();
    for d in Distribution::ALL {
        let mut all = Vec::new();
        for c in CONFIGS {
            for l in LOADS {
                for t in TUNINGS {
                    for seed in 1..=5 {
                        let mut s = scenario(c, t, l, fractions(1..=10), 500, 600 + seed);
                        s.distribution = d;
                        all.extend(run(&s).points.iter().map(|p| p.compliance_mean));
                    }
                }
            }
        }
        means.insert(d, all.iter().sum::<f64>() / all.len() as f64);
    }
    let (p, u, pa, z) = (
        means[&Distribution::Poisson],
        means[&Distribution::Uniform],
        means[&Distribution::Pareto],
        means[&Distribution::ZipfMandelbrot],
    );
    let tie = 0.01;
    let ok = p >= u - tie && u >= pa - tie && pa >= z - tie && u - z >= 0.05;
    let detail = format!("poisson {p:.4}, uniform {u:.4}, pareto {pa:.4}, zipf {z:.4}, uniform-zipf {:.4}", u - z);
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c7_oracle() -> Check {
    let base = RandomInstanceConfig::default();
    if base.max_allocations > 12 || base.max_channels > 3 || base.tuning_time != Nanos(250) {
        return Err(format!("instance generator out of bounds: {base:?}"));
    }
    let corpus = generate_instances(1000, 7, &base).map_err(|e| e.to_string())?;
    let rows = compare_corpus(&corpus).map_err(|e| e.to_string())?;
    // Instance names end in the generating SLA fraction, in tenths.
    let tenths = |name: &str| name.rsplit("_s").next().and_then(|t| t.parse::<u32>().ok()).unwrap();
    let low: Vec<_> = rows.iter().filter(|r| tenths(&r.name) <= 6).collect();
    let equal = low.iter().filter(|r| r.dtwa_optimal()).count();
    let dominated = rows.iter().filter(|r| r.dominance_holds()).count();
    let share = equal as f64 / low.len() as f64;
    let detail = format!(
        "DTWA optimal on {equal}/{} instances with sla_fraction <= 0.6 ({:.1}%), dominance on {dominated}/{}",
        low.len(),
        share * 100.0,
        rows.len()
    );
    if low.len() >= 500 && share >= 0.8 && dominated == rows.len() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c8_runtime() -> Check {
    let rows = profile_runtime(&ProfileConfig {
        frames: 2000,
        ..ProfileConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let med = |alg: Algorithm, cap: f64| {
        rows.iter()
            .find(|r| r.algorithm == alg && r.capacity_gbps == cap)
            .map(|r| r.median_us)
            .unwrap()
    };
    let caps = [50.0, 100.0, 200.0];
    let swa_faster = caps.iter().all(|&c| med(Algorithm::Swa, c) <= med(Algorithm::Dtwa, c));
    let increasing = [Algorithm::Dtwa, Algorithm::Swa]
        .iter()
        .all(|&a| med(a, 50.0) < med(a, 100.0) && med(a, 100.0) < med(a, 200.0));
    let slope_d = med(Algorithm::Dtwa, 200.0) - med(Algorithm::Dtwa, 50.0);
    let slope_s = med(Algorithm::Swa, 200.0) - med(Algorithm::Swa, 50.0);
    let shown: Vec<String> = caps
        .iter()
        .map(|&c| format!("{c}G dtwa {:.2}us swa {:.2}us", med(Algorithm::Dtwa, c), med(Algorithm::Swa, c)))
        .collect();
    let detail = format!(
        "{}; ratio at 200G {:.2}x",
        shown.join(", "),
        med(Algorithm::Dtwa, 200.0) / med(Algorithm::Swa, 200.0)
    );
    if swa_faster && increasing && slope_d > slope_s {
        Ok(detail)
    } else {
        Err(format!("{detail} (swa_faster={swa_faster}, increasing={increasing}, slopes {slope_d:.2}/{slope_s:.2})"))
    }
}

fn c9_single_channel() -> Check {
    let mut frames = 0;
    let mut mismatches = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC9);
    for seed in 0..40u64 {
        let load = LOADS[seed as usize % 3];
        let sla = rng.gen_range(0..=10) as f64 / 10.0;
        let mut s = scenario("1x200G", TUNINGS[seed as usize % 4], load, vec![sla], 0, seed);
        s.distribution = Distribution::ALL[seed as usize % 4];
        let mut d = Simulation::with_algorithm(&s, Algorithm::Dtwa, sla, 0).unwrap();
        let mut w = Simulation::with_algorithm(&s, Algorithm::Swa, sla, 0).unwrap();
        for _ in 0..150 {
            let a = d.step().unwrap();
            let b = w.step().unwrap();
            frames += 1;
            if a.merged != b.merged || a.report != b.report {
                mismatches += 1;
            }
        }
    }
    let detail = format!("{frames} frames over 40 seeds, {mismatches} differing");
    if mismatches == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Truncated probabilities computed from statrs, independent of the sampler.
fn reference_bins(d: Distribution, cfg: &TrafficConfig) -> Vec<(f64, f64, f64)> {
    let range = cfg.arrival_range_au;
    let normalize = |v: Vec<(f64, f64, f64)>| {
        let total: f64 = v.iter().map(|b| b.2).sum();
        v.into_iter().map(|(lo, hi, p)| (lo, hi, p / total)).collect()
    };
    match d {
        Distribution::Uniform => normalize((0..=range).map(|k| (k as f64, k as f64, 1.0)).collect()),
        Distribution::Poisson => {
            let p = Poisson::new(cfg.poisson_lambda).unwrap();
            normalize((0..=range).map(|k| (k as f64, k as f64, p.pmf(k as u64))).collect())
        }
        Distribution::ZipfMandelbrot => normalize(
            (1..=range)
                .map(|k| (k as f64, k as f64, (k as f64 + cfg.zipf_q).powf(-cfg.zipf_s)))
                .collect(),
        ),
        Distribution::Pareto => {
            let p = Pareto::new(1.0, cfg.pareto_alpha).unwrap();
            let width = 0.5;
            let n = (range as f64 / width) as usize;
            normalize(
                (0..n)
                    .map(|i| {
                        let (lo, hi) = (i as f64 * width, (i + 1) as f64 * width);
                        (lo, hi, p.cdf(hi + 1.0) - p.cdf(lo + 1.0))
                    })
                    .collect(),
            )
        }
    }
}

fn c10_samplers() -> Check {
    const DRAWS: usize = 1_000_000;
    let mut parts = Vec::new();
    let mut ok = true;
    for (i, d) in Distribution::ALL.into_iter().enumerate() {
        let cfg = TrafficConfig {
            distribution: d,
            ..TrafficConfig::default()
        };
        let sampler = ArrivalSampler::new(&cfg).unwrap();
        let bins = reference_bins(d, &cfg);
        let mut counts = vec![0u64; bins.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
        let mut sum = 0.0;
        for _ in 0..DRAWS {
            let x = sampler.sample_au(&mut rng);
            sum += x;
            let idx = bins
                .iter()
                .position(|(lo, hi, _)| if lo == hi { x == *lo } else { x >= *lo && (x < *hi || *hi == bins.last().unwrap().1) })
                .unwrap_or_else(|| panic!("{} sample {x} outside support", d.name()));
            counts[idx] += 1;
        }
        let stat: f64 = bins
            .iter()
            .zip(&counts)
            .map(|((_, _, p), c)| {
                let e = p * DRAWS as f64;
                (*c as f64 - e).powi(2) / e
            })
            .sum();
        let dof = (bins.len() - 1) as f64;
        let critical = ChiSquared::new(dof).unwrap().inverse_cdf(0.99);
        let mean = sum / DRAWS as f64;
        let mut pass = stat <= critical;
        let mean_note = if matches!(d, Distribution::Uniform | Distribution::Poisson) {
            pass &= (mean - 10.0).abs() <= 0.1;
            format!(" mean {mean:.3}")
        } else {
            String::new()
        };
        ok &= pass;
        parts.push(format!("{} chi2 {stat:.1}/{critical:.1}{mean_note}", d.name()));
    }
    if ok {
        Ok(parts.join(", "))
    } else {
        Err(parts.join(", "))
    }
}

fn main() -> ExitCode {
    let checks: [(u32, &str, fn() -> Check); 10] = [
        (1, "constraint suite", c1_constraints),
        (2, "low-load near-perfection", c2_low_load),
        (3, "high-load degradation shape", c3_high_load_shape),
        (4, "tuning-time sensitivity", c4_tuning),
        (5, "SWA close to DTWA at 15 us", c5_swa_vs_dtwa),
        (6, "distribution ordering", c6_distributions),
        (7, "exact solver gap and dominance", c7_oracle),
        (8, "runtime trends", c8_runtime),
        (9, "single-channel equivalence", c9_single_channel),
        (10, "sampler fidelity", c10_samplers),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, check) in checks {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                println!("criterion {id:>2} FAIL  {name}: {detail} [{secs:.1}s]");
                failed.push(id);
            }
        }
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
