//! Per-frame virtual bandwidth map generation.
//!
//! Burst sizes are uniform between the minimum and maximum burst lengths.
//! Inter-arrival offsets between consecutive grants of a tenant come from one
//! of four distributions truncated to `[0, arrival_range_au]` allocation
//! units by renormalising the CDF on that range.
//!
//! Each tenant lays its grants out on a virtual timeline that runs at its
//! fair share (`1 / n_vnos`) of the aggregate capacity: a burst that lasts
//! `d` on a physical channel advances the tenant's timeline by
//! `d * n_vnos / n_channels`, followed by the sampled offset. The timelines
//! of all tenants start at the frame boundary and overlap, which is where
//! merging conflicts come from.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Allocation, Nanos, SlaTable, VirtualBMap, ALLOCATION_UNIT_BYTES, FRAME};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Uniform,
    Poisson,
    ZipfMandelbrot,
    Pareto,
}

impl Distribution {
    pub const ALL: [Distribution; 4] = [
        Distribution::Uniform,
        Distribution::Poisson,
        Distribution::ZipfMandelbrot,
        Distribution::Pareto,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Distribution::Uniform => "uniform",
            Distribution::Poisson => "poisson",
            Distribution::ZipfMandelbrot => "zipf_mandelbrot",
            Distribution::Pareto => "pareto",
        }
    }
}

impl std::str::FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "uniform" => Ok(Distribution::Uniform),
            "poisson" => Ok(Distribution::Poisson),
            "zipf" | "zipf_mandelbrot" => Ok(Distribution::ZipfMandelbrot),
            "pareto" | "self_similar" => Ok(Distribution::Pareto),
            other => Err(Error::config("distribution", format!("unknown distribution `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficConfig {
    pub distribution: Distribution,
    pub arrival_range_au: u32,
    pub poisson_lambda: f64,
    pub zipf_s: f64,
    /// Mandelbrot offset `q` in `p(k) ~ (k + q)^-s`.
    pub zipf_q: f64,
    pub pareto_alpha: f64,
    pub min_burst: Nanos,
    pub max_burst: Nanos,
    pub guard_time: Nanos,
    pub load_fraction: f64,
    pub sla_fraction: f64,
    pub seed: u64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        // Guard time is 25 % of the shortest and 3 % of the longest burst.
        TrafficConfig {
            distribution: Distribution::Uniform,
            arrival_range_au: 20,
            poisson_lambda: 10.0,
            zipf_s: 2.0,
            zipf_q: 0.0,
            pareto_alpha: 1.0,
            min_burst: Nanos(840),
            max_burst: Nanos(7_000),
            guard_time: Nanos(210),
            load_fraction: 0.5,
            sla_fraction: 0.5,
            seed: 0,
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<()> {
        if self.arrival_range_au == 0 {
            return Err(Error::config("arrival_range_au", "must be at least 1"));
        }
        match self.distribution {
            Distribution::Poisson if !(self.poisson_lambda > 0.0) => {
                return Err(Error::config("poisson_lambda", format!("must be > 0, got {}", self.poisson_lambda)))
            }
            Distribution::ZipfMandelbrot if !(self.zipf_s > 1.0) || !(self.zipf_q >= 0.0) => {
                return Err(Error::config(
                    "zipf_s",
                    format!("need s > 1 and q >= 0, got s={} q={}", self.zipf_s, self.zipf_q),
                ))
            }
            Distribution::Pareto if !(self.pareto_alpha > 0.0) => {
                return Err(Error::config("pareto_alpha", format!("must be > 0, got {}", self.pareto_alpha)))
            }
            _ => {}
        }
        if self.min_burst == Nanos::ZERO || self.min_burst > self.max_burst {
            return Err(Error::config(
                "min_burst",
                format!("need 0 < min_burst <= max_burst, got {} / {}", self.min_burst, self.max_burst),
            ));
        }
        if !(self.load_fraction > 0.0 && self.load_fraction <= 1.0) {
            return Err(Error::config("load_fraction", format!("must be in (0, 1], got {}", self.load_fraction)));
        }
        if !(0.0..=1.0).contains(&self.sla_fraction) {
            return Err(Error::config("sla_fraction", format!("must be in [0, 1], got {}", self.sla_fraction)));
        }
        Ok(())
    }
}

/// Inverse-CDF sampler for the truncated arrival distribution, in allocation units.
#[derive(Clone, Debug, PartialEq)]
pub enum ArrivalSampler {
    Discrete { values: Vec<f64>, cdf: Vec<f64> },
    Pareto { alpha: f64, range: f64, tail_mass: f64 },
}

impl ArrivalSampler {
    pub fn new(cfg: &TrafficConfig) -> Result<Self> {
        cfg.validate()?;
        let range = cfg.arrival_range_au;
        let discrete = |values: Vec<f64>, weights: Vec<f64>| {
            let total: f64 = weights.iter().sum();
            let mut acc = 0.0;
            let mut cdf: Vec<f64> = weights
                .iter()
                .map(|w| {
                    acc += w / total;
                    acc
                })
                .collect();
            *cdf.last_mut().unwrap() = 1.0;
            ArrivalSampler::Discrete { values, cdf }
        };
        Ok(match cfg.distribution {
            Distribution::Uniform => {
                let values: Vec<f64> = (0..=range).map(f64::from).collect();
                let weights = vec![1.0; values.len()];
                discrete(values, weights)
            }
            Distribution::Poisson => {
                let lambda = cfg.poisson_lambda;
                let mut weights = Vec::with_capacity(range as usize + 1);
                // Recurrence in log space keeps large lambdas finite.
                let mut log_p = -lambda;
                for k in 0..=range {
                    if k > 0 {
                        log_p += lambda.ln() - (k as f64).ln();
                    }
                    weights.push(log_p.exp());
                }
                discrete((0..=range).map(f64::from).collect(), weights)
            }
            Distribution::ZipfMandelbrot => {
                let values: Vec<f64> = (1..=range).map(f64::from).collect();
                let weights = values.iter().map(|k| (k + cfg.zipf_q).powf(-cfg.zipf_s)).collect();
                discrete(values, weights)
            }
            Distribution::Pareto => {
                // Pareto with unit scale shifted to start at zero (Lomax), cut at `range`.
                let range = range as f64;
                ArrivalSampler::Pareto {
                    alpha: cfg.pareto_alpha,
                    range,
                    tail_mass: 1.0 - (1.0 + range).powf(-cfg.pareto_alpha),
                }
            }
        })
    }

    pub fn sample_au<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        match self {
            ArrivalSampler::Discrete { values, cdf } => {
                let idx = cdf.partition_point(|c| *c <= u).min(values.len() - 1);
                values[idx]
            }
            ArrivalSampler::Pareto { alpha, range, tail_mass } => {
                let x = (1.0 - u * tail_mass).powf(-1.0 / alpha) - 1.0;
                x.clamp(0.0, *range)
            }
        }
    }

    /// Truncated CDF at `x` allocation units.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            ArrivalSampler::Discrete { values, cdf } => {
                let idx = values.partition_point(|v| *v <= x);
                if idx == 0 {
                    0.0
                } else {
                    cdf[idx - 1]
                }
            }
            ArrivalSampler::Pareto { alpha, range, tail_mass } => {
                if x <= 0.0 {
                    0.0
                } else if x >= *range {
                    1.0
                } else {
                    (1.0 - (1.0 + x).powf(-alpha)) / tail_mass
                }
            }
        }
    }

    /// Support points and probabilities of a discrete sampler.
    pub fn pmf(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            ArrivalSampler::Discrete { values, cdf } => {
                let mut prev = 0.0;
                Some(
                    values
                        .iter()
                        .zip(cdf)
                        .map(|(v, c)| {
                            let p = c - prev;
                            prev = *c;
                            (*v, p)
                        })
                        .collect(),
                )
            }
            ArrivalSampler::Pareto { .. } => None,
        }
    }
}

/// Duration of `au` allocation units at `rate_gbps`.
pub fn au_to_nanos(au: f64, rate_gbps: f64) -> Nanos {
    Nanos((au * ALLOCATION_UNIT_BYTES as f64 * 8.0 / rate_gbps).round() as u64)
}

/// One inter-arrival offset on a channel running at `rate_gbps`.
pub fn sample_arrival<R: Rng + ?Sized>(cfg: &TrafficConfig, rate_gbps: f64, rng: &mut R) -> Result<Nanos> {
    let sampler = ArrivalSampler::new(cfg)?;
    Ok(au_to_nanos(sampler.sample_au(rng), rate_gbps))
}

fn free_at(onu_free: &[Nanos], onu: u16) -> Nanos {
    onu_free.get(onu as usize).copied().unwrap_or_default()
}

/// Largest timeline stretch that still lets a tenant's chain start its last
/// grant inside the frame, keeping a small margin for ONU collisions.
fn fitting_stretch(grants: &[(Nanos, u16, u64)], gaps: &[Nanos]) -> f64 {
    let Some(((last, _, _), body)) = grants.split_last() else {
        return f64::INFINITY;
    };
    let body: u64 = body.iter().map(|g| g.0 .0).sum();
    let gaps: u64 = gaps.iter().map(|g| g.0).sum();
    let room = FRAME.0 as f64 * 0.97 - gaps as f64 - last.0 as f64;
    if body == 0 {
        f64::INFINITY
    } else {
        room.max(0.0) / body as f64
    }
}

pub fn sample_burst<R: Rng + ?Sized>(cfg: &TrafficConfig, rng: &mut R) -> Nanos {
    Nanos(rng.gen_range(cfg.min_burst.0..=cfg.max_burst.0))
}

/// Assignment of ONUs to tenants.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub onus_of_vno: Vec<Vec<u16>>,
}

impl Topology {
    /// Spreads `n_onus` over `n_vnos` as evenly as possible (the first
    /// `n_onus % n_vnos` tenants get one extra), after a seeded shuffle.
    pub fn randomized<R: Rng + ?Sized>(n_onus: usize, n_vnos: usize, rng: &mut R) -> Result<Self> {
        if n_vnos == 0 || n_onus < n_vnos {
            return Err(Error::config(
                "topology",
                format!("need at least one ONU per VNO, got {n_onus} ONUs / {n_vnos} VNOs"),
            ));
        }
        let mut ids: Vec<u16> = (0..n_onus as u16).collect();
        ids.shuffle(rng);
        let base = n_onus / n_vnos;
        let extra = n_onus % n_vnos;
        let mut onus_of_vno = Vec::with_capacity(n_vnos);
        let mut it = ids.into_iter();
        for v in 0..n_vnos {
            let n = base + usize::from(v < extra);
            let mut group: Vec<u16> = it.by_ref().take(n).collect();
            group.sort_unstable();
            onus_of_vno.push(group);
        }
        Ok(Topology { onus_of_vno })
    }

    pub fn n_vnos(&self) -> usize {
        self.onus_of_vno.len()
    }

    pub fn n_onus(&self) -> usize {
        self.onus_of_vno.iter().map(Vec::len).sum()
    }
}

/// Physical channel plan the traffic is sized for.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelPlan {
    pub n_channels: usize,
    pub rate_gbps: f64,
}

/// Stateless per-frame generator; all randomness comes from the caller's RNG.
#[derive(Clone, Debug)]
pub struct FrameGenerator {
    cfg: TrafficConfig,
    sampler: ArrivalSampler,
    plan: ChannelPlan,
    sla_ids: Vec<u16>,
    best_effort_id: u16,
}

impl FrameGenerator {
    pub fn new(cfg: TrafficConfig, plan: ChannelPlan, slas: &SlaTable) -> Result<Self> {
        let sampler = ArrivalSampler::new(&cfg)?;
        if plan.n_channels == 0 {
            return Err(Error::config("n_channels", "at least one channel is required"));
        }
        let sla_ids: Vec<u16> = slas.guaranteed().map(|c| c.id).collect();
        let best_effort_id = slas.best_effort_id();
        if cfg.sla_fraction > 0.0 && sla_ids.is_empty() {
            return Err(Error::config("sla_fraction", "no guaranteed SLA class configured"));
        }
        let best_effort_id = match best_effort_id {
            Some(id) => id,
            None if cfg.sla_fraction >= 1.0 => u16::MAX,
            None => return Err(Error::config("sla_table", "no best-effort class configured")),
        };
        Ok(FrameGenerator {
            cfg,
            sampler,
            plan,
            sla_ids,
            best_effort_id,
        })
    }

    pub fn config(&self) -> &TrafficConfig {
        &self.cfg
    }

    /// Transmission time the generator aims for in every frame.
    pub fn load_target(&self) -> Nanos {
        Nanos((self.cfg.load_fraction * self.plan.n_channels as f64 * FRAME.0 as f64).round() as u64)
    }

    /// Generates one virtual map per tenant for `frame_index`. Start times are
    /// absolute (`frame_index * FRAME + offset`). Each burst goes to a random
    /// ONU of its tenant that is idle at the burst's start, or to the one that
    /// frees up first.
    pub fn generate_frame<R: Rng + ?Sized>(
        &self,
        topology: &Topology,
        frame_index: u64,
        rng: &mut R,
    ) -> Result<Vec<VirtualBMap>> {
        let n_vnos = topology.n_vnos();
        let target = self.load_target();

        // Sizes and classes first, dealt to tenants round-robin.
        let mut per_vno: Vec<Vec<(Nanos, u16, u64)>> = vec![Vec::new(); n_vnos];
        let mut total = Nanos::ZERO;
        let mut sla_work = Nanos::ZERO;
        let mut sla_count = 0usize;
        let mut seq = 0u64;
        loop {
            let size = sample_burst(&self.cfg, rng);
            if total + size > target {
                break;
            }
            let wanted = self.cfg.sla_fraction * (total + size).0 as f64;
            let is_sla = (sla_work.0 as f64 + size.0 as f64 / 2.0) <= wanted && !self.sla_ids.is_empty();
            let sla_id = if is_sla {
                let id = self.sla_ids[sla_count % self.sla_ids.len()];
                sla_count += 1;
                sla_work = sla_work + size;
                id
            } else {
                self.best_effort_id
            };
            total = total + size;
            per_vno[seq as usize % n_vnos].push((size, sla_id, seq));
            seq += 1;
        }

        let frame_start = Nanos(frame_index * FRAME.0);
        let mut onu_free: Vec<Nanos> = vec![Nanos::ZERO; topology.n_onus().max(1) + 1];
        let mut maps = Vec::with_capacity(n_vnos);
        let fair_share = n_vnos as f64 / self.plan.n_channels as f64;
        for (v, grants) in per_vno.into_iter().enumerate() {
            let gaps: Vec<Nanos> = grants
                .iter()
                .map(|_| au_to_nanos(self.sampler.sample_au(rng), self.plan.rate_gbps))
                .collect();
            let stretch = fair_share.min(fitting_stretch(&grants, &gaps));
            let onus = &topology.onus_of_vno[v];
            let mut map = VirtualBMap::new(v as u16, frame_index);
            let mut cursor = Nanos::ZERO;
            for (idx, ((size, sla_id, seq), gap)) in grants.into_iter().zip(gaps).enumerate() {
                let ready = cursor + gap;
                let idle: Vec<u16> = onus.iter().copied().filter(|o| free_at(&onu_free, *o) <= ready).collect();
                let onu_id = match idle.choose(rng) {
                    Some(o) => *o,
                    None => *onus
                        .iter()
                        .min_by_key(|o| free_at(&onu_free, **o))
                        .expect("tenant without ONUs"),
                };
                let slot = onu_id as usize;
                if slot >= onu_free.len() {
                    onu_free.resize(slot + 1, Nanos::ZERO);
                }
                let start = ready.max(onu_free[slot]);
                if start >= FRAME {
                    return Err(Error::LoadInfeasible {
                        index: idx,
                        vno_id: v as u16,
                        start_ns: start.0,
                        frame_ns: FRAME.0,
                    });
                }
                onu_free[slot] = start + size;
                cursor = start + Nanos((size.0 as f64 * stretch).round() as u64);
                map.allocations
                    .push(Allocation::new(v as u16, onu_id, sla_id, frame_start + start, size, seq));
            }
            maps.push(map);
        }
        Ok(maps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn generator(load: f64, sla: f64, w: usize) -> FrameGenerator {
        let cfg = TrafficConfig {
            load_fraction: load,
            sla_fraction: sla,
            ..TrafficConfig::default()
        };
        FrameGenerator::new(cfg, ChannelPlan { n_channels: w, rate_gbps: 200.0 / w as f64 }, &SlaTable::standard()).unwrap()
    }

    #[test]
    fn invalid_parameters_rejected() {
        let bad = [
            TrafficConfig { distribution: Distribution::Poisson, poisson_lambda: 0.0, ..Default::default() },
            TrafficConfig { distribution: Distribution::ZipfMandelbrot, zipf_s: 1.0, ..Default::default() },
            TrafficConfig { distribution: Distribution::Pareto, pareto_alpha: -1.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(ArrivalSampler::new(&cfg), Err(Error::Config { .. })));
        }
    }

    #[test]
    fn bursts_stay_within_bounds() {
        let cfg = TrafficConfig::default();
        let mut r = rng(1);
        for _ in 0..100_000 {
            let b = sample_burst(&cfg, &mut r);
            assert!(b >= Nanos(840) && b <= Nanos(7_000));
        }
        let fixed = TrafficConfig { min_burst: Nanos(3_000), max_burst: Nanos(3_000), ..cfg };
        assert_eq!(sample_burst(&fixed, &mut r), Nanos(3_000));
    }

    #[test]
    fn default_bursts_follow_guard_ratios() {
        let cfg = TrafficConfig::default();
        assert_eq!(cfg.guard_time.0 * 4, cfg.min_burst.0);
        assert_eq!((cfg.guard_time.0 as f64 / 0.03).round() as u64, cfg.max_burst.0);
    }

    #[test]
    fn samples_stay_in_range() {
        for d in Distribution::ALL {
            let s = ArrivalSampler::new(&TrafficConfig { distribution: d, ..Default::default() }).unwrap();
            let mut r = rng(7);
            for _ in 0..20_000 {
                let x = s.sample_au(&mut r);
                assert!((0.0..=20.0).contains(&x), "{d:?} produced {x}");
            }
        }
    }

    #[test]
    fn topology_split_is_13_13_13_13_12() {
        let t = Topology::randomized(64, 5, &mut rng(3)).unwrap();
        let sizes: Vec<_> = t.onus_of_vno.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![13, 13, 13, 13, 12]);
        let mut all: Vec<u16> = t.onus_of_vno.concat();
        all.sort_unstable();
        assert_eq!(all, (0..64).collect::<Vec<u16>>());
        assert_ne!(t, Topology::randomized(64, 5, &mut rng(4)).unwrap());
    }

    #[test]
    fn frame_load_within_one_burst() {
        let g = generator(0.2, 0.5, 8);
        let topo = Topology::randomized(64, 5, &mut rng(0)).unwrap();
        let maps = g.generate_frame(&topo, 0, &mut rng(11)).unwrap();
        let total: u64 = maps.iter().map(|m| m.total_size().0).sum();
        let target = 200_000u64;
        assert!(total <= target && total >= target - 7_000, "total {total}");
    }

    #[test]
    fn no_sla_fraction_means_best_effort_only() {
        let g = generator(0.5, 0.0, 4);
        let topo = Topology::randomized(64, 5, &mut rng(0)).unwrap();
        let maps = g.generate_frame(&topo, 0, &mut rng(5)).unwrap();
        assert!(maps.iter().flat_map(|m| &m.allocations).all(|a| a.sla_id == 2));
    }

    #[test]
    fn full_sla_fraction_splits_classes_evenly() {
        let g = generator(0.8, 1.0, 8);
        let topo = Topology::randomized(64, 5, &mut rng(0)).unwrap();
        let maps = g.generate_frame(&topo, 0, &mut rng(5)).unwrap();
        let all: Vec<_> = maps.iter().flat_map(|m| &m.allocations).collect();
        let c0 = all.iter().filter(|a| a.sla_id == 0).count() as i64;
        let c1 = all.iter().filter(|a| a.sla_id == 1).count() as i64;
        assert_eq!(c0 + c1, all.len() as i64);
        assert!((c0 - c1).abs() <= 1);
    }

    #[test]
    fn same_seed_same_frame() {
        let g = generator(0.5, 0.5, 4);
        let topo = Topology::randomized(64, 5, &mut rng(0)).unwrap();
        let a = g.generate_frame(&topo, 3, &mut rng(99)).unwrap();
        let b = g.generate_frame(&topo, 3, &mut rng(99)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().flat_map(|m| &m.allocations).all(|x| x.start_time >= Nanos(3 * FRAME.0)));
    }

    #[test]
    fn overload_reports_unplaceable_allocation() {
        // One ONU per tenant cannot carry a fifth of eight full channels.
        let g = generator(1.0, 0.5, 8);
        let topo = Topology::randomized(5, 5, &mut rng(0)).unwrap();
        let err = g.generate_frame(&topo, 0, &mut rng(1)).unwrap_err();
        assert!(matches!(err, Error::LoadInfeasible { .. }), "{err:?}");
    }
}
