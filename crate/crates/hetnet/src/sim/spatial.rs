use std::f64::consts::PI;

use mec_core::comms::{downlink_rate_coverage, downlink_rate_lb_at_distance, uplink_rate_at_distance, Direction};
use mec_core::config::{BiasMatrix, NetworkConfig};
use mec_core::geometry::{associate, mean_serving_distance, sample_ppp, Association, AssociationWeights, Point, DEFAULT_POINT_CAP};
use mec_core::MecError;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{stream, Family, SimEstimate};
use crate::error::Result;

const BLOCK: u64 = 1024;
/// Give up when fewer than one snapshot in this many lands on the wanted tier.
const MAX_REJECTIONS_PER_TRIAL: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageEstimate {
    pub direction: Direction,
    pub user_type: usize,
    pub tier: usize,
    pub sim: SimEstimate,
    /// Analytical coverage at the operating rate, averaged over the same sampled distances.
    pub analytical: f64,
    pub snapshots: u64,
}

/// Radius of the simulated disc for user type i: ten mean serving
/// distances, and at least 25 expected points in the sparsest tier.
pub fn region_radius(cfg: &NetworkConfig, bias: &BiasMatrix, i: usize) -> f64 {
    let mut r: f64 = 0.0;
    let mut min_density = f64::INFINITY;
    for k in 0..cfg.num_tiers() {
        r = r.max(10.0 * mean_serving_distance(cfg, bias, i, k));
        min_density = min_density.min(cfg.tier_density(k));
    }
    r.max((25.0 / (PI * min_density)).sqrt())
}

fn snapshot<R: Rng>(cfg: &NetworkConfig, radius: f64, rng: &mut R) -> Result<Vec<Vec<Point>>> {
    (0..cfg.num_tiers())
        .map(|k| Ok(sample_ppp(cfg.tier_density(k), radius, rng, DEFAULT_POINT_CAP)?.points))
        .collect()
}

fn associate_snapshot(sets: &[Vec<Point>], w: &AssociationWeights, alpha: f64) -> Result<Option<Association>> {
    if sets.iter().any(|s| s.is_empty()) {
        // an empty tier in the disc is an unusable snapshot, not an error
        return Ok(None);
    }
    let refs: Vec<&[Point]> = sets.iter().map(|s| s.as_slice()).collect();
    Ok(Some(associate(&Point::ORIGIN, &refs, w, alpha)?))
}

fn sir_threshold(rate: f64, bandwidth: f64) -> f64 {
    (rate / bandwidth * std::f64::consts::LN_2).exp_m1()
}

struct BlockOut {
    successes: u64,
    trials: u64,
    snapshots: u64,
    analytical_sum: f64,
}

/// Empirical P{rate ≥ operating rate at the sampled distance} for type-i
/// users served by tier k.
///
/// Users sit at the origin of a fresh snapshot; snapshots associating with
/// another tier are rejected. Uplink interferers are an independent PPP of
/// density κ λ_{m,k} around the server; downlink interferers are the other
/// sampled servers of every tier. Fading is Rayleigh.
pub fn simulate_coverage(
    cfg: &NetworkConfig,
    bias: &BiasMatrix,
    i: usize,
    k: usize,
    direction: Direction,
    trials: u64,
    seed: u64,
) -> Result<CoverageEstimate> {
    cfg.validate()?;
    bias.check_shape(cfg)?;
    if i >= cfg.num_types() || k >= cfg.num_tiers() {
        return Err(MecError::Config(format!("pair ({}, {}) is out of range", i + 1, k + 1)).into());
    }
    if trials < 1000 {
        return Err(MecError::Precondition(format!("coverage simulation needs at least 1000 trials, got {trials}")).into());
    }
    let radius = region_radius(cfg, bias, i);
    let w = AssociationWeights::new(cfg, bias, i);
    let alpha = cfg.pathloss_exponent;
    let blocks = trials.div_ceil(BLOCK);
    let outs: Vec<Result<BlockOut>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let n = BLOCK.min(trials - b * BLOCK);
            let mut rng = stream(seed, Family::Coverage, b);
            let mut out = BlockOut { successes: 0, trials: 0, snapshots: 0, analytical_sum: 0.0 };
            while out.trials < n {
                out.snapshots += 1;
                if out.snapshots > n * MAX_REJECTIONS_PER_TRIAL {
                    return Err(MecError::Resource(format!("tier {} is almost never selected by type {}", k + 1, i + 1)).into());
                }
                let sets = snapshot(cfg, radius, &mut rng)?;
                let Some(a) = associate_snapshot(&sets, &w, alpha)? else { continue };
                if a.tier != k {
                    continue;
                }
                let y = a.distance;
                let (covered, analytical) = match direction {
                    Direction::Up => {
                        let rate = uplink_rate_at_distance(cfg, i, k, y)?;
                        let theta = sir_threshold(rate, cfg.bandwidth_up_hz);
                        let server = sets[k][a.server];
                        let density = cfg.reuse_factor * cfg.tier_density(k);
                        let users = sample_ppp(density, radius, &mut rng, DEFAULT_POINT_CAP)?;
                        let mut interference = 0.0;
                        for p in &users.points {
                            let q = Point { x: p.x + server.x, y: p.y + server.y };
                            let g: f64 = Exp1.sample(&mut rng);
                            interference += g * q.dist(&server).powf(-alpha);
                        }
                        let h: f64 = Exp1.sample(&mut rng);
                        (h * y.powf(-alpha) >= theta * interference, cfg.user_types[i].coverage_up[k])
                    }
                    Direction::Down => {
                        let rate = downlink_rate_lb_at_distance(cfg, i, k, y)?;
                        let theta = sir_threshold(rate, cfg.bandwidth_down_hz);
                        let mut interference = 0.0;
                        for (j, set) in sets.iter().enumerate() {
                            let pj = cfg.tiers[j].tx_power_mw;
                            for (n, p) in set.iter().enumerate() {
                                if j == k && n == a.server {
                                    continue;
                                }
                                let g: f64 = Exp1.sample(&mut rng);
                                interference += pj * g * p.dist(&Point::ORIGIN).powf(-alpha);
                            }
                        }
                        let h: f64 = Exp1.sample(&mut rng);
                        let signal = cfg.tiers[k].tx_power_mw * h * y.powf(-alpha);
                        (signal >= theta * interference, downlink_rate_coverage(cfg, bias, i, k, y, rate)?)
                    }
                };
                out.trials += 1;
                out.successes += covered as u64;
                out.analytical_sum += analytical;
            }
            Ok(out)
        })
        .collect();
    let (mut succ, mut n, mut snaps, mut an) = (0u64, 0u64, 0u64, 0.0);
    for o in outs {
        let o = o?;
        succ += o.successes;
        n += o.trials;
        snaps += o.snapshots;
        an += o.analytical_sum;
    }
    Ok(CoverageEstimate {
        direction,
        user_type: i,
        tier: k,
        sim: SimEstimate::binomial(succ, n, seed),
        analytical: an / n as f64,
        snapshots: snaps,
    })
}

/// Fraction of type-i snapshots associating with each tier.
pub fn simulate_association(cfg: &NetworkConfig, bias: &BiasMatrix, i: usize, trials: u64, seed: u64) -> Result<Vec<SimEstimate>> {
    cfg.validate()?;
    bias.check_shape(cfg)?;
    let radius = region_radius(cfg, bias, i);
    let w = AssociationWeights::new(cfg, bias, i);
    let blocks = trials.div_ceil(BLOCK);
    let counts: Vec<Result<Vec<u64>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let n = BLOCK.min(trials - b * BLOCK);
            let mut rng = stream(seed, Family::Association, b);
            let mut c = vec![0u64; cfg.num_tiers()];
            let mut done = 0;
            while done < n {
                let sets = snapshot(cfg, radius, &mut rng)?;
                if let Some(a) = associate_snapshot(&sets, &w, cfg.pathloss_exponent)? {
                    c[a.tier] += 1;
                    done += 1;
                }
            }
            Ok(c)
        })
        .collect();
    let mut total = vec![0u64; cfg.num_tiers()];
    for c in counts {
        for (t, v) in total.iter_mut().zip(c?) {
            *t += v;
        }
    }
    Ok(total.iter().map(|&c| SimEstimate::binomial(c, trials, seed)).collect())
}
