use mec_core::comms::{comm_latency, Direction};
use mec_core::config::{BiasMatrix, NetworkConfig};
use mec_core::geometry::offload_probability;
use mec_core::queueing::QueueLoad;
use mec_core::MecError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::queue::{run_queue, QueueRun, QueueSimOptions, TraceRecord};
use super::{batch_estimate, stream, Family, SimEstimate};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecpSimOptions {
    /// Tasks observed per tier, summed over replications.
    pub tasks_per_tier: u64,
    /// Warmup of every replication, in slots.
    pub warmup_slots: f64,
    /// Independent replications per tier; their spread gives the confidence intervals.
    pub replications: usize,
}

impl Default for SecpSimOptions {
    fn default() -> Self {
        Self { tasks_per_tier: 1_000_000, warmup_slots: 1e5, replications: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub user_type: usize,
    pub tier: usize,
    pub offload_probability: f64,
    /// Computation budget after both transmissions, in slots.
    pub threshold_slots: f64,
    pub uplink_latency_s: f64,
    pub downlink_latency_s: f64,
    pub secp: SimEstimate,
    pub scp: SimEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierRun {
    pub tier: usize,
    pub utilization: f64,
    pub unstable: bool,
    pub tasks: u64,
    pub arrival_rate: f64,
    pub mean_wait: f64,
    pub mean_sojourn: f64,
    pub mean_in_system: f64,
    /// Per replication counters.
    pub runs: Vec<QueueRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSecpResult {
    pub pairs: Vec<PairEstimate>,
    pub tiers: Vec<TierRun>,
    pub overall: SimEstimate,
    pub overall_scp: SimEstimate,
    /// Zero-based indices of tiers whose utilization is at least one.
    pub unstable_tiers: Vec<usize>,
    pub seed: u64,
    pub options: SecpSimOptions,
}

impl SimSecpResult {
    pub fn pair(&self, i: usize, k: usize) -> Option<&PairEstimate> {
        self.pairs.iter().find(|p| p.user_type == i && p.tier == k)
    }
}

#[derive(Debug, Clone, Default)]
struct Counts {
    n: Vec<u64>,
    ec: Vec<u64>,
    cp: Vec<u64>,
    run: QueueRun,
}

/// End-to-end success probability by simulation.
///
/// Offloading probabilities and transmission times are the analytical ones;
/// queueing and service come from the discrete-event simulation of one
/// server per tier, fed by the (coverage-thinned) arrival rates.
pub fn simulate_secp(cfg: &NetworkConfig, bias: &BiasMatrix, opts: &SecpSimOptions, seed: u64) -> Result<SimSecpResult> {
    cfg.validate()?;
    bias.check_shape(cfg)?;
    if opts.replications == 0 || opts.tasks_per_tier == 0 {
        return Err(MecError::Precondition("simulation needs at least one replication and one task".into()).into());
    }
    let (types, tiers) = (cfg.num_types(), cfg.num_tiers());
    let loads: Vec<QueueLoad> = (0..tiers).map(|k| QueueLoad::from_config(cfg, bias, k)).collect::<mec_core::Result<_>>()?;

    let mut threshold = vec![vec![0.0; tiers]; types];
    let mut latencies = vec![vec![(0.0, 0.0); tiers]; types];
    for i in 0..types {
        for k in 0..tiers {
            let up = comm_latency(cfg, bias, i, k, Direction::Up)?.latency;
            let down = comm_latency(cfg, bias, i, k, Direction::Down)?.latency;
            latencies[i][k] = (up, down);
            threshold[i][k] = (cfg.user_types[i].target_latency_s - up - down) / cfg.slot_seconds;
        }
    }
    let budget: Vec<f64> = cfg.user_types.iter().map(|u| u.target_latency_s / cfg.slot_seconds).collect();

    let reps = opts.replications;
    let jobs: Vec<(usize, usize)> = (0..tiers).flat_map(|k| (0..reps).map(move |r| (k, r))).collect();
    let counts: Vec<Counts> = jobs
        .par_iter()
        .map(|&(k, r)| {
            let load = &loads[k];
            let mut c = Counts { n: vec![0; types], ec: vec![0; types], cp: vec![0; types], run: QueueRun::default() };
            if !(load.total_rate > 0.0) {
                return c;
            }
            let per_rep = opts.tasks_per_tier.div_ceil(reps as u64) as f64;
            let q = QueueSimOptions { warmup_slots: opts.warmup_slots, horizon_slots: opts.warmup_slots + per_rep / load.total_rate };
            let mut rng = stream(seed, Family::Queue, ((k as u64) << 32) | r as u64);
            c.run = run_queue(load, &q, r as u64, &mut rng, |rec| {
                let i = rec.user_type;
                let s = rec.sojourn();
                c.n[i] += 1;
                c.ec[i] += (s <= threshold[i][k]) as u64;
                c.cp[i] += (s <= budget[i]) as u64;
            });
            c
        })
        .collect();
    let at = |k: usize, r: usize| &counts[k * reps + r];

    let frac = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let mut pairs = Vec::with_capacity(types * tiers);
    let mut overall_reps = vec![0.0; reps];
    let mut overall_scp_reps = vec![0.0; reps];
    let (mut overall, mut overall_scp) = (0.0, 0.0);
    for i in 0..types {
        for k in 0..tiers {
            let po = offload_probability(cfg, bias, i, k);
            let w = cfg.user_types[i].portion * po;
            let (mut n, mut ec, mut cp) = (0, 0, 0);
            let (mut ec_b, mut cp_b) = (Vec::with_capacity(reps), Vec::with_capacity(reps));
            for r in 0..reps {
                let c = at(k, r);
                n += c.n[i];
                ec += c.ec[i];
                cp += c.cp[i];
                ec_b.push(frac(c.ec[i], c.n[i]));
                cp_b.push(frac(c.cp[i], c.n[i]));
                overall_reps[r] += w * frac(c.ec[i], c.n[i]);
                overall_scp_reps[r] += w * frac(c.cp[i], c.n[i]);
            }
            let (pec, pcp) = (frac(ec, n), frac(cp, n));
            overall += w * pec;
            overall_scp += w * pcp;
            pairs.push(PairEstimate {
                user_type: i,
                tier: k,
                offload_probability: po,
                threshold_slots: threshold[i][k],
                uplink_latency_s: latencies[i][k].0,
                downlink_latency_s: latencies[i][k].1,
                secp: batch_estimate(&ec_b, pec, n, seed),
                scp: batch_estimate(&cp_b, pcp, n, seed),
            });
        }
    }
    let tiers_out: Vec<TierRun> = (0..tiers)
        .map(|k| {
            let runs: Vec<QueueRun> = (0..reps).map(|r| at(k, r).run).collect();
            let tasks: u64 = runs.iter().map(|r| r.tasks).sum();
            let window: f64 = runs.iter().map(|r| r.window).sum();
            let sum = |f: fn(&QueueRun) -> f64| runs.iter().map(f).sum::<f64>();
            TierRun {
                tier: k,
                utilization: loads[k].utilization,
                unstable: !loads[k].is_stable(),
                tasks,
                arrival_rate: if window > 0.0 { tasks as f64 / window } else { 0.0 },
                mean_wait: frac_f(sum(|r| r.sum_wait), tasks),
                mean_sojourn: frac_f(sum(|r| r.sum_sojourn), tasks),
                mean_in_system: if window > 0.0 { sum(|r| r.area_in_system) / window } else { 0.0 },
                runs,
            }
        })
        .collect();
    let total_tasks = tiers_out.iter().map(|t| t.tasks).sum();
    let overall_est = batch_estimate(&overall_reps, overall, total_tasks, seed);
    let overall_scp_est = batch_estimate(&overall_scp_reps, overall_scp, total_tasks, seed);
    Ok(SimSecpResult {
        pairs,
        unstable_tiers: tiers_out.iter().filter(|t| t.unstable).map(|t| t.tier).collect(),
        tiers: tiers_out,
        overall: overall_est,
        overall_scp: overall_scp_est,
        seed,
        options: *opts,
    })
}

fn frac_f(x: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        x / n as f64
    }
}

/// Departure log of the first replication of tier k, exactly as simulated
/// inside [`simulate_secp`], truncated to `limit` rows.
pub fn trace_replication(cfg: &NetworkConfig, bias: &BiasMatrix, opts: &SecpSimOptions, seed: u64, k: usize, limit: usize) -> Result<Vec<TraceRecord>> {
    let load = QueueLoad::from_config(cfg, bias, k)?;
    let mut out = Vec::new();
    if !(load.total_rate > 0.0) {
        return Ok(out);
    }
    let per_rep = opts.tasks_per_tier.div_ceil(opts.replications.max(1) as u64) as f64;
    let q = QueueSimOptions { warmup_slots: opts.warmup_slots, horizon_slots: opts.warmup_slots + per_rep / load.total_rate };
    let mut rng = stream(seed, Family::Queue, (k as u64) << 32);
    run_queue(&load, &q, 0, &mut rng, |rec| {
        if out.len() < limit {
            out.push(*rec);
        }
    });
    Ok(out)
}
