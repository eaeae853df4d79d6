//! Monte Carlo counterpart of the analytical engine: spatial snapshots for
//! association and rate coverage, a discrete-event FIFO queue, and the
//! end-to-end success probability built from both.

mod queue;
mod secp;
mod spatial;

pub use queue::{run_queue, simulate_queue, QueueRun, QueueSimOptions, QueueTrace, TraceRecord};
pub use secp::{simulate_secp, trace_replication, PairEstimate, SecpSimOptions, SimSecpResult, TierRun};
pub use spatial::{region_radius, simulate_association, simulate_coverage, CoverageEstimate};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// A Monte Carlo proportion with its 95 % half width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub estimate: f64,
    pub half_width_95: f64,
    pub trials: u64,
    /// Sample size behind the half width; below `trials` when samples are correlated.
    pub effective_trials: f64,
    pub seed: u64,
}

impl SimEstimate {
    /// Independent Bernoulli trials: half width 1.96 √(p̂(1−p̂)/n).
    pub fn binomial(successes: u64, trials: u64, seed: u64) -> Self {
        let p = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
        Self::with_effective(p, trials, trials as f64, seed)
    }

    pub fn with_effective(p: f64, trials: u64, effective: f64, seed: u64) -> Self {
        let hw = if effective > 0.0 { 1.96 * (p * (1.0 - p) / effective).sqrt() } else { f64::INFINITY };
        Self { estimate: p, half_width_95: hw, trials, effective_trials: effective, seed }
    }

    pub fn covers(&self, x: f64) -> bool {
        (self.estimate - x).abs() <= self.half_width_95
    }

    /// Standard error implied by the half width.
    pub fn std_error(&self) -> f64 {
        self.half_width_95 / 1.96
    }
}

/// Stream families, so unrelated draws never share a ChaCha stream.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Family {
    Coverage = 1,
    Association = 2,
    Queue = 3,
}

/// Independent generator for (seed, family, index).
pub(crate) fn stream(seed: u64, family: Family, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((family as u64) << 56) | index);
    rng
}

/// Batch-means estimate from per-batch proportions of roughly equal size.
///
/// The half width is t_{0.975, r−1} times the batch standard error, expressed
/// through the effective sample size so that 1.96 √(p̂(1−p̂)/n_eff) equals it.
pub(crate) fn batch_estimate(batches: &[f64], pooled: f64, trials: u64, seed: u64) -> SimEstimate {
    let r = batches.len();
    if r < 2 {
        return SimEstimate::with_effective(pooled, trials, trials as f64, seed);
    }
    let mean = batches.iter().sum::<f64>() / r as f64;
    let var = batches.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (r - 1) as f64).map_or(1.96, |d| d.inverse_cdf(0.975));
    let se2 = var / r as f64 * (t / 1.96).powi(2);
    let pq = pooled * (1.0 - pooled);
    let eff = if se2 > 0.0 && pq > 0.0 { (pq / se2).min(trials as f64) } else { trials as f64 };
    SimEstimate::with_effective(pooled, trials, eff, seed)
}
