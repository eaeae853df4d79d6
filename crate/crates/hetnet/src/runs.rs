//! Parallel sweeps, θ sweeps at fixed capability, and bias grid searches.
//!
//! Grid points are evaluated with rayon and reduced in grid order, so the
//! result does not depend on the number of worker threads.

use mec_core::config::{db_to_linear, BiasMatrix, NetworkConfig};
use mec_core::optimizer::{
    analytical_metrics, apply_param, apply_theta, optimize_bias, reduce_sweep, scale_to_capability, single_tier_equivalent, BiasOptimum,
    BiasSearch, EvalMethod, Grid, NccSweep, Objective, ParamPath, PointMetrics, SweepResult, SweepSpec,
};
use mec_core::queueing::SecpMethod;
use mec_core::MecError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HetnetError, Result};
use crate::sim::{simulate_secp, SecpSimOptions};

/// How a single grid point is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluator {
    pub method: EvalMethod,
    pub secp_method: SecpMethod,
    pub sim: SecpSimOptions,
    pub seed: u64,
}

impl Evaluator {
    pub fn analytical(secp_method: SecpMethod) -> Self {
        Self { method: EvalMethod::Analytical, secp_method, sim: SecpSimOptions::default(), seed: 0 }
    }

    /// Both metrics; an unstable tier comes back as `MecError::Unstable`.
    pub fn metrics(&self, cfg: &NetworkConfig, bias: &BiasMatrix) -> mec_core::Result<PointMetrics> {
        match self.method {
            EvalMethod::Analytical => analytical_metrics(cfg, bias, self.secp_method),
            EvalMethod::Simulation => {
                let r = simulate_secp(cfg, bias, &self.sim, self.seed).map_err(|e| match e {
                    HetnetError::Model(m) => m,
                    other => MecError::Numerical(other.to_string()),
                })?;
                if let Some(&k) = r.unstable_tiers.first() {
                    return Err(MecError::Unstable { tier: k, rho: r.tiers[k].utilization });
                }
                Ok(PointMetrics { secp: r.overall.estimate, scp: r.overall_scp.estimate })
            }
        }
    }
}

pub fn par_sweep(cfg: &NetworkConfig, bias: &BiasMatrix, spec: &SweepSpec, eval: &Evaluator) -> Result<SweepResult> {
    spec.validate(cfg)?;
    let values = spec.grid.values();
    let evals: Vec<mec_core::Result<PointMetrics>> = values
        .par_iter()
        .map(|&v| {
            let (c, b) = apply_param(cfg, bias, spec.param, spec.grid.to_linear(v))?;
            eval.metrics(&c, &b)
        })
        .collect();
    Ok(reduce_sweep(spec, values, evals)?)
}

/// θ sweep of one tier with the computation capability audited at every point.
pub fn par_ncc(cfg: &NetworkConfig, bias: &BiasMatrix, tier: usize, grid: Grid, objective: Objective, eval: &Evaluator) -> Result<NccSweep> {
    let spec = SweepSpec { param: ParamPath::Theta { tier }, grid, objective, method: eval.method, secp_method: eval.secp_method };
    spec.validate(cfg)?;
    let base = cfg.computation_capability();
    let values = grid.values();
    let evals: Vec<(f64, mec_core::Result<PointMetrics>)> = values
        .par_iter()
        .map(|&v| match apply_theta(cfg, tier, grid.to_linear(v)) {
            Ok(c) => ((c.computation_capability() / base - 1.0).abs(), eval.metrics(&c, bias)),
            Err(e) => (0.0, Err(e)),
        })
        .collect();
    let dev = evals.iter().map(|e| e.0).fold(0.0, f64::max);
    if dev > 1e-12 {
        return Err(MecError::Numerical(format!("computation capability drifted by {dev:e} across the sweep")).into());
    }
    let sweep = reduce_sweep(&spec, values, evals.into_iter().map(|e| e.1).collect())?;
    Ok(NccSweep { sweep, capability: base, max_capability_deviation: dev })
}

/// θ sweeps at several capabilities, obtained by scaling every service rate.
pub fn par_ncc_family(
    cfg: &NetworkConfig,
    bias: &BiasMatrix,
    tier: usize,
    grid: Grid,
    objective: Objective,
    capabilities: &[f64],
    eval: &Evaluator,
) -> Result<Vec<NccSweep>> {
    capabilities
        .iter()
        .map(|&nk| {
            let c = scale_to_capability(cfg, nk)?;
            par_ncc(&c, bias, tier, grid, objective, eval)
        })
        .collect()
}

/// Objective of the one-tier network with the same density and capability.
pub fn single_tier_baseline(cfg: &NetworkConfig, objective: Objective, eval: &Evaluator) -> Result<f64> {
    let one = single_tier_equivalent(cfg);
    let bias = BiasMatrix::unit(one.num_types(), 1);
    Ok(eval.metrics(&one, &bias)?.get(objective))
}

/// Exhaustive search over a rectangular dB grid of bias entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasGrid {
    /// (user type, tier), zero-based.
    pub entries: Vec<(usize, usize)>,
    pub grids: Vec<Grid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub values_db: Vec<f64>,
    pub best: f64,
    pub bias: BiasMatrix,
    pub evaluated: usize,
    pub unstable: usize,
}

pub fn grid_search_bias(cfg: &NetworkConfig, bias: &BiasMatrix, g: &BiasGrid, objective: Objective, eval: &Evaluator) -> Result<GridSearchResult> {
    if g.entries.is_empty() || g.entries.len() != g.grids.len() {
        return Err(HetnetError::Usage("bias grid needs one grid per entry".into()));
    }
    for (&(i, k), grid) in g.entries.iter().zip(&g.grids) {
        grid.validate()?;
        if i >= bias.types() || k >= bias.tiers() {
            return Err(HetnetError::Usage(format!("bias entry ({}, {}) out of range", i + 1, k + 1)));
        }
    }
    let axes: Vec<Vec<f64>> = g.grids.iter().map(|gr| gr.values()).collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let results: Vec<(Vec<f64>, mec_core::Result<PointMetrics>)> = (0..total)
        .into_par_iter()
        .map(|mut flat| {
            let mut b = bias.clone();
            let mut point = vec![0.0; axes.len()];
            for (a, axis) in axes.iter().enumerate().rev() {
                point[a] = axis[flat % axis.len()];
                flat /= axis.len();
            }
            for (&(i, k), &v) in g.entries.iter().zip(&point) {
                b.set(i, k, db_to_linear(v));
            }
            let m = eval.metrics(cfg, &b);
            (point, m)
        })
        .collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut unstable = 0;
    for (p, m) in results {
        match m {
            Ok(m) => {
                let v = m.get(objective);
                if best.as_ref().is_none_or(|(_, b)| v > *b) {
                    best = Some((p, v));
                }
            }
            Err(e) if e.is_instability() => unstable += 1,
            Err(e) => return Err(e.into()),
        }
    }
    let (values_db, best) = best.ok_or(MecError::NoStablePoint)?;
    let mut b = bias.clone();
    for (&(i, k), &v) in g.entries.iter().zip(&values_db) {
        b.set(i, k, db_to_linear(v));
    }
    Ok(GridSearchResult { values_db, best, bias: b, evaluated: total, unstable })
}

/// Coordinate-descent bias optimization with the objective of `eval`.
pub fn optimize(cfg: &NetworkConfig, bias: &BiasMatrix, search: &BiasSearch, objective: Objective, eval: &Evaluator) -> Result<BiasOptimum> {
    Ok(optimize_bias(bias, search, |b| match eval.metrics(cfg, b) {
        Ok(m) => Ok(Some(m.get(objective))),
        Err(e) if e.is_instability() => Ok(None),
        Err(e) => Err(e),
    })?)
}

/// Nondecreasing then nonincreasing, up to `1e-12` wiggles.
pub fn is_unimodal(values: &[f64]) -> bool {
    let tol = 1e-12;
    let mut falling = false;
    for w in values.windows(2) {
        if w[1] > w[0] + tol {
            if falling {
                return false;
            }
        } else if w[1] < w[0] - tol {
            falling = true;
        }
    }
    true
}
