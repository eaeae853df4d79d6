//! Parameter sweeps, bias optimization and the density/speed trade at fixed
//! network computation capability.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::config::{db_to_linear, BiasMatrix, NetworkConfig};
use crate::error::{MecError, Result};
use crate::queueing::{overall_secp, SecpMethod};

/// A scalar knob of the model. Indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamPath {
    Bias { user_type: usize, tier: usize },
    /// Density/speed ratio factor of one tier: λ_{m,k}/θ and θ μ_k.
    Theta { tier: usize },
    UserDensity,
    ServiceRate { tier: usize },
    TaskPackets { user_type: usize },
    TargetLatency { user_type: usize },
}

fn parse_indices(s: &str) -> Option<Vec<usize>> {
    let mut out = Vec::new();
    let mut rest = s;
    while let Some(open) = rest.find('[') {
        let close = rest[open..].find(']')? + open;
        let n: usize = rest[open + 1..close].trim().parse().ok()?;
        if n == 0 {
            return None;
        }
        out.push(n - 1);
        rest = &rest[close + 1..];
    }
    if !rest.trim().is_empty() {
        return None;
    }
    Some(out)
}

impl ParamPath {
    /// Parses `bias[i][k]`, `theta[k]`, `lambda_u`, `mu[k]`, `d[i]`, `t_tg[i]` (one-based).
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let name_end = s.find('[').unwrap_or(s.len());
        let name = &s[..name_end];
        let bad = || MecError::Config(format!("cannot parse parameter path '{s}'"));
        let idx = parse_indices(&s[name_end..]).ok_or_else(bad)?;
        let p = match (name, idx.as_slice()) {
            ("bias", [i, k]) => ParamPath::Bias { user_type: *i, tier: *k },
            ("theta", [k]) => ParamPath::Theta { tier: *k },
            ("lambda_u", []) => ParamPath::UserDensity,
            ("mu", [k]) => ParamPath::ServiceRate { tier: *k },
            ("d", [i]) => ParamPath::TaskPackets { user_type: *i },
            ("t_tg", [i]) => ParamPath::TargetLatency { user_type: *i },
            _ => return Err(bad()),
        };
        Ok(p)
    }

    pub fn label(&self) -> String {
        match self {
            ParamPath::Bias { user_type, tier } => format!("bias[{}][{}]", user_type + 1, tier + 1),
            ParamPath::Theta { tier } => format!("theta[{}]", tier + 1),
            ParamPath::UserDensity => "lambda_u".into(),
            ParamPath::ServiceRate { tier } => format!("mu[{}]", tier + 1),
            ParamPath::TaskPackets { user_type } => format!("d[{}]", user_type + 1),
            ParamPath::TargetLatency { user_type } => format!("t_tg[{}]", user_type + 1),
        }
    }

    fn check(&self, cfg: &NetworkConfig) -> Result<()> {
        let (i, k) = match *self {
            ParamPath::Bias { user_type, tier } => (Some(user_type), Some(tier)),
            ParamPath::Theta { tier } | ParamPath::ServiceRate { tier } => (None, Some(tier)),
            ParamPath::TaskPackets { user_type } | ParamPath::TargetLatency { user_type } => (Some(user_type), None),
            ParamPath::UserDensity => (None, None),
        };
        if i.is_some_and(|i| i >= cfg.num_types()) || k.is_some_and(|k| k >= cfg.num_tiers()) {
            return Err(MecError::Config(format!("parameter {} is out of range for this configuration", self.label())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridScale {
    Linear,
    #[serde(rename = "dB")]
    Db,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    pub scale: GridScale,
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(MecError::Config(format!("grid needs at least 2 steps, got {}", self.steps)));
        }
        if !(self.start < self.stop) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(MecError::Config(format!("grid start {} must be below stop {}", self.start, self.stop)));
        }
        Ok(())
    }

    /// Grid values in the stated scale.
    pub fn values(&self) -> Vec<f64> {
        let n = self.steps;
        (0..n)
            .map(|j| {
                if j + 1 == n {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * j as f64 / (n - 1) as f64
                }
            })
            .collect()
    }

    pub fn to_linear(&self, v: f64) -> f64 {
        match self.scale {
            GridScale::Linear => v,
            GridScale::Db => db_to_linear(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Secp,
    Scp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMethod {
    Analytical,
    Simulation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: ParamPath,
    pub grid: Grid,
    pub objective: Objective,
    pub method: EvalMethod,
    pub secp_method: SecpMethod,
}

impl SweepSpec {
    pub fn validate(&self, cfg: &NetworkConfig) -> Result<()> {
        self.grid.validate()?;
        self.param.check(cfg)
    }
}

/// Returns copies of `cfg` and `bias` with the parameter set to `linear`.
pub fn apply_param(cfg: &NetworkConfig, bias: &BiasMatrix, param: ParamPath, linear: f64) -> Result<(NetworkConfig, BiasMatrix)> {
    param.check(cfg)?;
    let mut c = cfg.clone();
    let mut b = bias.clone();
    match param {
        ParamPath::Bias { user_type, tier } => b.set(user_type, tier, linear),
        ParamPath::Theta { tier } => c = apply_theta(cfg, tier, linear)?,
        ParamPath::UserDensity => c.user_density = linear,
        ParamPath::ServiceRate { tier } => c.tiers[tier].service_rate = linear,
        ParamPath::TaskPackets { user_type } => {
            let r = linear.round();
            if !(r >= 1.0) || (r - linear).abs() > 1e-9 {
                return Err(MecError::Config(format!("task size must be a positive integer, got {linear}")));
            }
            c.user_types[user_type].task_packets = r as u32;
        }
        ParamPath::TargetLatency { user_type } => c.user_types[user_type].target_latency_s = linear,
    }
    c.validate()?;
    b.validate()?;
    Ok((c, b))
}

/// Both success metrics at one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub secp: f64,
    pub scp: f64,
}

impl PointMetrics {
    pub fn get(&self, o: Objective) -> f64 {
        match o {
            Objective::Secp => self.secp,
            Objective::Scp => self.scp,
        }
    }
}

/// Analytical evaluation of both metrics.
pub fn analytical_metrics(cfg: &NetworkConfig, bias: &BiasMatrix, method: SecpMethod) -> Result<PointMetrics> {
    let r = overall_secp(cfg, bias, method)?;
    Ok(PointMetrics { secp: r.overall, scp: r.overall_scp })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub param: String,
    pub objective: Objective,
    /// Grid values in the stated scale.
    pub values: Vec<f64>,
    /// Metrics per grid point, `None` where some tier is unstable.
    pub metrics: Vec<Option<PointMetrics>>,
    pub argmax_index: usize,
    pub argmax_value: f64,
    pub best: f64,
}

impl SweepResult {
    pub fn objective_values(&self) -> Vec<f64> {
        self.metrics.iter().map(|m| m.map_or(f64::NEG_INFINITY, |m| m.get(self.objective))).collect()
    }

    pub fn stable(&self, j: usize) -> bool {
        self.metrics[j].is_some()
    }

    /// Index of the first maximum of the other metric.
    pub fn argmax_of(&self, o: Objective) -> Option<usize> {
        first_argmax(self.metrics.iter().map(|m| m.map_or(f64::NEG_INFINITY, |m| m.get(o))))
    }

    /// Maximal runs of grid points where the objective exceeds `level`, as (first, last) values.
    pub fn intervals_above(&self, level: f64) -> Vec<(f64, f64)> {
        let obj = self.objective_values();
        let mut out = Vec::new();
        let mut start: Option<usize> = None;
        for j in 0..=obj.len() {
            let above = j < obj.len() && obj[j] > level;
            match (above, start) {
                (true, None) => start = Some(j),
                (false, Some(s)) => {
                    out.push((self.values[s], self.values[j - 1]));
                    start = None;
                }
                _ => {}
            }
        }
        out
    }
}

fn first_argmax<I: Iterator<Item = f64>>(it: I) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, v) in it.enumerate() {
        if v.is_finite() && best.is_none_or(|(_, b)| v > b) {
            best = Some((j, v));
        }
    }
    best.map(|(j, _)| j)
}

/// Folds per-point evaluations into a sweep result. Unstable points are
/// masked out, any other error aborts.
pub fn reduce_sweep(spec: &SweepSpec, values: Vec<f64>, evals: Vec<Result<PointMetrics>>) -> Result<SweepResult> {
    let mut metrics = Vec::with_capacity(evals.len());
    for e in evals {
        match e {
            Ok(m) => metrics.push(Some(m)),
            Err(e) if e.is_instability() => metrics.push(None),
            Err(e) => return Err(e),
        }
    }
    let obj = metrics.iter().map(|m| m.map_or(f64::NEG_INFINITY, |m| m.get(spec.objective)));
    let j = first_argmax(obj).ok_or(MecError::NoStablePoint)?;
    let best = metrics[j].expect("argmax is stable").get(spec.objective);
    Ok(SweepResult {
        param: spec.param.label(),
        objective: spec.objective,
        argmax_value: values[j],
        values,
        metrics,
        argmax_index: j,
        best,
    })
}

/// Serial sweep with a caller-supplied evaluator.
pub fn sweep_with<F>(cfg: &NetworkConfig, bias: &BiasMatrix, spec: &SweepSpec, mut eval: F) -> Result<SweepResult>
where
    F: FnMut(&NetworkConfig, &BiasMatrix) -> Result<PointMetrics>,
{
    spec.validate(cfg)?;
    let values = spec.grid.values();
    let evals = values
        .iter()
        .map(|&v| {
            let (c, b) = apply_param(cfg, bias, spec.param, spec.grid.to_linear(v))?;
            eval(&c, &b)
        })
        .collect();
    reduce_sweep(spec, values, evals)
}

/// Serial analytical sweep.
pub fn sweep(cfg: &NetworkConfig, bias: &BiasMatrix, spec: &SweepSpec) -> Result<SweepResult> {
    let m = spec.secp_method;
    sweep_with(cfg, bias, spec, |c, b| analytical_metrics(c, b, m))
}

/// Coordinate-descent search box for bias entries.
///
/// Offsets are in dB relative to each user type's reference entry, the
/// lowest tier whose bias is not free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSearch {
    pub free: Vec<(usize, usize)>,
    pub lo_db: f64,
    pub hi_db: f64,
    pub step_db: f64,
    pub refine_passes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasOptimum {
    pub bias: BiasMatrix,
    pub value: f64,
    pub offsets_db: Vec<f64>,
    pub evaluations: usize,
}

fn grid_between(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut v: Vec<f64> = (0..=n).map(|j| lo + j as f64 * step).collect();
    if v.last().is_some_and(|&x| hi - x > 1e-9 * step.max(1.0)) {
        v.push(hi);
    }
    v
}

/// Coordinate descent over the free bias entries, then `refine_passes`
/// rounds at half the previous step around the incumbent.
///
/// `eval` returns `Ok(None)` for unstable configurations.
pub fn optimize_bias<F>(bias0: &BiasMatrix, search: &BiasSearch, mut eval: F) -> Result<BiasOptimum>
where
    F: FnMut(&BiasMatrix) -> Result<Option<f64>>,
{
    if search.free.is_empty() {
        return Err(MecError::Config("bias search needs at least one free entry".into()));
    }
    if !(search.lo_db < search.hi_db) || !(search.step_db > 0.0) {
        return Err(MecError::Config("bias search box must have lo < hi and a positive step".into()));
    }
    let mut free: Vec<(usize, usize)> = Vec::new();
    for &(i, k) in &search.free {
        if i >= bias0.types() || k >= bias0.tiers() {
            return Err(MecError::Config(format!("free bias entry ({}, {}) is out of range", i + 1, k + 1)));
        }
        if !free.contains(&(i, k)) {
            free.push((i, k));
        }
    }
    // Each type keeps one fixed reference entry; if every tier is free the lowest one is pinned.
    let mut refs = vec![usize::MAX; bias0.types()];
    for (i, r) in refs.iter_mut().enumerate() {
        if let Some(k) = (0..bias0.tiers()).find(|&k| !free.contains(&(i, k))) {
            *r = k;
        } else {
            *r = 0;
            free.retain(|&e| e != (i, 0));
        }
    }
    if free.is_empty() {
        return Err(MecError::Config("no free bias entry left after pinning reference entries".into()));
    }
    let build = |x: &[f64]| {
        let mut b = bias0.clone();
        for (&(i, k), &off) in free.iter().zip(x) {
            b.set(i, k, bias0.get(i, refs[i]) * db_to_linear(off));
        }
        b
    };
    let mut evaluations = 0usize;
    let mut score = |x: &[f64]| -> Result<f64> {
        evaluations += 1;
        Ok(eval(&build(x))?.unwrap_or(f64::NEG_INFINITY))
    };

    let full = grid_between(search.lo_db, search.hi_db, search.step_db);
    let mut x: Vec<f64> = free
        .iter()
        .map(|&(i, k)| {
            let off = 10.0 * (bias0.get(i, k) / bias0.get(i, refs[i])).log10();
            off.clamp(search.lo_db, search.hi_db)
        })
        .collect();

    // first sweep moves every coordinate to its grid argmax
    let mut best = f64::NEG_INFINITY;
    for e in 0..free.len() {
        let mut arg = None;
        let mut top = f64::NEG_INFINITY;
        for &g in &full {
            let mut y = x.clone();
            y[e] = g;
            let v = score(&y)?;
            if v > top {
                top = v;
                arg = Some(g);
            }
        }
        if let Some(g) = arg {
            x[e] = g;
            best = top;
        }
    }
    if !best.is_finite() {
        return Err(MecError::NoStablePoint);
    }

    let mut improve = |x: &mut Vec<f64>, best: &mut f64, grids: &dyn Fn(f64) -> Vec<f64>| -> Result<()> {
        for _ in 0..50 {
            let mut moved = false;
            for e in 0..x.len() {
                for g in grids(x[e]) {
                    let mut y = x.clone();
                    y[e] = g;
                    let v = score(&y)?;
                    if v > *best {
                        *best = v;
                        x[e] = g;
                        moved = true;
                    }
                }
            }
            if !moved {
                break;
            }
        }
        Ok(())
    };

    let (lo, hi) = (search.lo_db, search.hi_db);
    improve(&mut x, &mut best, &|_| full.clone())?;
    let mut step = search.step_db;
    for _ in 0..search.refine_passes {
        step *= 0.5;
        let s = step;
        improve(&mut x, &mut best, &|c| {
            [-2.0, -1.0, 1.0, 2.0].iter().map(|m| c + m * s).filter(|v| *v >= lo && *v <= hi).collect()
        })?;
    }
    Ok(BiasOptimum { bias: build(&x), value: best, offsets_db: x, evaluations })
}

/// Moves tier j to density λ_{m,j}/θ and service rate θ μ_j.
pub fn apply_theta(cfg: &NetworkConfig, tier: usize, theta: f64) -> Result<NetworkConfig> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(MecError::Domain { what: "theta", value: theta });
    }
    if tier >= cfg.num_tiers() {
        return Err(MecError::Config(format!("tier {} out of range", tier + 1)));
    }
    let mut c = cfg.clone();
    let mut dens: Vec<f64> = (0..cfg.num_tiers()).map(|k| cfg.tier_density(k)).collect();
    dens[tier] /= theta;
    c.set_tier_densities(&dens)?;
    c.tiers[tier].service_rate *= theta;
    Ok(c)
}

/// Scales every service rate so that Σ_k λ_{m,k} μ_k equals `target`.
pub fn scale_to_capability(cfg: &NetworkConfig, target: f64) -> Result<NetworkConfig> {
    if !(target > 0.0) {
        return Err(MecError::Domain { what: "computation capability", value: target });
    }
    let f = target / cfg.computation_capability();
    let mut c = cfg.clone();
    for t in &mut c.tiers {
        t.service_rate *= f;
    }
    Ok(c)
}

/// One-tier network with the same server density and computation capability,
/// using the first tier's radio parameters.
pub fn single_tier_equivalent(cfg: &NetworkConfig) -> NetworkConfig {
    let mut c = cfg.clone();
    let mut t = cfg.tiers[0].clone();
    t.density_fraction = 1.0;
    t.service_rate = cfg.computation_capability() / cfg.server_density;
    c.tiers = vec![t];
    for u in &mut c.user_types {
        u.coverage_up.truncate(1);
        u.coverage_down.truncate(1);
    }
    c
}

/// Result of a θ sweep with its capability audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NccSweep {
    pub sweep: SweepResult,
    pub capability: f64,
    pub max_capability_deviation: f64,
}

/// θ sweep of one tier; fails if the computation capability drifts.
pub fn ncc_sweep_with<F>(cfg: &NetworkConfig, bias: &BiasMatrix, tier: usize, grid: Grid, objective: Objective, secp_method: SecpMethod, mut eval: F) -> Result<NccSweep>
where
    F: FnMut(&NetworkConfig, &BiasMatrix) -> Result<PointMetrics>,
{
    let spec = SweepSpec { param: ParamPath::Theta { tier }, grid, objective, method: EvalMethod::Analytical, secp_method };
    let base = cfg.computation_capability();
    let mut dev: f64 = 0.0;
    let sweep = sweep_with(cfg, bias, &spec, |c, b| {
        dev = dev.max((c.computation_capability() / base - 1.0).abs());
        eval(c, b)
    })?;
    if dev > 1e-12 {
        return Err(MecError::Numerical(format!("computation capability drifted by {dev:e} across the sweep")));
    }
    Ok(NccSweep { sweep, capability: base, max_capability_deviation: dev })
}
