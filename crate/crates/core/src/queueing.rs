//! M/G/1 computation latency at the edge servers and the success
//! probabilities built on it.
//!
//! Time inside this module is measured in slots. Tasks of a user type carry
//! `d` packets, each served in an exponential time of rate μ, so a task's
//! service time is Erlang(d, μ).

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::comms::{comm_latency, CommLatencyResult, Direction};
use crate::config::{BiasMatrix, NetworkConfig};
use crate::error::{MecError, Result};
use crate::geometry::offload_probability;
use crate::laplace;
use crate::specfun::{beta_function, erlang_cdf, ln_gamma, ln_hyp1f1_positive, regularized_lower_gamma};

/// Values this far outside [0, 1] are treated as round-off and clamped.
pub const CLAMP_TOL: f64 = 1e-9;

/// Offered load at one tier's servers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueLoad {
    pub tier: usize,
    /// λ_{i,k} in tasks per slot, one entry per user type.
    pub rates: Vec<f64>,
    /// Task size d_i in packets, one entry per user type.
    pub sizes: Vec<u32>,
    /// μ_k in packets per slot.
    pub service_rate: f64,
    pub total_rate: f64,
    pub utilization: f64,
}

impl QueueLoad {
    pub fn new(tier: usize, rates: Vec<f64>, sizes: Vec<u32>, service_rate: f64) -> Result<Self> {
        if rates.len() != sizes.len() {
            return Err(MecError::Precondition(format!("{} rates but {} task sizes", rates.len(), sizes.len())));
        }
        if let Some(r) = rates.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(MecError::Domain { what: "arrival rate", value: *r });
        }
        if !(service_rate > 0.0) {
            return Err(MecError::Domain { what: "service rate", value: service_rate });
        }
        let total_rate = rates.iter().sum();
        let utilization = rates.iter().zip(&sizes).map(|(l, &d)| l * d as f64).sum::<f64>() / service_rate;
        Ok(Self { tier, rates, sizes, service_rate, total_rate, utilization })
    }

    /// Load induced at tier k by the configuration and bias matrix.
    pub fn from_config(cfg: &NetworkConfig, bias: &BiasMatrix, k: usize) -> Result<Self> {
        let rates = (0..cfg.num_types()).map(|i| arrival_rate(cfg, bias, i, k)).collect();
        let sizes = cfg.user_types.iter().map(|u| u.task_packets).collect();
        Self::new(k, rates, sizes, cfg.tiers[k].service_rate)
    }

    pub fn is_stable(&self) -> bool {
        self.utilization < 1.0
    }

    pub fn require_stable(&self) -> Result<()> {
        if self.is_stable() {
            Ok(())
        } else {
            Err(MecError::Unstable { tier: self.tier, rho: self.utilization })
        }
    }

    fn loaded(&self) -> impl Iterator<Item = (f64, u32)> + '_ {
        self.rates.iter().copied().zip(self.sizes.iter().copied()).filter(|(l, _)| *l > 0.0)
    }
}

/// λ_{i,k} = [β^(u)_{i,k}] λ_u p_{u,i} p_{o,i,k} / (λ_m p_{m,k}), tasks per slot.
pub fn arrival_rate(cfg: &NetworkConfig, bias: &BiasMatrix, i: usize, k: usize) -> f64 {
    let thin = if cfg.thin_arrivals_by_coverage { cfg.user_types[i].coverage_up[k] } else { 1.0 };
    thin * cfg.user_density * cfg.user_types[i].portion * offload_probability(cfg, bias, i, k) / cfg.tier_density(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Utilization {
    pub rho: f64,
    pub unstable: bool,
}

pub fn utilization(load: &QueueLoad) -> Utilization {
    Utilization { rho: load.utilization, unstable: !load.is_stable() }
}

/// Laplace transform of the service time of an arbitrary arriving task.
pub fn service_laplace(load: &QueueLoad, s: Complex64) -> Result<Complex64> {
    let mu = load.service_rate;
    if load.total_rate <= 0.0 {
        return Err(MecError::Precondition("service mixture needs a positive arrival rate".into()));
    }
    if (s + mu).norm() == 0.0 {
        return Err(MecError::Domain { what: "service_laplace pole", value: s.re });
    }
    let base = Complex64::new(mu, 0.0) / (s + mu);
    Ok(load.loaded().map(|(l, d)| base.powu(d) * (l / load.total_rate)).sum())
}

/// Pollaczek–Khinchine transform of the waiting time.
pub fn waiting_laplace(load: &QueueLoad, s: Complex64) -> Result<Complex64> {
    load.require_stable()?;
    if load.total_rate <= 0.0 || s.norm() == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let lam = load.total_rate;
    let ls = service_laplace(load, s)?;
    Ok(s * (1.0 - load.utilization) / (s - lam + ls * lam))
}

fn sojourn_cdf_transform(load: &QueueLoad, d: u32, s: Complex64) -> Complex64 {
    let mu = load.service_rate;
    let w = waiting_laplace(load, s).unwrap_or(Complex64::new(f64::NAN, 0.0));
    w * (Complex64::new(mu, 0.0) / (s + mu)).powu(d) / s
}

/// P{W + Erlang(d, μ) ≤ t} by numerical inversion of the transform.
pub fn secp_laplace_inversion(load: &QueueLoad, d: u32, t: f64) -> Result<f64> {
    load.require_stable()?;
    if t <= 0.0 {
        return Ok(0.0);
    }
    if load.total_rate <= 0.0 {
        return erlang_cdf(d, load.service_rate, t);
    }
    let inv = laplace::invert(|s| sojourn_cdf_transform(load, d, s), t)?;
    Ok(inv.value.clamp(0.0, 1.0))
}

fn single_loaded_type(load: &QueueLoad) -> Result<Option<(f64, u32)>> {
    let mut it = load.loaded();
    let first = it.next();
    if it.next().is_some() {
        return Err(MecError::Precondition("single-type form needs exactly one loaded user type".into()));
    }
    Ok(first)
}

/// Closed form for a queue fed by one user type.
///
/// Exact for one-packet tasks. For larger tasks it evaluates the single-type
/// expression with ρ = λd/μ, which is an approximation.
pub fn secp_single_type(load: &QueueLoad, d: u32, t: f64) -> Result<f64> {
    load.require_stable()?;
    if t <= 0.0 {
        return Ok(0.0);
    }
    let mu = load.service_rate;
    let Some((lam, dq)) = single_loaded_type(load)? else {
        return erlang_cdf(d, mu, t);
    };
    if dq != d {
        return Err(MecError::Precondition(format!("tagged task size {d} differs from the queue's task size {dq}")));
    }
    if d == 1 {
        return Ok(-(-(mu - lam) * t).exp_m1());
    }
    let rho = load.utilization;
    let v = regularized_lower_gamma(d as f64, mu * t)?
        - rho.powi(1 - d as i32) * (-(mu - lam) * t).exp() * regularized_lower_gamma(d as f64, lam * t)?;
    Ok(v.clamp(0.0, 1.0))
}

// ∫₀ᵗ r^{d−1}/(d−1)! · μ^d e^{ζ(t−r) − μr} dr
fn erlang_kernel(d: u32, mu: f64, zeta: f64, t: f64) -> Result<f64> {
    let a = mu + zeta;
    let df = d as f64;
    if a > 0.0 {
        let p = regularized_lower_gamma(df, a * t)?;
        return Ok((zeta * t + df * (mu / a).ln()).exp() * p);
    }
    // a ≤ 0: substitute u = t − r, giving e^{−μt} ∫₀ᵗ (t−u)^{d−1}/(d−1)! e^{−b u} du, b = −a.
    // Expanding e^{b r} instead keeps every term positive.
    let b = -a;
    let mut term = t.powi(d as i32) / (ln_gamma(df).exp() * df);
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= b * t / k * (df + k - 1.0) / (df + k);
        sum += term;
        if term <= 1e-17 * sum || k > 10_000.0 {
            break;
        }
    }
    Ok(mu.powi(d as i32) * (-(b + mu) * t).exp() * sum)
}

/// Exact P{W + Erlang(d, μ) ≤ t} for a queue whose tasks all have one or two packets.
///
/// The waiting-time CDF is 1 + Σ_j c_j e^{ζ_j t}; integrating it against the
/// tagged task's Erlang density over [0, t] gives the result.
pub fn secp_two_type(load: &QueueLoad, d: u32, t: f64) -> Result<f64> {
    load.require_stable()?;
    if load.loaded().any(|(_, dq)| dq > 2) {
        return Err(MecError::Precondition("two-type form needs task sizes of 1 or 2 packets".into()));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    let mu = load.service_rate;
    let base = erlang_cdf(d, mu, t)?;
    if load.total_rate <= 0.0 {
        return Ok(base);
    }
    let lam1: f64 = load.loaded().filter(|(_, dq)| *dq == 1).map(|(l, _)| l).sum();
    let lam = load.total_rate;
    let rho = load.utilization;
    let root = (0.25 * lam * lam + mu * (lam - lam1)).sqrt();
    let z1 = -mu + 0.5 * lam + root;
    let z2 = -mu + 0.5 * lam - root;
    let gap = z1 - z2;
    let c1 = (1.0 - rho) * (z1 + mu).powi(2) / (z1 * gap);
    let c2 = -(1.0 - rho) * (z2 + mu).powi(2) / (z2 * gap);
    let mut v = base + c1 * erlang_kernel(d, mu, z1, t)?;
    if c2 != 0.0 {
        v += c2 * erlang_kernel(d, mu, z2, t)?;
    }
    Ok(clamp_probability(v, "secp_two_type")?.0)
}

/// First two moments of the waiting time (slots, slots²).
pub fn takacs_moments(load: &QueueLoad) -> Result<(f64, f64)> {
    load.require_stable()?;
    let mu = load.service_rate;
    let one_minus = 1.0 - load.utilization;
    let mut s2 = 0.0;
    let mut s3 = 0.0;
    for (l, d) in load.loaded() {
        let d = d as f64;
        s2 += l * d * (d + 1.0) / (mu * mu);
        s3 += l * d * (d + 1.0) * (d + 2.0) / (mu * mu * mu);
    }
    let m1 = s2 / (2.0 * one_minus);
    let m2 = 2.0 * m1 * m1 + s3 / (3.0 * one_minus);
    Ok((m1, m2))
}

/// Gamma law for the waiting time of a task that has to wait.
///
/// An arriving task waits with probability ρ, so the positive part is
/// matched to the conditional moments E[W]/ρ and E[W²]/ρ. The mixture of an
/// atom 1−ρ at zero and ρ·Gamma then reproduces both Takács moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaApproxParams {
    pub shape: f64,
    pub rate: f64,
    /// Unconditional E[W] in slots.
    pub mean: f64,
    /// Unconditional E[W²] in slots².
    pub second_moment: f64,
    /// Probability of waiting at all.
    pub wait_probability: f64,
}

impl GammaApproxParams {
    /// `None` for an empty queue, where there is nothing to match.
    pub fn from_load(load: &QueueLoad) -> Result<Option<Self>> {
        let (mean, second_moment) = takacs_moments(load)?;
        let rho = load.utilization;
        if !(mean > 0.0) || !(rho > 0.0) {
            return Ok(None);
        }
        let cm = mean / rho;
        let var = second_moment / rho - cm * cm;
        if !(var > 0.0) {
            return Err(MecError::Numerical(format!("non-positive conditional waiting variance {var:e}")));
        }
        let shape = cm * cm / var;
        Ok(Some(Self { shape, rate: shape / cm, mean, second_moment, wait_probability: rho }))
    }

    /// Gamma fitted to the unconditional moments, as if the atom at zero were absent.
    pub fn unconditional(load: &QueueLoad) -> Result<Option<Self>> {
        let (mean, second_moment) = takacs_moments(load)?;
        let var = second_moment - mean * mean;
        if !(mean > 0.0) || !(var > 0.0) {
            return Ok(None);
        }
        let shape = mean * mean / var;
        Ok(Some(Self { shape, rate: shape / mean, mean, second_moment, wait_probability: load.utilization }))
    }

    /// Mean and second moment of the mixture 1−ρ at zero plus ρ·Gamma.
    pub fn mixture_moments(&self) -> (f64, f64) {
        let m = self.shape / self.rate;
        let m2 = self.shape * (self.shape + 1.0) / (self.rate * self.rate);
        (self.wait_probability * m, self.wait_probability * m2)
    }
}

/// Probability plus whether it had to be clamped into [0, 1].
fn clamp_probability(v: f64, what: &str) -> Result<(f64, bool)> {
    if !v.is_finite() {
        return Err(MecError::Numerical(format!("{what} produced {v}")));
    }
    if (0.0..=1.0).contains(&v) {
        return Ok((v, false));
    }
    if (-CLAMP_TOL..=1.0 + CLAMP_TOL).contains(&v) {
        return Ok((v.clamp(0.0, 1.0), true));
    }
    Err(MecError::Numerical(format!("{what} produced {v}, outside [0, 1]")))
}

// (1−ρ) P{S ≤ t} + ρ P{G + S ≤ t} with G ~ Gamma(shape, rate), S ~ Erlang(d, μ).
fn gamma_mixture_cdf(rho: f64, g: &GammaApproxParams, mu: f64, d: u32, t: f64) -> Result<f64> {
    let base = erlang_cdf(d, mu, t)?;
    let (b1, b2) = (g.shape, g.rate);
    let z = t * (b2 - mu);
    let mut sum = 0.0;
    let mut ln_fact = 0.0;
    for n in 0..d {
        let nf = n as f64;
        if n > 0 {
            ln_fact += nf.ln();
        }
        let ln_pre = b1 * b2.ln() - ln_gamma(b1) + nf * mu.ln() - ln_fact + beta_function(b1, nf + 1.0)?.ln()
            + (b1 + nf) * t.ln();
        let ln_f = if z < 0.0 {
            // Kummer: e^{−β₂t} ₁F₁(n+1; β₁+n+1; z) = e^{−μt} ₁F₁(β₁; β₁+n+1; −z)
            -mu * t + ln_hyp1f1_positive(b1, b1 + nf + 1.0, -z)?
        } else {
            -b2 * t + ln_hyp1f1_positive(nf + 1.0, b1 + nf + 1.0, z)?
        };
        sum += (ln_pre + ln_f).exp();
    }
    let waiting = regularized_lower_gamma(b1, b2 * t)? - sum;
    Ok((1.0 - rho) * base + rho * waiting)
}

/// Gamma-approximated P{W + Erlang(d, μ) ≤ t}, with a flag set when the value was clamped.
pub fn secp_gamma_approx_checked(load: &QueueLoad, d: u32, t: f64) -> Result<(f64, bool)> {
    load.require_stable()?;
    if t <= 0.0 {
        return Ok((0.0, false));
    }
    let Some(g) = GammaApproxParams::from_load(load)? else {
        return Ok((erlang_cdf(d, load.service_rate, t)?, false));
    };
    clamp_probability(gamma_mixture_cdf(load.utilization, &g, load.service_rate, d, t)?, "secp_gamma_approx")
}

/// Gamma-approximated P{W + Erlang(d, μ) ≤ t}.
pub fn secp_gamma_approx(load: &QueueLoad, d: u32, t: f64) -> Result<f64> {
    Ok(secp_gamma_approx_checked(load, d, t)?.0)
}

/// Same mixture with the Gamma fitted to the unconditional waiting moments.
/// Kept for comparison; its mean is ρ·E[W] rather than E[W].
pub fn secp_gamma_unconditional(load: &QueueLoad, d: u32, t: f64) -> Result<f64> {
    load.require_stable()?;
    if t <= 0.0 {
        return Ok(0.0);
    }
    let Some(g) = GammaApproxParams::unconditional(load)? else {
        return erlang_cdf(d, load.service_rate, t);
    };
    Ok(clamp_probability(gamma_mixture_cdf(load.utilization, &g, load.service_rate, d, t)?, "secp_gamma_unconditional")?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecpMethod {
    /// Exact closed form when the queue only sees one- or two-packet tasks, else Gamma.
    Auto,
    ExactClosedForm,
    LaplaceInversion,
    GammaApprox,
}

/// Which evaluation produced a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodTag {
    ExactClosedForm,
    LaplaceInversion,
    GammaApprox,
    Simulation,
}

impl MethodTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodTag::ExactClosedForm => "exact-closed-form",
            MethodTag::LaplaceInversion => "laplace-inversion",
            MethodTag::GammaApprox => "gamma-approx",
            MethodTag::Simulation => "simulation",
        }
    }
}

/// Closed form is available when every loaded task has one or two packets.
pub fn closed_form_applies(load: &QueueLoad) -> bool {
    load.loaded().all(|(_, d)| d <= 2)
}

/// P{W + Erlang(d, μ) ≤ t} by the requested method.
pub fn sojourn_cdf(load: &QueueLoad, d: u32, t: f64, method: SecpMethod) -> Result<(f64, MethodTag)> {
    let tag = match method {
        SecpMethod::Auto if closed_form_applies(load) => MethodTag::ExactClosedForm,
        SecpMethod::Auto => MethodTag::GammaApprox,
        SecpMethod::ExactClosedForm => MethodTag::ExactClosedForm,
        SecpMethod::LaplaceInversion => MethodTag::LaplaceInversion,
        SecpMethod::GammaApprox => MethodTag::GammaApprox,
    };
    let v = match tag {
        MethodTag::ExactClosedForm => secp_two_type(load, d, t)?,
        MethodTag::LaplaceInversion => secp_laplace_inversion(load, d, t)?,
        _ => secp_gamma_approx(load, d, t)?,
    };
    Ok((v, tag))
}

/// Successful computing probability: the full target latency goes to computation.
pub fn scp(cfg: &NetworkConfig, load: &QueueLoad, i: usize, method: SecpMethod) -> Result<f64> {
    let u = &cfg.user_types[i];
    Ok(sojourn_cdf(load, u.task_packets, u.target_latency_s / cfg.slot_seconds, method)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub user_type: usize,
    pub tier: usize,
    pub offload_probability: f64,
    pub uplink: CommLatencyResult,
    pub downlink: CommLatencyResult,
    pub arrival_rate: f64,
    pub utilization: f64,
    /// Budget left for computation, in slots.
    pub threshold_slots: f64,
    pub secp: f64,
    pub scp: f64,
    pub method: MethodTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecpResult {
    pub pairs: Vec<PairResult>,
    pub loads: Vec<QueueLoad>,
    pub overall: f64,
    pub overall_scp: f64,
    pub method: SecpMethod,
}

impl SecpResult {
    pub fn pair(&self, i: usize, k: usize) -> Option<&PairResult> {
        self.pairs.iter().find(|p| p.user_type == i && p.tier == k)
    }
}

/// Loads at every tier, failing on the first unstable one.
pub fn tier_loads(cfg: &NetworkConfig, bias: &BiasMatrix) -> Result<Vec<QueueLoad>> {
    let loads: Vec<QueueLoad> = (0..cfg.num_tiers()).map(|k| QueueLoad::from_config(cfg, bias, k)).collect::<Result<_>>()?;
    for l in &loads {
        l.require_stable()?;
    }
    Ok(loads)
}

/// End-to-end success probability: association, communication and computation.
pub fn overall_secp(cfg: &NetworkConfig, bias: &BiasMatrix, method: SecpMethod) -> Result<SecpResult> {
    cfg.validate()?;
    bias.check_shape(cfg)?;
    let loads = tier_loads(cfg, bias)?;
    let mut pairs = Vec::with_capacity(cfg.num_types() * cfg.num_tiers());
    let mut overall = 0.0;
    let mut overall_scp = 0.0;
    for (i, u) in cfg.user_types.iter().enumerate() {
        for (k, load) in loads.iter().enumerate() {
            let po = offload_probability(cfg, bias, i, k);
            let up = comm_latency(cfg, bias, i, k, Direction::Up)?;
            let down = comm_latency(cfg, bias, i, k, Direction::Down)?;
            let threshold_slots = (u.target_latency_s - up.latency - down.latency) / cfg.slot_seconds;
            let (secp, tag) = sojourn_cdf(load, u.task_packets, threshold_slots, method)?;
            let (scp, _) = sojourn_cdf(load, u.task_packets, u.target_latency_s / cfg.slot_seconds, method)?;
            overall += u.portion * po * secp;
            overall_scp += u.portion * po * scp;
            pairs.push(PairResult {
                user_type: i,
                tier: k,
                offload_probability: po,
                uplink: up,
                downlink: down,
                arrival_rate: load.rates[i],
                utilization: load.utilization,
                threshold_slots,
                secp,
                scp,
                method: tag,
            });
        }
    }
    Ok(SecpResult { pairs, loads, overall, overall_scp, method })
}
