//! Rate coverage, maximum target rates and communication latency under
//! Rayleigh fading in the interference-limited regime.

use core::f64::consts::{FRAC_PI_2, LN_2, PI};

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::config::{BiasMatrix, NetworkConfig};
use crate::error::{MecError, Result};
use crate::geometry::{effective_density, offload_probability};
use crate::quad::{integrate_to_inf, QuadOptions};
use crate::specfun::{trig_integrals, EULER_GAMMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommLatencyResult {
    pub direction: Direction,
    /// Maximum target rate in bits/s.
    pub max_rate: f64,
    /// Transmission time in seconds.
    pub latency: f64,
    pub packets: u32,
}

/// Z(a, α, c) = 2 ∫_{c^{1/α}}^∞ u / (1 + u^α / a) du by quadrature.
pub fn z_integral_numeric(a: f64, alpha: f64, c: f64) -> Result<f64> {
    check_z_args(a, alpha, c)?;
    if a == 0.0 {
        return Ok(0.0);
    }
    let lo = c.powf(1.0 / alpha);
    // scale u by a^{1/α} so the integrand has its knee near 1
    let s = a.powf(1.0 / alpha);
    let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-12, max_intervals: 10_000 };
    let v = integrate_to_inf(|v| v / (1.0 + v.powf(alpha)), lo / s, opts)?;
    Ok(2.0 * s * s * v)
}

fn check_z_args(a: f64, alpha: f64, c: f64) -> Result<()> {
    if !(a >= 0.0) {
        return Err(MecError::Domain { what: "z_integral a", value: a });
    }
    if !(alpha > 2.0) {
        return Err(MecError::Domain { what: "z_integral alpha", value: alpha });
    }
    if !(c >= 0.0) {
        return Err(MecError::Domain { what: "z_integral c", value: c });
    }
    Ok(())
}

/// Interference integral Z(a, α, c); closed form √a (π/2 − atan √(c/a)) at α = 4.
pub fn z_integral(a: f64, alpha: f64, c: f64) -> Result<f64> {
    check_z_args(a, alpha, c)?;
    if a == 0.0 {
        return Ok(0.0);
    }
    if alpha == 4.0 {
        return Ok(a.sqrt() * (FRAC_PI_2 - (c / a).sqrt().atan()));
    }
    z_integral_numeric(a, alpha, c)
}

fn sir_threshold(rate: f64, bandwidth: f64) -> f64 {
    (rate / bandwidth * LN_2).exp_m1()
}

/// P{uplink rate ≥ `rate`} for a type-i user at distance y from its tier-k server.
///
/// Co-channel uplink interferers form a PPP of density κ λ_{m,k}.
pub fn uplink_rate_coverage(cfg: &NetworkConfig, _i: usize, k: usize, y: f64, rate: f64) -> Result<f64> {
    if rate <= 0.0 {
        return Ok(1.0);
    }
    let a = sir_threshold(rate, cfg.bandwidth_up_hz);
    let z = z_integral(a, cfg.pathloss_exponent, 0.0)?;
    Ok((-PI * cfg.reuse_factor * cfg.tier_density(k) * y * y * z).exp())
}

/// P{downlink rate ≥ `rate`} with association guard zones around the user.
pub fn downlink_rate_coverage(cfg: &NetworkConfig, bias: &BiasMatrix, i: usize, k: usize, y: f64, rate: f64) -> Result<f64> {
    if rate <= 0.0 {
        return Ok(1.0);
    }
    let alpha = cfg.pathloss_exponent;
    let a = sir_threshold(rate, cfg.bandwidth_down_hz);
    let pk = cfg.tiers[k].tx_power_mw;
    let mut exponent = 0.0;
    for j in 0..cfg.num_tiers() {
        let p_hat = cfg.tiers[j].tx_power_mw / pk;
        let b_hat = bias.get(i, j) / bias.get(i, k);
        exponent += PI * p_hat.powf(2.0 / alpha) * cfg.tier_density(j) * y * y * z_integral(a, alpha, b_hat)?;
    }
    Ok((-exponent).exp())
}

/// Downlink coverage with every guard zone shrunk to zero, the bound behind
/// [`downlink_max_rate_lb`].
pub fn downlink_rate_coverage_bound(cfg: &NetworkConfig, k: usize, y: f64, rate: f64) -> Result<f64> {
    if rate <= 0.0 {
        return Ok(1.0);
    }
    let alpha = cfg.pathloss_exponent;
    let a = sir_threshold(rate, cfg.bandwidth_down_hz);
    let z = z_integral(a, alpha, 0.0)?;
    let pk = cfg.tiers[k].tx_power_mw;
    let s: f64 = (0..cfg.num_tiers())
        .map(|j| (cfg.tiers[j].tx_power_mw / pk).powf(2.0 / alpha) * cfg.tier_density(j))
        .sum();
    Ok((-PI * s * y * y * z).exp())
}

/// ln x − Ci(x) cos x − si(x) sin x + 𝐂, written so that nothing cancels as x → 0.
pub fn rate_kernel(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(MecError::Domain { what: "rate_kernel", value: x });
    }
    let (si, _, cin) = trig_integrals(x)?;
    let half = (0.5 * x).sin();
    Ok((x.ln() + EULER_GAMMA) * 2.0 * half * half + cin * x.cos() + (FRAC_PI_2 - si) * x.sin())
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(MecError::Domain { what: "coverage target", value: beta })
    }
}

fn averaged_rate(cfg: &NetworkConfig, bias: &BiasMatrix, i: usize, k: usize, bandwidth: f64, delta2: f64) -> Result<f64> {
    let delta1 = PI * effective_density(cfg, bias, i, k);
    let po = offload_probability(cfg, bias, i, k);
    Ok(PI * cfg.tier_density(k) * bandwidth / (po * LN_2) * (2.0 / delta1) * rate_kernel(delta2)?)
}

/// Uplink maximum target rate averaged over the serving distance (bits/s).
pub fn uplink_max_rate(cfg: &NetworkConfig, bias: &BiasMatrix, i: usize, k: usize) -> Result<f64> {
    cfg.require_alpha4("uplink_max_rate")?;
    let beta = cfg.user_types[i].coverage_up[k];
    check_beta(beta)?;
    let delta1 = PI * effective_density(cfg, bias, i, k);
    let delta2 = -2.0 * delta1 * beta.ln() / (PI * PI * cfg.reuse_factor * cfg.tier_density(k));
    averaged_rate(cfg, bias, i, k, cfg.bandwidth_up_hz, delta2)
}

/// Lower bound of the downlink maximum target rate averaged over the serving distance (bits/s).
pub fn downlink_max_rate_lb(cfg: &NetworkConfig, bias: &BiasMatrix, i: usize, k: usize) -> Result<f64> {
    cfg.require_alpha4("downlink_max_rate_lb")?;
    let beta = cfg.user_types[i].coverage_down[k];
    check_beta(beta)?;
    let delta1 = PI * effective_density(cfg, bias, i, k);
    let pk = cfg.tiers[k].tx_power_mw;
    let s: f64 = (0..cfg.num_tiers()).map(|j| cfg.tier_density(j) * (cfg.tiers[j].tx_power_mw / pk).sqrt()).sum();
    let delta2 = -2.0 * delta1 * beta.ln() / (PI * PI * s);
    averaged_rate(cfg, bias, i, k, cfg.bandwidth_down_hz, delta2)
}

/// Uplink rate meeting the coverage target exactly at serving distance y.
pub fn uplink_rate_at_distance(cfg: &NetworkConfig, i: usize, k: usize, y: f64) -> Result<f64> {
    cfg.require_alpha4("uplink_rate_at_distance")?;
    let beta = cfg.user_types[i].coverage_up[k];
    check_beta(beta)?;
    let c = -2.0 * beta.ln() / (PI * PI * cfg.reuse_factor * cfg.tier_density(k) * y * y);
    Ok(cfg.bandwidth_up_hz * (c * c).ln_1p() / LN_2)
}

/// Downlink rate meeting the coverage target of the guard-zone-free bound at distance y.
pub fn downlink_rate_lb_at_distance(cfg: &NetworkConfig, i: usize, k: usize, y: f64) -> Result<f64> {
    cfg.require_alpha4("downlink_rate_lb_at_distance")?;
    let beta = cfg.user_types[i].coverage_down[k];
    check_beta(beta)?;
    let pk = cfg.tiers[k].tx_power_mw;
    let s: f64 = (0..cfg.num_tiers()).map(|j| cfg.tier_density(j) * (cfg.tiers[j].tx_power_mw / pk).sqrt()).sum();
    let c = -2.0 * beta.ln() / (PI * PI * s * y * y);
    Ok(cfg.bandwidth_down_hz * (c * c).ln_1p() / LN_2)
}

/// Packets carried in each direction for user type i.
pub fn packets(cfg: &NetworkConfig, i: usize, direction: Direction) -> u32 {
    let u = &cfg.user_types[i];
    match direction {
        Direction::Up => u.request_packets,
        Direction::Down if cfg.downlink_uses_request_size => u.request_packets,
        Direction::Down => u.result_packets,
    }
}

/// Transmission time in seconds for one direction.
pub fn comm_latency(cfg: &NetworkConfig, bias: &BiasMatrix, i: usize, k: usize, direction: Direction) -> Result<CommLatencyResult> {
    let max_rate = match direction {
        Direction::Up => uplink_max_rate(cfg, bias, i, k)?,
        Direction::Down => downlink_max_rate_lb(cfg, bias, i, k)?,
    };
    if !(max_rate > 0.0 && max_rate.is_finite()) {
        return Err(MecError::Numerical(alloc::format!(
            "max rate for type {} tier {} is {max_rate}",
            i + 1,
            k + 1
        )));
    }
    let n = packets(cfg, i, direction);
    Ok(CommLatencyResult { direction, max_rate, latency: n as f64 * cfg.packet_bits / max_rate, packets: n })
}
