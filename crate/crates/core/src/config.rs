//! Model parameters, unit conversions and validation.
//!
//! Everything is stored in linear scale: powers in mW, biases as plain
//! ratios, densities in nodes/m², rates in packets per slot.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{MecError, Result};

const SUM_TOL: f64 = 1e-9;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    linear_to_db(mw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierParams {
    /// Fraction p_{m,k} of all servers that belong to this tier.
    pub density_fraction: f64,
    /// Transmit power in mW.
    pub tx_power_mw: f64,
    /// Packets served per slot.
    pub service_rate: f64,
    /// CPU frequency in cycles/s (informational).
    pub cpu_freq_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTypeParams {
    pub portion: f64,
    pub task_packets: u32,
    pub request_packets: u32,
    pub result_packets: u32,
    pub tx_power_mw: f64,
    pub target_latency_s: f64,
    /// Uplink rate-coverage target per tier.
    pub coverage_up: Vec<f64>,
    /// Downlink rate-coverage target per tier.
    pub coverage_down: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub server_density: f64,
    pub user_density: f64,
    pub tiers: Vec<TierParams>,
    pub user_types: Vec<UserTypeParams>,
    pub pathloss_exponent: f64,
    pub reuse_factor: f64,
    pub bandwidth_up_hz: f64,
    pub bandwidth_down_hz: f64,
    pub packet_bits: f64,
    pub cycles_per_bit: f64,
    pub slot_seconds: f64,
    /// Noise power in dBm. Informational: the analysis is interference limited.
    pub noise_dbm: f64,
    /// Use the request size for the downlink too, instead of the result size.
    pub downlink_uses_request_size: bool,
    /// Thin offered tasks by the uplink coverage target before they reach the queue.
    pub thin_arrivals_by_coverage: bool,
}

impl NetworkConfig {
    /// The reference parameter table: two tiers, two equally likely user types.
    pub fn reference() -> Self {
        let tier = |p: f64, dbm: f64, mu: f64, f: f64| TierParams {
            density_fraction: p,
            tx_power_mw: dbm_to_mw(dbm),
            service_rate: mu,
            cpu_freq_hz: Some(f),
        };
        let user = UserTypeParams {
            portion: 0.5,
            task_packets: 1,
            request_packets: 1,
            result_packets: 1,
            tx_power_mw: dbm_to_mw(23.0),
            target_latency_s: 1e-3,
            coverage_up: vec![0.95; 2],
            coverage_down: vec![0.95; 2],
        };
        Self {
            server_density: 4e-5,
            user_density: 12e-4,
            tiers: vec![tier(0.25, 43.0, 9.0, 10e6), tier(0.75, 33.0, 3.0, 3e6)],
            user_types: vec![user.clone(), user],
            pathloss_exponent: 4.0,
            reuse_factor: 0.75,
            bandwidth_up_hz: 5e6,
            bandwidth_down_hz: 10e6,
            packet_bits: 8e5,
            cycles_per_bit: 1400.0,
            slot_seconds: 1e-3,
            noise_dbm: -104.0,
            downlink_uses_request_size: false,
            thin_arrivals_by_coverage: true,
        }
    }

    pub fn num_tiers(&self) -> usize {
        self.tiers.len()
    }

    pub fn num_types(&self) -> usize {
        self.user_types.len()
    }

    /// λ_{m,k} = p_{m,k} λ_m.
    pub fn tier_density(&self, k: usize) -> f64 {
        self.tiers[k].density_fraction * self.server_density
    }

    /// λ_{u,i} = p_{u,i} λ_u.
    pub fn user_type_density(&self, i: usize) -> f64 {
        self.user_types[i].portion * self.user_density
    }

    /// F_{m,k}/(C_u U_s), the service rate implied by the CPU frequency, if one is set.
    /// Not used by the analysis: the configured service rate governs.
    pub fn service_rate_from_cpu(&self, k: usize) -> Option<f64> {
        self.tiers[k].cpu_freq_hz.map(|f| f / (self.cycles_per_bit * self.packet_bits))
    }

    /// Σ_k λ_{m,k} μ_k.
    pub fn computation_capability(&self) -> f64 {
        (0..self.num_tiers()).map(|k| self.tier_density(k) * self.tiers[k].service_rate).sum()
    }

    /// Replace the per-tier densities, keeping λ_m = Σ λ_{m,k}.
    pub fn set_tier_densities(&mut self, densities: &[f64]) -> Result<()> {
        if densities.len() != self.num_tiers() {
            return Err(MecError::Config(format!(
                "expected {} tier densities, got {}",
                self.num_tiers(),
                densities.len()
            )));
        }
        let total: f64 = densities.iter().sum();
        if !(total > 0.0) {
            return Err(MecError::Config("tier densities must sum to a positive value".into()));
        }
        self.server_density = total;
        for (t, d) in self.tiers.iter_mut().zip(densities) {
            t.density_fraction = d / total;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: alloc::string::String| Err(MecError::Config(m));
        if self.tiers.is_empty() {
            return cfg_err("at least one tier is required".into());
        }
        if self.user_types.is_empty() {
            return cfg_err("at least one user type is required".into());
        }
        positive("server_density", self.server_density)?;
        positive("user_density", self.user_density)?;
        if !(self.pathloss_exponent > 2.0) {
            return cfg_err(format!("pathloss_exponent must exceed 2, got {}", self.pathloss_exponent));
        }
        if !(self.reuse_factor > 0.0 && self.reuse_factor <= 1.0) {
            return cfg_err(format!("reuse_factor must lie in (0, 1], got {}", self.reuse_factor));
        }
        positive("bandwidth_up_hz", self.bandwidth_up_hz)?;
        positive("bandwidth_down_hz", self.bandwidth_down_hz)?;
        positive("packet_bits", self.packet_bits)?;
        positive("cycles_per_bit", self.cycles_per_bit)?;
        positive("slot_seconds", self.slot_seconds)?;
        let mut pm = 0.0;
        for (k, t) in self.tiers.iter().enumerate() {
            if !(t.density_fraction > 0.0 && t.density_fraction <= 1.0) {
                return cfg_err(format!("tier {}: density_fraction must lie in (0, 1], got {}", k + 1, t.density_fraction));
            }
            positive_at("tx_power", k, t.tx_power_mw)?;
            positive_at("service_rate", k, t.service_rate)?;
            pm += t.density_fraction;
        }
        if (pm - 1.0).abs() > SUM_TOL {
            return cfg_err(format!("tier density_fraction values must sum to 1, got {pm}"));
        }
        let mut pu = 0.0;
        let n_tiers = self.num_tiers();
        for (i, u) in self.user_types.iter().enumerate() {
            if !(u.portion > 0.0 && u.portion <= 1.0) {
                return cfg_err(format!("user type {}: portion must lie in (0, 1], got {}", i + 1, u.portion));
            }
            if u.task_packets == 0 || u.request_packets == 0 || u.result_packets == 0 {
                return cfg_err(format!("user type {}: packet counts must be at least 1", i + 1));
            }
            positive_at("user tx_power", i, u.tx_power_mw)?;
            positive_at("target_latency_s", i, u.target_latency_s)?;
            for (name, v) in [("coverage_up", &u.coverage_up), ("coverage_down", &u.coverage_down)] {
                if v.len() != n_tiers {
                    return cfg_err(format!("user type {}: {name} needs {n_tiers} entries, got {}", i + 1, v.len()));
                }
                if let Some(b) = v.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
                    return cfg_err(format!("user type {}: {name} must lie in (0, 1), got {b}", i + 1));
                }
            }
            pu += u.portion;
        }
        if (pu - 1.0).abs() > SUM_TOL {
            return cfg_err(format!("user type portions must sum to 1, got {pu}"));
        }
        Ok(())
    }

    /// Closed forms in this crate need α = 4.
    pub fn require_alpha4(&self, what: &str) -> Result<()> {
        if self.pathloss_exponent == 4.0 {
            Ok(())
        } else {
            Err(MecError::Unsupported(format!(
                "{what} needs pathloss_exponent = 4, got {}",
                self.pathloss_exponent
            )))
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(MecError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn positive_at(name: &str, idx: usize, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(MecError::Config(format!("entry {}: {name} must be positive and finite, got {v}", idx + 1)))
    }
}

/// Association biases B_{i,k} in linear scale, row-major by user type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasMatrix {
    types: usize,
    tiers: usize,
    values: Vec<f64>,
}

impl BiasMatrix {
    /// All biases 1 (0 dB).
    pub fn unit(types: usize, tiers: usize) -> Self {
        Self { types, tiers, values: vec![1.0; types * tiers] }
    }

    pub fn from_db_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let types = rows.len();
        let tiers = rows.first().map_or(0, |r| r.len());
        let mut values = Vec::with_capacity(types * tiers);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != tiers {
                return Err(MecError::Config(format!("bias row {} has {} entries, expected {tiers}", i + 1, r.len())));
            }
            values.extend(r.iter().map(|&d| db_to_linear(d)));
        }
        let m = Self { types, tiers, values };
        m.validate()?;
        Ok(m)
    }

    pub fn types(&self) -> usize {
        self.types
    }

    pub fn tiers(&self) -> usize {
        self.tiers
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.tiers + k]
    }

    pub fn get_db(&self, i: usize, k: usize) -> f64 {
        linear_to_db(self.get(i, k))
    }

    pub fn set(&mut self, i: usize, k: usize, linear: f64) {
        self.values[i * self.tiers + k] = linear;
    }

    pub fn set_db(&mut self, i: usize, k: usize, db: f64) {
        self.set(i, k, db_to_linear(db));
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.tiers..(i + 1) * self.tiers]
    }

    pub fn to_db_rows(&self) -> Vec<Vec<f64>> {
        (0..self.types).map(|i| self.row(i).iter().map(|&b| linear_to_db(b)).collect()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.values.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(MecError::Config(format!("bias entries must be positive, got {b}")));
        }
        Ok(())
    }

    pub fn check_shape(&self, cfg: &NetworkConfig) -> Result<()> {
        if self.types != cfg.num_types() || self.tiers != cfg.num_tiers() {
            return Err(MecError::Config(format!(
                "bias matrix is {}x{}, configuration has {} user types and {} tiers",
                self.types,
                self.tiers,
                cfg.num_types(),
                cfg.num_tiers()
            )));
        }
        self.validate()
    }
}
