//! TOML configuration files.
//!
//! Powers are written in dBm and biases in dB; both are converted to linear
//! scale on load. Any omitted field takes its value from the reference table
//! (`NetworkConfig::reference`). See the README for the full schema.

use std::fs;
use std::path::Path;

use mec_core::config::{db_to_linear, dbm_to_mw, linear_to_db, mw_to_dbm, BiasMatrix, NetworkConfig, TierParams, UserTypeParams};
use mec_core::MecError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HetnetError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerTier {
    All(f64),
    Each(Vec<f64>),
}

impl PerTier {
    fn expand(&self, tiers: usize) -> Vec<f64> {
        match self {
            PerTier::All(v) => vec![*v; tiers],
            PerTier::Each(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTier {
    pub density_fraction: Option<f64>,
    pub tx_power_dbm: Option<f64>,
    pub service_rate: Option<f64>,
    pub cpu_freq_hz: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawUserType {
    pub portion: Option<f64>,
    pub task_packets: Option<u32>,
    pub request_packets: Option<u32>,
    pub result_packets: Option<u32>,
    pub tx_power_dbm: Option<f64>,
    pub target_latency_s: Option<f64>,
    pub coverage_up: Option<PerTier>,
    pub coverage_down: Option<PerTier>,
    /// One bias per tier, in dB.
    pub bias_db: Option<Vec<f64>>,
}

/// The file as written, before defaults and unit conversion.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub server_density: Option<f64>,
    pub user_density: Option<f64>,
    pub pathloss_exponent: Option<f64>,
    pub reuse_factor: Option<f64>,
    pub bandwidth_up_hz: Option<f64>,
    pub bandwidth_down_hz: Option<f64>,
    pub packet_bits: Option<f64>,
    pub cycles_per_bit: Option<f64>,
    pub slot_seconds: Option<f64>,
    pub noise_dbm: Option<f64>,
    pub downlink_uses_request_size: Option<bool>,
    pub thin_arrivals_by_coverage: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tier: Vec<RawTier>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub user_type: Vec<RawUserType>,
}

/// A validated configuration together with the bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub cfg: NetworkConfig,
    pub bias: BiasMatrix,
    /// SHA-256 of the source text, lowercase hex.
    pub hash: String,
    pub source: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn missing(what: &str, idx: usize, field: &str) -> HetnetError {
    MecError::Config(format!("{what} {}: `{field}` is required (no reference value for this entry)", idx + 1)).into()
}

impl RawConfig {
    /// Apply reference defaults and unit conversions, then validate.
    pub fn resolve(&self) -> Result<(NetworkConfig, BiasMatrix)> {
        let base = NetworkConfig::reference();
        let mut cfg = base.clone();
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        take!(
            server_density,
            user_density,
            pathloss_exponent,
            reuse_factor,
            bandwidth_up_hz,
            bandwidth_down_hz,
            packet_bits,
            cycles_per_bit,
            slot_seconds,
            noise_dbm,
            downlink_uses_request_size,
            thin_arrivals_by_coverage
        );

        if !self.tier.is_empty() {
            cfg.tiers = self
                .tier
                .iter()
                .enumerate()
                .map(|(k, t)| {
                    let def = base.tiers.get(k);
                    let pick = |v: Option<f64>, d: Option<f64>, name: &str| v.or(d).ok_or_else(|| missing("tier", k, name));
                    Ok(TierParams {
                        density_fraction: pick(t.density_fraction, def.map(|d| d.density_fraction), "density_fraction")?,
                        tx_power_mw: dbm_to_mw(pick(t.tx_power_dbm, def.map(|d| mw_to_dbm(d.tx_power_mw)), "tx_power_dbm")?),
                        service_rate: pick(t.service_rate, def.map(|d| d.service_rate), "service_rate")?,
                        cpu_freq_hz: t.cpu_freq_hz.or(def.and_then(|d| d.cpu_freq_hz)),
                    })
                })
                .collect::<Result<_>>()?;
        }
        let tiers = cfg.num_tiers();

        let raw_users: Vec<RawUserType> = if self.user_type.is_empty() {
            vec![RawUserType::default(); base.num_types()]
        } else {
            self.user_type.clone()
        };
        let n = raw_users.len();
        let def = &base.user_types[0];
        let mut bias_rows = Vec::with_capacity(n);
        cfg.user_types = raw_users
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let cov = |v: &Option<PerTier>, name: &str| -> Result<Vec<f64>> {
                    let v = v.as_ref().map_or_else(|| vec![def.coverage_up[0]; tiers], |p| p.expand(tiers));
                    if v.len() != tiers {
                        return Err(MecError::Config(format!("user type {}: `{name}` needs {tiers} entries, got {}", i + 1, v.len())).into());
                    }
                    Ok(v)
                };
                let row = u.bias_db.clone().unwrap_or_else(|| vec![0.0; tiers]);
                if row.len() != tiers {
                    return Err(MecError::Config(format!("user type {}: `bias_db` needs {tiers} entries, got {}", i + 1, row.len())).into());
                }
                bias_rows.push(row);
                Ok(UserTypeParams {
                    portion: u.portion.unwrap_or(1.0 / n as f64),
                    task_packets: u.task_packets.unwrap_or(def.task_packets),
                    request_packets: u.request_packets.unwrap_or(def.request_packets),
                    result_packets: u.result_packets.unwrap_or(def.result_packets),
                    tx_power_mw: u.tx_power_dbm.map_or(def.tx_power_mw, dbm_to_mw),
                    target_latency_s: u.target_latency_s.unwrap_or(def.target_latency_s),
                    coverage_up: cov(&u.coverage_up, "coverage_up")?,
                    coverage_down: cov(&u.coverage_down, "coverage_down")?,
                })
            })
            .collect::<Result<_>>()?;
        cfg.validate()?;
        let bias = BiasMatrix::from_db_rows(&bias_rows)?;
        Ok((cfg, bias))
    }

    /// Fully explicit raw form of a configuration.
    pub fn from_model(cfg: &NetworkConfig, bias: &BiasMatrix) -> Self {
        RawConfig {
            server_density: Some(cfg.server_density),
            user_density: Some(cfg.user_density),
            pathloss_exponent: Some(cfg.pathloss_exponent),
            reuse_factor: Some(cfg.reuse_factor),
            bandwidth_up_hz: Some(cfg.bandwidth_up_hz),
            bandwidth_down_hz: Some(cfg.bandwidth_down_hz),
            packet_bits: Some(cfg.packet_bits),
            cycles_per_bit: Some(cfg.cycles_per_bit),
            slot_seconds: Some(cfg.slot_seconds),
            noise_dbm: Some(cfg.noise_dbm),
            downlink_uses_request_size: Some(cfg.downlink_uses_request_size),
            thin_arrivals_by_coverage: Some(cfg.thin_arrivals_by_coverage),
            tier: cfg
                .tiers
                .iter()
                .map(|t| RawTier {
                    density_fraction: Some(t.density_fraction),
                    tx_power_dbm: Some(mw_to_dbm(t.tx_power_mw)),
                    service_rate: Some(t.service_rate),
                    cpu_freq_hz: t.cpu_freq_hz,
                })
                .collect(),
            user_type: cfg
                .user_types
                .iter()
                .enumerate()
                .map(|(i, u)| RawUserType {
                    portion: Some(u.portion),
                    task_packets: Some(u.task_packets),
                    request_packets: Some(u.request_packets),
                    result_packets: Some(u.result_packets),
                    tx_power_dbm: Some(mw_to_dbm(u.tx_power_mw)),
                    target_latency_s: Some(u.target_latency_s),
                    coverage_up: Some(PerTier::Each(u.coverage_up.clone())),
                    coverage_down: Some(PerTier::Each(u.coverage_down.clone())),
                    bias_db: Some((0..bias.tiers()).map(|k| linear_to_db(bias.get(i, k))).collect()),
                })
                .collect(),
        }
    }
}

pub fn parse_config(text: &str, origin: &Path) -> Result<LoadedConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| HetnetError::Parse { path: origin.to_path_buf(), message: e.to_string() })?;
    let (cfg, bias) = raw.resolve()?;
    Ok(LoadedConfig { cfg, bias, hash: sha256_hex(text.as_bytes()), source: Some(origin.display().to_string()) })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = fs::read_to_string(path).map_err(|e| HetnetError::io(path, e))?;
    parse_config(&text, path)
}

/// The reference table with unit biases, hashed through its canonical text.
pub fn reference_config() -> LoadedConfig {
    let cfg = NetworkConfig::reference();
    let bias = BiasMatrix::unit(cfg.num_types(), cfg.num_tiers());
    let text = to_toml_string(&cfg, &bias);
    LoadedConfig { cfg, bias, hash: sha256_hex(text.as_bytes()), source: None }
}

pub fn to_toml_string(cfg: &NetworkConfig, bias: &BiasMatrix) -> String {
    toml::to_string(&RawConfig::from_model(cfg, bias)).expect("config values serialize")
}

pub fn save_config(path: &Path, cfg: &NetworkConfig, bias: &BiasMatrix) -> Result<()> {
    fs::write(path, to_toml_string(cfg, bias)).map_err(|e| HetnetError::io(path, e))
}

/// Parses a `--bias i,k,valdB` override (one-based indices).
pub fn parse_bias_override(s: &str) -> Result<(usize, usize, f64)> {
    let bad = || HetnetError::Usage(format!("--bias expects i,k,valdB with one-based indices, got '{s}'"));
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let i: usize = parts[0].parse().map_err(|_| bad())?;
    let k: usize = parts[1].parse().map_err(|_| bad())?;
    let v = parts[2].strip_suffix("dB").or_else(|| parts[2].strip_suffix("db")).unwrap_or(parts[2]);
    let v: f64 = v.trim().parse().map_err(|_| bad())?;
    if i == 0 || k == 0 || !v.is_finite() {
        return Err(bad());
    }
    Ok((i - 1, k - 1, v))
}

pub fn apply_bias_overrides(bias: &mut BiasMatrix, overrides: &[(usize, usize, f64)]) -> Result<()> {
    for &(i, k, v) in overrides {
        if i >= bias.types() || k >= bias.tiers() {
            return Err(HetnetError::Usage(format!(
                "--bias {},{},{v}: matrix is {}x{}",
                i + 1,
                k + 1,
                bias.types(),
                bias.tiers()
            )));
        }
        bias.set(i, k, db_to_linear(v));
    }
    Ok(())
}
