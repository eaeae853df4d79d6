//! Biased max-power association, offloading probabilities, serving-distance
//! law and Poisson point sampling.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::config::{BiasMatrix, NetworkConfig};
use crate::error::{MecError, Result};

/// Default ceiling on the expected number of points per sampled set.
pub const DEFAULT_POINT_CAP: f64 = 1e7;

/// W_{i,j} = P_{m,j} B_{i,j} for one user type.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationWeights {
    weights: Vec<f64>,
}

impl AssociationWeights {
    pub fn new(cfg: &NetworkConfig, bias: &BiasMatrix, i: usize) -> Self {
        let weights = cfg.tiers.iter().enumerate().map(|(k, t)| t.tx_power_mw * bias.get(i, k)).collect();
        Self { weights }
    }

    pub fn from_weights(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.weights[j]
    }

    /// Ŵ_{j|k} = W_j / W_k, exactly 1 when j = k.
    pub fn ratio(&self, j: usize, k: usize) -> f64 {
        if j == k {
            1.0
        } else {
            self.weights[j] / self.weights[k]
        }
    }
}

/// Σ_j λ_{m,j} Ŵ_{i,j|k}^{2/α}, the effective density seen from tier k.
pub fn effective_density(cfg: &NetworkConfig, bias: &BiasMatrix, i: usize, k: usize) -> f64 {
    let w = AssociationWeights::new(cfg, bias, i);
    let e = 2.0 / cfg.pathloss_exponent;
    (0..cfg.num_tiers()).map(|j| cfg.tier_density(j) * w.ratio(j, k).powf(e)).sum()
}

/// Probability that a type-i user associates with (offloads to) tier k.
pub fn offload_probability(cfg: &NetworkConfig, bias: &BiasMatrix, i: usize, k: usize) -> f64 {
    cfg.tier_density(k) / effective_density(cfg, bias, i, k)
}

/// Density of the distance to the serving tier-k server, given association with tier k.
pub fn serving_distance_pdf(cfg: &NetworkConfig, bias: &BiasMatrix, i: usize, k: usize, y: f64) -> f64 {
    if y < 0.0 {
        return 0.0;
    }
    let s = effective_density(cfg, bias, i, k);
    2.0 * PI * s * y * (-PI * s * y * y).exp()
}

/// Mode of the serving-distance density.
pub fn serving_distance_mode(cfg: &NetworkConfig, bias: &BiasMatrix, i: usize, k: usize) -> f64 {
    1.0 / (2.0 * PI * effective_density(cfg, bias, i, k)).sqrt()
}

/// Mean of the serving-distance density.
pub fn mean_serving_distance(cfg: &NetworkConfig, bias: &BiasMatrix, i: usize, k: usize) -> f64 {
    0.5 / effective_density(cfg, bias, i, k).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn dist(&self, o: &Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub points: Vec<Point>,
    pub density: f64,
    pub region_radius: f64,
}

/// Homogeneous PPP restricted to the disc of the given radius around the origin.
pub fn sample_ppp<R: Rng + ?Sized>(density: f64, region_radius: f64, rng: &mut R, cap: f64) -> Result<PointSet> {
    if !(density >= 0.0) || !density.is_finite() {
        return Err(MecError::Domain { what: "sample_ppp density", value: density });
    }
    if !(region_radius > 0.0) {
        return Err(MecError::Domain { what: "sample_ppp radius", value: region_radius });
    }
    let mean = density * PI * region_radius * region_radius;
    if mean > cap {
        return Err(MecError::Resource(format!("expected {mean:.3e} points exceeds cap {cap:.3e}")));
    }
    let n = if mean > 0.0 {
        let p = Poisson::new(mean).map_err(|_| MecError::Domain { what: "sample_ppp mean", value: mean })?;
        p.sample(rng) as usize
    } else {
        0
    };
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let r = region_radius * rng.random::<f64>().sqrt();
        let th = 2.0 * PI * rng.random::<f64>();
        points.push(Point { x: r * th.cos(), y: r * th.sin() });
    }
    Ok(PointSet { points, density, region_radius })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Association {
    pub tier: usize,
    pub server: usize,
    pub distance: f64,
}

/// Nearest point of a set; ties go to the lower index.
pub fn nearest(user: &Point, set: &[Point]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (n, p) in set.iter().enumerate() {
        let d = user.dist(p);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((n, d));
        }
    }
    best
}

/// Serving server maximizing W_j · distance^{−α}.
///
/// Ties go to the lowest tier, then to the nearest server.
pub fn associate(user: &Point, tiers: &[&[Point]], weights: &AssociationWeights, alpha: f64) -> Result<Association> {
    if tiers.len() != weights.len() {
        return Err(MecError::Precondition(format!("{} tier sets but {} weights", tiers.len(), weights.len())));
    }
    let mut best: Option<(Association, f64)> = None;
    for (j, set) in tiers.iter().enumerate() {
        let (n, d) = nearest(user, set).ok_or_else(|| MecError::Precondition(format!("tier {} has no servers", j + 1)))?;
        let score = weights.weight(j) * d.powf(-alpha);
        if best.as_ref().is_none_or(|(_, s)| score > *s) {
            best = Some((Association { tier: j, server: n, distance: d }, score));
        }
    }
    Ok(best.expect("at least one tier").0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_weights_follow_density() {
        let cfg = NetworkConfig::reference();
        let bias = BiasMatrix::unit(2, 2);
        let mut c = cfg.clone();
        c.tiers[1].tx_power_mw = c.tiers[0].tx_power_mw;
        assert!((offload_probability(&c, &bias, 0, 0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn equidistant_servers_prefer_heavier_weight() {
        let a = [Point { x: 1.0, y: 0.0 }];
        let b = [Point { x: -1.0, y: 0.0 }];
        let w = AssociationWeights::from_weights(alloc::vec![2.0, 1.0]);
        let r = associate(&Point::ORIGIN, &[&a, &b], &w, 4.0).unwrap();
        assert_eq!(r.tier, 0);
        let w = AssociationWeights::from_weights(alloc::vec![1.0, 1.0]);
        assert_eq!(associate(&Point::ORIGIN, &[&a, &b], &w, 4.0).unwrap().tier, 0);
    }

    #[test]
    fn empty_tier_is_an_error() {
        let a = [Point { x: 1.0, y: 0.0 }];
        let w = AssociationWeights::from_weights(alloc::vec![1.0, 1.0]);
        assert!(associate(&Point::ORIGIN, &[&a, &[]], &w, 4.0).is_err());
    }
}
