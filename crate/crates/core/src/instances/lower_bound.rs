use log::warn;

use crate::error::{Error, Result};
use crate::geometry::{Dataset, GroundTruth};

/// Largest squared norm the generator will produce.
pub const MAX_SQUARED_NORM: f64 = 1e300;
/// Squared norms above this are allowed but logged.
pub const WARN_SQUARED_NORM: f64 = 1e150;

/// Parameters of the tiered orthogonal-axes instance on which overseeding
/// needs many rounds to reach cost zero.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerBoundParams {
    /// Number of optimal clusters: the origin plus `k - 1` axis points.
    pub k: usize,
    /// Tier base `L`; tier `i` points sit at distance `L^(T-i+1)`.
    pub base: f64,
    /// Number of tiers `T`.
    pub tiers: usize,
    /// Copies of the origin.
    pub origin_multiplicity: usize,
}

impl LowerBoundParams {
    /// Uses `9·(k-1)` origin copies, so a uniform first center lands on the
    /// origin with probability at least 0.9.
    pub fn new(k: usize, base: f64, tiers: usize) -> Self {
        Self {
            k,
            base,
            tiers,
            origin_multiplicity: 9 * k.saturating_sub(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid("lower-bound instance needs k >= 2"));
        }
        if !(self.base > 1.0) || !self.base.is_finite() {
            return Err(Error::invalid(format!("L must be > 1, got {}", self.base)));
        }
        if self.tiers == 0 || self.tiers > self.k - 1 {
            return Err(Error::invalid(format!(
                "T must be in 1..={} (one point per tier at least), got {}",
                self.k - 1,
                self.tiers
            )));
        }
        if self.origin_multiplicity == 0 {
            return Err(Error::invalid("origin multiplicity must be >= 1"));
        }
        let log10_max = 2.0 * self.tiers as f64 * self.base.log10();
        if log10_max > MAX_SQUARED_NORM.log10() {
            return Err(Error::invalid(format!(
                "largest squared norm L^(2T) = 10^{log10_max:.1} exceeds the bound 1e300"
            )));
        }
        Ok(())
    }

    /// Points per tier: `k - 1` split as evenly as possible, earlier tiers
    /// taking the remainder.
    pub fn tier_sizes(&self) -> Vec<usize> {
        let points = self.k - 1;
        let (each, extra) = (points / self.tiers, points % self.tiers);
        (0..self.tiers).map(|i| each + usize::from(i < extra)).collect()
    }

    /// Distance from the origin of tier `i` (1-based) points.
    pub fn tier_coordinate(&self, tier: usize) -> f64 {
        self.base.powi((self.tiers - tier + 1) as i32)
    }

    pub fn largest_squared_norm(&self) -> f64 {
        self.base.powi(2 * self.tiers as i32)
    }
}

/// Builds the instance: `origin_multiplicity` points at the origin and `k - 1`
/// points each on its own coordinate axis of `R^(k-1)`, tier by tier. The
/// ground truth puts the origin copies in one cluster and every axis point in
/// its own, so `φ* = 0`.
pub fn gen_lower_bound(p: &LowerBoundParams) -> Result<Dataset> {
    p.validate()?;
    let largest = p.largest_squared_norm();
    if largest > WARN_SQUARED_NORM {
        warn!("lower-bound instance reaches squared norm {largest:e}; precision may suffer");
    }
    let dim = p.k - 1;
    let n = p.origin_multiplicity + dim;
    let mut coords = vec![0.0; n * dim];
    let mut labels = vec![0; p.origin_multiplicity];
    let mut axis = 0;
    for (t, size) in p.tier_sizes().into_iter().enumerate() {
        let value = p.tier_coordinate(t + 1);
        for _ in 0..size {
            let row = p.origin_multiplicity + axis;
            coords[row * dim + axis] = value;
            labels.push(axis + 1);
            axis += 1;
        }
    }
    let x = Dataset::new(dim, coords)?.with_label(format!(
        "lower-bound k={} L={} T={} origin={}",
        p.k, p.base, p.tiers, p.origin_multiplicity
    ));
    let truth = GroundTruth::from_labels(&x, labels)?;
    x.with_ground_truth(truth)
}
