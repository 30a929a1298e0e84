use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::Dataset;
use crate::sampling::RngStream;

/// Equal-size Gaussian clusters around the scaled vertices `scale·e_i` of a
/// simplex in `R^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexParams {
    pub k: usize,
    pub points_per_cluster: usize,
    pub scale: f64,
    pub noise_sigma: f64,
}

impl SimplexParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid("simplex instance needs k >= 2"));
        }
        if self.points_per_cluster == 0 {
            return Err(Error::invalid("points per cluster must be >= 1"));
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::invalid(format!("scale must be > 0, got {}", self.scale)));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::invalid(format!(
                "noise sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Generates the clusters point by point, cluster after cluster. Ground truth
/// is the generating partition, with `C*` the per-cluster centroids of the
/// generated points and `φ* = φ_X(C*)`.
pub fn gen_simplex(p: &SimplexParams, stream: &RngStream) -> Result<Dataset> {
    p.validate()?;
    let normal = Normal::new(0.0, p.noise_sigma)
        .map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;
    let mut draws = stream.named("simplex").draws(0);
    let n = p.k * p.points_per_cluster;
    let mut coords = Vec::with_capacity(n * p.k);
    let mut labels = Vec::with_capacity(n);
    for cluster in 0..p.k {
        for _ in 0..p.points_per_cluster {
            for axis in 0..p.k {
                let vertex = if axis == cluster { p.scale } else { 0.0 };
                let noise = if p.noise_sigma > 0.0 {
                    normal.sample(&mut draws)
                } else {
                    0.0
                };
                coords.push(vertex + noise);
            }
            labels.push(cluster);
        }
    }
    Dataset::new(p.k, coords)?
        .with_label(format!(
            "simplex k={} per={} scale={} sigma={}",
            p.k, p.points_per_cluster, p.scale, p.noise_sigma
        ))
        .with_labels(labels)
}
