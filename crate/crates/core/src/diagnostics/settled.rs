use crate::error::{Error, Result};
use crate::geometry::{exact_sum, CenterSet, CostCache, Dataset, GroundTruth, Points, Subset};
use crate::overseed::OverseedResult;

use super::oracle::gamma_with;

/// Settled state of one optimal cluster `A`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterState {
    /// `φ_A(C)`
    pub cost: f64,
    /// `φ_A(C*)`
    pub optimal_cost: f64,
    /// `φ_A(C) ≤ 10·φ_A(C*)`
    pub settled: bool,
}

impl ClusterState {
    pub fn new(cost: f64, optimal_cost: f64) -> Self {
        Self {
            cost,
            optimal_cost,
            settled: cost <= 10.0 * optimal_cost,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SettledReport {
    pub clusters: Vec<ClusterState>,
    /// `φ_U`: total cost of unsettled clusters.
    pub unsettled_cost: f64,
    pub unsettled: usize,
}

impl SettledReport {
    pub fn from_clusters(clusters: Vec<ClusterState>) -> Self {
        let unsettled_cost = exact_sum(clusters.iter().filter(|c| !c.settled).map(|c| c.cost));
        let unsettled = clusters.iter().filter(|c| !c.settled).count();
        Self {
            clusters,
            unsettled_cost,
            unsettled,
        }
    }

    pub fn unsettled_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.clusters
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.settled)
            .map(|(i, _)| i)
    }
}

/// Precomputed per-cluster membership and optimal costs for repeated reports
/// on one dataset.
#[derive(Clone, Debug)]
pub struct SettleTracker {
    members: Vec<Vec<usize>>,
    optimal: Vec<f64>,
}

impl SettleTracker {
    pub fn new(x: &Dataset) -> Result<Self> {
        let truth = require_truth(x)?;
        let members = truth.members();
        let optimal = members
            .iter()
            .map(|m| crate::geometry::cost(&Subset::new(x, m), truth.centers()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { members, optimal })
    }

    pub fn members(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn optimal_costs(&self) -> &[f64] {
        &self.optimal
    }

    /// Report from per-point costs `φ_x(C)`.
    pub fn report(&self, point_costs: &[f64]) -> SettledReport {
        let clusters = self
            .members
            .iter()
            .zip(&self.optimal)
            .map(|(m, &opt)| ClusterState::new(exact_sum(m.iter().map(|&i| point_costs[i])), opt))
            .collect();
        SettledReport::from_clusters(clusters)
    }
}

pub(crate) fn require_truth(x: &Dataset) -> Result<&GroundTruth> {
    x.ground_truth()
        .ok_or_else(|| Error::invalid("dataset has no ground truth"))
}

/// Which optimal clusters are settled with respect to `centers`.
pub fn settled_report(x: &Dataset, centers: &CenterSet) -> Result<SettledReport> {
    let tracker = SettleTracker::new(x)?;
    let cache = CostCache::new(x, centers)?;
    Ok(tracker.report(cache.nearest_sq_dist()))
}

/// Cost threshold separating light from heavy unsettled clusters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HeavyRule {
    /// Heavy when `φ_A ≥ φ_U / k`.
    #[default]
    Sharp,
    /// Heavy when `φ_A ≥ φ_U / (2k)`.
    Simple,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClusterTag {
    Light,
    Heavy,
    /// Heavy and at least the massive threshold `ζ`.
    Massive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterClassification {
    /// `(cluster index, tag)` for every unsettled cluster.
    pub tags: Vec<(usize, ClusterTag)>,
    /// Share of `φ_U` carried by light clusters.
    pub alpha: f64,
    pub heavy_threshold: f64,
    /// `ζ = (lg γ)^(1/10) · φ_U / k`; infinite when `γ` is undefined.
    pub massive_threshold: f64,
}

impl ClusterClassification {
    fn empty() -> Self {
        Self {
            tags: Vec::new(),
            alpha: 0.0,
            heavy_threshold: 0.0,
            massive_threshold: f64::INFINITY,
        }
    }

    pub fn count(&self, tag: ClusterTag) -> usize {
        self.tags.iter().filter(|(_, t)| *t == tag).count()
    }

    /// Heavy clusters, massive ones included.
    pub fn heavy_count(&self) -> usize {
        self.tags.iter().filter(|(_, t)| *t != ClusterTag::Light).count()
    }

    pub fn massive_count(&self) -> usize {
        self.count(ClusterTag::Massive)
    }
}

/// Tags unsettled clusters light, heavy or massive. `gamma` is `None` when
/// `φ* = 0`, in which case no cluster is massive.
pub fn classify(
    report: &SettledReport,
    k: usize,
    gamma: Option<f64>,
    rule: HeavyRule,
) -> Result<ClusterClassification> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if let Some(g) = gamma {
        if !(g > 1.0) {
            return Err(Error::invalid(format!("gamma must be > 1, got {g}")));
        }
    }
    let phi_u = report.unsettled_cost;
    if !(phi_u > 0.0) {
        return Ok(ClusterClassification::empty());
    }
    let per_cluster = phi_u / k as f64;
    let heavy_threshold = match rule {
        HeavyRule::Sharp => per_cluster,
        HeavyRule::Simple => per_cluster / 2.0,
    };
    let massive_threshold = gamma.map_or(f64::INFINITY, |g| g.log2().powf(0.1) * per_cluster);
    let mut light = Vec::new();
    let tags = report
        .unsettled_indices()
        .map(|i| {
            let c = report.clusters[i].cost;
            let tag = if c < heavy_threshold {
                light.push(c);
                ClusterTag::Light
            } else if c >= massive_threshold {
                ClusterTag::Massive
            } else {
                ClusterTag::Heavy
            };
            (i, tag)
        })
        .collect();
    Ok(ClusterClassification {
        tags,
        alpha: exact_sum(light) / phi_u,
        heavy_threshold,
        massive_threshold,
    })
}

/// Fills the ground-truth columns of every trace row by replaying the center
/// prefixes recorded in the trace.
pub fn annotate_trace(
    x: &Dataset,
    result: &mut OverseedResult,
    k: usize,
    rule: HeavyRule,
) -> Result<()> {
    let truth = require_truth(x)?;
    let gamma = gamma_with(x, truth.phi_star())?;
    let tracker = SettleTracker::new(x)?;
    let centers = result.centers.clone();
    let mut cache: Option<CostCache> = None;
    for row in result.trace_mut() {
        let upto = row.centers.min(centers.len());
        match cache.as_mut() {
            None => cache = Some(CostCache::new(x, &centers.prefix(upto))?),
            Some(c) => {
                let fresh: Vec<usize> = (c.centers_seen()..upto).collect();
                c.extend(x, &Subset::new(&centers, &fresh))?;
            }
        }
        let costs = cache.as_ref().expect("initialized above").nearest_sq_dist();
        let report = tracker.report(costs);
        let class = classify(&report, k, gamma, rule)?;
        row.unsettled_cost = Some(report.unsettled_cost);
        row.unsettled = Some(report.unsettled);
        row.alpha = Some(class.alpha);
        row.heavy = Some(class.heavy_count());
        row.massive = Some(class.massive_count());
    }
    Ok(())
}
