//! k-means|| overseeding rounds and the full two-phase pipeline.

use std::io::{self, Write};

use crate::diagnostics::{write_trace, RoundTrace};
use crate::error::{Error, Result};
use crate::geometry::{assign_nearest, CenterSet, CostCache, Dataset, Points};
use crate::sampling::{bernoulli_select, sample_uniform, RngStream};
use crate::seeding::{kmeanspp, WeightedInstance};

/// Parameters of an overseeding run.
#[derive(Clone, Debug, PartialEq)]
pub struct OverseedConfig {
    /// Number of sampling rounds `t`.
    pub rounds: usize,
    /// Oversampling factor `ℓ`.
    pub ell: f64,
    /// Number of centers the reduction step produces.
    pub k: usize,
    /// Initial centers used instead of one uniform sample.
    pub warm_start: Option<CenterSet>,
    pub stop_when_cost_zero: bool,
    /// Stop once `φ_X(C)` is at most this value.
    pub stop_at_cost: Option<f64>,
}

impl OverseedConfig {
    pub fn new(rounds: usize, ell: f64, k: usize) -> Self {
        Self {
            rounds,
            ell,
            k,
            warm_start: None,
            stop_when_cost_zero: false,
            stop_at_cost: None,
        }
    }

    pub fn with_warm_start(mut self, centers: CenterSet) -> Self {
        self.warm_start = Some(centers);
        self
    }

    pub fn stopping_at_zero(mut self) -> Self {
        self.stop_when_cost_zero = true;
        self
    }

    pub fn stopping_at(mut self, cost: f64) -> Self {
        self.stop_at_cost = Some(cost);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ell > 0.0) || !self.ell.is_finite() {
            return Err(Error::invalid(format!("ell must be finite and > 0, got {}", self.ell)));
        }
        if self.k == 0 {
            return Err(Error::invalid("k must be >= 1"));
        }
        if let Some(w) = &self.warm_start {
            if w.is_empty() {
                return Err(Error::invalid("warm start center set is empty"));
            }
        }
        if let Some(c) = self.stop_at_cost {
            if !(c >= 0.0) {
                return Err(Error::invalid("stop cost must be >= 0"));
            }
        }
        Ok(())
    }

    /// Whether a run should stop before the next round given the current cost.
    pub fn should_stop(&self, total_cost: f64) -> bool {
        (self.stop_when_cost_zero && total_cost == 0.0)
            || self.stop_at_cost.is_some_and(|c| total_cost <= c)
    }
}

/// Output of overseeding.
#[derive(Clone, Debug, PartialEq)]
pub struct OverseedResult {
    /// The oversampled center set `B`.
    pub centers: CenterSet,
    /// State right after initialization (round 0).
    pub initial: RoundTrace,
    /// One entry per executed sampling round.
    pub per_round: Vec<RoundTrace>,
    pub final_cost: f64,
}

impl OverseedResult {
    pub fn rounds_executed(&self) -> usize {
        self.per_round.len()
    }

    /// Round 0 followed by every sampling round.
    pub fn trace(&self) -> impl Iterator<Item = &RoundTrace> {
        std::iter::once(&self.initial).chain(&self.per_round)
    }

    pub fn trace_mut(&mut self) -> impl Iterator<Item = &mut RoundTrace> {
        std::iter::once(&mut self.initial).chain(&mut self.per_round)
    }

    pub fn write_trace<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write_trace(out, self.trace())
    }

    /// Number of centers present before the first sampling round.
    pub fn initial_centers(&self) -> usize {
        self.initial.centers
    }

    /// First round (0 = after initialization) whose cost is at most
    /// `threshold`.
    pub fn first_round_at_most(&self, threshold: f64) -> Option<usize> {
        self.trace().find(|t| t.cost <= threshold).map(|t| t.round)
    }
}

/// Starting center set: the warm start if given, else one uniformly sampled
/// point (drawn from `(round 0, counter 0)` of the stream).
pub(crate) fn initial_centers(
    len: usize,
    dim: usize,
    cfg: &OverseedConfig,
    stream: &RngStream,
) -> Result<InitialChoice> {
    match &cfg.warm_start {
        Some(w) => {
            if w.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: w.dim(),
                });
            }
            Ok(InitialChoice::Warm(w.clone()))
        }
        None => Ok(InitialChoice::Uniform(sample_uniform(len, &mut stream.draws(0))?)),
    }
}

pub(crate) enum InitialChoice {
    Warm(CenterSet),
    Uniform(usize),
}

/// Overseeding: start from one uniform sample (or the warm start), then run
/// `t` rounds that each add every point independently with probability
/// `min(1, ℓ·φ_x(C)/φ_X(C))`, computed from the costs at the start of the
/// round. Selected points are appended in ascending index order.
pub fn overseed(x: &Dataset, cfg: &OverseedConfig, stream: &RngStream) -> Result<OverseedResult> {
    cfg.validate()?;
    if x.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    let mut centers = match initial_centers(x.len(), x.dim(), cfg, stream)? {
        InitialChoice::Warm(w) => w,
        InitialChoice::Uniform(i) => CenterSet::from_indices(x, &[i], 0),
    };
    let mut taken = vec![false; x.len()];
    for i in centers.source_indices() {
        if i < taken.len() {
            taken[i] = true;
        }
    }
    let mut cache = CostCache::new(x, &centers)?;
    let initial = RoundTrace::new(0, centers.len(), centers.len(), cache.total_cost());
    let mut per_round = Vec::with_capacity(cfg.rounds);

    for round in 1..=cfg.rounds {
        let total = cache.total_cost();
        if cfg.should_stop(total) {
            break;
        }
        let mut added = 0;
        if total > 0.0 {
            let selected = bernoulli_select(
                cache.nearest_sq_dist().iter().copied().enumerate(),
                total,
                cfg.ell,
                round as u64,
                stream,
            );
            let fresh: Vec<usize> = selected.into_iter().filter(|&i| !taken[i]).collect();
            for &i in &fresh {
                taken[i] = true;
            }
            let batch = CenterSet::from_indices(x, &fresh, round);
            cache.extend(x, &batch)?;
            for (p, prov) in batch.iter().zip(batch.provenance()) {
                centers.push(p, *prov)?;
            }
            added = fresh.len();
        }
        per_round.push(RoundTrace::new(round, centers.len(), added, cache.total_cost()));
    }

    Ok(OverseedResult {
        final_cost: cache.total_cost(),
        centers,
        initial,
        per_round,
    })
}

/// Weights each center of `B` by the number of points whose nearest center
/// (ties to the lowest ordinal) it is.
pub fn weigh_centers<P: Points + ?Sized>(x: &P, b: &CenterSet) -> Result<WeightedInstance> {
    let assignment = assign_nearest(x, b)?;
    let mut counts = vec![0usize; b.len()];
    for c in assignment {
        counts[c] += 1;
    }
    WeightedInstance::new(b.clone(), counts.into_iter().map(|c| c as f64).collect())
}

/// Output of the full k-means|| pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct ParallelOutcome {
    /// Final centers, at most `k` of them.
    pub centers: CenterSet,
    /// Set when `B` had fewer than `k` distinct points.
    pub shortfall: Option<usize>,
    pub weighted: WeightedInstance,
    pub overseed: OverseedResult,
}

/// Reduction phase: weigh `B` against `X` and run weighted k-means++.
pub fn reduce(
    x: &Dataset,
    overseeded: OverseedResult,
    k: usize,
    stream: &RngStream,
) -> Result<ParallelOutcome> {
    let weighted = weigh_centers(x, &overseeded.centers)?;
    let seeding = kmeanspp(&weighted, k, stream)?;
    Ok(ParallelOutcome {
        centers: seeding.centers,
        shortfall: seeding.shortfall,
        weighted,
        overseed: overseeded,
    })
}

/// k-means||: overseeding followed by weighted k-means++ on the result.
/// The two phases use the `"overseed"` and `"reduce"` children of `stream`.
pub fn kmeans_parallel(
    x: &Dataset,
    cfg: &OverseedConfig,
    stream: &RngStream,
) -> Result<ParallelOutcome> {
    if cfg.k > x.len() {
        return Err(Error::invalid(format!(
            "k = {} exceeds the number of points {}",
            cfg.k,
            x.len()
        )));
    }
    let overseeded = overseed(x, cfg, &overseed_stream(stream))?;
    reduce(x, overseeded, cfg.k, &reduce_stream(stream))
}

pub fn overseed_stream(stream: &RngStream) -> RngStream {
    stream.named("overseed")
}

pub fn reduce_stream(stream: &RngStream) -> RngStream {
    stream.named("reduce")
}
