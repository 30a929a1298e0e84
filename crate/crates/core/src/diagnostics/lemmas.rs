use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::{centroid, cost, sq_dist, CenterSet, CostCache, Dataset, Points, Subset};
use crate::sampling::{bernoulli_select, pick_proportional, sample_uniform, RngStream};

use super::settled::{require_truth, ClusterState};

/// Smallest trial count the verifiers accept.
pub const MIN_TRIALS: usize = 1000;

/// Outcome of a Monte-Carlo check of an upper bound on an expectation or
/// probability.
#[derive(Clone, Debug, PartialEq)]
pub struct LemmaReport {
    pub name: String,
    pub empirical: f64,
    pub bound: f64,
    /// Standard error of `empirical`.
    pub sigma: f64,
    pub trials: usize,
    pub pass: bool,
}

impl LemmaReport {
    /// One-sided check `empirical ≤ bound + 4σ̂`, with a relative slack of
    /// 1e-12 for rounding in the bound itself.
    pub fn new(name: &str, empirical: f64, bound: f64, sigma: f64, trials: usize) -> Self {
        let pass = empirical <= bound + 4.0 * sigma + 1e-12 * bound.abs();
        Self {
            name: name.to_string(),
            empirical,
            bound,
            sigma,
            trials,
            pass,
        }
    }
}

impl fmt::Display for LemmaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "name {}", self.name)?;
        writeln!(f, "empirical {:e}", self.empirical)?;
        writeln!(f, "bound {:e}", self.bound)?;
        writeln!(f, "sigma {:e}", self.sigma)?;
        writeln!(f, "trials {}", self.trials)?;
        writeln!(f, "pass {}", self.pass)
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::invalid(format!(
            "at least {MIN_TRIALS} trials required, got {trials}"
        )));
    }
    Ok(())
}

/// Mean and standard error of samples drawn from a finite outcome table.
fn mean_and_error(values: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for v in values {
        n += 1;
        let delta = v - mean;
        mean += delta / n as f64;
        m2 += delta * (v - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    (mean, (var / n as f64).sqrt(), n)
}

fn single_center_cost<P: Points + ?Sized>(a: &P, center: &[f64]) -> f64 {
    (0..a.len()).map(|i| sq_dist(a.point(i), center)).sum()
}

fn centroid_cost<P: Points + ?Sized>(a: &P) -> Result<f64> {
    let mu = centroid(a)?;
    Ok(single_center_cost(a, &mu))
}

/// `E[φ_A({p})] ≤ 2·φ_A(μ_A)` for `p` uniform over `A`.
pub fn verify_uniform_lemma<P: Points + ?Sized>(
    a: &P,
    trials: usize,
    stream: &RngStream,
) -> Result<LemmaReport> {
    check_trials(trials)?;
    if a.is_empty() {
        return Err(Error::invalid("point set is empty"));
    }
    let outcomes: Vec<f64> = (0..a.len())
        .map(|i| single_center_cost(a, a.point(i)))
        .collect();
    let bound = 2.0 * centroid_cost(a)?;
    let mut draws = stream.draws(0);
    let mut picks = Vec::with_capacity(trials);
    for _ in 0..trials {
        picks.push(outcomes[sample_uniform(a.len(), &mut draws)?]);
    }
    let (mean, sigma, n) = mean_and_error(picks.into_iter());
    Ok(LemmaReport::new("uniform", mean, bound, sigma, n))
}

/// `E[φ_A(C ∪ {p})] ≤ 8·φ_A(μ_A)` for `p` drawn from the D² distribution
/// restricted to `A`.
pub fn verify_d2_lemma<P, C>(a: &P, c: &C, trials: usize, stream: &RngStream) -> Result<LemmaReport>
where
    P: Points + Sync + ?Sized,
    C: Points + Sync + ?Sized,
{
    check_trials(trials)?;
    if a.is_empty() {
        return Err(Error::invalid("point set is empty"));
    }
    let cache = CostCache::new(a, c)?;
    if cache.total_cost() == 0.0 {
        return Err(Error::Degenerate(
            "every point of A is already a center".into(),
        ));
    }
    let base = cache.nearest_sq_dist();
    let outcomes: Vec<f64> = (0..a.len())
        .map(|p| {
            (0..a.len())
                .map(|y| base[y].min(sq_dist(a.point(y), a.point(p))))
                .sum()
        })
        .collect();
    let bound = 8.0 * centroid_cost(a)?;
    let mut draws = stream.draws(0);
    let mut picks = Vec::with_capacity(trials);
    for _ in 0..trials {
        let i = pick_proportional(base, draws.next_unit()).expect("positive total cost");
        picks.push(outcomes[i]);
    }
    let (mean, sigma, n) = mean_and_error(picks.into_iter());
    Ok(LemmaReport::new("d2", mean, bound, sigma, n))
}

/// Probability that the ground-truth cluster `cluster`, unsettled with
/// respect to `c`, is still unsettled after one oversampling round with
/// factor `ell` is at most `exp(−ℓ·φ_A(C) / (5·φ_X(C)))`.
///
/// Trial `i` uses round 1 of `stream.derive(i)`.
pub fn verify_settling_lemma(
    x: &Dataset,
    c: &CenterSet,
    cluster: usize,
    ell: f64,
    trials: usize,
    stream: &RngStream,
) -> Result<LemmaReport> {
    check_trials(trials)?;
    if !(ell > 0.0) || !ell.is_finite() {
        return Err(Error::invalid(format!("ell must be finite and > 0, got {ell}")));
    }
    let truth = require_truth(x)?;
    let members = truth.members();
    let a = members
        .get(cluster)
        .ok_or_else(|| Error::invalid(format!("no ground-truth cluster {cluster}")))?;
    let optimal = cost(&Subset::new(x, a), truth.centers())?;
    let cache = CostCache::new(x, c)?;
    let total = cache.total_cost();
    let base = cache.nearest_sq_dist();
    let phi_a: f64 = a.iter().map(|&i| base[i]).sum();
    if ClusterState::new(phi_a, optimal).settled {
        return Err(Error::invalid(format!(
            "cluster {cluster} is already settled"
        )));
    }
    let bound = (-ell * phi_a / (5.0 * total)).exp();

    let mut stays = 0usize;
    for t in 0..trials {
        let chosen = bernoulli_select(
            base.iter().copied().enumerate(),
            total,
            ell,
            1,
            &stream.derive(t as u64),
        );
        let after: f64 = a
            .iter()
            .map(|&y| {
                let p = x.point(y);
                chosen
                    .iter()
                    .map(|&q| sq_dist(p, x.point(q)))
                    .fold(base[y], f64::min)
            })
            .sum();
        if !ClusterState::new(after, optimal).settled {
            stays += 1;
        }
    }
    let freq = stays as f64 / trials as f64;
    let sigma = (freq * (1.0 - freq) / trials as f64).sqrt();
    Ok(LemmaReport::new("make-settled", freq, bound, sigma, trials))
}
