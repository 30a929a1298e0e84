//! Lemma verifiers driven from the command line.

use anyhow::{bail, Context, Result};
use clap::ValueEnum;

use kmpar_core::diagnostics::{
    settled_report, verify_d2_lemma, verify_settling_lemma, verify_uniform_lemma, LemmaReport,
};
use kmpar_core::geometry::Subset;
use kmpar_core::sampling::sample_uniform;
use kmpar_core::{CenterSet, Dataset, Points, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Lemma {
    Uniform,
    D2,
    MakeSettled,
}

#[derive(Clone, Debug)]
pub struct VerifyPlan {
    pub lemma: Lemma,
    pub trials: usize,
    pub seed: u64,
    pub cluster: Option<usize>,
    pub centers: Option<CenterSet>,
    /// `ℓ` for the settling lemma; defaults to the number of clusters.
    pub ell: Option<f64>,
    pub alpha: Option<f64>,
}

fn cluster_members(x: &Dataset, cluster: Option<usize>) -> Result<Vec<usize>> {
    match (cluster, x.ground_truth()) {
        (None, _) => Ok((0..x.len()).collect()),
        (Some(c), Some(truth)) => truth
            .members()
            .into_iter()
            .nth(c)
            .with_context(|| format!("no ground-truth cluster {c}")),
        (Some(_), None) => bail!("--cluster needs a dataset with ground truth"),
    }
}

/// One point drawn uniformly from `pool`.
fn random_center(x: &Dataset, pool: &[usize], stream: &RngStream) -> Result<CenterSet> {
    let mut draws = stream.named("centers").draws(0);
    let i = pool[sample_uniform(pool.len(), &mut draws)?];
    Ok(CenterSet::from_indices(x, &[i], 0))
}

pub fn verify(x: &Dataset, plan: &VerifyPlan) -> Result<LemmaReport> {
    let stream = RngStream::new(plan.seed);
    let report = match plan.lemma {
        Lemma::Uniform => {
            let a = cluster_members(x, plan.cluster)?;
            verify_uniform_lemma(&Subset::new(x, &a), plan.trials, &stream)?
        }
        Lemma::D2 => {
            let cluster = plan.cluster.or(x.ground_truth().map(|_| 0));
            let a = cluster_members(x, cluster)?;
            let c = match &plan.centers {
                Some(c) => c.clone(),
                None => {
                    let outside: Vec<usize> = (0..x.len()).filter(|i| !a.contains(i)).collect();
                    let pool: Vec<usize> = if outside.is_empty() { (0..x.len()).collect() } else { outside };
                    random_center(x, &pool, &stream)?
                }
            };
            verify_d2_lemma(&Subset::new(x, &a), &c, plan.trials, &stream)?
        }
        Lemma::MakeSettled => {
            let truth = x
                .ground_truth()
                .context("the settling lemma needs a dataset with ground truth")?;
            let c = match &plan.centers {
                Some(c) => c.clone(),
                None => random_center(x, &(0..x.len()).collect::<Vec<_>>(), &stream)?,
            };
            let cluster = match plan.cluster {
                Some(c) => c,
                None => {
                    let report = settled_report(x, &c)?;
                    report
                        .unsettled_indices()
                        .max_by(|&a, &b| report.clusters[a].cost.total_cmp(&report.clusters[b].cost))
                        .context("every cluster is already settled")?
                }
            };
            let k = truth.cluster_count() as f64;
            let ell = plan.ell.unwrap_or(plan.alpha.unwrap_or(1.0) * k);
            verify_settling_lemma(x, &c, cluster, ell, plan.trials, &stream)?
        }
    };
    Ok(report)
}
