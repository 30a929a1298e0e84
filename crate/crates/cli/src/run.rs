//! Replicated pipeline runs and their summary statistics.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;

use kmpar_core::diagnostics::{annotate_trace, fmt_real, gamma_of, HeavyRule};
use kmpar_core::mpcsim::{run_distributed_overseed, shard_dataset, CommLedger, Execution, ShardPolicy};
use kmpar_core::overseed::{overseed_stream, reduce, reduce_stream};
use kmpar_core::{cost, Dataset, OverseedConfig, OverseedResult, Points, RngStream};

#[derive(Clone, Debug)]
pub struct RunPlan {
    pub cfg: OverseedConfig,
    pub replicates: usize,
    pub seed: u64,
    pub shards: usize,
    pub policy: ShardPolicy,
    pub heavy_rule: HeavyRule,
}

#[derive(Clone, Debug)]
pub struct Replicate {
    pub index: usize,
    pub overseed: OverseedResult,
    pub ledger: CommLedger,
    pub final_cost: f64,
    pub final_centers: usize,
    pub shortfall: Option<usize>,
    pub rounds_to_20: Option<usize>,
    pub rounds_to_zero: Option<usize>,
}

/// Stream of replicate `r`: child `r` of the master seed.
pub fn replicate_stream(seed: u64, r: usize) -> RngStream {
    RngStream::new(seed).derive(r as u64)
}

fn run_one(x: &Dataset, plan: &RunPlan, shards: &[kmpar_core::mpcsim::Shard], r: usize) -> Result<Replicate> {
    let stream = replicate_stream(plan.seed, r);
    let (mut ov, ledger) =
        run_distributed_overseed(shards, &plan.cfg, &overseed_stream(&stream), Execution::Sequential)?;
    let phi_star = x.ground_truth().map(|t| t.phi_star());
    if x.ground_truth().is_some() {
        annotate_trace(x, &mut ov, plan.cfg.k, plan.heavy_rule)?;
    }
    let rounds_to_20 = phi_star.and_then(|p| ov.first_round_at_most(20.0 * p));
    let rounds_to_zero = ov.first_round_at_most(0.0);
    let out = reduce(x, ov, plan.cfg.k, &reduce_stream(&stream))?;
    Ok(Replicate {
        index: r,
        final_cost: cost(x, &out.centers)?,
        final_centers: out.centers.len(),
        shortfall: out.shortfall,
        overseed: out.overseed,
        ledger,
        rounds_to_20,
        rounds_to_zero,
    })
}

/// Runs every replicate concurrently; results come back in replicate order.
pub fn run_replicates(x: &Dataset, plan: &RunPlan) -> Result<Vec<Replicate>> {
    anyhow::ensure!(plan.replicates >= 1, "replicates must be >= 1");
    anyhow::ensure!(
        plan.cfg.k <= x.len(),
        "k = {} exceeds the number of points {}",
        plan.cfg.k,
        x.len()
    );
    let shards = shard_dataset(x, plan.shards, plan.policy)?;
    (0..plan.replicates)
        .into_par_iter()
        .map(|r| run_one(x, plan, &shards, r))
        .collect()
}

pub const SUMMARY_HEADER: &str = "instance,L,T,n,dim,k,ell,rounds,shards,replicates,seed,phistar,gamma,\
final_cost_mean,final_cost_p10,final_cost_p50,final_cost_p90,overseed_cost_mean,centers_mean,\
rounds_executed_mean,rounds_to_20phistar_median,rounds_to_zero_median,reached_20phistar,reached_zero";

pub const REPLICATES_HEADER: &str =
    "replicate,final_cost,overseed_cost,centers,final_centers,shortfall,rounds_executed,rounds_to_20phistar,rounds_to_zero";

/// Identifies the instance in summary rows.
#[derive(Clone, Debug, Default)]
pub struct InstanceInfo {
    pub name: String,
    pub base: Option<f64>,
    pub tiers: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Summary {
    pub instance: InstanceInfo,
    pub n: usize,
    pub dim: usize,
    pub k: usize,
    pub ell: f64,
    pub rounds: usize,
    pub shards: usize,
    pub replicates: usize,
    pub seed: u64,
    pub phi_star: Option<f64>,
    pub gamma: Option<f64>,
    pub final_cost_mean: f64,
    pub final_cost_p10: f64,
    pub final_cost_p50: f64,
    pub final_cost_p90: f64,
    pub overseed_cost_mean: f64,
    pub centers_mean: f64,
    pub rounds_executed_mean: f64,
    pub rounds_to_20_median: Option<f64>,
    pub rounds_to_zero_median: Option<f64>,
    pub reached_20: usize,
    pub reached_zero: usize,
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    if lo == hi || sorted[lo] == sorted[hi] {
        return sorted[lo];
    }
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Median of optional round counts, where a missing value means the target
/// was never reached. `None` when the median itself is unreached.
pub fn median_rounds(values: impl Iterator<Item = Option<usize>>) -> Option<f64> {
    let mut v: Vec<f64> = values.map(|r| r.map_or(f64::INFINITY, |r| r as f64)).collect();
    v.sort_by(f64::total_cmp);
    let m = percentile(&v, 0.5);
    m.is_finite().then_some(m)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    kmpar_core::geometry::exact_sum(v.iter().copied()) / v.len() as f64
}

pub fn summarize(x: &Dataset, instance: InstanceInfo, plan: &RunPlan, reps: &[Replicate]) -> Result<Summary> {
    let mut finals: Vec<f64> = reps.iter().map(|r| r.final_cost).collect();
    finals.sort_by(f64::total_cmp);
    let gamma = if x.ground_truth().is_some() {
        gamma_of(x)?
    } else {
        None
    };
    Ok(Summary {
        instance,
        n: x.len(),
        dim: x.dim(),
        k: plan.cfg.k,
        ell: plan.cfg.ell,
        rounds: plan.cfg.rounds,
        shards: plan.shards,
        replicates: reps.len(),
        seed: plan.seed,
        phi_star: x.ground_truth().map(|t| t.phi_star()),
        gamma,
        final_cost_mean: mean(finals.iter().copied()),
        final_cost_p10: percentile(&finals, 0.1),
        final_cost_p50: percentile(&finals, 0.5),
        final_cost_p90: percentile(&finals, 0.9),
        overseed_cost_mean: mean(reps.iter().map(|r| r.overseed.final_cost)),
        centers_mean: mean(reps.iter().map(|r| r.overseed.centers.len() as f64)),
        rounds_executed_mean: mean(reps.iter().map(|r| r.overseed.rounds_executed() as f64)),
        rounds_to_20_median: if x.ground_truth().is_some() {
            median_rounds(reps.iter().map(|r| r.rounds_to_20))
        } else {
            None
        },
        rounds_to_zero_median: median_rounds(reps.iter().map(|r| r.rounds_to_zero)),
        reached_20: reps.iter().filter(|r| r.rounds_to_20.is_some()).count(),
        reached_zero: reps.iter().filter(|r| r.rounds_to_zero.is_some()).count(),
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_real(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

impl Summary {
    pub fn to_csv_row(&self) -> String {
        [
            self.instance.name.replace(',', ";"),
            opt(self.instance.base),
            opt(self.instance.tiers),
            self.n.to_string(),
            self.dim.to_string(),
            self.k.to_string(),
            fmt_real(self.ell),
            self.rounds.to_string(),
            self.shards.to_string(),
            self.replicates.to_string(),
            self.seed.to_string(),
            opt_real(self.phi_star),
            opt_real(self.gamma),
            fmt_real(self.final_cost_mean),
            fmt_real(self.final_cost_p10),
            fmt_real(self.final_cost_p50),
            fmt_real(self.final_cost_p90),
            fmt_real(self.overseed_cost_mean),
            fmt_real(self.centers_mean),
            fmt_real(self.rounds_executed_mean),
            opt(self.rounds_to_20_median),
            opt(self.rounds_to_zero_median),
            self.reached_20.to_string(),
            self.reached_zero.to_string(),
        ]
        .join(",")
    }
}

impl Replicate {
    pub fn to_csv_row(&self) -> String {
        [
            self.index.to_string(),
            fmt_real(self.final_cost),
            fmt_real(self.overseed.final_cost),
            self.overseed.centers.len().to_string(),
            self.final_centers.to_string(),
            opt(self.shortfall),
            self.overseed.rounds_executed().to_string(),
            opt(self.rounds_to_20),
            opt(self.rounds_to_zero),
        ]
        .join(",")
    }
}

/// Writes `path` through a temporary file and a rename.
pub fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let file = File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        let mut w = BufWriter::new(file);
        body(&mut w).with_context(|| format!("writing {}", tmp.display()))?;
        w.flush()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

pub fn trace_path(dir: &Path, r: usize) -> PathBuf {
    dir.join(format!("trace_{r:04}.csv"))
}

pub fn ledger_path(dir: &Path, r: usize) -> PathBuf {
    dir.join(format!("ledger_{r:04}.csv"))
}

/// Per-replicate traces and ledgers, then `replicates.csv`.
pub fn write_replicates(dir: &Path, reps: &[Replicate]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    reps.par_iter().try_for_each(|r| -> Result<()> {
        write_file(&trace_path(dir, r.index), |mut w| r.overseed.write_trace(&mut w))?;
        write_file(&ledger_path(dir, r.index), |mut w| r.ledger.write_csv(&mut w))
    })?;
    write_file(&dir.join("replicates.csv"), |w| {
        writeln!(w, "{REPLICATES_HEADER}")?;
        for r in reps {
            writeln!(w, "{}", r.to_csv_row())?;
        }
        Ok(())
    })
}

pub fn write_summary(path: &Path, rows: &[Summary]) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "{SUMMARY_HEADER}")?;
        for s in rows {
            writeln!(w, "{}", s.to_csv_row())?;
        }
        Ok(())
    })
}
