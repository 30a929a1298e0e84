//! Overseeding as a coordinator/worker protocol over sharded data.
//!
//! Each phase is a barrier-separated exchange. Phase 0 broadcasts the initial
//! centers and gathers local cost partials. Sampling phase `r` broadcasts the
//! global cost, gathers the workers' candidates, broadcasts the accepted
//! batch and gathers the updated partials. Workers draw from the same
//! counter-based streams as the sequential run and partials are combined
//! exactly, so the output matches [`overseed`](crate::overseed::overseed)
//! bit for bit.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{CenterSet, CostCache, Dataset, ExactSum, Points, Provenance};
use crate::overseed::{initial_centers, InitialChoice, OverseedConfig, OverseedResult};
use crate::diagnostics::RoundTrace;
use crate::sampling::{bernoulli_select, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShardPolicy {
    /// Consecutive index ranges, the first `n mod m` of size `⌈n/m⌉`.
    Contiguous,
    /// Each index goes to a shard chosen by a hash of `(seed, index)`.
    Hash { seed: u64 },
}

/// One machine's share of the input.
#[derive(Clone, Debug, PartialEq)]
pub struct Shard {
    pub id: usize,
    /// Global indices in ascending order.
    pub indices: Vec<usize>,
    pub points: Dataset,
}

/// Splits `x` into `m` shards. Shards may be empty when `m > n`.
pub fn shard_dataset(x: &Dataset, m: usize, policy: ShardPolicy) -> Result<Vec<Shard>> {
    if m == 0 {
        return Err(Error::invalid("shard count must be >= 1"));
    }
    let n = x.len();
    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); m];
    match policy {
        ShardPolicy::Contiguous => {
            let (each, extra) = (n / m, n % m);
            let mut start = 0;
            for (s, owned) in owners.iter_mut().enumerate() {
                let size = each + usize::from(s < extra);
                owned.extend(start..start + size);
                start += size;
            }
        }
        ShardPolicy::Hash { seed } => {
            let stream = RngStream::new(seed).named("shard");
            for i in 0..n {
                owners[(stream.bits(0, i as u64) % m as u64) as usize].push(i);
            }
        }
    }
    owners
        .into_iter()
        .enumerate()
        .map(|(id, indices)| {
            let mut coords = Vec::with_capacity(indices.len() * x.dim());
            for &i in &indices {
                coords.extend_from_slice(x.point(i));
            }
            Ok(Shard {
                id,
                points: Dataset::new(x.dim(), coords)?,
                indices,
            })
        })
        .collect()
}

/// Traffic of one coordinator phase, in scalars.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PhaseComm {
    pub phase: usize,
    /// Coordinator to workers, counted once per message.
    pub broadcast_scalars: usize,
    /// Workers to coordinator, summed over workers.
    pub gathered_scalars: usize,
    pub candidate_points_sent: usize,
}

pub const LEDGER_HEADER: &str = "phase,broadcast_scalars,gathered_scalars,candidate_points_sent";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CommLedger {
    pub phases: Vec<PhaseComm>,
}

impl CommLedger {
    pub fn total_broadcast(&self) -> usize {
        self.phases.iter().map(|p| p.broadcast_scalars).sum()
    }

    pub fn total_gathered(&self) -> usize {
        self.phases.iter().map(|p| p.gathered_scalars).sum()
    }

    pub fn total_candidates(&self) -> usize {
        self.phases.iter().map(|p| p.candidate_points_sent).sum()
    }

    /// One row per phase under `LEDGER_HEADER`, then a `total` row.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{LEDGER_HEADER}")?;
        for p in &self.phases {
            writeln!(
                out,
                "{},{},{},{}",
                p.phase, p.broadcast_scalars, p.gathered_scalars, p.candidate_points_sent
            )?;
        }
        writeln!(
            out,
            "total,{},{},{}",
            self.total_broadcast(),
            self.total_gathered(),
            self.total_candidates()
        )
    }
}

/// Whether workers run one after another or concurrently within a phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Sequential,
    Concurrent,
}

struct Worker<'a> {
    shard: &'a Shard,
    cache: Option<CostCache>,
    taken: Vec<bool>,
}

impl Worker<'_> {
    fn start(&mut self, centers: &CenterSet) -> Result<()> {
        for p in centers.provenance() {
            if let Some(src) = p.source {
                if let Ok(local) = self.shard.indices.binary_search(&src) {
                    self.taken[local] = true;
                }
            }
        }
        self.cache = Some(CostCache::new(&self.shard.points, centers)?);
        Ok(())
    }

    fn cache(&self) -> &CostCache {
        self.cache.as_ref().expect("worker started")
    }

    fn partials(&self) -> ExactSum {
        self.cache().total_partials().clone()
    }

    /// Fresh local selections as `(global index, coordinates)`.
    fn select(&mut self, total: f64, ell: f64, round: u64, stream: &RngStream) -> Vec<(usize, Vec<f64>)> {
        if total == 0.0 {
            return Vec::new();
        }
        let costs = self
            .shard
            .indices
            .iter()
            .copied()
            .zip(self.cache().nearest_sq_dist().iter().copied());
        let chosen = bernoulli_select(costs, total, ell, round, stream);
        let mut out = Vec::with_capacity(chosen.len());
        for global in chosen {
            let local = self
                .shard
                .indices
                .binary_search(&global)
                .expect("selection comes from this shard");
            if !self.taken[local] {
                self.taken[local] = true;
                out.push((global, self.shard.points.point(local).to_vec()));
            }
        }
        out
    }

    fn extend(&mut self, batch: &CenterSet) -> Result<()> {
        let points = &self.shard.points;
        self.cache.as_mut().expect("worker started").extend(points, batch)
    }
}

fn for_workers<'a, T, F>(workers: &mut [Worker<'a>], mode: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut Worker<'a>) -> Result<T> + Sync + Send,
{
    match mode {
        Execution::Sequential => workers.iter_mut().map(f).collect(),
        Execution::Concurrent => workers.par_iter_mut().map(f).collect(),
    }
}

fn check_partition(shards: &[Shard], dim: usize) -> Result<usize> {
    if shards.is_empty() {
        return Err(Error::invalid("no shards"));
    }
    let n: usize = shards.iter().map(|s| s.indices.len()).sum();
    let mut seen = vec![false; n];
    for s in shards {
        if s.points.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.points.dim(),
            });
        }
        if s.points.len() != s.indices.len() {
            return Err(Error::invalid(format!("shard {} has mismatched points", s.id)));
        }
        if s.indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!("shard {} indices not ascending", s.id)));
        }
        for &i in &s.indices {
            if i >= n || seen[i] {
                return Err(Error::invalid(format!(
                    "shards do not partition 0..{n}: index {i} repeated or out of range"
                )));
            }
            seen[i] = true;
        }
    }
    if n == 0 {
        return Err(Error::invalid("dataset is empty"));
    }
    Ok(n)
}

/// Runs overseeding over `shards`, which must partition `0..n`. Output is
/// identical to the sequential run on the unsharded data with the same
/// config and stream.
pub fn run_distributed_overseed(
    shards: &[Shard],
    cfg: &OverseedConfig,
    stream: &RngStream,
    mode: Execution,
) -> Result<(OverseedResult, CommLedger)> {
    cfg.validate()?;
    let dim = shards.first().map_or(0, |s| s.points.dim());
    let n = check_partition(shards, dim)?;
    let mut ledger = CommLedger::default();
    let mut workers: Vec<Worker> = shards
        .iter()
        .map(|s| Worker {
            shard: s,
            cache: None,
            taken: vec![false; s.indices.len()],
        })
        .collect();

    // Phase 0: initial centers.
    let mut phase0 = PhaseComm::default();
    let mut centers = match initial_centers(n, dim, cfg, stream)? {
        InitialChoice::Warm(w) => w,
        InitialChoice::Uniform(global) => {
            let shard = shards
                .iter()
                .find(|s| s.indices.binary_search(&global).is_ok())
                .expect("partition covers every index");
            let local = shard.indices.binary_search(&global).expect("found above");
            phase0.gathered_scalars += dim;
            let mut c = CenterSet::new(dim);
            c.push(shard.points.point(local), Provenance::sampled(0, global))?;
            c
        }
    };
    phase0.broadcast_scalars += centers.len() * dim;
    let partials = for_workers(&mut workers, mode, |w| {
        w.start(&centers)?;
        Ok(w.partials())
    })?;
    let mut total = merge_partials(&partials, &mut phase0);
    ledger.phases.push(phase0);
    let initial = RoundTrace::new(0, centers.len(), centers.len(), total);
    let mut per_round = Vec::with_capacity(cfg.rounds);

    for round in 1..=cfg.rounds {
        if cfg.should_stop(total) {
            break;
        }
        let mut comm = PhaseComm {
            phase: round,
            broadcast_scalars: 1,
            ..PhaseComm::default()
        };
        let candidates = for_workers(&mut workers, mode, |w| {
            Ok(w.select(total, cfg.ell, round as u64, stream))
        })?;
        let mut merged: Vec<(usize, Vec<f64>)> = candidates.into_iter().flatten().collect();
        merged.sort_unstable_by_key(|(i, _)| *i);
        comm.candidate_points_sent = merged.len();
        comm.gathered_scalars += merged.len() * (dim + 1);

        let mut batch = CenterSet::new(dim);
        for (global, coords) in &merged {
            batch.push(coords, Provenance::sampled(round, *global))?;
        }
        if !batch.is_empty() {
            comm.broadcast_scalars += batch.len() * dim;
            let partials = for_workers(&mut workers, mode, |w| {
                w.extend(&batch)?;
                Ok(w.partials())
            })?;
            total = merge_partials(&partials, &mut comm);
            for (p, prov) in batch.iter().zip(batch.provenance()) {
                centers.push(p, *prov)?;
            }
        }
        ledger.phases.push(comm);
        per_round.push(RoundTrace::new(round, centers.len(), batch.len(), total));
    }

    Ok((
        OverseedResult {
            final_cost: total,
            centers,
            initial,
            per_round,
        },
        ledger,
    ))
}

// Combines worker partials in shard order; the exact sum makes the order
// irrelevant to the result.
fn merge_partials(partials: &[ExactSum], comm: &mut PhaseComm) -> f64 {
    let mut sum = ExactSum::new();
    for p in partials {
        comm.gathered_scalars += p.partials().len().max(1);
        sum.merge(p);
    }
    sum.value()
}

/// Shards `x` and runs the distributed protocol on it.
pub fn distributed_overseed(
    x: &Dataset,
    shards: usize,
    policy: ShardPolicy,
    cfg: &OverseedConfig,
    stream: &RngStream,
    mode: Execution,
) -> Result<(OverseedResult, CommLedger)> {
    let parts = shard_dataset(x, shards, policy)?;
    run_distributed_overseed(&parts, cfg, stream, mode)
}
