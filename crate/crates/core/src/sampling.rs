//! All randomness used by the pipeline.
//!
//! Draws are produced by a counter-based generator: the value for a given
//! `(master seed, stream domain, round, index)` is a pure function of those
//! numbers. Selections for a point therefore do not depend on how the data is
//! sharded or which thread evaluates it.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::geometry::CostCache;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Maps 64 random bits to `[0, 1)` using the top 53 bits.
#[inline]
pub fn unit_from_bits(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A family of counter-addressed random values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    domain: u64,
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        Self {
            seed: master_seed,
            domain: 0,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream identified by `label`.
    pub fn derive(&self, label: u64) -> Self {
        Self {
            seed: self.seed,
            domain: mix64(self.domain.wrapping_add(GOLDEN) ^ mix64(label.wrapping_add(0xD134_2543_DE82_EF95))),
        }
    }

    /// Child stream identified by a name.
    pub fn named(&self, name: &str) -> Self {
        self.derive(fnv1a64(name.as_bytes()))
    }

    /// 64 random bits addressed by `(round, index)`.
    #[inline]
    pub fn bits(&self, round: u64, index: u64) -> u64 {
        let mut h = mix64(self.seed ^ GOLDEN);
        h = mix64(h ^ self.domain);
        h = mix64(h ^ round.wrapping_mul(0xA076_1D64_78BD_642F));
        h = mix64(h.wrapping_add(index.wrapping_mul(0xE703_7ED1_A0B4_28DB)));
        mix64(h ^ (h >> 29))
    }

    /// Uniform value in `[0, 1)` addressed by `(round, index)`.
    #[inline]
    pub fn unit(&self, round: u64, index: u64) -> f64 {
        unit_from_bits(self.bits(round, index))
    }

    /// Sequential draws for `round`, addressed by a running counter.
    pub fn draws(&self, round: u64) -> Draws {
        Draws {
            stream: *self,
            round,
            counter: 0,
        }
    }
}

/// Sequence `(round, 0), (round, 1), ...` of a stream; usable as a `rand`
/// generator for distributions.
#[derive(Clone, Debug)]
pub struct Draws {
    stream: RngStream,
    round: u64,
    counter: u64,
}

impl Draws {
    pub fn next_unit(&mut self) -> f64 {
        unit_from_bits(self.next_u64())
    }

    /// Uniform integer in `0..n` by 128-bit multiply-shift.
    pub fn next_index(&mut self, n: usize) -> usize {
        ((u128::from(self.next_u64()) * n as u128) >> 64) as usize
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }
}

impl RngCore for Draws {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        let v = self.stream.bits(self.round, self.counter);
        self.counter += 1;
        v
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Uniformly random index in `0..len`.
pub fn sample_uniform(len: usize, draws: &mut Draws) -> Result<usize> {
    if len == 0 {
        return Err(Error::invalid("cannot sample from an empty dataset"));
    }
    Ok(draws.next_index(len))
}

/// Inverse-CDF pick over nonnegative masses: returns the first index whose
/// running mass exceeds `u · Σ masses`. Zero-mass entries are never returned.
pub fn pick_proportional(masses: &[f64], u: f64) -> Option<usize> {
    let total: f64 = masses.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let target = u * total;
    let mut running = 0.0;
    let mut last_positive = None;
    for (i, &m) in masses.iter().enumerate() {
        if m > 0.0 {
            running += m;
            last_positive = Some(i);
            if target < running {
                return Some(i);
            }
        }
    }
    // Rounding can leave `target` a hair above the final running sum.
    last_positive
}

/// The D² distribution: probability of each point proportional to its cost.
#[derive(Clone, Debug, PartialEq)]
pub struct D2Distribution {
    probs: Vec<f64>,
}

impl D2Distribution {
    pub fn from_costs(costs: &[f64]) -> Result<Self> {
        let total: f64 = crate::geometry::exact_sum(costs.iter().copied());
        if !(total > 0.0) {
            return Err(Error::Degenerate(
                "every point has zero cost; D² distribution undefined".into(),
            ));
        }
        Ok(Self {
            probs: costs.iter().map(|&c| c / total).collect(),
        })
    }

    pub fn from_cache(cache: &CostCache) -> Result<Self> {
        Self::from_costs(cache.nearest_sq_dist())
    }

    /// Wraps explicit probabilities; they must be nonnegative and sum to 1.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// The D² distribution for the current cache state.
pub fn d2_distribution(cache: &CostCache) -> Result<D2Distribution> {
    D2Distribution::from_cache(cache)
}

/// One draw from a D² distribution.
pub fn sample_d2(dist: &D2Distribution, draws: &mut Draws) -> usize {
    pick_proportional(&dist.probs, draws.next_unit())
        .expect("validated distribution has positive mass")
}

/// `min(1, ℓ·φ_x/φ_X)`, evaluated in one fixed order everywhere.
#[inline]
pub fn inclusion_probability(ell: f64, point_cost: f64, total_cost: f64) -> f64 {
    (ell * point_cost / total_cost).min(1.0)
}

/// Independent Bernoulli selection over `(global index, cost)` pairs. Each
/// point uses the draw addressed by `(round, index)`, so any partition of the
/// points selects the same indices. Output is in input order.
pub fn bernoulli_select<I>(
    costs: I,
    total_cost: f64,
    ell: f64,
    round: u64,
    stream: &RngStream,
) -> Vec<usize>
where
    I: IntoIterator<Item = (usize, f64)>,
{
    costs
        .into_iter()
        .filter(|&(index, c)| {
            c > 0.0 && stream.unit(round, index as u64) < inclusion_probability(ell, c, total_cost)
        })
        .map(|(index, _)| index)
        .collect()
}

/// One oversampling round: every point `x` joins independently with
/// probability `min(1, ℓ·φ_x(C)/φ_X(C))`. Returns ascending indices.
pub fn bernoulli_round(
    cache: &CostCache,
    ell: f64,
    round: u64,
    stream: &RngStream,
) -> Result<Vec<usize>> {
    if !(ell >= 0.0) || !ell.is_finite() {
        return Err(Error::invalid(format!("sampling factor must be finite and >= 0, got {ell}")));
    }
    let total = cache.total_cost();
    if !(total > 0.0) {
        return Err(Error::Degenerate("total cost is zero; nothing to sample".into()));
    }
    Ok(bernoulli_select(
        cache.nearest_sq_dist().iter().copied().enumerate(),
        total,
        ell,
        round,
        stream,
    ))
}
