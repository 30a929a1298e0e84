//! Instance spec strings such as `lower-bound:k=20,L=8` or
//! `simplex:k=5,per=100,sigma=0.01,seed=3`.

use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use kmpar_core::instances::{gen_lower_bound, gen_simplex, LowerBoundParams, SimplexParams};
use kmpar_core::{Dataset, RngStream};

#[derive(Clone, Debug, PartialEq)]
pub enum InstanceSpec {
    LowerBound {
        k: usize,
        base: f64,
        tiers: Option<usize>,
        origin: Option<usize>,
    },
    Simplex {
        k: usize,
        per: usize,
        scale: f64,
        sigma: f64,
        seed: u64,
    },
}

/// Tier count used when a lower-bound spec leaves `T` out:
/// `⌈L / log2 L⌉`, capped at `k - 1`.
pub fn default_tiers(k: usize, base: f64) -> usize {
    let t = (base / base.log2()).ceil().max(1.0) as usize;
    t.min(k.saturating_sub(1)).max(1)
}

impl InstanceSpec {
    pub fn lower_bound_params(&self) -> Option<LowerBoundParams> {
        match *self {
            InstanceSpec::LowerBound {
                k,
                base,
                tiers,
                origin,
            } => {
                let mut p = LowerBoundParams::new(k, base, tiers.unwrap_or_else(|| default_tiers(k, base)));
                if let Some(o) = origin {
                    p.origin_multiplicity = o;
                }
                Some(p)
            }
            InstanceSpec::Simplex { .. } => None,
        }
    }

    pub fn build(&self) -> Result<Dataset> {
        let x = match *self {
            InstanceSpec::LowerBound { .. } => {
                gen_lower_bound(&self.lower_bound_params().expect("lower-bound spec"))?
            }
            InstanceSpec::Simplex {
                k,
                per,
                scale,
                sigma,
                seed,
            } => gen_simplex(
                &SimplexParams {
                    k,
                    points_per_cluster: per,
                    scale,
                    noise_sigma: sigma,
                },
                &RngStream::new(seed),
            )?,
        };
        Ok(x)
    }

    /// Overrides one parameter; used by sweep grids.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self {
            InstanceSpec::LowerBound {
                k,
                base,
                tiers,
                origin,
            } => match key {
                "k" => *k = parse(key, value)?,
                "L" => *base = parse(key, value)?,
                "T" => *tiers = Some(parse(key, value)?),
                "origin" => *origin = Some(parse(key, value)?),
                _ => bail!("unknown lower-bound parameter `{key}` (expected k, L, T, origin)"),
            },
            InstanceSpec::Simplex {
                k,
                per,
                scale,
                sigma,
                seed,
            } => match key {
                "k" => *k = parse(key, value)?,
                "per" => *per = parse(key, value)?,
                "scale" => *scale = parse(key, value)?,
                "sigma" => *sigma = parse(key, value)?,
                "seed" => *seed = parse(key, value)?,
                _ => bail!("unknown simplex parameter `{key}` (expected k, per, scale, sigma, seed)"),
            },
        }
        Ok(())
    }

    pub fn accepts(&self, key: &str) -> bool {
        match self {
            InstanceSpec::LowerBound { .. } => matches!(key, "k" | "L" | "T" | "origin"),
            InstanceSpec::Simplex { .. } => matches!(key, "k" | "per" | "scale" | "sigma" | "seed"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| anyhow!("bad value `{value}` for `{key}`"))
}

impl FromStr for InstanceSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut spec = match kind {
            "lower-bound" => InstanceSpec::LowerBound {
                k: 0,
                base: 0.0,
                tiers: None,
                origin: None,
            },
            "simplex" => InstanceSpec::Simplex {
                k: 0,
                per: 100,
                scale: 1.0,
                sigma: 0.01,
                seed: 0,
            },
            _ => bail!("unknown instance kind `{kind}` (expected lower-bound or simplex)"),
        };
        let mut seen_k = false;
        let mut seen_l = false;
        for pair in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .with_context(|| format!("expected key=value, got `{pair}`"))?;
            let key = key.trim();
            seen_k |= key == "k";
            seen_l |= key == "L";
            spec.set(key, value)?;
        }
        if !seen_k {
            bail!("instance spec `{s}` needs k=");
        }
        if matches!(spec, InstanceSpec::LowerBound { .. }) && !seen_l {
            bail!("lower-bound spec `{s}` needs L=");
        }
        Ok(spec)
    }
}

impl fmt::Display for InstanceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceSpec::LowerBound { .. } => {
                let p = self.lower_bound_params().expect("lower-bound spec");
                write!(
                    f,
                    "lower-bound:k={},L={},T={},origin={}",
                    p.k, p.base, p.tiers, p.origin_multiplicity
                )
            }
            InstanceSpec::Simplex {
                k,
                per,
                scale,
                sigma,
                seed,
            } => write!(f, "simplex:k={k},per={per},scale={scale},sigma={sigma},seed={seed}"),
        }
    }
}
