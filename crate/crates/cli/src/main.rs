//! `kmpar`: generate instances, run k-means|| replicates, verify the sampling
//! lemmas and sweep parameter grids.

mod instance;
mod run;
mod sweep;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use kmpar_core::diagnostics::{fmt_real, HeavyRule};
use kmpar_core::geometry::{centroid, cost, CenterSet};
use kmpar_core::instances::{load_centers, load_dataset, save_dataset};
use kmpar_core::mpcsim::ShardPolicy;
use kmpar_core::{Dataset, OverseedConfig, Points};

use instance::InstanceSpec;
use run::{run_replicates, summarize, write_replicates, write_summary, InstanceInfo, RunPlan, Summary};
use sweep::{cells, GridAxis};
use verify::{verify, Lemma, VerifyPlan};

#[derive(Parser, Debug)]
#[command(name = "kmpar", version, about = "k-means|| overseeding experiments")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic instance and its ground-truth sidecar.
    Generate {
        /// e.g. `lower-bound:k=20,L=8` or `simplex:k=5,per=100,sigma=0.01`
        #[arg(long)]
        instance: InstanceSpec,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run replicated overseeding plus reduction and write traces.
    Run {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo check of one sampling lemma; exit code 1 on failure.
    Verify {
        #[arg(long, value_enum)]
        lemma: Lemma,
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Ground-truth cluster to test.
        #[arg(long)]
        cluster: Option<usize>,
        /// Current centers (dataset file format).
        #[arg(long)]
        centers: Option<PathBuf>,
        #[arg(long, conflicts_with = "alpha")]
        ell: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every cell of a parameter grid and write one summary row each.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// `key=v1,v2,...`; keys: instance parameters, k, ell, alpha, rounds,
        /// shards, replicates, seed. Repeat for more axes.
        #[arg(long, required = true)]
        grid: Vec<GridAxis>,
        #[arg(long)]
        out: PathBuf,
        /// Keep per-cell traces under `cell_NNN/`.
        #[arg(long)]
        traces: bool,
    },
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
struct Source {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    instance: Option<InstanceSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StopAt {
    CostZero,
    #[value(name = "20phistar")]
    TwentyPhiStar,
    Rounds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Policy {
    Contiguous,
    Hash,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Rule {
    Sharp,
    Simple,
}

#[derive(Args, Debug, Clone)]
struct PipelineArgs {
    /// Centers to keep; defaults to the ground-truth cluster count.
    #[arg(long)]
    k: Option<usize>,
    /// Oversampling factor.
    #[arg(long, conflicts_with = "alpha")]
    ell: Option<f64>,
    /// Oversampling factor as a multiple of k (default 1).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 5)]
    rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    #[arg(long, default_value_t = 1)]
    shards: usize,
    #[arg(long, value_enum, default_value_t = Policy::Contiguous)]
    policy: Policy,
    /// Initial centers (dataset file format) replacing the uniform sample.
    #[arg(long)]
    warm_start: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = StopAt::Rounds)]
    stop_at: StopAt,
    #[arg(long, value_enum, default_value_t = Rule::Sharp)]
    heavy_rule: Rule,
}

fn load_source(source: &Source) -> Result<(Dataset, Option<InstanceSpec>)> {
    match (&source.dataset, &source.instance) {
        (Some(path), None) => {
            let x = load_dataset(path).with_context(|| format!("loading {}", path.display()))?;
            Ok((x, None))
        }
        (None, Some(spec)) => Ok((spec.build()?, Some(spec.clone()))),
        _ => bail!("give exactly one of --dataset or --instance"),
    }
}

fn instance_info(x: &Dataset, spec: Option<&InstanceSpec>) -> InstanceInfo {
    match spec {
        Some(s) => {
            let lb = s.lower_bound_params();
            InstanceInfo {
                name: s.to_string(),
                base: lb.as_ref().map(|p| p.base),
                tiers: lb.map(|p| p.tiers),
            }
        }
        None => InstanceInfo {
            name: x.label().to_string(),
            ..InstanceInfo::default()
        },
    }
}

fn build_plan(args: &PipelineArgs, x: &Dataset) -> Result<RunPlan> {
    let k = match (args.k, x.ground_truth()) {
        (Some(k), _) => k,
        (None, Some(t)) => t.cluster_count(),
        (None, None) => bail!("--k is required for datasets without ground truth"),
    };
    let ell = args.ell.unwrap_or(args.alpha.unwrap_or(1.0) * k as f64);
    let mut cfg = OverseedConfig::new(args.rounds, ell, k);
    if let Some(path) = &args.warm_start {
        let w: CenterSet = load_centers(path).with_context(|| format!("loading {}", path.display()))?;
        cfg = cfg.with_warm_start(w);
    }
    cfg = match args.stop_at {
        StopAt::Rounds => cfg,
        StopAt::CostZero => cfg.stopping_at_zero(),
        StopAt::TwentyPhiStar => {
            let truth = x
                .ground_truth()
                .context("--stop-at 20phistar needs a dataset with ground truth")?;
            cfg.stopping_at(20.0 * truth.phi_star())
        }
    };
    cfg.validate()?;
    if args.replicates == 0 {
        bail!("--replicates must be >= 1");
    }
    Ok(RunPlan {
        cfg,
        replicates: args.replicates,
        seed: args.seed,
        shards: args.shards,
        policy: match args.policy {
            Policy::Contiguous => ShardPolicy::Contiguous,
            Policy::Hash => ShardPolicy::Hash { seed: args.seed },
        },
        heavy_rule: match args.heavy_rule {
            Rule::Sharp => HeavyRule::Sharp,
            Rule::Simple => HeavyRule::Simple,
        },
    })
}

fn run_cell(
    x: &Dataset,
    spec: Option<&InstanceSpec>,
    args: &PipelineArgs,
    trace_dir: Option<&Path>,
) -> Result<Summary> {
    let plan = build_plan(args, x)?;
    let reps = run_replicates(x, &plan)?;
    if let Some(dir) = trace_dir {
        write_replicates(dir, &reps)?;
    }
    summarize(x, instance_info(x, spec), &plan, &reps)
}

fn cmd_generate(spec: &InstanceSpec, out: &Path) -> Result<()> {
    let x = spec.build()?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    save_dataset(&x, out).with_context(|| format!("writing {}", out.display()))?;
    let mu = centroid(&x)?;
    let spread = cost(&x, &CenterSet::from_points(&Dataset::from_points(&[mu])?))?;
    println!(
        "wrote {} points in dimension {}; phistar {}; phi_X(mu_X) {}",
        x.len(),
        x.dim(),
        fmt_real(x.ground_truth().map_or(f64::NAN, |t| t.phi_star())),
        fmt_real(spread)
    );
    Ok(())
}

fn cmd_run(source: &Source, args: &PipelineArgs, out: &Path) -> Result<()> {
    let (x, spec) = load_source(source)?;
    info!("running on {} ({} points)", x.label(), x.len());
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let summary = run_cell(&x, spec.as_ref(), args, Some(out))?;
    write_summary(&out.join("summary.csv"), std::slice::from_ref(&summary))?;
    println!("{}", run::SUMMARY_HEADER);
    println!("{}", summary.to_csv_row());
    Ok(())
}

fn apply_run_key(args: &mut PipelineArgs, key: &str, value: &str) -> Result<bool> {
    fn p<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
        v.parse().map_err(|_| anyhow::anyhow!("bad value `{v}` for grid key `{key}`"))
    }
    match key {
        "k" => args.k = Some(p(key, value)?),
        "ell" => {
            args.ell = Some(p(key, value)?);
            args.alpha = None;
        }
        "alpha" => {
            args.alpha = Some(p(key, value)?);
            args.ell = None;
        }
        "rounds" => args.rounds = p(key, value)?,
        "shards" => args.shards = p(key, value)?,
        "replicates" => args.replicates = p(key, value)?,
        "seed" => args.seed = p(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn cmd_sweep(source: &Source, base: &PipelineArgs, grid: &[GridAxis], out: &Path, traces: bool) -> Result<()> {
    let (x0, spec0) = load_source(source)?;
    for axis in grid {
        let run_key = matches!(
            axis.key.as_str(),
            "k" | "ell" | "alpha" | "rounds" | "shards" | "replicates" | "seed"
        );
        let inst_key = spec0.as_ref().is_some_and(|s| s.accepts(&axis.key));
        if !run_key && !inst_key {
            bail!("unknown grid key `{}`", axis.key);
        }
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut rows = Vec::new();
    for (i, cell) in cells(grid).into_iter().enumerate() {
        let mut args = base.clone();
        let mut spec = spec0.clone();
        for (key, value) in &cell {
            if key != "seed" {
                if let Some(s) = spec.as_mut().filter(|s| s.accepts(key)) {
                    s.set(key, value)?;
                }
            }
            apply_run_key(&mut args, key, value)?;
        }
        let rebuilt;
        let x = match (&spec, spec == spec0) {
            (Some(s), false) => {
                rebuilt = s.build()?;
                &rebuilt
            }
            _ => &x0,
        };
        info!("cell {i}: {cell:?}");
        let dir = traces.then(|| out.join(format!("cell_{i:03}")));
        rows.push(run_cell(x, spec.as_ref(), &args, dir.as_deref())?);
    }
    write_summary(&out.join("summary.csv"), &rows)?;
    println!("{}", run::SUMMARY_HEADER);
    for r in &rows {
        println!("{}", r.to_csv_row());
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate { instance, out } => cmd_generate(&instance, &out)?,
        Command::Run {
            source,
            pipeline,
            out,
        } => cmd_run(&source, &pipeline, &out)?,
        Command::Verify {
            lemma,
            source,
            trials,
            seed,
            cluster,
            centers,
            ell,
            alpha,
            out,
        } => {
            let (x, _) = load_source(&source)?;
            let centers = centers
                .map(|p| load_centers(&p).with_context(|| format!("loading {}", p.display())))
                .transpose()?;
            let plan = VerifyPlan {
                lemma,
                trials,
                seed,
                cluster,
                centers,
                ell,
                alpha,
            };
            let report = verify(&x, &plan)?;
            print!("{report}");
            if let Some(path) = out {
                run::write_file(&path, |w| write!(w, "{report}"))?;
            }
            if !report.pass {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Sweep {
            source,
            pipeline,
            grid,
            out,
            traces,
        } => cmd_sweep(&source, &pipeline, &grid, &out, traces)?,
    }
    Ok(ExitCode::SUCCESS)
}

/// 3 for I/O and input-file problems, 2 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<kmpar_core::Error>() {
            return match e {
                kmpar_core::Error::Io(_) | kmpar_core::Error::Parse { .. } => 3,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
