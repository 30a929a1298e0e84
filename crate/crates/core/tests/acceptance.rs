//! Acceptance suite. Each criterion prints one PASS or FAIL line with its
//! measured numbers and runtime; the process exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use kmpar_core::diagnostics::{
    annotate_trace, brute_force_optimal, gamma_of, settled_report, verify_d2_lemma,
    verify_settling_lemma, verify_uniform_lemma, HeavyRule,
};
use kmpar_core::geometry::sq_dist;
use kmpar_core::instances::{gen_lower_bound, gen_simplex, LowerBoundParams, SimplexParams};
use kmpar_core::mpcsim::{distributed_overseed, Execution, ShardPolicy};
use kmpar_core::overseed::weigh_centers;
use kmpar_core::sampling::Draws;
use kmpar_core::seeding::{kmeanspp, WeightedInstance};
use kmpar_core::{cost, kmeans_parallel, overseed, CenterSet, Dataset, OverseedConfig, Points, RngStream};

type Verdict = (bool, String);

fn gaussian_blobs(draws: &mut Draws, n: usize, d: usize) -> Dataset {
    let blobs = draws.random_range(1..=3usize);
    let centers: Vec<Vec<f64>> = (0..blobs)
        .map(|_| {
            let wide = Normal::new(0.0, 10.0).unwrap();
            (0..d).map(|_| wide.sample(draws)).collect()
        })
        .collect();
    let spread = [0.1, 1.0, 3.0][draws.random_range(0..3usize)];
    let noise = Normal::new(0.0, spread).unwrap();
    let mut coords = Vec::with_capacity(n * d);
    for i in 0..n {
        let c = &centers[i % blobs];
        coords.extend(c.iter().map(|&m| m + noise.sample(draws)));
    }
    Dataset::new(d, coords).unwrap()
}

fn random_set(draws: &mut Draws, max_n: usize) -> Dataset {
    let n = draws.random_range(2..=max_n);
    let d = draws.random_range(1..=5usize);
    gaussian_blobs(draws, n, d)
}

fn phi_single(a: &Dataset, p: &[f64]) -> f64 {
    a.iter().map(|y| sq_dist(y, p)).sum()
}

// Exhaustive E[φ_A({p})] over the n equally likely choices of p.
fn exact_uniform(a: &Dataset) -> f64 {
    a.iter().map(|p| phi_single(a, p)).sum::<f64>() / a.len() as f64
}

// Exhaustive E[φ_A(C ∪ {p})] with p drawn by D² weight restricted to A.
fn exact_d2(a: &Dataset, c: &CenterSet) -> f64 {
    let base: Vec<f64> = a
        .iter()
        .map(|y| c.iter().map(|q| sq_dist(y, q)).fold(f64::INFINITY, f64::min))
        .collect();
    let total: f64 = base.iter().sum();
    a.iter()
        .zip(&base)
        .map(|(p, &w)| {
            let after: f64 = a.iter().zip(&base).map(|(y, &b)| b.min(sq_dist(y, p))).sum();
            w / total * after
        })
        .sum()
}

fn centroid_cost(a: &Dataset) -> f64 {
    let d = a.dim();
    let mut mu = vec![0.0; d];
    for p in a.iter() {
        for (m, &v) in mu.iter_mut().zip(p) {
            *m += v / a.len() as f64;
        }
    }
    phi_single(a, &mu)
}

fn uniform_lemma() -> Verdict {
    let stream = RngStream::new(11).named("uniform-sets");
    let mut draws = stream.draws(0);
    let sets: Vec<Dataset> = (0..20).map(|_| random_set(&mut draws, 50)).collect();
    let reports: Vec<_> = sets
        .par_iter()
        .enumerate()
        .map(|(i, a)| verify_uniform_lemma(a, 100_000, &stream.derive(i as u64)).unwrap())
        .collect();
    let mc_pass = reports.iter().filter(|r| r.pass).count();
    let worst = reports
        .iter()
        .map(|r| (r.empirical - r.bound) / r.sigma.max(f64::MIN_POSITIVE))
        .fold(f64::NEG_INFINITY, f64::max);

    let small: Vec<Dataset> = (0..10).map(|_| random_set(&mut draws, 6)).collect();
    let mut exact_ok = 0;
    let mut identity_ok = 0;
    for (i, a) in small.iter().enumerate() {
        let exact = exact_uniform(a);
        let r = verify_uniform_lemma(a, 100_000, &stream.derive(100 + i as u64)).unwrap();
        if (r.empirical - exact).abs() <= 3.0 * r.sigma + 1e-12 * exact {
            exact_ok += 1;
        }
        if (exact - 2.0 * centroid_cost(a)).abs() <= 1e-9 * exact {
            identity_ok += 1;
        }
    }
    (
        mc_pass == 20 && exact_ok == 10 && identity_ok == 10,
        format!(
            "bound held {mc_pass}/20 (max (mean-bound)/sigma {worst:.2}); enumeration within 3 sigma {exact_ok}/10; E = 2 phi(mu) exactly {identity_ok}/10"
        ),
    )
}

fn random_centers(draws: &mut Draws, d: usize) -> CenterSet {
    let far = Normal::new(0.0, 20.0).unwrap();
    let m = draws.random_range(1..=3usize);
    let coords: Vec<f64> = (0..m * d).map(|_| far.sample(draws)).collect();
    CenterSet::from_points(&Dataset::new(d, coords).unwrap())
}

fn d2_lemma() -> Verdict {
    let stream = RngStream::new(12).named("d2-sets");
    let mut draws = stream.draws(0);
    let cases: Vec<(Dataset, CenterSet)> = (0..20)
        .map(|_| {
            let a = random_set(&mut draws, 50);
            let c = random_centers(&mut draws, a.dim());
            (a, c)
        })
        .collect();
    let reports: Vec<_> = cases
        .par_iter()
        .enumerate()
        .map(|(i, (a, c))| verify_d2_lemma(a, c, 100_000, &stream.derive(i as u64)).unwrap())
        .collect();
    let mc_pass = reports.iter().filter(|r| r.pass).count();
    let max_ratio = reports
        .iter()
        .map(|r| r.empirical / r.bound)
        .fold(0.0, f64::max);

    let mut exact_ok = 0;
    for i in 0..10 {
        let a = random_set(&mut draws, 6);
        let c = random_centers(&mut draws, a.dim());
        let exact = exact_d2(&a, &c);
        let r = verify_d2_lemma(&a, &c, 100_000, &stream.derive(100 + i)).unwrap();
        if (r.empirical - exact).abs() <= 3.0 * r.sigma + 1e-12 * exact && exact <= r.bound {
            exact_ok += 1;
        }
    }
    (
        mc_pass == 20 && exact_ok == 10,
        format!("bound held {mc_pass}/20 (max mean/bound {max_ratio:.3}); enumeration within 3 sigma and under bound {exact_ok}/10"),
    )
}

fn simplex(k: usize, per: usize, sigma: f64, seed: u64) -> Dataset {
    gen_simplex(
        &SimplexParams {
            k,
            points_per_cluster: per,
            scale: 1.0,
            noise_sigma: sigma,
        },
        &RngStream::new(seed),
    )
    .unwrap()
}

fn uneven_blobs() -> Dataset {
    let stream = RngStream::new(13).named("uneven");
    let mut draws = stream.draws(0);
    let spec = [([0.0, 0.0], 1.0, 200), ([40.0, 0.0], 0.5, 50), ([0.0, 30.0], 0.1, 10)];
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    for (label, (center, spread, count)) in spec.iter().enumerate() {
        let noise = Normal::new(0.0, *spread).unwrap();
        for _ in 0..*count {
            coords.push(center[0] + noise.sample(&mut draws));
            coords.push(center[1] + noise.sample(&mut draws));
            labels.push(label);
        }
    }
    Dataset::new(2, coords).unwrap().with_labels(labels).unwrap()
}

fn make_settled() -> Verdict {
    let lb = gen_lower_bound(&LowerBoundParams::new(10, 4.0, 3)).unwrap();
    let origin = lb.ground_truth().unwrap().members()[0][0];
    let configs: Vec<(&str, Dataset, Vec<usize>, Option<usize>)> = vec![
        ("simplex k=5", simplex(5, 40, 0.05, 1), vec![0], Some(1)),
        ("simplex k=10", simplex(10, 30, 0.02, 2), vec![0, 30, 60, 90, 120], Some(7)),
        ("simplex k=20", simplex(20, 20, 0.01, 3), vec![5], None),
        ("uneven blobs k=3", uneven_blobs(), vec![3], Some(2)),
        ("lower bound k=10", lb, vec![origin], Some(5)),
    ];
    let mut lines = Vec::new();
    let mut all = true;
    for (i, (name, x, idx, cluster)) in configs.into_iter().enumerate() {
        let truth = x.ground_truth().unwrap();
        let k = truth.cluster_count();
        let c = CenterSet::from_indices(&x, &idx, 0);
        let report = settled_report(&x, &c).unwrap();
        let phi_x = cost(&x, &c).unwrap();
        let cluster = cluster.unwrap_or_else(|| {
            report
                .unsettled_indices()
                .max_by(|&a, &b| report.clusters[a].cost.total_cmp(&report.clusters[b].cost))
                .unwrap()
        });
        let precondition = phi_x >= 20.0 * truth.phi_star() && !report.clusters[cluster].settled;
        let r = verify_settling_lemma(&x, &c, cluster, k as f64, 10_000, &RngStream::new(14).derive(i as u64))
            .unwrap();
        all &= precondition && r.pass;
        lines.push(format!(
            "{name}: freq {:.4} bound {:.4} sigma {:.4}{}",
            r.empirical,
            r.bound,
            r.sigma,
            if precondition { "" } else { " PRECONDITION FAILED" }
        ));
    }
    (all, lines.join("; "))
}

fn mean_and_error(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn unsettled_decay() -> Verdict {
    let mut ratios = Vec::new();
    let mut per_k = Vec::new();
    for k in [5usize, 10, 20] {
        let instances: Vec<Dataset> = (0..10).map(|s| simplex(k, 100, 0.01, 500 + s)).collect();
        let cell: Vec<f64> = (0..300u64)
            .into_par_iter()
            .flat_map_iter(|seed| {
                let x = &instances[(seed % 10) as usize];
                let phi_star = x.ground_truth().unwrap().phi_star();
                let cfg = OverseedConfig::new(100, k as f64, k).stopping_at(20.0 * phi_star);
                let mut r = overseed(x, &cfg, &RngStream::new(seed).named("decay")).unwrap();
                annotate_trace(x, &mut r, k, HeavyRule::Simple).unwrap();
                let rows: Vec<_> = r.trace().cloned().collect();
                rows.windows(2)
                    .filter(|w| w[0].cost >= 20.0 * phi_star)
                    .map(|w| w[1].unsettled_cost.unwrap() / w[0].unsettled_cost.unwrap())
                    .collect::<Vec<_>>()
            })
            .collect();
        per_k.push(format!("k={k}: {} transitions, mean {:.4}", cell.len(), mean_and_error(&cell).0));
        ratios.extend(cell);
    }
    let (mean, sigma) = mean_and_error(&ratios);
    (
        ratios.len() >= 500 && mean <= 0.98 + 4.0 * sigma,
        format!(
            "pooled {} transitions, mean ratio {mean:.4} (sigma {sigma:.4}, limit 0.98 + 4 sigma); {}",
            ratios.len(),
            per_k.join("; ")
        ),
    )
}

fn rounds_to_threshold() -> Verdict {
    let mut points = Vec::new();
    let mut lines = Vec::new();
    let mut ok = true;
    for k in [5usize, 10, 20] {
        for target in [3e3f64, 3e4, 3e5] {
            // φ_X(μ_X)/φ* is about (1 - 1/k) / (k σ²) for unit-scale simplices.
            let sigma = ((1.0 - 1.0 / k as f64) / (k as f64 * target)).sqrt();
            let x = simplex(k, 100, sigma, 700 + k as u64);
            let gamma = gamma_of(&x).unwrap().unwrap();
            let phi_star = x.ground_truth().unwrap().phi_star();
            let cfg = OverseedConfig::new(200, k as f64, k).stopping_at(20.0 * phi_star);
            let mut rounds: Vec<f64> = (0..100u64)
                .into_par_iter()
                .map(|seed| {
                    let r = overseed(&x, &cfg, &RngStream::new(seed).named("threshold")).unwrap();
                    r.first_round_at_most(20.0 * phi_star).map_or(f64::INFINITY, |t| t as f64)
                })
                .collect();
            rounds.sort_by(f64::total_cmp);
            let median = (rounds[49] + rounds[50]) / 2.0;
            ok &= (1e3..=1e6).contains(&gamma) && median.is_finite();
            lines.push(format!("k={k} gamma={gamma:.3e} median={median}"));
            points.push((gamma.log2(), median));
        }
    }
    let fitted = points.iter().map(|(g, m)| g * m).sum::<f64>() / points.iter().map(|(g, _)| g * g).sum::<f64>();
    let worst = points.iter().map(|(g, m)| m / g).fold(0.0, f64::max);
    (
        ok && fitted <= 3.0,
        format!("fitted C {fitted:.3} (largest cell ratio {worst:.3}); {}", lines.join("; ")),
    )
}

fn lower_bound_rounds() -> Verdict {
    let k = 20;
    let mut medians = Vec::new();
    let mut lines = Vec::new();
    let mut ok = true;
    for base in [4.0f64, 8.0, 16.0, 32.0] {
        let tiers = (base / base.log2()).ceil() as usize;
        let x = gen_lower_bound(&LowerBoundParams::new(k, base, tiers)).unwrap();
        let cfg = OverseedConfig::new(1000, k as f64, k).stopping_at_zero();
        let mut rounds: Vec<f64> = (0..100u64)
            .into_par_iter()
            .map(|seed| {
                let r = overseed(&x, &cfg, &RngStream::new(seed).named("lower-bound")).unwrap();
                r.first_round_at_most(0.0).map_or(f64::INFINITY, |t| t as f64)
            })
            .collect();
        rounds.sort_by(f64::total_cmp);
        let median = (rounds[49] + rounds[50]) / 2.0;
        ok &= median.is_finite() && median >= tiers as f64 / 2.0;
        lines.push(format!("L={base} T={tiers} median={median}"));
        medians.push(median);
    }
    ok &= medians.windows(2).all(|w| w[0] < w[1]);
    (ok, format!("k={k}; {}", lines.join("; ")))
}

fn sharding_invariance() -> Verdict {
    let x = simplex(8, 50, 0.05, 21);
    let cfg = OverseedConfig::new(5, 8.0, 8);
    let mut checked = 0;
    let mut equal = 0;
    for seed in 0..20u64 {
        let stream = RngStream::new(seed);
        let mut seq = overseed(&x, &cfg, &stream).unwrap();
        annotate_trace(&x, &mut seq, 8, HeavyRule::Sharp).unwrap();
        let mut seq_bytes = Vec::new();
        seq.write_trace(&mut seq_bytes).unwrap();
        for m in [1usize, 2, 4, 8] {
            for policy in [ShardPolicy::Contiguous, ShardPolicy::Hash { seed }] {
                let mode = if m % 4 == 0 { Execution::Concurrent } else { Execution::Sequential };
                let (mut dist, _) = distributed_overseed(&x, m, policy, &cfg, &stream, mode).unwrap();
                annotate_trace(&x, &mut dist, 8, HeavyRule::Sharp).unwrap();
                let mut bytes = Vec::new();
                dist.write_trace(&mut bytes).unwrap();
                checked += 1;
                if dist.centers == seq.centers && bytes == seq_bytes {
                    equal += 1;
                }
            }
        }
    }
    (checked == 160 && equal == checked, format!("{equal}/{checked} runs identical to the sequential run"))
}

fn oracle_equivalence() -> Verdict {
    let stream = RngStream::new(15).named("tiny");
    let mut draws = stream.draws(0);
    let instances: Vec<(Dataset, usize)> = (0..50)
        .map(|_| {
            let k = draws.random_range(1..=3usize);
            let n = draws.random_range(k + 1..=10);
            let d = draws.random_range(1..=3usize);
            (gaussian_blobs(&mut draws, n, d), k)
        })
        .collect();
    let results: Vec<(usize, usize, usize)> = instances
        .par_iter()
        .enumerate()
        .map(|(i, (x, k))| {
            let (_, phi_star) = brute_force_optimal(x, *k).unwrap();
            let cfg = OverseedConfig::new(5, *k as f64, *k);
            let (mut runs, mut above, mut close) = (0, 0, 0);
            for seed in 0..20u64 {
                let out = kmeans_parallel(x, &cfg, &stream.derive(i as u64).derive(seed)).unwrap();
                let c = cost(x, &out.centers).unwrap();
                runs += 1;
                above += usize::from(c >= phi_star * (1.0 - 1e-12));
                close += usize::from(c <= 20.0 * phi_star);
            }
            (runs, above, close)
        })
        .collect();
    let runs: usize = results.iter().map(|r| r.0).sum();
    let above: usize = results.iter().map(|r| r.1).sum();
    let close: usize = results.iter().map(|r| r.2).sum();
    let share = close as f64 / runs as f64;
    (
        above == runs && share >= 0.9,
        format!("{runs} runs on 50 instances: cost >= phistar in {above}; cost <= 20 phistar in {close} ({:.1}%)", 100.0 * share),
    )
}

fn weighting() -> Verdict {
    // Weights always sum to |X|.
    let mut weight_ok = 0;
    let mut weight_runs = 0;
    for seed in 0..100u64 {
        let x = simplex(3 + (seed % 4) as usize, 20, 0.1, seed);
        let k = x.ground_truth().unwrap().cluster_count();
        let out = kmeans_parallel(&x, &OverseedConfig::new(3, k as f64, k), &RngStream::new(seed)).unwrap();
        let again = weigh_centers(&x, &out.overseed.centers).unwrap();
        weight_runs += 1;
        if out.weighted.total_weight() == x.len() as f64 && again.total_weight() == x.len() as f64 {
            weight_ok += 1;
        }
    }

    // Equal weights behave like no weights: ordered pair frequencies for
    // k = 2 on {0, 1, 10} against the exact unweighted probabilities.
    let values = [0.0, 1.0, 10.0];
    let b = CenterSet::from_points(&Dataset::from_scalars(&values).unwrap());
    let inst = WeightedInstance::new(b, vec![7.0; 3]).unwrap();
    let trials = 30_000u64;
    let mut counts = [[0u64; 3]; 3];
    let pos = |v: f64| values.iter().position(|&w| w == v).unwrap();
    for t in 0..trials {
        let s = kmeanspp(&inst, 2, &RngStream::new(16).derive(t)).unwrap();
        counts[pos(s.centers.point(0)[0])][pos(s.centers.point(1)[0])] += 1;
    }
    let mut dist_ok = true;
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        let others: f64 = (0..3).map(|j| (values[i] - values[j]).powi(2)).sum();
        for j in 0..3 {
            let p = if i == j { 0.0 } else { (values[i] - values[j]).powi(2) / others / 3.0 };
            let f = counts[i][j] as f64 / trials as f64;
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            let z = if sigma > 0.0 { (f - p).abs() / sigma } else if f == p { 0.0 } else { f64::INFINITY };
            worst = worst.max(z);
            dist_ok &= z <= 4.0;
        }
    }
    (
        weight_ok == weight_runs && dist_ok,
        format!("weights sum to |X| in {weight_ok}/{weight_runs} runs; equal-weight pair frequencies max |z| {worst:.2} (limit 4)"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Verdict); 9] = [
        ("uniform-sampling lemma", 30, uniform_lemma),
        ("D2-sampling lemma", 60, d2_lemma),
        ("settling probability", 60, make_settled),
        ("unsettled cost decay", 120, unsettled_decay),
        ("rounds to 20 phistar", 300, rounds_to_threshold),
        ("lower-bound rounds to zero", 300, lower_bound_rounds),
        ("sharding invariance", 60, sharding_invariance),
        ("oracle equivalence", 60, oracle_equivalence),
        ("reduction weighting", 60, weighting),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let (pass, detail) = check();
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs(limit);
        let ok = pass && in_time;
        failed += usize::from(!ok);
        println!(
            "{} {name}: {detail} [{:.1}s, limit {limit}s]",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all criteria passed");
        ExitCode::SUCCESS
    }
}
