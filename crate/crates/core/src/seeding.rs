//! Weighted k-means++ and Lloyd refinement.

use crate::error::{Error, Result};
use crate::geometry::{
    assign_nearest, centroid, cost, exact_sum, nearest, sq_dist, CenterSet, Points, Provenance,
    Subset,
};
use crate::sampling::{pick_proportional, RngStream};

/// Candidate centers with nonnegative weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedInstance {
    points: CenterSet,
    weights: Vec<f64>,
}

impl WeightedInstance {
    pub fn new(points: CenterSet, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != points.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} points",
                weights.len(),
                points.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        Ok(Self { points, weights })
    }

    /// Every point with weight 1.
    pub fn unweighted(points: CenterSet) -> Self {
        let weights = vec![1.0; points.len()];
        Self { points, weights }
    }

    pub fn points(&self) -> &CenterSet {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        exact_sum(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `Σ w_b · d²(b, C)`.
    pub fn cost(&self, centers: &CenterSet) -> Result<f64> {
        if centers.is_empty() {
            return Err(Error::invalid("center set is empty"));
        }
        if centers.dim() != self.points.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.points.dim(),
                found: centers.dim(),
            });
        }
        Ok(exact_sum(
            self.points
                .iter()
                .zip(&self.weights)
                .map(|(p, w)| w * nearest(p, centers).1),
        ))
    }
}

/// Result of k-means++ seeding.
#[derive(Clone, Debug, PartialEq)]
pub struct Seeding {
    pub centers: CenterSet,
    /// Set when fewer than `k` centers could be chosen because the
    /// positive-weight support ran out of distinct points; holds the number
    /// of missing centers.
    pub shortfall: Option<usize>,
}

/// k-means++ on a weighted instance: the first center is drawn with
/// probability proportional to weight, each later one proportional to
/// `w_x · φ_x(C)`.
pub fn kmeanspp(inst: &WeightedInstance, k: usize, stream: &RngStream) -> Result<Seeding> {
    seed_with(inst, k, None, stream)
}

/// k-means++ continuing from a fixed first center (an index into `inst`).
pub fn kmeanspp_from(
    inst: &WeightedInstance,
    k: usize,
    first: usize,
    stream: &RngStream,
) -> Result<Seeding> {
    if first >= inst.len() {
        return Err(Error::invalid(format!("first center {first} out of range")));
    }
    seed_with(inst, k, Some(first), stream)
}

fn seed_with(
    inst: &WeightedInstance,
    k: usize,
    first: Option<usize>,
    stream: &RngStream,
) -> Result<Seeding> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    let pts = inst.points();
    let mut draws = stream.draws(0);
    let mut centers = CenterSet::new(pts.dim());
    let first = match first {
        Some(i) => Some(i),
        None => pick_proportional(inst.weights(), draws.next_unit()),
    };
    let Some(first) = first else {
        return Ok(Seeding {
            centers,
            shortfall: Some(k),
        });
    };
    centers.push(pts.point(first), pts.provenance()[first])?;

    let mut dist: Vec<f64> = pts.iter().map(|p| sq_dist(p, pts.point(first))).collect();
    let mut mass = vec![0.0; inst.len()];
    while centers.len() < k {
        for ((m, d), w) in mass.iter_mut().zip(&dist).zip(inst.weights()) {
            *m = w * d;
        }
        let Some(next) = pick_proportional(&mass, draws.next_unit()) else {
            break;
        };
        let chosen = pts.point(next);
        centers.push(chosen, pts.provenance()[next])?;
        for (d, p) in dist.iter_mut().zip(pts.iter()) {
            *d = d.min(sq_dist(p, chosen));
        }
    }
    let shortfall = (centers.len() < k).then(|| k - centers.len());
    Ok(Seeding { centers, shortfall })
}

/// Outcome of Lloyd iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct LloydOutcome {
    pub centers: CenterSet,
    pub iterations: usize,
    /// Cost before the first iteration followed by the cost after each one.
    pub costs: Vec<f64>,
    /// Number of center updates that changed coordinates.
    pub moved: usize,
}

/// Lloyd's algorithm: alternate nearest assignment and per-cluster centroids
/// until the relative improvement drops to 1e-9 or `max_iters` is reached.
/// A center whose cluster empties keeps its position.
pub fn lloyd<P: Points + ?Sized>(
    points: &P,
    initial: &CenterSet,
    max_iters: usize,
) -> Result<LloydOutcome> {
    let mut centers = initial.clone();
    let mut current = cost(points, &centers)?;
    let mut costs = vec![current];
    let mut moved = 0;
    let mut iterations = 0;
    while iterations < max_iters {
        let assignment = assign_nearest(points, &centers)?;
        let mut members = vec![Vec::new(); centers.len()];
        for (i, &c) in assignment.iter().enumerate() {
            members[c].push(i);
        }
        let mut next = CenterSet::new(centers.dim());
        for (j, idx) in members.iter().enumerate() {
            let old = centers.point(j);
            let prov = centers.provenance()[j];
            if idx.is_empty() {
                next.push(old, prov)?;
                continue;
            }
            let mu = centroid(&Subset::new(points, idx))?;
            if mu.coords() == old {
                next.push(old, prov)?;
            } else {
                moved += 1;
                next.push(&mu, Provenance::synthetic(prov.round))?;
            }
        }
        let new_cost = cost(points, &next)?;
        iterations += 1;
        costs.push(new_cost);
        let improvement = current - new_cost;
        centers = next;
        current = new_cost;
        if improvement <= 1e-9 * costs[costs.len() - 2] {
            break;
        }
    }
    Ok(LloydOutcome {
        centers,
        iterations,
        costs,
        moved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Dataset;
    use proptest::prelude::*;

    fn inst_1d(values: &[f64], weights: &[f64]) -> WeightedInstance {
        let pts = CenterSet::from_indices(
            &Dataset::from_scalars(values).unwrap(),
            &(0..values.len()).collect::<Vec<_>>(),
            0,
        );
        WeightedInstance::new(pts, weights.to_vec()).unwrap()
    }

    #[test]
    fn full_k_chooses_every_distinct_point() {
        let inst = inst_1d(&[0.0, 3.0, 7.0, 20.0], &[1.0; 4]);
        for seed in 0..20 {
            let s = kmeanspp(&inst, 4, &RngStream::new(seed)).unwrap();
            assert_eq!(s.shortfall, None);
            assert_eq!(s.centers.len(), 4);
            assert_eq!(inst.cost(&s.centers).unwrap(), 0.0);
            let mut src = s.centers.source_indices();
            src.sort_unstable();
            assert_eq!(src, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn first_center_is_weight_proportional() {
        let inst = inst_1d(&[0.0, 10.0], &[1.0, 1.0]);
        let trials = 20_000;
        let zero_first = (0..trials)
            .filter(|&t| {
                let s = kmeanspp(&inst, 1, &RngStream::new(5).derive(t)).unwrap();
                s.centers.point(0) == [0.0]
            })
            .count();
        let f = zero_first as f64 / trials as f64;
        assert!((0.48..=0.52).contains(&f), "frequency {f}");

        let skewed = inst_1d(&[0.0, 10.0], &[3.0, 1.0]);
        let zero_first = (0..trials)
            .filter(|&t| {
                let s = kmeanspp(&skewed, 1, &RngStream::new(6).derive(t)).unwrap();
                s.centers.point(0) == [0.0]
            })
            .count();
        let f = zero_first as f64 / trials as f64;
        let sigma = (0.75f64 * 0.25 / trials as f64).sqrt();
        assert!((f - 0.75).abs() <= 4.0 * sigma, "frequency {f}");
    }

    #[test]
    fn second_center_follows_d2_weights() {
        // Masses after choosing 0: (0, 1, 100), so P(10) = 100/101.
        let inst = inst_1d(&[0.0, 1.0, 10.0], &[1.0; 3]);
        let p = 100.0 / 101.0;
        let trials = 40_000;
        let hits = (0..trials)
            .filter(|&t| {
                let s = kmeanspp_from(&inst, 2, 0, &RngStream::new(8).derive(t)).unwrap();
                s.centers.point(1) == [10.0]
            })
            .count();
        let f = hits as f64 / trials as f64;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((f - p).abs() <= 4.0 * sigma, "frequency {f} vs {p}");
    }

    #[test]
    fn shortfall_is_reported_for_small_support() {
        let inst = inst_1d(&[0.0, 0.0, 5.0, 9.0], &[1.0, 1.0, 0.0, 2.0]);
        let s = kmeanspp(&inst, 3, &RngStream::new(1)).unwrap();
        assert_eq!(s.centers.len(), 2);
        assert_eq!(s.shortfall, Some(1));
        assert!(s.centers.iter().all(|c| c != [5.0]));

        let none = inst_1d(&[1.0], &[0.0]);
        let s = kmeanspp(&none, 1, &RngStream::new(1)).unwrap();
        assert!(s.centers.is_empty());
        assert_eq!(s.shortfall, Some(1));
        assert!(kmeanspp(&none, 0, &RngStream::new(1)).is_err());
    }

    #[test]
    fn weighted_instance_validation() {
        let pts = CenterSet::from_points(&Dataset::from_scalars(&[1.0, 2.0]).unwrap());
        assert!(WeightedInstance::new(pts.clone(), vec![1.0]).is_err());
        assert!(WeightedInstance::new(pts.clone(), vec![1.0, -1.0]).is_err());
        assert!(WeightedInstance::new(pts.clone(), vec![1.0, f64::NAN]).is_err());
        assert_eq!(WeightedInstance::unweighted(pts).total_weight(), 2.0);
    }

    #[test]
    fn lloyd_examples() {
        let x = Dataset::from_scalars(&[0.0, 1.0, 4.0, 5.0]).unwrap();
        let c = CenterSet::from_points(&Dataset::from_scalars(&[1.0, 4.0]).unwrap());
        let out = lloyd(&x, &c, 100).unwrap();
        let got: Vec<f64> = out.centers.iter().map(|p| p[0]).collect();
        assert_eq!(got, vec![0.5, 4.5]);
        assert_eq!(*out.costs.last().unwrap(), 1.0);

        let again = lloyd(&x, &out.centers, 100).unwrap();
        assert_eq!(again.centers, out.centers);
        assert_eq!(again.moved, 0);

        let frozen = lloyd(&x, &c, 0).unwrap();
        assert_eq!(frozen.centers, c);
        assert_eq!(frozen.iterations, 0);
    }

    #[test]
    fn lloyd_keeps_centers_of_empty_clusters() {
        let x = Dataset::from_scalars(&[0.0, 1.0]).unwrap();
        let c = CenterSet::from_points(&Dataset::from_scalars(&[0.5, 100.0]).unwrap());
        let out = lloyd(&x, &c, 10).unwrap();
        assert_eq!(out.centers.point(1), &[100.0]);
    }

    proptest! {
        #[test]
        fn lloyd_cost_never_increases(
            values in proptest::collection::vec(-100.0f64..100.0, 2..30),
            k in 1usize..5,
        ) {
            let x = Dataset::from_scalars(&values).unwrap();
            let idx: Vec<usize> = (0..k.min(values.len())).collect();
            let c = CenterSet::from_indices(&x, &idx, 0);
            let out = lloyd(&x, &c, 50).unwrap();
            for w in out.costs.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }

        #[test]
        fn kmeanspp_centers_come_from_the_instance(
            values in proptest::collection::vec(-100.0f64..100.0, 1..20),
            k in 1usize..6,
            seed in any::<u64>(),
        ) {
            let inst = inst_1d(&values, &vec![1.0; values.len()]);
            let s = kmeanspp(&inst, k, &RngStream::new(seed)).unwrap();
            for c in s.centers.iter() {
                prop_assert!(values.contains(&c[0]));
            }
            let mut distinct = values.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            prop_assert_eq!(s.centers.len(), k.min(distinct.len()));
        }
    }
}
