use rayon::prelude::*;

use super::{check_dims, sq_dist, ExactSum, Points};
use crate::error::{Error, Result};

// Below this many points the rayon split costs more than it saves.
const PARALLEL_MIN: usize = 1 << 14;

/// Per-point squared distance to the nearest center seen so far, kept up to
/// date as centers are appended.
#[derive(Clone, Debug, PartialEq)]
pub struct CostCache {
    nearest_sq_dist: Vec<f64>,
    nearest_center: Vec<usize>,
    total: ExactSum,
    total_cost: f64,
    centers_seen: usize,
}

impl CostCache {
    /// Cache for `points` against a nonempty initial center list.
    pub fn new<P, C>(points: &P, centers: &C) -> Result<Self>
    where
        P: Points + Sync + ?Sized,
        C: Points + Sync + ?Sized,
    {
        if centers.is_empty() {
            return Err(Error::invalid("cost cache needs at least one center"));
        }
        let mut cache = Self {
            nearest_sq_dist: vec![f64::INFINITY; points.len()],
            nearest_center: vec![0; points.len()],
            total: ExactSum::new(),
            total_cost: f64::INFINITY,
            centers_seen: 0,
        };
        cache.extend(points, centers)?;
        Ok(cache)
    }

    /// Appends `new_centers` after the centers already seen. Entries only
    /// change when a new center is strictly closer, so ties keep the lower
    /// ordinal.
    pub fn extend<P, C>(&mut self, points: &P, new_centers: &C) -> Result<()>
    where
        P: Points + Sync + ?Sized,
        C: Points + Sync + ?Sized,
    {
        if points.len() != self.nearest_sq_dist.len() {
            return Err(Error::invalid(format!(
                "cache covers {} points, got {}",
                self.nearest_sq_dist.len(),
                points.len()
            )));
        }
        if new_centers.is_empty() {
            return Ok(());
        }
        check_dims(points.dim(), new_centers.dim())?;
        let base = self.centers_seen;
        let update = |i: usize, dist: &mut f64, ord: &mut usize| {
            let p = points.point(i);
            for j in 0..new_centers.len() {
                let d = sq_dist(p, new_centers.point(j));
                if d < *dist {
                    *dist = d;
                    *ord = base + j;
                }
            }
        };
        if points.len() >= PARALLEL_MIN {
            self.nearest_sq_dist
                .par_iter_mut()
                .zip(self.nearest_center.par_iter_mut())
                .enumerate()
                .for_each(|(i, (dist, ord))| update(i, dist, ord));
        } else {
            for (i, (dist, ord)) in self
                .nearest_sq_dist
                .iter_mut()
                .zip(self.nearest_center.iter_mut())
                .enumerate()
            {
                update(i, dist, ord);
            }
        }
        self.centers_seen += new_centers.len();
        self.total = self.nearest_sq_dist.iter().copied().collect();
        self.total_cost = self.total.value();
        Ok(())
    }

    /// Extends with every center of `centers` beyond the ones already seen.
    pub fn catch_up<P, C>(&mut self, points: &P, centers: &C) -> Result<()>
    where
        P: Points + Sync + ?Sized,
        C: Points + Sync + ?Sized,
    {
        let fresh: Vec<usize> = (self.centers_seen..centers.len()).collect();
        self.extend(points, &super::Subset::new(centers, &fresh))
    }

    pub fn nearest_sq_dist(&self) -> &[f64] {
        &self.nearest_sq_dist
    }

    pub fn nearest_center(&self) -> &[usize] {
        &self.nearest_center
    }

    /// `φ_X(C)`, correctly rounded.
    pub fn total_cost(&self) -> f64 {
        self.total_cost
    }

    /// Exact accumulator behind `total_cost`, for merging partial totals.
    pub fn total_partials(&self) -> &ExactSum {
        &self.total
    }

    pub fn centers_seen(&self) -> usize {
        self.centers_seen
    }

    pub fn len(&self) -> usize {
        self.nearest_sq_dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nearest_sq_dist.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cost, nearest, CenterSet, Dataset};
    use proptest::prelude::*;

    fn centers_1d(values: &[f64]) -> CenterSet {
        CenterSet::from_points(&Dataset::from_scalars(values).unwrap())
    }

    #[test]
    fn extend_examples() {
        let x = Dataset::from_scalars(&[0.0, 3.0]).unwrap();
        let mut cache = CostCache::new(&x, &centers_1d(&[0.0])).unwrap();
        cache.extend(&x, &centers_1d(&[3.0])).unwrap();
        assert_eq!(cache.nearest_sq_dist(), &[0.0, 0.0]);
        assert_eq!(cache.nearest_center(), &[0, 1]);

        let x = Dataset::from_scalars(&[0.0, 1.0, 4.0]).unwrap();
        let mut cache = CostCache::new(&x, &centers_1d(&[0.0])).unwrap();
        cache.extend(&x, &centers_1d(&[4.0])).unwrap();
        let full = CostCache::new(&x, &centers_1d(&[0.0, 4.0])).unwrap();
        assert_eq!(cache.nearest_sq_dist(), &[0.0, 1.0, 0.0]);
        assert_eq!(cache, full);
        assert_eq!(cache.total_cost(), 1.0);
    }

    #[test]
    fn duplicate_center_leaves_cache_unchanged() {
        let x = Dataset::from_scalars(&[0.0, 1.0, 4.0]).unwrap();
        let mut cache = CostCache::new(&x, &centers_1d(&[0.0, 4.0])).unwrap();
        let before = cache.clone();
        cache.extend(&x, &centers_1d(&[4.0])).unwrap();
        assert_eq!(cache.nearest_sq_dist(), before.nearest_sq_dist());
        assert_eq!(cache.nearest_center(), before.nearest_center());
        assert_eq!(cache.total_cost(), before.total_cost());
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let x = Dataset::from_scalars(&[0.0, 1.0]).unwrap();
        assert!(CostCache::new(&x, &CenterSet::new(1)).is_err());
        let mut cache = CostCache::new(&x, &centers_1d(&[0.0])).unwrap();
        let other = Dataset::from_scalars(&[0.0]).unwrap();
        assert!(cache.extend(&other, &centers_1d(&[1.0])).is_err());
        let two_d = CenterSet::from_points(&Dataset::new(2, vec![0.0, 0.0]).unwrap());
        assert!(cache.extend(&x, &two_d).is_err());
    }

    #[test]
    fn large_inputs_take_the_parallel_path_identically() {
        let n = PARALLEL_MIN + 17;
        let values: Vec<f64> = (0..n).map(|i| ((i * 7919) % 1013) as f64 * 0.37).collect();
        let x = Dataset::from_scalars(&values).unwrap();
        let mut cache = CostCache::new(&x, &centers_1d(&[1.0])).unwrap();
        cache.extend(&x, &centers_1d(&[100.0, 300.0])).unwrap();
        for i in (0..n).step_by(97) {
            let (ord, d) = nearest(x.point(i), &centers_1d(&[1.0, 100.0, 300.0]));
            assert_eq!(cache.nearest_sq_dist()[i], d);
            assert_eq!(cache.nearest_center()[i], ord);
        }
    }

    proptest! {
        #[test]
        fn coherent_with_full_recompute(
            values in proptest::collection::vec(-100.0f64..100.0, 1..40),
            batches in proptest::collection::vec(proptest::collection::vec(-100.0f64..100.0, 0..4), 1..6),
        ) {
            let x = Dataset::from_scalars(&values).unwrap();
            let mut all = vec![values[0]];
            let mut cache = CostCache::new(&x, &centers_1d(&all)).unwrap();
            for batch in &batches {
                let before = cache.nearest_sq_dist().to_vec();
                if !batch.is_empty() {
                    cache.extend(&x, &centers_1d(batch)).unwrap();
                }
                all.extend_from_slice(batch);
                let full = centers_1d(&all);
                for i in 0..x.len() {
                    let (ord, d) = nearest(x.point(i), &full);
                    prop_assert_eq!(cache.nearest_sq_dist()[i], d);
                    prop_assert_eq!(cache.nearest_center()[i], ord);
                    prop_assert!(d <= before[i]);
                }
                prop_assert_eq!(cache.total_cost(), cost(&x, &full).unwrap());
                prop_assert_eq!(cache.centers_seen(), all.len());
            }
        }
    }
}
