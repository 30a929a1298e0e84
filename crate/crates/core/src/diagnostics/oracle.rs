use crate::error::{Error, Result};
use crate::geometry::{centroid, cost, sq_dist, CenterSet, Dataset, Points, Provenance};

/// Largest instance the exhaustive oracle accepts.
pub const ORACLE_MAX_POINTS: usize = 12;
pub const ORACLE_MAX_K: usize = 4;

/// Exact k-means optimum by enumerating every partition of the points into at
/// most `k` nonempty parts (restricted growth strings), each part served by
/// its centroid. Returns `(C*, φ*)`.
pub fn brute_force_optimal<P: Points + ?Sized>(x: &P, k: usize) -> Result<(CenterSet, f64)> {
    let n = x.len();
    if n == 0 || k == 0 {
        return Err(Error::invalid("oracle needs at least one point and k >= 1"));
    }
    if n > ORACLE_MAX_POINTS || k > ORACLE_MAX_K {
        return Err(Error::invalid(format!(
            "oracle limited to n <= {ORACLE_MAX_POINTS} and k <= {ORACLE_MAX_K}, got n = {n}, k = {k}"
        )));
    }
    let d = x.dim();
    let mut labels = vec![0usize; n];
    let mut best_cost = f64::INFINITY;
    let mut best_labels = labels.clone();
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    loop {
        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0);
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, &c) in sums[l * d..(l + 1) * d].iter_mut().zip(x.point(i)) {
                *s += c;
            }
        }
        let mut total = 0.0;
        for (i, &l) in labels.iter().enumerate() {
            let mu: Vec<f64> = sums[l * d..(l + 1) * d]
                .iter()
                .map(|s| s / counts[l] as f64)
                .collect();
            total += sq_dist(x.point(i), &mu);
            if total >= best_cost {
                break;
            }
        }
        if total < best_cost {
            best_cost = total;
            best_labels.copy_from_slice(&labels);
        }
        if !next_partition(&mut labels, k) {
            break;
        }
    }
    let parts = best_labels.iter().max().map_or(0, |m| m + 1);
    let mut centers = CenterSet::new(d);
    for p in 0..parts {
        let idx: Vec<usize> = (0..n).filter(|&i| best_labels[i] == p).collect();
        let mu = centroid(&crate::geometry::Subset::new(x, &idx))?;
        centers.push(&mu, Provenance::synthetic(0))?;
    }
    let phi_star = cost(x, &centers)?;
    Ok((centers, phi_star))
}

// Advances a restricted growth string (labels[0] = 0, labels[i] <= 1 + max of
// earlier labels) limited to `k` distinct labels.
fn next_partition(labels: &mut [usize], k: usize) -> bool {
    let n = labels.len();
    for i in (1..n).rev() {
        let prefix_max = labels[..i].iter().copied().max().unwrap_or(0);
        if labels[i] <= prefix_max && labels[i] + 1 < k {
            labels[i] += 1;
            for l in labels[i + 1..].iter_mut() {
                *l = 0;
            }
            return true;
        }
    }
    false
}

/// `φ_X(μ_X) / φ*`, or `None` when `φ* = 0`.
pub fn gamma_with<P: Points + ?Sized>(x: &P, phi_star: f64) -> Result<Option<f64>> {
    if !(phi_star >= 0.0) {
        return Err(Error::invalid(format!("phistar must be >= 0, got {phi_star}")));
    }
    if phi_star == 0.0 {
        return Ok(None);
    }
    let mu = centroid(x)?;
    let mut c = CenterSet::new(x.dim());
    c.push(&mu, Provenance::synthetic(0))?;
    Ok(Some(cost(x, &c)? / phi_star))
}

/// `γ` from the dataset's recorded ground truth.
pub fn gamma_of(x: &Dataset) -> Result<Option<f64>> {
    let truth = super::settled::require_truth(x)?;
    gamma_with(x, truth.phi_star())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell(n: usize) -> usize {
        // Bell numbers via the triangle.
        let mut row = vec![1usize];
        for _ in 1..n {
            let mut next = vec![*row.last().unwrap()];
            for v in &row {
                let last = *next.last().unwrap();
                next.push(last + v);
            }
            row = next;
        }
        *row.last().unwrap()
    }

    #[test]
    fn enumerates_every_partition_once() {
        for n in 1..=7 {
            let mut labels = vec![0; n];
            let mut count = 1;
            while next_partition(&mut labels, n) {
                count += 1;
            }
            assert_eq!(count, bell(n), "n = {n}");
        }
        // Partitions of 4 items into at most 2 blocks: S(4,1) + S(4,2) = 1 + 7.
        let mut labels = vec![0; 4];
        let mut count = 1;
        while next_partition(&mut labels, 2) {
            count += 1;
        }
        assert_eq!(count, 8);
    }

    #[test]
    fn two_pairs_on_a_line() {
        let x = Dataset::from_scalars(&[0.0, 1.0, 4.0, 5.0]).unwrap();
        let (c, phi) = brute_force_optimal(&x, 2).unwrap();
        assert_eq!(phi, 1.0);
        let mut got: Vec<f64> = c.iter().map(|p| p[0]).collect();
        got.sort_by(f64::total_cmp);
        assert_eq!(got, vec![0.5, 4.5]);
    }

    #[test]
    fn enough_centers_cost_nothing() {
        let x = Dataset::from_scalars(&[0.0, 0.0, 3.0, 7.0]).unwrap();
        assert_eq!(brute_force_optimal(&x, 3).unwrap().1, 0.0);
        assert_eq!(brute_force_optimal(&x, 4).unwrap().1, 0.0);
    }

    #[test]
    fn one_center_is_the_centroid() {
        let x = Dataset::new(2, vec![0.0, 1.0, 3.0, -2.0, 5.0, 5.0]).unwrap();
        let (c, phi) = brute_force_optimal(&x, 1).unwrap();
        let mu = centroid(&x).unwrap();
        assert_eq!(c.point(0), mu.coords());
        assert_eq!(phi, cost(&x, &c).unwrap());
    }

    #[test]
    fn refuses_large_inputs() {
        let x = Dataset::from_scalars(&[0.0; 13]).unwrap();
        assert!(brute_force_optimal(&x, 2).is_err());
        let x = Dataset::from_scalars(&[0.0; 5]).unwrap();
        assert!(brute_force_optimal(&x, 5).is_err());
        assert!(brute_force_optimal(&x, 0).is_err());
    }

    #[test]
    fn gamma_examples() {
        let x = Dataset::from_scalars(&[0.0, 1.0, 4.0, 5.0]).unwrap();
        let (_, phi) = brute_force_optimal(&x, 2).unwrap();
        assert_eq!(gamma_with(&x, phi).unwrap(), Some(17.0));
        assert_eq!(gamma_with(&x, 0.0).unwrap(), None);

        let doubled = Dataset::from_scalars(&[0.0, 1.0, 4.0, 5.0, 0.0, 1.0, 4.0, 5.0]).unwrap();
        let (_, phi2) = brute_force_optimal(&doubled, 2).unwrap();
        assert_eq!(phi2, 2.0);
        assert_eq!(gamma_with(&doubled, phi2).unwrap(), Some(17.0));

        let labelled = x.with_labels(vec![0, 0, 1, 1]).unwrap();
        assert_eq!(gamma_of(&labelled).unwrap(), Some(17.0));
    }
}
