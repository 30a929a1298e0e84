//! Points, datasets, center sets and squared-distance costs.

mod cache;
mod sum;

pub use cache::CostCache;
pub use sum::{exact_sum, ExactSum};

use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};

/// Read access to an indexed collection of equal-dimension points.
pub trait Points {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn point(&self, i: usize) -> &[f64];

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A single point with finite coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("point must have dimension >= 1"));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("non-finite coordinate {bad}")));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Squared Euclidean distance, accumulated coordinate by coordinate in index
/// order so every caller gets the same bits for the same pair.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        let diff = a[i] - b[i];
        acc += diff * diff;
    }
    acc
}

/// Nearest center for `p` as `(ordinal, squared distance)`; ties go to the
/// lowest ordinal.
pub fn nearest<C: Points + ?Sized>(p: &[f64], centers: &C) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for j in 0..centers.len() {
        let d = sq_dist(p, centers.point(j));
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn check_centers<P: Points + ?Sized, C: Points + ?Sized>(points: &P, centers: &C) -> Result<()> {
    if centers.is_empty() {
        return Err(Error::invalid("center set is empty"));
    }
    check_dims(points.dim(), centers.dim())
}

/// `φ_Y(C)`: the sum over `y` of the squared distance to its nearest center.
pub fn cost<P: Points + ?Sized, C: Points + ?Sized>(points: &P, centers: &C) -> Result<f64> {
    check_centers(points, centers)?;
    Ok(exact_sum((0..points.len()).map(|i| nearest(points.point(i), centers).1)))
}

/// Coordinate-wise mean of a nonempty point set.
pub fn centroid<P: Points + ?Sized>(points: &P) -> Result<Point> {
    if points.is_empty() {
        return Err(Error::invalid("centroid of an empty point set"));
    }
    let d = points.dim();
    let mut sums: Vec<ExactSum> = vec![ExactSum::new(); d];
    for i in 0..points.len() {
        for (s, &c) in sums.iter_mut().zip(points.point(i)) {
            s.add(c);
        }
    }
    let n = points.len() as f64;
    Point::new(sums.iter().map(|s| s.value() / n).collect())
}

/// Maps every point to the ordinal of its nearest center.
pub fn assign_nearest<P: Points + ?Sized, C: Points + ?Sized>(
    points: &P,
    centers: &C,
) -> Result<Vec<usize>> {
    check_centers(points, centers)?;
    Ok((0..points.len())
        .map(|i| nearest(points.point(i), centers).0)
        .collect())
}

/// Optimal clustering recorded alongside a generated or loaded dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    labels: Vec<usize>,
    centers: CenterSet,
    phi_star: f64,
}

impl GroundTruth {
    /// Builds the ground truth for a partition given as one cluster label per
    /// point: `C*` is the per-cluster centroid and `φ* = φ_X(C*)`.
    pub fn from_labels<P: Points + ?Sized>(points: &P, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != points.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} points",
                labels.len(),
                points.len()
            )));
        }
        let clusters = labels.iter().max().map_or(0, |m| m + 1);
        let mut members = vec![Vec::new(); clusters];
        for (i, &l) in labels.iter().enumerate() {
            members[l].push(i);
        }
        let mut centers = CenterSet::new(points.dim());
        for (c, idx) in members.iter().enumerate() {
            if idx.is_empty() {
                return Err(Error::invalid(format!("ground-truth cluster {c} is empty")));
            }
            let mu = centroid(&Subset::new(points, idx))?;
            centers.push(&mu, Provenance::synthetic(0))?;
        }
        let phi_star = cost(points, &centers)?;
        Ok(Self {
            labels,
            centers,
            phi_star,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn centers(&self) -> &CenterSet {
        &self.centers
    }

    pub fn phi_star(&self) -> f64 {
        self.phi_star
    }

    pub fn cluster_count(&self) -> usize {
        self.centers.len()
    }

    /// Point indices of each cluster, in ascending order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Replaces `φ*` by a recorded value after checking it against the
    /// recomputed `φ_X(C*)`.
    pub fn with_recorded_phi_star(mut self, recorded: f64) -> Result<Self> {
        if !approx_eq_rel(recorded, self.phi_star, 1e-9) {
            return Err(Error::invalid(format!(
                "recorded phistar {recorded} disagrees with recomputed {}",
                self.phi_star
            )));
        }
        self.phi_star = recorded;
        Ok(self)
    }
}

pub(crate) fn approx_eq_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// An indexed, immutable point set of uniform dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    coords: Vec<f64>,
    ground_truth: Option<GroundTruth>,
    label: String,
}

impl Dataset {
    /// Builds a dataset from row-major coordinates.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be >= 1"));
        }
        if coords.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("non-finite coordinate {bad}")));
        }
        Ok(Self {
            dim,
            coords,
            ground_truth: None,
            label: String::new(),
        })
    }

    pub fn from_points(points: &[Point]) -> Result<Self> {
        let dim = points
            .first()
            .map(Point::dim)
            .ok_or_else(|| Error::invalid("no points given"))?;
        let mut coords = Vec::with_capacity(dim * points.len());
        for p in points {
            check_dims(dim, p.dim())?;
            coords.extend_from_slice(p);
        }
        Self::new(dim, coords)
    }

    /// One-dimensional dataset, handy for small examples.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(1, values.to_vec())
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_ground_truth(mut self, truth: GroundTruth) -> Result<Self> {
        if truth.labels.len() != self.len() {
            return Err(Error::invalid("ground truth does not cover every point"));
        }
        check_dims(self.dim, truth.centers.dim())?;
        let recomputed = cost(&self, &truth.centers)?;
        if !approx_eq_rel(recomputed, truth.phi_star, 1e-9) {
            return Err(Error::invalid(format!(
                "phistar {} disagrees with recomputed cost {recomputed}",
                truth.phi_star
            )));
        }
        self.ground_truth = Some(truth);
        Ok(self)
    }

    /// Attaches the partition given by `labels`, deriving `C*` and `φ*`.
    pub fn with_labels(self, labels: Vec<usize>) -> Result<Self> {
        let truth = GroundTruth::from_labels(&self, labels)?;
        self.with_ground_truth(truth)
    }

    pub fn ground_truth(&self) -> Option<&GroundTruth> {
        self.ground_truth.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// `Δ`, the largest pairwise distance. Quadratic; intended for metadata
    /// reporting on modest inputs.
    pub fn max_distance(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.max(sq_dist(self.point(i), self.point(j)));
            }
        }
        best.sqrt()
    }
}

impl Points for Dataset {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
}

/// A borrowed view of selected points of another collection.
#[derive(Clone, Copy, Debug)]
pub struct Subset<'a, P: ?Sized> {
    base: &'a P,
    indices: &'a [usize],
}

impl<'a, P: Points + ?Sized> Subset<'a, P> {
    pub fn new(base: &'a P, indices: &'a [usize]) -> Self {
        Self { base, indices }
    }

    pub fn indices(&self) -> &[usize] {
        self.indices
    }
}

impl<P: Points + ?Sized> Points for Subset<'_, P> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn len(&self) -> usize {
        self.indices.len()
    }

    fn point(&self, i: usize) -> &[f64] {
        self.base.point(self.indices[i])
    }
}

/// Where a center came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Provenance {
    /// Sampling round; 0 for the initial center(s).
    pub round: usize,
    /// Index of the dataset point the center copies, `None` when synthetic.
    pub source: Option<usize>,
}

impl Provenance {
    pub fn sampled(round: usize, source: usize) -> Self {
        Self {
            round,
            source: Some(source),
        }
    }

    pub fn synthetic(round: usize) -> Self {
        Self {
            round,
            source: None,
        }
    }
}

/// Ordered, append-only list of centers with provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterSet {
    dim: usize,
    coords: Vec<f64>,
    provenance: Vec<Provenance>,
}

impl CenterSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
            provenance: Vec::new(),
        }
    }

    /// Centers copied from the given dataset points, all tagged with `round`.
    pub fn from_indices<P: Points + ?Sized>(points: &P, indices: &[usize], round: usize) -> Self {
        let mut set = Self::new(points.dim());
        for &i in indices {
            set.coords.extend_from_slice(points.point(i));
            set.provenance.push(Provenance::sampled(round, i));
        }
        set
    }

    /// Synthetic centers (no dataset provenance), e.g. a warm start.
    pub fn from_points<P: Points + ?Sized>(points: &P) -> Self {
        let mut set = Self::new(points.dim());
        for i in 0..points.len() {
            set.coords.extend_from_slice(points.point(i));
            set.provenance.push(Provenance::synthetic(0));
        }
        set
    }

    pub fn push(&mut self, coords: &[f64], provenance: Provenance) -> Result<()> {
        check_dims(self.dim, coords.len())?;
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("non-finite coordinate {bad}")));
        }
        self.coords.extend_from_slice(coords);
        self.provenance.push(provenance);
        Ok(())
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Copy of the first `len` centers.
    pub fn prefix(&self, len: usize) -> CenterSet {
        let len = len.min(self.len());
        Self {
            dim: self.dim,
            coords: self.coords[..len * self.dim].to_vec(),
            provenance: self.provenance[..len].to_vec(),
        }
    }

    /// Dataset indices of centers that were sampled from the data.
    pub fn source_indices(&self) -> Vec<usize> {
        self.provenance.iter().filter_map(|p| p.source).collect()
    }
}

impl Points for CenterSet {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.provenance.len()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
}

impl fmt::Display for CenterSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c:?}")?;
        }
        write!(f, "]")
    }
}
