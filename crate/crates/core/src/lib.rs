//! k-means|| overseeding with weighted k-means++ reduction, synthetic
//! instances with known optima, ground-truth diagnostics and a simulated
//! coordinator/worker execution.

pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod instances;
pub mod mpcsim;
pub mod overseed;
pub mod sampling;
pub mod seeding;

pub use error::{Error, Result};
pub use geometry::{cost, CenterSet, CostCache, Dataset, Points};
pub use overseed::{kmeans_parallel, overseed, OverseedConfig, OverseedResult, ParallelOutcome};
pub use sampling::RngStream;
