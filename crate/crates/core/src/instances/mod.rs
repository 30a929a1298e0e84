//! Synthetic instances with known optimal clusterings, and dataset files.

mod io;
mod lower_bound;
mod simplex;

pub use io::{
    load_centers, load_dataset, read_dataset, read_truth, save_centers, save_dataset,
    truth_path, write_dataset, write_truth,
};
pub use lower_bound::{gen_lower_bound, LowerBoundParams, MAX_SQUARED_NORM, WARN_SQUARED_NORM};
pub use simplex::{gen_simplex, SimplexParams};
