use std::io::{self, Write};

/// Column order of trace files.
pub const TRACE_HEADER: &str =
    "round,centers,added,phi_x,phi_u,k_unsettled,alpha,heavy_count,massive_count";

/// Per-round record of an overseeding run. The ground-truth columns are
/// `None` until the trace is annotated against a dataset with ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundTrace {
    pub round: usize,
    /// `|C|` after the round.
    pub centers: usize,
    pub added: usize,
    /// `φ_X(C)` after the round.
    pub cost: f64,
    pub unsettled_cost: Option<f64>,
    pub unsettled: Option<usize>,
    pub alpha: Option<f64>,
    pub heavy: Option<usize>,
    pub massive: Option<usize>,
}

impl RoundTrace {
    pub fn new(round: usize, centers: usize, added: usize, cost: f64) -> Self {
        Self {
            round,
            centers,
            added,
            cost,
            unsettled_cost: None,
            unsettled: None,
            alpha: None,
            heavy: None,
            massive: None,
        }
    }

    /// One comma-separated row in `TRACE_HEADER` order; missing values are
    /// left empty.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.round,
            self.centers,
            self.added,
            fmt_real(self.cost),
            self.unsettled_cost.map(fmt_real).unwrap_or_default(),
            self.unsettled.map(|v| v.to_string()).unwrap_or_default(),
            self.alpha.map(fmt_real).unwrap_or_default(),
            self.heavy.map(|v| v.to_string()).unwrap_or_default(),
            self.massive.map(|v| v.to_string()).unwrap_or_default(),
        )
    }
}

/// Reals are written with 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trace<'a, W, I>(out: &mut W, rows: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a RoundTrace>,
{
    writeln!(out, "{TRACE_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv_row())?;
    }
    Ok(())
}
