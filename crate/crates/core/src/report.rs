//! CSV report stream shared by all studies.

use std::fmt::Write as _;

pub const SCHEMA_HEADER: &str = "# schema=1";
pub const REPORT_COLUMNS: &str = "quantity,t,bin_i,bin_j,value,stderr,zscore";

/// One row of a report: a named quantity at time `t`, optionally indexed by
/// up to two bins, with its standard error and z-score when they apply.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub quantity: String,
    pub t: Option<f64>,
    pub bins: (Option<usize>, Option<usize>),
    pub value: f64,
    pub stderr: Option<f64>,
    pub zscore: Option<f64>,
}

impl ReportRow {
    pub fn scalar(quantity: impl Into<String>, t: Option<f64>, value: f64) -> Self {
        Self { quantity: quantity.into(), t, bins: (None, None), value, stderr: None, zscore: None }
    }

    pub fn with_error(mut self, stderr: f64, zscore: f64) -> Self {
        self.stderr = Some(stderr);
        self.zscore = Some(zscore);
        self
    }

    pub fn with_bins(mut self, i: usize, j: Option<usize>) -> Self {
        self.bins = (Some(i), j);
        self
    }
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Render rows as a CSV document (schema line, column line, rows).
pub fn render_csv(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str(SCHEMA_HEADER);
    out.push('\n');
    out.push_str(REPORT_COLUMNS);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.quantity,
            opt(r.t),
            opt(r.bins.0),
            opt(r.bins.1),
            r.value,
            opt(r.stderr),
            opt(r.zscore)
        );
    }
    out
}
