//! Output records and their CSV / JSON encodings.

use std::fmt::Write as _;

use mgent_core::CMatrix;
use serde::Serialize;

pub const SERIES_HEADER: &str = "t,S_matter,S_gravity,purity,trace_distance_to_unreset";

/// One row of a time series. `S_gravity` is only defined when the global
/// state is pure; `trace_distance_to_unreset` only when resets are scheduled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRecord {
    pub t: f64,
    #[serde(rename = "S_matter")]
    pub s_matter: f64,
    #[serde(rename = "S_gravity")]
    pub s_gravity: Option<f64>,
    pub purity: f64,
    pub trace_distance_to_unreset: Option<f64>,
}

/// Floats in CSV use 17 significant digits so that values round-trip.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn series_csv(rows: &[SeriesRecord]) -> String {
    let mut out = String::with_capacity(rows.len() * 120 + SERIES_HEADER.len() + 1);
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.t),
            fmt_f64(r.s_matter),
            fmt_opt(r.s_gravity),
            fmt_f64(r.purity),
            fmt_opt(r.trace_distance_to_unreset)
        );
    }
    out
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output records serialize");
    s.push('\n');
    s
}

/// Row-major `[re, im]` pairs, the same layout the config accepts.
pub fn matrix_pairs(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}
