//! Reshapes summary rows into one data file per (mode, algorithm) series.
//!
//! Plot files are for plotting tools only, so they carry floats next to the
//! exact ratio.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;

use super::sweep::SweepRow;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum XAxis {
    #[default]
    Depth,
    H,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub mode: String,
    pub algorithm: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Series {
    pub fn file_name(&self) -> String {
        format!("{}_{}.csv", self.mode, self.algorithm)
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Rows that failed or have no ratio are skipped. With `log_x` an
/// `ln_ln_h` column follows the raw `h`.
pub fn plot_series(rows: &[SweepRow], x: XAxis, log_x: bool) -> Vec<Series> {
    let mut groups: BTreeMap<(String, String), Vec<&SweepRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.error.is_none() && r.ratio.is_some()) {
        groups.entry((r.mode.to_string(), r.algorithm.clone())).or_default().push(r);
    }
    let mut columns = vec![match x {
        XAxis::Depth => "depth",
        XAxis::H => "h",
    }];
    if log_x {
        if x == XAxis::Depth {
            columns.push("h");
        }
        columns.push("ln_ln_h");
    }
    columns.extend(["b", "ratio", "ratio_exact", "requests"]);
    groups
        .into_iter()
        .map(|((mode, algorithm), mut rs)| {
            rs.sort_by_key(|r| (x_value(r, x), r.b));
            let rows = rs
                .into_iter()
                .map(|r| {
                    let h = r.h.unwrap_or(0);
                    let mut row = vec![x_value(r, x).to_string()];
                    if log_x {
                        if x == XAxis::Depth {
                            row.push(h.to_string());
                        }
                        let lnln = (h as f64).ln().ln();
                        row.push(if lnln.is_finite() { format!("{lnln:.6}") } else { String::new() });
                    }
                    let ratio = r.ratio.unwrap_or_default();
                    row.push(r.b.map(|b| b.to_string()).unwrap_or_default());
                    row.push(format!("{:.9}", ratio.to_f64()));
                    row.push(ratio.to_string());
                    row.push(r.requests.unwrap_or(0).to_string());
                    row
                })
                .collect();
            Series {
                mode,
                algorithm,
                columns: columns.clone(),
                rows,
            }
        })
        .collect()
}

fn x_value(r: &SweepRow, x: XAxis) -> u64 {
    match x {
        XAxis::Depth => r.depth.unwrap_or(0) as u64,
        XAxis::H => r.h.unwrap_or(0),
    }
}

pub fn write_series(series: &[Series], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for s in series {
        let p = dir.join(s.file_name());
        fs::write(&p, s.to_csv())?;
        out.push(p);
    }
    Ok(out)
}
