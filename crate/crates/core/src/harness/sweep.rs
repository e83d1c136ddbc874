//! Grids of runs, one summary row per cell.
//!
//! A grid is a base config plus value lists for some axes. Cells are the
//! cartesian product of the non-empty lists; an empty list keeps the base
//! value. A grid with every list empty has no cells.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::Mode;
use crate::error::{Error, Result};
use crate::rational::Q;

use super::config::RunConfig;
use super::run::{execute, RunSummary};
use super::trace::BudgetReason;
use crate::algorithms;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct SweepGrid {
    pub base: RunConfig,
    pub mode: Vec<Mode>,
    pub depth: Vec<u32>,
    pub h: Vec<u64>,
    pub override_b: Vec<u32>,
    pub algorithm: Vec<String>,
    pub epsilon: Vec<Q>,
}

impl SweepGrid {
    pub fn from_toml(text: &str) -> Result<SweepGrid> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("sweep grid: {e}")))
    }

    pub fn is_empty(&self) -> bool {
        self.mode.is_empty()
            && self.depth.is_empty()
            && self.h.is_empty()
            && self.override_b.is_empty()
            && self.algorithm.is_empty()
            && self.epsilon.is_empty()
    }

    pub fn cells(&self) -> Vec<RunConfig> {
        if self.is_empty() {
            return Vec::new();
        }
        fn axis<T: Clone>(values: &[T], base: T) -> Vec<T> {
            if values.is_empty() {
                vec![base]
            } else {
                values.to_vec()
            }
        }
        let base = RunConfig {
            trace: None,
            summary: None,
            ..self.base.clone()
        };
        let mut out = Vec::new();
        for mode in axis(&self.mode, base.mode) {
            for depth in axis(&self.depth.iter().map(|d| Some(*d)).collect::<Vec<_>>(), base.depth) {
                for h in axis(&self.h.iter().map(|h| Some(*h)).collect::<Vec<_>>(), base.h) {
                    for b in axis(&self.override_b.iter().map(|b| Some(*b)).collect::<Vec<_>>(), base.override_b) {
                        for alg in axis(&self.algorithm, base.algorithm.clone()) {
                            for eps in axis(&self.epsilon.iter().map(|e| Some(*e)).collect::<Vec<_>>(), base.epsilon) {
                                let theorem = mode == Mode::Theorem;
                                out.push(RunConfig {
                                    mode,
                                    depth: if theorem { None } else { depth },
                                    h: if theorem { h } else { None },
                                    override_b: b,
                                    algorithm: alg.clone(),
                                    epsilon: eps,
                                    ..base.clone()
                                });
                            }
                        }
                    }
                }
            }
        }
        out.dedup();
        out
    }
}

/// One CSV row. Column order is part of the file format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mode: Mode,
    pub depth: Option<u32>,
    pub b: Option<u32>,
    pub h: Option<u64>,
    pub k: Option<Q>,
    pub epsilon: Option<Q>,
    pub algorithm: String,
    pub requests: Option<u64>,
    pub alg_cost: Option<Q>,
    pub adv_cost: Option<Q>,
    pub opt_cost: Option<Q>,
    pub ratio: Option<Q>,
    pub offset: Option<Q>,
    pub complete_phases: Option<u64>,
    pub complete_epochs: Option<u64>,
    pub budget_hit: Option<BudgetReason>,
    /// Empty unless the cell failed.
    pub error: Option<String>,
}

pub const COLUMNS: [&str; 17] = [
    "mode",
    "depth",
    "b",
    "h",
    "k",
    "epsilon",
    "algorithm",
    "requests",
    "alg_cost",
    "adv_cost",
    "opt_cost",
    "ratio",
    "offset",
    "complete_phases",
    "complete_epochs",
    "budget_hit",
    "error",
];

impl SweepRow {
    pub fn from_summary(s: &RunSummary) -> SweepRow {
        SweepRow {
            mode: s.mode,
            depth: Some(s.depth),
            b: Some(s.b),
            h: Some(s.h),
            k: Some(s.k),
            epsilon: Some(s.epsilon),
            algorithm: s.algorithm.clone(),
            requests: Some(s.requests),
            alg_cost: Some(s.alg_cost),
            adv_cost: Some(s.adv_cost),
            opt_cost: s.opt_cost,
            ratio: s.empirical_ratio,
            offset: Some(s.additive_offset),
            complete_phases: Some(s.complete_phases),
            complete_epochs: Some(s.complete_epochs),
            budget_hit: s.budget_hit,
            error: None,
        }
    }

    fn failed(c: &RunConfig, e: &Error) -> SweepRow {
        SweepRow {
            mode: c.mode,
            depth: c.depth,
            b: c.override_b,
            h: c.h,
            k: c.k,
            epsilon: c.epsilon,
            algorithm: c.algorithm.clone(),
            requests: None,
            alg_cost: None,
            adv_cost: None,
            opt_cost: None,
            ratio: None,
            offset: None,
            complete_phases: None,
            complete_epochs: None,
            budget_hit: None,
            error: Some(e.to_string().replace(['\n', '\r'], " ")),
        }
    }

    fn key(&self) -> (String, u32, u32, u64, Q, String) {
        (
            self.mode.to_string(),
            self.depth.unwrap_or(0),
            self.b.unwrap_or(0),
            self.h.unwrap_or(0),
            self.epsilon.unwrap_or_default(),
            self.algorithm.clone(),
        )
    }
}

fn run_cell(c: &RunConfig) -> Result<RunSummary> {
    let res = c.resolve()?;
    let opts = algorithms::parse_options(&c.option)?;
    let mut alg = algorithms::by_name(&c.algorithm, &opts, &res.params)?;
    execute(c, alg.as_mut(), None)
}

/// Runs every cell concurrently; failures become rows with an error.
pub fn sweep(grid: &SweepGrid) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = grid
        .cells()
        .par_iter()
        .map(|c| match run_cell(c) {
            Ok(s) => SweepRow::from_summary(&s),
            Err(e) => SweepRow::failed(c, &e),
        })
        .collect();
    rows.sort_by(|a, b| a.key().cmp(&b.key()));
    rows
}

pub fn write_csv(rows: &[SweepRow], out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(input: impl Read) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(COLUMNS) {
        return Err(Error::Parse(format!("unexpected summary columns {headers:?}")));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("summary csv: {e}"))
}
