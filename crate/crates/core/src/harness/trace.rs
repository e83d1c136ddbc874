//! Line-delimited JSON traces. The first line is a header carrying a schema
//! tag and the full config; every later line is one record.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::adversary::AdversaryEvent;
use crate::error::{Error, Result};
use crate::mass::{CostLedger, Transfer};
use crate::rational::Q;
use crate::tree::NodePath;

use super::config::{Resolved, RunConfig};

pub const SCHEMA: &str = "hkserver-trace/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema: String,
    pub config: RunConfig,
    pub resolved: Resolved,
    /// Real-valued constants, 30 significant digits, informational only.
    pub derived: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based request number `m`.
    pub index: u64,
    pub request: NodePath,
    pub transfers: Vec<Transfer>,
    #[serde(with = "crate::mass::level_map")]
    pub down: BTreeMap<usize, Q>,
    #[serde(with = "crate::mass::level_map")]
    pub up: BTreeMap<usize, Q>,
    /// Masses after the step at every node the step touched.
    pub masses: BTreeMap<NodePath, Q>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetReason {
    MaxRequests,
    MaxCost,
    MaxPhases,
}

impl BudgetReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            BudgetReason::MaxRequests => "max_requests",
            BudgetReason::MaxCost => "max_cost",
            BudgetReason::MaxPhases => "max_phases",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Footer {
    pub requests: u64,
    pub alg: CostLedger,
    pub adv: CostLedger,
    pub complete_phases: u64,
    pub complete_epochs: u64,
    pub budget_hit: Option<BudgetReason>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Record {
    Header(Box<Header>),
    /// Emitted before request `index`.
    Event { index: u64, event: AdversaryEvent },
    Step(StepRecord),
    /// The run stopped at a budget before request `index` would be issued.
    Budget { index: u64, reason: BudgetReason, alg_cost: Q },
    /// The algorithm broke the serve contract on request `index`.
    Violation { index: u64, message: String },
    Footer(Footer),
}

pub struct TraceWriter<W: Write> {
    out: W,
    line: Vec<u8>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> TraceWriter<W> {
        TraceWriter { out, line: Vec::with_capacity(256) }
    }

    pub fn write(&mut self, record: &Record) -> Result<()> {
        self.line.clear();
        serde_json::to_writer(&mut self.line, record)?;
        self.line.push(b'\n');
        self.out.write_all(&self.line)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Streams records from a trace; the first must be a header.
pub struct TraceReader<R: BufRead> {
    input: R,
    line_no: u64,
    buf: String,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(input: R) -> TraceReader<R> {
        TraceReader {
            input,
            line_no: 0,
            buf: String::new(),
        }
    }

    pub fn header(&mut self) -> Result<Header> {
        match self.next() {
            Some(Ok(Record::Header(h))) if h.schema == SCHEMA => Ok(*h),
            Some(Ok(Record::Header(h))) => Err(Error::Trace(format!("unsupported schema {:?}", h.schema))),
            Some(Ok(_)) => Err(Error::Trace("first record is not a header".into())),
            Some(Err(e)) => Err(e),
            None => Err(Error::Trace("empty trace".into())),
        }
    }

    /// 1-based line number of the record returned last.
    pub fn line_no(&self) -> u64 {
        self.line_no
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Result<Record>> {
        loop {
            self.buf.clear();
            match self.input.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            let line = self.buf.trim_end();
            if line.is_empty() {
                continue;
            }
            return Some(
                serde_json::from_str(line)
                    .map_err(|e| Error::Trace(format!("line {}: {e}", self.line_no))),
            );
        }
    }
}
