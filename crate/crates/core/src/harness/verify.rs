//! Re-checks a persisted trace from scratch: replays the masses, the
//! adversary and both offline accounts, then optionally reruns the config
//! and compares bytes.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversary::{phase_cost_bound, Adversary, AdversaryEvent, Mode};
use crate::algorithms;
use crate::error::{Error, Result};
use crate::mass::{CostLedger, MassConfig};
use crate::offline::{AdvReplayer, AdvTracker, BoundsChecker, BoundsReport, DropPlan};
use crate::rational::Q;
use crate::tree::{online_mass_at, NodePath, TreeMetric};

use super::run::execute;
use super::trace::{Header, Record, TraceReader};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Format,
    Conservation,
    Dominance,
    Ledger,
    Served,
    Contract,
    Freshness,
    Pigeonhole,
    PhaseCost,
    PrefixBound,
    AdvAccounting,
    Feasibility,
    Determinism,
}

impl Check {
    pub const ALL: [Check; 13] = [
        Check::Format,
        Check::Conservation,
        Check::Dominance,
        Check::Ledger,
        Check::Served,
        Check::Contract,
        Check::Freshness,
        Check::Pigeonhole,
        Check::PhaseCost,
        Check::PrefixBound,
        Check::AdvAccounting,
        Check::Feasibility,
        Check::Determinism,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Check::Format => "format",
            Check::Conservation => "conservation",
            Check::Dominance => "dominance",
            Check::Ledger => "ledger",
            Check::Served => "served",
            Check::Contract => "contract",
            Check::Freshness => "freshness",
            Check::Pigeonhole => "pigeonhole",
            Check::PhaseCost => "phase_cost",
            Check::PrefixBound => "prefix_bound",
            Check::AdvAccounting => "adv_accounting",
            Check::Feasibility => "feasibility",
            Check::Determinism => "determinism",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: Check,
    /// 1-based trace line.
    pub line: u64,
    /// Request number the record belongs to, if any.
    pub index: Option<u64>,
    pub message: String,
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    /// Rerun the recorded config and compare the bytes.
    pub rerun: bool,
    /// Messages kept per check; counts are always exact.
    pub keep: usize,
}

impl Default for VerifyOptions {
    fn default() -> VerifyOptions {
        VerifyOptions { rerun: true, keep: 20 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct VerifyReport {
    pub lines: u64,
    pub requests: u64,
    pub mode: Option<Mode>,
    pub algorithm: String,
    /// Number of individual checks performed, per kind.
    pub checked: BTreeMap<Check, u64>,
    pub counts: BTreeMap<Check, u64>,
    pub violations: Vec<Violation>,
    /// The trace ends without a footer.
    pub truncated: bool,
    /// The last top-level phase never completed.
    pub incomplete_phase: bool,
    /// `Some(true)` when a rerun produced identical bytes.
    pub rerun_identical: Option<bool>,
    pub notes: Vec<String>,
    pub bounds: Option<BoundsReport>,
}

impl VerifyReport {
    pub fn total_violations(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_clean(&self) -> bool {
        self.total_violations() == 0
    }

    pub fn count(&self, check: Check) -> u64 {
        self.counts.get(&check).copied().unwrap_or(0)
    }

    pub fn first(&self, check: Check) -> Option<&Violation> {
        self.violations.iter().find(|v| v.check == check)
    }

    fn flag(&mut self, keep: usize, check: Check, line: u64, index: Option<u64>, message: String) {
        let n = self.counts.entry(check).or_default();
        *n += 1;
        if *n as usize <= keep {
            self.violations.push(Violation {
                check,
                line,
                index,
                message,
            });
        }
    }

    fn tick(&mut self, check: Check, n: u64) {
        *self.checked.entry(check).or_default() += n;
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut line = |t: String| {
            s.push_str(&t);
            s.push('\n');
        };
        line(format!(
            "trace: {} lines, {} requests, algorithm {}",
            self.lines, self.requests, self.algorithm
        ));
        for c in Check::ALL {
            let checked = self.checked.get(&c).copied().unwrap_or(0);
            let bad = self.count(c);
            if checked > 0 || bad > 0 {
                line(format!("  {:<15} {:>12} checked {:>8} violations", c.as_str(), checked, bad));
            }
        }
        if let Some(b) = &self.bounds {
            line(format!(
                "  offset {} (stabilized bound {})",
                b.offset,
                b.stabilized_bound.map(|q| q.to_string()).unwrap_or_else(|| "n/a".into())
            ));
        }
        if self.truncated {
            line("  trace is truncated: prefix inequalities only".into());
        }
        if self.incomplete_phase {
            line("  final phase incomplete".into());
        }
        match self.rerun_identical {
            Some(true) => line("  rerun: byte-identical".into()),
            Some(false) => line("  rerun: DIFFERS".into()),
            None => {}
        }
        for n in &self.notes {
            line(format!("  note: {n}"));
        }
        for v in &self.violations {
            let at = v.index.map(|i| format!(" request {i}")).unwrap_or_default();
            line(format!("  [{}] line {}{at}: {}", v.check, v.line, v.message));
        }
        line(if self.is_clean() {
            "OK: zero violations".into()
        } else {
            format!("FAILED: {} violations", self.total_violations())
        });
        s
    }
}

pub fn verify_path(path: &Path, opts: &VerifyOptions) -> Result<VerifyReport> {
    let open = || -> Result<Box<dyn BufRead>> { Ok(Box::new(BufReader::new(File::open(path)?))) };
    verify_with(open, opts)
}

pub fn verify_bytes(bytes: &[u8], opts: &VerifyOptions) -> Result<VerifyReport> {
    verify_with(|| Ok(Box::new(bytes) as Box<dyn BufRead + '_>), opts)
}

/// `open` must yield the same bytes on every call; the trace is read up to three times.
pub fn verify_with<'a>(open: impl Fn() -> Result<Box<dyn BufRead + 'a>>, opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut reader = TraceReader::new(open()?);
    let header = reader.header()?;
    let mut plan = DropPlan::default();
    for r in reader.by_ref() {
        if let Ok(Record::Event { event, .. }) = r {
            plan.observe(&event);
        }
    }
    let mut v = Verifier::new(&header, plan.finish(), opts.keep)?;
    let mut reader = TraceReader::new(open()?);
    reader.header()?;
    let mut pending_error: Option<(u64, Error)> = None;
    while let Some(r) = reader.next() {
        if let Some((line, e)) = pending_error.take() {
            v.report.flag(opts.keep, Check::Format, line, None, e.to_string());
        }
        match r {
            Ok(rec) => v.record(reader.line_no(), rec),
            Err(e) => pending_error = Some((reader.line_no(), e)),
        }
    }
    v.report.lines = reader.line_no();
    if let Some((_, e)) = pending_error {
        v.report.notes.push(format!("last line unreadable ({e}); treated as truncation"));
        v.report.truncated = true;
    }
    let mut report = v.finish();
    if opts.rerun {
        report.rerun_identical = rerun_matches(&header, open()?, report.truncated, &mut report.notes)?;
        if report.rerun_identical == Some(false) {
            report.flag(opts.keep, Check::Determinism, 0, None, "rerun of the recorded config differs".into());
        }
        report.tick(Check::Determinism, 1);
    }
    Ok(report)
}

/// Compares everything written against a reference stream.
struct CompareWriter<R: Read> {
    reference: R,
    offset: u64,
    differs_at: Option<u64>,
    reference_ended: bool,
    scratch: Vec<u8>,
}

impl<R: Read> Write for CompareWriter<R> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        if self.differs_at.is_some() || self.reference_ended {
            return Ok(buf.len());
        }
        self.scratch.resize(buf.len(), 0);
        let mut got = 0;
        while got < buf.len() {
            let n = self.reference.read(&mut self.scratch[got..])?;
            if n == 0 {
                self.reference_ended = true;
                break;
            }
            got += n;
        }
        if let Some(i) = (0..got).find(|&i| self.scratch[i] != buf[i]) {
            self.differs_at = Some(self.offset + i as u64);
        }
        self.offset += got as u64;
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

fn rerun_matches(header: &Header, reference: impl Read, truncated: bool, notes: &mut Vec<String>) -> Result<Option<bool>> {
    let config = &header.config;
    let opts = algorithms::parse_options(&config.option)?;
    let mut alg = match algorithms::by_name(&config.algorithm, &opts, &header.resolved.params) {
        Ok(a) => a,
        Err(_) => {
            notes.push(format!("algorithm {} is not a builtin; rerun skipped", config.algorithm));
            return Ok(None);
        }
    };
    let mut cmp = CompareWriter {
        reference,
        offset: 0,
        differs_at: None,
        reference_ended: false,
        scratch: Vec::new(),
    };
    // A contract violation is part of the recorded trace, not a rerun failure.
    let _ = execute(config, alg.as_mut(), Some(&mut cmp));
    if !cmp.reference_ended {
        let mut rest = [0u8; 1];
        if cmp.reference.read(&mut rest)? > 0 && cmp.differs_at.is_none() {
            cmp.differs_at = Some(cmp.offset);
        }
    }
    if let Some(at) = cmp.differs_at {
        notes.push(format!("rerun diverges at byte {at}"));
        return Ok(Some(false));
    }
    if cmp.reference_ended && !truncated {
        notes.push("rerun is longer than the trace".into());
        return Ok(Some(false));
    }
    Ok(Some(true))
}

struct OpenPhase {
    level: u32,
    raw_level_start: Q,
    fresh: u32,
    prev: Vec<u32>,
    marked: Vec<u32>,
}

struct Verifier {
    keep: usize,
    b: u32,
    depth: u32,
    epsilon: Q,
    k: Q,
    top_len: usize,
    whole_tree_view: bool,
    metric: TreeMetric,
    mass: MassConfig,
    ledger: CostLedger,
    adversary: Adversary,
    expected: VecDeque<AdversaryEvent>,
    expected_request: Option<(u64, NodePath)>,
    generated_for: u64,
    tracker: AdvTracker,
    replayer: AdvReplayer,
    bounds: BoundsChecker,
    open: HashMap<NodePath, OpenPhase>,
    used_children: HashMap<NodePath, BTreeSet<u32>>,
    last_index: u64,
    footer_seen: bool,
    report: VerifyReport,
}

impl Verifier {
    fn new(header: &Header, plan: DropPlan, keep: usize) -> Result<Verifier> {
        let res = &header.resolved;
        let p = &res.params;
        let metric = TreeMetric::new(res.tree_depth as usize, p.gamma)?;
        let mass = MassConfig::initial(p.k, NodePath::root());
        let whole = p.k == p.cap(p.depth);
        Ok(Verifier {
            keep,
            b: p.b,
            depth: p.depth,
            epsilon: p.epsilon,
            k: p.k,
            top_len: res.mode.has_epochs() as usize,
            whole_tree_view: whole && res.mode == Mode::Lemma,
            adversary: Adversary::new(res.mode, p, &mass)?,
            tracker: AdvTracker::new(res.mode, p.b, p.depth, &metric),
            replayer: AdvReplayer::new(res.mode, p.b, p.depth, &metric, plan),
            bounds: BoundsChecker::new(res.mode, res.rho, p.b, p.depth, &metric, whole),
            metric,
            mass,
            ledger: CostLedger::new(),
            expected: VecDeque::new(),
            expected_request: None,
            generated_for: 0,
            open: HashMap::new(),
            used_children: HashMap::new(),
            last_index: 0,
            footer_seen: false,
            report: VerifyReport {
                mode: Some(res.mode),
                algorithm: header.config.algorithm.clone(),
                ..Default::default()
            },
        })
    }

    fn flag(&mut self, check: Check, line: u64, index: Option<u64>, message: String) {
        self.report.flag(self.keep, check, line, index, message);
    }

    /// Regenerates the adversary's output for request `index` once.
    fn generate(&mut self, index: u64) {
        if self.generated_for >= index {
            return;
        }
        self.generated_for = index;
        let mut events = Vec::new();
        let r = self.adversary.next_request(&self.mass, &mut events);
        self.expected = events.into();
        self.expected_request = Some((index, r));
    }

    fn record(&mut self, line: u64, rec: Record) {
        if self.footer_seen {
            self.flag(Check::Format, line, None, "record after the footer".into());
        }
        match rec {
            Record::Header(_) => self.flag(Check::Format, line, None, "second header".into()),
            Record::Event { index, event } => self.event(line, index, event),
            Record::Step(s) => self.step(line, s),
            Record::Budget { index, .. } => {
                self.expect_index(line, index, false);
                if self.generated_for == index && !self.expected.is_empty() {
                    self.flag(Check::Determinism, line, Some(index), "budget stop before all events were recorded".into());
                }
            }
            Record::Violation { index, message } => {
                self.flag(Check::Contract, line, Some(index), message);
            }
            Record::Footer(f) => {
                self.footer_seen = true;
                self.report.tick(Check::Ledger, 2);
                if f.alg != self.ledger {
                    self.flag(Check::Ledger, line, None, "footer online totals differ from the sum of steps".into());
                }
                if f.adv != self.tracker.account().ledger {
                    self.flag(Check::AdvAccounting, line, None, "footer offline totals differ from the event account".into());
                }
                if f.requests != self.last_index {
                    self.flag(
                        Check::Format,
                        line,
                        None,
                        format!("footer says {} requests, trace has {}", f.requests, self.last_index),
                    );
                }
            }
        }
    }

    fn expect_index(&mut self, line: u64, index: u64, is_step: bool) {
        let want = self.last_index + 1;
        if index != want {
            self.flag(Check::Format, line, Some(index), format!("expected request index {want}"));
        }
        if is_step {
            self.last_index = index;
        }
    }

    fn event(&mut self, line: u64, index: u64, event: AdversaryEvent) {
        if index != self.last_index + 1 {
            self.flag(Check::Format, line, Some(index), format!("event index, expected {}", self.last_index + 1));
        }
        self.generate(index);
        self.report.tick(Check::Determinism, 1);
        match self.expected.pop_front() {
            Some(e) if e == event => {}
            other => {
                let msg = format!("replayed adversary emits {other:?}, trace has {event:?}");
                self.flag(Check::Determinism, line, Some(index), msg);
            }
        }
        self.structure(line, index, &event);
        self.bounds.on_event(index, &event);
        self.tracker.on_event(&event);
        self.replayer.on_event(index, &event);
    }

    fn structure(&mut self, line: u64, index: u64, event: &AdversaryEvent) {
        let at = Some(index);
        match event {
            AdversaryEvent::PhaseStart {
                game,
                level,
                fresh,
                prev_marked,
                ..
            } => {
                self.report.tick(Check::Freshness, 1);
                let used = self.used_children.entry(game.clone()).or_default();
                let reused = used.contains(fresh);
                if used.is_empty() {
                    used.extend(prev_marked.iter().copied());
                }
                let reused = reused || prev_marked.contains(fresh);
                used.insert(*fresh);
                if reused {
                    self.flag(Check::Freshness, line, at, format!("child {fresh} of {game} was used before"));
                }
                if game.len() == self.top_len {
                    let child = game.join(*fresh);
                    let raw = self.mass.subtree_mass(&child);
                    if self.whole_tree_view && raw.is_positive() {
                        self.flag(Check::Freshness, line, at, format!("fresh subtree {child} holds mass {raw}"));
                    }
                }
                let raw_level_start = self.ledger.down(*level as usize);
                self.open.insert(
                    game.clone(),
                    OpenPhase {
                        level: *level,
                        raw_level_start,
                        fresh: *fresh,
                        prev: prev_marked.clone(),
                        marked: Vec::new(),
                    },
                );
            }
            AdversaryEvent::Mark {
                game,
                j,
                child,
                mass,
                bound,
                ..
            } => {
                self.report.tick(Check::Pigeonhole, 1);
                let Some(open) = self.open.get_mut(game) else {
                    self.flag(Check::Format, line, at, format!("mark in {game} outside a phase"));
                    return;
                };
                let ok_child = if *j == 0 {
                    *child == open.fresh
                } else {
                    open.prev.contains(child) && !open.marked.contains(child)
                };
                open.marked.push(*child);
                let (level, b) = (open.level, self.b);
                if !ok_child || open.marked.len() as u32 != j + 1 {
                    self.flag(Check::Pigeonhole, line, at, format!("mark {j} of {game} picks child {child}"));
                }
                if *j > 0 {
                    let expect = crate::adversary::marking_candidate_bound(
                        online_mass_at(b, level).unwrap_or(Q::ZERO),
                        online_mass_at(b, level - 1).unwrap_or(Q::ZERO),
                        self.epsilon,
                        b,
                        *j,
                    );
                    match bound {
                        Some(bd) if *bd == expect && *mass <= expect => {}
                        _ => {
                            let msg = format!("mark {j} of {game}: mass {mass} vs bound {expect}");
                            self.flag(Check::Pigeonhole, line, at, msg);
                        }
                    }
                }
                if self.whole_tree_view && game.len() == self.top_len {
                    let raw = self.mass.subtree_mass(&game.join(*child));
                    if raw != *mass {
                        self.flag(Check::Pigeonhole, line, at, format!("marked child {child} holds {raw}, event says {mass}"));
                    }
                }
            }
            AdversaryEvent::PhaseComplete {
                game,
                level,
                marked,
                dropped,
                level_cost,
                cost_bound,
                ..
            } => {
                self.report.tick(Check::PhaseCost, 1);
                let Some(open) = self.open.remove(game) else {
                    self.flag(Check::Format, line, at, format!("phase of {game} completes without a start"));
                    return;
                };
                if open.marked != *marked || marked.len() as u32 != self.b || !open.prev.contains(dropped) || marked.contains(dropped) {
                    self.flag(Check::Pigeonhole, line, at, format!("phase of {game} marks {marked:?}, drops {dropped}"));
                }
                let lvl = *level as usize;
                let unit = self.metric.edge_length_at_level(lvl);
                let expect = phase_cost_bound(
                    online_mass_at(self.b, *level).unwrap_or(Q::ZERO),
                    online_mass_at(self.b, level - 1).unwrap_or(Q::ZERO),
                    self.epsilon,
                    self.b,
                )
                .map(|q| q * unit);
                if *cost_bound != expect {
                    self.flag(Check::PhaseCost, line, at, format!("cost bound {cost_bound:?}, expected {expect:?}"));
                }
                if let Some(bd) = expect {
                    if *level_cost < bd {
                        self.flag(Check::PhaseCost, line, at, format!("level-{level} cost {level_cost} below {bd}"));
                    }
                    if self.whole_tree_view && game.len() == self.top_len {
                        let raw = self.ledger.down(lvl) - open.raw_level_start;
                        if raw < bd {
                            self.flag(Check::PhaseCost, line, at, format!("raw level-{level} cost {raw} below {bd}"));
                        }
                    }
                }
                if game.len() == self.top_len {
                    self.report.tick(Check::AdvAccounting, 1);
                    let want = Q::from(self.b).pow(level - 1) * unit;
                    let got = self
                        .tracker
                        .account()
                        .per_phase
                        .iter()
                        .rev()
                        .find(|p| &p.game == game)
                        .map(|p| p.level_cost);
                    if got != Some(want) {
                        self.flag(Check::AdvAccounting, line, at, format!("offline level cost {got:?}, expected {want}"));
                    }
                }
            }
            AdversaryEvent::EpochComplete { mass, .. } => {
                if *mass <= online_mass_at(self.b, self.depth).unwrap_or(Q::ZERO) {
                    self.flag(Check::Format, line, at, format!("epoch ended with mass {mass} under the threshold"));
                }
            }
            AdversaryEvent::EpochStart { .. } => {}
        }
    }

    fn step(&mut self, line: u64, s: super::trace::StepRecord) {
        let index = s.index;
        self.expect_index(line, index, true);
        self.report.requests = index;
        self.generate(index);
        self.report.tick(Check::Determinism, 1);
        if !self.expected.is_empty() {
            let msg = format!("{} adversary events missing before the request", self.expected.len());
            self.flag(Check::Determinism, line, Some(index), msg);
            self.expected.clear();
        }
        match self.expected_request.take() {
            Some((i, r)) if i == index && r == s.request => {}
            other => {
                let msg = format!("replayed adversary requests {other:?}, trace has {}", s.request);
                self.flag(Check::Determinism, line, Some(index), msg);
            }
        }
        let (delta, applied) = match self.mass.apply_transfers(&self.metric, &s.transfers, &mut self.ledger) {
            Ok(d) => (d, &s.transfers[..]),
            Err(e) => {
                self.flag(Check::Conservation, line, Some(index), format!("transfers cannot be applied: {e}"));
                (CostLedger::new(), &[][..])
            }
        };
        self.report.tick(Check::Conservation, 1 + s.masses.len() as u64);
        let total = self.mass.total();
        if total != self.k {
            self.flag(Check::Conservation, line, Some(index), format!("total mass {total}, expected {}", self.k));
        }
        for (node, q) in &s.masses {
            let have = self.mass.mass(node);
            if have != *q {
                self.flag(Check::Conservation, line, Some(index), format!("mass at {node} is {have}, trace says {q}"));
            }
        }
        self.report.tick(Check::Ledger, 1);
        if delta.down_by_level != s.down || delta.up_by_level != s.up {
            self.flag(Check::Ledger, line, Some(index), "recorded cost deltas differ from the transfers".into());
        }
        self.report.tick(Check::Dominance, 1);
        if self.ledger.up_total > self.ledger.down_total {
            let msg = format!("upward {} exceeds downward {}", self.ledger.up_total, self.ledger.down_total);
            self.flag(Check::Dominance, line, Some(index), msg);
        }
        self.report.tick(Check::Served, 1);
        if !self.mass.is_served(&s.request) {
            self.flag(Check::Served, line, Some(index), format!("{} is not served", s.request));
        }
        self.report.tick(Check::Feasibility, 1);
        self.replayer.on_request(index, &s.request);
        self.adversary.observe(applied, &s.request);
        self.bounds.on_step(index, applied, &delta);
    }

    fn finish(mut self) -> VerifyReport {
        self.report.truncated |= !self.footer_seen;
        let replay = std::mem::take(&mut self.replayer.violations);
        for m in replay {
            self.flag(Check::Feasibility, 0, None, m);
        }
        self.report.tick(Check::AdvAccounting, 1);
        let tracked: Vec<(NodePath, u64, Q)> = self
            .tracker
            .account()
            .per_phase
            .iter()
            .map(|p| (p.game.clone(), p.phase, p.level_cost))
            .collect();
        if tracked != self.replayer.phase_level_costs {
            self.flag(Check::AdvAccounting, 0, None, "replayed offline level costs differ from the event account".into());
        }
        if self.replayer.ledger.down_total != self.tracker.total() {
            let msg = format!(
                "replayed offline cost {} differs from the event account {}",
                self.replayer.ledger.down_total,
                self.tracker.total()
            );
            self.flag(Check::AdvAccounting, 0, None, msg);
        }
        let bounds = self.bounds.finish();
        self.report.tick(Check::PrefixBound, bounds.prefixes);
        for m in &bounds.violations {
            let check = if m.contains("slack") { Check::PrefixBound } else { Check::PhaseCost };
            self.report.flag(self.keep, check, 0, None, m.clone());
        }
        self.report.incomplete_phase = bounds.incomplete_phase;
        self.report.bounds = Some(bounds);
        self.report
    }
}
