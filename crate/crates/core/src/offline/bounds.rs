//! Prefix, per-phase and per-epoch cost inequalities for one trace.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::adversary::{AdversaryEvent, Mode};
use crate::error::{Error, Result};
use crate::harness::trace::Record;
use crate::mass::{CostLedger, Transfer};
use crate::rational::Q;
use crate::tree::{NodePath, TreeMetric};
use crate::view::attributable_down_cost;

use super::adv::{AdvAccount, AdvTracker};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrefixRow {
    pub prefix_m: u64,
    pub alg_cost: Q,
    pub adv_cost: Q,
    pub opt_cost: Option<Q>,
    pub ratio: Option<Q>,
    pub slack: Q,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub game: NodePath,
    pub phase: u64,
    pub level: u32,
    pub complete: bool,
    /// Charged cost on the game's child edges in the transformed algorithm's view.
    pub view_level_cost: Option<Q>,
    /// The same measured on the raw configuration (only when the game spans the whole tree).
    pub raw_level_cost: Option<Q>,
    pub cost_bound: Option<Q>,
    pub alg_cost: Q,
    pub adv_level_cost: Q,
    pub adv_cost: Q,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: u64,
    pub subtree: u32,
    pub complete: bool,
    /// Online cost charged inside the epoch subtree (its entry edge included).
    pub alg_cost: Q,
    pub adv_inner: Q,
    pub adv_entry: Q,
    /// `(rho ADV + b^i i/(2b)) / (ADV + b^i)` and `min(rho, i/(2b))`.
    pub guaranteed: Q,
    pub floor: Q,
    pub measured_ratio: Option<Q>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub rho: Q,
    pub prefixes: u64,
    pub alg_cost: Q,
    pub adv_cost: Q,
    /// Largest `rho ADV - ALG` over all prefixes (the additive constant).
    pub offset: Q,
    /// Largest slack up to the end of the first complete phase, and that prefix.
    pub stabilized_bound: Option<Q>,
    pub stabilized_at: Option<u64>,
    pub final_slack: Q,
    pub phase_checks: u64,
    pub phases: Vec<PhaseRow>,
    pub epochs: Vec<EpochRow>,
    pub samples: Vec<PrefixRow>,
    pub incomplete_phase: bool,
    pub opt: Option<(u64, Q)>,
    pub violations: Vec<String>,
    pub adv: AdvAccount,
}

impl BoundsReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    /// One JSON object per line: phase rows, epoch rows, violations, then a
    /// closing summary.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for p in &self.phases {
            writeln!(out, "{}", serde_json::json!({ "row": "phase", "data": p }))?;
        }
        for e in &self.epochs {
            writeln!(out, "{}", serde_json::json!({ "row": "epoch", "data": e }))?;
        }
        for v in &self.violations {
            writeln!(out, "{}", serde_json::json!({ "row": "violation", "message": v }))?;
        }
        let summary = serde_json::json!({
            "row": "summary",
            "rho": self.rho,
            "prefixes": self.prefixes,
            "alg_cost": self.alg_cost,
            "adv_cost": self.adv_cost,
            "offset": self.offset,
            "stabilized_bound": self.stabilized_bound,
            "stabilized_at": self.stabilized_at,
            "final_slack": self.final_slack,
            "phase_checks": self.phase_checks,
            "incomplete_phase": self.incomplete_phase,
            "opt": self.opt,
        });
        writeln!(out, "{summary}")?;
        Ok(())
    }

    /// `prefix_m,alg_cost,adv_cost,opt_cost,ratio` with exact values.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "prefix_m,alg_cost,adv_cost,opt_cost,ratio")?;
        for r in &self.samples {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.prefix_m,
                r.alg_cost,
                r.adv_cost,
                r.opt_cost.map(|q| q.to_string()).unwrap_or_default(),
                r.ratio.map(|q| q.to_string()).unwrap_or_default()
            )?;
        }
        Ok(())
    }
}

struct OpenPhase {
    row: PhaseRow,
    alg_level_start: Q,
    alg_start: Q,
    adv_level_start: Q,
    adv_start: Q,
}

struct OpenEpoch {
    row: EpochRow,
    path: NodePath,
}

/// Streaming checker fed with events and steps in trace order.
pub struct BoundsChecker {
    metric: TreeMetric,
    b: u32,
    depth: u32,
    top_len: usize,
    whole_tree_view: bool,
    adv: AdvTracker,
    alg: CostLedger,
    sample_every: Option<u64>,
    open_phase: Option<OpenPhase>,
    open_epoch: Option<OpenEpoch>,
    report: BoundsReport,
}

impl BoundsChecker {
    /// `whole_tree_view` says the top game's view equals the raw configuration
    /// (online mass equals the top cap), so raw level costs are comparable.
    pub fn new(mode: Mode, rho: Q, b: u32, depth: u32, metric: &TreeMetric, whole_tree_view: bool) -> BoundsChecker {
        let adv = AdvTracker::new(mode, b, depth, metric);
        BoundsChecker {
            metric: metric.clone(),
            b,
            depth,
            top_len: mode.has_epochs() as usize,
            whole_tree_view: whole_tree_view && mode == Mode::Lemma,
            adv,
            alg: CostLedger::new(),
            sample_every: None,
            open_phase: None,
            open_epoch: None,
            report: BoundsReport {
                rho,
                ..Default::default()
            },
        }
    }

    pub fn sample_every(mut self, every: u64) -> BoundsChecker {
        self.sample_every = Some(every.max(1));
        self
    }

    pub fn adv_total(&self) -> Q {
        self.adv.total()
    }

    pub fn alg(&self) -> &CostLedger {
        &self.alg
    }

    pub fn offset(&self) -> Q {
        self.report.offset
    }

    fn slack(&self) -> Q {
        self.report.rho * self.adv.total() - self.alg.down_total
    }

    fn sample(&mut self) {
        let m = self.report.prefixes;
        if self.report.samples.last().is_some_and(|r| r.prefix_m == m) {
            return;
        }
        let (alg, adv) = (self.alg.down_total, self.adv.total());
        self.report.samples.push(PrefixRow {
            prefix_m: m,
            alg_cost: alg,
            adv_cost: adv,
            opt_cost: None,
            ratio: adv.is_positive().then(|| alg / adv),
            slack: self.slack(),
        });
    }

    fn close_phase(&mut self, complete: bool, view_cost: Option<Q>, bound: Option<Q>) {
        let Some(open) = self.open_phase.take() else { return };
        let mut row = open.row;
        let level = row.level as usize;
        row.complete = complete;
        row.view_level_cost = view_cost;
        row.cost_bound = bound;
        row.raw_level_cost = self.whole_tree_view.then(|| self.alg.down(level) - open.alg_level_start);
        row.alg_cost = self.alg.down_total - open.alg_start;
        row.adv_level_cost = self.adv.account().ledger.down(level) - open.adv_level_start;
        row.adv_cost = self.adv.total() - open.adv_start;
        if complete {
            if let (Some(raw), Some(b)) = (row.raw_level_cost, bound) {
                if raw < b {
                    self.report.violations.push(format!(
                        "phase {} of game {:?}: raw level-{} cost {raw} below bound {b}",
                        row.phase, row.game, row.level
                    ));
                }
            }
        }
        self.report.phases.push(row);
    }

    fn close_epoch(&mut self, complete: bool) {
        let Some(open) = self.open_epoch.take() else { return };
        let mut row = open.row;
        row.complete = complete;
        let acc = self.adv.account();
        if let Some(e) = acc.per_epoch.iter().rev().find(|e| e.epoch == row.epoch) {
            row.adv_inner = e.inner_cost;
            row.adv_entry = e.entry_cost;
        }
        let i = Q::from(self.depth);
        let bi = Q::from(self.b).pow(self.depth);
        let aug = bi * i / Q::from(2 * self.b);
        let rho = self.report.rho;
        row.guaranteed = (rho * row.adv_inner + aug) / (row.adv_inner + bi);
        row.floor = rho.min(i / Q::from(2 * self.b));
        let adv = row.adv_inner + row.adv_entry;
        row.measured_ratio = adv.is_positive().then(|| row.alg_cost / adv);
        if complete && row.guaranteed < row.floor {
            self.report.violations.push(format!(
                "epoch {}: guaranteed ratio {} below {}",
                row.epoch, row.guaranteed, row.floor
            ));
        }
        self.report.epochs.push(row);
    }

    /// `index` is the request the event precedes.
    pub fn on_event(&mut self, index: u64, event: &AdversaryEvent) {
        let adv_before = self.adv.total();
        let adv_level_before = |s: &Self, level: u32| s.adv.account().ledger.down(level as usize);
        match event {
            AdversaryEvent::PhaseStart { game, level, phase, .. } if game.len() == self.top_len => {
                self.close_phase(false, None, None);
                let adv_level_start = adv_level_before(self, *level);
                self.open_phase = Some(OpenPhase {
                    row: PhaseRow {
                        game: game.clone(),
                        phase: *phase,
                        level: *level,
                        complete: false,
                        view_level_cost: None,
                        raw_level_cost: None,
                        cost_bound: None,
                        alg_cost: Q::ZERO,
                        adv_level_cost: Q::ZERO,
                        adv_cost: Q::ZERO,
                    },
                    alg_level_start: self.alg.down(*level as usize),
                    alg_start: self.alg.down_total,
                    adv_level_start,
                    adv_start: adv_before,
                });
            }
            AdversaryEvent::PhaseComplete {
                game,
                phase,
                level,
                level_cost,
                cost_bound,
                ..
            } => {
                if self.report.stabilized_at.is_none() {
                    self.report.stabilized_at = Some(index.saturating_sub(1));
                    self.report.stabilized_bound = Some(self.report.offset);
                }
                self.report.phase_checks += 1;
                if let Some(b) = cost_bound {
                    if level_cost < b {
                        self.report.violations.push(format!(
                            "phase {phase} of game {game:?}: level-{level} cost {level_cost} below bound {b}"
                        ));
                    }
                }
                if game.len() == self.top_len {
                    self.close_phase(true, Some(*level_cost), *cost_bound);
                    self.sample();
                }
            }
            AdversaryEvent::EpochStart { epoch, subtree, .. } => {
                self.close_phase(false, None, None);
                self.close_epoch(false);
                self.open_epoch = Some(OpenEpoch {
                    row: EpochRow {
                        epoch: *epoch,
                        subtree: *subtree,
                        complete: false,
                        alg_cost: Q::ZERO,
                        adv_inner: Q::ZERO,
                        adv_entry: Q::ZERO,
                        guaranteed: Q::ZERO,
                        floor: Q::ZERO,
                        measured_ratio: None,
                    },
                    path: NodePath::root().join(*subtree),
                });
            }
            AdversaryEvent::EpochComplete { .. } => {
                self.close_phase(false, None, None);
                self.close_epoch(true);
                self.sample();
            }
            _ => {}
        }
        self.adv.on_event(event);
    }

    /// One served request with its transfers and ledger delta.
    pub fn on_step(&mut self, index: u64, transfers: &[Transfer], delta: &CostLedger) {
        self.alg.add(delta);
        self.report.prefixes = index;
        if let Some(open) = &mut self.open_epoch {
            for t in transfers {
                open.row.alg_cost += attributable_down_cost(&self.metric, &open.path, t);
            }
        }
        let slack = self.slack();
        if index == 1 || slack > self.report.offset {
            self.report.offset = if index == 1 { slack } else { self.report.offset.max(slack) };
        }
        if let (Some(at), Some(bound)) = (self.report.stabilized_at, self.report.stabilized_bound) {
            if index > at && slack > bound {
                self.report.violations.push(format!(
                    "prefix {index}: slack {slack} exceeds the stabilized bound {bound}"
                ));
            }
        }
        if self.sample_every.is_some_and(|e| index % e == 0) {
            self.sample();
        }
    }

    pub fn finish(mut self) -> BoundsReport {
        self.report.incomplete_phase = self.open_phase.is_some();
        self.close_phase(false, None, None);
        self.close_epoch(false);
        self.sample();
        self.report.alg_cost = self.alg.down_total;
        self.report.adv_cost = self.adv.total();
        self.report.final_slack = self.slack();
        self.report.adv = self.adv.into_account();
        if self.report.violations.len() > 100 {
            let n = self.report.violations.len();
            self.report.violations.truncate(100);
            self.report.violations.push(format!("... {} more", n - 100));
        }
        self.report
    }
}

/// Batch form over an in-memory trace. `opt` is an optimal offline cost for
/// the whole executed prefix, when one is known.
pub fn validate_bounds(records: &[Record], opt: Option<Q>) -> Result<BoundsReport> {
    let header = match records.first() {
        Some(Record::Header(h)) => h,
        _ => return Err(Error::Trace("missing header".into())),
    };
    let res = &header.resolved;
    let metric = TreeMetric::new(res.tree_depth as usize, res.params.gamma)?;
    let whole = res.params.k == res.params.cap(res.params.depth);
    let mut checker = BoundsChecker::new(res.mode, res.rho, res.params.b, res.params.depth, &metric, whole);
    for r in &records[1..] {
        match r {
            Record::Event { index, event } => checker.on_event(*index, event),
            Record::Step(s) => {
                let delta = CostLedger {
                    down_total: s.down.values().copied().sum(),
                    up_total: s.up.values().copied().sum(),
                    down_by_level: s.down.clone(),
                    up_by_level: s.up.clone(),
                };
                checker.on_step(s.index, &s.transfers, &delta);
            }
            _ => {}
        }
    }
    let mut report = checker.finish();
    if let Some(opt) = opt {
        report.opt = Some((report.prefixes, opt));
        if let Some(last) = report.samples.last_mut() {
            last.opt_cost = Some(opt);
        }
        if opt > report.adv_cost {
            report
                .violations
                .push(format!("optimal cost {opt} exceeds the offline strategy's {}", report.adv_cost));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_guarantee_matches_the_closed_form() {
        let metric = TreeMetric::new(2, Q::new(1, 4)).unwrap();
        let mut c = BoundsChecker::new(Mode::Theorem, Q::new(19, 18), 3, 1, &metric, false);
        c.on_event(1, &AdversaryEvent::EpochStart { epoch: 1, subtree: 0, threshold: Q::new(7, 2) });
        c.on_event(2, &AdversaryEvent::EpochComplete { epoch: 1, subtree: 0, mass: Q::int(4) });
        let r = c.finish();
        let row = &r.epochs[0];
        // entry 3 * 1, descent 3 * 1/4
        assert_eq!((row.adv_entry, row.adv_inner), (Q::int(3), Q::new(3, 4)));
        let expected = (Q::new(19, 18) * Q::new(3, 4) + Q::new(1, 2)) / (Q::new(3, 4) + Q::int(3));
        assert_eq!(row.guaranteed, expected);
        assert_eq!(row.floor, Q::new(1, 6));
        assert!(r.is_clean());
    }

    #[test]
    fn slack_must_not_grow_after_the_first_phase() {
        let metric = TreeMetric::new(1, Q::new(1, 4)).unwrap();
        let mut c = BoundsChecker::new(Mode::Lemma, Q::ONE, 2, 1, &metric, true);
        let start = |phase| AdversaryEvent::PhaseStart {
            game: NodePath::root(),
            level: 1,
            phase,
            fresh: phase as u32 + 1,
            prev_marked: vec![0, 1],
        };
        let done = |phase| AdversaryEvent::PhaseComplete {
            game: NodePath::root(),
            level: 1,
            phase,
            marked: vec![2, 0],
            dropped: 1,
            level_cost: Q::int(2),
            cost_bound: Some(Q::new(3, 2)),
        };
        let step = |down: Q| CostLedger {
            down_by_level: [(1, down)].into_iter().collect(),
            up_by_level: Default::default(),
            down_total: down,
            up_total: Q::ZERO,
        };
        c.on_event(1, &start(1));
        c.on_step(1, &[], &step(Q::ONE));
        c.on_step(2, &[], &step(Q::ONE));
        c.on_event(3, &done(1));
        c.on_event(3, &start(2));
        c.on_step(3, &[], &step(Q::ZERO));
        let r = c.finish();
        // initial 2 + phase 1; slack after step 1 is 3 - 1 = 2
        assert_eq!(r.stabilized_bound, Some(Q::int(2)));
        assert!(r.is_clean(), "{:?}", r.violations);
        assert_eq!(r.phases[0].raw_level_cost, Some(Q::int(2)));
        assert!(r.incomplete_phase);
    }
}
