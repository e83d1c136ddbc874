//! The offline strategy that keeps `b^(level-1)` servers in every marked
//! child of every game, priced two ways: by formula as events arrive, and by
//! replaying explicit server positions with hindsight.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::adversary::{AdversaryEvent, Mode};
use crate::error::{Error, Result};
use crate::harness::trace::Record;
use crate::mass::CostLedger;
use crate::rational::Q;
use crate::tree::{NodePath, TreeMetric};

/// Offline cost of one top-level phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvPhase {
    pub game: NodePath,
    pub phase: u64,
    pub level: u32,
    /// Cost on the game's child edges (the servers crossing into the fresh child).
    pub level_cost: Q,
    /// Everything charged below that level until the next top-level phase.
    pub inner_cost: Q,
}

/// Offline cost of one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvEpoch {
    pub epoch: u64,
    pub subtree: u32,
    /// Cost on the root edge into the epoch subtree (`b^i`).
    pub entry_cost: Q,
    /// Cost charged inside the epoch subtree during the epoch.
    pub inner_cost: Q,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdvAccount {
    /// Placement of the phase-0 layout before the first request.
    pub initial: CostLedger,
    pub ledger: CostLedger,
    pub per_phase: Vec<AdvPhase>,
    pub per_epoch: Vec<AdvEpoch>,
    pub total: Q,
}

/// Prices the offline strategy incrementally from adversary events.
#[derive(Clone, Debug)]
pub struct AdvTracker {
    metric: TreeMetric,
    b: u32,
    depth: u32,
    top_len: usize,
    account: AdvAccount,
}

impl AdvTracker {
    /// `depth` is the depth of the attacked subtrees.
    pub fn new(mode: Mode, b: u32, depth: u32, metric: &TreeMetric) -> AdvTracker {
        let mut t = AdvTracker {
            metric: metric.clone(),
            b,
            depth,
            top_len: mode.has_epochs() as usize,
            account: AdvAccount::default(),
        };
        if mode == Mode::Lemma {
            let placement = t.descent(0, (b as u64).pow(depth));
            t.account.initial = placement.clone();
            t.account.ledger.add(&placement);
            t.account.total = placement.down_total;
        }
        t
    }

    /// `servers` units moved from depth `from_depth` down to leaves.
    fn descent(&self, from_depth: usize, servers: u64) -> CostLedger {
        let mut l = CostLedger::new();
        let d = self.metric.depth();
        for t in from_depth + 1..=d {
            l.charge_down(d - t + 1, Q::from(servers) * self.metric.edge_length_at_depth(t));
        }
        l
    }

    /// Charges the moves implied by `event`; returns the added cost.
    pub fn on_event(&mut self, event: &AdversaryEvent) -> Q {
        let delta = match event {
            AdversaryEvent::PhaseStart { game, level, phase, .. } => {
                let delta = self.descent(game.len(), (self.b as u64).pow(level - 1));
                let level_cost = delta.down(*level as usize);
                if game.len() == self.top_len {
                    self.account.per_phase.push(AdvPhase {
                        game: game.clone(),
                        phase: *phase,
                        level: *level,
                        level_cost,
                        inner_cost: delta.down_total - level_cost,
                    });
                } else if let Some(p) = self.account.per_phase.last_mut() {
                    p.inner_cost += delta.down_total;
                }
                if let Some(e) = self.account.per_epoch.last_mut() {
                    e.inner_cost += delta.down_total;
                }
                delta
            }
            AdversaryEvent::EpochStart { epoch, subtree, .. } => {
                let delta = self.descent(0, (self.b as u64).pow(self.depth));
                let entry = delta.down(self.metric.depth());
                self.account.per_epoch.push(AdvEpoch {
                    epoch: *epoch,
                    subtree: *subtree,
                    entry_cost: entry,
                    inner_cost: delta.down_total - entry,
                });
                delta
            }
            _ => return Q::ZERO,
        };
        self.account.ledger.add(&delta);
        self.account.total += delta.down_total;
        delta.down_total
    }

    pub fn total(&self) -> Q {
        self.account.total
    }

    pub fn account(&self) -> &AdvAccount {
        &self.account
    }

    pub fn into_account(self) -> AdvAccount {
        self.account
    }
}

/// Formula-based offline account for a whole trace.
pub fn adv_cost(records: impl IntoIterator<Item = Record>) -> Result<AdvAccount> {
    let mut tracker: Option<AdvTracker> = None;
    let mut opened = false;
    for r in records {
        match r {
            Record::Header(h) => {
                let p = &h.resolved.params;
                let metric = TreeMetric::new(h.resolved.tree_depth as usize, p.gamma)?;
                tracker = Some(AdvTracker::new(h.resolved.mode, p.b, p.depth, &metric));
                opened = h.resolved.params.depth == 0 && h.resolved.mode == Mode::Lemma;
            }
            Record::Event { event, .. } => {
                let t = tracker.as_mut().ok_or_else(|| Error::Trace("event before header".into()))?;
                opened |= matches!(
                    (&event, t.top_len),
                    (AdversaryEvent::PhaseStart { .. }, 0) | (AdversaryEvent::EpochStart { .. }, 1)
                );
                t.on_event(&event);
            }
            Record::Step(s) if !opened => {
                return Err(Error::Trace(format!("request {} precedes any phase or epoch boundary", s.index)));
            }
            _ => {}
        }
    }
    tracker
        .map(AdvTracker::into_account)
        .ok_or_else(|| Error::Trace("missing header".into()))
}

/// Which child each phase gave up, known only in hindsight. Incomplete
/// phases give up the lowest carry-over not marked yet.
#[derive(Clone, Debug, Default)]
pub struct DropPlan {
    dropped: HashMap<(NodePath, u64), u32>,
    pending: HashMap<(NodePath, u64), (Vec<u32>, Vec<u32>)>,
}

impl DropPlan {
    pub fn observe(&mut self, event: &AdversaryEvent) {
        match event {
            AdversaryEvent::PhaseStart {
                game, phase, prev_marked, ..
            } => {
                self.pending
                    .insert((game.clone(), *phase), (prev_marked.clone(), Vec::new()));
            }
            AdversaryEvent::Mark { game, phase, child, .. } => {
                if let Some((_, marked)) = self.pending.get_mut(&(game.clone(), *phase)) {
                    marked.push(*child);
                }
            }
            AdversaryEvent::PhaseComplete {
                game, phase, dropped, ..
            } => {
                self.pending.remove(&(game.clone(), *phase));
                self.dropped.insert((game.clone(), *phase), *dropped);
            }
            _ => {}
        }
    }

    pub fn finish(mut self) -> DropPlan {
        for (key, (prev, marked)) in std::mem::take(&mut self.pending) {
            if let Some(c) = prev.iter().filter(|c| !marked.contains(c)).min() {
                self.dropped.insert(key, *c);
            }
        }
        self
    }

    pub fn dropped(&self, game: &NodePath, phase: u64) -> Option<u32> {
        self.dropped.get(&(game.clone(), phase)).copied()
    }
}

/// Explicit replay of the offline servers.
#[derive(Clone, Debug)]
pub struct AdvReplayer {
    metric: TreeMetric,
    b: u32,
    depth: u32,
    plan: DropPlan,
    at: BTreeMap<NodePath, u64>,
    epoch_home: Option<NodePath>,
    pub ledger: CostLedger,
    /// Level cost of each top-level phase move, in order.
    pub phase_level_costs: Vec<(NodePath, u64, Q)>,
    pub requests_checked: u64,
    pub violations: Vec<String>,
    top_len: usize,
}

fn layout(root: &NodePath, levels: u32, b: u32) -> Vec<NodePath> {
    let mut out = vec![root.clone()];
    for _ in 0..levels {
        out = out.iter().flat_map(|n| (0..b).map(move |c| n.join(c))).collect();
    }
    out
}

impl AdvReplayer {
    pub fn new(mode: Mode, b: u32, depth: u32, metric: &TreeMetric, plan: DropPlan) -> AdvReplayer {
        let mut r = AdvReplayer {
            metric: metric.clone(),
            b,
            depth,
            plan,
            at: BTreeMap::new(),
            epoch_home: None,
            ledger: CostLedger::new(),
            phase_level_costs: Vec::new(),
            requests_checked: 0,
            violations: Vec::new(),
            top_len: mode.has_epochs() as usize,
        };
        let servers = (b as u64).pow(depth);
        r.at.insert(NodePath::root(), servers);
        if mode == Mode::Lemma {
            let root = NodePath::root();
            r.relocate(&root, &root, depth);
        }
        r
    }

    /// Moves every server inside `source` to the layout below `target`.
    fn relocate(&mut self, source: &NodePath, target: &NodePath, levels: u32) -> Q {
        let mut units: Vec<NodePath> = Vec::new();
        let keys: Vec<NodePath> = self
            .at
            .range(source.clone()..)
            .take_while(|(n, _)| source.is_ancestor_of(n))
            .map(|(n, _)| n.clone())
            .collect();
        for n in keys {
            let c = self.at.remove(&n).unwrap_or(0);
            units.extend(std::iter::repeat(n).take(c as usize));
        }
        let targets = layout(target, levels, self.b);
        if units.len() != targets.len() {
            self.violations.push(format!(
                "offline move {source} -> {target}: found {} servers, layout needs {}",
                units.len(),
                targets.len()
            ));
        }
        let mut moved = CostLedger::new();
        for (from, to) in units.iter().zip(&targets) {
            moved.record(&self.metric, from, to, Q::ONE);
            *self.at.entry(to.clone()).or_default() += 1;
        }
        for extra in units.iter().skip(targets.len()) {
            *self.at.entry(extra.clone()).or_default() += 1;
        }
        self.ledger.add(&moved);
        moved.down_total
    }

    pub fn on_event(&mut self, index: u64, event: &AdversaryEvent) {
        match event {
            AdversaryEvent::PhaseStart {
                game, level, phase, fresh, ..
            } => {
                let Some(dropped) = self.plan.dropped(game, *phase) else {
                    self.violations
                        .push(format!("before request {index}: no dropped child known for phase {phase} of game {game:?}"));
                    return;
                };
                let before = self.ledger.down(*level as usize);
                self.relocate(&game.join(dropped), &game.join(*fresh), level - 1);
                if game.len() == self.top_len {
                    let cost = self.ledger.down(*level as usize) - before;
                    self.phase_level_costs.push((game.clone(), *phase, cost));
                }
            }
            AdversaryEvent::EpochStart { subtree, .. } => {
                let source = self.epoch_home.take().unwrap_or_else(NodePath::root);
                let target = NodePath::root().join(*subtree);
                self.relocate(&source, &target, self.depth);
                self.epoch_home = Some(target);
            }
            _ => {}
        }
    }

    pub fn on_request(&mut self, index: u64, request: &NodePath) {
        self.requests_checked += 1;
        if self.at.get(request).copied().unwrap_or(0) == 0 {
            self.violations
                .push(format!("request {index} at {request:?} has no offline server"));
        }
    }
}
