//! Subtree-local configurations with a fixed mass cap.
//!
//! A sub-adversary attacking a subtree `S` needs to see an algorithm that owns
//! exactly `cap` mass inside `S`. A deficit `cap - m` is shown as virtual mass
//! sitting at the root of `S`. A surplus `m - cap` is parked outside `S`: the
//! view then belongs to a transformed algorithm that left that mass at the
//! parent and serves with mass already inside `S`. Later outflows from `S`
//! consume parked mass first, so `parked == max(0, m - cap)` at all times.
//!
//! The view is kept up to date incrementally from the parent's transfers and
//! re-emits its own transfers (for nested views) together with their in-view
//! cost.

use std::collections::BTreeMap;

use crate::mass::{CostLedger, MassConfig, Transfer};
use crate::rational::Q;
use crate::tree::{NodePath, TreeMetric};

#[derive(Clone, Debug)]
pub struct CappedView {
    root: NodePath,
    cap: Q,
    view: MassConfig,
    /// Per node: parent-side mass minus in-view mass (positive entries only).
    deficit: BTreeMap<NodePath, Q>,
    parked: Q,
    /// In-view mass excluding the virtual part; equals `min(m, cap)`.
    inner: Q,
    ledger: CostLedger,
}

impl CappedView {
    /// View of a subtree that currently holds no mass.
    pub fn empty(root: NodePath, cap: Q) -> CappedView {
        CappedView {
            view: MassConfig::initial(cap, root.clone()),
            root,
            cap,
            deficit: BTreeMap::new(),
            parked: Q::ZERO,
            inner: Q::ZERO,
            ledger: CostLedger::new(),
        }
    }

    /// View of `root`'s subtree in `config`. A surplus is parked by taking it
    /// from the shallowest nodes first (lexicographic among equals).
    pub fn snapshot(config: &MassConfig, root: &NodePath, cap: Q) -> CappedView {
        let m = config.subtree_mass(root);
        let mut v = CappedView::empty(root.clone(), cap);
        v.view = MassConfig::empty();
        let mut nodes: Vec<(NodePath, Q)> = config.iter_subtree(root).map(|(n, q)| (n.clone(), q)).collect();
        nodes.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
        let mut surplus = (m - cap).max(Q::ZERO);
        v.parked = surplus;
        for (node, q) in nodes {
            let park = q.min(surplus);
            surplus -= park;
            if park.is_positive() {
                v.deficit.insert(node.clone(), park);
            }
            v.view.deposit(&node, q - park);
        }
        v.inner = m.min(cap);
        v.view.deposit(root, cap - v.inner);
        v
    }

    pub fn root(&self) -> &NodePath {
        &self.root
    }

    pub fn cap(&self) -> Q {
        self.cap
    }

    /// The local configuration; always totals `cap`.
    pub fn local(&self) -> &MassConfig {
        &self.view
    }

    pub fn parked(&self) -> Q {
        self.parked
    }

    pub fn virtual_mass(&self) -> Q {
        self.cap - self.inner
    }

    /// Cost paid by the transformed algorithm inside the view.
    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    pub fn deficit(&self, node: &NodePath) -> Q {
        self.deficit.get(node).copied().unwrap_or_default()
    }

    fn real(&self, node: &NodePath) -> Q {
        let m = self.view.mass(node);
        if *node == self.root {
            m - self.virtual_mass()
        } else {
            m
        }
    }

    fn add_deficit(&mut self, node: &NodePath, delta: Q) {
        if delta.is_zero() {
            return;
        }
        let e = self.deficit.entry(node.clone()).or_default();
        *e += delta;
        debug_assert!(!e.is_negative(), "negative deficit at {node}");
        if e.is_zero() {
            self.deficit.remove(node);
        }
    }

    fn emit(&mut self, metric: &TreeMetric, out: &mut Vec<Transfer>, from: &NodePath, to: &NodePath, amount: Q) {
        if !amount.is_positive() || from == to {
            return;
        }
        let t = Transfer::new(from.clone(), to.clone(), amount);
        self.view
            .apply(metric, &t, &mut self.ledger)
            .expect("view transfer must be feasible");
        out.push(t);
    }

    fn contains(&self, node: &NodePath) -> bool {
        self.root.is_ancestor_of(node)
    }

    /// Nodes other than `exclude` ordered by distance to `anchor`, then path.
    fn nearest<'a>(
        metric: &TreeMetric,
        anchor: &NodePath,
        exclude: &NodePath,
        candidates: impl Iterator<Item = (&'a NodePath, Q)>,
    ) -> Vec<(NodePath, Q)> {
        let mut v: Vec<(Q, NodePath, Q)> = candidates
            .filter(|(n, q)| *n != exclude && q.is_positive())
            .map(|(n, q)| (metric.distance(anchor, n), n.clone(), q))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        v.into_iter().map(|(_, n, q)| (n, q)).collect()
    }

    /// Feeds the parent's transfers for one serve step, then makes sure the
    /// request (if inside) is served in the view. Returns the in-view
    /// transfers, already applied.
    pub fn observe(&mut self, metric: &TreeMetric, transfers: &[Transfer], request: Option<&NodePath>) -> Vec<Transfer> {
        let mut out = Vec::new();
        for t in transfers {
            match (self.contains(&t.from), self.contains(&t.to)) {
                (false, false) => {}
                (true, true) => self.internal(metric, &mut out, t),
                (false, true) => self.inflow(metric, &mut out, t),
                (true, false) => self.outflow(metric, &mut out, t),
            }
        }
        if let Some(r) = request {
            if self.contains(r) {
                self.fix_up(metric, &mut out, r);
            }
        }
        out
    }

    fn internal(&mut self, metric: &TreeMetric, out: &mut Vec<Transfer>, t: &Transfer) {
        let moved = t.amount.min(self.real(&t.from));
        let rest = t.amount - moved;
        self.emit(metric, out, &t.from, &t.to, moved);
        self.add_deficit(&t.from, -rest);
        self.add_deficit(&t.to, rest);
    }

    fn inflow(&mut self, metric: &TreeMetric, out: &mut Vec<Transfer>, t: &Transfer) {
        let root = self.root.clone();
        let absorbed = t.amount.min(self.virtual_mass());
        self.emit(metric, out, &root, &t.to, absorbed);
        self.inner += absorbed;
        let surplus = t.amount - absorbed;
        self.add_deficit(&t.to, surplus);
        self.parked += surplus;
    }

    fn outflow(&mut self, metric: &TreeMetric, out: &mut Vec<Transfer>, t: &Transfer) {
        let root = self.root.clone();
        let x = &t.from;
        let a = t.amount;
        let from_parked = a.min(self.parked);
        let leave = a - from_parked;
        let d_x = self.deficit(x);
        let must_take = (a - d_x).max(Q::ZERO);
        let take = self.real(x).min(leave.max(must_take));

        let out_of_x = take.min(leave);
        self.emit(metric, out, x, &root, out_of_x);
        self.inner -= out_of_x;

        // x must give up more than leaves the subtree: hand the rest to nodes
        // whose in-view mass lags behind.
        let mut relocate = take - out_of_x;
        if relocate.is_positive() {
            let targets = Self::nearest(metric, x, x, self.deficit.iter().map(|(n, q)| (n, *q)));
            for (z, room) in targets {
                if !relocate.is_positive() {
                    break;
                }
                let amt = room.min(relocate);
                self.emit(metric, out, x, &z, amt);
                self.add_deficit(&z, -amt);
                relocate -= amt;
            }
            debug_assert!(relocate.is_zero());
        }

        // x held too little: the rest leaves from elsewhere, root first.
        let mut remaining = leave - out_of_x;
        if remaining.is_positive() {
            let root_real = if *x == root { Q::ZERO } else { self.real(&root) };
            let amt = root_real.min(remaining);
            if amt.is_positive() {
                self.inner -= amt;
                self.add_deficit(&root, amt);
                remaining -= amt;
            }
            let others: Vec<(NodePath, Q)> = self
                .view
                .iter_subtree(&root)
                .filter(|(n, _)| **n != root && *n != x)
                .map(|(n, q)| (n.clone(), q))
                .collect();
            for (z, q) in others {
                if !remaining.is_positive() {
                    break;
                }
                let amt = q.min(remaining);
                self.emit(metric, out, &z, &root, amt);
                self.inner -= amt;
                self.add_deficit(&z, amt);
                remaining -= amt;
            }
            debug_assert!(remaining.is_zero());
        }

        self.add_deficit(x, take - a);
        self.parked -= from_parked;
    }

    fn fix_up(&mut self, metric: &TreeMetric, out: &mut Vec<Transfer>, r: &NodePath) {
        let have = self.real(r);
        if have >= Q::ONE || self.deficit(r).is_zero() {
            return;
        }
        let mut need = Q::ONE - have;
        let sources = Self::nearest(metric, r, r, self.view.iter_subtree(&self.root));
        for (z, q) in sources {
            if !need.is_positive() {
                break;
            }
            let avail = if z == self.root { q - self.virtual_mass() } else { q };
            let amt = avail.min(need);
            if !amt.is_positive() {
                continue;
            }
            self.emit(metric, out, &z, r, amt);
            self.add_deficit(&z, amt);
            self.add_deficit(r, -amt);
            need -= amt;
        }
    }

    /// Self-check used by tests and the verifier.
    pub fn is_consistent(&self) -> bool {
        let dsum: Q = self.deficit.values().sum();
        self.view.total() == self.cap
            && dsum == self.parked
            && self.inner + self.virtual_mass() == self.cap
            && (self.parked.is_zero() || self.virtual_mass().is_zero())
            && self.deficit.values().all(|d| d.is_positive())
    }
}

/// Charged cost of `t` on edges inside `root`'s subtree, including the edge
/// that enters `root`.
pub fn attributable_down_cost(metric: &TreeMetric, root: &NodePath, t: &Transfer) -> Q {
    let l = t.from.lca_len(&t.to);
    let first = (l + 1).max(root.len().max(1));
    if !root.is_ancestor_of(&t.to) {
        return Q::ZERO;
    }
    (first..=t.to.len())
        .map(|d| t.amount * metric.edge_length_at_depth(d))
        .sum()
}
