//! Fractional server configurations and the downward/upward cost ledger.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Q;
use crate::tree::{NodePath, TreeMetric};

/// Move `amount` of server mass from `from` to `to` along the tree path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub from: NodePath,
    pub to: NodePath,
    pub amount: Q,
}

impl Transfer {
    pub fn new(from: NodePath, to: NodePath, amount: Q) -> Transfer {
        Transfer { from, to, amount }
    }
}

/// Cumulative traversal cost per edge level.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    #[serde(with = "level_map")]
    pub down_by_level: BTreeMap<usize, Q>,
    #[serde(with = "level_map")]
    pub up_by_level: BTreeMap<usize, Q>,
    pub down_total: Q,
    pub up_total: Q,
}

impl CostLedger {
    pub fn new() -> CostLedger {
        CostLedger::default()
    }

    pub fn charge_down(&mut self, level: usize, cost: Q) {
        if cost.is_zero() {
            return;
        }
        *self.down_by_level.entry(level).or_default() += cost;
        self.down_total += cost;
    }

    pub fn charge_up(&mut self, level: usize, cost: Q) {
        if cost.is_zero() {
            return;
        }
        *self.up_by_level.entry(level).or_default() += cost;
        self.up_total += cost;
    }

    /// Charged (downward) cost on level `level`.
    pub fn down(&self, level: usize) -> Q {
        self.down_by_level.get(&level).copied().unwrap_or_default()
    }

    /// Charged cost on levels `<= level`.
    pub fn down_upto(&self, level: usize) -> Q {
        self.down_by_level.range(..=level).map(|(_, v)| *v).sum()
    }

    /// Accrue `amount` times the length of every edge on the `from -> to` path.
    pub fn record(&mut self, metric: &TreeMetric, from: &NodePath, to: &NodePath, amount: Q) {
        let l = from.lca_len(to);
        for t in l + 1..=from.len() {
            self.charge_up(metric.level_of_depth(t), amount * metric.edge_length_at_depth(t));
        }
        for t in l + 1..=to.len() {
            self.charge_down(metric.level_of_depth(t), amount * metric.edge_length_at_depth(t));
        }
    }

    pub fn add(&mut self, other: &CostLedger) {
        for (l, v) in &other.down_by_level {
            self.charge_down(*l, *v);
        }
        for (l, v) in &other.up_by_level {
            self.charge_up(*l, *v);
        }
    }

    /// `self - earlier`, level by level.
    pub fn since(&self, earlier: &CostLedger) -> CostLedger {
        let mut out = CostLedger::new();
        for (l, v) in &self.down_by_level {
            out.charge_down(*l, *v - earlier.down(*l));
        }
        for (l, v) in &self.up_by_level {
            let before = earlier.up_by_level.get(l).copied().unwrap_or_default();
            out.charge_up(*l, *v - before);
        }
        out
    }

    pub fn is_consistent(&self) -> bool {
        self.down_total == self.down_by_level.values().sum::<Q>()
            && self.up_total == self.up_by_level.values().sum::<Q>()
    }
}

/// A fractional distribution of server mass. Absent nodes hold zero.
#[derive(Clone, Debug, Default)]
pub struct MassConfig {
    own: BTreeMap<NodePath, Q>,
    /// Subtree totals for every node whose subtree holds positive mass.
    agg: HashMap<NodePath, Q>,
    total: Q,
}

impl PartialEq for MassConfig {
    fn eq(&self, other: &MassConfig) -> bool {
        self.own == other.own
    }
}

impl MassConfig {
    pub fn empty() -> MassConfig {
        MassConfig::default()
    }

    /// All mass `k` at `root`.
    pub fn initial(k: Q, root: NodePath) -> MassConfig {
        let mut c = MassConfig::empty();
        c.deposit(&root, k);
        c
    }

    pub fn total(&self) -> Q {
        self.total
    }

    pub fn mass(&self, node: &NodePath) -> Q {
        self.own.get(node).copied().unwrap_or_default()
    }

    pub fn subtree_mass(&self, node: &NodePath) -> Q {
        self.agg.get(node).copied().unwrap_or_default()
    }

    /// Nodes holding positive mass, in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&NodePath, Q)> {
        self.own.iter().map(|(n, m)| (n, *m))
    }

    /// Nodes with positive mass at or below `node`, in lexicographic order.
    pub fn iter_subtree<'a>(&'a self, node: &'a NodePath) -> impl Iterator<Item = (&'a NodePath, Q)> + 'a {
        self.own
            .range(node.clone()..)
            .take_while(move |(n, _)| node.is_ancestor_of(n))
            .map(|(n, m)| (n, *m))
    }

    pub fn support_len(&self) -> usize {
        self.own.len()
    }

    fn adjust_agg(&mut self, node: &NodePath, delta: Q) {
        for t in 0..=node.len() {
            let key = node.prefix(t);
            let entry = self.agg.entry(key).or_default();
            *entry += delta;
            if entry.is_zero() {
                let key = node.prefix(t);
                self.agg.remove(&key);
            }
        }
    }

    /// Adds mass at `node` without any cost accounting.
    pub fn deposit(&mut self, node: &NodePath, amount: Q) {
        if amount.is_zero() {
            return;
        }
        let entry = self.own.entry(node.clone()).or_default();
        *entry += amount;
        debug_assert!(!entry.is_negative());
        if entry.is_zero() {
            self.own.remove(node);
        }
        self.adjust_agg(node, amount);
        self.total += amount;
    }

    /// Removes mass at `node` without any cost accounting.
    pub fn withdraw(&mut self, node: &NodePath, amount: Q) -> Result<()> {
        let have = self.mass(node);
        if have < amount {
            return Err(Error::InsufficientMass {
                index: 0,
                node: node.clone(),
                available: have.to_string(),
                needed: amount.to_string(),
            });
        }
        self.deposit(node, -amount);
        Ok(())
    }

    /// Applies one transfer and charges the ledger.
    pub fn apply(&mut self, metric: &TreeMetric, t: &Transfer, ledger: &mut CostLedger) -> Result<()> {
        if !t.amount.is_positive() {
            return Err(Error::NonPositiveTransfer {
                index: 0,
                amount: t.amount.to_string(),
            });
        }
        metric.check(&t.from)?;
        metric.check(&t.to)?;
        self.withdraw(&t.from, t.amount)?;
        self.deposit(&t.to, t.amount);
        ledger.record(metric, &t.from, &t.to, t.amount);
        Ok(())
    }

    /// Applies `transfers` in order. On failure nothing is changed and the
    /// error carries the index of the offending transfer.
    pub fn apply_transfers(
        &mut self,
        metric: &TreeMetric,
        transfers: &[Transfer],
        ledger: &mut CostLedger,
    ) -> Result<CostLedger> {
        let mut delta = CostLedger::new();
        for (index, t) in transfers.iter().enumerate() {
            if let Err(e) = self.apply(metric, t, &mut delta) {
                for undo in transfers[..index].iter().rev() {
                    self.deposit(&undo.to, -undo.amount);
                    self.deposit(&undo.from, undo.amount);
                }
                return Err(match e {
                    Error::InsufficientMass {
                        node,
                        available,
                        needed,
                        ..
                    } => Error::InsufficientMass {
                        index,
                        node,
                        available,
                        needed,
                    },
                    Error::NonPositiveTransfer { amount, .. } => Error::NonPositiveTransfer { index, amount },
                    other => other,
                });
            }
        }
        ledger.add(&delta);
        Ok(delta)
    }

    /// A request is served when the requested node itself holds mass >= 1.
    pub fn is_served(&self, request: &NodePath) -> bool {
        self.mass(request) >= Q::ONE
    }
}

/// Level-keyed maps with string keys, so they survive tagged enums in JSON.
pub(crate) mod level_map {
    use std::collections::BTreeMap;

    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    use crate::rational::Q;

    pub fn serialize<S: Serializer>(map: &BTreeMap<usize, Q>, s: S) -> Result<S::Ok, S::Error> {
        let m: BTreeMap<String, Q> = map.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        m.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<usize, Q>, D::Error> {
        BTreeMap::<String, Q>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| k.parse().map(|k| (k, v)).map_err(D::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> NodePath {
        s.parse().unwrap()
    }

    fn metric() -> TreeMetric {
        TreeMetric::new(2, Q::new(1, 4)).unwrap()
    }

    #[test]
    fn initial_configs() {
        for k in [Q::new(43, 2), Q::ONE, Q::int(462)] {
            let c = MassConfig::initial(k, NodePath::root());
            assert_eq!(c.mass(&NodePath::root()), k);
            assert_eq!(c.total(), k);
            assert_eq!(c.support_len(), 1);
        }
    }

    #[test]
    fn downward_move_is_charged() {
        let m = metric();
        let mut c = MassConfig::initial(Q::new(43, 2), NodePath::root());
        let mut ledger = CostLedger::new();
        let d = c
            .apply_transfers(&m, &[Transfer::new(NodePath::root(), p("4"), Q::new(1, 2))], &mut ledger)
            .unwrap();
        assert_eq!(d.down_total, Q::new(1, 2));
        assert_eq!(d.up_total, Q::ZERO);
        assert_eq!(ledger, d);
    }

    #[test]
    fn sibling_move_is_symmetric() {
        let m = metric();
        let mut c = MassConfig::initial(Q::ONE, p("0/0"));
        let mut ledger = CostLedger::new();
        c.apply_transfers(&m, &[Transfer::new(p("0/0"), p("0/1"), Q::ONE)], &mut ledger)
            .unwrap();
        assert_eq!(ledger.up_total, Q::new(1, 4));
        assert_eq!(ledger.down_total, Q::new(1, 4));
        assert_eq!(ledger.down(1), Q::new(1, 4));
        assert!(c.is_served(&p("0/1")));
    }

    #[test]
    fn zero_and_oversized_transfers_are_rejected() {
        let m = metric();
        let mut c = MassConfig::initial(Q::int(2), NodePath::root());
        let mut ledger = CostLedger::new();
        let err = c
            .apply_transfers(&m, &[Transfer::new(NodePath::root(), p("1"), Q::ZERO)], &mut ledger)
            .unwrap_err();
        assert!(matches!(err, Error::NonPositiveTransfer { index: 0, .. }));
        let err = c
            .apply_transfers(
                &m,
                &[
                    Transfer::new(NodePath::root(), p("1"), Q::ONE),
                    Transfer::new(p("1"), p("2"), Q::int(3)),
                ],
                &mut ledger,
            )
            .unwrap_err();
        assert!(matches!(err, Error::InsufficientMass { index: 1, .. }));
        // rolled back
        assert_eq!(c.mass(&NodePath::root()), Q::int(2));
        assert_eq!(ledger, CostLedger::new());
    }

    #[test]
    fn subtree_mass_is_additive() {
        let m = metric();
        let mut c = MassConfig::initial(Q::new(43, 2), NodePath::root());
        let mut ledger = CostLedger::new();
        assert_eq!(c.subtree_mass(&p("3")), Q::ZERO);
        c.apply_transfers(&m, &[Transfer::new(NodePath::root(), p("3"), Q::new(43, 2))], &mut ledger)
            .unwrap();
        assert_eq!(c.subtree_mass(&p("3")), Q::new(43, 2));
        c.apply_transfers(&m, &[Transfer::new(p("3"), p("3/5"), Q::new(37, 2))], &mut ledger)
            .unwrap();
        assert_eq!(c.mass(&p("3")), Q::int(3));
        assert_eq!(c.subtree_mass(&p("3")), Q::new(43, 2));
        let mut d = MassConfig::empty();
        d.deposit(&p("3"), Q::int(3));
        d.deposit(&p("3/0"), Q::int(2));
        assert_eq!(d.subtree_mass(&p("3")), Q::int(5));
        assert_eq!(d.iter_subtree(&p("3")).count(), 2);
    }

    #[test]
    fn serving_needs_mass_at_the_exact_node() {
        let m = metric();
        let mut c = MassConfig::initial(Q::int(2), NodePath::root());
        let mut ledger = CostLedger::new();
        c.apply_transfers(&m, &[Transfer::new(NodePath::root(), p("1"), Q::ONE)], &mut ledger)
            .unwrap();
        assert!(!c.is_served(&p("1/0")));
        c.apply_transfers(
            &m,
            &[
                Transfer::new(p("1"), p("1/0"), Q::new(2, 3)),
                Transfer::new(NodePath::root(), p("1/0"), Q::new(1, 3)),
            ],
            &mut ledger,
        )
        .unwrap();
        assert!(c.is_served(&p("1/0")));
    }

    proptest! {
        #[test]
        fn conservation_and_downward_dominance(moves in proptest::collection::vec((0u32..3, 0u32..3, 0u32..3, 0u32..3, 1i128..8), 1..40)) {
            let m = metric();
            let k = Q::int(5);
            let mut c = MassConfig::initial(k, NodePath::root());
            let mut ledger = CostLedger::new();
            for (a, b, x, y, num) in moves {
                let nodes: Vec<NodePath> = c.iter().map(|(n, _)| n.clone()).collect();
                let from = nodes[(a as usize) % nodes.len()].clone();
                let to = match b { 0 => NodePath::root(), 1 => p(&x.to_string()), _ => p(&format!("{x}/{y}")) };
                let amount = (c.mass(&from) * Q::new(num, 8)).max(Q::new(1, 64)).min(c.mass(&from));
                c.apply_transfers(&m, &[Transfer::new(from, to, amount)], &mut ledger).unwrap();
                prop_assert_eq!(c.total(), k);
                prop_assert!(c.iter().all(|(_, v)| v.is_positive()));
                prop_assert!(ledger.up_total <= ledger.down_total);
                prop_assert!(ledger.is_consistent());
                prop_assert_eq!(c.subtree_mass(&NodePath::root()), k);
            }
        }
    }
}
