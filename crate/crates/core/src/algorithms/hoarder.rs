use std::collections::{BTreeMap, HashMap};

use crate::mass::{MassConfig, Transfer};
use crate::rational::Q;
use crate::tree::{NodePath, TreeMetric};

use super::{nearest_sources, OnlineAlgorithm, ServeDecision};

/// Keeps all spare mass at the tree root and ships each deficit from there.
/// When the root runs short it calls back whole lumps from the least recently
/// requested nodes.
#[derive(Clone, Debug, Default)]
pub struct Hoarder {
    clock: u64,
    by_stamp: BTreeMap<u64, NodePath>,
    stamp_of: HashMap<NodePath, u64>,
}

impl Hoarder {
    pub fn new() -> Hoarder {
        Hoarder::default()
    }

    fn touch(&mut self, node: &NodePath) {
        if let Some(old) = self.stamp_of.insert(node.clone(), self.clock) {
            self.by_stamp.remove(&old);
        }
        self.by_stamp.insert(self.clock, node.clone());
        self.clock += 1;
    }

    fn forget(&mut self, node: &NodePath) {
        if let Some(old) = self.stamp_of.remove(node) {
            self.by_stamp.remove(&old);
        }
    }
}

impl OnlineAlgorithm for Hoarder {
    fn name(&self) -> &str {
        "hoarder"
    }

    fn serve(&mut self, metric: &TreeMetric, config: &MassConfig, request: &NodePath) -> ServeDecision {
        let need = Q::ONE - config.mass(request);
        if !need.is_positive() {
            if !request.is_root() {
                self.touch(request);
            }
            return ServeDecision::none();
        }
        let home = NodePath::root();
        let mut transfers = Vec::new();
        let mut at_home = config.mass(&home);
        let mut emptied: Vec<NodePath> = Vec::new();
        while at_home < need {
            let Some((&stamp, node)) = self.by_stamp.iter().find(|(_, n)| *n != request) else {
                break;
            };
            let node = node.clone();
            self.by_stamp.remove(&stamp);
            self.stamp_of.remove(&node);
            let q = config.mass(&node);
            if q.is_positive() {
                transfers.push(Transfer::new(node.clone(), home.clone(), q));
                at_home += q;
                emptied.push(node);
            }
        }
        if at_home >= need {
            transfers.push(Transfer::new(home.clone(), request.clone(), need));
        } else {
            // Mass the hoarder never placed itself: fall back to nearest sources.
            let mut scratch = config.clone();
            let mut ledger = crate::mass::CostLedger::new();
            scratch
                .apply_transfers(metric, &transfers, &mut ledger)
                .expect("retracted lumps exist");
            transfers.extend(
                nearest_sources(metric, &scratch, request, need)
                    .into_iter()
                    .map(|(from, amount)| Transfer::new(from, request.clone(), amount)),
            );
        }
        for n in emptied {
            self.forget(&n);
        }
        if !request.is_root() {
            self.touch(request);
        }
        ServeDecision { transfers }
    }
}
