//! Exact optimal offline cost for `h` integral servers on small trees.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::rational::Q;
use crate::tree::{NodePath, TreeMetric};

/// A finite explicit tree (prefix-closed node list), a request list and a
/// server count. All servers start at the root.
#[derive(Clone, Debug, PartialEq)]
pub struct OptInstance {
    pub metric: TreeMetric,
    pub nodes: Vec<NodePath>,
    pub requests: Vec<NodePath>,
    pub h: usize,
}

impl OptInstance {
    /// The smallest explicit tree containing the requests.
    pub fn from_requests(metric: &TreeMetric, requests: &[NodePath], h: usize) -> OptInstance {
        let mut nodes: BTreeSet<NodePath> = BTreeSet::new();
        nodes.insert(NodePath::root());
        for r in requests {
            for t in 0..=r.len() {
                nodes.insert(r.prefix(t));
            }
        }
        OptInstance {
            metric: metric.clone(),
            nodes: nodes.into_iter().collect(),
            requests: requests.to_vec(),
            h,
        }
    }

    /// `|nodes|^h * |requests|`.
    pub fn state_space(&self) -> u128 {
        (self.nodes.len() as u128)
            .saturating_pow(self.h as u32)
            .saturating_mul(self.requests.len().max(1) as u128)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OptBudget {
    pub max_h: usize,
    pub max_nodes: usize,
    pub max_requests: usize,
}

impl Default for OptBudget {
    fn default() -> OptBudget {
        OptBudget {
            max_h: 3,
            max_nodes: 10,
            max_requests: 14,
        }
    }
}

impl OptBudget {
    pub fn states(&self) -> u128 {
        (self.max_nodes as u128).pow(self.max_h as u32) * self.max_requests as u128
    }

    pub fn admits(&self, inst: &OptInstance) -> bool {
        inst.h <= self.max_h && inst.nodes.len() <= self.max_nodes && inst.requests.len() <= self.max_requests
    }
}

/// Minimum downward-charged cost of serving `requests` in order.
///
/// Dynamic programming over (request index, sorted server multiset). Only
/// lazy moves are considered: downward distance obeys the triangle
/// inequality, so moving a server early never helps.
pub fn brute_force_opt(inst: &OptInstance, budget: &OptBudget) -> Result<Q> {
    if !budget.admits(inst) {
        return Err(Error::OracleBudget {
            states: inst.state_space(),
            budget: budget.states(),
        });
    }
    if inst.h == 0 {
        return if inst.requests.is_empty() {
            Ok(Q::ZERO)
        } else {
            Err(Error::Params("no servers to serve the requests".into()))
        };
    }
    let index: HashMap<&NodePath, u16> = inst.nodes.iter().enumerate().map(|(i, n)| (n, i as u16)).collect();
    for n in inst.nodes.iter().chain(&inst.requests) {
        inst.metric.check(n)?;
        if !index.contains_key(n) {
            return Err(Error::Params(format!("request {n} is not a node of the instance")));
        }
        if n.parent().is_some_and(|p| !index.contains_key(&p)) {
            return Err(Error::Params(format!("node list is not prefix-closed at {n}")));
        }
    }
    let root = *index
        .get(&NodePath::root())
        .ok_or_else(|| Error::Params("instance has no root".into()))?;
    let n = inst.nodes.len();
    let mut down = vec![Q::ZERO; n * n];
    for (i, a) in inst.nodes.iter().enumerate() {
        for (j, b) in inst.nodes.iter().enumerate() {
            down[i * n + j] = inst.metric.down_distance(a, b);
        }
    }
    let mut layer: HashMap<Vec<u16>, Q> = HashMap::new();
    layer.insert(vec![root; inst.h], Q::ZERO);
    for r in &inst.requests {
        let r = index[r];
        let mut next: HashMap<Vec<u16>, Q> = HashMap::with_capacity(layer.len() * inst.h);
        let mut relax = |state: Vec<u16>, cost: Q| {
            let e = next.entry(state).or_insert(cost);
            if cost < *e {
                *e = cost;
            }
        };
        for (state, cost) in layer {
            if state.contains(&r) {
                relax(state, cost);
                continue;
            }
            let mut prev = None;
            for (pos, &s) in state.iter().enumerate() {
                if prev == Some(s) {
                    continue;
                }
                prev = Some(s);
                let mut moved = state.clone();
                moved[pos] = r;
                moved.sort_unstable();
                relax(moved, cost + down[s as usize * n + r as usize]);
            }
        }
        layer = next;
    }
    Ok(layer.into_values().min().expect("at least one state survives"))
}
