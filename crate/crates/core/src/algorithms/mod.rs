//! Fractional online k-server algorithms.
//!
//! An algorithm sees its own configuration and the current request, and
//! answers with an ordered list of transfers that leaves at least one unit of
//! mass on the requested node. It never sees future requests.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mass::{MassConfig, Transfer};
use crate::rational::Q;
use crate::tree::{ConstructionParams, NodePath, TreeMetric};

mod dc_tree;
mod greedy;
mod hoarder;
mod proportional;

pub use dc_tree::FractionalDoubleCoverage;
pub use greedy::GreedyNearest;
pub use hoarder::Hoarder;
pub use proportional::ProportionalRefill;

/// Transfers chosen for one request.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ServeDecision {
    pub transfers: Vec<Transfer>,
}

impl ServeDecision {
    pub fn none() -> ServeDecision {
        ServeDecision::default()
    }
}

pub trait OnlineAlgorithm: Send {
    fn name(&self) -> &str;

    fn serve(&mut self, metric: &TreeMetric, config: &MassConfig, request: &NodePath) -> ServeDecision;
}

pub const BUILTINS: [&str; 4] = ["greedy", "proportional", "dc-tree", "hoarder"];

/// Builds a builtin by its CLI name. Options are `key=value` pairs.
pub fn by_name(
    name: &str,
    options: &BTreeMap<String, String>,
    params: &ConstructionParams,
) -> Result<Box<dyn OnlineAlgorithm>> {
    let reject_unknown = |allowed: &[&str]| -> Result<()> {
        match options.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::Params(format!("algorithm {name} has no option {k:?}"))),
            None => Ok(()),
        }
    };
    match name {
        "greedy" | "greedy_nearest" => {
            reject_unknown(&[])?;
            Ok(Box::new(GreedyNearest::new()))
        }
        "proportional" | "proportional_refill" => {
            reject_unknown(&["quantum"])?;
            let quantum = match options.get("quantum").map(String::as_str) {
                None => Some(ProportionalRefill::default_quantum(params.b)),
                Some("exact") => None,
                Some(q) => {
                    let q: Q = q.parse()?;
                    if !q.is_positive() {
                        return Err(Error::Params("quantum must be positive".into()));
                    }
                    Some(q)
                }
            };
            Ok(Box::new(ProportionalRefill::new(quantum)))
        }
        "dc-tree" | "fractional_double_coverage_tree" => {
            reject_unknown(&[])?;
            Ok(Box::new(FractionalDoubleCoverage::new()))
        }
        "hoarder" | "hoarder_baseline" => {
            reject_unknown(&[])?;
            Ok(Box::new(Hoarder::new()))
        }
        other => Err(Error::UnknownAlgorithm(other.to_string())),
    }
}

/// Parses `key=value,key=value` (or whitespace separated) option strings.
pub fn parse_options(spec: &[String]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for part in spec.iter().flat_map(|s| s.split(',')).map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("algorithm option {part:?} is not key=value")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Mass sources for `request`, nearest first (ties: lowest path), with the
/// amount to take from each so that exactly `need` arrives.
pub(crate) fn nearest_sources(
    metric: &TreeMetric,
    config: &MassConfig,
    request: &NodePath,
    need: Q,
) -> Vec<(NodePath, Q)> {
    let mut cands: Vec<(Q, NodePath, Q)> = Vec::new();
    let mut scanned: Option<NodePath> = None;
    for t in (0..=request.len()).rev() {
        let anchor = request.prefix(t);
        let reach = metric.distance(request, &anchor);
        if let Some(covered_at) = covering_distance(&mut cands, need) {
            if covered_at < reach {
                break;
            }
        }
        for (n, q) in config.iter_subtree(&anchor) {
            if n == request || scanned.as_ref().is_some_and(|s| s.is_ancestor_of(n)) {
                continue;
            }
            cands.push((metric.distance(request, n), n.clone(), q));
        }
        scanned = Some(anchor);
    }
    cands.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let mut left = need;
    let mut out = Vec::new();
    for (_, n, q) in cands {
        if !left.is_positive() {
            break;
        }
        let take = q.min(left);
        left -= take;
        out.push((n, take));
    }
    out
}

fn covering_distance(cands: &mut [(Q, NodePath, Q)], need: Q) -> Option<Q> {
    cands.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let mut acc = Q::ZERO;
    for (d, _, q) in cands.iter() {
        acc += *q;
        if acc >= need {
            return Some(*d);
        }
    }
    None
}
