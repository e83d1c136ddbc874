use crate::mass::{CostLedger, MassConfig, Transfer};
use crate::rational::Q;
use crate::tree::{NodePath, TreeMetric};

use super::{OnlineAlgorithm, ServeDecision};

/// Fractional double coverage on the tree.
///
/// Every lump of mass with no other mass strictly between it and the request
/// walks toward the request at unit speed. When the nearest lumps arrive they
/// fill the deficit in path order and the others stop after covering the same
/// distance, snapped to the last tree vertex they reached.
#[derive(Clone, Debug, Default)]
pub struct FractionalDoubleCoverage;

impl FractionalDoubleCoverage {
    pub fn new() -> FractionalDoubleCoverage {
        FractionalDoubleCoverage
    }
}

/// Vertices of the path from `a` to `b`, both ends included.
fn path_vertices(a: &NodePath, b: &NodePath) -> Vec<NodePath> {
    let l = a.lca_len(b);
    let mut out: Vec<NodePath> = (l..=a.len()).rev().map(|t| a.prefix(t)).collect();
    out.extend((l + 1..=b.len()).map(|t| b.prefix(t)));
    out
}

fn adjacent_lumps(work: &MassConfig, request: &NodePath) -> Vec<(NodePath, Q)> {
    work.iter()
        .filter(|(n, _)| *n != request)
        .filter(|(n, _)| {
            let path = path_vertices(&n, request);
            path[1..path.len() - 1].iter().all(|v| work.mass(v).is_zero())
        })
        .map(|(n, q)| (n.clone(), q))
        .collect()
}

impl OnlineAlgorithm for FractionalDoubleCoverage {
    fn name(&self) -> &str {
        "dc-tree"
    }

    fn serve(&mut self, metric: &TreeMetric, config: &MassConfig, request: &NodePath) -> ServeDecision {
        let mut need = Q::ONE - config.mass(request);
        if !need.is_positive() {
            return ServeDecision::none();
        }
        let mut work = config.clone();
        let mut scratch = CostLedger::new();
        let mut transfers = Vec::new();
        while need.is_positive() {
            let lumps = adjacent_lumps(&work, request);
            let Some(d_min) = lumps.iter().map(|(n, _)| metric.distance(n, request)).min() else {
                break;
            };
            let mut step = Vec::new();
            for (n, q) in lumps.iter().cloned() {
                let dist = metric.distance(&n, request);
                if dist == d_min {
                    if need.is_positive() {
                        let take = q.min(need);
                        need -= take;
                        step.push(Transfer::new(n.clone(), request.clone(), take));
                    }
                    continue;
                }
                let path = path_vertices(&n, request);
                let mut walked = Q::ZERO;
                let mut stop = None;
                for w in path.windows(2) {
                    walked += metric.distance(&w[0], &w[1]);
                    if walked > d_min {
                        break;
                    }
                    stop = Some(w[1].clone());
                }
                if let Some(v) = stop {
                    step.push(Transfer::new(n.clone(), v, q));
                }
            }
            work.apply_transfers(metric, &step, &mut scratch)
                .expect("double coverage moves only existing mass");
            transfers.extend(step);
        }
        ServeDecision { transfers }
    }
}
