use crate::mass::{MassConfig, Transfer};
use crate::rational::Q;
use crate::tree::{NodePath, TreeMetric};

use super::{OnlineAlgorithm, ServeDecision};

/// Refills the request from nested regions, nearest region first, pulling
/// from every node of a region in proportion to the mass it holds.
///
/// The regions are the strict descendants of the request, then for each
/// ancestor the ancestor itself together with its other child subtrees.
/// Shares are rounded down to `quantum` so denominators stay bounded; the
/// remainder is taken from the heaviest nodes.
#[derive(Clone, Debug)]
pub struct ProportionalRefill {
    quantum: Option<Q>,
}

impl ProportionalRefill {
    pub fn new(quantum: Option<Q>) -> ProportionalRefill {
        ProportionalRefill { quantum }
    }

    pub fn default_quantum(b: u32) -> Q {
        Q::new(1, 8192 * b as i128)
    }

    fn take_from_region(&self, region: Vec<(NodePath, Q)>, pull: Q, out: &mut Vec<(NodePath, Q)>) {
        let avail: Q = region.iter().map(|(_, q)| *q).sum();
        if pull >= avail {
            out.extend(region);
            return;
        }
        let mut shares: Vec<(NodePath, Q, Q)> = region
            .into_iter()
            .map(|(n, q)| {
                let exact = pull * q / avail;
                let s = match self.quantum {
                    Some(quantum) => exact.floor_to(quantum),
                    None => exact,
                };
                (n, q, s)
            })
            .collect();
        let mut rem = pull - shares.iter().map(|(_, _, s)| *s).sum::<Q>();
        if rem.is_positive() {
            let mut order: Vec<usize> = (0..shares.len()).collect();
            order.sort_by(|&a, &b| {
                let ra = shares[a].1 - shares[a].2;
                let rb = shares[b].1 - shares[b].2;
                rb.cmp(&ra).then_with(|| shares[a].0.cmp(&shares[b].0))
            });
            for i in order {
                if !rem.is_positive() {
                    break;
                }
                let extra = rem.min(shares[i].1 - shares[i].2);
                shares[i].2 += extra;
                rem -= extra;
            }
        }
        out.extend(shares.into_iter().filter(|(_, _, s)| s.is_positive()).map(|(n, _, s)| (n, s)));
    }
}

impl OnlineAlgorithm for ProportionalRefill {
    fn name(&self) -> &str {
        "proportional"
    }

    fn serve(&mut self, _metric: &TreeMetric, config: &MassConfig, request: &NodePath) -> ServeDecision {
        let mut need = Q::ONE - config.mass(request);
        if !need.is_positive() {
            return ServeDecision::none();
        }
        let mut picks: Vec<(NodePath, Q)> = Vec::new();
        let below: Vec<(NodePath, Q)> = config
            .iter_subtree(request)
            .filter(|(n, _)| *n != request)
            .map(|(n, q)| (n.clone(), q))
            .collect();
        let mut regions = vec![below];
        for t in (0..request.len()).rev() {
            let anchor = request.prefix(t);
            let skip = request.prefix(t + 1);
            regions.push(
                config
                    .iter_subtree(&anchor)
                    .filter(|(n, _)| !skip.is_ancestor_of(n))
                    .map(|(n, q)| (n.clone(), q))
                    .collect(),
            );
        }
        for region in regions {
            if !need.is_positive() {
                break;
            }
            let avail: Q = region.iter().map(|(_, q)| *q).sum();
            if !avail.is_positive() {
                continue;
            }
            let pull = need.min(avail);
            self.take_from_region(region, pull, &mut picks);
            need -= pull;
        }
        picks.sort_by(|a, b| a.0.cmp(&b.0));
        let transfers = picks
            .into_iter()
            .map(|(from, amount)| Transfer::new(from, request.clone(), amount))
            .collect();
        ServeDecision { transfers }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::testutil::{path_cost, serve_checked};

    fn p(s: &str) -> NodePath {
        s.parse().unwrap()
    }

    #[test]
    fn single_source_from_root() {
        let m = TreeMetric::new(1, Q::new(1, 4)).unwrap();
        let mut c = MassConfig::initial(Q::new(43, 2), NodePath::root());
        let mut alg = ProportionalRefill::new(Some(ProportionalRefill::default_quantum(21)));
        let ledger = serve_checked(&mut alg, &m, &mut c, &p("5"));
        assert_eq!(ledger.down_total, Q::ONE);
        assert_eq!(c.mass(&NodePath::root()), Q::new(41, 2));
    }

    #[test]
    fn served_request_moves_nothing() {
        let m = TreeMetric::new(1, Q::new(1, 4)).unwrap();
        let c = MassConfig::initial(Q::int(3), p("2"));
        assert!(ProportionalRefill::new(None).serve(&m, &c, &p("2")).transfers.is_empty());
    }

    #[test]
    fn siblings_pay_in_proportion() {
        let m = TreeMetric::new(1, Q::new(1, 4)).unwrap();
        let mut c = MassConfig::empty();
        for i in 0..3u32 {
            c.deposit(&NodePath::from_indices(vec![i]), Q::ONE);
        }
        c.deposit(&p("3"), Q::int(3));
        let mut alg = ProportionalRefill::new(None);
        let d = alg.serve(&m, &c, &p("4"));
        assert_eq!(
            d.transfers,
            vec![
                Transfer::new(p("0"), p("4"), Q::new(1, 6)),
                Transfer::new(p("1"), p("4"), Q::new(1, 6)),
                Transfer::new(p("2"), p("4"), Q::new(1, 6)),
                Transfer::new(p("3"), p("4"), Q::new(1, 2)),
            ]
        );
        let expected = path_cost(&m, &d.transfers);
        let ledger = serve_checked(&mut alg, &m, &mut c, &p("4"));
        assert_eq!(ledger.down_total, expected);
        assert_eq!(expected, Q::ONE);
    }

    #[test]
    fn quantised_shares_still_sum_to_the_deficit() {
        let m = TreeMetric::new(1, Q::new(1, 4)).unwrap();
        let mut c = MassConfig::empty();
        for i in 0..7u32 {
            c.deposit(&NodePath::from_indices(vec![i]), Q::ONE);
        }
        let mut alg = ProportionalRefill::new(Some(Q::new(1, 16)));
        let d = alg.serve(&m, &c, &p("9"));
        let total: Q = d.transfers.iter().map(|t| t.amount).sum();
        assert_eq!(total, Q::ONE);
        for t in &d.transfers {
            assert_eq!((t.amount / Q::new(1, 16)).denom(), 1);
        }
        serve_checked(&mut alg, &m, &mut c, &p("9"));
    }

    #[test]
    fn nearer_region_is_exhausted_first() {
        let m = TreeMetric::new(2, Q::new(1, 4)).unwrap();
        let mut c = MassConfig::empty();
        c.deposit(&p("0/1"), Q::new(1, 4));
        c.deposit(&p("0"), Q::new(1, 4));
        c.deposit(&p("1/0"), Q::int(4));
        let d = ProportionalRefill::new(None).serve(&m, &c, &p("0/0"));
        let from_far: Q = d.transfers.iter().filter(|t| t.from == p("1/0")).map(|t| t.amount).sum();
        assert_eq!(from_far, Q::new(1, 2));
    }
}
