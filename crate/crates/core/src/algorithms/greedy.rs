use crate::mass::{MassConfig, Transfer};
use crate::rational::Q;
use crate::tree::{NodePath, TreeMetric};

use super::{nearest_sources, OnlineAlgorithm, ServeDecision};

/// Pulls the missing mass from the nearest nodes holding any, closest first.
#[derive(Clone, Debug, Default)]
pub struct GreedyNearest;

impl GreedyNearest {
    pub fn new() -> GreedyNearest {
        GreedyNearest
    }
}

impl OnlineAlgorithm for GreedyNearest {
    fn name(&self) -> &str {
        "greedy"
    }

    fn serve(&mut self, metric: &TreeMetric, config: &MassConfig, request: &NodePath) -> ServeDecision {
        let need = Q::ONE - config.mass(request);
        if !need.is_positive() {
            return ServeDecision::none();
        }
        let transfers = nearest_sources(metric, config, request, need)
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
    use proptest::prelude::*;

    fn p(s: &str) -> NodePath {
        s.parse().unwrap()
    }

    fn metric() -> TreeMetric {
        TreeMetric::new(2, Q::new(1, 4)).unwrap()
    }

    #[test]
    fn single_source_from_root() {
        let m = metric();
        let mut c = MassConfig::initial(Q::int(3), NodePath::root());
        let ledger = serve_checked(&mut GreedyNearest, &m, &mut c, &p("2/1"));
        assert_eq!(c.mass(&p("2/1")), Q::ONE);
        // 1 + 1/4
        assert_eq!(ledger.down_total, Q::new(5, 4));
    }

    #[test]
    fn served_request_moves_nothing() {
        let m = metric();
        let c = MassConfig::initial(Q::int(2), p("0/0"));
        assert!(GreedyNearest.serve(&m, &c, &p("0/0")).transfers.is_empty());
    }

    #[test]
    fn multi_source_cost_matches_path_sum() {
        let m = metric();
        let mut c = MassConfig::empty();
        c.deposit(&p("0/1"), Q::new(1, 3));
        c.deposit(&p("0"), Q::new(1, 3));
        c.deposit(&p("1/1"), Q::int(2));
        c.deposit(&p("0/0"), Q::new(1, 6));
        let d = GreedyNearest.serve(&m, &c, &p("0/0"));
        assert_eq!(
            d.transfers,
            vec![
                Transfer::new(p("0"), p("0/0"), Q::new(1, 3)),
                Transfer::new(p("0/1"), p("0/0"), Q::new(1, 3)),
                Transfer::new(p("1/1"), p("0/0"), Q::new(1, 6)),
            ]
        );
        let expected = path_cost(&m, &d.transfers);
        let ledger = serve_checked(&mut GreedyNearest, &m, &mut c, &p("0/0"));
        assert_eq!(ledger.down_total, expected);
        // 1/3 * 1/4 + 1/3 * 1/4 + 1/6 * (1 + 1/4)
        assert_eq!(expected, Q::new(3, 8));
    }

    proptest! {
        #[test]
        fn never_undoes_an_edge(masses in proptest::collection::vec(0i128..4, 9), r in (0u32..3, 0u32..3)) {
            let m = metric();
            let mut c = MassConfig::empty();
            c.deposit(&NodePath::root(), Q::ONE);
            for (i, q) in masses.iter().enumerate() {
                c.deposit(&NodePath::from_indices(vec![(i / 3) as u32, (i % 3) as u32]), Q::new(*q, 3));
            }
            let req = NodePath::from_indices(vec![r.0, r.1]);
            let d = GreedyNearest.serve(&m, &c, &req);
            for t in &d.transfers {
                prop_assert_eq!(&t.to, &req);
            }
            let mut c2 = c.clone();
            serve_checked(&mut GreedyNearest, &m, &mut c2, &req);
        }
    }
}
