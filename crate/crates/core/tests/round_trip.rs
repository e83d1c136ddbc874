mod common;

use std::io::BufReader;

use common::*;
use hkserver::adversary::Mode;
use hkserver::harness::trace::BudgetReason;
use hkserver::harness::{execute, verify_bytes, Record, RunConfig, TraceReader, VerifyOptions};
use hkserver::{algorithms, CostLedger, Q};
use proptest::prelude::*;

const ALGORITHMS: [&str; 4] = ["greedy", "hoarder", "dc-tree", "proportional"];

fn trace(c: &RunConfig) -> Vec<u8> {
    let res = c.resolve().unwrap();
    let mut alg = algorithms::by_name(&c.algorithm, &Default::default(), &res.params).unwrap();
    let mut buf = Vec::new();
    execute(c, alg.as_mut(), Some(&mut buf)).unwrap();
    buf
}

fn arb_config() -> impl Strategy<Value = RunConfig> {
    (0usize..3, 1u32..=2, 2u32..=4, 0usize..4, 30u64..300).prop_map(|(mode, depth, b, alg, n)| {
        let mode = [Mode::Lemma, Mode::Infinite, Mode::Theorem][mode];
        RunConfig {
            mode,
            depth: (mode != Mode::Theorem).then_some(depth),
            h: (mode == Mode::Theorem).then_some([10, 100][depth as usize - 1]),
            override_b: Some(b),
            algorithm: ALGORITHMS[alg].into(),
            max_requests: n,
            ..Default::default()
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn runs_verify_and_replay(c in arb_config()) {
        let buf = trace(&c);
        prop_assert_eq!(&buf, &trace(&c), "identical configs give identical bytes");
        let rep = verify_bytes(&buf, &VerifyOptions::default()).unwrap();
        prop_assert!(rep.is_clean(), "{}", rep.render());

        let a = audit(&buf);
        for (name, t) in [
            ("mass", &a.mass),
            ("dominance", &a.dominance),
            ("marks", &a.marks),
            ("phases", &a.phases),
            ("offline level", &a.adv_level),
            ("feasibility", &a.feasibility),
        ] {
            prop_assert!(t.ok(), "{}: {}", name, t.summary());
        }
        let lib_adv = rep.bounds.as_ref().map(|b| r(b.adv_cost));
        prop_assert_eq!(lib_adv, Some(a.adv_total.clone()));
    }

    #[test]
    fn footer_is_the_sum_of_steps(c in arb_config()) {
        let buf = trace(&c);
        let mut rd = TraceReader::new(BufReader::new(&buf[..]));
        rd.header().unwrap();
        let mut sum = CostLedger::new();
        let mut footer = None;
        for rec in rd {
            match rec.unwrap() {
                Record::Step(s) => {
                    for (l, q) in &s.down {
                        sum.charge_down(*l, *q);
                    }
                    for (l, q) in &s.up {
                        sum.charge_up(*l, *q);
                    }
                }
                Record::Footer(f) => footer = Some(f),
                _ => {}
            }
        }
        let f = footer.expect("footer");
        prop_assert_eq!(f.alg.down_total, sum.down_total);
        prop_assert_eq!(f.alg.up_total, sum.up_total);
        prop_assert!(f.alg.is_consistent());
        prop_assert_eq!(r(f.alg.down_total), audit(&buf).alg_down);
    }
}

#[test]
fn online_cost_grows_past_any_budget() {
    for alg in ALGORITHMS {
        for depth in [1, 2] {
            let c = RunConfig {
                depth: Some(depth),
                algorithm: alg.into(),
                max_cost: Some(Q::int(60)),
                max_requests: 1_000_000,
                ..Default::default()
            };
            let res = c.resolve().unwrap();
            assert!(res.params.standard_schedule);
            let mut a = algorithms::by_name(alg, &Default::default(), &res.params).unwrap();
            let s = execute(&c, a.as_mut(), None).unwrap();
            assert_eq!(s.budget_hit, Some(BudgetReason::MaxCost), "{alg} depth {depth}");
            assert!(s.alg_cost >= Q::int(60));
        }
    }
}

#[test]
fn empirical_ratio_is_alg_over_adv() {
    let c = RunConfig {
        depth: Some(1),
        algorithm: "hoarder".into(),
        max_requests: 500,
        ..Default::default()
    };
    let res = c.resolve().unwrap();
    let mut a = algorithms::by_name("hoarder", &Default::default(), &res.params).unwrap();
    let s = execute(&c, a.as_mut(), None).unwrap();
    assert_eq!(s.empirical_ratio, Some(s.alg_cost / s.adv_cost));
    assert!(s.complete_phases >= 1);
}
