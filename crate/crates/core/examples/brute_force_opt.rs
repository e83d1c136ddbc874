//! Exact offline optimum on tiny instances, checked against the offline
//! strategy the adversary pays for.
//!
//!     cargo run --release --example brute_force_opt

use hkserver::harness::{execute, Record, RunConfig, TraceReader};
use hkserver::offline::{brute_force_opt, OptBudget, OptInstance};
use hkserver::{algorithms, NodePath, Q, TreeMetric};

fn main() -> hkserver::Result<()> {
    let metric = TreeMetric::new(2, Q::new(1, 4))?;
    let reqs: Vec<NodePath> = ["0/0", "1/0", "0/0", "1/0", "0/1"]
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    for h in 1..=3 {
        let inst = OptInstance::from_requests(&metric, &reqs, h);
        println!("h={h}: OPT = {}", brute_force_opt(&inst, &OptBudget::default())?);
    }

    // a tiny adversary trace: b = 2, one level, ten requests
    let config = RunConfig {
        depth: Some(1),
        override_b: Some(2),
        max_requests: 10,
        ..Default::default()
    };
    let res = config.resolve()?;
    let mut alg = algorithms::by_name("greedy", &Default::default(), &res.params)?;
    let mut buf = Vec::new();
    let s = execute(&config, alg.as_mut(), Some(&mut buf))?;
    let requests: Vec<NodePath> = TraceReader::new(&buf[..])
        .filter_map(|r| match r {
            Ok(Record::Step(step)) => Some(step.request),
            _ => None,
        })
        .collect();
    let m = TreeMetric::new(res.tree_depth as usize, res.params.gamma)?;
    let opt = brute_force_opt(&OptInstance::from_requests(&m, &requests, res.adv_servers as usize), &OptBudget::default())?;
    println!("adversary trace {:?}", requests.iter().map(|r| r.to_string()).collect::<Vec<_>>());
    println!("OPT = {opt}, ADV = {}, ALG = {}", s.adv_cost, s.alg_cost);
    assert!(opt <= s.adv_cost);
    Ok(())
}
