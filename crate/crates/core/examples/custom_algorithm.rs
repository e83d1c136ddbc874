//! Plugging in an algorithm that is not a builtin: keep half a unit of
//! slack at every requested node by pulling from the root first.
//!
//!     cargo run --release --example custom_algorithm

use hkserver::harness::{execute, verify_bytes, RunConfig, VerifyOptions};
use hkserver::{MassConfig, NodePath, OnlineAlgorithm, ServeDecision, Transfer, TreeMetric, Q};

struct RootFirst;

impl OnlineAlgorithm for RootFirst {
    fn name(&self) -> &str {
        "root-first"
    }

    fn serve(&mut self, _metric: &TreeMetric, config: &MassConfig, request: &NodePath) -> ServeDecision {
        let mut need = Q::ONE - config.mass(request);
        if !need.is_positive() {
            return ServeDecision::none();
        }
        let mut transfers = Vec::new();
        let root = NodePath::root();
        let at_root = config.mass(&root);
        if at_root.is_positive() && *request != root {
            let take = at_root.min(need);
            transfers.push(Transfer::new(root.clone(), request.clone(), take));
            need -= take;
        }
        // then anything else, lowest path first
        for (node, q) in config.iter() {
            if !need.is_positive() {
                break;
            }
            if *node == root || node == request || !q.is_positive() {
                continue;
            }
            let take = q.min(need);
            transfers.push(Transfer::new(node.clone(), request.clone(), take));
            need -= take;
        }
        ServeDecision { transfers }
    }
}

fn main() -> hkserver::Result<()> {
    let config = RunConfig {
        depth: Some(2),
        override_b: Some(3),
        algorithm: "root-first".into(),
        max_requests: 5_000,
        ..Default::default()
    };
    let mut buf = Vec::new();
    let s = execute(&config, &mut RootFirst, Some(&mut buf))?;
    println!(
        "{}: requests={} phases={} ALG={} ADV={} ratio={:.4}",
        s.algorithm,
        s.requests,
        s.complete_phases,
        s.alg_cost,
        s.adv_cost,
        s.ratio_f64().unwrap_or(f64::NAN)
    );
    // no rerun: the verifier can only rebuild builtins
    let r = verify_bytes(&buf, &VerifyOptions { rerun: false, ..Default::default() })?;
    print!("{}", r.render());
    Ok(())
}
