//! The recursive phase game on a single tree against each builtin, with the
//! per-phase cost table.
//!
//!     cargo run --release --example lemma_phase_game -- [depth] [requests]

use hkserver::algorithms::BUILTINS;
use hkserver::harness::{run, RunConfig};

fn main() -> hkserver::Result<()> {
    let mut args = std::env::args().skip(1);
    let depth: u32 = args.next().map_or(1, |s| s.parse().expect("depth"));
    let requests: u64 = args.next().map_or(20_000, |s| s.parse().expect("requests"));

    for alg in BUILTINS {
        let config = RunConfig {
            depth: Some(depth),
            algorithm: alg.into(),
            max_requests: requests,
            ..Default::default()
        };
        let s = run(&config)?;
        println!(
            "{alg:<12} b={} requests={} phases={} ALG={} ADV={} ratio={:.4} offset={}",
            s.b,
            s.requests,
            s.complete_phases,
            s.alg_cost,
            s.adv_cost,
            s.ratio_f64().unwrap_or(f64::NAN),
            s.additive_offset
        );
        for p in s.bounds.phases.iter().filter(|p| p.complete).take(3) {
            println!(
                "    phase {:>3}: level cost {} >= {} ; ALG {} vs ADV {}",
                p.phase,
                p.raw_level_cost.or(p.view_level_cost).unwrap(),
                p.cost_bound.unwrap(),
                p.alg_cost,
                p.adv_cost
            );
        }
        if !s.bounds.is_clean() {
            println!("    violations: {:?}", s.bounds.violations);
        }
    }
    Ok(())
}
