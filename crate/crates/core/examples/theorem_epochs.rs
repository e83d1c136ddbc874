//! Epochs on the combined tree with an overridden branching factor. Each
//! completed epoch must satisfy the closed-form ratio guarantee.
//!
//!     cargo run --release --example theorem_epochs -- [h] [algorithm]

use hkserver::adversary::{certified_rho, Mode};
use hkserver::harness::{run, RunConfig};
use hkserver::Q;

fn main() -> hkserver::Result<()> {
    let mut args = std::env::args().skip(1);
    let h: u64 = args.next().map_or(100, |s| s.parse().expect("h"));
    let algorithm = args.next().unwrap_or_else(|| "hoarder".into());
    let b = 3;
    let eps = Q::new(1, 4 * b as i128);
    let rho = certified_rho(b, eps, 3).expect("b = 3 certifies a ratio");

    let config = RunConfig {
        mode: Mode::Theorem,
        h: Some(h),
        override_b: Some(b),
        rho: Some(rho),
        algorithm,
        max_requests: 50_000,
        max_phases: Some(20),
        ..Default::default()
    };
    let s = run(&config)?;
    println!(
        "h={h} depth={} rho={rho} epochs={} ALG={} ADV={} ratio={:.4}",
        s.depth,
        s.complete_epochs,
        s.alg_cost,
        s.adv_cost,
        s.ratio_f64().unwrap_or(f64::NAN)
    );
    for e in &s.bounds.epochs {
        println!(
            "  epoch {:>2} subtree {:>3} {}: ALG {} ADV {}+{} guarantee {:.4} >= {:.4} measured {:.4}",
            e.epoch,
            e.subtree,
            if e.complete { "done" } else { "open" },
            e.alg_cost,
            e.adv_entry,
            e.adv_inner,
            e.guaranteed.to_f64(),
            e.floor.to_f64(),
            e.measured_ratio.map_or(f64::NAN, |q| q.to_f64())
        );
    }
    Ok(())
}
