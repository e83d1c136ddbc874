//! The infinite-server variant: the online side has a million units of mass
//! and still pays for every epoch.
//!
//!     cargo run --release --example infinite_server

use hkserver::adversary::Mode;
use hkserver::harness::{run, RunConfig};

fn main() -> hkserver::Result<()> {
    for alg in ["greedy", "hoarder"] {
        let config = RunConfig {
            mode: Mode::Infinite,
            depth: Some(1),
            override_b: Some(3),
            algorithm: alg.into(),
            max_requests: 20_000,
            max_phases: Some(10),
            ..Default::default()
        };
        let s = run(&config)?;
        println!(
            "{alg:<8} k={} epochs={} ALG={} ADV={} ratio={:.4}",
            s.k,
            s.complete_epochs,
            s.alg_cost,
            s.adv_cost,
            s.ratio_f64().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
