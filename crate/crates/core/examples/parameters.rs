//! Construction parameters, the combined-tree schedule and the per-phase
//! certified ratio.
//!
//!     cargo run --example parameters

use hkserver::adversary::{certified_rho, phase_cost_bound, theorem_schedule};
use hkserver::{derive_params, ParamOverrides, Q};

fn main() -> hkserver::Result<()> {
    println!("rho = 1 (standard schedule)");
    for depth in 0..=3 {
        let p = derive_params(Q::ONE, depth, &ParamOverrides::default())?;
        println!("  depth {depth}: b={} h={} k={} eps={}", p.b, p.h, p.k, p.epsilon);
    }

    println!("\noverride b = 3");
    let over = ParamOverrides {
        b: Some(3),
        ..Default::default()
    };
    for depth in 1..=3 {
        let p = derive_params(Q::ONE, depth, &over)?;
        let k_hi = p.cap(depth);
        let k_lo = p.cap(depth - 1);
        let bound = phase_cost_bound(k_hi, k_lo, p.epsilon, p.b);
        println!(
            "  depth {depth}: h={} k={} phase bound {:?} certified rho {:?}",
            p.h,
            p.k,
            bound,
            certified_rho(p.b, p.epsilon, depth)
        );
    }

    println!("\ncombined-tree schedule");
    for h in [10u128, 100, 10_000, 8_886_111, 10u128.pow(12)] {
        let s = theorem_schedule(h)?;
        println!(
            "  h={h:<14} i_h={} b={} rho~{} degenerate={} feasible={}",
            s.i_h, s.b, &s.rho_decimal[..s.rho_decimal.len().min(12)], s.degenerate, s.feasible
        );
    }
    Ok(())
}
