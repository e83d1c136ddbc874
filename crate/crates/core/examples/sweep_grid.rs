//! A small grid over depth and algorithm, written as CSV and reshaped into
//! plot series.
//!
//!     cargo run --release --example sweep_grid

use hkserver::harness::plot::{plot_series, XAxis};
use hkserver::harness::sweep::{sweep, write_csv, SweepGrid};
use hkserver::harness::RunConfig;

fn main() -> hkserver::Result<()> {
    let grid = SweepGrid {
        base: RunConfig {
            max_requests: 20_000,
            ..Default::default()
        },
        depth: vec![1, 2, 3],
        override_b: vec![3],
        algorithm: vec!["greedy".into(), "hoarder".into()],
        ..Default::default()
    };
    let rows = sweep(&grid);
    write_csv(&rows, std::io::stdout().lock())?;
    for s in plot_series(&rows, XAxis::Depth, false) {
        println!("\n# {}", s.file_name());
        print!("{}", s.to_csv());
    }
    Ok(())
}
