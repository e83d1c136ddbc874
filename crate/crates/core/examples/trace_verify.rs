//! Persist a trace, verify it, then corrupt one transfer and truncate it to
//! see how the verifier reports each case.
//!
//!     cargo run --release --example trace_verify

use hkserver::harness::{run, verify_bytes, verify_path, Record, RunConfig, VerifyOptions};
use hkserver::Q;

fn main() -> hkserver::Result<()> {
    let dir = std::env::temp_dir().join("hkserver-trace-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("lemma-hoarder.jsonl");
    let config = RunConfig {
        depth: Some(1),
        algorithm: "hoarder".into(),
        max_requests: 2_000,
        trace: Some(path.clone()),
        ..Default::default()
    };
    run(&config)?;
    let opts = VerifyOptions { keep: 2, ..Default::default() };
    print!("{}", verify_path(&path, &opts)?.render());

    let text = std::fs::read_to_string(&path)?;
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let target = lines
        .iter()
        .position(|l| l.contains("\"record\":\"step\"") && l.contains("\"index\":500,"))
        .expect("step 500");
    let mut rec: Record = serde_json::from_str(&lines[target])?;
    if let Record::Step(s) = &mut rec {
        s.transfers[0].amount = s.transfers[0].amount + Q::new(1, 3);
    }
    lines[target] = serde_json::to_string(&rec)?;
    let corrupted = lines.join("\n") + "\n";
    println!("\n-- one amount corrupted on line {}", target + 1);
    print!("{}", verify_bytes(corrupted.as_bytes(), &opts)?.render());

    println!("\n-- truncated to 60%");
    let cut = &text.as_bytes()[..text.len() * 3 / 5];
    print!("{}", verify_bytes(cut, &opts)?.render());
    Ok(())
}
