use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use hkserver::adversary::Mode;
use hkserver::harness::plot::{plot_series, write_series, XAxis};
use hkserver::harness::sweep::{read_csv, sweep, write_csv, SweepGrid};
use hkserver::harness::{run, verify_path, Record, RunConfig, TraceReader, VerifyOptions};
use hkserver::offline::{adv_cost, brute_force_opt, OptBudget, OptInstance};
use hkserver::{NodePath, TreeMetric, Q};

#[derive(Parser)]
#[command(name = "hkserver", version, about = "Adversaries and exact cost accounting for (h,k)-server on trees")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment.
    Run(RunArgs),
    /// Re-check a trace; exits 1 on any violation.
    Verify {
        trace: PathBuf,
        /// Skip the byte-for-byte rerun.
        #[arg(long)]
        no_rerun: bool,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
        /// Write bounds.jsonl and ratios.csv into this directory.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a grid of experiments and write one CSV row per cell.
    Sweep {
        /// TOML grid: a [base] table plus lists for mode, depth, h, override-b, algorithm, epsilon.
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact optimal offline cost for a tiny trace or request list.
    Oracle {
        /// Trace whose requests are used (server count = offline servers of the run).
        #[arg(long, conflicts_with = "requests")]
        trace: Option<PathBuf>,
        /// Requests as node paths, e.g. `0/1 2 0/1`.
        #[arg(long, num_args = 1..)]
        requests: Vec<NodePath>,
        #[arg(long, default_value_t = 1)]
        h: usize,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value = "1/4")]
        gamma: Q,
    },
    /// Turn a sweep CSV into per-series plot files.
    PlotData {
        summary: PathBuf,
        #[arg(long, default_value = "plot-data")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = XAxis::Depth)]
        x: XAxis,
        /// Add an ln(ln h) column next to h.
        #[arg(long)]
        log_x: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with the same keys as these flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    rho: Option<Q>,
    #[arg(long)]
    h: Option<u64>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    algorithm: Option<String>,
    /// Algorithm option `key=value`; repeatable.
    #[arg(long)]
    option: Vec<String>,
    #[arg(long)]
    epsilon: Option<Q>,
    #[arg(long)]
    gamma: Option<Q>,
    #[arg(long)]
    override_b: Option<u32>,
    #[arg(long)]
    k: Option<Q>,
    #[arg(long)]
    max_requests: Option<u64>,
    #[arg(long)]
    max_cost: Option<Q>,
    #[arg(long)]
    max_phases: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Print the full summary as JSON.
    #[arg(long)]
    json: bool,
}

impl RunArgs {
    fn config(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_toml(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { c.$f = v.clone().into(); } )* };
        }
        set!(mode, algorithm, max_requests, seed);
        macro_rules! set_opt {
            ($($f:ident),*) => { $( if self.$f.is_some() { c.$f = self.$f.clone(); } )* };
        }
        set_opt!(rho, h, depth, epsilon, gamma, override_b, k, max_cost, max_phases, trace, summary);
        if !self.option.is_empty() {
            c.option = self.option.clone();
        }
        Ok(c)
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Stdout may be a closed pipe (`| head`); that is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn real_main() -> anyhow::Result<ExitCode> {
    match Cli::parse().cmd {
        Cmd::Run(args) => {
            let config = args.config()?;
            for w in config.resolve()?.warnings {
                eprintln!("warning: {w}");
            }
            let s = run(&config)?;
            let mut o = String::new();
            if args.json {
                writeln!(o, "{}", serde_json::to_string_pretty(&s)?)?;
            } else {
                writeln!(o, "mode {} depth {} b {} h {} k {} algorithm {}", s.mode, s.depth, s.b, s.h, s.k, s.algorithm)?;
                writeln!(o, "requests {} (budget {})", s.requests, s.budget_hit.map_or("none", |b| b.as_str()))?;
                writeln!(o, "alg_cost {} adv_cost {}", s.alg_cost, s.adv_cost)?;
                if let Some(opt) = s.opt_cost {
                    writeln!(o, "opt_cost {opt}")?;
                }
                match s.empirical_ratio {
                    Some(r) => writeln!(o, "ratio {r} ({:.6})", r.to_f64())?,
                    None => writeln!(o, "ratio n/a")?,
                }
                writeln!(o, "offset {}", s.additive_offset)?;
                writeln!(o, "complete phases {} epochs {}", s.complete_phases, s.complete_epochs)?;
                const SHOWN: usize = 10;
                for e in s.bounds.epochs.iter().take(SHOWN) {
                    writeln!(
                        o,
                        "  epoch {} subtree {}: guaranteed {} >= {} measured {}",
                        e.epoch,
                        e.subtree,
                        e.guaranteed,
                        e.floor,
                        e.measured_ratio.map(|q| format!("{:.6}", q.to_f64())).unwrap_or_default()
                    )?;
                }
                if s.bounds.epochs.len() > SHOWN {
                    writeln!(o, "  ... {} more epochs", s.bounds.epochs.len() - SHOWN)?;
                }
                for v in &s.bounds.violations {
                    writeln!(o, "  violation: {v}")?;
                }
            }
            emit(&o);
            Ok(if s.bounds.is_clean() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Cmd::Verify {
            trace,
            no_rerun,
            json,
            report,
        } => {
            let opts = VerifyOptions {
                rerun: !no_rerun,
                ..Default::default()
            };
            let r = verify_path(&trace, &opts)?;
            if let (Some(dir), Some(b)) = (&report, &r.bounds) {
                fs::create_dir_all(dir)?;
                b.write_jsonl(fs::File::create(dir.join("bounds.jsonl"))?)?;
                b.write_csv(fs::File::create(dir.join("ratios.csv"))?)?;
            }
            if json {
                emit(&(serde_json::to_string_pretty(&r)? + "\n"));
            } else {
                emit(&r.render());
            }
            Ok(if r.is_clean() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Cmd::Sweep { grid, out } => {
            let g = SweepGrid::from_toml(&fs::read_to_string(&grid)?)?;
            let rows = sweep(&g);
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            match out {
                Some(p) => write_csv(&rows, fs::File::create(&p)?)?,
                None => write_csv(&rows, std::io::stdout().lock())?,
            }
            if failed > 0 {
                eprintln!("{failed} of {} cells failed", rows.len());
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Oracle {
            trace,
            requests,
            h,
            depth,
            gamma,
        } => {
            let budget = OptBudget::default();
            let (inst, adv) = match trace {
                Some(p) => {
                    let mut reader = TraceReader::new(BufReader::new(fs::File::open(&p)?));
                    let header = reader.header()?;
                    let res = &header.resolved;
                    let metric = TreeMetric::new(res.tree_depth as usize, res.params.gamma)?;
                    let mut reqs = Vec::new();
                    let mut records = vec![Record::Header(Box::new(header.clone()))];
                    for r in reader {
                        let r = r?;
                        if let Record::Step(s) = &r {
                            reqs.push(s.request.clone());
                        }
                        records.push(r);
                    }
                    let adv = adv_cost(records)?.total;
                    (OptInstance::from_requests(&metric, &reqs, res.adv_servers as usize), Some(adv))
                }
                None => {
                    if requests.is_empty() {
                        bail!("give --trace or --requests");
                    }
                    let metric = TreeMetric::new(depth, gamma)?;
                    for r in &requests {
                        metric.check(r)?;
                    }
                    (OptInstance::from_requests(&metric, &requests, h), None)
                }
            };
            let opt = brute_force_opt(&inst, &budget)?;
            println!("opt {opt} ({} requests, {} nodes, h {})", inst.requests.len(), inst.nodes.len(), inst.h);
            if let Some(adv) = adv {
                println!("adv {adv}");
                if opt > adv {
                    println!("VIOLATION: opt exceeds adv");
                    return Ok(ExitCode::FAILURE);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::PlotData { summary, out, x, log_x } => {
            let rows = read_csv(fs::File::open(&summary)?)?;
            let series = plot_series(&rows, x, log_x);
            for p in write_series(&series, &out)? {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
