//! Running experiments, persisting traces and checking them afterwards.

pub mod config;
pub mod plot;
pub mod run;
pub mod sweep;
pub mod trace;
pub mod verify;

pub use config::{Resolved, RunConfig};
pub use plot::{plot_series, Series, XAxis};
pub use run::{execute, run, RunSummary};
pub use sweep::{sweep, SweepGrid, SweepRow};
pub use trace::{Record, TraceReader, TraceWriter};
pub use verify::{verify_bytes, verify_path, Check, VerifyOptions, VerifyReport};
