//! Offline costs for recorded traces: the explicit strategy used in the cost
//! argument, an exact optimum for tiny instances, and the inequality report.

pub mod adv;
pub mod bounds;
pub mod opt;

pub use adv::{adv_cost, AdvAccount, AdvEpoch, AdvPhase, AdvReplayer, AdvTracker, DropPlan};
pub use bounds::{validate_bounds, BoundsChecker, BoundsReport, EpochRow, PhaseRow, PrefixRow};
pub use opt::{brute_force_opt, OptBudget, OptInstance};
