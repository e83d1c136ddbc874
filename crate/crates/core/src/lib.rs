//! Exact simulation of the (h,k)-server lower-bound game on weighted trees.
//!
//! Nodes are addressed by [`NodePath`]; fractional online algorithms move
//! rational mass around a [`TreeMetric`] and pay for every unit crossing an
//! edge away from the root. The recursive adversary in [`adversary`] builds
//! request sequences that force cost, [`offline`] prices the same sequences
//! for an offline server set, and [`harness`] runs, verifies and sweeps whole
//! games with line-delimited JSON traces.

pub mod adversary;
pub mod algorithms;
pub mod error;
pub mod harness;
pub mod mass;
pub mod numeric;
pub mod offline;
pub mod rational;
pub mod tree;
pub mod view;

pub use algorithms::{OnlineAlgorithm, ServeDecision};
pub use error::{Error, Result};
pub use mass::{CostLedger, MassConfig, Transfer};
pub use rational::Q;
pub use tree::{derive_params, ConstructionParams, NodePath, ParamOverrides, TreeMetric};
pub use view::CappedView;
