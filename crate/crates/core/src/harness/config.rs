use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::adversary::{theorem_schedule, Mode, TheoremSchedule};
use crate::error::{Error, Result};
use crate::numeric;
use crate::rational::Q;
use crate::tree::{derive_params, servers_at, ConstructionParams, ParamOverrides};

/// One experiment. Field names double as config-file keys and CLI flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub rho: Option<Q>,
    pub h: Option<u64>,
    pub depth: Option<u32>,
    pub algorithm: String,
    /// `key=value` options for the algorithm.
    pub option: Vec<String>,
    pub epsilon: Option<Q>,
    pub gamma: Option<Q>,
    pub override_b: Option<u32>,
    /// Online mass; defaults to the schedule's `k` (lemma), `h` (theorem)
    /// or one million (infinite).
    pub k: Option<Q>,
    pub max_requests: u64,
    pub max_cost: Option<Q>,
    /// Stop after this many complete top-level phases (lemma) or epochs.
    pub max_phases: Option<u64>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            mode: Mode::Lemma,
            rho: None,
            h: None,
            depth: None,
            algorithm: "greedy".into(),
            option: Vec::new(),
            epsilon: None,
            gamma: None,
            override_b: None,
            k: None,
            max_requests: 100_000,
            max_cost: None,
            max_phases: None,
            seed: 0,
            trace: None,
            summary: None,
        }
    }
}

pub const INFINITE_MASS: i128 = 1_000_000;

/// A config with every derived quantity filled in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub mode: Mode,
    /// `params.depth` is the depth of the attacked subtrees; `params.k` is the
    /// online mass and `params.h` the offline server count.
    pub params: ConstructionParams,
    pub tree_depth: u32,
    /// Servers the offline strategy actually uses (`b^depth`).
    pub adv_servers: u64,
    pub rho: Q,
    pub schedule: Option<TheoremSchedule>,
    pub warnings: Vec<String>,
}

impl RunConfig {
    /// Identity used in the trace header: output paths do not affect a run.
    pub fn echo(&self) -> RunConfig {
        RunConfig {
            trace: None,
            summary: None,
            ..self.clone()
        }
    }

    pub fn resolve(&self) -> Result<Resolved> {
        if self.max_requests == 0 {
            return Err(Error::Params("max-requests must be positive".into()));
        }
        if self.max_cost.is_some_and(|c| !c.is_positive()) {
            return Err(Error::Params("max-cost must be positive".into()));
        }
        if self.max_phases == Some(0) {
            return Err(Error::Params("max-phases must be positive".into()));
        }
        let mut warnings = Vec::new();
        let overrides = |h: Option<u64>, k: Option<Q>| ParamOverrides {
            b: self.override_b,
            h,
            k,
            epsilon: self.epsilon,
            gamma: self.gamma,
        };
        let (params, schedule) = match self.mode {
            Mode::Lemma | Mode::Infinite => {
                if self.h.is_some() {
                    return Err(Error::Params(format!("--h is only used in theorem mode, not {}", self.mode)));
                }
                let rho = self.rho.unwrap_or(Q::ONE);
                let depth = self.depth.unwrap_or(1);
                let k = match self.mode {
                    Mode::Infinite => Some(self.k.unwrap_or(Q::int(INFINITE_MASS))),
                    _ => self.k,
                };
                let mut params = derive_params(rho, depth, &overrides(None, k))?;
                if self.mode == Mode::Infinite && params.k < params.cap(depth) {
                    return Err(Error::Params(format!(
                        "infinite mode needs online mass >= {}, got {}",
                        params.cap(depth),
                        params.k
                    )));
                }
                if self.mode == Mode::Infinite {
                    params.standard_schedule = false;
                }
                (params, None)
            }
            Mode::Theorem => {
                let h = self
                    .h
                    .ok_or_else(|| Error::Params("theorem mode needs --h".into()))?;
                if self.depth.is_some() {
                    return Err(Error::Params("theorem mode derives the depth from --h".into()));
                }
                let s = theorem_schedule(h as u128)?;
                if s.degenerate && self.override_b.is_none() {
                    return Err(Error::Params(format!(
                        "degenerate schedule for h={h}: i_h={}, b=floor(sqrt(i_h))={} <= 1; pass --override-b to run anyway",
                        s.i_h, s.b
                    )));
                }
                if s.degenerate {
                    warnings.push(format!("degenerate schedule (b={}) overridden with b={}", s.b, self.override_b.unwrap()));
                }
                let b = self.override_b.unwrap_or(s.b);
                let rho = match self.rho {
                    Some(r) => r,
                    None if b == s.b => s.rho,
                    None => numeric::ln_lower_bound(b as u128) * Q::new(1, 3),
                };
                let h64 = h;
                let k = self.k.unwrap_or(Q::from(h64));
                if k < Q::from(h64) {
                    return Err(Error::Params(format!("online mass k={k} must be >= h={h}")));
                }
                let used = servers_at(b, s.i_h)?;
                if used > h64 {
                    return Err(Error::Params(format!("b^i_h = {used} exceeds h = {h}")));
                }
                let mut params = derive_params(
                    rho,
                    s.i_h,
                    &ParamOverrides {
                        b: Some(b),
                        ..overrides(Some(h64), Some(k))
                    },
                )?;
                params.standard_schedule = false;
                (params, Some(s))
            }
        };
        if params.depth == 0 {
            warnings.push("depth 0: every request hits a single node".into());
        }
        if !params.standard_schedule {
            warnings.push("non-standard schedule: guarantees are reported, not asserted".into());
        }
        let adv_servers = servers_at(params.b, params.depth)?;
        Ok(Resolved {
            mode: self.mode,
            tree_depth: self.mode.tree_depth(params.depth),
            adv_servers,
            rho: params.rho,
            params,
            schedule,
            warnings,
        })
    }

    /// Reads a TOML file whose keys are the long CLI flag names.
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("config file: {e}")))
    }
}
