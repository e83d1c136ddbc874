//! Online request generation: the recursive phase game, the epoch controller
//! on the combined tree, and the infinite-server variant.
//!
//! The adversary is lock-step with the algorithm: after each serve it
//! observes the transfers, then produces the next request together with any
//! phase or epoch boundary events. It never looks at anything but the
//! algorithm's past behaviour.

use num_bigint::BigInt;
use num_integer::Roots;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mass::{MassConfig, Transfer};
use crate::numeric;
use crate::rational::Q;
use crate::tree::{online_mass_at, ConstructionParams, NodePath, TreeMetric};

mod epoch;
mod game;

use epoch::EpochController;
use game::{Game, GameCtx};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One tree `T_depth`, phases forever.
    Lemma,
    /// Epochs on fresh `T_i` copies hanging off a common root, `i` from `h`.
    Theorem,
    /// Epochs as in `Theorem`, with a huge online mass.
    Infinite,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Lemma => "lemma",
            Mode::Theorem => "theorem",
            Mode::Infinite => "infinite",
        }
    }

    pub fn has_epochs(&self) -> bool {
        !matches!(self, Mode::Lemma)
    }

    /// Depth of the whole tree for subtrees `T_depth`.
    pub fn tree_depth(&self, depth: u32) -> u32 {
        depth + self.has_epochs() as u32
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "lemma" => Ok(Mode::Lemma),
            "theorem" => Ok(Mode::Theorem),
            "infinite" => Ok(Mode::Infinite),
            other => Err(Error::Parse(format!("unknown mode {other:?}"))),
        }
    }
}

/// Boundary records interleaved with requests in a trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum AdversaryEvent {
    PhaseStart {
        game: NodePath,
        level: u32,
        phase: u64,
        fresh: u32,
        prev_marked: Vec<u32>,
    },
    /// `j = 0` is the fresh subtree; later marks carry the averaging bound.
    Mark {
        game: NodePath,
        level: u32,
        phase: u64,
        j: u32,
        child: u32,
        mass: Q,
        bound: Option<Q>,
    },
    /// `level_cost` is the in-view charged cost on the game's child edges
    /// during the phase; `cost_bound` is the guaranteed minimum, if defined.
    PhaseComplete {
        game: NodePath,
        level: u32,
        phase: u64,
        marked: Vec<u32>,
        dropped: u32,
        level_cost: Q,
        cost_bound: Option<Q>,
    },
    EpochStart {
        epoch: u64,
        subtree: u32,
        threshold: Q,
    },
    EpochComplete {
        epoch: u64,
        subtree: u32,
        mass: Q,
    },
}

/// `(k_upper - j (k_lower - eps)) / (b - j + 1)`: the average capped mass of
/// the carry-over candidates left at the `j`-th marking.
pub fn marking_candidate_bound(k_upper: Q, k_lower: Q, epsilon: Q, b: u32, j: u32) -> Q {
    assert!(j >= 1 && j < b, "marking index {j} outside 1..{b}");
    (k_upper - Q::from(j) * (k_lower - epsilon)) / Q::from(b - j + 1)
}

/// Minimum in-view cost on a game's child edges (unit length) during a
/// complete phase: `(k_lower - eps) + sum_j [(k_lower - eps) - bound_j]`.
/// `None` when some bracket is negative.
pub fn phase_cost_bound(k_upper: Q, k_lower: Q, epsilon: Q, b: u32) -> Option<Q> {
    let thr = k_lower - epsilon;
    let mut total = thr;
    for j in 1..b {
        let gain = thr - marking_candidate_bound(k_upper, k_lower, epsilon, b, j);
        if gain.is_negative() {
            return None;
        }
        total += gain;
    }
    Some(total)
}

/// Smallest per-phase ratio of guaranteed online cost to offline cost over
/// levels `1..=depth` (the offline side moves `b^(level-1)` servers).
pub fn certified_rho(b: u32, epsilon: Q, depth: u32) -> Option<Q> {
    let mut best: Option<Q> = None;
    for level in 1..=depth {
        let k_up = online_mass_at(b, level).ok()?;
        let k_lo = online_mass_at(b, level - 1).ok()?;
        let r = phase_cost_bound(k_up, k_lo, epsilon, b)? / Q::from(b).pow(level - 1);
        best = Some(best.map_or(r, |x: Q| x.min(r)));
    }
    best
}

/// The combined-tree schedule for `h` offline servers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremSchedule {
    #[serde(with = "decimal_u128")]
    pub h: u128,
    pub i_h: u32,
    pub b: u32,
    /// Rational lower bound on `ln(b) / 3` (within 1e-12).
    pub rho: Q,
    /// `ln(b) / 3` to 30 significant digits, informational.
    pub rho_decimal: String,
    /// `b <= 1`: the schedule has no adversary.
    pub degenerate: bool,
    /// `b^i <= i^(i/2) <= exp(i^2) <= h`.
    pub feasible: bool,
}

/// Decimal strings: JSON numbers past 2^64 do not survive tagged records.
mod decimal_u128 {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

pub fn theorem_schedule(h: u128) -> Result<TheoremSchedule> {
    if h < 2 {
        return Err(Error::Params(format!("h must be >= 2, got {h}")));
    }
    let i = numeric::floor_sqrt_ln(h);
    let b = (i as u64).sqrt() as u32;
    Ok(TheoremSchedule {
        h,
        i_h: i,
        b,
        rho: if b <= 1 { Q::ZERO } else { numeric::ln_lower_bound(b as u128) * Q::new(1, 3) },
        rho_decimal: if b <= 1 { "0".into() } else { numeric::ln_decimal(b as u128, 3, 30) },
        degenerate: b <= 1,
        feasible: feasibility_chain(h, i, b),
    })
}

fn feasibility_chain(h: u128, i: u32, b: u32) -> bool {
    // b^i <= i^(i/2)  <=>  b^(2i) <= i^i
    let lhs = BigInt::from(b).pow(2 * i);
    let rhs = BigInt::from(i).pow(i);
    if lhs > rhs {
        return false;
    }
    // i^(i/2) <= exp(i^2)  <=>  i^i <= exp(2 i^2)
    if i > 0 {
        let Ok(ii) = u128::try_from(rhs) else { return false };
        if numeric::exp_cmp_int(Q::from(2 * i * i), ii) == std::cmp::Ordering::Less {
            return false;
        }
    }
    numeric::exp_cmp_int(Q::from(i * i), h) != std::cmp::Ordering::Greater
}

enum Kind {
    Lemma(Game),
    Epochs(EpochController),
}

/// The request generator for one run.
pub struct Adversary {
    ctx: GameCtx,
    mode: Mode,
    kind: Kind,
}

impl Adversary {
    pub fn new(mode: Mode, params: &ConstructionParams, initial: &MassConfig) -> Result<Adversary> {
        let metric = TreeMetric::new(mode.tree_depth(params.depth) as usize, params.gamma)?;
        let caps = (0..=params.depth)
            .map(|l| online_mass_at(params.b, l))
            .collect::<Result<Vec<Q>>>()?;
        let ctx = GameCtx {
            metric,
            b: params.b,
            epsilon: params.epsilon,
            caps,
        };
        let kind = match mode {
            Mode::Lemma => Kind::Lemma(Game::new(&ctx, NodePath::root(), params.depth, initial)),
            Mode::Theorem | Mode::Infinite => Kind::Epochs(EpochController::new(params.depth, ctx.caps[params.depth as usize])),
        };
        Ok(Adversary { ctx, mode, kind })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn metric(&self) -> &TreeMetric {
        &self.ctx.metric
    }

    /// Feeds the transfers of the last serve step.
    pub fn observe(&mut self, transfers: &[Transfer], request: &NodePath) {
        match &mut self.kind {
            Kind::Lemma(g) => g.observe(&self.ctx.metric, transfers, Some(request)),
            Kind::Epochs(e) => e.observe(&self.ctx.metric, transfers, request),
        }
    }

    /// Next request; boundary events are appended to `events` first.
    pub fn next_request(&mut self, config: &MassConfig, events: &mut Vec<AdversaryEvent>) -> NodePath {
        match &mut self.kind {
            Kind::Lemma(g) => g.next_request(&self.ctx, events),
            Kind::Epochs(e) => e.next_request(&self.ctx, config, events),
        }
    }

    /// In-view cost paid by the transformed algorithm in the top game (lemma
    /// mode) or in the active epoch subtree.
    pub fn view_cost(&self) -> Q {
        match &self.kind {
            Kind::Lemma(g) => g.view_cost(),
            Kind::Epochs(e) => e.view_cost(),
        }
    }
}
