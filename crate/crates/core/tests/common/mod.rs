//! Independent re-derivations for the integration tests. Arithmetic is done
//! in big rationals with this file's own tree distances; the crate is only
//! used to produce and parse traces.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufReader;

use hkserver::adversary::{AdversaryEvent, Mode};
use hkserver::harness::{Record, TraceReader};
use hkserver::{NodePath, Q};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type R = BigRational;

pub fn r(q: Q) -> R {
    BigRational::new(BigInt::from(q.numer()), BigInt::from(q.denom()))
}

pub fn ri(n: i64) -> R {
    BigRational::from_integer(BigInt::from(n))
}

pub fn frac(n: i64, d: i64) -> R {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn pow(b: u32, e: u32) -> R {
    ri(b as i64).pow(e as i32)
}

/// `k_i = b^i (1 + i/(2b))`
pub fn k_of(b: u32, i: u32) -> R {
    pow(b, i) * (R::one() + frac(i as i64, 2 * b as i64))
}

/// Average capped mass left among the carry-overs at the `j`-th marking of a
/// level-`l` game.
pub fn mark_bound(b: u32, eps: &R, l: u32, j: u32) -> R {
    (k_of(b, l) - ri(j as i64) * (k_of(b, l - 1) - eps)) / ri((b - j + 1) as i64)
}

/// Per-phase cost floor on unit child edges, `None` if a bracket is negative.
pub fn phase_bound(b: u32, eps: &R, l: u32) -> Option<R> {
    let thr = k_of(b, l - 1) - eps;
    let mut total = thr.clone();
    for j in 1..b {
        let gain = &thr - mark_bound(b, eps, l, j);
        if gain.is_negative() {
            return None;
        }
        total += gain;
    }
    Some(total)
}

/// Smallest per-phase ratio of online floor to offline cost over levels
/// `1..=depth`.
pub fn certified(b: u32, eps: &R, depth: u32) -> Option<R> {
    let mut best: Option<R> = None;
    for l in 1..=depth {
        let c = phase_bound(b, eps, l)? / pow(b, l - 1);
        best = Some(match best {
            Some(x) => x.min(c),
            None => c,
        });
    }
    best
}

/// The scaled tree: the edge into a depth-`t` node has length `gamma^(t-1)`
/// and sits at level `depth - t + 1`.
#[derive(Clone, Debug)]
pub struct Tree {
    pub depth: usize,
    pub gamma: R,
}

impl Tree {
    pub fn len(&self, t: usize) -> R {
        self.gamma.pow(t as i32 - 1)
    }

    pub fn level(&self, t: usize) -> usize {
        self.depth - t + 1
    }

    fn lca(a: &[u32], b: &[u32]) -> usize {
        a.iter().zip(b).take_while(|(x, y)| x == y).count()
    }

    /// `(depth, length)` of every edge walked away from the root going `a -> b`.
    pub fn down_edges(&self, a: &[u32], b: &[u32]) -> Vec<(usize, R)> {
        (Self::lca(a, b) + 1..=b.len()).map(|t| (t, self.len(t))).collect()
    }

    pub fn up_edges(&self, a: &[u32], b: &[u32]) -> Vec<(usize, R)> {
        (Self::lca(a, b) + 1..=a.len()).map(|t| (t, self.len(t))).collect()
    }

    pub fn down(&self, a: &[u32], b: &[u32]) -> R {
        self.down_edges(a, b).into_iter().map(|(_, l)| l).sum()
    }
}

/// Counts checks and keeps the first few failures.
#[derive(Clone, Debug, Default)]
pub struct Tally {
    pub checked: u64,
    pub failed: u64,
    pub first: Vec<String>,
}

impl Tally {
    pub fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failed += 1;
            if self.first.len() < 5 {
                self.first.push(msg());
            }
        }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0
    }

    pub fn absorb(&mut self, other: &Tally) {
        self.checked += other.checked;
        self.failed += other.failed;
        for m in &other.first {
            if self.first.len() < 5 {
                self.first.push(m.clone());
            }
        }
    }

    pub fn summary(&self) -> String {
        match self.first.first() {
            None => format!("{} checks, 0 violations", self.checked),
            Some(m) => format!("{} checks, {} violations, first: {m}", self.checked, self.failed),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EpochAudit {
    pub epoch: u64,
    pub complete: bool,
    /// Offline cost inside the epoch subtree, root edges excluded.
    pub inner: R,
    pub entry: R,
}

#[derive(Clone, Debug)]
pub struct Audit {
    pub mode: Mode,
    pub b: u32,
    pub depth: u32,
    pub rho: R,
    pub requests: u64,
    pub alg_down: R,
    pub alg_up: R,
    pub adv_total: R,
    /// Conservation, non-negativity, recorded deltas, service.
    pub mass: Tally,
    /// `up <= down` after every step.
    pub dominance: Tally,
    pub marks: Tally,
    pub phases: Tally,
    /// Complete top-level phases seen.
    pub top_phases: u64,
    pub prefix: Tally,
    /// Largest slack up to the first complete phase, if any phase completed.
    pub stabilized: Option<R>,
    pub final_slack: R,
    pub adv_level: Tally,
    pub feasibility: Tally,
    pub epochs: Vec<EpochAudit>,
}

type Key = (Vec<u32>, u64);

/// Two passes over a trace: the first learns which child each phase gave up,
/// the second replays mass, online cost and the offline servers.
pub fn audit(trace: &[u8]) -> Audit {
    let read = || {
        let mut rd = TraceReader::new(BufReader::new(trace));
        let h = rd.header().expect("trace header");
        (h, rd.map(|r| r.expect("trace record")))
    };

    let mut dropped: HashMap<Key, u32> = HashMap::new();
    let mut pending: HashMap<Key, (Vec<u32>, Vec<u32>)> = HashMap::new();
    for rec in read().1 {
        if let Record::Event { event, .. } = rec {
            match event {
                AdversaryEvent::PhaseStart { game, phase, prev_marked, .. } => {
                    pending.insert((game.indices().to_vec(), phase), (prev_marked, Vec::new()));
                }
                AdversaryEvent::Mark { game, phase, child, .. } => {
                    if let Some(p) = pending.get_mut(&(game.indices().to_vec(), phase)) {
                        p.1.push(child);
                    }
                }
                AdversaryEvent::PhaseComplete { game, phase, dropped: d, .. } => {
                    let key = (game.indices().to_vec(), phase);
                    pending.remove(&key);
                    dropped.insert(key, d);
                }
                _ => {}
            }
        }
    }
    for (key, (prev, marked)) in pending {
        if let Some(c) = prev.into_iter().filter(|c| !marked.contains(c)).min() {
            dropped.insert(key, c);
        }
    }

    let (header, records) = read();
    let res = &header.resolved;
    let p = &res.params;
    let (b, depth) = (p.b, p.depth);
    let tree = Tree {
        depth: res.tree_depth as usize,
        gamma: r(p.gamma),
    };
    let eps = r(p.epsilon);
    let k = r(p.k);
    let top_len = res.mode.has_epochs() as usize;
    let whole = res.mode == Mode::Lemma && k == k_of(b, depth);

    let mut a = Audit {
        mode: res.mode,
        b,
        depth,
        rho: r(res.rho),
        requests: 0,
        alg_down: R::zero(),
        alg_up: R::zero(),
        adv_total: R::zero(),
        mass: Tally::default(),
        dominance: Tally::default(),
        marks: Tally::default(),
        phases: Tally::default(),
        top_phases: 0,
        prefix: Tally::default(),
        stabilized: None,
        final_slack: R::zero(),
        adv_level: Tally::default(),
        feasibility: Tally::default(),
        epochs: Vec::new(),
    };

    let mut mass: HashMap<Vec<u32>, R> = HashMap::new();
    mass.insert(Vec::new(), k.clone());
    let mut alg_by_level: BTreeMap<usize, R> = BTreeMap::new();
    let subtree = |mass: &HashMap<Vec<u32>, R>, node: &[u32]| -> R {
        mass.iter().filter(|(n, _)| n.starts_with(node)).map(|(_, q)| q.clone()).sum()
    };

    let mut servers: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
    servers.insert(Vec::new(), b.pow(depth) as u64);
    let mut adv = Offline {
        tree: tree.clone(),
        b,
        servers,
        home: None,
    };
    if res.mode == Mode::Lemma {
        let (cost, _) = adv.relocate(&[], &[], depth, &mut a.adv_level);
        a.adv_total += cost;
    }

    // phase start: (level-l online cost so far, level)
    let mut open: HashMap<Vec<u32>, R> = HashMap::new();
    let mut max_slack = &a.rho * &a.adv_total;
    let mut first_complete: Option<u64> = None;

    for rec in records {
        match rec {
            Record::Event { index, event } => match event {
                AdversaryEvent::EpochStart { epoch, subtree: s, .. } => {
                    let (cost, by_depth) = adv.epoch(s, depth, &mut a.adv_level);
                    let entry = by_depth.get(&1).cloned().unwrap_or_else(R::zero);
                    a.epochs.push(EpochAudit {
                        epoch,
                        complete: false,
                        inner: &cost - &entry,
                        entry,
                    });
                    a.adv_total += cost;
                }
                AdversaryEvent::EpochComplete { epoch, .. } => {
                    if let Some(e) = a.epochs.iter_mut().find(|e| e.epoch == epoch) {
                        e.complete = true;
                    }
                }
                AdversaryEvent::PhaseStart { game, level, phase, fresh, .. } => {
                    let g = game.indices().to_vec();
                    let drop = dropped.get(&(g.clone(), phase)).copied();
                    a.feasibility.check(drop.is_some(), || format!("no dropped child for {game} phase {phase}"));
                    if let Some(d) = drop {
                        let mut src = g.clone();
                        src.push(d);
                        let mut dst = g.clone();
                        dst.push(fresh);
                        let (cost, by_depth) = adv.relocate(&src, &dst, level - 1, &mut a.adv_level);
                        if g.len() == top_len {
                            let got = by_depth.get(&(g.len() + 1)).cloned().unwrap_or_else(R::zero);
                            let want = pow(b, level - 1) * tree.len(g.len() + 1);
                            a.adv_level
                                .check(got == want, || format!("{game} phase {phase}: level-{level} offline cost {got}, expected {want}"));
                        }
                        if let Some(e) = a.epochs.last_mut() {
                            e.inner += &cost;
                        }
                        a.adv_total += cost;
                    }
                    let lvl = tree.level(g.len() + 1);
                    open.insert(g, alg_by_level.get(&lvl).cloned().unwrap_or_else(R::zero));
                }
                AdversaryEvent::Mark { game, level, j, child, mass: m, bound, .. } => {
                    let m = r(m);
                    if j >= 1 {
                        let want = mark_bound(b, &eps, level, j);
                        a.marks.check(m <= want && bound.map(r).as_ref() == Some(&want), || {
                            format!("mark {j} in {game}: mass {m}, bound {bound:?}, expected {want}")
                        });
                    }
                    if whole && game.len() == top_len {
                        let mut c = game.indices().to_vec();
                        c.push(child);
                        let raw = subtree(&mass, &c);
                        a.marks.check(raw == m, || format!("mark {j} in {game}: raw mass {raw}, event {m}"));
                    }
                }
                AdversaryEvent::PhaseComplete { game, level, phase, level_cost, cost_bound, .. } => {
                    let g = game.indices().to_vec();
                    if g.len() == top_len {
                        a.top_phases += 1;
                    }
                    first_complete.get_or_insert(index);
                    let unit = tree.len(g.len() + 1);
                    let want = phase_bound(b, &eps, level).map(|c| c * &unit);
                    let start = open.remove(&g);
                    a.phases.check(cost_bound.map(r) == want, || {
                        format!("{game} phase {phase}: bound {cost_bound:?}, expected {want:?}")
                    });
                    if let Some(bd) = want {
                        let lc = r(level_cost);
                        a.phases.check(lc >= bd, || format!("{game} phase {phase}: level cost {lc} < {bd}"));
                        if whole && g.len() == top_len {
                            let lvl = tree.level(g.len() + 1);
                            let now = alg_by_level.get(&lvl).cloned().unwrap_or_else(R::zero);
                            let raw = now - start.unwrap_or_else(R::zero);
                            a.phases.check(raw >= bd, || format!("{game} phase {phase}: raw level cost {raw} < {bd}"));
                        }
                    }
                }
            },
            Record::Step(s) => {
                a.requests = s.index;
                let mut down: BTreeMap<usize, R> = BTreeMap::new();
                let mut up: BTreeMap<usize, R> = BTreeMap::new();
                for t in &s.transfers {
                    let (from, to, amt) = (t.from.indices(), t.to.indices(), r(t.amount));
                    let have = mass.get(from).cloned().unwrap_or_else(R::zero);
                    a.mass.check(!amt.is_negative() && amt <= have, || {
                        format!("request {}: moving {amt} from {} holding {have}", s.index, t.from)
                    });
                    let left = have - &amt;
                    a.mass.check(!left.is_negative(), || format!("request {}: negative mass at {}", s.index, t.from));
                    if left.is_zero() {
                        mass.remove(from);
                    } else {
                        mass.insert(from.to_vec(), left);
                    }
                    *mass.entry(to.to_vec()).or_insert_with(R::zero) += &amt;
                    for (d, len) in tree.down_edges(from, to) {
                        *down.entry(tree.level(d)).or_insert_with(R::zero) += &amt * len;
                    }
                    for (d, len) in tree.up_edges(from, to) {
                        *up.entry(tree.level(d)).or_insert_with(R::zero) += &amt * len;
                    }
                }
                down.retain(|_, v| !v.is_zero());
                up.retain(|_, v| !v.is_zero());
                let conv = |m: &BTreeMap<usize, Q>| -> BTreeMap<usize, R> {
                    m.iter().filter(|(_, v)| !v.is_zero()).map(|(l, v)| (*l, r(*v))).collect()
                };
                a.mass.check(conv(&s.down) == down && conv(&s.up) == up, || {
                    format!("request {}: recorded costs differ from the transfers", s.index)
                });
                for (l, v) in down {
                    a.alg_down += &v;
                    *alg_by_level.entry(l).or_insert_with(R::zero) += v;
                }
                a.alg_up += up.into_values().sum::<R>();
                if s.index % 64 == 0 {
                    let total: R = mass.values().sum();
                    a.mass.check(total == k, || format!("request {}: total mass {total}", s.index));
                }
                let at = mass.get(s.request.indices()).cloned().unwrap_or_else(R::zero);
                a.mass.check(at >= R::one(), || format!("request {} at {} holds {at}", s.index, s.request));
                for (node, q) in &s.masses {
                    let have = mass.get(node.indices()).cloned().unwrap_or_else(R::zero);
                    a.mass.check(have == r(*q), || format!("request {}: {node} holds {have}, trace says {q}", s.index));
                }
                a.dominance.check(a.alg_up <= a.alg_down, || {
                    format!("request {}: up {} > down {}", s.index, a.alg_up, a.alg_down)
                });
                a.feasibility.check(adv.serves(s.request.indices()), || {
                    format!("request {} at {} has no offline server", s.index, s.request)
                });

                let slack = &a.rho * &a.adv_total - &a.alg_down;
                match first_complete {
                    None => max_slack = max_slack.max(slack.clone()),
                    Some(at) if s.index < at => max_slack = max_slack.max(slack.clone()),
                    Some(_) => {
                        let bound = a.stabilized.get_or_insert_with(|| max_slack.clone()).clone();
                        a.prefix
                            .check(slack <= bound, || format!("prefix {}: slack {slack} above {bound}", s.index));
                    }
                }
                a.final_slack = slack;
            }
            _ => {}
        }
    }
    let total: R = mass.values().sum();
    a.mass.check(total == k, || format!("final total mass {total}"));
    if first_complete.is_some() && a.stabilized.is_none() {
        a.stabilized = Some(max_slack);
    }
    a
}

/// Explicit offline servers, counted per node.
struct Offline {
    tree: Tree,
    b: u32,
    servers: BTreeMap<Vec<u32>, u64>,
    home: Option<Vec<u32>>,
}

impl Offline {
    fn layout(&self, root: &[u32], levels: u32) -> Vec<Vec<u32>> {
        let mut out = vec![root.to_vec()];
        for _ in 0..levels {
            out = out
                .iter()
                .flat_map(|n| {
                    (0..self.b).map(move |c| {
                        let mut m = n.clone();
                        m.push(c);
                        m
                    })
                })
                .collect();
        }
        out
    }

    /// Moves all servers under `src` onto the `levels`-deep layout under
    /// `dst`. Returns the downward cost and its split by edge depth.
    fn relocate(&mut self, src: &[u32], dst: &[u32], levels: u32, tally: &mut Tally) -> (R, BTreeMap<usize, R>) {
        let mut units = Vec::new();
        let keys: Vec<Vec<u32>> = self.servers.keys().filter(|n| n.starts_with(src)).cloned().collect();
        for n in keys {
            let c = self.servers.remove(&n).unwrap_or(0);
            units.extend(std::iter::repeat(n).take(c as usize));
        }
        let targets = self.layout(dst, levels);
        tally.check(units.len() == targets.len(), || {
            format!("offline move {src:?} -> {dst:?}: {} servers for {} slots", units.len(), targets.len())
        });
        let mut cost = R::zero();
        let mut by_depth = BTreeMap::new();
        for (from, to) in units.iter().zip(&targets) {
            for (d, len) in self.tree.down_edges(from, to) {
                cost += &len;
                *by_depth.entry(d).or_insert_with(R::zero) += len;
            }
            *self.servers.entry(to.clone()).or_default() += 1;
        }
        for extra in units.into_iter().skip(targets.len()) {
            *self.servers.entry(extra).or_default() += 1;
        }
        (cost, by_depth)
    }

    fn epoch(&mut self, subtree: u32, depth: u32, tally: &mut Tally) -> (R, BTreeMap<usize, R>) {
        let src = self.home.take().unwrap_or_default();
        let dst = vec![subtree];
        let out = self.relocate(&src, &dst, depth, tally);
        self.home = Some(dst);
        out
    }

    fn serves(&self, node: &[u32]) -> bool {
        self.servers.get(node).is_some_and(|&c| c > 0)
    }
}

/// Exhaustive optimum over every server configuration at every step (moves
/// need not be lazy). Servers start at the root; only downward distance is
/// paid; a transition is priced by the cheapest matching of old to new
/// positions.
pub fn exhaustive_opt(tree: &Tree, requests: &[NodePath], h: usize) -> R {
    let mut nodes: BTreeSet<Vec<u32>> = BTreeSet::new();
    nodes.insert(Vec::new());
    for q in requests {
        let q = q.indices();
        for t in 0..=q.len() {
            nodes.insert(q[..t].to_vec());
        }
    }
    let nodes: Vec<Vec<u32>> = nodes.into_iter().collect();
    let n = nodes.len();
    let mut configs: Vec<Vec<usize>> = Vec::new();
    fn multisets(n: usize, h: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == h {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            multisets(n, h, i, cur, out);
            cur.pop();
        }
    }
    multisets(n, h, 0, &mut Vec::new(), &mut configs);
    let dist: Vec<Vec<R>> = nodes.iter().map(|a| nodes.iter().map(|b| tree.down(a, b)).collect()).collect();
    let perms = permutations(h);
    let trans: Vec<Vec<R>> = configs
        .iter()
        .map(|c| {
            configs
                .iter()
                .map(|d| {
                    perms
                        .iter()
                        .map(|p| (0..h).map(|i| dist[c[i]][d[p[i]]].clone()).sum::<R>())
                        .min()
                        .expect("at least one permutation")
                })
                .collect()
        })
        .collect();
    let root = nodes.iter().position(|v| v.is_empty()).expect("root");
    let mut cost: Vec<Option<R>> = configs.iter().map(|c| c.iter().all(|&i| i == root).then(R::zero)).collect();
    for q in requests {
        let qi = nodes.iter().position(|v| v.as_slice() == q.indices()).expect("request node");
        cost = (0..configs.len())
            .map(|d| {
                if !configs[d].contains(&qi) {
                    return None;
                }
                (0..configs.len())
                    .filter_map(|c| cost[c].as_ref().map(|x| x + &trans[c][d]))
                    .min()
            })
            .collect();
    }
    cost.into_iter().flatten().min().unwrap_or_else(R::zero)
}

fn permutations(h: usize) -> Vec<Vec<usize>> {
    if h == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(h - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, h - 1);
            out.push(q);
        }
    }
    out
}

pub fn explicit_nodes(requests: &[NodePath]) -> usize {
    let mut nodes: BTreeSet<Vec<u32>> = BTreeSet::new();
    nodes.insert(Vec::new());
    for q in requests {
        for t in 0..=q.len() {
            nodes.insert(q.indices()[..t].to_vec());
        }
    }
    nodes.len()
}

pub fn requests_of(trace: &[u8]) -> Vec<NodePath> {
    let mut rd = TraceReader::new(BufReader::new(trace));
    rd.header().expect("trace header");
    rd.filter_map(|r| match r.expect("trace record") {
        Record::Step(s) => Some(s.request),
        _ => None,
    })
    .collect()
}
