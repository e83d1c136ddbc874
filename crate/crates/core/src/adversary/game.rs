use std::collections::BTreeMap;

use crate::mass::{MassConfig, Transfer};
use crate::rational::Q;
use crate::tree::{NodePath, TreeMetric};
use crate::view::CappedView;

use super::{marking_candidate_bound, phase_cost_bound, AdversaryEvent};

/// Parameters shared by every game of one run.
#[derive(Clone, Debug)]
pub(crate) struct GameCtx {
    pub metric: TreeMetric,
    pub b: u32,
    pub epsilon: Q,
    /// `caps[l]` is the online mass granted to a level-`l` subtree.
    pub caps: Vec<Q>,
}

impl GameCtx {
    fn threshold(&self, level: u32) -> Q {
        self.caps[level as usize] - self.epsilon
    }
}

/// The recursive request generator for one subtree `T_level`.
#[derive(Clone, Debug)]
pub(crate) enum Game {
    /// `T_0`: every request goes to this single node.
    Point(NodePath),
    Phases(Box<PhaseGame>),
}

#[derive(Clone, Debug)]
pub(crate) struct PhaseGame {
    root: NodePath,
    level: u32,
    view: CappedView,
    phase: u64,
    in_phase: bool,
    marked: Vec<u32>,
    prev_marked: Vec<u32>,
    next_fresh: u32,
    children: BTreeMap<u32, (NodePath, Game)>,
    cost_at_phase_start: Q,
}

impl Game {
    /// A game on `root`'s subtree whose view starts from `source`.
    pub fn new(ctx: &GameCtx, root: NodePath, level: u32, source: &MassConfig) -> Game {
        if level == 0 {
            return Game::Point(root);
        }
        let view = CappedView::snapshot(source, &root, ctx.caps[level as usize]);
        let mut children = BTreeMap::new();
        for c in 0..ctx.b {
            let path = root.join(c);
            let child = Game::new(ctx, path.clone(), level - 1, view.local());
            children.insert(c, (path, child));
        }
        Game::Phases(Box::new(PhaseGame {
            root,
            level,
            view,
            phase: 0,
            in_phase: false,
            marked: Vec::new(),
            prev_marked: (0..ctx.b).collect(),
            next_fresh: ctx.b,
            children,
            cost_at_phase_start: Q::ZERO,
        }))
    }


    /// Feeds one serve step seen by the parent (raw transfers at the top).
    pub fn observe(&mut self, metric: &TreeMetric, transfers: &[Transfer], request: Option<&NodePath>) {
        let Game::Phases(g) = self else { return };
        let emitted = g.view.observe(metric, transfers, request);
        let depth = g.root.len();
        let mut touched: Vec<u32> = Vec::new();
        let mut note = |n: &NodePath| {
            if n.len() > depth && g.root.is_ancestor_of(n) {
                let c = n.indices()[depth];
                if !touched.contains(&c) {
                    touched.push(c);
                }
            }
        };
        for t in &emitted {
            note(&t.from);
            note(&t.to);
        }
        if let Some(r) = request {
            note(r);
        }
        for c in touched {
            if let Some((path, child)) = g.children.get_mut(&c) {
                let mine: Vec<Transfer> = emitted
                    .iter()
                    .filter(|t| path.is_ancestor_of(&t.from) || path.is_ancestor_of(&t.to))
                    .cloned()
                    .collect();
                let req = request.filter(|r| path.is_ancestor_of(r));
                child.observe(metric, &mine, req);
            }
        }
    }

    /// The next request inside this game's subtree.
    pub fn next_request(&mut self, ctx: &GameCtx, events: &mut Vec<AdversaryEvent>) -> NodePath {
        match self {
            Game::Point(r) => r.clone(),
            Game::Phases(g) => g.next_request(ctx, events),
        }
    }

    /// In-view charged cost so far (zero for a point).
    pub fn view_cost(&self) -> Q {
        match self {
            Game::Point(_) => Q::ZERO,
            Game::Phases(g) => g.view.ledger().down_total,
        }
    }
}

impl PhaseGame {
    fn mass(&self, c: u32) -> Q {
        self.view.local().subtree_mass(&self.children[&c].0)
    }

    fn least(&self, candidates: impl Iterator<Item = u32>) -> Option<(u32, Q)> {
        candidates
            .map(|c| (c, self.mass(c)))
            .min_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)))
    }

    fn start_phase(&mut self, ctx: &GameCtx, events: &mut Vec<AdversaryEvent>) {
        self.phase += 1;
        let mut fresh = self.next_fresh;
        while self.view.local().subtree_mass(&self.root.join(fresh)).is_positive() {
            fresh += 1;
        }
        self.next_fresh = fresh + 1;
        let path = self.root.join(fresh);
        let child = Game::new(ctx, path.clone(), self.level - 1, self.view.local());
        self.children.insert(fresh, (path, child));
        self.marked = vec![fresh];
        self.in_phase = true;
        self.cost_at_phase_start = self.view.ledger().down(self.level as usize);
        events.push(AdversaryEvent::PhaseStart {
            game: self.root.clone(),
            level: self.level,
            phase: self.phase,
            fresh,
            prev_marked: self.prev_marked.clone(),
        });
        events.push(AdversaryEvent::Mark {
            game: self.root.clone(),
            level: self.level,
            phase: self.phase,
            j: 0,
            child: fresh,
            mass: Q::ZERO,
            bound: None,
        });
    }

    fn next_request(&mut self, ctx: &GameCtx, events: &mut Vec<AdversaryEvent>) -> NodePath {
        let thr = ctx.threshold(self.level - 1);
        loop {
            if !self.in_phase {
                self.start_phase(ctx, events);
            }
            let below = self.least(self.marked.iter().copied().filter(|&c| self.mass(c) <= thr));
            if let Some((c, _)) = below {
                return self.children.get_mut(&c).expect("marked child has a game").1.next_request(ctx, events);
            }
            if self.marked.len() < ctx.b as usize {
                let j = self.marked.len() as u32;
                let (c, m) = self
                    .least(self.prev_marked.iter().copied().filter(|c| !self.marked.contains(c)))
                    .expect("an unmarked carry-over remains");
                let bound = marking_candidate_bound(
                    ctx.caps[self.level as usize],
                    ctx.caps[self.level as usize - 1],
                    ctx.epsilon,
                    ctx.b,
                    j,
                );
                self.marked.push(c);
                events.push(AdversaryEvent::Mark {
                    game: self.root.clone(),
                    level: self.level,
                    phase: self.phase,
                    j,
                    child: c,
                    mass: m,
                    bound: Some(bound),
                });
                continue;
            }
            let dropped = *self
                .prev_marked
                .iter()
                .find(|c| !self.marked.contains(c))
                .expect("exactly one carry-over is dropped");
            self.children.remove(&dropped);
            let cost = self.view.ledger().down(self.level as usize) - self.cost_at_phase_start;
            let len = ctx.metric.edge_length_at_level(self.level as usize);
            events.push(AdversaryEvent::PhaseComplete {
                game: self.root.clone(),
                level: self.level,
                phase: self.phase,
                marked: self.marked.clone(),
                dropped,
                level_cost: cost,
                cost_bound: phase_cost_bound(
                    ctx.caps[self.level as usize],
                    ctx.caps[self.level as usize - 1],
                    ctx.epsilon,
                    ctx.b,
                )
                .map(|q| q * len),
            });
            self.prev_marked = std::mem::take(&mut self.marked);
            self.in_phase = false;
        }
    }
}
