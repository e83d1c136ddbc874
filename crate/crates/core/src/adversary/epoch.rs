use crate::mass::{MassConfig, Transfer};
use crate::rational::Q;
use crate::tree::{NodePath, TreeMetric};

use super::game::{Game, GameCtx};
use super::AdversaryEvent;

/// Runs phase games on successive zero-mass root subtrees of type `T_level`.
/// An epoch ends as soon as the raw mass in its subtree exceeds the threshold.
pub(crate) struct EpochController {
    level: u32,
    threshold: Q,
    epoch: u64,
    next_index: u32,
    active: Option<(u32, NodePath, Game)>,
}

impl EpochController {
    pub fn new(level: u32, threshold: Q) -> EpochController {
        EpochController {
            level,
            threshold,
            epoch: 0,
            next_index: 0,
            active: None,
        }
    }

    pub fn observe(&mut self, metric: &TreeMetric, transfers: &[Transfer], request: &NodePath) {
        if let Some((_, path, game)) = &mut self.active {
            let req = Some(request).filter(|r| path.is_ancestor_of(r));
            game.observe(metric, transfers, req);
        }
    }

    pub fn next_request(&mut self, ctx: &GameCtx, config: &MassConfig, events: &mut Vec<AdversaryEvent>) -> NodePath {
        if let Some((idx, path, _)) = &self.active {
            let mass = config.subtree_mass(path);
            if mass > self.threshold {
                events.push(AdversaryEvent::EpochComplete {
                    epoch: self.epoch,
                    subtree: *idx,
                    mass,
                });
                self.active = None;
            }
        }
        if self.active.is_none() {
            let root = NodePath::root();
            let mut idx = self.next_index;
            while config.subtree_mass(&root.join(idx)).is_positive() {
                idx += 1;
            }
            self.next_index = idx + 1;
            self.epoch += 1;
            let path = root.join(idx);
            let game = Game::new(ctx, path.clone(), self.level, config);
            events.push(AdversaryEvent::EpochStart {
                epoch: self.epoch,
                subtree: idx,
                threshold: self.threshold,
            });
            self.active = Some((idx, path, game));
        }
        let (_, _, game) = self.active.as_mut().expect("epoch is active");
        game.next_request(ctx, events)
    }

    pub fn view_cost(&self) -> Q {
        self.active.as_ref().map_or(Q::ZERO, |(_, _, g)| g.view_cost())
    }
}
