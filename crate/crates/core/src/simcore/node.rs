use rand::Rng;

use crate::geometry::{random_position_in, Position, Zone};
use crate::identity::{GroupId, NeighborTable, NodeId, Pseudonym};

use super::config::Mobility;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    Still,
    Moving { target: Position, speed: f64 },
    Paused { until: f64 },
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub index: usize,
    pub id: NodeId,
    pub position: Position,
    pub pseudonym: Pseudonym,
    /// Pseudonym in use before the last rotation; frames addressed to it are
    /// still accepted.
    pub prev_pseudonym: Option<Pseudonym>,
    pub neighbors: NeighborTable,
    pub group: GroupId,
    pub motion: Motion,
}

impl NodeState {
    pub fn answers_to(&self, p: &Pseudonym) -> bool {
        self.pseudonym == *p || self.prev_pseudonym.as_ref() == Some(p)
    }

    pub fn rotate(&mut self, next: Pseudonym) {
        self.prev_pseudonym = Some(self.pseudonym);
        self.pseudonym = next;
    }
}

/// Starting motion for a node under `mobility`.
pub fn initial_motion<R: Rng + ?Sized>(mobility: &Mobility, area: &Zone, rng: &mut R) -> Motion {
    match *mobility {
        Mobility::Static => Motion::Still,
        Mobility::RandomWaypoint {
            speed_min, speed_max, ..
        } => Motion::Moving {
            target: random_position_in(area, rng),
            speed: draw_speed(speed_min, speed_max, rng),
        },
    }
}

fn draw_speed<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

/// Advances a random-waypoint node by `dt` seconds ending at `now`.
pub fn mobility_step<R: Rng + ?Sized>(
    node: &mut NodeState,
    area: &Zone,
    mobility: &Mobility,
    dt: f64,
    now: f64,
    rng: &mut R,
) {
    let Mobility::RandomWaypoint {
        speed_min,
        speed_max,
        pause,
    } = *mobility
    else {
        return;
    };
    match node.motion {
        Motion::Still => {}
        Motion::Paused { until } => {
            if now >= until {
                node.motion = Motion::Moving {
                    target: random_position_in(area, rng),
                    speed: draw_speed(speed_min, speed_max, rng),
                };
            }
        }
        Motion::Moving { target, speed } => {
            let remaining = node.position.distance(&target);
            let step = speed * dt;
            if step >= remaining {
                node.position = target;
                node.motion = Motion::Paused { until: now + pause };
            } else {
                let f = step / remaining;
                node.position = Position::new(
                    node.position.x + (target.x - node.position.x) * f,
                    node.position.y + (target.y - node.position.y) * f,
                );
            }
        }
    }
}
