//! Ego-centric occupancy-grid observations.
//!
//! The agent sits at the center of the grid facing up (row 0 is farthest
//! ahead, column 0 is farthest left). Only the forward half-plane is drawn;
//! rows 42..84 stay zero.

use crate::geom::{Aabb, Vec2};
use crate::sim::{AgentId, WorldState};

pub const OBS_SIZE: usize = 84;
pub const OBS_CHANNELS: usize = 3;
pub const OBS_LEN: usize = OBS_SIZE * OBS_SIZE * OBS_CHANNELS;
pub const CELL_METERS: f64 = 0.5;
/// Row/column index of the grid line the agent sits on.
pub const ANCHOR: usize = OBS_SIZE / 2;

pub const CH_DRIVABLE: usize = 0;
pub const CH_VEHICLES: usize = 1;
pub const CH_ROUTE: usize = 2;

const CORRIDOR_VALUE: f32 = 0.5;
const GOAL_RAY_VALUE: f32 = 1.0;
const GOAL_RAY_HALF_WIDTH: f64 = 0.35;

/// An 84x84x3 grid in row-major, channel-last order with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    data: Vec<f32>,
}

impl Default for Observation {
    fn default() -> Self {
        Self::zeros()
    }
}

impl Observation {
    pub fn zeros() -> Self {
        Self {
            data: vec![0.0; OBS_LEN],
        }
    }

    pub fn from_vec(data: Vec<f32>) -> Option<Self> {
        (data.len() == OBS_LEN).then_some(Self { data })
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize, ch: usize) -> f32 {
        self.data[(row * OBS_SIZE + col) * OBS_CHANNELS + ch]
    }

    fn set(&mut self, row: usize, col: usize, ch: usize, v: f32) {
        self.data[(row * OBS_SIZE + col) * OBS_CHANNELS + ch] = v;
    }

    pub fn channel_sum(&self, ch: usize) -> f64 {
        self.data.iter().skip(ch).step_by(OBS_CHANNELS).map(|&v| v as f64).sum()
    }
}

/// Ego-frame offset of a cell center: (meters forward, meters left).
pub fn cell_offset(row: usize, col: usize) -> (f64, f64) {
    let forward = (ANCHOR as f64 - row as f64) * CELL_METERS - CELL_METERS / 2.0;
    let left = (ANCHOR as f64 - col as f64) * CELL_METERS - CELL_METERS / 2.0;
    (forward, left)
}

/// Rasterizes the three observation channels for `agent`.
pub fn render_observation(world: &WorldState, agent: AgentId) -> Observation {
    let mut obs = Observation::zeros();
    let Some(index) = world.index_of(agent) else {
        return obs;
    };
    let me = &world.vehicles[index].state;
    let fwd = Vec2::from_angle(me.heading);
    let left = fwd.perp();
    let origin = me.position;
    let reach = ANCHOR as f64 * CELL_METERS * std::f64::consts::SQRT_2 + 1.0;
    let view = Aabb {
        min: origin - Vec2::new(reach, reach),
        max: origin + Vec2::new(reach, reach),
    };

    let map = &world.map;
    let drivable: Vec<_> = map.drivable.iter().filter(|p| p.bounds().intersects(&view)).collect();
    let corridor = &map.route(me.route).corridor;
    let corridor_visible = corridor.bounds().intersects(&view);
    let others: Vec<_> = world
        .vehicles
        .iter()
        .enumerate()
        .filter(|(j, v)| *j != index && v.active)
        .map(|(_, v)| v.state.footprint())
        .filter(|fp| fp.bounds().intersects(&view))
        .map(|fp| (fp, fp.bounds()))
        .collect();

    let goal = map.route(me.route).goal - origin;
    let goal_ego = Vec2::new(goal.dot(fwd), goal.dot(left));
    let goal_dist = goal_ego.norm();
    let goal_dir = if goal_dist > 0.0 { goal_ego * (1.0 / goal_dist) } else { Vec2::new(1.0, 0.0) };

    for row in 0..ANCHOR {
        for col in 0..OBS_SIZE {
            let (f, l) = cell_offset(row, col);
            let p = origin + fwd * f + left * l;
            if drivable.iter().any(|poly| poly.contains(p)) {
                obs.set(row, col, CH_DRIVABLE, 1.0);
            }
            if others.iter().any(|(fp, b)| b.contains(p) && fp.contains(p)) {
                obs.set(row, col, CH_VEHICLES, 1.0);
            }
            let q = Vec2::new(f, l);
            let along = q.dot(goal_dir);
            if along >= 0.0 && along <= goal_dist && q.cross(goal_dir).abs() <= GOAL_RAY_HALF_WIDTH {
                obs.set(row, col, CH_ROUTE, GOAL_RAY_VALUE);
            } else if corridor_visible && corridor.contains(p) {
                obs.set(row, col, CH_ROUTE, CORRIDOR_VALUE);
            }
        }
    }
    obs
}
