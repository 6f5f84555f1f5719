use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::map::MapSpec;
use super::vehicle::VehicleState;
use crate::geom::Rigid;

/// An agent reaching this distance from its goal has arrived.
pub const GOAL_RADIUS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: AgentId,
    pub state: VehicleState,
    /// Finished vehicles (arrived or crashed) leave the world and are skipped by
    /// collision checks and rendering.
    pub active: bool,
}

/// Per-agent event flags for the current step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentEvents {
    /// Vehicle-vehicle collision.
    pub cv: bool,
    /// Static-object collision, including leaving the drivable area.
    pub co: bool,
    /// Offroad: outside own lane corridor but still on the drivable area.
    pub io: bool,
    /// Footprint center inside own lane corridor.
    pub in_lane: bool,
    /// Remaining Euclidean distance to the route goal.
    pub distance_to_goal: f64,
    pub collided_with: Option<AgentId>,
}

impl AgentEvents {
    pub fn reached_goal(&self) -> bool {
        self.distance_to_goal <= GOAL_RADIUS
    }

    pub fn crashed(&self) -> bool {
        self.cv || self.co
    }
}

/// Full simulator truth.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub map: Arc<MapSpec>,
    pub vehicles: Vec<Vehicle>,
    /// Parallel to `vehicles`.
    pub events: Vec<AgentEvents>,
    pub t: u64,
    pub rng: ChaCha8Rng,
}

impl WorldState {
    pub fn new(map: Arc<MapSpec>, seed: u64) -> Self {
        Self {
            map,
            vehicles: Vec::new(),
            events: Vec::new(),
            t: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn add_vehicle(&mut self, id: AgentId, state: VehicleState) {
        let goal = self.map.route(state.route).goal;
        self.events.push(AgentEvents {
            distance_to_goal: state.position.dist(goal),
            in_lane: self.map.route(state.route).corridor.contains(state.position),
            ..AgentEvents::default()
        });
        self.vehicles.push(Vehicle {
            id,
            state,
            active: true,
        });
    }

    pub fn index_of(&self, id: AgentId) -> Option<usize> {
        self.vehicles.iter().position(|v| v.id == id)
    }

    pub fn vehicle(&self, id: AgentId) -> Option<&Vehicle> {
        self.vehicles.iter().find(|v| v.id == id)
    }

    pub fn events_of(&self, id: AgentId) -> Option<&AgentEvents> {
        self.index_of(id).map(|i| &self.events[i])
    }

    /// Copy of the world with map and vehicles moved by a rigid transform.
    pub fn transformed(&self, t: &Rigid) -> WorldState {
        let mut out = self.clone();
        out.map = Arc::new(self.map.transformed(t));
        for v in &mut out.vehicles {
            v.state.position = t.apply(v.state.position);
            v.state.heading += t.angle;
        }
        out
    }
}

/// Recomputes collision, offroad and goal-distance flags for all active vehicles.
pub fn detect_events(world: &mut WorldState) {
    let map = Arc::clone(&world.map);
    let n = world.vehicles.len();
    let footprints: Vec<_> = world.vehicles.iter().map(|v| v.state.footprint()).collect();
    for i in 0..n {
        if world.vehicles[i].active {
            world.events[i].cv = false;
            world.events[i].collided_with = None;
        }
    }
    for i in 0..n {
        if !world.vehicles[i].active {
            continue;
        }
        for j in (i + 1)..n {
            if !world.vehicles[j].active {
                continue;
            }
            if footprints[i].overlaps(&footprints[j]) {
                let (a, b) = (world.vehicles[i].id, world.vehicles[j].id);
                world.events[i].cv = true;
                world.events[j].cv = true;
                world.events[i].collided_with.get_or_insert(b);
                world.events[j].collided_with.get_or_insert(a);
            }
        }
    }
    for i in 0..n {
        let v = &world.vehicles[i];
        if !v.active {
            continue;
        }
        let center = v.state.position;
        let route = map.route(v.state.route);
        let on_road = map.on_drivable(center);
        let hits_obstacle = map.obstacles.iter().any(|o| footprints[i].overlaps_polygon(o));
        let in_lane = route.corridor.contains(center);
        let ev = &mut world.events[i];
        ev.co = hits_obstacle || !on_road;
        ev.in_lane = in_lane;
        ev.io = on_road && !in_lane;
        ev.distance_to_goal = center.dist(route.goal);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;
    use crate::sim::map::{build_map, MapId};
    use crate::sim::vehicle::Role;
    use rand::Rng;

    fn world_with(poses: &[(f64, f64, f64)]) -> WorldState {
        let map = Arc::new(build_map(MapId::Env1));
        let mut w = WorldState::new(map, 0);
        for (k, &(x, y, h)) in poses.iter().enumerate() {
            w.add_vehicle(AgentId(k as u32), VehicleState::new(Vec2::new(x, y), h, 0, Role::Ac));
        }
        detect_events(&mut w);
        w
    }

    #[test]
    fn distant_vehicles_do_not_collide() {
        let w = world_with(&[(1.75, -60.0, 1.57), (1.75, -10.0, 1.57)]);
        assert!(!w.events[0].cv && !w.events[1].cv);
    }

    #[test]
    fn identical_poses_collide_both_ways() {
        let w = world_with(&[(1.75, -30.0, 1.57), (1.75, -30.0, 1.57)]);
        assert!(w.events[0].cv && w.events[1].cv);
        assert_eq!(w.events[0].collided_with, Some(AgentId(1)));
        assert_eq!(w.events[1].collided_with, Some(AgentId(0)));
    }

    #[test]
    fn leaving_the_road_is_object_collision() {
        let w = world_with(&[(20.0, 20.0, 0.0)]);
        assert!(w.events[0].co);
        assert!(!w.events[0].io);
    }

    #[test]
    fn wrong_lane_is_offroad() {
        // Route 0 is N->E; put the car in the opposite lane of the north arm.
        let w = world_with(&[(1.75, 50.0, 1.57)]);
        assert!(w.events[0].io);
        assert!(!w.events[0].in_lane);
        assert!(!w.events[0].co);
    }

    #[test]
    fn collision_flags_are_symmetric_on_random_worlds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let poses: Vec<_> = (0..6)
                .map(|_| {
                    (
                        rng.random_range(-8.0..8.0),
                        rng.random_range(-8.0..8.0),
                        rng.random_range(-3.2..3.2),
                    )
                })
                .collect();
            let w = world_with(&poses);
            for i in 0..6 {
                if let Some(other) = w.events[i].collided_with {
                    assert!(w.events[other.0 as usize].cv);
                }
                for j in 0..6 {
                    if i != j {
                        let a = w.vehicles[i].state.footprint().overlaps(&w.vehicles[j].state.footprint());
                        let b = w.vehicles[j].state.footprint().overlaps(&w.vehicles[i].state.footprint());
                        assert_eq!(a, b);
                    }
                }
            }
        }
    }

    #[test]
    fn clean_center_is_in_lane() {
        // IO = false and CO = false implies the center lies in the corridor.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let p = (rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0), rng.random_range(-3.2..3.2));
            let w = world_with(&[p]);
            let ev = w.events[0];
            if !ev.io && !ev.co {
                assert!(w.map.route(0).corridor.contains(Vec2::new(p.0, p.1)));
            }
        }
    }
}
