//! Rule-based lane followers standing in for human drivers.

use super::vehicle::{ControlCommand, Role, MAX_STEER_DEG, WHEELBASE};
use super::world::{AgentId, WorldState};
use crate::geom::{wrap_angle, Vec2};

pub const SCRIPTED_TARGET_SPEED: f64 = 6.0;
/// Full brake when another footprint is this close ahead, bumper to point.
pub const FOLLOW_GAP: f64 = 6.0;
const SPEED_GAIN: f64 = 0.5;
const LOOKAHEAD_BASE: f64 = 4.0;
const LOOKAHEAD_PER_SPEED: f64 = 0.5;
const AHEAD_LATERAL_LIMIT: f64 = 3.0;

/// Pure-pursuit lane following along the vehicle's own route.
pub fn lane_follow_control(world: &WorldState, index: usize, target_speed: f64) -> ControlCommand {
    let v = &world.vehicles[index];
    let s = &v.state;
    let corridor = &world.map.route(s.route).corridor;

    let progress = corridor.arc_length_at(s.position);
    let target = corridor.point_at(progress + LOOKAHEAD_BASE + LOOKAHEAD_PER_SPEED * s.speed);
    let to_target = target - s.position;
    let dist = to_target.norm().max(1e-6);
    let alpha = wrap_angle(to_target.y.atan2(to_target.x) - s.heading);
    let delta = (2.0 * WHEELBASE * alpha.sin() / dist).atan();
    let steer = (delta / MAX_STEER_DEG.to_radians()).clamp(-1.0, 1.0);

    if obstacle_ahead(world, index) {
        return ControlCommand {
            steer,
            throttle: 0.0,
            brake: 1.0,
        };
    }
    ControlCommand {
        steer,
        throttle: (SPEED_GAIN * (target_speed - s.speed)).clamp(0.0, 1.0),
        brake: 0.0,
    }
}

fn obstacle_ahead(world: &WorldState, index: usize) -> bool {
    let me = &world.vehicles[index].state;
    let corridor = &world.map.route(me.route).corridor;
    let fwd = Vec2::from_angle(me.heading);
    let left = fwd.perp();
    world
        .vehicles
        .iter()
        .enumerate()
        .filter(|(j, o)| *j != index && o.active)
        .any(|(_, o)| {
            let fp = o.state.footprint();
            std::iter::once(fp.center).chain(fp.corners()).any(|p| {
                let rel = p - me.position;
                let lon = rel.dot(fwd) - me.half_length;
                lon >= 0.0
                    && lon <= FOLLOW_GAP
                    && rel.dot(left).abs() <= AHEAD_LATERAL_LIMIT
                    && corridor.contains(p)
            })
        })
}

/// Control for a scripted traffic vehicle. Deterministic in `(world, agent)`.
pub fn scripted_traffic_policy(world: &WorldState, agent: AgentId) -> ControlCommand {
    let index = world.index_of(agent).expect("scripted agent exists");
    debug_assert_eq!(world.vehicles[index].state.role, Role::Scripted);
    lane_follow_control(world, index, SCRIPTED_TARGET_SPEED)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::map::{build_map, MapId};
    use crate::sim::vehicle::{step_vehicle, VehicleState};
    use crate::sim::world::detect_events;
    use std::sync::Arc;

    fn world(map: MapId) -> WorldState {
        WorldState::new(Arc::new(build_map(map)), 0)
    }

    fn spawn(w: &mut WorldState, id: u32, slot: usize) {
        let s = w.map.spawns[slot].clone();
        w.add_vehicle(AgentId(id), VehicleState::new(s.pose.position, s.pose.heading, s.route, Role::Scripted));
    }

    #[test]
    fn straight_road_drives_forward() {
        let mut w = world(MapId::Straight);
        spawn(&mut w, 0, 0);
        let c = scripted_traffic_policy(&w, AgentId(0));
        assert!(c.steer.abs() < 1e-9);
        assert!(c.throttle > 0.0);
        assert_eq!(c.brake, 0.0);
    }

    #[test]
    fn stopped_vehicle_ahead_triggers_full_brake() {
        let mut w = world(MapId::Straight);
        spawn(&mut w, 0, 0);
        let mut lead = w.vehicles[0].state;
        lead.position.x += 2.0 * lead.half_length + 4.0;
        w.add_vehicle(AgentId(1), lead);
        let c = scripted_traffic_policy(&w, AgentId(0));
        assert_eq!(c.brake, 1.0);
        assert_eq!(c.throttle, 0.0);
    }

    fn run_alone(map: MapId, slot: usize, steps: usize) -> (bool, usize) {
        let mut w = world(map);
        spawn(&mut w, 0, slot);
        detect_events(&mut w);
        let mut clean = true;
        for k in 0..steps {
            if !w.vehicles[0].active {
                return (clean, k);
            }
            let c = scripted_traffic_policy(&w, AgentId(0));
            w.vehicles[0].state = step_vehicle(&w.vehicles[0].state, c, 0.1);
            detect_events(&mut w);
            clean &= !w.events[0].cv && !w.events[0].co;
            if w.events[0].reached_goal() {
                w.vehicles[0].active = false;
            }
        }
        (clean, steps)
    }

    #[test]
    fn lone_scripted_car_never_collides() {
        for map in [MapId::Env1, MapId::Env2, MapId::Straight] {
            for slot in 0..8 {
                let (clean, _) = run_alone(map, slot, 2000);
                assert!(clean, "{map} slot {slot}");
            }
        }
    }

    #[test]
    fn every_route_is_drivable_by_the_follower() {
        for map_id in [MapId::Env1, MapId::Env2] {
            let map = build_map(map_id);
            for (r, route) in map.routes.iter().enumerate() {
                let mut w = world(map_id);
                let start = route.corridor.point_at(60.0);
                let ahead = route.corridor.point_at(61.0) - start;
                w.add_vehicle(AgentId(0), VehicleState::new(start, ahead.y.atan2(ahead.x), r, Role::Scripted));
                detect_events(&mut w);
                let mut arrived = false;
                for _ in 0..2000 {
                    let c = scripted_traffic_policy(&w, AgentId(0));
                    w.vehicles[0].state = step_vehicle(&w.vehicles[0].state, c, 0.1);
                    detect_events(&mut w);
                    assert!(!w.events[0].co, "{map_id} route {} hits an obstacle", route.name);
                    if w.events[0].reached_goal() {
                        arrived = true;
                        break;
                    }
                }
                assert!(arrived, "{map_id} route {} never arrives", route.name);
            }
        }
    }
}
