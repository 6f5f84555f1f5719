//! Deterministic 2D kinematic driving world.

pub mod map;
pub mod traffic;
pub mod vehicle;
pub mod world;

pub use map::{build_map, build_map_named, MapId, MapSpec, Pose, Route, SpawnSlot};
pub use traffic::{lane_follow_control, scripted_traffic_policy, SCRIPTED_TARGET_SPEED};
pub use vehicle::{step_vehicle, ControlCommand, Role, VehicleState, V_MAX};
pub use world::{detect_events, AgentEvents, AgentId, Vehicle, WorldState, GOAL_RADIUS};

/// Simulation timestep in seconds.
pub const DT: f64 = 0.1;
