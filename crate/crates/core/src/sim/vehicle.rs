use serde::{Deserialize, Serialize};

use crate::geom::{OrientedRect, Vec2};

pub const V_MAX: f64 = 20.0;
pub const A_THROTTLE: f64 = 4.0;
pub const A_BRAKE: f64 = 8.0;
pub const DRAG: f64 = 0.1;
pub const WHEELBASE: f64 = 2.5;
pub const MAX_STEER_DEG: f64 = 35.0;

pub const HALF_LENGTH: f64 = 2.25;
pub const HALF_WIDTH: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    /// Learned autonomous car.
    #[serde(rename = "ac")]
    Ac,
    #[serde(rename = "adversary")]
    Adversary,
    #[serde(rename = "scripted")]
    Scripted,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Ac => "ac",
            Role::Adversary => "adversary",
            Role::Scripted => "scripted",
        }
    }
}

/// Low-level vehicle command. Reverse and handbrake do not exist.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    /// `[-1, 1]`, fraction of the maximum steering angle; positive turns left.
    pub steer: f64,
    /// `[0, 1]`
    pub throttle: f64,
    /// `[0, 1]`
    pub brake: f64,
}

impl ControlCommand {
    pub const BRAKE: ControlCommand = ControlCommand {
        steer: 0.0,
        throttle: 0.0,
        brake: 1.0,
    };

    pub fn clamped(self) -> Self {
        let c = |v: f64, lo: f64, hi: f64| if v.is_nan() { 0.0 } else { v.clamp(lo, hi) };
        Self {
            steer: c(self.steer, -1.0, 1.0),
            throttle: c(self.throttle, 0.0, 1.0),
            brake: c(self.brake, 0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec2,
    pub heading: f64,
    /// Forward speed in m/s, always within `[0, V_MAX]`.
    pub speed: f64,
    pub half_length: f64,
    pub half_width: f64,
    pub route: usize,
    pub role: Role,
}

impl VehicleState {
    pub fn new(position: Vec2, heading: f64, route: usize, role: Role) -> Self {
        Self {
            position,
            heading,
            speed: 0.0,
            half_length: HALF_LENGTH,
            half_width: HALF_WIDTH,
            route,
            role,
        }
    }

    pub fn footprint(&self) -> OrientedRect {
        OrientedRect {
            center: self.position,
            heading: self.heading,
            half_length: self.half_length,
            half_width: self.half_width,
        }
    }
}

/// Kinematic bicycle update over `dt` seconds.
pub fn step_vehicle(state: &VehicleState, control: ControlCommand, dt: f64) -> VehicleState {
    let c = control.clamped();
    let accel = A_THROTTLE * c.throttle - A_BRAKE * c.brake - DRAG * state.speed;
    let speed = (state.speed + accel * dt).clamp(0.0, V_MAX);
    let steer_angle = c.steer * MAX_STEER_DEG.to_radians();
    let heading = state.heading + (state.speed / WHEELBASE) * steer_angle.tan() * dt;
    let position = state.position + Vec2::from_angle(heading) * (speed * dt);
    VehicleState {
        position,
        heading,
        speed,
        ..*state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at_rest() -> VehicleState {
        VehicleState::new(Vec2::new(0.0, 0.0), 0.3, 0, Role::Ac)
    }

    #[test]
    fn throttle_from_standstill() {
        let cmd = ControlCommand {
            steer: 0.0,
            throttle: 1.0,
            brake: 0.0,
        };
        let next = step_vehicle(&at_rest(), cmd, 0.1);
        assert!((next.speed - 0.4).abs() < 1e-12);
        assert_eq!(next.heading, 0.3);
    }

    #[test]
    fn braking_from_ten() {
        let mut s = at_rest();
        s.speed = 10.0;
        let next = step_vehicle(&s, ControlCommand::BRAKE, 0.1);
        assert!((next.speed - 9.1).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn straight_steer_keeps_heading(speed in 0.0..V_MAX, throttle in 0.0..1.0f64, brake in 0.0..1.0f64) {
            let mut s = at_rest();
            s.speed = speed;
            let next = step_vehicle(&s, ControlCommand { steer: 0.0, throttle, brake }, 0.1);
            prop_assert_eq!(next.heading, s.heading);
        }

        #[test]
        fn speed_and_displacement_bounded(
            speed in 0.0..V_MAX,
            steer in -3.0..3.0f64,
            throttle in -1.0..2.0f64,
            brake in -1.0..2.0f64,
        ) {
            let mut s = at_rest();
            s.speed = speed;
            let next = step_vehicle(&s, ControlCommand { steer, throttle, brake }, 0.1);
            prop_assert!(next.speed >= 0.0 && next.speed <= V_MAX);
            prop_assert!(next.position.dist(s.position) <= V_MAX * 0.1 + 1e-12);
        }
    }
}
