//! Hard-coded road maps.
//!
//! Coordinates are meters in the world frame with the junction at the
//! origin. Traffic keeps to the right. Every road arm is 100 m long past the
//! junction box and carries two 3.5 m lanes. Map geometry is versioned by
//! [`MAP_VERSION`]; any change to the constants below must bump it.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{ConvexPolygon, Corridor, Rigid, Vec2};

pub const MAP_VERSION: u32 = 1;
pub const LANE_WIDTH: f64 = 3.5;
pub const ARM_LENGTH: f64 = 100.0;
pub const TURN_RADIUS: f64 = 5.0;

const HALF_ROAD: f64 = LANE_WIDTH;
const ARM_END: f64 = HALF_ROAD + ARM_LENGTH;
/// Leg length of the corner fillets that widen the junction for turns.
const FILLET: f64 = 4.5;
const SIDEWALK: f64 = 3.0;
/// Route polylines stop short of the arm end so their capsule caps stay on the road.
const ROUTE_END: f64 = ARM_END - LANE_WIDTH / 2.0 - 0.25;
const GOAL_OFFSET: f64 = ARM_LENGTH;
const ARC_SEGMENTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MapId {
    /// Four-way intersection.
    #[serde(rename = "env_1")]
    Env1,
    /// T-intersection.
    #[serde(rename = "env_2")]
    Env2,
    /// Single straight two-lane road, used by the desk-scale learning presets.
    #[serde(rename = "straight")]
    Straight,
}

impl MapId {
    pub fn as_str(&self) -> &'static str {
        match self {
            MapId::Env1 => "env_1",
            MapId::Env2 => "env_2",
            MapId::Straight => "straight",
        }
    }

    /// Testing episode length used for this map.
    pub fn default_test_steps(&self) -> usize {
        match self {
            MapId::Env1 => 2000,
            MapId::Env2 => 5000,
            MapId::Straight => 300,
        }
    }
}

impl fmt::Display for MapId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MapId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "env_1" => Ok(MapId::Env1),
            "env_2" => Ok(MapId::Env2),
            "straight" => Ok(MapId::Straight),
            other => Err(Error::config(format!("unknown map id '{other}'"))),
        }
    }
}

/// Compass direction of a road arm, seen from the junction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arm {
    North,
    East,
    South,
    West,
}

impl Arm {
    fn outward(self) -> Vec2 {
        match self {
            Arm::North => Vec2::new(0.0, 1.0),
            Arm::East => Vec2::new(1.0, 0.0),
            Arm::South => Vec2::new(0.0, -1.0),
            Arm::West => Vec2::new(-1.0, 0.0),
        }
    }

    fn letter(self) -> char {
        match self {
            Arm::North => 'N',
            Arm::East => 'E',
            Arm::South => 'S',
            Arm::West => 'W',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub name: String,
    pub corridor: Corridor,
    pub goal: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpawnSlot {
    pub pose: Pose,
    /// Index into [`MapSpec::routes`].
    pub route: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub id: MapId,
    pub version: u32,
    pub drivable: Vec<ConvexPolygon>,
    pub obstacles: Vec<ConvexPolygon>,
    pub routes: Vec<Route>,
    pub spawns: Vec<SpawnSlot>,
    /// Road arms incident to the junction.
    pub arms: Vec<Arm>,
}

impl MapSpec {
    pub fn on_drivable(&self, p: Vec2) -> bool {
        self.drivable.iter().any(|poly| poly.contains(p))
    }

    pub fn route(&self, index: usize) -> &Route {
        &self.routes[index]
    }

    pub fn route_index(&self, name: &str) -> Option<usize> {
        self.routes.iter().position(|r| r.name == name)
    }

    /// Number of road arms meeting at the junction (4 for a crossroads, 3 for a T).
    pub fn junction_degree(&self) -> usize {
        self.arms.len()
    }

    pub fn transformed(&self, t: &Rigid) -> MapSpec {
        MapSpec {
            id: self.id,
            version: self.version,
            drivable: self.drivable.iter().map(|p| p.transformed(t)).collect(),
            obstacles: self.obstacles.iter().map(|p| p.transformed(t)).collect(),
            routes: self
                .routes
                .iter()
                .map(|r| Route {
                    name: r.name.clone(),
                    corridor: r.corridor.transformed(t),
                    goal: t.apply(r.goal),
                })
                .collect(),
            spawns: self
                .spawns
                .iter()
                .map(|s| SpawnSlot {
                    pose: Pose {
                        position: t.apply(s.pose.position),
                        heading: s.pose.heading + t.angle,
                    },
                    route: s.route,
                })
                .collect(),
            arms: self.arms.clone(),
        }
    }

    /// Plain-text dump: one record per line, `kind,id,x0,y0,x1,y1,...`.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let coords = |pts: &[Vec2]| {
            pts.iter()
                .map(|p| format!("{},{}", p.x, p.y))
                .collect::<Vec<_>>()
                .join(",")
        };
        for (i, p) in self.drivable.iter().enumerate() {
            writeln!(out, "drivable,{i},{}", coords(&p.vertices)).unwrap();
        }
        for (i, p) in self.obstacles.iter().enumerate() {
            writeln!(out, "obstacle,{i},{}", coords(&p.vertices)).unwrap();
        }
        for r in &self.routes {
            writeln!(out, "corridor,{},{},{}", r.name, r.corridor.half_width, coords(&r.corridor.points)).unwrap();
        }
        for (i, s) in self.spawns.iter().enumerate() {
            writeln!(out, "spawn,{i},{},{},{}", s.pose.position.x, s.pose.position.y, s.pose.heading).unwrap();
        }
        for r in &self.routes {
            writeln!(out, "goal,{},{},{}", r.name, r.goal.x, r.goal.y).unwrap();
        }
        out
    }
}

/// Returns the fixed geometry for `id`.
pub fn build_map(id: MapId) -> MapSpec {
    match id {
        MapId::Env1 => junction_map(
            id,
            &[Arm::North, Arm::East, Arm::South, Arm::West],
            &[
                (Arm::South, 20.0, Arm::North),
                (Arm::West, 20.0, Arm::East),
                (Arm::East, 35.0, Arm::West),
                (Arm::South, 40.0, Arm::North),
                (Arm::North, 20.0, Arm::South),
                (Arm::West, 40.0, Arm::East),
                (Arm::East, 55.0, Arm::West),
                (Arm::North, 40.0, Arm::South),
            ],
        ),
        MapId::Env2 => junction_map(
            id,
            &[Arm::East, Arm::South, Arm::West],
            &[
                (Arm::South, 20.0, Arm::West),
                (Arm::West, 20.0, Arm::East),
                (Arm::East, 35.0, Arm::West),
                (Arm::South, 35.0, Arm::East),
                (Arm::West, 35.0, Arm::South),
                (Arm::East, 50.0, Arm::West),
                (Arm::South, 50.0, Arm::West),
                (Arm::West, 50.0, Arm::East),
            ],
        ),
        MapId::Straight => straight_map(),
    }
}

/// Parses `map_id` and builds it.
pub fn build_map_named(map_id: &str) -> Result<MapSpec> {
    Ok(build_map(map_id.parse()?))
}

fn right_of(dir: Vec2) -> Vec2 {
    Vec2::new(dir.y, -dir.x)
}

/// Center line point of the lane entering the junction along `arm`, `s` meters out.
fn inbound_point(arm: Arm, s: f64) -> Vec2 {
    let u = arm.outward();
    u * s + right_of(-u) * (LANE_WIDTH / 2.0)
}

fn outbound_point(arm: Arm, s: f64) -> Vec2 {
    let w = arm.outward();
    w * s + right_of(w) * (LANE_WIDTH / 2.0)
}

fn route_points(from: Arm, to: Arm) -> Vec<Vec2> {
    let d_in = -from.outward();
    let d_out = to.outward();
    let start = inbound_point(from, ROUTE_END);
    let end = outbound_point(to, ROUTE_END);
    let turn = d_in.cross(d_out);
    if turn.abs() < 1e-12 {
        return vec![start, end];
    }
    // Lines meet at the lane corner; replace it with a tangent arc.
    let a = inbound_point(from, 0.0);
    let b = outbound_point(to, 0.0);
    // Solve a + d_in * p = b - d_out * q for the corner.
    let p = (b - a).cross(d_out) / d_in.cross(d_out);
    let corner = a + d_in * p;
    let arc_start = corner - d_in * TURN_RADIUS;
    let center = arc_start + d_in.perp() * (TURN_RADIUS * turn.signum());
    let a0 = (arc_start - center).y.atan2((arc_start - center).x);
    let sweep = FRAC_PI_2 * turn.signum();
    let mut pts = vec![start];
    for k in 0..=ARC_SEGMENTS {
        let ang = a0 + sweep * k as f64 / ARC_SEGMENTS as f64;
        pts.push(center + Vec2::from_angle(ang) * TURN_RADIUS);
    }
    pts.push(end);
    pts
}

fn junction_map(id: MapId, arms: &[Arm], slots: &[(Arm, f64, Arm)]) -> MapSpec {
    let has = |a: Arm| arms.contains(&a);
    let mut drivable = Vec::new();
    // Horizontal and vertical roads through the junction box.
    let x0 = if has(Arm::West) { -ARM_END } else { -HALF_ROAD };
    let x1 = if has(Arm::East) { ARM_END } else { HALF_ROAD };
    drivable.push(ConvexPolygon::rect(x0, -HALF_ROAD, x1, HALF_ROAD));
    if has(Arm::North) || has(Arm::South) {
        let y0 = if has(Arm::South) { -ARM_END } else { -HALF_ROAD };
        let y1 = if has(Arm::North) { ARM_END } else { HALF_ROAD };
        drivable.push(ConvexPolygon::rect(-HALF_ROAD, y0, HALF_ROAD, y1));
    }
    // Corner fillets between adjacent arms.
    let corners = [
        (Arm::North, Arm::East, 1.0, 1.0),
        (Arm::East, Arm::South, 1.0, -1.0),
        (Arm::South, Arm::West, -1.0, -1.0),
        (Arm::West, Arm::North, -1.0, 1.0),
    ];
    for &(a, b, sx, sy) in &corners {
        if has(a) && has(b) {
            let c = Vec2::new(sx * HALF_ROAD, sy * HALF_ROAD);
            drivable.push(ConvexPolygon::new(vec![
                c,
                c + Vec2::new(sx * FILLET, 0.0),
                c + Vec2::new(0.0, sy * FILLET),
            ]));
        }
    }

    let mut obstacles = Vec::new();
    let near = HALF_ROAD + FILLET;
    for &arm in arms {
        let u = arm.outward();
        let side = u.perp();
        for s in [-1.0, 1.0] {
            let inner = side * (s * HALF_ROAD);
            let outer = side * (s * (HALF_ROAD + SIDEWALK));
            // Sidewalk starts after the fillet if the neighbouring arm exists, else at the box edge.
            let neighbour_exists = arms.iter().any(|&o| (o.outward().dot(side) - s).abs() < 1e-9);
            let start = if neighbour_exists { near } else { HALF_ROAD };
            obstacles.push(ConvexPolygon::new(vec![
                u * start + inner,
                u * ARM_END + inner,
                u * ARM_END + outer,
                u * start + outer,
            ]));
        }
    }
    // Closed sides of the junction box (the top of a T).
    for side in [Arm::North, Arm::East, Arm::South, Arm::West] {
        if !has(side) {
            let u = side.outward();
            let t = u.perp();
            let base = u * HALF_ROAD;
            obstacles.push(ConvexPolygon::new(vec![
                base + t * HALF_ROAD,
                base - t * HALF_ROAD,
                base - t * HALF_ROAD + u * SIDEWALK,
                base + t * HALF_ROAD + u * SIDEWALK,
            ]));
        }
    }

    let mut routes = Vec::new();
    for &from in arms {
        for &to in arms {
            if from == to {
                continue;
            }
            routes.push(Route {
                name: format!("{}{}", from.letter(), to.letter()),
                corridor: Corridor::new(route_points(from, to), LANE_WIDTH / 2.0),
                goal: outbound_point(to, GOAL_OFFSET),
            });
        }
    }

    let spawns = slots
        .iter()
        .map(|&(from, dist, to)| {
            let name = format!("{}{}", from.letter(), to.letter());
            SpawnSlot {
                pose: Pose {
                    position: inbound_point(from, dist),
                    heading: {
                        let d = -from.outward();
                        d.y.atan2(d.x)
                    },
                },
                route: routes.iter().position(|r| r.name == name).expect("slot route exists"),
            }
        })
        .collect();

    MapSpec {
        id,
        version: MAP_VERSION,
        drivable,
        obstacles,
        routes,
        spawns,
        arms: arms.to_vec(),
    }
}

fn straight_map() -> MapSpec {
    let (x0, x1) = (-10.0, 210.0);
    let half = LANE_WIDTH / 2.0;
    let drivable = vec![ConvexPolygon::rect(x0, -HALF_ROAD, x1, HALF_ROAD)];
    let obstacles = vec![
        ConvexPolygon::rect(x0, HALF_ROAD, x1, HALF_ROAD + SIDEWALK),
        ConvexPolygon::rect(x0, -HALF_ROAD - SIDEWALK, x1, -HALF_ROAD),
    ];
    let routes = vec![
        Route {
            name: "EB".into(),
            corridor: Corridor::new(vec![Vec2::new(x0 + 2.0, -half), Vec2::new(x1 - 2.0, -half)], half),
            goal: Vec2::new(100.0, -half),
        },
        Route {
            name: "WB".into(),
            corridor: Corridor::new(vec![Vec2::new(x1 - 2.0, half), Vec2::new(x0 + 2.0, half)], half),
            goal: Vec2::new(0.0, half),
        },
    ];
    // Eastbound slots queue from x = 0, westbound from x = 100.
    let eastbound_x = [0.0, 15.0, 30.0, 45.0];
    let westbound_x = [100.0, 115.0, 130.0, 145.0];
    let mut spawns = Vec::new();
    for k in 0..4 {
        spawns.push(SpawnSlot {
            pose: Pose {
                position: Vec2::new(eastbound_x[k], -half),
                heading: 0.0,
            },
            route: 0,
        });
        spawns.push(SpawnSlot {
            pose: Pose {
                position: Vec2::new(westbound_x[k], half),
                heading: PI,
            },
            route: 1,
        });
    }
    MapSpec {
        id: MapId::Straight,
        version: MAP_VERSION,
        drivable,
        obstacles,
        routes,
        spawns,
        arms: vec![Arm::East, Arm::West],
    }
}
