//! Deterministic 2D kinematic arena.
//!
//! Robots are discs driven by their body-plan's actuators. Wheel contact
//! velocities (signed speed along the wheel's ground direction) are fitted
//! to a rigid-body twist by least squares; joints add a weaker paddling
//! twist the same way. The amphitheatre's steps are concentric zones that
//! scale actuator effectiveness while the robot stands inside them. Wall
//! collisions resolve by pushing the disc out along the contact normal,
//! which preserves the tangential component (sliding).
//!
//! Everything here is a pure function of its inputs; rollouts are
//! bit-reproducible.

use serde::{Deserialize, Serialize};

use crate::controller::ElmanNetwork;
use crate::geometry::{LineSegment, Vec2};
use crate::morphogen::{BodyPlan, OrganKind};
use crate::textio::csv_row;

pub const ARENA_SIDE_M: f64 = 2.0;
/// Arena diagonal: sqrt(8) for the 2 m square.
pub const ARENA_DIAGONAL_M: f64 = 2.828427124746190;

/// Task performance: one minus the beacon distance normalized by the arena
/// diagonal. 1 at the beacon, 0 across the full diagonal.
pub fn task_performance(final_position: Vec2<f64>, beacon: Vec2<f64>) -> f64 {
    1.0 - final_position.distance(beacon) / ARENA_DIAGONAL_M
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: [f64; 2],
    pub heading: f64,
}

impl Pose {
    pub fn point(&self) -> Vec2<f64> {
        Vec2::new(self.position[0], self.position[1])
    }
}

/// Chebyshev annulus around the arena centre that scales actuator
/// effectiveness while the robot's centre is inside it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepZone {
    pub inner: f64,
    pub outer: f64,
    pub wheel_factor: f64,
    pub joint_factor: f64,
}

impl StepZone {
    fn contains(&self, p: Vec2<f64>) -> bool {
        let c = ARENA_SIDE_M / 2.0;
        let cheb = (p.x - c).abs().max((p.y - c).abs());
        cheb >= self.inner && cheb < self.outer
    }
}

#[derive(Debug, Clone)]
pub struct Environment {
    pub name: String,
    /// Interior walls only; the four boundary walls are implicit.
    pub interior_walls: Vec<LineSegment<f64>>,
    /// Boundary walls followed by interior walls, for ray casting.
    all_walls: Vec<LineSegment<f64>>,
    pub step_zones: Vec<StepZone>,
    pub beacon: Vec2<f64>,
    pub start: Pose,
}

/// Serde mirror for environment definition files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub name: String,
    pub beacon: [f64; 2],
    pub start: Pose,
    #[serde(default)]
    pub walls: Vec<[[f64; 2]; 2]>,
    #[serde(default)]
    pub step_zones: Vec<StepZone>,
}

#[derive(Debug, thiserror::Error)]
pub enum EnvironmentError {
    #[error("unknown environment '{0}', expected amphitheatre, hard_race or two_rooms")]
    Unknown(String),
    #[error("{0} must lie inside the {ARENA_SIDE_M} m arena")]
    OutOfBounds(&'static str),
    #[error("environment file: {0}")]
    Parse(String),
}

impl Environment {
    pub fn new(spec: EnvironmentSpec) -> Result<Self, EnvironmentError> {
        let inside = |p: [f64; 2]| {
            p[0] > 0.0 && p[0] < ARENA_SIDE_M && p[1] > 0.0 && p[1] < ARENA_SIDE_M
        };
        if !inside(spec.beacon) {
            return Err(EnvironmentError::OutOfBounds("beacon"));
        }
        if !inside(spec.start.position) {
            return Err(EnvironmentError::OutOfBounds("start"));
        }
        let interior_walls: Vec<LineSegment<f64>> = spec
            .walls
            .iter()
            .map(|w| LineSegment::new(Vec2::new(w[0][0], w[0][1]), Vec2::new(w[1][0], w[1][1])))
            .collect();
        let s = ARENA_SIDE_M;
        let corners = [
            Vec2::new(0.0, 0.0),
            Vec2::new(s, 0.0),
            Vec2::new(s, s),
            Vec2::new(0.0, s),
        ];
        let mut all_walls: Vec<LineSegment<f64>> = (0..4)
            .map(|i| LineSegment::new(corners[i], corners[(i + 1) % 4]))
            .collect();
        all_walls.extend(interior_walls.iter().copied());
        Ok(Environment {
            name: spec.name,
            interior_walls,
            all_walls,
            step_zones: spec.step_zones,
            beacon: Vec2::new(spec.beacon[0], spec.beacon[1]),
            start: spec.start,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, EnvironmentError> {
        let spec: EnvironmentSpec =
            toml::from_str(text).map_err(|e| EnvironmentError::Parse(e.to_string()))?;
        Environment::new(spec)
    }

    /// The three built-in arenas. Wall layouts are artifact constants; see
    /// the repository documentation for the coordinates.
    pub fn builtin(name: &str) -> Result<Self, EnvironmentError> {
        let spec = match name {
            // start in the middle, beacon in a corner, three step rings on the way
            "amphitheatre" => EnvironmentSpec {
                name: name.into(),
                beacon: [1.75, 1.75],
                start: Pose {
                    position: [1.0, 1.0],
                    heading: 0.0,
                },
                walls: vec![],
                step_zones: vec![
                    StepZone {
                        inner: 0.35,
                        outer: 0.40,
                        wheel_factor: 0.5,
                        joint_factor: 0.8,
                    },
                    StepZone {
                        inner: 0.50,
                        outer: 0.55,
                        wheel_factor: 0.5,
                        joint_factor: 0.8,
                    },
                    StepZone {
                        inner: 0.65,
                        outer: 0.70,
                        wheel_factor: 0.5,
                        joint_factor: 0.8,
                    },
                ],
            },
            // corner to opposite corner, two baffles forcing an S-shaped path
            "hard_race" => EnvironmentSpec {
                name: name.into(),
                beacon: [1.75, 1.75],
                start: Pose {
                    position: [0.25, 0.25],
                    heading: 0.0,
                },
                walls: vec![
                    [[0.0, 0.7], [1.35, 0.7]],
                    [[2.0, 1.3], [0.65, 1.3]],
                ],
                step_zones: vec![],
            },
            // divider with a gate at the top, beacon hidden in a walled pocket
            "two_rooms" => EnvironmentSpec {
                name: name.into(),
                beacon: [1.65, 0.6],
                start: Pose {
                    position: [0.5, 1.0],
                    heading: 0.0,
                },
                walls: vec![
                    [[1.0, 0.0], [1.0, 1.5]],
                    [[1.4, 1.2], [2.0, 1.2]],
                ],
                step_zones: vec![],
            },
            other => return Err(EnvironmentError::Unknown(other.into())),
        };
        Environment::new(spec)
    }

    pub fn builtin_names() -> [&'static str; 3] {
        ["amphitheatre", "hard_race", "two_rooms"]
    }

    fn zone_factors(&self, p: Vec2<f64>) -> (f64, f64) {
        for z in &self.step_zones {
            if z.contains(p) {
                return (z.wheel_factor, z.joint_factor);
            }
        }
        (1.0, 1.0)
    }

    /// Distance from `p` to the nearest wall (boundary or interior).
    pub fn wall_clearance(&self, p: Vec2<f64>) -> f64 {
        self.all_walls
            .iter()
            .map(|w| w.distance_to_point(p))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Simulation constants; every value is exposed in the run configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct ArenaParams {
    pub control_rate_hz: f64,
    pub sim_time_s: f64,
    /// Peak wheel contact speed, m/s; outputs map to (2o-1) * this.
    pub wheel_max_speed: f64,
    /// Joint paddling efficiency relative to wheels. Output o commands an
    /// oscillation frequency; thrust is proportional to it, peaking at
    /// `joint_efficiency * wheel_max_speed`.
    pub joint_efficiency: f64,
    /// Full sensor field-of-view angle, degrees.
    pub sensor_fov_deg: f64,
    pub sensor_max_range: f64,
    /// Net displacement below this counts as "did not move", m.
    pub moved_threshold: f64,
    /// Record every Nth pose in the trajectory.
    pub trajectory_stride: usize,
}

impl Default for ArenaParams {
    fn default() -> Self {
        ArenaParams {
            control_rate_hz: 10.0,
            sim_time_s: 60.0,
            wheel_max_speed: 0.3,
            joint_efficiency: 0.3,
            sensor_fov_deg: 60.0,
            sensor_max_range: 2.0,
            moved_threshold: 0.01,
            trajectory_stride: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActuatorKind {
    Wheel,
    Joint,
}

#[derive(Debug, Clone, Copy)]
pub struct Actuator {
    pub kind: ActuatorKind,
    /// Mount point in the body frame, m.
    pub mount: Vec2<f64>,
    /// Unit drive direction in the body frame.
    pub dir: Vec2<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SensorMount {
    pub mount: Vec2<f64>,
    pub dir: Vec2<f64>,
}

/// Planar robot derived from a body-plan: disc footprint plus organ mounts.
/// Actuators are ordered wheels first, then joints, each in body-plan organ
/// order — the same order the controller's outputs use. Sensors follow
/// body-plan organ order for the controller's inputs.
#[derive(Debug, Clone)]
pub struct RobotBody {
    pub radius: f64,
    pub sensors: Vec<SensorMount>,
    pub actuators: Vec<Actuator>,
}

impl RobotBody {
    pub fn from_plan(plan: &BodyPlan) -> Self {
        let ground_dir = |normal: [f64; 3]| {
            let v = Vec2::new(normal[0], normal[1]);
            if v.norm() > 1e-9 {
                v.normalized()
            } else {
                Vec2::new(1.0, 0.0) // vertical mounts default to body-forward
            }
        };
        let mount_of = |o: &crate::morphogen::Organ| {
            Vec2::new(o.position_cm[0] / 100.0, o.position_cm[1] / 100.0)
        };
        let mut sensors = Vec::new();
        let mut wheels = Vec::new();
        let mut joints = Vec::new();
        for o in &plan.organs {
            match o.kind {
                OrganKind::Sensor => sensors.push(SensorMount {
                    mount: mount_of(o),
                    dir: ground_dir(o.normal),
                }),
                OrganKind::Wheel => wheels.push(Actuator {
                    kind: ActuatorKind::Wheel,
                    mount: mount_of(o),
                    dir: ground_dir(o.normal),
                }),
                OrganKind::Joint => joints.push(Actuator {
                    kind: ActuatorKind::Joint,
                    mount: mount_of(o),
                    dir: ground_dir(o.normal),
                }),
                OrganKind::Caster => {}
            }
        }
        wheels.extend(joints);
        RobotBody {
            radius: plan.footprint_radius_m(),
            sensors,
            actuators: wheels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub pose: Pose,
    pub time: f64,
}

impl RobotState {
    pub fn at_start(env: &Environment) -> Self {
        RobotState {
            pose: env.start,
            time: 0.0,
        }
    }
}

/// Least-squares rigid-body twist `(v, omega)` from desired contact
/// velocities at body points. Solves the 3x3 normal equations with a tiny
/// Tikhonov term so lone or concentric contacts stay well-posed.
fn twist_fit(contacts: &[(Vec2<f64>, Vec2<f64>)]) -> (Vec2<f64>, f64) {
    if contacts.is_empty() {
        return (Vec2::zero(), 0.0);
    }
    const EPS: f64 = 1e-12;
    let n = contacts.len() as f64;
    let (mut sx, mut sy, mut srr) = (0.0, 0.0, 0.0);
    let (mut bx, mut by, mut bw) = (0.0, 0.0, 0.0);
    for &(p, v) in contacts {
        sx += p.x;
        sy += p.y;
        srr += p.x * p.x + p.y * p.y;
        bx += v.x;
        by += v.y;
        bw += p.x * v.y - p.y * v.x;
    }
    // normal matrix [[n,0,-sy],[0,n,sx],[-sy,sx,srr]] + eps*I
    let a11 = n + EPS;
    let a13 = -sy;
    let a23 = sx;
    let a33 = srr + EPS;
    // eliminate v from the omega equation
    let denom = a33 - (a13 * a13 + a23 * a23) / a11;
    let rhs = bw - (a13 * bx + a23 * by) / a11;
    let omega = if denom.abs() > 0.0 { rhs / denom } else { 0.0 };
    let vx = (bx - a13 * omega) / a11;
    let vy = (by - a23 * omega) / a11;
    (Vec2::new(vx, vy), omega)
}

/// Advance the robot one control interval under the given actuation
/// (wheels: output in [0,1] mapped to signed speed; joints: output in [0,1]
/// commanding paddling thrust). Wall contacts slide; the returned state
/// never penetrates a wall or leaves the arena.
pub fn step(
    body: &RobotBody,
    state: &RobotState,
    actuation: &[f64],
    env: &Environment,
    params: &ArenaParams,
    dt: f64,
) -> RobotState {
    debug_assert_eq!(actuation.len(), body.actuators.len());
    let position = state.pose.point();
    let (wheel_factor, joint_factor) = env.zone_factors(position);

    let mut wheel_contacts: Vec<(Vec2<f64>, Vec2<f64>)> = Vec::with_capacity(body.actuators.len());
    let mut joint_contacts: Vec<(Vec2<f64>, Vec2<f64>)> = Vec::new();
    for (a, &o) in body.actuators.iter().zip(actuation) {
        match a.kind {
            ActuatorKind::Wheel => {
                let speed = (2.0 * o - 1.0) * params.wheel_max_speed * wheel_factor;
                wheel_contacts.push((a.mount, a.dir * speed));
            }
            ActuatorKind::Joint => {
                let thrust = o * params.joint_efficiency * params.wheel_max_speed * joint_factor;
                joint_contacts.push((a.mount, a.dir * thrust));
            }
        }
    }
    let (v_wheel, w_wheel) = twist_fit(&wheel_contacts);
    let (v_joint, w_joint) = twist_fit(&joint_contacts);
    let v_body = v_wheel + v_joint;
    let omega = w_wheel + w_joint;

    let heading = state.pose.heading + omega * dt;
    let displacement = v_body.rotated(state.pose.heading) * dt;
    let target = position + displacement;
    let resolved = resolve_collisions(env, body.radius, position, target);

    RobotState {
        pose: Pose {
            position: [resolved.x, resolved.y],
            heading,
        },
        time: state.time + dt,
    }
}

fn resolve_collisions(
    env: &Environment,
    radius: f64,
    prev: Vec2<f64>,
    target: Vec2<f64>,
) -> Vec2<f64> {
    const PASSES: usize = 6;
    const SKIN: f64 = 1e-9;
    let lo = radius;
    let hi = ARENA_SIDE_M - radius;
    let mut p = target;
    for _ in 0..PASSES {
        let mut touched = false;
        let clamped = Vec2::new(p.x.clamp(lo, hi), p.y.clamp(lo, hi));
        if clamped != p {
            p = clamped;
            touched = true;
        }
        for wall in &env.interior_walls {
            let c = wall.closest_point(p);
            let d = p.distance(c);
            if d < radius {
                let dir = if d > 1e-12 {
                    (p - c) * (1.0 / d)
                } else {
                    (prev - c).normalized()
                };
                p = c + dir * (radius + SKIN);
                touched = true;
            }
        }
        if !touched {
            return p;
        }
    }
    // corner jams that the passes could not settle fall back to standing still
    let clear = p.x >= lo - SKIN
        && p.x <= hi + SKIN
        && p.y >= lo - SKIN
        && p.y <= hi + SKIN
        && env
            .interior_walls
            .iter()
            .all(|w| w.distance_to_point(p) >= radius - SKIN);
    if clear {
        p
    } else {
        prev
    }
}

/// Sensor readings: per sensor, a beacon visibility bit (field of view and
/// occlusion) and the normalized wall distance along the sensor direction.
pub fn sense(
    body: &RobotBody,
    state: &RobotState,
    env: &Environment,
    params: &ArenaParams,
) -> Vec<f64> {
    let heading = state.pose.heading;
    let origin = state.pose.point();
    let cos_half_fov = (params.sensor_fov_deg.to_radians() / 2.0).cos();
    let mut out = Vec::with_capacity(2 * body.sensors.len());
    for s in &body.sensors {
        let pos = origin + s.mount.rotated(heading);
        let dir = s.dir.rotated(heading);
        let to_beacon = env.beacon - pos;
        let beacon_bit = if to_beacon.norm() < 1e-12 {
            1.0
        } else {
            let in_cone = dir.dot(to_beacon.normalized()) >= cos_half_fov;
            let ray = LineSegment::new(pos, env.beacon);
            let occluded = env.interior_walls.iter().any(|w| w.intersects(&ray));
            if in_cone && !occluded {
                1.0
            } else {
                0.0
            }
        };
        let range = env
            .all_walls
            .iter()
            .filter_map(|w| w.raycast(pos, dir))
            .fold(f64::INFINITY, f64::min);
        let distance = if range.is_finite() {
            (range / params.sensor_max_range).min(1.0)
        } else {
            1.0
        };
        out.push(beacon_bit);
        out.push(distance);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub task_performance: f64,
    pub final_position: Vec2<f64>,
    /// Poses sampled every `trajectory_stride` steps, plus the final pose.
    pub trajectory: Vec<(f64, Pose)>,
    pub moved: bool,
}

/// Run one evaluation: reset the controller context, then sense-think-act at
/// the control rate until the simulation time elapses. Bodies without
/// actuators never move and score their start pose.
pub fn evaluate(
    body: &RobotBody,
    ctrl: &mut ElmanNetwork<f64>,
    env: &Environment,
    params: &ArenaParams,
) -> Result<RolloutResult, crate::controller::ControllerError> {
    ctrl.reset_context();
    let mut state = RobotState::at_start(env);
    let start = state.pose.point();
    let steps = (params.sim_time_s * params.control_rate_hz).round() as usize;
    let dt = 1.0 / params.control_rate_hz;
    let stride = params.trajectory_stride.max(1);
    let mut trajectory = Vec::with_capacity(steps / stride + 2);
    trajectory.push((state.time, state.pose));
    if !body.actuators.is_empty() {
        for k in 0..steps {
            let inputs = sense(body, &state, env, params);
            let outputs = ctrl.forward(&inputs)?;
            state = step(body, &state, &outputs, env, params, dt);
            if (k + 1) % stride == 0 || k + 1 == steps {
                trajectory.push((state.time, state.pose));
            }
        }
    }
    let final_position = state.pose.point();
    Ok(RolloutResult {
        task_performance: task_performance(final_position, env.beacon),
        final_position,
        trajectory,
        moved: final_position.distance(start) > params.moved_threshold,
    })
}

/// Trajectory dump: `t,x,y,heading` per sampled pose.
pub fn trajectory_csv(trajectory: &[(f64, Pose)]) -> String {
    let mut out = String::from("t,x,y,heading\n");
    for (t, pose) in trajectory {
        out.push_str(&csv_row(&[
            format!("{t}"),
            format!("{}", pose.position[0]),
            format!("{}", pose.position[1]),
            format!("{}", pose.heading),
        ]));
    }
    out
}

/// Top-down SVG of the arena, optionally with a trajectory overlay.
pub fn render_svg(env: &Environment, trajectory: Option<&[(f64, Pose)]>) -> String {
    use std::fmt::Write as _;
    let scale = 200.0; // px per metre
    let size = ARENA_SIDE_M * scale;
    let px = |v: f64| v * scale;
    // svg y grows downward; flip so north is up
    let py = |v: f64| (ARENA_SIDE_M - v) * scale;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(
        out,
        r##"<rect width="{size}" height="{size}" fill="#fafafa" stroke="#263238" stroke-width="3"/>"##
    );
    let c = ARENA_SIDE_M / 2.0;
    for z in &env.step_zones {
        for r in [z.inner, z.outer] {
            let _ = writeln!(
                out,
                r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#bdbdbd" stroke-width="1"/>"##,
                px(c - r),
                py(c + r),
                px(2.0 * r),
                px(2.0 * r)
            );
        }
    }
    for w in &env.interior_walls {
        let _ = writeln!(
            out,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#263238" stroke-width="4"/>"##,
            px(w.a.x),
            py(w.a.y),
            px(w.b.x),
            py(w.b.y)
        );
    }
    // success circle: 14 cm around the beacon
    let _ = writeln!(
        out,
        r##"<circle cx="{:.1}" cy="{:.1}" r="{:.1}" fill="none" stroke="#66bb6a" stroke-width="1.5" stroke-dasharray="4 3"/>"##,
        px(env.beacon.x),
        py(env.beacon.y),
        px(0.14)
    );
    let _ = writeln!(
        out,
        r##"<circle cx="{:.1}" cy="{:.1}" r="5" fill="#2e7d32"/>"##,
        px(env.beacon.x),
        py(env.beacon.y)
    );
    let _ = writeln!(
        out,
        r##"<circle cx="{:.1}" cy="{:.1}" r="5" fill="none" stroke="#1565c0" stroke-width="2"/>"##,
        px(env.start.position[0]),
        py(env.start.position[1])
    );
    if let Some(tr) = trajectory {
        let pts: Vec<String> = tr
            .iter()
            .map(|(_, p)| format!("{:.1},{:.1}", px(p.position[0]), py(p.position[1])))
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#e53935" stroke-width="1.5"/>"##,
            pts.join(" ")
        );
    }
    out.push_str("</svg>\n");
    out
}
