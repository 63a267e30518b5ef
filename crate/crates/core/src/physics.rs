//! Deterministic quasi-static pushing.
//!
//! The robot is kinematic and follows its body-frame velocity exactly. After
//! every substep, penetrations are resolved by translating pushed objects
//! along the minimum translation vector with a small rotational response.
//! Objects carry no momentum.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{contact, Contact, Pose2, Vec2};
use crate::world::{Control, Scene, SystemState, WorldError, OBJECT_PENETRATION_TOL};

/// Penetrations at or below this depth are left alone.
const SLOP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationConfig {
    pub substep_dt: f64,
    pub max_resolution_iterations: usize,
    pub penetration_tolerance: f64,
    pub rotation_gain: f64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            substep_dt: 0.01,
            max_resolution_iterations: 32,
            penetration_tolerance: 1e-3,
            rotation_gain: 1.0,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        if !(self.substep_dt > 0.0 && self.substep_dt.is_finite()) {
            return Err(PhysicsError::InvalidConfig("substep_dt must be positive".into()));
        }
        if !(self.penetration_tolerance > 0.0) {
            return Err(PhysicsError::InvalidConfig(
                "penetration_tolerance must be positive".into(),
            ));
        }
        if self.max_resolution_iterations == 0 {
            return Err(PhysicsError::InvalidConfig(
                "max_resolution_iterations must be at least 1".into(),
            ));
        }
        if !self.rotation_gain.is_finite() || self.rotation_gain < 0.0 {
            return Err(PhysicsError::InvalidConfig(
                "rotation_gain must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("control contains non-finite values")]
    NonFiniteControl,
    #[error("control duration must be non-negative")]
    NegativeDuration,
    #[error("invalid propagation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    /// Final state, or the last valid substep state when `valid` is false.
    pub state: SystemState,
    pub valid: bool,
    /// Substeps simulated, including the failing one.
    pub substeps: usize,
}

/// Number of substeps used for a control of `duration` seconds.
pub fn substep_count(duration: f64, dt: f64) -> usize {
    ((duration / dt) - 1e-9).ceil().max(1.0) as usize
}

/// Exact pose after holding body-frame velocity `(vx, vy, omega)` for `h` seconds.
pub fn integrate_body_velocity(pose: &Pose2, vx: f64, vy: f64, omega: f64, h: f64) -> Pose2 {
    let dth = omega * h;
    let local = if dth.abs() < 1e-12 {
        Vec2::new(vx * h, vy * h)
    } else {
        let (s, c) = dth.sin_cos();
        Vec2::new((vx * s + vy * (c - 1.0)) / omega, (vx * (1.0 - c) + vy * s) / omega)
    };
    let d = local.rotated(pose.theta);
    Pose2::new(pose.x + d.x, pose.y + d.y, pose.theta + dth)
}

/// Apply `control` to `state`.
pub fn propagate(
    scene: &Scene,
    state: &SystemState,
    control: &Control,
    cfg: &PropagationConfig,
) -> Result<Propagation, PhysicsError> {
    scene.check_state(state)?;
    if !control.is_finite() {
        return Err(PhysicsError::NonFiniteControl);
    }
    if control.duration < 0.0 {
        return Err(PhysicsError::NegativeDuration);
    }
    cfg.validate()?;
    Ok(propagate_unchecked(scene, state, control, cfg))
}

/// [`propagate`] without argument validation.
pub(crate) fn propagate_unchecked(
    scene: &Scene,
    state: &SystemState,
    control: &Control,
    cfg: &PropagationConfig,
) -> Propagation {
    propagate_until(scene, state, control, cfg, |_, _| false).0
}

/// Propagate, calling `stop(state, k)` after each valid substep `k`
/// (1-based). Stops early at the first substep where it returns true and
/// reports that substep.
pub(crate) fn propagate_until(
    scene: &Scene,
    state: &SystemState,
    control: &Control,
    cfg: &PropagationConfig,
    mut stop: impl FnMut(&SystemState, usize) -> bool,
) -> (Propagation, Option<usize>) {
    if control.is_zero_velocity() || control.duration == 0.0 {
        let p = Propagation {
            state: state.clone(),
            valid: scene.valid_unchecked(state),
            substeps: 0,
        };
        return (p, None);
    }
    let n = substep_count(control.duration, cfg.substep_dt);
    let h = control.duration / n as f64;
    let mut sim = Stepper::new(scene, cfg, state.clone());
    for k in 0..n {
        let before = sim.state.clone();
        let next = integrate_body_velocity(&before.robot_pose, control.vx, control.vy, control.omega, h);
        if !sim.step(next) {
            let p = Propagation {
                state: before,
                valid: false,
                substeps: k + 1,
            };
            return (p, None);
        }
        if k + 1 < n && stop(&sim.state, k + 1) {
            let p = Propagation {
                state: sim.state,
                valid: true,
                substeps: k + 1,
            };
            return (p, Some(k + 1));
        }
    }
    let p = Propagation {
        state: sim.state,
        valid: true,
        substeps: n,
    };
    (p, None)
}

struct Stepper<'a> {
    scene: &'a Scene,
    cfg: &'a PropagationConfig,
    state: SystemState,
    radii: Vec<f64>,
    robot_radius: f64,
}

impl<'a> Stepper<'a> {
    fn new(scene: &'a Scene, cfg: &'a PropagationConfig, state: SystemState) -> Self {
        Stepper {
            scene,
            cfg,
            state,
            radii: scene.objects.iter().map(|o| o.shape.bounding_radius()).collect(),
            robot_radius: scene.robot.bounding_radius(),
        }
    }

    /// Move the robot to `robot` and resolve contacts. Returns validity of
    /// the resulting state.
    fn step(&mut self, robot: Pose2) -> bool {
        if robot == self.state.robot_pose {
            return true;
        }
        self.state.robot_pose = robot;
        if self.scene.robot_hits_wall(&robot) {
            return false;
        }
        let n = self.state.object_poses.len();
        let rp = robot.position();
        let mut order: Vec<usize> = (0..n).collect();
        let dist: Vec<f64> = self
            .state
            .object_poses
            .iter()
            .map(|p| p.position().distance(rp))
            .collect();
        order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
        let mut rank = vec![0usize; n];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r;
        }

        let mut moved = vec![false; n];
        for _ in 0..self.cfg.max_resolution_iterations {
            let mut changed = false;
            for &i in &order {
                changed |= self.resolve_robot(i, &mut moved);
            }
            for (a_rank, &i) in order.iter().enumerate() {
                for &j in &order[a_rank + 1..] {
                    if !(moved[i] || moved[j]) {
                        continue;
                    }
                    // The passive body yields; between two moved bodies the
                    // one farther from the robot yields.
                    let (pusher, pushed) = if moved[i] && !moved[j] {
                        (i, j)
                    } else if moved[j] && !moved[i] {
                        (j, i)
                    } else if rank[i] < rank[j] {
                        (i, j)
                    } else {
                        (j, i)
                    };
                    changed |= self.resolve_pair(pusher, pushed, &mut moved);
                }
            }
            for &i in &order {
                if moved[i] {
                    changed |= self.resolve_walls(i);
                }
            }
            if !changed {
                break;
            }
        }
        self.post_check(&moved)
    }

    fn near(&self, a: Vec2, ra: f64, b: Vec2, rb: f64) -> bool {
        a.distance(b) <= ra + rb + 1e-9
    }

    fn resolve_robot(&mut self, i: usize, moved: &mut [bool]) -> bool {
        let robot = self.state.robot_pose;
        if !self.near(
            robot.position(),
            self.robot_radius,
            self.state.object_poses[i].position(),
            self.radii[i],
        ) {
            return false;
        }
        let shape = self.scene.objects[i].shape;
        let mut changed = false;
        for part in self.scene.robot.parts() {
            let pp = part.world_pose(&robot);
            if let Some(c) = contact(&part.shape, &pp, &shape, &self.state.object_poses[i]) {
                if c.depth > SLOP {
                    self.displace(i, &c);
                    moved[i] = true;
                    changed = true;
                }
            }
        }
        changed
    }

    fn resolve_pair(&mut self, pusher: usize, pushed: usize, moved: &mut [bool]) -> bool {
        let (pa, pb) = (self.state.object_poses[pusher], self.state.object_poses[pushed]);
        if !self.near(pa.position(), self.radii[pusher], pb.position(), self.radii[pushed]) {
            return false;
        }
        let sa = self.scene.objects[pusher].shape;
        let sb = self.scene.objects[pushed].shape;
        match contact(&sa, &pa, &sb, &pb) {
            Some(c) if c.depth > SLOP => {
                self.displace(pushed, &c);
                moved[pushed] = true;
                true
            }
            _ => false,
        }
    }

    /// Project object `i` out of every wall it penetrates. Whatever part of
    /// the push survives is tangential to the wall.
    fn resolve_walls(&mut self, i: usize) -> bool {
        let shape = self.scene.objects[i].shape;
        let mut changed = false;
        for w in &self.scene.walls {
            let pose = self.state.object_poses[i];
            if let Some(c) = contact(&w.shape, &w.offset, &shape, &pose) {
                if c.depth > SLOP {
                    let d = c.normal * c.depth;
                    self.state.object_poses[i] = Pose2::new(pose.x + d.x, pose.y + d.y, pose.theta);
                    changed = true;
                }
            }
        }
        changed
    }

    /// Translate object `i` by the contact's MTV and rotate it about its
    /// centroid in proportion to the MTV's moment about the centroid.
    fn displace(&mut self, i: usize, c: &Contact) {
        let pose = self.state.object_poses[i];
        let m = c.normal * c.depth;
        let r = c.point - pose.position();
        let radius = self.radii[i];
        let dtheta = self.cfg.rotation_gain * r.cross(m) / (radius * radius);
        self.state.object_poses[i] = Pose2::new(pose.x + m.x, pose.y + m.y, pose.theta + dtheta);
    }

    fn post_check(&self, moved: &[bool]) -> bool {
        let tol = self.cfg.penetration_tolerance;
        let robot = self.state.robot_pose;
        let n = self.state.object_poses.len();
        for i in 0..n {
            let pose = self.state.object_poses[i];
            let shape = self.scene.objects[i].shape;
            if moved[i] {
                if !self.scene.workspace.contains(pose.position()) {
                    return false;
                }
                if self.scene.object_wall_penetration(i, &pose) > OBJECT_PENETRATION_TOL.min(tol) {
                    return false;
                }
            }
            if self.near(robot.position(), self.robot_radius, pose.position(), self.radii[i]) {
                for part in self.scene.robot.parts() {
                    let pp = part.world_pose(&robot);
                    if contact(&part.shape, &pp, &shape, &pose).is_some_and(|c| c.depth > tol) {
                        return false;
                    }
                }
            }
            if !moved[i] {
                continue;
            }
            for j in 0..n {
                if j == i || (moved[j] && j < i) {
                    continue;
                }
                let pj = self.state.object_poses[j];
                if self.near(pose.position(), self.radii[i], pj.position(), self.radii[j])
                    && contact(&shape, &pose, &self.scene.objects[j].shape, &pj).is_some_and(|c| c.depth > tol)
                {
                    return false;
                }
            }
        }
        true
    }
}
