//! Kinodynamic planners over the pushing simulator.
//!
//! Both planners grow motions by sampling one random control and
//! forward-simulating it. A motion is kept only if every substep of the
//! propagation is valid.

mod kpiece;
mod rrt;

pub use kpiece::Kpiece;
pub use rrt::Rrt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{ClockMode, Stopwatch};
use crate::geometry::{angle_between, Pose2, Vec2};
use crate::physics::{propagate_until, PropagationConfig};
use crate::world::{grasp_achieved, Control, Scene, SystemState};

pub const DEFAULT_POS_TOL: f64 = 0.01;
pub const DEFAULT_ANG_TOL: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GoalSpec {
    ReachGoalObject,
    RobotPoses {
        poses: Vec<Pose2>,
        pos_tol: f64,
        ang_tol: f64,
    },
    ObjectToRegion {
        object_id: String,
        centroid: Vec2,
        diameter: f64,
    },
}

impl GoalSpec {
    pub fn robot_poses(poses: Vec<Pose2>) -> GoalSpec {
        GoalSpec::RobotPoses {
            poses,
            pos_tol: DEFAULT_POS_TOL,
            ang_tol: DEFAULT_ANG_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Rrt,
    Kpiece,
}

impl std::str::FromStr for PlannerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rrt" => Ok(PlannerKind::Rrt),
            "kpiece" => Ok(PlannerKind::Kpiece),
            other => Err(format!("unknown planner {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub time_limit: f64,
    pub seed: u64,
    pub v_max: f64,
    pub omega_max: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub goal_bias: f64,
    pub kpiece_cell_size: f64,
    pub kpiece_interior_bias: f64,
    pub nn_theta_weight: f64,
    /// Simulator settings; falls back to the scene's, then the defaults.
    pub propagation: Option<PropagationConfig>,
    pub clock: ClockMode,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            time_limit: 10.0,
            seed: 0,
            v_max: 0.10,
            omega_max: 1.0,
            t_min: 0.5,
            t_max: 2.0,
            goal_bias: 0.05,
            kpiece_cell_size: 0.04,
            kpiece_interior_bias: 0.7,
            nn_theta_weight: 0.05,
            propagation: None,
            clock: ClockMode::Wall,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: &str| Err(PlanError::InvalidConfig(m.to_string()));
        if !(self.time_limit > 0.0) {
            return bad("time_limit must be positive");
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return bad("goal_bias must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.kpiece_interior_bias) {
            return bad("kpiece_interior_bias must lie in [0, 1]");
        }
        if !(self.v_max > 0.0 && self.omega_max > 0.0 && self.t_min > 0.0 && self.t_max >= self.t_min) {
            return bad("control bounds must be positive with t_min <= t_max");
        }
        if !(self.kpiece_cell_size > 0.0 && self.nn_theta_weight >= 0.0) {
            return bad("cell size must be positive and theta weight non-negative");
        }
        if let Some(p) = &self.propagation {
            p.validate().map_err(|e| PlanError::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }

    pub fn propagation_for(&self, scene: &Scene) -> PropagationConfig {
        self.propagation.or(scene.physics).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub controls: Vec<Control>,
    /// `controls.len() + 1` states; `states[0]` is the start.
    pub states: Vec<SystemState>,
    pub planning_time: f64,
}

impl Plan {
    pub fn final_state(&self) -> &SystemState {
        self.states.last().expect("plan has a start state")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanError {
    #[error("start state is invalid")]
    InvalidStart,
    #[error("no solution within {elapsed:.3} s")]
    Timeout { elapsed: f64 },
    #[error("invalid planner input: {0}")]
    InvalidConfig(String),
    #[error("unknown object {0:?}")]
    UnknownObject(String),
}

/// Goal with the object id resolved to an index.
#[derive(Debug, Clone)]
pub(crate) enum Target {
    Reach {
        goal: usize,
        centroid: Vec2,
    },
    Poses {
        poses: Vec<Pose2>,
        pos_tol: f64,
        ang_tol: f64,
    },
    Region {
        object: usize,
        centroid: Vec2,
        radius: f64,
        start: Vec2,
    },
}

impl Target {
    pub(crate) fn resolve(scene: &Scene, start: &SystemState, goal: &GoalSpec) -> Result<Target, PlanError> {
        match goal {
            GoalSpec::ReachGoalObject => Ok(Target::Reach {
                goal: scene.goal,
                centroid: start.object_poses[scene.goal].position(),
            }),
            GoalSpec::RobotPoses {
                poses,
                pos_tol,
                ang_tol,
            } => {
                if poses.is_empty() {
                    return Err(PlanError::InvalidConfig("goal pose list is empty".into()));
                }
                Ok(Target::Poses {
                    poses: poses.clone(),
                    pos_tol: *pos_tol,
                    ang_tol: *ang_tol,
                })
            }
            GoalSpec::ObjectToRegion {
                object_id,
                centroid,
                diameter,
            } => {
                if !(*diameter > 0.0) {
                    return Err(PlanError::InvalidConfig("region diameter must be positive".into()));
                }
                let object = scene
                    .index_of(object_id)
                    .ok_or_else(|| PlanError::UnknownObject(object_id.clone()))?;
                Ok(Target::Region {
                    object,
                    centroid: *centroid,
                    radius: diameter / 2.0,
                    start: start.object_poses[object].position(),
                })
            }
        }
    }

    pub(crate) fn satisfied(&self, scene: &Scene, state: &SystemState) -> bool {
        match self {
            Target::Reach { .. } => grasp_achieved(scene, state),
            Target::Poses {
                poses,
                pos_tol,
                ang_tol,
            } => poses.iter().any(|p| {
                state.robot_pose.position().distance(p.position()) <= *pos_tol
                    && angle_between(state.robot_pose.theta, p.theta) <= *ang_tol
            }),
            Target::Region {
                object,
                centroid,
                radius,
                ..
            } => state.object_poses[*object].position().distance(*centroid) <= *radius,
        }
    }

    /// Index of the object whose position enters the metric, if any.
    pub(crate) fn tracked_object(&self) -> Option<usize> {
        match self {
            Target::Region { object, .. } => Some(*object),
            _ => None,
        }
    }

    /// Heuristic distance to the goal set used to rank motions.
    pub(crate) fn goal_distance(&self, scene: &Scene, state: &SystemState, theta_weight: f64) -> f64 {
        let robot = &state.robot_pose;
        match self {
            Target::Reach { goal, .. } => {
                let mouth = robot.transform_point(scene.robot.mouth_center());
                mouth.distance(state.object_poses[*goal].position())
            }
            Target::Poses { poses, .. } => poses
                .iter()
                .map(|p| robot.position().distance(p.position()) + theta_weight * angle_between(robot.theta, p.theta))
                .fold(f64::INFINITY, f64::min),
            Target::Region { object, centroid, .. } => {
                let obj = state.object_poses[*object].position();
                let mouth = robot.transform_point(scene.robot.mouth_center());
                obj.distance(*centroid) + 0.5 * mouth.distance(obj)
            }
        }
    }
}

/// True iff `state` lies in the goal set described by `goal`.
pub fn goal_satisfied(scene: &Scene, state: &SystemState, goal: &GoalSpec) -> Result<bool, PlanError> {
    scene
        .check_state(state)
        .map_err(|e| PlanError::InvalidConfig(e.to_string()))?;
    Ok(Target::resolve(scene, state, goal)?.satisfied(scene, state))
}

/// Nearest-neighbour metric: robot position distance plus weighted heading
/// distance, plus the tracked object's displacement for push goals.
pub fn distance(scene: &Scene, a: &SystemState, b: &SystemState, goal: &GoalSpec, theta_weight: f64) -> f64 {
    let object = match goal {
        GoalSpec::ObjectToRegion { object_id, .. } => scene.index_of(object_id),
        _ => None,
    };
    metric(a, b, object, theta_weight)
}

pub(crate) fn metric(a: &SystemState, b: &SystemState, object: Option<usize>, theta_weight: f64) -> f64 {
    let mut d = a.robot_pose.position().distance(b.robot_pose.position())
        + theta_weight * angle_between(a.robot_pose.theta, b.robot_pose.theta);
    if let Some(i) = object {
        d += a.object_poses[i].position().distance(b.object_poses[i].position());
    }
    d
}

/// State shared by both planners: sampling, expansion and budget.
pub(crate) struct Context<'a> {
    pub scene: &'a Scene,
    pub cfg: &'a PlannerConfig,
    pub prop: PropagationConfig,
    pub target: Target,
    pub rng: ChaCha8Rng,
    pub clock: Stopwatch,
}

pub(crate) struct Expansion {
    pub control: Control,
    pub state: SystemState,
    pub reached: bool,
}

impl<'a> Context<'a> {
    pub fn new(
        scene: &'a Scene,
        start: &SystemState,
        goal: &GoalSpec,
        cfg: &'a PlannerConfig,
    ) -> Result<Self, PlanError> {
        let clock = Stopwatch::start(cfg.clock);
        cfg.validate()?;
        scene
            .check_state(start)
            .map_err(|e| PlanError::InvalidConfig(e.to_string()))?;
        let target = Target::resolve(scene, start, goal)?;
        if !scene.valid_unchecked(start) {
            return Err(PlanError::InvalidStart);
        }
        use rand::SeedableRng;
        Ok(Context {
            scene,
            cfg,
            prop: cfg.propagation_for(scene),
            target,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            clock,
        })
    }

    pub fn out_of_time(&self) -> bool {
        self.clock.elapsed() >= self.cfg.time_limit
    }

    pub fn random_control(&mut self) -> Control {
        let c = self.cfg;
        Control {
            vx: self.rng.gen_range(-c.v_max..=c.v_max),
            vy: self.rng.gen_range(-c.v_max..=c.v_max),
            omega: self.rng.gen_range(-c.omega_max..=c.omega_max),
            duration: self.rng.gen_range(c.t_min..=c.t_max),
        }
    }

    /// Uniform state sample: robot pose anywhere in the workspace; for push
    /// goals the tracked object is also placed uniformly.
    pub fn uniform_sample(&mut self, template: &SystemState) -> SystemState {
        let ws = self.scene.workspace;
        let mut s = template.clone();
        s.robot_pose = Pose2::new(
            self.rng.gen_range(0.0..=ws.width),
            self.rng.gen_range(0.0..=ws.height),
            self.rng.gen_range(-std::f64::consts::PI..=std::f64::consts::PI),
        );
        if let Some(i) = self.target.tracked_object() {
            let p = s.object_poses[i];
            s.object_poses[i] = Pose2::new(
                self.rng.gen_range(0.0..=ws.width),
                self.rng.gen_range(0.0..=ws.height),
                p.theta,
            );
        }
        s
    }

    /// Goal-directed state sample.
    pub fn goal_sample(&mut self, template: &SystemState) -> SystemState {
        let mut s = template.clone();
        let robot = &self.scene.robot;
        match &self.target {
            Target::Reach { centroid, .. } => {
                let heading = self.rng.gen_range(-std::f64::consts::PI..=std::f64::consts::PI);
                s.robot_pose = robot.pose_with_mouth_at(*centroid, heading);
            }
            Target::Poses { poses, .. } => {
                let k = self.rng.gen_range(0..poses.len());
                s.robot_pose = poses[k];
            }
            Target::Region {
                object,
                centroid,
                start,
                ..
            } => {
                let dir = (*centroid - *start).normalized().unwrap_or(Vec2::new(0.0, 1.0));
                s.robot_pose = robot.pose_with_mouth_at(*centroid, dir.angle());
                let p = s.object_poses[*object];
                s.object_poses[*object] = Pose2::new(centroid.x, centroid.y, p.theta);
            }
        }
        s
    }

    pub fn sample(&mut self, template: &SystemState) -> SystemState {
        if self.rng.gen_bool(self.cfg.goal_bias) {
            self.goal_sample(template)
        } else {
            self.uniform_sample(template)
        }
    }

    /// Forward-simulate `control` from `from`. If the goal is met at an
    /// intermediate substep no earlier than `t_min`, the control is cut
    /// there and re-simulated so the stored motion replays exactly.
    pub fn expand(&mut self, from: &SystemState, control: Control) -> Option<Expansion> {
        let scene = self.scene;
        let target = &self.target;
        let n_obj = from.object_poses.len();
        let n = crate::physics::substep_count(control.duration, self.prop.substep_dt);
        let h = control.duration / n as f64;
        let min_k = (self.cfg.t_min / h - 1e-9).ceil().max(1.0) as usize;
        let (out, stopped) = propagate_until(scene, from, &control, &self.prop, |s, k| {
            k >= min_k && target.satisfied(scene, s)
        });
        self.clock.charge_substeps(out.substeps, n_obj);
        if !out.valid {
            return None;
        }
        if let Some(k) = stopped {
            let cut = Control {
                duration: h * k as f64,
                ..control
            };
            let (again, _) = propagate_until(scene, from, &cut, &self.prop, |_, _| false);
            self.clock.charge_substeps(again.substeps, n_obj);
            if again.valid && cut.duration >= self.cfg.t_min && target.satisfied(scene, &again.state) {
                return Some(Expansion {
                    control: cut,
                    state: again.state,
                    reached: true,
                });
            }
            let (full, _) = propagate_until(scene, from, &control, &self.prop, |_, _| false);
            self.clock.charge_substeps(full.substeps, n_obj);
            if !full.valid {
                return None;
            }
            let reached = target.satisfied(scene, &full.state);
            return Some(Expansion {
                control,
                state: full.state,
                reached,
            });
        }
        let reached = target.satisfied(scene, &out.state);
        Some(Expansion {
            control,
            state: out.state,
            reached,
        })
    }

    pub fn metric(&self, a: &SystemState, b: &SystemState) -> f64 {
        metric(a, b, self.target.tracked_object(), self.cfg.nn_theta_weight)
    }
}

/// Walk parent links from `leaf` back to the root and assemble the plan.
pub(crate) fn extract_plan(
    states: &[SystemState],
    parents: &[Option<(usize, Control)>],
    leaf: usize,
    planning_time: f64,
) -> Plan {
    let mut idx = leaf;
    let mut rev_states = vec![states[idx].clone()];
    let mut rev_controls = Vec::new();
    while let Some((p, c)) = parents[idx] {
        rev_controls.push(c);
        rev_states.push(states[p].clone());
        idx = p;
    }
    rev_states.reverse();
    rev_controls.reverse();
    Plan {
        controls: rev_controls,
        states: rev_states,
        planning_time,
    }
}

/// Plan with the selected algorithm.
pub fn plan(
    kind: PlannerKind,
    scene: &Scene,
    start: &SystemState,
    goal: &GoalSpec,
    cfg: &PlannerConfig,
) -> Result<Plan, PlanError> {
    match kind {
        PlannerKind::Rrt => rrt_plan(scene, start, goal, cfg),
        PlannerKind::Kpiece => kpiece_plan(scene, start, goal, cfg),
    }
}

pub fn rrt_plan(scene: &Scene, start: &SystemState, goal: &GoalSpec, cfg: &PlannerConfig) -> Result<Plan, PlanError> {
    Rrt::new(scene, start, goal, cfg)?.solve()
}

pub fn kpiece_plan(
    scene: &Scene,
    start: &SystemState,
    goal: &GoalSpec,
    cfg: &PlannerConfig,
) -> Result<Plan, PlanError> {
    Kpiece::new(scene, start, goal, cfg)?.solve()
}

/// Re-simulate a plan's controls from its first state and check that every
/// stored state is reproduced bit for bit and the final state meets `goal`.
pub fn replay_matches(scene: &Scene, plan: &Plan, goal: &GoalSpec, prop: &PropagationConfig) -> bool {
    if plan.states.len() != plan.controls.len() + 1 {
        return false;
    }
    let mut s = plan.states[0].clone();
    for (c, stored) in plan.controls.iter().zip(&plan.states[1..]) {
        match crate::physics::propagate(scene, &s, c, prop) {
            Ok(out) if out.valid && out.state == *stored => s = out.state,
            _ => return false,
        }
    }
    goal_satisfied(scene, &s, goal).unwrap_or(false)
}
