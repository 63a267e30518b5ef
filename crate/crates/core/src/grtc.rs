//! The guided planning loop: a guidance provider proposes object pushes,
//! each push is planned as an approach plus a push with a short budget and
//! executed, and finally the reach to the goal object is planned with what
//! remains of the overall budget.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::ClockMode;
use crate::geometry::{min_enclosing_circle, Pose2, Vec2};
use crate::physics::propagate;
use crate::planners::{plan, GoalSpec, Plan, PlanError, PlannerConfig, PlannerKind};
use crate::world::{grasp_achieved, Scene, SystemState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HighLevelAction {
    Push {
        object_id: String,
        x: f64,
        y: f64,
    },
    #[serde(rename = "reach")]
    ReachGoal,
}

impl HighLevelAction {
    pub fn push(object_id: &str, centroid: Vec2) -> Self {
        HighLevelAction::Push {
            object_id: object_id.to_string(),
            x: centroid.x,
            y: centroid.y,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrtcConfig {
    pub t_overall: f64,
    pub t_pushing: f64,
    pub region_diameter: f64,
    pub approach_clearance: f64,
    pub seed: u64,
}

impl Default for GrtcConfig {
    fn default() -> Self {
        GrtcConfig {
            t_overall: 300.0,
            t_pushing: 10.0,
            region_diameter: 0.08,
            approach_clearance: 0.01,
            seed: 0,
        }
    }
}

impl GrtcConfig {
    pub fn validate(&self) -> Result<(), GrtcError> {
        if !(self.t_pushing > 0.0 && self.t_pushing <= self.t_overall) {
            return Err(GrtcError::InvalidConfig("require 0 < t_pushing <= t_overall".into()));
        }
        if !(self.region_diameter > 0.0 && self.approach_clearance >= 0.0) {
            return Err(GrtcError::InvalidConfig("region diameter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum GrtcError {
    #[error("no valid approach state")]
    ApproachInfeasible,
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GuidanceError {
    /// Nothing to propose this round; the loop asks again.
    #[error("no action available")]
    NoAction,
    #[error("guidance failed: {0}")]
    Failed(String),
}

/// Source of high-level actions.
pub trait GuidanceProvider {
    fn next_high_level_action(&mut self, scene: &Scene, q: &SystemState) -> Result<HighLevelAction, GuidanceError>;

    /// Guidance cost accumulated by the provider itself. Used in place of
    /// measured wall time under the virtual clock.
    fn guidance_time(&self) -> f64 {
        0.0
    }

    /// Whether time spent producing actions counts against the overall budget.
    fn counts_against_budget(&self) -> bool {
        true
    }
}

/// Replays a fixed list of actions, then proposes the reach forever.
#[derive(Debug, Clone)]
pub struct ScriptedGuidance {
    script: Vec<HighLevelAction>,
    next: usize,
}

impl ScriptedGuidance {
    pub fn new(script: Vec<HighLevelAction>) -> Result<Self, GrtcError> {
        if script.is_empty() {
            return Err(GrtcError::InvalidAction("script must not be empty".into()));
        }
        Ok(ScriptedGuidance { script, next: 0 })
    }
}

pub fn scripted_guidance(script: Vec<HighLevelAction>) -> Result<ScriptedGuidance, GrtcError> {
    ScriptedGuidance::new(script)
}

impl GuidanceProvider for ScriptedGuidance {
    fn next_high_level_action(&mut self, _: &Scene, _: &SystemState) -> Result<HighLevelAction, GuidanceError> {
        let a = self
            .script
            .get(self.next)
            .cloned()
            .unwrap_or(HighLevelAction::ReachGoal);
        self.next += 1;
        Ok(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproachStates {
    /// Side-ways approach.
    pub q_a1: Option<Pose2>,
    /// Forward approach.
    pub q_a2: Option<Pose2>,
}

impl ApproachStates {
    pub fn poses(&self) -> Vec<Pose2> {
        self.q_a1.iter().chain(self.q_a2.iter()).copied().collect()
    }
}

/// Robot poses from which to push `object_id` toward `centroid`: one
/// behind the object along the push line and one beside it.
pub fn compute_approach_states(
    scene: &Scene,
    state: &SystemState,
    object_id: &str,
    centroid: Vec2,
    clearance: f64,
) -> Result<ApproachStates, GrtcError> {
    let i = scene
        .index_of(object_id)
        .ok_or_else(|| GrtcError::InvalidAction(format!("unknown object {object_id:?}")))?;
    let pose = state.object_poses[i];
    let c = pose.position();
    let u = (c - centroid)
        .normalized()
        .ok_or_else(|| GrtcError::InvalidAction("target centroid coincides with the object".into()))?;
    let reach = min_enclosing_circle(&scene.objects[i].shape, &pose).radius + scene.robot.mouth_depth() + clearance;
    let facing = |dir: Vec2| Pose2::from_position(c + dir * reach, (-dir).angle());
    let valid = |p: &Pose2| !scene.robot_hits_wall(p);

    let forward = facing(u);
    let q_a2 = valid(&forward).then_some(forward);

    let plus = facing(u.perp());
    let minus = facing(-u.perp());
    let q_a1 = match (valid(&plus), valid(&minus)) {
        (true, true) => {
            if scene.wall_distance(minus.position()) > scene.wall_distance(plus.position()) {
                Some(minus)
            } else {
                Some(plus)
            }
        }
        (true, false) => Some(plus),
        (false, true) => Some(minus),
        (false, false) => None,
    };
    if q_a1.is_none() && q_a2.is_none() {
        return Err(GrtcError::ApproachInfeasible);
    }
    Ok(ApproachStates { q_a1, q_a2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitingAction,
    PlanningApproach,
    PlanningPush,
    Executing,
    PlanningReach,
    DoneSuccess,
    DoneFailure,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::DoneSuccess | Phase::DoneFailure)
    }
}

/// One planner invocation and its result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanAttempt {
    pub goal: GoalSpec,
    pub time_limit: f64,
    pub planning_time: f64,
    pub plan: Option<Plan>,
    pub error: Option<PlanError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub action: HighLevelAction,
    pub approach_states: Option<ApproachStates>,
    pub approach: Option<PlanAttempt>,
    pub push: Option<PlanAttempt>,
    pub start_state: SystemState,
    pub end_state: SystemState,
    pub succeeded: bool,
    pub failure: Option<String>,
    pub guidance_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachRecord {
    pub attempt: Option<PlanAttempt>,
    pub start_state: SystemState,
    pub end_state: SystemState,
    pub success: bool,
    pub guidance_time: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub proposed_actions: u32,
    pub successful_actions: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionLog {
    pub initial_state: SystemState,
    pub segments: Vec<Segment>,
    pub reach: Option<ReachRecord>,
    pub counters: Counters,
    /// Sum of every planner call's time.
    pub planning_time: f64,
    /// Time spent producing actions, counted or not.
    pub guidance_time: f64,
    /// Planning time of the final reach call alone.
    pub reach_planning_time: f64,
    pub success: bool,
    pub failure: Option<String>,
    pub final_state: SystemState,
}

impl ExecutionLog {
    fn new(q0: &SystemState) -> Self {
        ExecutionLog {
            initial_state: q0.clone(),
            segments: Vec::new(),
            reach: None,
            counters: Counters::default(),
            planning_time: 0.0,
            guidance_time: 0.0,
            reach_planning_time: 0.0,
            success: false,
            failure: None,
            final_state: q0.clone(),
        }
    }

    /// Every planner attempt in call order.
    pub fn attempts(&self) -> impl Iterator<Item = &PlanAttempt> {
        self.segments
            .iter()
            .flat_map(|s| s.approach.iter().chain(s.push.iter()))
            .chain(self.reach.iter().flat_map(|r| r.attempt.iter()))
    }
}

/// Receives progress notifications from a run.
pub trait Observer {
    fn phase(&mut self, _phase: Phase) {}
    fn state(&mut self, _state: &SystemState) {}
    fn segment(&mut self, _segment: &Segment) {}
    fn reach(&mut self, _reach: &ReachRecord) {}
    fn counters(&mut self, _counters: Counters) {}
}

pub struct NoObserver;
impl Observer for NoObserver {}

/// How the guidance phase of a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuidanceOutcome {
    ReachRequested,
    Failed,
}

/// A run in progress. Cloning after the guidance phase lets the reach be
/// attempted several times from the same post-guidance state.
#[derive(Debug, Clone)]
pub struct Grtc<'a> {
    scene: &'a Scene,
    gcfg: GrtcConfig,
    pcfg: PlannerConfig,
    planner: PlannerKind,
    q: SystemState,
    log: ExecutionLog,
    /// Budget consumed so far.
    used: f64,
    calls: u64,
    /// Guidance time of the call that proposed the reach.
    pending_guidance: f64,
}

impl<'a> Grtc<'a> {
    pub fn new(
        scene: &'a Scene,
        q0: &SystemState,
        gcfg: &GrtcConfig,
        pcfg: &PlannerConfig,
        planner: PlannerKind,
    ) -> Result<Self, GrtcError> {
        gcfg.validate()?;
        pcfg.validate().map_err(|e| GrtcError::InvalidConfig(e.to_string()))?;
        scene
            .check_state(q0)
            .map_err(|e| GrtcError::InvalidConfig(e.to_string()))?;
        Ok(Grtc {
            scene,
            gcfg: gcfg.clone(),
            pcfg: pcfg.clone(),
            planner,
            q: q0.clone(),
            log: ExecutionLog::new(q0),
            used: 0.0,
            calls: 0,
            pending_guidance: 0.0,
        })
    }

    pub fn state(&self) -> &SystemState {
        &self.q
    }

    pub fn log(&self) -> &ExecutionLog {
        &self.log
    }

    pub fn remaining(&self) -> f64 {
        self.gcfg.t_overall - self.used
    }

    /// Ask for and carry out actions until the provider proposes the reach,
    /// it fails, or the overall budget runs out.
    pub fn run_guidance(&mut self, guidance: &mut dyn GuidanceProvider, obs: &mut dyn Observer) -> GuidanceOutcome {
        loop {
            if self.remaining() <= 0.0 {
                self.log.failure = Some("overall time limit reached".into());
                return GuidanceOutcome::Failed;
            }
            obs.phase(Phase::AwaitingAction);
            let before = guidance.guidance_time();
            let t0 = Instant::now();
            let answer = guidance.next_high_level_action(self.scene, &self.q);
            let spent = match self.pcfg.clock {
                ClockMode::Wall => t0.elapsed().as_secs_f64(),
                ClockMode::Virtual => guidance.guidance_time() - before,
            };
            self.log.guidance_time += spent;
            if guidance.counts_against_budget() {
                self.used += spent;
            }
            match answer {
                Err(GuidanceError::NoAction) => continue,
                Err(GuidanceError::Failed(msg)) => {
                    self.log.failure = Some(format!("guidance failed: {msg}"));
                    return GuidanceOutcome::Failed;
                }
                Ok(HighLevelAction::ReachGoal) => {
                    self.log.counters.proposed_actions += 1;
                    obs.counters(self.log.counters);
                    self.pending_guidance = spent;
                    return GuidanceOutcome::ReachRequested;
                }
                Ok(action) => {
                    self.log.counters.proposed_actions += 1;
                    obs.counters(self.log.counters);
                    self.attempt_push(action, spent, obs);
                }
            }
        }
    }

    /// Plan with `goal` from the current state under `limit` seconds.
    fn call_planner(&mut self, goal: GoalSpec, limit: f64) -> PlanAttempt {
        let mut cfg = self.pcfg.clone();
        cfg.time_limit = limit;
        cfg.seed = derive_seed(self.gcfg.seed, self.calls);
        self.calls += 1;
        let t0 = Instant::now();
        let result = plan(self.planner, self.scene, &self.q, &goal, &cfg);
        let wall = t0.elapsed().as_secs_f64();
        let planning_time = match (self.pcfg.clock, &result) {
            (ClockMode::Wall, _) => wall,
            (ClockMode::Virtual, Ok(p)) => p.planning_time,
            (ClockMode::Virtual, Err(PlanError::Timeout { elapsed })) => *elapsed,
            (ClockMode::Virtual, Err(_)) => 0.0,
        };
        self.used += planning_time;
        self.log.planning_time += planning_time;
        let (plan, error) = match result {
            Ok(p) => (Some(p), None),
            Err(e) => (None, Some(e)),
        };
        PlanAttempt {
            goal,
            time_limit: limit,
            planning_time,
            plan,
            error,
        }
    }

    /// Re-simulate a plan's controls from the current state and adopt the
    /// result. Returns false if the simulation disagrees with the plan.
    fn execute(&mut self, plan: &Plan, obs: &mut dyn Observer) -> bool {
        let prop = self.pcfg.propagation_for(self.scene);
        let mut s = self.q.clone();
        for c in &plan.controls {
            match propagate(self.scene, &s, c, &prop) {
                Ok(out) if out.valid => s = out.state,
                _ => return false,
            }
        }
        if s != *plan.final_state() {
            return false;
        }
        self.q = s;
        obs.state(&self.q);
        true
    }

    fn check_push(&self, object_id: &str, centroid: Vec2) -> Result<(), GrtcError> {
        let i = self
            .scene
            .index_of(object_id)
            .ok_or_else(|| GrtcError::InvalidAction(format!("unknown object {object_id:?}")))?;
        if i == self.scene.goal {
            return Err(GrtcError::InvalidAction("goal object must use reach".into()));
        }
        if !centroid.is_finite() || !self.scene.workspace.contains(centroid) {
            return Err(GrtcError::InvalidAction("target centroid outside the workspace".into()));
        }
        Ok(())
    }

    /// Plan and execute one push action.
    pub fn attempt_push(&mut self, action: HighLevelAction, guidance_time: f64, obs: &mut dyn Observer) {
        let HighLevelAction::Push { object_id, x, y } = &action else {
            return;
        };
        let centroid = Vec2::new(*x, *y);
        let mut seg = Segment {
            action: action.clone(),
            approach_states: None,
            approach: None,
            push: None,
            start_state: self.q.clone(),
            end_state: self.q.clone(),
            succeeded: false,
            failure: None,
            guidance_time,
        };
        let outcome = self.push_pipeline(object_id, centroid, &mut seg, obs);
        if let Err(reason) = outcome {
            seg.failure = Some(reason);
        } else {
            seg.succeeded = true;
            self.log.counters.successful_actions += 1;
        }
        seg.end_state = self.q.clone();
        obs.segment(&seg);
        obs.counters(self.log.counters);
        self.log.segments.push(seg);
        self.log.final_state = self.q.clone();
    }

    fn push_pipeline(
        &mut self,
        object_id: &str,
        centroid: Vec2,
        seg: &mut Segment,
        obs: &mut dyn Observer,
    ) -> Result<(), String> {
        self.check_push(object_id, centroid).map_err(|e| e.to_string())?;
        obs.phase(Phase::PlanningApproach);
        let approach = compute_approach_states(self.scene, &self.q, object_id, centroid, self.gcfg.approach_clearance)
            .map_err(|e| e.to_string())?;
        seg.approach_states = Some(approach);

        let limit = self.gcfg.t_pushing.min(self.remaining());
        if limit <= 0.0 {
            return Err("overall time limit reached".into());
        }
        let attempt = self.call_planner(GoalSpec::robot_poses(approach.poses()), limit);
        let approach_plan = attempt.plan.clone();
        let err = attempt.error.clone();
        seg.approach = Some(attempt);
        let approach_plan = approach_plan.ok_or_else(|| format!("approach planning failed: {}", err.unwrap()))?;

        obs.phase(Phase::PlanningPush);
        let limit = self.gcfg.t_pushing.min(self.remaining());
        if limit <= 0.0 {
            return Err("overall time limit reached".into());
        }
        let saved = self.q.clone();
        self.q = approach_plan.final_state().clone();
        let goal = GoalSpec::ObjectToRegion {
            object_id: object_id.to_string(),
            centroid,
            diameter: self.gcfg.region_diameter,
        };
        let attempt = self.call_planner(goal, limit);
        self.q = saved;
        let push_plan = attempt.plan.clone();
        let err = attempt.error.clone();
        seg.push = Some(attempt);
        let push_plan = push_plan.ok_or_else(|| format!("push planning failed: {}", err.unwrap()))?;

        obs.phase(Phase::Executing);
        if !self.execute(&approach_plan, obs) || !self.execute(&push_plan, obs) {
            return Err("execution diverged from the plan".into());
        }
        Ok(())
    }

    /// Plan and execute the reach with the remaining overall budget.
    pub fn run_reach(&mut self, obs: &mut dyn Observer) {
        let start = self.q.clone();
        let guidance_time = self.pending_guidance;
        obs.phase(Phase::PlanningReach);
        let limit = self.remaining();
        let mut record = ReachRecord {
            attempt: None,
            start_state: start.clone(),
            end_state: start,
            success: false,
            guidance_time,
        };
        if limit <= 0.0 {
            self.log.failure = Some("overall time limit reached".into());
        } else {
            let attempt = self.call_planner(GoalSpec::ReachGoalObject, limit);
            self.log.reach_planning_time = attempt.planning_time;
            let found = attempt.plan.clone();
            if let Some(err) = &attempt.error {
                self.log.failure = Some(format!("reach planning failed: {err}"));
            }
            record.attempt = Some(attempt);
            if let Some(p) = found {
                obs.phase(Phase::Executing);
                if self.execute(&p, obs) {
                    record.success = grasp_achieved(self.scene, &self.q);
                } else {
                    self.log.failure = Some("execution diverged from the plan".into());
                }
            }
        }
        record.end_state = self.q.clone();
        self.log.success = record.success;
        self.log.final_state = self.q.clone();
        obs.reach(&record);
        self.log.reach = Some(record);
    }

    /// Mark the run as finished and hand back the log.
    pub fn finish(mut self, obs: &mut dyn Observer) -> ExecutionLog {
        self.log.final_state = self.q.clone();
        obs.phase(if self.log.success {
            Phase::DoneSuccess
        } else {
            Phase::DoneFailure
        });
        self.log
    }

    /// Reseed subsequent planner calls; used to repeat the reach from a
    /// shared post-guidance state with different seeds.
    pub fn reseed(&mut self, seed: u64) {
        self.gcfg.seed = seed;
        self.calls = 0;
    }
}

/// Seed for the `call`-th planner invocation of a run.
pub fn derive_seed(seed: u64, call: u64) -> u64 {
    seed ^ call.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Run the full loop: guidance, pushes, then the reach.
pub fn grtc_run(
    scene: &Scene,
    q0: &SystemState,
    guidance: &mut dyn GuidanceProvider,
    gcfg: &GrtcConfig,
    pcfg: &PlannerConfig,
    planner: PlannerKind,
    obs: &mut dyn Observer,
) -> Result<ExecutionLog, GrtcError> {
    let mut run = Grtc::new(scene, q0, gcfg, pcfg, planner)?;
    if run.run_guidance(guidance, obs) == GuidanceOutcome::ReachRequested {
        run.run_reach(obs);
    }
    Ok(run.finish(obs))
}
