use std::sync::mpsc;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Instant;

use serde::Serialize;
use tokio::sync::broadcast;

use grtc_core::geometry::Vec2;
use grtc_core::grtc::{
    Counters, ExecutionLog, Grtc, GrtcConfig, GuidanceError, GuidanceOutcome, GuidanceProvider, HighLevelAction,
    Observer, Phase, ReachRecord, Segment,
};
use grtc_core::planners::{PlannerConfig, PlannerKind};
use grtc_core::world::{Scene, SystemState};

const EVENT_CAPACITY: usize = 4096;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Whether operator think time is charged to the overall budget.
    pub budget_includes_human: bool,
    pub gcfg: GrtcConfig,
    pub pcfg: PlannerConfig,
    pub planner: PlannerKind,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            budget_includes_human: false,
            gcfg: GrtcConfig::default(),
            pcfg: PlannerConfig::default(),
            planner: PlannerKind::Rrt,
        }
    }
}

/// Event published on a session's stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServiceEvent {
    Snapshot {
        phase: Phase,
        state: SystemState,
        counters: Counters,
    },
    PhaseChange {
        phase: Phase,
    },
    StateUpdate {
        state: SystemState,
    },
    PlanSegment {
        #[serde(skip_serializing_if = "Option::is_none")]
        segment: Option<Box<Segment>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        reach: Option<Box<ReachRecord>>,
    },
    Counters {
        counters: Counters,
    },
    Terminal {
        phase: Phase,
        success: bool,
        failure: Option<String>,
    },
    Error {
        message: String,
    },
}

impl ServiceEvent {
    pub fn name(&self) -> &'static str {
        match self {
            ServiceEvent::Snapshot { .. } => "snapshot",
            ServiceEvent::PhaseChange { .. } => "phase_change",
            ServiceEvent::StateUpdate { .. } => "state_update",
            ServiceEvent::PlanSegment { .. } => "plan_segment",
            ServiceEvent::Counters { .. } => "counters",
            ServiceEvent::Terminal { .. } => "terminal",
            ServiceEvent::Error { .. } => "error",
        }
    }
}

/// Response body of `GET /sessions/{id}/state`.
#[derive(Debug, Clone, Serialize)]
pub struct StateView {
    pub phase: Phase,
    /// Whether `submit_action` would currently accept an action.
    pub accepting_actions: bool,
    pub state: SystemState,
    pub counters: Counters,
    pub planning_time: f64,
    pub guidance_time: f64,
    pub t_overall: f64,
    pub t_pushing: f64,
    pub remaining: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rejection {
    NotFound,
    /// Not the right moment: pipeline running or session finished.
    Conflict(String),
    Invalid(String),
}

struct Shared {
    phase: Phase,
    /// An accepted action has not yet been picked up and finished.
    busy: bool,
    state: SystemState,
    log: ExecutionLog,
}

pub struct Session {
    pub id: String,
    scene: Arc<Scene>,
    config: ServiceConfig,
    shared: Mutex<Shared>,
    events: broadcast::Sender<ServiceEvent>,
    actions: Mutex<mpsc::Sender<HighLevelAction>>,
}

impl Session {
    /// Create the session and start its worker thread, which runs the
    /// guidance loop with actions fed through `submit_action`.
    pub fn start(id: String, scene: Scene, config: ServiceConfig) -> Result<Arc<Session>, String> {
        let scene = Arc::new(scene);
        // Fail early on configuration errors rather than in the worker.
        Grtc::new(&scene, &scene.initial, &config.gcfg, &config.pcfg, config.planner).map_err(|e| e.to_string())?;
        let (tx, rx) = mpsc::channel();
        let (events, _) = broadcast::channel(EVENT_CAPACITY);
        let session = Arc::new(Session {
            id,
            scene: scene.clone(),
            config,
            shared: Mutex::new(Shared {
                phase: Phase::AwaitingAction,
                busy: false,
                state: scene.initial.clone(),
                log: empty_log(&scene.initial),
            }),
            events,
            actions: Mutex::new(tx),
        });
        let worker = session.clone();
        std::thread::spawn(move || worker.run(rx));
        Ok(session)
    }

    fn lock(&self) -> MutexGuard<'_, Shared> {
        self.shared.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Apply `f` and broadcast its event while holding the lock, so a
    /// subscriber's snapshot and the live stream never overlap or gap.
    fn publish(&self, f: impl FnOnce(&mut Shared) -> Vec<ServiceEvent>) {
        let mut g = self.lock();
        for ev in f(&mut g) {
            let _ = self.events.send(ev);
        }
    }

    fn run(self: Arc<Self>, rx: mpsc::Receiver<HighLevelAction>) {
        let scene = self.scene.clone();
        let mut guidance = ChannelGuidance {
            rx,
            waited: 0.0,
            counts: self.config.budget_includes_human,
        };
        let mut obs = Publisher {
            session: &self,
            terminal: Phase::DoneFailure,
        };
        let log = match Grtc::new(
            &scene,
            &scene.initial,
            &self.config.gcfg,
            &self.config.pcfg,
            self.config.planner,
        ) {
            Ok(mut run) => {
                if run.run_guidance(&mut guidance, &mut obs) == GuidanceOutcome::ReachRequested {
                    run.run_reach(&mut obs);
                }
                run.finish(&mut obs)
            }
            Err(e) => {
                obs.phase(Phase::DoneFailure);
                let mut log = empty_log(&scene.initial);
                log.failure = Some(e.to_string());
                log
            }
        };
        // The terminal phase, the final log and the terminal event become
        // visible together.
        let phase = obs.terminal;
        self.publish(|s| {
            s.busy = false;
            s.phase = phase;
            s.state = log.final_state.clone();
            let ev = ServiceEvent::Terminal {
                phase,
                success: log.success,
                failure: log.failure.clone(),
            };
            s.log = log;
            vec![ServiceEvent::PhaseChange { phase }, ev]
        });
    }

    /// Validate an operator action and hand it to the worker.
    pub fn submit_action(&self, action: HighLevelAction) -> Result<(), Rejection> {
        let mut g = self.lock();
        if g.phase.is_terminal() {
            return Err(Rejection::Conflict("session has finished".into()));
        }
        if g.phase != Phase::AwaitingAction || g.busy {
            return Err(Rejection::Conflict("an action is already being planned".into()));
        }
        if let HighLevelAction::Push { object_id, x, y } = &action {
            let i = self
                .scene
                .index_of(object_id)
                .ok_or_else(|| Rejection::Invalid(format!("unknown object {object_id:?}")))?;
            if i == self.scene.goal {
                return Err(Rejection::Invalid("goal object must use reach".into()));
            }
            let c = Vec2::new(*x, *y);
            if !c.is_finite() || !self.scene.workspace.contains(c) {
                return Err(Rejection::Invalid("target centroid outside the workspace".into()));
            }
        }
        let sender = self.actions.lock().unwrap_or_else(|e| e.into_inner());
        sender
            .send(action)
            .map_err(|_| Rejection::Conflict("session worker has stopped".into()))?;
        g.busy = true;
        Ok(())
    }

    /// Subscribe to live events. The returned snapshot reflects every event
    /// sent before the subscription and none after.
    pub fn subscribe(&self) -> (ServiceEvent, bool, broadcast::Receiver<ServiceEvent>) {
        let g = self.lock();
        let rx = self.events.subscribe();
        let snap = ServiceEvent::Snapshot {
            phase: g.phase,
            state: g.state.clone(),
            counters: g.log.counters,
        };
        (snap, g.phase.is_terminal(), rx)
    }

    pub fn state_view(&self) -> StateView {
        let g = self.lock();
        let gcfg = &self.config.gcfg;
        let human = if self.config.budget_includes_human {
            g.log.guidance_time
        } else {
            0.0
        };
        StateView {
            phase: g.phase,
            accepting_actions: g.phase == Phase::AwaitingAction && !g.busy,
            state: g.state.clone(),
            counters: g.log.counters,
            planning_time: g.log.planning_time,
            guidance_time: g.log.guidance_time,
            t_overall: gcfg.t_overall,
            t_pushing: gcfg.t_pushing,
            remaining: gcfg.t_overall - g.log.planning_time - human,
        }
    }

    pub fn phase(&self) -> Phase {
        self.lock().phase
    }

    /// The execution log; final once the session is in a terminal phase.
    pub fn log(&self) -> ExecutionLog {
        self.lock().log.clone()
    }

    /// Object whose shape contains `p` in the current state.
    pub fn pick(&self, p: Vec2) -> Option<(String, bool)> {
        let g = self.lock();
        self.scene
            .objects
            .iter()
            .zip(&g.state.object_poses)
            .enumerate()
            .find(|(_, (o, pose))| o.shape.contains_point(pose, p))
            .map(|(i, (o, _))| (o.id.clone(), i == self.scene.goal))
    }
}

fn empty_log(q0: &SystemState) -> ExecutionLog {
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

/// Blocks until the operator submits the next action.
struct ChannelGuidance {
    rx: mpsc::Receiver<HighLevelAction>,
    waited: f64,
    counts: bool,
}

impl GuidanceProvider for ChannelGuidance {
    fn next_high_level_action(&mut self, _: &Scene, _: &SystemState) -> Result<HighLevelAction, GuidanceError> {
        let t0 = Instant::now();
        let r = self.rx.recv();
        self.waited += t0.elapsed().as_secs_f64();
        r.map_err(|_| GuidanceError::Failed("operator disconnected".into()))
    }

    fn guidance_time(&self) -> f64 {
        self.waited
    }

    fn counts_against_budget(&self) -> bool {
        self.counts
    }
}

/// Mirrors loop progress into the session and its event stream.
struct Publisher<'a> {
    session: &'a Session,
    /// Terminal phase reported by the loop, published with the final log.
    terminal: Phase,
}

impl Observer for Publisher<'_> {
    fn phase(&mut self, phase: Phase) {
        if phase.is_terminal() {
            self.terminal = phase;
            return;
        }
        self.session.publish(|s| {
            if s.phase == phase {
                return vec![];
            }
            if phase == Phase::AwaitingAction {
                s.busy = false;
            }
            s.phase = phase;
            vec![ServiceEvent::PhaseChange { phase }]
        });
    }

    fn state(&mut self, state: &SystemState) {
        self.session.publish(|s| {
            s.state = state.clone();
            s.log.final_state = state.clone();
            vec![ServiceEvent::StateUpdate { state: state.clone() }]
        });
    }

    fn segment(&mut self, segment: &Segment) {
        self.session.publish(|s| {
            s.log.planning_time += segment
                .approach
                .iter()
                .chain(&segment.push)
                .map(|a| a.planning_time)
                .sum::<f64>();
            s.log.guidance_time += segment.guidance_time;
            s.log.segments.push(segment.clone());
            vec![ServiceEvent::PlanSegment {
                segment: Some(Box::new(segment.clone())),
                reach: None,
            }]
        });
    }

    fn reach(&mut self, reach: &ReachRecord) {
        self.session.publish(|s| {
            s.log.planning_time += reach.attempt.as_ref().map_or(0.0, |a| a.planning_time);
            s.log.guidance_time += reach.guidance_time;
            s.log.reach = Some(reach.clone());
            vec![ServiceEvent::PlanSegment {
                segment: None,
                reach: Some(Box::new(reach.clone())),
            }]
        });
    }

    fn counters(&mut self, counters: Counters) {
        self.session.publish(|s| {
            s.log.counters = counters;
            vec![ServiceEvent::Counters { counters }]
        });
    }
}
