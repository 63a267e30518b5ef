//! Benchmark sweeps, per-trial records and summary statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grtc::{
    grtc_run, ExecutionLog, Grtc, GrtcConfig, GuidanceOutcome, HighLevelAction, NoObserver, ScriptedGuidance,
};
use crate::heuristic::{blocking_contacts, first_blocking_obstacle, reach_sweep, sample_placement, HeuristicGuidance};
use crate::planners::{plan, GoalSpec, Plan, PlanError, PlannerConfig, PlannerKind};
use crate::scenegen::{generate_scene, SceneParams, ScenegenError};
use crate::world::{grasp_achieved, Scene, WorldError};

/// Placements drawn per blocker when building an oracle script.
pub const ORACLE_POOL: usize = 64;
/// Nearest placements from the pool that are actually tried.
pub const ORACLE_CANDIDATES: usize = 6;
/// Upper bound on pushes in an oracle script.
pub const ORACLE_MAX_PUSHES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Approach {
    Rrt,
    Kpiece,
    GrtcHeuristic,
    GrtcScripted,
    GrtcHitl,
}

impl Approach {
    pub fn as_str(self) -> &'static str {
        match self {
            Approach::Rrt => "rrt",
            Approach::Kpiece => "kpiece",
            Approach::GrtcHeuristic => "grtc-heuristic",
            Approach::GrtcScripted => "grtc-scripted",
            Approach::GrtcHitl => "grtc-hitl",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Approach {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [
            Approach::Rrt,
            Approach::Kpiece,
            Approach::GrtcHeuristic,
            Approach::GrtcScripted,
            Approach::GrtcHitl,
        ]
        .into_iter()
        .find(|a| a.as_str() == s)
        .ok_or_else(|| format!("unknown approach {s:?}"))
    }
}

/// One trial. Serializes to the CSV columns in field order; the trailing
/// fields are in-memory only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scene_id: String,
    pub approach: Approach,
    pub seed: u64,
    pub success: bool,
    pub planning_time: f64,
    pub guidance_time: f64,
    pub proposed_actions: u32,
    pub successful_actions: u32,
    /// Planning time of the final reach (the whole call for raw planners).
    #[serde(skip)]
    pub reach_planning_time: f64,
    #[serde(skip)]
    pub plan: Option<Plan>,
    #[serde(skip)]
    pub log: Option<ExecutionLog>,
    #[serde(skip)]
    pub error: Option<String>,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no records to summarize")]
    Empty,
    #[error("trials_per_scene must be at least 1")]
    NoTrials,
    #[error("approach {0} cannot run unattended")]
    Interactive(Approach),
    #[error("scene {0} has no script")]
    MissingScript(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scene error: {0}")]
    World(#[from] WorldError),
    #[error("generation failed: {0}")]
    Scenegen(#[from] ScenegenError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// A scene plus the operator script used by `grtc-scripted`.
#[derive(Debug, Clone)]
pub struct BenchScene {
    pub id: String,
    pub scene: Scene,
    pub script: Option<Vec<HighLevelAction>>,
}

impl BenchScene {
    /// Load `<dir>/<id>.json` and, if present, `<dir>/<id>.script.json`.
    pub fn load(path: &Path) -> Result<BenchScene, BenchError> {
        let scene = Scene::from_json(&std::fs::read_to_string(path)?)?;
        let id = scene_id_of(path);
        let script_path = path.with_file_name(format!("{id}.script.json"));
        let script = if script_path.exists() {
            Some(serde_json::from_str(&std::fs::read_to_string(script_path)?)?)
        } else {
            None
        };
        Ok(BenchScene { id, scene, script })
    }
}

/// File stem of a scene path, e.g. `scenes/S3.json` → `S3`.
pub fn scene_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Whether a path names a scene file rather than a script.
pub fn is_scene_file(path: &Path) -> bool {
    let name = path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default();
    name.ends_with(".json") && !name.ends_with(".script.json")
}

/// Generated scenes `S1`..`Sn`, scene `k` using seed `seed + k - 1`.
pub fn generate_suite(n: usize, n_objects: usize, seed: u64) -> Result<Vec<(String, Scene)>, BenchError> {
    (1..=n)
        .map(|k| {
            let params = SceneParams {
                n_objects,
                seed: seed + k as u64 - 1,
                ..SceneParams::default()
            };
            Ok((format!("S{k}"), generate_scene(&params)?))
        })
        .collect()
}

/// Build an operator script by lookahead: repeatedly take the first object
/// blocking the straight approach, try the placements nearest to it until
/// one can be planned and executed and leaves the object out of the way,
/// then move on.
/// Ends with the reach. Planner seeds follow `gcfg.seed`, so replaying the
/// script with the same configuration reproduces the verified pushes.
pub fn build_oracle_script(
    scene: &Scene,
    gcfg: &GrtcConfig,
    pcfg: &PlannerConfig,
    planner: PlannerKind,
) -> Result<Vec<HighLevelAction>, BenchError> {
    let mut run =
        Grtc::new(scene, &scene.initial, gcfg, pcfg, planner).map_err(|e| BenchError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(gcfg.seed);
    let mut script = Vec::new();
    'outer: while script.len() < ORACLE_MAX_PUSHES {
        let q = run.state().clone();
        let Some(v) = reach_sweep(scene, &q) else { break };
        let Some((blocker, _)) = blocking_contacts(scene, &q, &v)
            .into_iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        else {
            break;
        };
        let id = scene.objects[blocker].id.clone();
        let from = q.object_poses[blocker].position();
        let mut pool: Vec<_> = (0..ORACLE_POOL)
            .filter_map(|_| sample_placement(scene, &q, &v, &id, &mut rng).ok())
            .map(|p| p.centroid)
            .collect();
        pool.sort_by(|a, b| (*a - from).norm().total_cmp(&(*b - from).norm()));
        for c in pool.into_iter().take(ORACLE_CANDIDATES) {
            let action = HighLevelAction::push(&id, c);
            let mut trial = run.clone();
            trial.attempt_push(action.clone(), 0.0, &mut NoObserver);
            let pushed = trial.log().segments.last().is_some_and(|s| s.succeeded);
            if pushed && first_blocking_obstacle(scene, trial.state()).as_deref() != Some(id.as_str()) {
                run = trial;
                script.push(action);
                continue 'outer;
            }
        }
        break;
    }
    script.push(HighLevelAction::ReachGoal);
    Ok(script)
}

fn planner_record(scene: &BenchScene, approach: Approach, seed: u64, result: Result<Plan, PlanError>) -> TrialRecord {
    let (success, time, plan, error) = match result {
        Ok(p) => (
            grasp_achieved(&scene.scene, p.final_state()),
            p.planning_time,
            Some(p),
            None,
        ),
        Err(PlanError::Timeout { elapsed }) => (false, elapsed, None, Some("timeout".to_string())),
        Err(e) => (false, 0.0, None, Some(e.to_string())),
    };
    TrialRecord {
        scene_id: scene.id.clone(),
        approach,
        seed,
        success,
        planning_time: time,
        guidance_time: 0.0,
        proposed_actions: 0,
        successful_actions: 0,
        reach_planning_time: time,
        plan,
        log: None,
        error,
    }
}

fn log_record(scene: &BenchScene, approach: Approach, seed: u64, log: ExecutionLog) -> TrialRecord {
    TrialRecord {
        scene_id: scene.id.clone(),
        approach,
        seed,
        success: log.success,
        planning_time: log.planning_time,
        guidance_time: log.guidance_time,
        proposed_actions: log.counters.proposed_actions,
        successful_actions: log.counters.successful_actions,
        reach_planning_time: log.reach_planning_time,
        plan: None,
        error: log.failure.clone(),
        log: Some(log),
    }
}

fn failed_record(scene: &BenchScene, approach: Approach, seed: u64, error: String) -> TrialRecord {
    TrialRecord {
        scene_id: scene.id.clone(),
        approach,
        seed,
        success: false,
        planning_time: 0.0,
        guidance_time: 0.0,
        proposed_actions: 0,
        successful_actions: 0,
        reach_planning_time: 0.0,
        plan: None,
        log: None,
        error: Some(error),
    }
}

/// Run every (scene, approach) pair `trials` times with seeds
/// `base_seed + i`. Raw planners get `gcfg.t_overall` as their time limit.
/// `grtc-scripted` plays the scene's script once with seed `base_seed` and
/// then repeats only the reach from the post-guidance state. Each record is
/// passed to `sink` as soon as it exists; records come out ordered by
/// scene, approach, trial.
pub fn run_benchmark(
    scenes: &[BenchScene],
    approaches: &[Approach],
    trials: usize,
    base_seed: u64,
    gcfg: &GrtcConfig,
    pcfg: &PlannerConfig,
    planner: PlannerKind,
    sink: &mut dyn FnMut(&TrialRecord) -> Result<(), BenchError>,
) -> Result<Vec<TrialRecord>, BenchError> {
    if trials == 0 {
        return Err(BenchError::NoTrials);
    }
    if let Some(&a) = approaches.iter().find(|&&a| a == Approach::GrtcHitl) {
        return Err(BenchError::Interactive(a));
    }
    gcfg.validate().map_err(|e| BenchError::Config(e.to_string()))?;
    pcfg.validate().map_err(|e| BenchError::Config(e.to_string()))?;
    for s in scenes {
        if approaches.contains(&Approach::GrtcScripted) && s.script.is_none() {
            return Err(BenchError::MissingScript(s.id.clone()));
        }
    }
    let mut out = Vec::new();
    for s in scenes {
        for &approach in approaches {
            let records = run_pair(s, approach, trials, base_seed, gcfg, pcfg, planner, sink)?;
            out.extend(records);
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn run_pair(
    s: &BenchScene,
    approach: Approach,
    trials: usize,
    base_seed: u64,
    gcfg: &GrtcConfig,
    pcfg: &PlannerConfig,
    planner: PlannerKind,
    sink: &mut dyn FnMut(&TrialRecord) -> Result<(), BenchError>,
) -> Result<Vec<TrialRecord>, BenchError> {
    let mut out = Vec::with_capacity(trials);
    let mut emit = |r: TrialRecord, out: &mut Vec<TrialRecord>| -> Result<(), BenchError> {
        sink(&r)?;
        out.push(r);
        Ok(())
    };
    match approach {
        Approach::Rrt | Approach::Kpiece => {
            let kind = if approach == Approach::Rrt {
                PlannerKind::Rrt
            } else {
                PlannerKind::Kpiece
            };
            for i in 0..trials {
                let seed = base_seed + i as u64;
                let cfg = PlannerConfig {
                    seed,
                    time_limit: gcfg.t_overall,
                    ..pcfg.clone()
                };
                let result = plan(kind, &s.scene, &s.scene.initial, &GoalSpec::ReachGoalObject, &cfg);
                emit(planner_record(s, approach, seed, result), &mut out)?;
            }
        }
        Approach::GrtcHeuristic => {
            for i in 0..trials {
                let seed = base_seed + i as u64;
                let g = GrtcConfig { seed, ..gcfg.clone() };
                let mut guidance = HeuristicGuidance::new(seed);
                let r = match grtc_run(
                    &s.scene,
                    &s.scene.initial,
                    &mut guidance,
                    &g,
                    pcfg,
                    planner,
                    &mut NoObserver,
                ) {
                    Ok(log) => log_record(s, approach, seed, log),
                    Err(e) => failed_record(s, approach, seed, e.to_string()),
                };
                emit(r, &mut out)?;
            }
        }
        Approach::GrtcScripted => {
            let script = s
                .script
                .clone()
                .ok_or_else(|| BenchError::MissingScript(s.id.clone()))?;
            let g = GrtcConfig {
                seed: base_seed,
                ..gcfg.clone()
            };
            let prepared = ScriptedGuidance::new(script).and_then(|mut guidance| {
                let mut run = Grtc::new(&s.scene, &s.scene.initial, &g, pcfg, planner)?;
                let outcome = run.run_guidance(&mut guidance, &mut NoObserver);
                Ok((run, outcome))
            });
            for i in 0..trials {
                let seed = base_seed + i as u64;
                let r = match &prepared {
                    Ok((run, outcome)) => {
                        let mut run = run.clone();
                        if *outcome == GuidanceOutcome::ReachRequested {
                            run.reseed(seed);
                            run.run_reach(&mut NoObserver);
                        }
                        log_record(s, approach, seed, run.finish(&mut NoObserver))
                    }
                    Err(e) => failed_record(s, approach, seed, e.to_string()),
                };
                emit(r, &mut out)?;
            }
        }
        Approach::GrtcHitl => return Err(BenchError::Interactive(approach)),
    }
    Ok(out)
}

/// Streams records to CSV, flushing after each one.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(w: W) -> Self {
        CsvSink {
            writer: csv::Writer::from_writer(w),
        }
    }

    pub fn write(&mut self, r: &TrialRecord) -> Result<(), BenchError> {
        self.writer.serialize(r)?;
        self.writer.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W, BenchError> {
        self.writer.into_inner().map_err(|e| BenchError::Io(e.into_error()))
    }
}

pub fn records_to_csv(records: &[TrialRecord]) -> Result<String, BenchError> {
    let mut sink = CsvSink::new(Vec::new());
    for r in records {
        sink.write(r)?;
    }
    Ok(String::from_utf8(sink.into_inner()?).expect("csv output is utf-8"))
}

pub fn read_records(r: impl Read) -> Result<Vec<TrialRecord>, BenchError> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(BenchError::from))
        .collect()
}

/// Mean, sample standard deviation and normal-approximation 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub std: f64,
    pub ci95: f64,
}

impl MetricStats {
    /// Values are sorted before summing so the result does not depend on
    /// input order.
    pub fn of(values: &[f64]) -> MetricStats {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() > 1 {
            let mut sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
            sq.sort_by(f64::total_cmp);
            (sq.iter().sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MetricStats {
            mean,
            std,
            ci95: 1.96 * std / n.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    /// `None` for the pooled row of an approach.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_id: Option<String>,
    pub approach: Approach,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub planning_time: MetricStats,
    pub guidance_time: MetricStats,
    pub proposed_actions: MetricStats,
    pub successful_actions: MetricStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchStats {
    pub per_scene: Vec<GroupStats>,
    pub overall: Vec<GroupStats>,
}

impl BenchStats {
    pub fn overall_for(&self, approach: Approach) -> Option<&GroupStats> {
        self.overall.iter().find(|g| g.approach == approach)
    }

    pub fn scene(&self, scene_id: &str, approach: Approach) -> Option<&GroupStats> {
        self.per_scene
            .iter()
            .find(|g| g.approach == approach && g.scene_id.as_deref() == Some(scene_id))
    }
}

fn group(scene_id: Option<String>, approach: Approach, rs: &[&TrialRecord]) -> GroupStats {
    let col = |f: fn(&TrialRecord) -> f64| MetricStats::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
    let successes = rs.iter().filter(|r| r.success).count();
    GroupStats {
        scene_id,
        approach,
        trials: rs.len(),
        successes,
        success_rate: successes as f64 / rs.len() as f64,
        planning_time: col(|r| r.planning_time),
        guidance_time: col(|r| r.guidance_time),
        proposed_actions: col(|r| r.proposed_actions as f64),
        successful_actions: col(|r| r.successful_actions as f64),
    }
}

/// Per-(scene, approach) and per-approach statistics, in sorted key order.
pub fn summarize(records: &[TrialRecord]) -> Result<BenchStats, BenchError> {
    if records.is_empty() {
        return Err(BenchError::Empty);
    }
    let mut by_scene: BTreeMap<(String, Approach), Vec<&TrialRecord>> = BTreeMap::new();
    let mut by_approach: BTreeMap<Approach, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        by_scene.entry((r.scene_id.clone(), r.approach)).or_default().push(r);
        by_approach.entry(r.approach).or_default().push(r);
    }
    Ok(BenchStats {
        per_scene: by_scene
            .into_iter()
            .map(|((id, a), rs)| group(Some(id), a, &rs))
            .collect(),
        overall: by_approach.into_iter().map(|(a, rs)| group(None, a, &rs)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ClockMode;

    fn record(scene: &str, approach: Approach, t: f64, success: bool) -> TrialRecord {
        TrialRecord {
            scene_id: scene.into(),
            approach,
            seed: 0,
            success,
            planning_time: t,
            guidance_time: 0.0,
            proposed_actions: 1,
            successful_actions: 0,
            reach_planning_time: t,
            plan: None,
            log: None,
            error: None,
        }
    }

    #[test]
    fn textbook_stats() {
        let m = MetricStats::of(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert_eq!(m.std, 1.0);
        assert!((m.ci95 - 1.96 / 3f64.sqrt()).abs() < 1e-12);
        assert!((m.ci95 - 1.13161).abs() < 1e-5);
        assert_eq!(MetricStats::of(&[4.0]).std, 0.0);
    }

    #[test]
    fn success_rate_and_grouping() {
        let rs = vec![
            record("S1", Approach::Rrt, 1.0, true),
            record("S1", Approach::Rrt, 2.0, true),
            record("S2", Approach::Rrt, 3.0, false),
            record("S1", Approach::Kpiece, 1.0, true),
        ];
        let st = summarize(&rs).unwrap();
        assert_eq!(st.scene("S1", Approach::Rrt).unwrap().success_rate, 1.0);
        assert_eq!(st.scene("S2", Approach::Rrt).unwrap().success_rate, 0.0);
        let all = st.overall_for(Approach::Rrt).unwrap();
        assert_eq!(all.trials, 3);
        assert!((all.success_rate - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(st.per_scene.len(), 3);
    }

    #[test]
    fn empty_summary_is_an_error() {
        assert!(matches!(summarize(&[]), Err(BenchError::Empty)));
    }

    #[test]
    fn csv_columns_in_order_and_round_trip() {
        let rs = vec![record("S1", Approach::GrtcScripted, 0.5, true)];
        let text = records_to_csv(&rs).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(
            header,
            "scene_id,approach,seed,success,planning_time,guidance_time,proposed_actions,successful_actions"
        );
        assert!(text.lines().nth(1).unwrap().starts_with("S1,grtc-scripted,0,true,0.5,"));
        let back = read_records(text.as_bytes()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(records_to_csv(&back).unwrap(), text);
    }

    #[test]
    fn approach_names_round_trip() {
        for a in [
            Approach::Rrt,
            Approach::Kpiece,
            Approach::GrtcHeuristic,
            Approach::GrtcScripted,
            Approach::GrtcHitl,
        ] {
            assert_eq!(a.as_str().parse::<Approach>().unwrap(), a);
        }
        assert!("nope".parse::<Approach>().is_err());
    }

    fn empty_bench_scene() -> BenchScene {
        let scene = Scene::from_json(include_str!("../../../scenes/S-empty.json")).unwrap();
        BenchScene {
            id: "S-empty".into(),
            scene,
            script: Some(vec![HighLevelAction::ReachGoal]),
        }
    }

    fn quick_cfgs() -> (GrtcConfig, PlannerConfig) {
        let g = GrtcConfig {
            t_overall: 5.0,
            t_pushing: 2.0,
            ..GrtcConfig::default()
        };
        let p = PlannerConfig {
            clock: ClockMode::Virtual,
            ..PlannerConfig::default()
        };
        (g, p)
    }

    #[test]
    fn seeds_follow_trial_index_and_records_stream() {
        let scenes = [empty_bench_scene()];
        let (g, p) = quick_cfgs();
        let mut streamed = Vec::new();
        let rs = run_benchmark(&scenes, &[Approach::Rrt], 3, 40, &g, &p, PlannerKind::Rrt, &mut |r| {
            streamed.push(r.seed);
            Ok(())
        })
        .unwrap();
        assert_eq!(rs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![40, 41, 42]);
        assert_eq!(streamed, vec![40, 41, 42]);
    }

    #[test]
    fn identical_invocations_give_identical_records() {
        let scenes = [empty_bench_scene()];
        let (g, p) = quick_cfgs();
        let approaches = [Approach::Kpiece, Approach::GrtcHeuristic, Approach::GrtcScripted];
        let run = || run_benchmark(&scenes, &approaches, 2, 7, &g, &p, PlannerKind::Rrt, &mut |_| Ok(())).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(records_to_csv(&a).unwrap(), records_to_csv(&b).unwrap());
        let order: Vec<_> = a.iter().map(|r| (r.approach, r.seed)).collect();
        assert_eq!(
            order,
            vec![
                (Approach::Kpiece, 7),
                (Approach::Kpiece, 8),
                (Approach::GrtcHeuristic, 7),
                (Approach::GrtcHeuristic, 8),
                (Approach::GrtcScripted, 7),
                (Approach::GrtcScripted, 8),
            ]
        );
    }

    #[test]
    fn rejects_unrunnable_requests() {
        let mut scenes = [empty_bench_scene()];
        let (g, p) = quick_cfgs();
        let mut sink = |_: &TrialRecord| Ok(());
        assert!(matches!(
            run_benchmark(&scenes, &[Approach::Rrt], 0, 0, &g, &p, PlannerKind::Rrt, &mut sink),
            Err(BenchError::NoTrials)
        ));
        assert!(matches!(
            run_benchmark(
                &scenes,
                &[Approach::GrtcHitl],
                1,
                0,
                &g,
                &p,
                PlannerKind::Rrt,
                &mut sink
            ),
            Err(BenchError::Interactive(_))
        ));
        scenes[0].script = None;
        assert!(matches!(
            run_benchmark(
                &scenes,
                &[Approach::GrtcScripted],
                1,
                0,
                &g,
                &p,
                PlannerKind::Rrt,
                &mut sink
            ),
            Err(BenchError::MissingScript(_))
        ));
    }

    #[test]
    fn oracle_script_clears_the_blocker() {
        let scene = Scene::from_json(include_str!("../../../scenes/S-blocked.json")).unwrap();
        let g = GrtcConfig {
            t_overall: 1e6,
            t_pushing: 5.0,
            ..GrtcConfig::default()
        };
        let p = PlannerConfig {
            clock: ClockMode::Virtual,
            ..PlannerConfig::default()
        };
        let script = build_oracle_script(&scene, &g, &p, PlannerKind::Rrt).unwrap();
        assert_eq!(script.last(), Some(&HighLevelAction::ReachGoal));
        assert!(script.len() >= 2);
        let mut run = Grtc::new(&scene, &scene.initial, &g, &p, PlannerKind::Rrt).unwrap();
        let mut guidance = ScriptedGuidance::new(script.clone()).unwrap();
        assert_eq!(
            run.run_guidance(&mut guidance, &mut NoObserver),
            GuidanceOutcome::ReachRequested
        );
        let pushes = script.len() as u32 - 1;
        assert_eq!(run.log().counters.successful_actions, pushes);
    }
}
