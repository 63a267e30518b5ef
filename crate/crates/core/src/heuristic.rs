//! Straight-line guidance: sweep the gripper toward the goal object, find
//! the first object in the way, and propose moving it somewhere off the
//! sweep.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::clock::VIRTUAL_SAMPLE_COST;
use crate::geometry::{min_enclosing_circle, shapes_overlap, swept_contains, Pose2, SweptVolume, Vec2};
use crate::grtc::{GuidanceError, GuidanceProvider, HighLevelAction};
use crate::world::{Scene, SystemState};

pub const MAX_PLACEMENT_SAMPLES: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeuristicError {
    #[error("no collision-free placement after {0} samples")]
    NoPlacement(usize),
    #[error("unknown object {0:?}")]
    UnknownObject(String),
}

/// The robot footprint translated at fixed heading from its current
/// position to the pose that centers the mouth on the goal object.
/// `None` when the robot already sits on that pose's line of approach.
pub fn reach_sweep(scene: &Scene, state: &SystemState) -> Option<SweptVolume> {
    let start = state.robot_pose.position();
    let goal = state.object_poses[scene.goal].position();
    let dir = (goal - start).normalized()?;
    let heading = dir.angle();
    let end = scene.robot.pose_with_mouth_at(goal, heading).position();
    // If the mouth already covers the goal the sweep degenerates to the start.
    let end = if (end - start).dot(dir) > 0.0 { end } else { start };
    Some(SweptVolume::new(scene.robot.footprint(), start, end, heading))
}

/// First-contact parameter of every non-goal object the sweep touches.
pub fn blocking_contacts(scene: &Scene, state: &SystemState, v: &SweptVolume) -> Vec<(usize, f64)> {
    (0..scene.objects.len())
        .filter(|&i| i != scene.goal)
        .filter_map(|i| {
            v.first_contact(&scene.objects[i].shape, &state.object_poses[i])
                .map(|t| (i, t))
        })
        .collect()
}

/// The non-goal object the gripper would hit first on a straight approach
/// to the goal object.
pub fn first_blocking_obstacle(scene: &Scene, state: &SystemState) -> Option<String> {
    let v = reach_sweep(scene, state)?;
    blocking_contacts(scene, state, &v)
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| scene.objects[i].id.clone())
}

/// A successful placement and the number of candidates drawn to find it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub centroid: Vec2,
    pub samples: usize,
}

/// Rejection-sample a centroid for `object_id` where the object, at its
/// current orientation, touches no wall and no other object, and where the
/// centroid lies outside `v`.
pub fn sample_placement(
    scene: &Scene,
    state: &SystemState,
    v: &SweptVolume,
    object_id: &str,
    rng: &mut impl Rng,
) -> Result<Placement, HeuristicError> {
    let i = scene
        .index_of(object_id)
        .ok_or_else(|| HeuristicError::UnknownObject(object_id.to_string()))?;
    let shape = scene.objects[i].shape;
    let pose = state.object_poses[i];
    let r = min_enclosing_circle(&shape, &pose).radius;
    let ws = scene.workspace;
    let (x_hi, y_hi) = (ws.width - r, ws.height - r);
    if x_hi < r || y_hi < r {
        return Err(HeuristicError::NoPlacement(0));
    }
    for k in 1..=MAX_PLACEMENT_SAMPLES {
        let c = Vec2::new(rng.gen_range(r..=x_hi), rng.gen_range(r..=y_hi));
        let candidate = Pose2::from_position(c, pose.theta);
        let hits_wall = scene
            .walls
            .iter()
            .any(|w| shapes_overlap(&shape, &candidate, &w.shape, &w.offset));
        if hits_wall {
            continue;
        }
        let hits_object = (0..scene.objects.len())
            .filter(|&j| j != i)
            .any(|j| shapes_overlap(&shape, &candidate, &scene.objects[j].shape, &state.object_poses[j]));
        if hits_object || swept_contains(v, c) {
            continue;
        }
        return Ok(Placement {
            centroid: c,
            samples: k,
        });
    }
    Err(HeuristicError::NoPlacement(MAX_PLACEMENT_SAMPLES))
}

/// Guidance provider built on [`first_blocking_obstacle`] and
/// [`sample_placement`].
#[derive(Debug, Clone)]
pub struct HeuristicGuidance {
    rng: ChaCha8Rng,
    cost: f64,
    /// Sweep used for the most recent proposal.
    last_sweep: Option<SweptVolume>,
}

impl HeuristicGuidance {
    pub fn new(seed: u64) -> Self {
        HeuristicGuidance {
            rng: ChaCha8Rng::seed_from_u64(seed),
            cost: 0.0,
            last_sweep: None,
        }
    }

    pub fn last_sweep(&self) -> Option<&SweptVolume> {
        self.last_sweep.as_ref()
    }
}

pub fn heuristic_guidance(seed: u64) -> HeuristicGuidance {
    HeuristicGuidance::new(seed)
}

impl GuidanceProvider for HeuristicGuidance {
    fn next_high_level_action(&mut self, scene: &Scene, q: &SystemState) -> Result<HighLevelAction, GuidanceError> {
        self.cost += VIRTUAL_SAMPLE_COST * scene.objects.len() as f64;
        let Some(v) = reach_sweep(scene, q) else {
            return Ok(HighLevelAction::ReachGoal);
        };
        let blocker = blocking_contacts(scene, q, &v)
            .into_iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let Some((i, _)) = blocker else {
            return Ok(HighLevelAction::ReachGoal);
        };
        let id = scene.objects[i].id.clone();
        let result = sample_placement(scene, q, &v, &id, &mut self.rng);
        self.last_sweep = Some(v);
        match result {
            Ok(p) => {
                self.cost += VIRTUAL_SAMPLE_COST * p.samples as f64;
                Ok(HighLevelAction::push(&id, p.centroid))
            }
            Err(HeuristicError::NoPlacement(n)) => {
                self.cost += VIRTUAL_SAMPLE_COST * n as f64;
                Err(GuidanceError::NoAction)
            }
            Err(e) => Err(GuidanceError::Failed(e.to_string())),
        }
    }

    fn guidance_time(&self) -> f64 {
        self.cost
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Shape, Vec2};
    use crate::world::{SceneObject, Workspace};
    use std::f64::consts::PI;

    fn obj(id: &str, shape: Shape) -> SceneObject {
        SceneObject { id: id.into(), shape }
    }

    fn scene(objects: Vec<(SceneObject, Pose2)>) -> Scene {
        Scene::new(Workspace::default(), Pose2::new(0.3, 0.0, PI / 2.0), objects, "o1").unwrap()
    }

    /// Smallest `t` on a 1e-4 grid at which the footprint touches the object.
    fn ray_march(v: &SweptVolume, shape: &Shape, pose: &Pose2) -> Option<f64> {
        (0..=10_000)
            .map(|k| k as f64 * 1e-4)
            .find(|&t| v.parts_at(t).any(|(s, p)| shapes_overlap(&s, &p, shape, pose)))
    }

    #[test]
    fn clear_corridor_has_no_blocker() {
        let s = scene(vec![
            (obj("o1", Shape::circle(0.02).unwrap()), Pose2::new(0.3, 0.3, 0.0)),
            (obj("o2", Shape::circle(0.02).unwrap()), Pose2::new(0.52, 0.2, 0.0)),
            (
                obj("o3", Shape::rectangle(0.02, 0.02).unwrap()),
                Pose2::new(0.08, 0.15, 0.0),
            ),
        ]);
        assert_eq!(first_blocking_obstacle(&s, &s.initial), None);
    }

    #[test]
    fn midpoint_object_blocks() {
        let s = scene(vec![
            (obj("o1", Shape::circle(0.02).unwrap()), Pose2::new(0.3, 0.3, 0.0)),
            (obj("o2", Shape::circle(0.02).unwrap()), Pose2::new(0.3, 0.15, 0.0)),
        ]);
        assert_eq!(first_blocking_obstacle(&s, &s.initial).as_deref(), Some("o2"));
    }

    #[test]
    fn nearer_of_two_straddling_objects_blocks() {
        let s = scene(vec![
            (obj("o1", Shape::circle(0.02).unwrap()), Pose2::new(0.3, 0.38, 0.0)),
            (
                obj("o2", Shape::rectangle(0.02, 0.02).unwrap()),
                Pose2::new(0.34, 0.25, 0.3),
            ),
            (obj("o3", Shape::circle(0.02).unwrap()), Pose2::new(0.27, 0.12, 0.0)),
        ]);
        let v = reach_sweep(&s, &s.initial).unwrap();
        let t2 = ray_march(&v, &s.objects[1].shape, &s.initial.object_poses[1]).unwrap();
        let t3 = ray_march(&v, &s.objects[2].shape, &s.initial.object_poses[2]).unwrap();
        assert!(t3 < t2);
        assert_eq!(first_blocking_obstacle(&s, &s.initial).as_deref(), Some("o3"));
    }

    #[test]
    fn objects_behind_the_goal_do_not_block() {
        let s = scene(vec![
            (obj("o1", Shape::circle(0.02).unwrap()), Pose2::new(0.3, 0.25, 0.0)),
            (obj("o2", Shape::circle(0.02).unwrap()), Pose2::new(0.3, 0.33, 0.0)),
        ]);
        assert_eq!(first_blocking_obstacle(&s, &s.initial), None);
    }

    #[test]
    fn sweep_ends_with_mouth_on_goal() {
        let s = scene(vec![(
            obj("o1", Shape::circle(0.02).unwrap()),
            Pose2::new(0.45, 0.3, 0.0),
        )]);
        let v = reach_sweep(&s, &s.initial).unwrap();
        let end = v.body_pose(1.0);
        let mouth = end.transform_point(s.robot.mouth_center());
        assert!(mouth.distance(Vec2::new(0.45, 0.3)) < 1e-12);
    }

    #[test]
    fn placement_in_open_scene_is_quick_and_clear() {
        let s = scene(vec![
            (obj("o1", Shape::circle(0.02).unwrap()), Pose2::new(0.3, 0.3, 0.0)),
            (
                obj("o2", Shape::rectangle(0.03, 0.02).unwrap()),
                Pose2::new(0.3, 0.15, 0.4),
            ),
        ]);
        let v = SweptVolume::new(s.robot.footprint(), Vec2::new(0.3, 0.0), Vec2::new(0.3, 0.01), PI / 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let p = sample_placement(&s, &s.initial, &v, "o2", &mut rng).unwrap();
            assert!(p.samples <= 20);
            let pose = Pose2::from_position(p.centroid, 0.4);
            assert!(!swept_contains(&v, p.centroid));
            assert!(!shapes_overlap(
                &s.objects[1].shape,
                &pose,
                &s.objects[0].shape,
                &s.initial.object_poses[0]
            ));
            assert!(s
                .walls
                .iter()
                .all(|w| !shapes_overlap(&s.objects[1].shape, &pose, &w.shape, &w.offset)));
        }
    }

    #[test]
    fn placement_fails_when_sweep_covers_workspace() {
        let s = scene(vec![
            (obj("o1", Shape::circle(0.02).unwrap()), Pose2::new(0.3, 0.3, 0.0)),
            (obj("o2", Shape::circle(0.02).unwrap()), Pose2::new(0.3, 0.15, 0.0)),
        ]);
        let big = vec![(Shape::rectangle(1.0, 1.0).unwrap(), Pose2::IDENTITY)];
        let v = SweptVolume::new(big, Vec2::new(0.3, 0.2), Vec2::new(0.3, 0.2), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            sample_placement(&s, &s.initial, &v, "o2", &mut rng),
            Err(HeuristicError::NoPlacement(MAX_PLACEMENT_SAMPLES))
        );
    }

    #[test]
    fn provider_reaches_when_nothing_blocks() {
        let s = scene(vec![(
            obj("o1", Shape::circle(0.02).unwrap()),
            Pose2::new(0.3, 0.3, 0.0),
        )]);
        let mut h = heuristic_guidance(0);
        assert_eq!(
            h.next_high_level_action(&s, &s.initial).unwrap(),
            HighLevelAction::ReachGoal
        );
    }

    #[test]
    fn provider_pushes_blocker_off_sweep() {
        let s = scene(vec![
            (obj("o1", Shape::circle(0.02).unwrap()), Pose2::new(0.3, 0.3, 0.0)),
            (obj("o2", Shape::circle(0.02).unwrap()), Pose2::new(0.3, 0.15, 0.0)),
        ]);
        let mut h = heuristic_guidance(4);
        for _ in 0..20 {
            match h.next_high_level_action(&s, &s.initial).unwrap() {
                HighLevelAction::Push { object_id, x, y } => {
                    assert_eq!(object_id, "o2");
                    assert!(!swept_contains(h.last_sweep().unwrap(), Vec2::new(x, y)));
                }
                other => panic!("unexpected {other:?}"),
            }
        }
        assert!(h.guidance_time() > 0.0);
    }
}
