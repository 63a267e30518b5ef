//! Scene description, composite system state, controls, state validity and
//! the grasp predicate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{contact, shapes_overlap, Pose2, Shape, Vec2};
use crate::physics::PropagationConfig;

pub const WALL_THICKNESS: f64 = 0.02;

/// Penetration allowed between a movable object and a wall, and between the
/// goal object and a finger when checking a grasp.
pub const OBJECT_PENETRATION_TOL: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("state has {got} object poses but the scene has {expected} objects")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state contains non-finite values")]
    NonFinite,
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("malformed scene json: {0}")]
    Json(String),
}

/// A rigid part of a composite body, placed in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Part {
    pub shape: Shape,
    pub offset: Pose2,
}

impl Part {
    pub fn world_pose(&self, body: &Pose2) -> Pose2 {
        body.compose(&self.offset)
    }
}

/// U-shaped planar gripper opening along the body's local +x axis.
///
/// Body origin is the palm center. The mouth is the free region between the
/// fingers, bounded behind by the palm front face.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub palm: Part,
    pub left_finger: Part,
    pub right_finger: Part,
    /// Local-frame rectangle between the fingers.
    pub mouth: Part,
}

impl Default for RobotModel {
    fn default() -> Self {
        // Palm 0.10 wide x 0.02 deep, fingers 0.06 long x 0.01 thick,
        // mouth 0.06 x 0.06.
        let palm_half_depth = 0.01;
        let palm_half_width = 0.05;
        let finger_half_len = 0.03;
        let finger_half_thick = 0.005;
        let finger_x = palm_half_depth + finger_half_len;
        let finger_y = palm_half_width - finger_half_thick;
        RobotModel {
            palm: Part {
                shape: Shape::Rectangle {
                    half_x: palm_half_depth,
                    half_y: palm_half_width,
                },
                offset: Pose2::IDENTITY,
            },
            left_finger: Part {
                shape: Shape::Rectangle {
                    half_x: finger_half_len,
                    half_y: finger_half_thick,
                },
                offset: Pose2::new(finger_x, finger_y, 0.0),
            },
            right_finger: Part {
                shape: Shape::Rectangle {
                    half_x: finger_half_len,
                    half_y: finger_half_thick,
                },
                offset: Pose2::new(finger_x, -finger_y, 0.0),
            },
            mouth: Part {
                shape: Shape::Rectangle {
                    half_x: 0.03,
                    half_y: 0.03,
                },
                offset: Pose2::new(palm_half_depth + 0.03, 0.0, 0.0),
            },
        }
    }
}

impl RobotModel {
    /// Collision parts: palm, left finger, right finger.
    pub fn parts(&self) -> [Part; 3] {
        [self.palm, self.left_finger, self.right_finger]
    }

    pub fn footprint(&self) -> Vec<(Shape, Pose2)> {
        self.parts().iter().map(|p| (p.shape, p.offset)).collect()
    }

    /// Extent of the mouth along the opening direction.
    pub fn mouth_depth(&self) -> f64 {
        match self.mouth.shape {
            Shape::Rectangle { half_x, .. } => 2.0 * half_x,
            Shape::Circle { radius } => 2.0 * radius,
        }
    }

    /// Mouth center in the body frame.
    pub fn mouth_center(&self) -> Vec2 {
        self.mouth.offset.position()
    }

    /// Radius about the body origin enclosing every collision part.
    pub fn bounding_radius(&self) -> f64 {
        self.parts()
            .iter()
            .map(|p| p.offset.position().norm() + p.shape.bounding_radius())
            .fold(0.0, f64::max)
    }

    /// Body pose that puts the mouth center on `target` with the given heading.
    pub fn pose_with_mouth_at(&self, target: Vec2, heading: f64) -> Pose2 {
        let offset = self.mouth_center().rotated(heading);
        Pose2::from_position(target - offset, heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub width: f64,
    pub height: f64,
}

impl Default for Workspace {
    fn default() -> Self {
        Workspace {
            width: 0.6,
            height: 0.4,
        }
    }
}

impl Workspace {
    /// Closed interior test; the open edge is `y = 0`.
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }

    /// Left, right and back walls. The side walls run the full depth and
    /// the back wall spans both corners.
    pub fn walls(&self) -> Vec<Part> {
        let t = WALL_THICKNESS;
        let (w, h) = (self.width, self.height);
        vec![
            Part {
                shape: Shape::Rectangle {
                    half_x: t / 2.0,
                    half_y: (h + t) / 2.0,
                },
                offset: Pose2::new(-t / 2.0, (h + t) / 2.0, 0.0),
            },
            Part {
                shape: Shape::Rectangle {
                    half_x: t / 2.0,
                    half_y: (h + t) / 2.0,
                },
                offset: Pose2::new(w + t / 2.0, (h + t) / 2.0, 0.0),
            },
            Part {
                shape: Shape::Rectangle {
                    half_x: (w + 2.0 * t) / 2.0,
                    half_y: t / 2.0,
                },
                offset: Pose2::new(w / 2.0, h + t / 2.0, 0.0),
            },
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: String,
    pub shape: Shape,
}

/// Robot plus every object pose; one point of the composite configuration space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub robot_pose: Pose2,
    pub object_poses: Vec<Pose2>,
}

impl SystemState {
    pub fn is_finite(&self) -> bool {
        self.robot_pose.is_finite() && self.object_poses.iter().all(Pose2::is_finite)
    }
}

/// Body-frame velocity command held for `duration` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
    pub duration: f64,
}

impl Control {
    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite() && self.duration.is_finite()
    }

    pub fn is_zero_velocity(&self) -> bool {
        self.vx == 0.0 && self.vy == 0.0 && self.omega == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub workspace: Workspace,
    pub walls: Vec<Part>,
    pub robot: RobotModel,
    pub objects: Vec<SceneObject>,
    pub goal: usize,
    pub initial: SystemState,
    /// Simulator overrides carried in the scene file, if any.
    pub physics: Option<PropagationConfig>,
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    workspace: Workspace,
    robot: RobotFile,
    objects: Vec<ObjectFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    physics: Option<PropagationConfig>,
}

#[derive(Serialize, Deserialize)]
struct RobotFile {
    pose: Pose2,
}

#[derive(Serialize, Deserialize)]
struct ObjectFile {
    id: String,
    shape: Shape,
    pose: Pose2,
    #[serde(default)]
    goal: bool,
}

impl Scene {
    pub fn new(
        workspace: Workspace,
        robot_pose: Pose2,
        objects: Vec<(SceneObject, Pose2)>,
        goal_id: &str,
    ) -> Result<Scene, WorldError> {
        if !(workspace.width > 0.0 && workspace.height > 0.0) {
            return Err(WorldError::InvalidScene("workspace extents must be positive".into()));
        }
        let mut ids: Vec<&str> = objects.iter().map(|(o, _)| o.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(WorldError::InvalidScene("duplicate object id".into()));
        }
        let goal = objects
            .iter()
            .position(|(o, _)| o.id == goal_id)
            .ok_or_else(|| WorldError::InvalidScene(format!("goal id {goal_id:?} not among objects")))?;
        let initial = SystemState {
            robot_pose,
            object_poses: objects.iter().map(|(_, p)| *p).collect(),
        };
        if !initial.is_finite() {
            return Err(WorldError::NonFinite);
        }
        Ok(Scene {
            workspace,
            walls: workspace.walls(),
            robot: RobotModel::default(),
            objects: objects.into_iter().map(|(o, _)| o).collect(),
            goal,
            initial,
            physics: None,
        })
    }

    pub fn from_json(text: &str) -> Result<Scene, WorldError> {
        let file: SceneFile = serde_json::from_str(text).map_err(|e| WorldError::Json(e.to_string()))?;
        let goals: Vec<&ObjectFile> = file.objects.iter().filter(|o| o.goal).collect();
        if goals.len() != 1 {
            return Err(WorldError::InvalidScene(format!(
                "exactly one goal object required, found {}",
                goals.len()
            )));
        }
        let goal_id = goals[0].id.clone();
        let objects = file
            .objects
            .into_iter()
            .map(|o| {
                (
                    SceneObject {
                        id: o.id,
                        shape: o.shape,
                    },
                    o.pose,
                )
            })
            .collect();
        let mut scene = Scene::new(file.workspace, file.robot.pose, objects, &goal_id)?;
        scene.physics = file.physics;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        let file = SceneFile {
            workspace: self.workspace,
            robot: RobotFile {
                pose: self.initial.robot_pose,
            },
            objects: self
                .objects
                .iter()
                .zip(&self.initial.object_poses)
                .enumerate()
                .map(|(i, (o, p))| ObjectFile {
                    id: o.id.clone(),
                    shape: o.shape,
                    pose: *p,
                    goal: i == self.goal,
                })
                .collect(),
            physics: self.physics,
        };
        serde_json::to_string_pretty(&file).expect("scene serializes")
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn goal_id(&self) -> &str {
        &self.objects[self.goal].id
    }

    pub fn check_state(&self, state: &SystemState) -> Result<(), WorldError> {
        if state.object_poses.len() != self.objects.len() {
            return Err(WorldError::DimensionMismatch {
                expected: self.objects.len(),
                got: state.object_poses.len(),
            });
        }
        if !state.is_finite() {
            return Err(WorldError::NonFinite);
        }
        Ok(())
    }

    /// Does the robot at `pose` touch or overlap any wall?
    pub fn robot_hits_wall(&self, pose: &Pose2) -> bool {
        self.robot.parts().iter().any(|part| {
            let pp = part.world_pose(pose);
            self.walls
                .iter()
                .any(|w| shapes_overlap(&part.shape, &pp, &w.shape, &w.offset))
        })
    }

    /// Deepest wall penetration of object `i` at `pose` (0 when clear).
    pub fn object_wall_penetration(&self, i: usize, pose: &Pose2) -> f64 {
        let shape = &self.objects[i].shape;
        self.walls
            .iter()
            .filter_map(|w| contact(&w.shape, &w.offset, shape, pose))
            .map(|c| c.depth)
            .fold(0.0, f64::max)
    }

    /// Validity without the dimension check; callers guarantee matching sizes.
    pub(crate) fn valid_unchecked(&self, state: &SystemState) -> bool {
        if self.robot_hits_wall(&state.robot_pose) {
            return false;
        }
        state.object_poses.iter().enumerate().all(|(i, pose)| {
            self.workspace.contains(pose.position()) && self.object_wall_penetration(i, pose) <= OBJECT_PENETRATION_TOL
        })
    }

    /// Distance from `p` to the closest wall surface.
    pub fn wall_distance(&self, p: Vec2) -> f64 {
        self.walls
            .iter()
            .map(|w| {
                let l = w.offset.inverse_transform_point(p);
                let Shape::Rectangle { half_x, half_y } = w.shape else {
                    unreachable!("walls are rectangles")
                };
                let dx = (l.x.abs() - half_x).max(0.0);
                let dy = (l.y.abs() - half_y).max(0.0);
                dx.hypot(dy)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Static-obstacle and drop-out validity. Contact between the robot and
/// movable objects, or among objects, never invalidates a state.
pub fn is_valid(scene: &Scene, state: &SystemState) -> Result<bool, WorldError> {
    scene.check_state(state)?;
    Ok(scene.valid_unchecked(state))
}

/// Goal object centroid inside the mouth and clear of both fingers.
pub fn grasp_achieved(scene: &Scene, state: &SystemState) -> bool {
    let robot = &state.robot_pose;
    let goal_pose = &state.object_poses[scene.goal];
    let goal_shape = &scene.objects[scene.goal].shape;
    let mouth_pose = scene.robot.mouth.world_pose(robot);
    if !scene
        .robot
        .mouth
        .shape
        .contains_point(&mouth_pose, goal_pose.position())
    {
        return false;
    }
    [scene.robot.left_finger, scene.robot.right_finger].iter().all(|f| {
        let fp = f.world_pose(robot);
        contact(&f.shape, &fp, goal_shape, goal_pose).map_or(true, |c| c.depth <= OBJECT_PENETRATION_TOL)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn obj(id: &str, shape: Shape) -> SceneObject {
        SceneObject { id: id.into(), shape }
    }

    fn sample_scene() -> Scene {
        Scene::new(
            Workspace::default(),
            Pose2::new(0.3, 0.05, PI / 2.0),
            vec![
                (obj("o1", Shape::circle(0.02).unwrap()), Pose2::new(0.3, 0.3, 0.0)),
                (
                    obj("o2", Shape::rectangle(0.03, 0.02).unwrap()),
                    Pose2::new(0.1, 0.2, 0.0),
                ),
            ],
            "o1",
        )
        .unwrap()
    }

    #[test]
    fn default_robot_geometry() {
        let r = RobotModel::default();
        assert!((r.mouth_depth() - 0.06).abs() < 1e-15);
        // Fingers sit beside, not inside, the palm.
        for f in [r.left_finger, r.right_finger] {
            assert!(!shapes_overlap(
                &f.shape,
                &f.offset,
                &r.palm.shape,
                &Pose2::new(-1e-6, 0.0, 0.0)
            ));
        }
        // Mouth strictly between the finger inner faces (±0.04).
        let Shape::Rectangle { half_y, .. } = r.mouth.shape else {
            panic!()
        };
        assert!(half_y < 0.04);
    }

    #[test]
    fn walls_close_three_sides() {
        let ws = Workspace::default();
        let walls = ws.walls();
        let hits = |p: Vec2| walls.iter().any(|w| w.shape.contains_point(&w.offset, p));
        assert!(hits(Vec2::new(-0.01, 0.2)));
        assert!(hits(Vec2::new(0.61, 0.2)));
        assert!(hits(Vec2::new(0.3, 0.41)));
        assert!(hits(Vec2::new(-0.01, 0.41)));
        assert!(hits(Vec2::new(0.61, 0.41)));
        assert!(!hits(Vec2::new(0.3, -0.01)));
        assert!(!hits(Vec2::new(0.3, 0.2)));
    }

    #[test]
    fn validity_examples() {
        let scene = sample_scene();
        assert!(is_valid(&scene, &scene.initial).unwrap());

        let mut beyond = scene.initial.clone();
        beyond.robot_pose = Pose2::new(0.3, 1.4, PI / 2.0);
        // Beyond the back wall the robot is clear of the wall rectangle itself,
        // so push it onto the wall instead of past it.
        beyond.robot_pose = Pose2::new(0.3, 0.41, PI / 2.0);
        assert!(!is_valid(&scene, &beyond).unwrap());

        let mut dropped = scene.initial.clone();
        dropped.object_poses[1] = Pose2::new(0.1, -0.001, 0.0);
        assert!(!is_valid(&scene, &dropped).unwrap());

        let bad = SystemState {
            robot_pose: scene.initial.robot_pose,
            object_poses: vec![],
        };
        assert!(matches!(
            is_valid(&scene, &bad),
            Err(WorldError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn grasp_examples() {
        let scene = sample_scene();
        let robot = Pose2::new(0.2, 0.2, 0.4);
        let mouth_center = robot.transform_point(scene.robot.mouth_center());
        let mut s = scene.initial.clone();
        s.robot_pose = robot;
        s.object_poses[0] = Pose2::from_position(mouth_center, 0.0);
        assert!(grasp_achieved(&scene, &s));

        s.object_poses[0] = Pose2::new(0.7, 0.2, 0.0);
        assert!(!grasp_achieved(&scene, &s));

        // Centroid 1e-6 inside the mouth's open end, fingers clear.
        let local = Vec2::new(0.07 - 1e-6, 0.0);
        s.object_poses[0] = Pose2::from_position(robot.transform_point(local), 0.0);
        assert!(grasp_achieved(&scene, &s));
        let local = Vec2::new(0.07 + 1e-6, 0.0);
        s.object_poses[0] = Pose2::from_position(robot.transform_point(local), 0.0);
        assert!(!grasp_achieved(&scene, &s));
    }

    #[test]
    fn grasp_rejects_finger_overlap() {
        let mut scene = sample_scene();
        scene.objects[0].shape = Shape::circle(0.035).unwrap();
        let robot = Pose2::new(0.2, 0.2, 0.0);
        let mut s = scene.initial.clone();
        s.robot_pose = robot;
        // Shifted toward the left finger: still in the mouth but 5 mm into the finger.
        s.object_poses[0] = Pose2::from_position(robot.transform_point(Vec2::new(0.04, 0.01)), 0.0);
        assert!(!grasp_achieved(&scene, &s));
    }

    #[test]
    fn scene_json_roundtrip_and_validation() {
        let scene = sample_scene();
        let text = scene.to_json();
        assert!(text.contains("\"goal\": true"));
        let back = Scene::from_json(&text).unwrap();
        assert_eq!(back, scene);

        let two_goals = text.replace("\"goal\": false", "\"goal\": true");
        assert!(matches!(Scene::from_json(&two_goals), Err(WorldError::InvalidScene(_))));

        let compact = r#"{"workspace":{"width":0.6,"height":0.4},"robot":{"pose":[0.3,0.0,1.5707963267948966]},
            "objects":[{"id":"o1","shape":{"type":"circle","radius":0.03},"pose":[0.3,0.3,0.0],"goal":true},
                       {"id":"o2","shape":{"type":"rect","half":[0.04,0.02]},"pose":[0.1,0.2,0.0],"goal":false}]}"#;
        let s = Scene::from_json(compact).unwrap();
        assert_eq!(s.goal_id(), "o1");
        assert_eq!(
            s.objects[1].shape,
            Shape::Rectangle {
                half_x: 0.04,
                half_y: 0.02
            }
        );
    }

    #[test]
    fn validity_is_deterministic() {
        let scene = sample_scene();
        let a = is_valid(&scene, &scene.initial).unwrap();
        let b = is_valid(&scene, &scene.initial.clone()).unwrap();
        assert_eq!(a, b);
    }
}
