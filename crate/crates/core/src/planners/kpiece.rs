use std::collections::HashMap;

use rand::Rng;

use crate::planners::{extract_plan, Context, GoalSpec, Plan, PlanError, PlannerConfig};
use crate::world::{Control, Scene, SystemState};

/// Score multiplier applied to a cell after a failed expansion.
const FAILED_EXPANSION_FACTOR: f64 = 0.5;
/// Number of goal-closest motions kept for goal-biased selection.
const CLOSE_SAMPLES: usize = 10;

#[derive(Debug, Clone)]
struct Cell {
    coord: Vec<i64>,
    motions: Vec<usize>,
    score: f64,
    selections: u64,
    neighbors: usize,
}

impl Cell {
    fn importance(&self) -> f64 {
        self.score / ((1 + self.selections) as f64 * self.motions.len() as f64)
    }
}

/// Single-level KPIECE over a square grid on a 2D or 4D projection.
pub struct Kpiece<'a> {
    ctx: Context<'a>,
    states: Vec<SystemState>,
    parents: Vec<Option<(usize, Control)>>,
    cells: Vec<Cell>,
    index: HashMap<Vec<i64>, usize>,
    /// (goal distance, motion index), ascending.
    close: Vec<(f64, usize)>,
    last_cell: Option<usize>,
}

impl<'a> Kpiece<'a> {
    pub fn new(
        scene: &'a Scene,
        start: &SystemState,
        goal: &GoalSpec,
        cfg: &'a PlannerConfig,
    ) -> Result<Self, PlanError> {
        let ctx = Context::new(scene, start, goal, cfg)?;
        let mut k = Kpiece {
            ctx,
            states: Vec::new(),
            parents: Vec::new(),
            cells: Vec::new(),
            index: HashMap::new(),
            close: Vec::new(),
            last_cell: None,
        };
        k.add_motion(start.clone(), None);
        Ok(k)
    }

    pub fn solve(mut self) -> Result<Plan, PlanError> {
        if self.ctx.target.satisfied(self.ctx.scene, &self.states[0]) {
            return Ok(extract_plan(&self.states, &self.parents, 0, self.ctx.clock.elapsed()));
        }
        while !self.ctx.out_of_time() {
            if let Some(leaf) = self.step() {
                return Ok(extract_plan(
                    &self.states,
                    &self.parents,
                    leaf,
                    self.ctx.clock.elapsed(),
                ));
            }
        }
        Err(PlanError::Timeout {
            elapsed: self.ctx.clock.elapsed(),
        })
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn motion_count(&self) -> usize {
        self.states.len()
    }

    /// Grid coordinates of the cell expanded by the most recent step.
    pub fn last_selected_cell(&self) -> Option<&[i64]> {
        self.last_cell.map(|c| self.cells[c].coord.as_slice())
    }

    /// Number of times the cell at `coord` has been selected for expansion.
    pub fn cell_selections(&self, coord: &[i64]) -> Option<u64> {
        self.index.get(coord).map(|&c| self.cells[c].selections)
    }

    /// Every cell's coordinates and selection count, in creation order.
    pub fn snapshot_selections(&self) -> Vec<(Vec<i64>, u64)> {
        self.cells.iter().map(|c| (c.coord.clone(), c.selections)).collect()
    }

    pub fn is_interior(&self, coord: &[i64]) -> Option<bool> {
        self.index
            .get(coord)
            .map(|&c| self.cells[c].neighbors == 2 * coord.len())
    }

    /// One expansion. Returns the new motion index if it reaches the goal.
    pub fn step(&mut self) -> Option<usize> {
        let motion = if !self.close.is_empty() && self.ctx.rng.gen_bool(self.ctx.cfg.goal_bias) {
            let k = self.ctx.rng.gen_range(0..self.close.len());
            self.close[k].1
        } else {
            let c = self.select_cell();
            let m = self.ctx.rng.gen_range(0..self.cells[c].motions.len());
            self.cells[c].motions[m]
        };
        let cell = self.cell_of(motion);
        self.cells[cell].selections += 1;
        self.last_cell = Some(cell);

        let control = self.ctx.random_control();
        let from = self.states[motion].clone();
        match self.ctx.expand(&from, control) {
            Some(exp) => {
                let idx = self.add_motion(exp.state, Some((motion, exp.control)));
                exp.reached.then_some(idx)
            }
            None => {
                self.cells[cell].score *= FAILED_EXPANSION_FACTOR;
                None
            }
        }
    }

    fn select_cell(&mut self) -> usize {
        let full = |c: &Cell| c.neighbors == 2 * c.coord.len();
        let has_interior = self.cells.iter().any(full);
        let has_exterior = self.cells.iter().any(|c| !full(c));
        let want_exterior = match (has_interior, has_exterior) {
            (true, true) => self.ctx.rng.gen_bool(1.0 - self.ctx.cfg.kpiece_interior_bias),
            (false, _) => true,
            (true, false) => false,
        };
        self.ctx.clock.charge_cells(self.cells.len());
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.cells.iter().enumerate() {
            if full(c) == want_exterior {
                continue;
            }
            let imp = c.importance();
            if best.map_or(true, |(_, b)| imp > b) {
                best = Some((i, imp));
            }
        }
        best.expect("at least one cell exists").0
    }

    fn project(&self, s: &SystemState) -> Vec<i64> {
        let cs = self.ctx.cfg.kpiece_cell_size;
        let q = |v: f64| (v / cs).floor() as i64;
        let mut coord = vec![q(s.robot_pose.x), q(s.robot_pose.y)];
        if let Some(i) = self.ctx.target.tracked_object() {
            coord.push(q(s.object_poses[i].x));
            coord.push(q(s.object_poses[i].y));
        }
        coord
    }

    fn cell_of(&self, motion: usize) -> usize {
        self.index[&self.project(&self.states[motion])]
    }

    fn add_motion(&mut self, state: SystemState, parent: Option<(usize, Control)>) -> usize {
        let idx = self.states.len();
        let coord = self.project(&state);
        let gd = self
            .ctx
            .target
            .goal_distance(self.ctx.scene, &state, self.ctx.cfg.nn_theta_weight);
        self.states.push(state);
        self.parents.push(parent);
        let cell = match self.index.get(&coord) {
            Some(&c) => c,
            None => self.insert_cell(coord),
        };
        self.cells[cell].motions.push(idx);

        let pos = self.close.partition_point(|&(d, _)| d <= gd);
        if pos < CLOSE_SAMPLES {
            self.close.insert(pos, (gd, idx));
            self.close.truncate(CLOSE_SAMPLES);
        }
        idx
    }

    fn insert_cell(&mut self, coord: Vec<i64>) -> usize {
        let id = self.cells.len();
        let mut neighbors = 0;
        for axis in 0..coord.len() {
            for delta in [-1, 1] {
                let mut n = coord.clone();
                n[axis] += delta;
                if let Some(&other) = self.index.get(&n) {
                    neighbors += 1;
                    self.cells[other].neighbors += 1;
                }
            }
        }
        self.index.insert(coord.clone(), id);
        self.cells.push(Cell {
            coord,
            motions: Vec::new(),
            score: 1.0,
            selections: 0,
            neighbors,
        });
        id
    }
}
