use crate::planners::{extract_plan, Context, GoalSpec, Plan, PlanError, PlannerConfig};
use crate::world::{Control, Scene, SystemState};

/// Kinodynamic RRT with a linear-scan nearest-neighbour search.
pub struct Rrt<'a> {
    ctx: Context<'a>,
    states: Vec<SystemState>,
    parents: Vec<Option<(usize, Control)>>,
}

impl<'a> Rrt<'a> {
    pub fn new(
        scene: &'a Scene,
        start: &SystemState,
        goal: &GoalSpec,
        cfg: &'a PlannerConfig,
    ) -> Result<Self, PlanError> {
        let ctx = Context::new(scene, start, goal, cfg)?;
        Ok(Rrt {
            ctx,
            states: vec![start.clone()],
            parents: vec![None],
        })
    }

    pub fn tree_size(&self) -> usize {
        self.states.len()
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

    /// One expansion. Returns the new node index if it reaches the goal.
    pub fn step(&mut self) -> Option<usize> {
        let target = self.ctx.sample(&self.states[0]);
        let near = self.nearest(&target);
        let control = self.ctx.random_control();
        let from = self.states[near].clone();
        let exp = self.ctx.expand(&from, control)?;
        self.states.push(exp.state);
        self.parents.push(Some((near, exp.control)));
        exp.reached.then_some(self.states.len() - 1)
    }

    fn nearest(&self, target: &SystemState) -> usize {
        self.ctx.clock.charge_distances(self.states.len());
        let mut best = (0, f64::INFINITY);
        for (i, s) in self.states.iter().enumerate() {
            let d = self.ctx.metric(s, target);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }
}
