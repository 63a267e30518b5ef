//! Time accounting for planning budgets.
//!
//! `Wall` measures real elapsed time. `Virtual` charges a fixed cost for
//! each unit of work (simulator substep, nearest-neighbour distance
//! evaluation, placement sample), which makes budgets and reported times a
//! pure function of the seed.

use std::cell::Cell;
use std::time::Instant;

use serde::{Deserialize, Serialize};

/// Charged per simulated substep, per movable object plus one for the robot.
pub const VIRTUAL_SUBSTEP_COST: f64 = 1.5e-7;
/// Charged per state-distance evaluation.
pub const VIRTUAL_DISTANCE_COST: f64 = 3.5e-8;
/// Charged per grid cell scanned during cell selection.
pub const VIRTUAL_CELL_COST: f64 = 1e-8;
/// Charged per placement candidate tested by the heuristic.
pub const VIRTUAL_SAMPLE_COST: f64 = 4e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    #[default]
    Wall,
    Virtual,
}

impl std::str::FromStr for ClockMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "wall" => Ok(ClockMode::Wall),
            "virtual" => Ok(ClockMode::Virtual),
            other => Err(format!("unknown clock mode {other:?}")),
        }
    }
}

#[derive(Debug)]
pub struct Stopwatch {
    mode: ClockMode,
    start: Instant,
    charged: Cell<f64>,
}

impl Stopwatch {
    pub fn start(mode: ClockMode) -> Self {
        Stopwatch {
            mode,
            start: Instant::now(),
            charged: Cell::new(0.0),
        }
    }

    pub fn mode(&self) -> ClockMode {
        self.mode
    }

    /// Seconds elapsed under this stopwatch's mode.
    pub fn elapsed(&self) -> f64 {
        match self.mode {
            ClockMode::Wall => self.start.elapsed().as_secs_f64(),
            ClockMode::Virtual => self.charged.get(),
        }
    }

    pub fn charge(&self, seconds: f64) {
        if self.mode == ClockMode::Virtual {
            self.charged.set(self.charged.get() + seconds);
        }
    }

    pub fn charge_substeps(&self, substeps: usize, objects: usize) {
        self.charge(VIRTUAL_SUBSTEP_COST * (substeps * (objects + 1)) as f64);
    }

    pub fn charge_distances(&self, n: usize) {
        self.charge(VIRTUAL_DISTANCE_COST * n as f64);
    }

    pub fn charge_cells(&self, n: usize) {
        self.charge(VIRTUAL_CELL_COST * n as f64);
    }

    pub fn charge_samples(&self, n: usize) {
        self.charge(VIRTUAL_SAMPLE_COST * n as f64);
    }
}
