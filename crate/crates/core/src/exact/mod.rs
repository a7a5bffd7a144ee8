//! The clustering integer program: model construction, exact solution by
//! branch-and-bound, an exhaustive oracle, parameter sweeps and LP export.
//!
//! Minimize `sum C_ij X_ij + F sum Y_j` subject to
//!
//! * I.   every node joins exactly one cluster;
//! * II.  at most eight nodes per cluster, master included;
//! * III. members lie within `d_max` of their master;
//! * IV.  masters have Wi-Fi;
//! * V.   masters have battery at or above the threshold.
//!
//! An open master always serves itself (`X_jj = Y_j`). Constraint III is
//! applied by never creating an out-of-range pair; IV and V by only letting
//! eligible nodes open.

mod bnb;
mod brute;
pub(crate) mod flow;
pub mod lp;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{distance_matrix, eligible_mask, ClusterAssignment, DistanceMatrix, Instance, CLUSTER_CAPACITY};

pub use bnb::solve_exact;
pub use brute::{brute_force, BRUTE_FORCE_LIMIT};
pub use sweep::{run_sweep, write_sweep_csv, SweepPoint, SweepSpec, SweepVariable};

/// Which terms of the objective are minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    /// Total member distance only (scenario 1).
    DistanceOnly,
    /// Number of clusters only (scenario 2).
    ClusterCountOnly,
    /// Distance plus `F` per master (scenario 3).
    Combined,
}

impl Objective {
    pub fn from_scenario(scenario: u8) -> Option<Self> {
        match scenario {
            1 => Some(Objective::DistanceOnly),
            2 => Some(Objective::ClusterCountOnly),
            3 => Some(Objective::Combined),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Objective::DistanceOnly => "distance",
            Objective::ClusterCountOnly => "clusters",
            Objective::Combined => "combined",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub c: DistanceMatrix,
    pub fixed_cost: f64,
    pub d_max: f64,
    pub objective: Objective,
    pub eligible: Vec<bool>,
}

impl ModelSpec {
    pub fn len(&self) -> usize {
        self.eligible.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eligible.is_empty()
    }

    /// Objective weights `(distance, per-master)`.
    pub fn weights(&self) -> (f64, f64) {
        match self.objective {
            Objective::DistanceOnly => (1.0, 0.0),
            Objective::ClusterCountOnly => (0.0, 1.0),
            Objective::Combined => (1.0, self.fixed_cost),
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.c.len() != self.eligible.len() {
            return Err(Error::Structure("distance matrix and eligibility sizes differ".into()));
        }
        if !(self.fixed_cost >= 0.0) {
            return Err(Error::Parameter(format!("fixed cost {} must be >= 0", self.fixed_cost)));
        }
        if !(self.d_max > 0.0) {
            return Err(Error::Parameter(format!("d_max {} must be > 0", self.d_max)));
        }
        Ok(())
    }

    /// Masters each node may join, nearest first, ties by lowest index.
    /// Includes the node itself when it is eligible.
    pub(crate) fn candidates(&self) -> Vec<Vec<(usize, f64)>> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v: Vec<(usize, f64)> = (0..n)
                    .filter(|&j| self.eligible[j])
                    .map(|j| (j, self.c.get(i, j)))
                    .filter(|&(_, d)| d <= self.d_max)
                    .collect();
                v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                v
            })
            .collect()
    }

    /// Objective value of an assignment under this model.
    pub fn evaluate(&self, asg: &ClusterAssignment) -> f64 {
        let (dw, fw) = self.weights();
        let dist = asg.distance_term(&self.c);
        let count = asg.cluster_count() as f64;
        match self.objective {
            Objective::DistanceOnly => dist,
            Objective::ClusterCountOnly => count,
            Objective::Combined => dw * dist + fw * count,
        }
    }
}

pub fn build_model(
    inst: &Instance,
    objective: Objective,
    fixed_cost: f64,
    d_max: f64,
    battery_threshold: f64,
) -> ModelSpec {
    ModelSpec {
        c: distance_matrix(inst),
        fixed_cost,
        d_max,
        objective,
        eligible: eligible_mask(inst, battery_threshold),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub assignment: ClusterAssignment,
    pub z: f64,
    pub distance_term: f64,
    pub cluster_count: usize,
    pub optimal: bool,
    pub nodes_explored: u64,
}

impl Solution {
    pub(crate) fn new(model: &ModelSpec, assignment: ClusterAssignment, optimal: bool, nodes_explored: u64) -> Self {
        Solution {
            z: model.evaluate(&assignment),
            distance_term: assignment.distance_term(&model.c),
            cluster_count: assignment.cluster_count(),
            assignment,
            optimal,
            nodes_explored,
        }
    }
}

/// `ceil(n / 8)`: no feasible clustering uses fewer masters.
pub fn min_cluster_lower_bound(n: usize) -> usize {
    n.div_ceil(CLUSTER_CAPACITY)
}
