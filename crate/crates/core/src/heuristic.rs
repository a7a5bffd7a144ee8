//! Greedy highest-battery-first clustering and multi-round re-clustering.
//!
//! Each pass promotes the unassigned eligible node with the most battery to
//! master and gives it up to seven of the nearest unassigned nodes in range.
//! [`recluster_rounds`] repeats this from scratch every round while nodes
//! move and batteries drain by role, so mastership rotates over time.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::metrics::EnergyParams;
use crate::model::{distance_matrix, eligible_mask, ClusterAssignment, Instance, CLUSTER_CAPACITY};

/// Clusters `inst` greedily. Nodes no master can reach stay `None` in
/// `master_of`; see [`ClusterAssignment::uncovered`].
pub fn iterative_cluster(inst: &Instance, d_max: f64, battery_threshold: f64) -> ClusterAssignment {
    let n = inst.len();
    let c = distance_matrix(inst);
    let eligible = eligible_mask(inst, battery_threshold);
    let mut master_of: Vec<Option<usize>> = vec![None; n];

    loop {
        // max battery, ties to the lowest id
        let next = (0..n)
            .filter(|&j| eligible[j] && master_of[j].is_none())
            .fold(None, |best: Option<usize>, j| match best {
                Some(b) if inst.nodes[b].battery >= inst.nodes[j].battery => Some(b),
                _ => Some(j),
            });
        let Some(master) = next else { break };
        master_of[master] = Some(master);

        let mut near: Vec<(f64, usize)> = (0..n)
            .filter(|&i| master_of[i].is_none())
            .map(|i| (c.get(master, i), i))
            .filter(|&(d, _)| d <= d_max)
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, i) in near.iter().take(CLUSTER_CAPACITY - 1) {
            master_of[i] = Some(master);
        }
    }
    ClusterAssignment::from_masters(master_of)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MobilityMode {
    Static,
    RandomWaypoint,
}

/// Node movement per round. Speeds are in meters per round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityModel {
    pub mode: MobilityMode,
    pub speed_min: f64,
    pub speed_max: f64,
    pub pause_prob: f64,
}

impl MobilityModel {
    pub fn fixed() -> Self {
        MobilityModel {
            mode: MobilityMode::Static,
            speed_min: 0.0,
            speed_max: 0.0,
            pause_prob: 0.0,
        }
    }

    pub fn random_waypoint(speed_min: f64, speed_max: f64, pause_prob: f64) -> Self {
        MobilityModel {
            mode: MobilityMode::RandomWaypoint,
            speed_min,
            speed_max,
            pause_prob,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(0.0 <= self.speed_min && self.speed_min <= self.speed_max && self.speed_max.is_finite()) {
            return Err(param(format!(
                "speeds must satisfy 0 <= min <= max, got {} and {}",
                self.speed_min, self.speed_max
            )));
        }
        if !(0.0..=1.0).contains(&self.pause_prob) {
            return Err(param(format!("pause_prob {} outside [0, 1]", self.pause_prob)));
        }
        Ok(())
    }
}

/// Random stream and per-node waypoints carried between mobility steps.
#[derive(Debug, Clone)]
pub struct MobilityState {
    rng: ChaCha8Rng,
    waypoints: Vec<Option<(f64, f64)>>,
}

impl MobilityState {
    pub fn new(seed: u64) -> Self {
        MobilityState {
            rng: ChaCha8Rng::seed_from_u64(seed),
            waypoints: Vec::new(),
        }
    }
}

/// Moves every node one round. Static mode and zero speed leave the
/// instance untouched.
pub fn mobility_step(inst: &Instance, model: &MobilityModel, state: &mut MobilityState) -> Result<Instance> {
    model.check()?;
    let mut out = inst.clone();
    if model.mode == MobilityMode::Static || model.speed_max == 0.0 {
        return Ok(out);
    }
    let (w, h) = (inst.area_width, inst.area_height);
    state.waypoints.resize(inst.len(), None);
    for (node, slot) in out.nodes.iter_mut().zip(state.waypoints.iter_mut()) {
        let rng = &mut state.rng;
        let target = *slot.get_or_insert_with(|| (rng.gen_range(0.0..=w), rng.gen_range(0.0..=h)));
        if model.pause_prob > 0.0 && rng.gen_bool(model.pause_prob) {
            continue;
        }
        let speed = rng.gen_range(model.speed_min..=model.speed_max);
        let (dx, dy) = (target.0 - node.x, target.1 - node.y);
        let left = dx.hypot(dy);
        if left <= speed {
            node.x = target.0;
            node.y = target.1;
            *slot = Some((rng.gen_range(0.0..=w), rng.gen_range(0.0..=h)));
        } else {
            node.x += dx / left * speed;
            node.y += dy / left * speed;
        }
        node.x = reflect(node.x, w);
        node.y = reflect(node.y, h);
    }
    Ok(out)
}

/// Folds a coordinate back into `[0, len]` by mirroring at the walls.
fn reflect(v: f64, len: f64) -> f64 {
    let period = 2.0 * len;
    let r = v.rem_euclid(period);
    if r > len {
        period - r
    } else {
        r
    }
}

/// Battery percentage points lost per round by role.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrainModel {
    pub master: f64,
    pub member: f64,
    pub idle: f64,
}

impl DrainModel {
    pub fn none() -> Self {
        DrainModel {
            master: 0.0,
            member: 0.0,
            idle: 0.0,
        }
    }

    /// Per-round drain from energy rates and a battery capacity in Joules.
    pub fn from_energy(params: &EnergyParams, capacity_joules: f64) -> Result<Self> {
        if !(capacity_joules > 0.0) {
            return Err(param(format!("battery capacity {capacity_joules} must be > 0")));
        }
        let pct = |e: f64| 100.0 * e / capacity_joules;
        Ok(DrainModel {
            master: pct(params.e_ch),
            member: pct(params.e_cm),
            idle: pct(params.e_idle),
        })
    }

    pub fn check(&self) -> Result<()> {
        if [self.master, self.member, self.idle].iter().any(|r| !(*r >= 0.0)) {
            return Err(param("drain rates must be >= 0"));
        }
        Ok(())
    }
}

/// Clustering state of one round. `uncovered` and `master_set` hold 1-based
/// ids; `batteries` are the levels the clustering saw.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub round: usize,
    pub assignment: ClusterAssignment,
    pub uncovered: Vec<usize>,
    pub master_set: Vec<usize>,
    pub batteries: Vec<f64>,
}

/// Runs `rounds` rounds. Each round clusters from scratch, records the
/// trace, drains batteries by role (clamped at zero) and then moves nodes.
pub fn recluster_rounds(
    inst: &Instance,
    rounds: usize,
    d_max: f64,
    battery_threshold: f64,
    mobility: &MobilityModel,
    drain: &DrainModel,
    seed: u64,
) -> Result<Vec<RoundTrace>> {
    if rounds == 0 {
        return Err(param("rounds must be >= 1"));
    }
    mobility.check()?;
    drain.check()?;
    let mut state = MobilityState::new(seed);
    let mut current = inst.clone();
    let mut traces = Vec::with_capacity(rounds);
    for round in 0..rounds {
        let assignment = iterative_cluster(&current, d_max, battery_threshold);
        let batteries: Vec<f64> = current.nodes.iter().map(|n| n.battery).collect();
        for (i, node) in current.nodes.iter_mut().enumerate() {
            let rate = match assignment.master_of[i] {
                Some(j) if j == i => drain.master,
                Some(_) => drain.member,
                None => drain.idle,
            };
            node.battery = (node.battery - rate).max(0.0);
        }
        traces.push(RoundTrace {
            round,
            uncovered: assignment.uncovered().iter().map(|i| i + 1).collect(),
            master_set: assignment.masters().iter().map(|j| j + 1).collect(),
            batteries,
            assignment,
        });
        current = mobility_step(&current, mobility, &mut state)?;
    }
    Ok(traces)
}

/// Writes `round,node_id,role,master_id,battery`; `master_id` is empty for
/// uncovered nodes.
pub fn write_trace_csv<W: Write>(traces: &[RoundTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["round", "node_id", "role", "master_id", "battery"])?;
    for t in traces {
        for (i, m) in t.assignment.master_of.iter().enumerate() {
            let (role, master) = match *m {
                Some(j) if j == i => ("master", (j + 1).to_string()),
                Some(j) => ("member", (j + 1).to_string()),
                None => ("uncovered", String::new()),
            };
            w.write_record([
                t.round.to_string(),
                (i + 1).to_string(),
                role.to_string(),
                master,
                t.batteries[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
