//! Node fields, distance geometry, master eligibility and constraint checks.
//!
//! Nodes are addressed by 0-based index in memory. The 1-based `id` stored on
//! each [`Node`] is what appears in files and reports.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Maximum cluster size, master included (one master plus seven slaves).
pub const CLUSTER_CAPACITY: usize = 8;
/// Battery percentage a master must reach.
pub const DEFAULT_BATTERY_THRESHOLD: f64 = 50.0;
/// Maximum master-member distance in meters.
pub const DEFAULT_D_MAX: f64 = 10.0;
/// Fixed cost charged per opened master.
pub const DEFAULT_FIXED_COST: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub battery: f64,
    pub wifi: bool,
}

impl Node {
    pub fn distance_to(&self, other: &Node) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A field of nodes inside an `area_width` x `area_height` rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub area_width: f64,
    pub area_height: f64,
    pub seed: u64,
    pub nodes: Vec<Node>,
}

impl Instance {
    /// Builds an instance and checks its invariants.
    pub fn new(area_width: f64, area_height: f64, seed: u64, nodes: Vec<Node>) -> Result<Self> {
        let inst = Instance {
            area_width,
            area_height,
            seed,
            nodes,
        };
        inst.check()?;
        Ok(inst)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Verifies contiguous 1-based ids, positions inside the area and
    /// batteries in [0, 100].
    pub fn check(&self) -> Result<()> {
        if !(self.area_width > 0.0 && self.area_height > 0.0) {
            return Err(param(format!(
                "area dimensions must be positive, got {}x{}",
                self.area_width, self.area_height
            )));
        }
        for (k, node) in self.nodes.iter().enumerate() {
            if node.id != k + 1 {
                return Err(Error::Structure(format!(
                    "node ids must be contiguous from 1; position {} holds id {}",
                    k + 1,
                    node.id
                )));
            }
            if !(0.0..=self.area_width).contains(&node.x) || !(0.0..=self.area_height).contains(&node.y) {
                return Err(param(format!("node {} at ({}, {}) lies outside the area", node.id, node.x, node.y)));
            }
            if !(0.0..=100.0).contains(&node.battery) {
                return Err(param(format!("node {} battery {} outside [0, 100]", node.id, node.battery)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Instance = serde_json::from_str(text)?;
        inst.check()?;
        Ok(inst)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Parameters for [`generate_instance`].
#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub n: usize,
    pub area_width: f64,
    pub area_height: f64,
    pub seed: u64,
    pub wifi_prob: f64,
    pub battery_low: f64,
    pub battery_high: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n: 100,
            area_width: 10.0,
            area_height: 20.0,
            seed: 1,
            wifi_prob: 1.0,
            battery_low: 50.0,
            battery_high: 100.0,
        }
    }
}

/// Places `n` nodes uniformly in the rectangle with uniform batteries and
/// Bernoulli Wi-Fi flags. Output is a pure function of the parameters.
pub fn generate_instance(p: &GenParams) -> Result<Instance> {
    if !(p.area_width > 0.0 && p.area_height > 0.0) {
        return Err(param("area dimensions must be positive"));
    }
    if !(0.0..=1.0).contains(&p.wifi_prob) {
        return Err(param(format!("wifi_prob {} outside [0, 1]", p.wifi_prob)));
    }
    if !(0.0 <= p.battery_low && p.battery_low <= p.battery_high && p.battery_high <= 100.0) {
        return Err(param(format!(
            "battery range [{}, {}] must satisfy 0 <= low <= high <= 100",
            p.battery_low, p.battery_high
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let nodes = (0..p.n)
        .map(|k| {
            let x = rng.gen_range(0.0..=p.area_width);
            let y = rng.gen_range(0.0..=p.area_height);
            let battery = rng.gen_range(p.battery_low..=p.battery_high);
            let wifi = rng.gen_bool(p.wifi_prob);
            Node {
                id: k + 1,
                x,
                y,
                battery,
                wifi,
            }
        })
        .collect();
    Instance::new(p.area_width, p.area_height, p.seed, nodes)
}

/// Symmetric matrix of pairwise Euclidean distances, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    c: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                c[i * n + j] = f(i, j);
            }
        }
        DistanceMatrix { n, c }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.c[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.c[i * self.n..(i + 1) * self.n]
    }
}

pub fn distance_matrix(inst: &Instance) -> DistanceMatrix {
    let n = inst.len();
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = inst.nodes[i].distance_to(&inst.nodes[j]);
            c[i * n + j] = d;
            c[j * n + i] = d;
        }
    }
    DistanceMatrix { n, c }
}

/// The two master indicators: Wi-Fi available and battery at or above the
/// threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Eligibility {
    pub wifi: bool,
    pub battery: bool,
}

impl Eligibility {
    pub fn is_eligible(self) -> bool {
        self.wifi && self.battery
    }
}

/// Threshold comparison is inclusive. An empty battery never qualifies,
/// whatever the threshold.
pub fn eligibility(node: &Node, battery_threshold: f64) -> Eligibility {
    Eligibility {
        wifi: node.wifi,
        battery: node.battery >= battery_threshold && node.battery > 0.0,
    }
}

pub fn eligible_mask(inst: &Instance, battery_threshold: f64) -> Vec<bool> {
    inst.nodes
        .iter()
        .map(|n| eligibility(n, battery_threshold).is_eligible())
        .collect()
}

/// Per-node master choice. `master_of[i] = None` marks a node no master
/// could cover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub master_of: Vec<Option<usize>>,
    pub is_master: Vec<bool>,
}

impl ClusterAssignment {
    /// Derives `is_master` from the targets of `master_of`.
    pub fn from_masters(master_of: Vec<Option<usize>>) -> Self {
        let mut is_master = vec![false; master_of.len()];
        for m in master_of.iter().flatten() {
            if *m < is_master.len() {
                is_master[*m] = true;
            }
        }
        ClusterAssignment { master_of, is_master }
    }

    pub fn len(&self) -> usize {
        self.master_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.master_of.is_empty()
    }

    pub fn masters(&self) -> Vec<usize> {
        (0..self.is_master.len()).filter(|&j| self.is_master[j]).collect()
    }

    pub fn cluster_count(&self) -> usize {
        self.is_master.iter().filter(|&&m| m).count()
    }

    /// Covered nodes that are not masters themselves.
    pub fn member_count(&self) -> usize {
        self.master_of
            .iter()
            .enumerate()
            .filter(|(i, m)| matches!(m, Some(j) if j != i))
            .count()
    }

    pub fn uncovered(&self) -> Vec<usize> {
        (0..self.master_of.len()).filter(|&i| self.master_of[i].is_none()).collect()
    }

    /// Cluster sizes indexed by master, master included.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.master_of.len()];
        for j in self.master_of.iter().flatten() {
            if *j < sizes.len() {
                sizes[*j] += 1;
            }
        }
        sizes
    }

    /// Sum of member-to-master distances, accumulated in node order.
    pub fn distance_term(&self, c: &DistanceMatrix) -> f64 {
        self.master_of
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.map(|j| c.get(i, j)))
            .sum()
    }
}

/// One broken constraint. Node indices are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Constraint I: node has no master.
    Unassigned { node: usize },
    /// Node points at a node that is not flagged as master.
    NotAMaster { node: usize, target: usize },
    /// A master that does not serve itself.
    MasterNotSelfAssigned { master: usize },
    /// Constraint II.
    ClusterTooLarge { master: usize, size: usize },
    /// Constraint III.
    OutOfRange { node: usize, master: usize, distance: f64 },
    /// Constraint IV.
    MasterWithoutWifi { master: usize },
    /// Constraint V.
    MasterLowBattery { master: usize, battery: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Unassigned { node } => write!(f, "node {} has no master", node + 1),
            Violation::NotAMaster { node, target } => {
                write!(f, "node {} assigned to non-master {}", node + 1, target + 1)
            }
            Violation::MasterNotSelfAssigned { master } => {
                write!(f, "master {} is not in its own cluster", master + 1)
            }
            Violation::ClusterTooLarge { master, size } => {
                write!(f, "cluster of master {} has {} nodes (cap {})", master + 1, size, CLUSTER_CAPACITY)
            }
            Violation::OutOfRange { node, master, distance } => {
                write!(f, "node {} is {:.3} m from master {}", node + 1, distance, master + 1)
            }
            Violation::MasterWithoutWifi { master } => write!(f, "master {} has no Wi-Fi", master + 1),
            Violation::MasterLowBattery { master, battery } => {
                write!(f, "master {} battery {:.1}% below threshold", master + 1, battery)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// Drops constraint-I violations, for partial assignments that report
    /// uncovered nodes separately.
    pub fn ignoring_unassigned(&self) -> ValidationReport {
        ValidationReport {
            violations: self
                .violations
                .iter()
                .filter(|v| !matches!(v, Violation::Unassigned { .. }))
                .cloned()
                .collect(),
        }
    }
}

/// Checks constraints I-V plus master self-assignment.
pub fn validate_assignment(
    inst: &Instance,
    asg: &ClusterAssignment,
    d_max: f64,
    battery_threshold: f64,
) -> Result<ValidationReport> {
    let n = inst.len();
    if asg.master_of.len() != n || asg.is_master.len() != n {
        return Err(Error::Structure(format!(
            "assignment sized {}/{} for an instance of {} nodes",
            asg.master_of.len(),
            asg.is_master.len(),
            n
        )));
    }
    if let Some(j) = asg.master_of.iter().flatten().find(|&&j| j >= n) {
        return Err(Error::Structure(format!("master index {} out of bounds", j)));
    }

    let mut violations = Vec::new();
    for (i, m) in asg.master_of.iter().enumerate() {
        match *m {
            None => violations.push(Violation::Unassigned { node: i }),
            Some(j) => {
                if !asg.is_master[j] {
                    violations.push(Violation::NotAMaster { node: i, target: j });
                }
                let d = inst.nodes[i].distance_to(&inst.nodes[j]);
                if d > d_max {
                    violations.push(Violation::OutOfRange {
                        node: i,
                        master: j,
                        distance: d,
                    });
                }
            }
        }
    }
    let sizes = asg.cluster_sizes();
    for j in asg.masters() {
        if asg.master_of[j] != Some(j) {
            violations.push(Violation::MasterNotSelfAssigned { master: j });
        }
        if sizes[j] > CLUSTER_CAPACITY {
            violations.push(Violation::ClusterTooLarge {
                master: j,
                size: sizes[j],
            });
        }
        let e = eligibility(&inst.nodes[j], battery_threshold);
        if !e.wifi {
            violations.push(Violation::MasterWithoutWifi { master: j });
        }
        if !e.battery {
            violations.push(Violation::MasterLowBattery {
                master: j,
                battery: inst.nodes[j].battery,
            });
        }
    }
    Ok(ValidationReport { violations })
}

/// Writes `node_id,role,master_id` with 1-based ids; uncovered nodes get
/// role `uncovered` and an empty master cell.
pub fn write_assignment_csv<W: Write>(asg: &ClusterAssignment, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node_id", "role", "master_id"])?;
    for (i, m) in asg.master_of.iter().enumerate() {
        let (role, master) = match *m {
            Some(j) if j == i => ("master", (j + 1).to_string()),
            Some(j) => ("member", (j + 1).to_string()),
            None => ("uncovered", String::new()),
        };
        w.write_record([(i + 1).to_string(), role.to_string(), master])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn node(id: usize, x: f64, y: f64, battery: f64, wifi: bool) -> Node {
        Node { id, x, y, battery, wifi }
    }

    fn inst(nodes: Vec<Node>) -> Instance {
        Instance::new(100.0, 100.0, 0, nodes).unwrap()
    }

    #[test]
    fn generate_default_field() {
        let p = GenParams::default();
        let inst = generate_instance(&p).unwrap();
        assert_eq!(inst.len(), 100);
        assert!(eligible_mask(&inst, 50.0).iter().all(|&e| e));
        assert_eq!(inst, generate_instance(&p).unwrap());
    }

    #[test]
    fn generate_empty() {
        let inst = generate_instance(&GenParams { n: 0, ..GenParams::default() }).unwrap();
        assert!(inst.is_empty());
    }

    #[test]
    fn generate_rejects_bad_ranges() {
        let base = GenParams::default();
        assert!(generate_instance(&GenParams { wifi_prob: 1.5, ..base.clone() }).is_err());
        assert!(generate_instance(&GenParams { battery_low: 60.0, battery_high: 40.0, ..base.clone() }).is_err());
        assert!(generate_instance(&GenParams { area_width: 0.0, ..base }).is_err());
    }

    #[test]
    fn three_four_five() {
        let inst = inst(vec![node(1, 0.0, 0.0, 60.0, true), node(2, 3.0, 4.0, 60.0, true)]);
        let c = distance_matrix(&inst);
        assert_eq!(c.get(0, 1), 5.0);
        assert_eq!(c.get(1, 0), 5.0);
        assert_eq!(c.get(0, 0), 0.0);
    }

    #[test]
    fn eligibility_boundaries() {
        assert_eq!(
            eligibility(&node(1, 0.0, 0.0, 50.0, true), 50.0),
            Eligibility { wifi: true, battery: true }
        );
        let low = eligibility(&node(1, 0.0, 0.0, 49.9, true), 50.0);
        assert_eq!(low, Eligibility { wifi: true, battery: false });
        assert!(!low.is_eligible());
        let nowifi = eligibility(&node(1, 0.0, 0.0, 90.0, false), 50.0);
        assert_eq!(nowifi, Eligibility { wifi: false, battery: true });
        assert!(!nowifi.is_eligible());
        // empty battery is never eligible
        assert!(!eligibility(&node(1, 0.0, 0.0, 0.0, true), 0.0).is_eligible());
    }

    #[test]
    fn singleton_is_valid() {
        let inst = inst(vec![node(1, 1.0, 1.0, 70.0, true)]);
        let asg = ClusterAssignment::from_masters(vec![Some(0)]);
        assert!(validate_assignment(&inst, &asg, 10.0, 50.0).unwrap().is_valid());
    }

    #[test]
    fn nine_in_one_cluster_violates_capacity() {
        let nodes = (1..=9).map(|k| node(k, 1.0, 1.0, 70.0, true)).collect();
        let inst = inst(nodes);
        let asg = ClusterAssignment::from_masters(vec![Some(0); 9]);
        let rep = validate_assignment(&inst, &asg, 10.0, 50.0).unwrap();
        assert_eq!(rep.violations, vec![Violation::ClusterTooLarge { master: 0, size: 9 }]);
    }

    #[test]
    fn far_member_violates_range() {
        let inst = inst(vec![node(1, 0.0, 0.0, 70.0, true), node(2, 12.0, 0.0, 70.0, true)]);
        let asg = ClusterAssignment::from_masters(vec![Some(0), Some(0)]);
        let rep = validate_assignment(&inst, &asg, 10.0, 50.0).unwrap();
        assert_eq!(
            rep.violations,
            vec![Violation::OutOfRange { node: 1, master: 0, distance: 12.0 }]
        );
    }

    #[test]
    fn ineligible_master_flags_iv_and_v() {
        let inst = inst(vec![node(1, 0.0, 0.0, 30.0, false)]);
        let asg = ClusterAssignment::from_masters(vec![Some(0)]);
        let rep = validate_assignment(&inst, &asg, 10.0, 50.0).unwrap();
        assert_eq!(rep.violations.len(), 2);
    }

    #[test]
    fn dimension_mismatch_is_structural() {
        let inst = inst(vec![node(1, 0.0, 0.0, 70.0, true)]);
        let asg = ClusterAssignment::from_masters(vec![Some(0), Some(0)]);
        assert!(matches!(validate_assignment(&inst, &asg, 10.0, 50.0), Err(Error::Structure(_))));
    }

    #[test]
    fn json_round_trip() {
        let inst = generate_instance(&GenParams { n: 30, seed: 9, wifi_prob: 0.7, ..GenParams::default() }).unwrap();
        let back = Instance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn rejects_non_contiguous_ids() {
        let r = Instance::new(10.0, 10.0, 0, vec![node(2, 0.0, 0.0, 60.0, true)]);
        assert!(matches!(r, Err(Error::Structure(_))));
    }
}
