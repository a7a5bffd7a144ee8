//! Cluster formation for Bluetooth/Wi-Fi tracking networks.
//!
//! Nodes are grouped into piconets of one Wi-Fi-connected master and up to
//! seven Bluetooth slaves. The crate provides:
//!
//! * [`model`]: node fields, distances, master eligibility, constraint checks;
//! * [`exact`]: the clustering integer program, its exact solver, an
//!   exhaustive oracle, sensitivity sweeps and LP export;
//! * [`heuristic`]: the greedy highest-battery-first clustering and
//!   multi-round re-clustering under mobility and battery drain;
//! * [`interference`]: Monte Carlo frame error rates for co-located hopping
//!   piconets;
//! * [`metrics`]: energy, throughput and efficiency accounting, calibration
//!   and method comparison.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exact;
pub mod heuristic;
pub mod interference;
pub mod metrics;
pub mod model;

pub use error::{Error, Result};
pub use exact::{
    brute_force, build_model, min_cluster_lower_bound, run_sweep, solve_exact, write_sweep_csv, ModelSpec, Objective,
    Solution, SweepPoint, SweepSpec, SweepVariable,
};
pub use heuristic::{
    iterative_cluster, mobility_step, recluster_rounds, write_trace_csv, DrainModel, MobilityMode, MobilityModel,
    MobilityState, RoundTrace,
};
pub use interference::{
    ci95, fer_curve, fer_to_pc, simulate_fer, write_fer_csv, FerEstimate, FerParams, WifiInterferer,
};
pub use metrics::{
    assignment_energy, calibrate_energy, compare_methods, direct_energy, efficiency, throughput, total_energy, Calibration,
    CompareOptions, Comparison, EnergyBreakdown, EnergyParams, Method, MetricsRecord, TrafficSpec,
};
pub use model::{
    distance_matrix, eligibility, generate_instance, validate_assignment, write_assignment_csv, ClusterAssignment,
    DistanceMatrix, Eligibility, GenParams, Instance, Node, ValidationReport, Violation,
};
