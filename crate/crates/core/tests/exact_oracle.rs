use std::time::Duration;

use piconet_core::model::DEFAULT_BATTERY_THRESHOLD;
use piconet_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LIMIT: Duration = Duration::from_secs(60);

struct Case {
    inst: Instance,
    d_max: f64,
    fixed_cost: f64,
}

fn random_case(rng: &mut ChaCha8Rng) -> Case {
    let n = rng.gen_range(1..=10);
    let side = rng.gen_range(5.0..25.0);
    let nodes = (0..n)
        .map(|k| Node {
            id: k + 1,
            x: rng.gen_range(0.0..=side),
            y: rng.gen_range(0.0..=side),
            battery: rng.gen_range(0.0..=100.0),
            wifi: rng.gen_bool(0.8),
        })
        .collect();
    Case {
        inst: Instance::new(side, side, 0, nodes).unwrap(),
        d_max: rng.gen_range(3.0..12.0),
        fixed_cost: [0.0, 1.0, 7.5, 100.0, 1e6][rng.gen_range(0..5)],
    }
}

#[test]
fn exact_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut feasible = 0;
    for case in 0..150 {
        let c = random_case(&mut rng);
        for objective in [Objective::DistanceOnly, Objective::ClusterCountOnly, Objective::Combined] {
            let model = build_model(&c.inst, objective, c.fixed_cost, c.d_max, DEFAULT_BATTERY_THRESHOLD);
            match (brute_force(&model), solve_exact(&model, LIMIT)) {
                (Ok(b), Ok(s)) => {
                    feasible += 1;
                    assert!(s.optimal);
                    assert_eq!(s.z, b.z, "case {case} {objective:?}");
                    let report = validate_assignment(&c.inst, &s.assignment, c.d_max, DEFAULT_BATTERY_THRESHOLD).unwrap();
                    assert!(report.is_valid(), "case {case}: {:?}", report.violations);
                    assert!(s.cluster_count >= min_cluster_lower_bound(c.inst.len()));
                }
                (Err(Error::Infeasible { .. }), Err(Error::Infeasible { .. })) => {}
                (b, s) => panic!("case {case}: brute {b:?} vs exact {s:?}"),
            }
        }
    }
    assert!(feasible >= 50, "only {feasible} feasible models");
}

#[test]
fn scenario_objectives_bracket_combined() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..40 {
        let c = random_case(&mut rng);
        let solve = |o| solve_exact(&build_model(&c.inst, o, c.fixed_cost, c.d_max, 50.0), LIMIT);
        let (Ok(s1), Ok(s2), Ok(s3)) = (
            solve(Objective::DistanceOnly),
            solve(Objective::ClusterCountOnly),
            solve(Objective::Combined),
        ) else {
            continue;
        };
        assert!(s1.distance_term <= s3.distance_term + 1e-9);
        assert!(s2.cluster_count <= s3.cluster_count);
        assert!((s3.z - (s3.distance_term + c.fixed_cost * s3.cluster_count as f64)).abs() <= 1e-9 * s3.z.max(1.0));
    }
}

#[test]
fn heuristic_never_beats_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..60 {
        let c = random_case(&mut rng);
        let model = build_model(&c.inst, Objective::Combined, c.fixed_cost, c.d_max, 50.0);
        let Ok(s) = solve_exact(&model, LIMIT) else { continue };
        let h = iterative_cluster(&c.inst, c.d_max, 50.0);
        let report = validate_assignment(&c.inst, &h, c.d_max, 50.0).unwrap();
        assert!(report.ignoring_unassigned().is_valid());
        if h.uncovered().is_empty() {
            assert!(model.evaluate(&h) >= s.z - 1e-9);
        }
        assert!(h.cluster_count() >= (c.inst.len() - h.uncovered().len()).div_ceil(8));
    }
}

#[test]
fn desk_scale_combined_is_proven() {
    for seed in 1..=3 {
        let inst = generate_instance(&GenParams { n: 40, seed, ..GenParams::default() }).unwrap();
        let model = build_model(&inst, Objective::Combined, 100.0, 10.0, 50.0);
        let s = solve_exact(&model, LIMIT).unwrap();
        assert!(s.optimal);
        assert_eq!(s.cluster_count, 5);
        assert!(validate_assignment(&inst, &s.assignment, 10.0, 50.0).unwrap().is_valid());
    }
}

#[test]
fn solver_is_deterministic() {
    let inst = generate_instance(&GenParams { n: 30, seed: 8, ..GenParams::default() }).unwrap();
    let model = build_model(&inst, Objective::Combined, 100.0, 6.0, 50.0);
    let a = solve_exact(&model, LIMIT).unwrap();
    let b = solve_exact(&model, LIMIT).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sweeps_are_monotone() {
    let inst = generate_instance(&GenParams { n: 30, seed: 3, ..GenParams::default() }).unwrap();
    let pts = run_sweep(&inst, &SweepSpec::d_max_default()).unwrap();
    let counts: Vec<usize> = pts.iter().filter_map(|p| p.solution.as_ref().map(|s| s.cluster_count)).collect();
    assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");

    let pts = run_sweep(&inst, &SweepSpec::f_exponent_default()).unwrap();
    let sols: Vec<&Solution> = pts.iter().map(|p| p.solution.as_ref().unwrap()).collect();
    assert!(sols.windows(2).all(|w| w[1].cluster_count <= w[0].cluster_count));
    assert!(sols.windows(2).all(|w| w[1].distance_term >= w[0].distance_term));
}

#[test]
fn tight_range_sweep_records_infeasibility() {
    let inst = generate_instance(&GenParams { n: 12, area_width: 60.0, area_height: 60.0, seed: 2, wifi_prob: 0.3, ..GenParams::default() }).unwrap();
    let pts = run_sweep(&inst, &SweepSpec::d_max_default()).unwrap();
    assert_eq!(pts.len(), 9);
    let first = &pts[0];
    assert!(first.solution.is_none() && first.infeasible_node.is_some());
}
