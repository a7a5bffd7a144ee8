use std::time::Duration;

use piconet_core::*;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = GenParams> {
    (0usize..40, 1.0f64..30.0, 1.0f64..30.0, any::<u64>(), 0.0f64..=1.0, 0.0f64..=100.0)
        .prop_flat_map(|(n, w, h, seed, wifi_prob, lo)| {
            (lo..=100.0).prop_map(move |hi| GenParams {
                n,
                area_width: w,
                area_height: h,
                seed,
                wifi_prob,
                battery_low: lo,
                battery_high: hi,
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_matrix_is_a_metric(p in params()) {
        let inst = generate_instance(&p).unwrap();
        let c = distance_matrix(&inst);
        for i in 0..inst.len() {
            prop_assert_eq!(c.get(i, i), 0.0);
            for j in 0..inst.len() {
                prop_assert_eq!(c.get(i, j), c.get(j, i));
                let (a, b) = (&inst.nodes[i], &inst.nodes[j]);
                let naive = ((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y)).sqrt();
                prop_assert!((c.get(i, j) - naive).abs() <= 1e-12 * naive.max(1.0));
            }
        }
    }

    #[test]
    fn generation_is_replayable_and_in_bounds(p in params()) {
        let a = generate_instance(&p).unwrap();
        prop_assert_eq!(&a, &generate_instance(&p).unwrap());
        prop_assert_eq!(a.len(), p.n);
        for node in &a.nodes {
            prop_assert!((0.0..=p.area_width).contains(&node.x));
            prop_assert!((0.0..=p.area_height).contains(&node.y));
            prop_assert!(p.battery_low <= node.battery && node.battery <= p.battery_high);
        }
        prop_assert_eq!(Instance::from_json(&a.to_json().unwrap()).unwrap(), a);
    }

    #[test]
    fn eligibility_monotone_in_battery(b in 0.0f64..=100.0, extra in 0.0f64..=100.0, wifi: bool, thr in 0.0f64..=100.0) {
        let low = Node { id: 1, x: 0.0, y: 0.0, battery: b, wifi };
        let high = Node { battery: (b + extra).min(100.0), ..low.clone() };
        if eligibility(&low, thr).is_eligible() {
            prop_assert!(eligibility(&high, thr).is_eligible());
        }
    }

    #[test]
    fn heuristic_output_is_valid(p in params(), d_max in 1.0f64..15.0) {
        let inst = generate_instance(&p).unwrap();
        let asg = iterative_cluster(&inst, d_max, 50.0);
        let report = validate_assignment(&inst, &asg, d_max, 50.0).unwrap();
        prop_assert!(report.ignoring_unassigned().is_valid(), "{:?}", report.violations);
        let covered = inst.len() - asg.uncovered().len();
        prop_assert!(asg.cluster_count() >= covered.div_ceil(8));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exact_output_is_valid(seed in any::<u64>(), n in 1usize..25, d_max in 3.0f64..12.0, scenario in 1u8..=3) {
        let inst = generate_instance(&GenParams { n, seed, wifi_prob: 0.8, battery_low: 30.0, ..GenParams::default() }).unwrap();
        let model = build_model(&inst, Objective::from_scenario(scenario).unwrap(), 100.0, d_max, 50.0);
        match solve_exact(&model, Duration::from_secs(30)) {
            Ok(s) => {
                let report = validate_assignment(&inst, &s.assignment, d_max, 50.0).unwrap();
                prop_assert!(report.is_valid(), "{:?}", report.violations);
                prop_assert!(s.cluster_count >= min_cluster_lower_bound(n));
                prop_assert_eq!(s.z, model.evaluate(&s.assignment));
            }
            Err(Error::Infeasible { node }) => prop_assert!((1..=n).contains(&node)),
            Err(e) => prop_assert!(false, "{}", e),
        }
    }

    #[test]
    fn all_in_range_heuristic_fills_clusters(seed in any::<u64>(), n in 1usize..60) {
        // a 5x5 field keeps every pair within 10 m
        let inst = generate_instance(&GenParams { n, seed, area_width: 5.0, area_height: 5.0, ..GenParams::default() }).unwrap();
        let asg = iterative_cluster(&inst, 10.0, 50.0);
        prop_assert_eq!(asg.cluster_count(), n.div_ceil(8));
    }
}
