use std::collections::HashMap;
use std::time::Duration;

use piconet_core::exact::lp::{export_lp, lp_string, parse_lp, LpProblem, RowSense};
use piconet_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimizes a parsed 0/1 program by depth-first enumeration with bound
/// checks on every row. Knows nothing about clustering.
type Row = (Vec<(usize, f64)>, RowSense, f64);

struct Enumerator {
    obj: Vec<f64>,
    rows: Vec<Row>,
    touching: Vec<Vec<usize>>,
    value: Vec<Option<bool>>,
    best: Option<f64>,
}

impl Enumerator {
    fn new(p: &LpProblem) -> Self {
        let index: HashMap<&str, usize> = p.binaries.iter().enumerate().map(|(k, v)| (v.as_str(), k)).collect();
        let mut obj = vec![0.0; index.len()];
        for (v, c) in &p.objective {
            obj[index[v.as_str()]] += c;
        }
        let rows: Vec<_> = p
            .rows
            .iter()
            .map(|r| (r.terms.iter().map(|(v, c)| (index[v.as_str()], *c)).collect::<Vec<_>>(), r.sense, r.rhs))
            .collect();
        let mut touching = vec![Vec::new(); index.len()];
        for (k, (terms, _, _)) in rows.iter().enumerate() {
            for &(v, _) in terms {
                touching[v].push(k);
            }
        }
        assert!(obj.iter().all(|&c| c >= 0.0));
        Enumerator { value: vec![None; obj.len()], obj, rows, touching, best: None }
    }

    fn row_possible(&self, k: usize) -> bool {
        let (terms, sense, rhs) = &self.rows[k];
        let (mut lo, mut hi) = (0.0, 0.0);
        for &(v, c) in terms {
            match self.value[v] {
                Some(true) => {
                    lo += c;
                    hi += c;
                }
                Some(false) => {}
                None => {
                    lo += c.min(0.0);
                    hi += c.max(0.0);
                }
            }
        }
        let eps = 1e-9;
        match sense {
            RowSense::Le => lo <= rhs + eps,
            RowSense::Ge => hi >= rhs - eps,
            RowSense::Eq => lo <= rhs + eps && hi >= rhs - eps,
        }
    }

    fn search(&mut self, k: usize, cost: f64) {
        if self.best.is_some_and(|b| cost >= b) {
            return;
        }
        if k == self.obj.len() {
            self.best = Some(cost);
            return;
        }
        for v in [true, false] {
            self.value[k] = Some(v);
            if self.touching[k].clone().into_iter().all(|r| self.row_possible(r)) {
                self.search(k + 1, cost + if v { self.obj[k] } else { 0.0 });
            }
        }
        self.value[k] = None;
    }

    fn solve(mut self) -> Option<f64> {
        self.search(0, 0.0);
        self.best
    }
}

#[test]
fn reparsed_model_has_the_same_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut checked = 0;
    for _ in 0..40 {
        let n = rng.gen_range(1..=10);
        let side = rng.gen_range(4.0..16.0);
        let nodes = (0..n)
            .map(|k| Node {
                id: k + 1,
                x: rng.gen_range(0.0..=side),
                y: rng.gen_range(0.0..=side),
                battery: rng.gen_range(20.0..=100.0),
                wifi: rng.gen_bool(0.85),
            })
            .collect();
        let inst = Instance::new(side, side, 0, nodes).unwrap();
        let objective = Objective::from_scenario(rng.gen_range(1..=3)).unwrap();
        let model = build_model(&inst, objective, 25.0, rng.gen_range(3.0..10.0), 50.0);
        let Ok(text) = lp_string(&model) else { continue };
        let parsed = parse_lp(&text).unwrap();
        assert_eq!(parsed.objective_name, "Z");
        let lp_opt = Enumerator::new(&parsed).solve();
        match solve_exact(&model, Duration::from_secs(30)) {
            Ok(s) => {
                let z = lp_opt.expect("solver found a solution the LP rejects");
                assert!((z - s.z).abs() <= 1e-9 * s.z.abs().max(1.0), "lp {z} vs exact {}", s.z);
                checked += 1;
            }
            Err(Error::Infeasible { .. }) => assert!(lp_opt.is_none()),
            Err(e) => panic!("{e}"),
        }
    }
    assert!(checked >= 15, "only {checked} feasible models");
}

#[test]
fn export_writes_the_rendered_text() {
    let inst = generate_instance(&GenParams { n: 6, seed: 4, ..GenParams::default() }).unwrap();
    let model = build_model(&inst, Objective::Combined, 100.0, 10.0, 50.0);
    let dir = std::env::temp_dir().join(format!("piconet-lp-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("m.lp");
    export_lp(&model, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), lp_string(&model).unwrap());
    std::fs::remove_dir_all(&dir).unwrap();
}
