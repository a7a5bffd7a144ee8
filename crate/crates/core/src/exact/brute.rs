//! Exhaustive reference solver: every subset of eligible masters, and for each
//! subset every way of distributing the remaining nodes over it.

use super::{ModelSpec, Solution};
use crate::error::{Error, Result};
use crate::model::{ClusterAssignment, CLUSTER_CAPACITY};

pub const BRUTE_FORCE_LIMIT: usize = 12;

struct Enumeration<'a> {
    model: &'a ModelSpec,
    dist_w: f64,
    clients: Vec<usize>,
    best_cost: f64,
    best: Option<Vec<Option<usize>>>,
}

impl Enumeration<'_> {
    fn assign(&mut self, k: usize, masters: &[usize], load: &mut [usize], cur: &mut Vec<Option<usize>>, cost: f64) {
        if cost > self.best_cost {
            return;
        }
        if k == self.clients.len() {
            let total = self.model.evaluate(&ClusterAssignment::from_masters(cur.clone()));
            if total < self.best_cost {
                self.best_cost = total;
                self.best = Some(cur.clone());
            }
            return;
        }
        let i = self.clients[k];
        for (slot, &j) in masters.iter().enumerate() {
            let d = self.model.c.get(i, j);
            if d > self.model.d_max || load[slot] >= CLUSTER_CAPACITY {
                continue;
            }
            load[slot] += 1;
            cur[i] = Some(j);
            self.assign(k + 1, masters, load, cur, cost + self.dist_w * d);
            cur[i] = None;
            load[slot] -= 1;
        }
    }
}

/// Provably optimal solution by exhaustive search. Refuses instances larger
/// than [`BRUTE_FORCE_LIMIT`].
pub fn brute_force(model: &ModelSpec) -> Result<Solution> {
    model.check()?;
    let n = model.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let (dist_w, fix_w) = model.weights();
    let eligible: Vec<usize> = (0..n).filter(|&j| model.eligible[j]).collect();
    let mut search = Enumeration {
        model,
        dist_w,
        clients: Vec::new(),
        best_cost: f64::INFINITY,
        best: None,
    };
    for mask in 0u32..(1u32 << eligible.len()) {
        let masters: Vec<usize> = eligible
            .iter()
            .enumerate()
            .filter(|(b, _)| mask & (1 << b) != 0)
            .map(|(_, &j)| j)
            .collect();
        if masters.len() * CLUSTER_CAPACITY < n {
            continue;
        }
        let fixed = fix_w * masters.len() as f64;
        if fixed > search.best_cost {
            continue;
        }
        let mut cur = vec![None; n];
        for &j in &masters {
            cur[j] = Some(j);
        }
        search.clients = (0..n).filter(|i| cur[*i].is_none()).collect();
        let mut load = vec![1; masters.len()];
        search.assign(0, &masters, &mut load, &mut cur, fixed);
    }
    match search.best {
        Some(master_of) => Ok(Solution::new(model, ClusterAssignment::from_masters(master_of), true, 0)),
        None => {
            // name a node no eligible master can reach, else the first node
            let node = (0..n)
                .find(|&i| !eligible.iter().any(|&j| model.c.get(i, j) <= model.d_max))
                .unwrap_or(0);
            Err(Error::Infeasible { node: node + 1 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{build_model, Objective};
    use crate::model::{Instance, Node};

    fn line(xs: &[f64]) -> Instance {
        let nodes = xs
            .iter()
            .enumerate()
            .map(|(k, &x)| Node { id: k + 1, x, y: 0.0, battery: 80.0, wifi: true })
            .collect();
        Instance::new(100.0, 100.0, 0, nodes).unwrap()
    }

    #[test]
    fn two_nodes_three_meters() {
        // one cluster: 100 + 3; two singletons: 200
        let m = build_model(&line(&[0.0, 3.0]), Objective::Combined, 100.0, 10.0, 50.0);
        let s = brute_force(&m).unwrap();
        assert_eq!(s.z, 103.0);
        assert_eq!(s.cluster_count, 1);
    }

    #[test]
    fn two_nodes_out_of_range() {
        let m = build_model(&line(&[0.0, 15.0]), Objective::Combined, 100.0, 10.0, 50.0);
        let s = brute_force(&m).unwrap();
        assert_eq!(s.z, 200.0);
        assert_eq!(s.cluster_count, 2);
    }

    #[test]
    fn empty_model() {
        let m = build_model(&line(&[]), Objective::Combined, 100.0, 10.0, 50.0);
        let s = brute_force(&m).unwrap();
        assert_eq!(s.z, 0.0);
        assert_eq!(s.cluster_count, 0);
    }

    #[test]
    fn refuses_large() {
        let xs: Vec<f64> = (0..13).map(|k| k as f64).collect();
        let m = build_model(&line(&xs), Objective::Combined, 100.0, 10.0, 50.0);
        assert!(matches!(brute_force(&m), Err(Error::TooLarge { n: 13, .. })));
    }
}
