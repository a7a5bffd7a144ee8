//! Branch-and-bound over master openings.
//!
//! Each search node fixes some masters open or closed. Its lower bound comes
//! from relaxing the one-cluster-per-node rows with multipliers, which splits
//! the problem into one small subproblem per master (open it and take its
//! seven most profitable members), tightened with bounds on the number of
//! masters. Multipliers are improved by subgradient steps and inherited by
//! children; branching picks the master the ascent left most undecided.
//! Upper bounds come from solving the capacitated assignment exactly for the
//! masters the relaxation opens. The search is sequential, so results do not
//! depend on scheduling.
//!
//! When the fixed cost exceeds any achievable total distance the optimum is
//! lexicographic: fewest masters first, then least distance. That case is
//! solved in two phases so the multipliers never have to resolve metres
//! against a huge per-master cost.

use std::time::{Duration, Instant};

use super::flow::assign_to_open;
use super::{min_cluster_lower_bound, ModelSpec, Objective, Solution};
use crate::error::{Error, Result};
use crate::model::{ClusterAssignment, CLUSTER_CAPACITY};

const SLOTS: usize = CLUSTER_CAPACITY - 1;

const ROOT_ITERATIONS: usize = 3000;
const ROOT_STALL: usize = 30;
const ROOT_STEP: f64 = 2.0;
const CHILD_ITERATIONS: usize = 80;
const CHILD_STALL: usize = 8;
const CHILD_STEP: f64 = 0.5;
const MIN_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fix {
    Free,
    Open,
    Closed,
}

struct Relaxation {
    value: f64,
    /// Reduced cost of opening each master; infinite for ineligible nodes.
    v: Vec<f64>,
    open: Vec<bool>,
    subgradient: Vec<f64>,
    /// Fraction of ascent iterations in which each master was open.
    frequency: Vec<f64>,
}

struct Incumbent {
    assignment: ClusterAssignment,
    z: f64,
}

struct Search<'a> {
    model: &'a ModelSpec,
    n: usize,
    dist_w: f64,
    fix_w: f64,
    cand: Vec<Vec<(usize, f64)>>,
    /// `serve[j]`: nodes other than `j` that may join master `j`, with weighted distance.
    serve: Vec<Vec<(usize, f64)>>,
    min_open: usize,
    max_open: usize,
    best: Option<Incumbent>,
    explored: u64,
    deadline: Instant,
    timed_out: bool,
    scratch: Vec<f64>,
}

/// Solves the model to proven optimality, or returns the best incumbent with
/// `optimal = false` once `time_limit` elapses.
pub fn solve_exact(model: &ModelSpec, time_limit: Duration) -> Result<Solution> {
    model.check()?;
    let n = model.len();
    if n == 0 {
        return Ok(Solution::new(model, ClusterAssignment::from_masters(Vec::new()), true, 0));
    }
    let start = Instant::now();
    let deadline = start
        .checked_add(time_limit)
        .unwrap_or(start + Duration::from_secs(86_400 * 365));
    let cand = model.candidates();
    if let Some(i) = cand.iter().position(|c| c.is_empty()) {
        return Err(Error::Infeasible { node: i + 1 });
    }
    let all = assign_to_open(&cand, &model.eligible);
    if !all.complete {
        let i = all.master_of.iter().position(|m| m.is_none()).unwrap_or(0);
        return Err(Error::Infeasible { node: i + 1 });
    }
    let everyone = ClusterAssignment::from_masters(all.master_of);

    if model.objective == Objective::Combined && model.fixed_cost > distance_ceiling(&cand) {
        let mut phase1 = Search::new(model, cand.clone(), (0.0, 1.0), deadline);
        phase1.offer_assignment(everyone);
        phase1.local_search();
        phase1.run();
        let fewest = phase1.best.take().expect("feasible model has an incumbent");
        let mut phase2 = Search::new(model, cand, (1.0, 0.0), deadline);
        phase2.explored = phase1.explored;
        if phase1.timed_out {
            phase2.timed_out = true;
            phase2.offer_assignment(fewest.assignment);
            return Ok(phase2.finish());
        }
        let masters = fewest.assignment.cluster_count();
        phase2.min_open = masters;
        phase2.max_open = masters;
        phase2.offer_assignment(fewest.assignment);
        phase2.local_search();
        phase2.run();
        return Ok(phase2.finish());
    }

    let mut search = Search::new(model, cand, model.weights(), deadline);
    search.offer_assignment(everyone);
    search.local_search();
    search.run();
    Ok(search.finish())
}

/// Upper bound on the distance term of any feasible assignment.
fn distance_ceiling(cand: &[Vec<(usize, f64)>]) -> f64 {
    cand.iter()
        .map(|list| list.iter().map(|&(_, d)| d).fold(0.0, f64::max))
        .sum()
}

impl<'a> Search<'a> {
    fn new(model: &'a ModelSpec, cand: Vec<Vec<(usize, f64)>>, weights: (f64, f64), deadline: Instant) -> Self {
        let n = model.len();
        let (dist_w, fix_w) = weights;
        let mut serve = vec![Vec::new(); n];
        for (i, list) in cand.iter().enumerate() {
            for &(j, d) in list {
                if j != i {
                    serve[j].push((i, dist_w * d));
                }
            }
        }
        Search {
            model,
            n,
            dist_w,
            fix_w,
            cand,
            serve,
            min_open: min_cluster_lower_bound(n),
            max_open: n,
            best: None,
            explored: 0,
            deadline,
            timed_out: false,
            scratch: Vec::with_capacity(n),
        }
    }

    fn finish(self) -> Solution {
        let best = self.best.expect("search always holds an incumbent");
        Solution::new(self.model, best.assignment, !self.timed_out, self.explored)
    }

    fn score(&self, asg: &ClusterAssignment) -> f64 {
        let count = asg.cluster_count() as f64;
        if self.dist_w == 0.0 {
            self.fix_w * count
        } else {
            self.dist_w * asg.distance_term(&self.model.c) + self.fix_w * count
        }
    }

    fn upper(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.z)
    }

    fn tolerance(&self) -> f64 {
        1e-7 + 1e-13 * self.upper().abs()
    }

    fn prunes(&self, bound: f64) -> bool {
        if self.dist_w == 0.0 {
            (bound - 1e-6).ceil() >= self.upper()
        } else {
            bound >= self.upper() - self.tolerance()
        }
    }

    fn offer_assignment(&mut self, asg: ClusterAssignment) -> bool {
        let count = asg.cluster_count();
        if count < self.min_open || count > self.max_open {
            return false;
        }
        let z = self.score(&asg);
        if self.best.is_none() || z < self.upper() - self.tolerance() {
            self.best = Some(Incumbent { assignment: asg, z });
            return true;
        }
        false
    }

    fn offer(&mut self, open: &[bool]) -> bool {
        let count = open.iter().filter(|&&o| o).count();
        if count < self.min_open || count > self.max_open {
            return false;
        }
        let t = assign_to_open(&self.cand, open);
        if !t.complete {
            return false;
        }
        self.offer_assignment(ClusterAssignment::from_masters(t.master_of))
    }

    /// Drop, swap and add moves on the incumbent's master set until none
    /// improves it.
    fn local_search(&mut self) {
        while Instant::now() < self.deadline {
            let Some(best) = self.best.as_ref() else { return };
            let open = best.assignment.is_master.clone();
            let opened: Vec<usize> = (0..self.n).filter(|&j| open[j]).collect();
            let closed: Vec<usize> = (0..self.n).filter(|&j| !open[j] && self.model.eligible[j]).collect();
            let mut moves: Vec<(Option<usize>, Option<usize>)> = opened.iter().map(|&j| (Some(j), None)).collect();
            for &j in &opened {
                moves.extend(closed.iter().map(|&k| (Some(j), Some(k))));
            }
            moves.extend(closed.iter().map(|&k| (None, Some(k))));

            let improved = moves.into_iter().any(|(drop, add)| {
                let mut trial = open.clone();
                if let Some(j) = drop {
                    trial[j] = false;
                }
                if let Some(k) = add {
                    trial[k] = true;
                }
                self.offer(&trial)
            });
            if !improved {
                return;
            }
        }
    }

    /// Coverage propagation. Returns false when the node cannot be feasible.
    fn propagate(&self, fix: &mut [Fix]) -> bool {
        loop {
            let mut changed = false;
            for i in 0..self.n {
                let mut live = self.cand[i].iter().filter(|(j, _)| fix[*j] != Fix::Closed);
                match (live.next(), live.next()) {
                    (None, _) => return false,
                    (Some(&(j, _)), None) if fix[j] == Fix::Free => {
                        fix[j] = Fix::Open;
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                break;
            }
        }
        let available = fix.iter().filter(|&&f| f != Fix::Closed).count();
        let forced = fix.iter().filter(|&&f| f == Fix::Open).count();
        available >= self.min_open && forced <= self.max_open && available * CLUSTER_CAPACITY >= self.n
    }

    fn reduced_costs(&mut self, u: &[f64]) -> Vec<f64> {
        let mut v = vec![f64::INFINITY; self.n];
        for j in 0..self.n {
            if !self.model.eligible[j] {
                continue;
            }
            self.scratch.clear();
            self.scratch
                .extend(self.serve[j].iter().map(|&(i, w)| w - u[i]).filter(|&r| r < 0.0));
            let take = SLOTS.min(self.scratch.len());
            if take < self.scratch.len() {
                self.scratch.select_nth_unstable_by(take, |a, b| a.total_cmp(b));
            }
            let gain: f64 = self.scratch[..take].iter().sum();
            v[j] = self.fix_w - u[j] + gain;
        }
        v
    }

    /// Chooses which masters the relaxation opens: every forced one, then
    /// free ones by increasing reduced cost while negative, within the
    /// cardinality bounds. `None` if the bounds cannot be met.
    fn choose_open(&self, v: &[f64], fix: &[Fix]) -> Option<(f64, Vec<bool>)> {
        let mut open = vec![false; self.n];
        let mut total = 0.0;
        let mut count = 0;
        let mut free: Vec<usize> = Vec::new();
        for j in 0..self.n {
            match fix[j] {
                Fix::Open => {
                    open[j] = true;
                    total += v[j];
                    count += 1;
                }
                Fix::Free => free.push(j),
                Fix::Closed => {}
            }
        }
        if count > self.max_open || count + free.len() < self.min_open {
            return None;
        }
        free.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
        for j in free {
            if count >= self.max_open || (count >= self.min_open && v[j] >= 0.0) {
                break;
            }
            open[j] = true;
            total += v[j];
            count += 1;
        }
        Some((total, open))
    }

    fn relax(&mut self, u: &[f64], fix: &[Fix]) -> Option<Relaxation> {
        let v = self.reduced_costs(u);
        let (sel, open) = self.choose_open(&v, fix)?;
        let value = u.iter().sum::<f64>() + sel;
        let mut subgradient = vec![1.0; self.n];
        let mut members: Vec<(f64, usize)> = Vec::new();
        for j in 0..self.n {
            if !open[j] {
                continue;
            }
            subgradient[j] -= 1.0;
            members.clear();
            members.extend(
                self.serve[j]
                    .iter()
                    .map(|&(i, w)| (w - u[i], i))
                    .filter(|&(r, _)| r < 0.0),
            );
            members.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, i) in members.iter().take(SLOTS) {
                subgradient[i] -= 1.0;
            }
        }
        Some(Relaxation {
            value,
            v,
            open,
            subgradient,
            frequency: Vec::new(),
        })
    }

    /// Subgradient ascent on the multipliers. Returns the best bound found
    /// together with its relaxation, leaving the best multipliers in `u`.
    fn ascend(
        &mut self,
        u: &mut Vec<f64>,
        fix: &[Fix],
        iters: usize,
        stall_limit: usize,
        mut step: f64,
    ) -> Option<(f64, Relaxation)> {
        let mut best_u = u.clone();
        let mut best: Option<(f64, Relaxation)> = None;
        let mut stall = 0;
        let mut counts = vec![0u32; self.n];
        let mut rounds = 0u32;
        for _ in 0..iters {
            let r = self.relax(u, fix)?;
            rounds += 1;
            for (c, &o) in counts.iter_mut().zip(&r.open) {
                *c += u32::from(o);
            }
            let improved = best.as_ref().is_none_or(|(b, _)| r.value > *b + 1e-12);
            if improved {
                best_u.clone_from(u);
                stall = 0;
            } else {
                stall += 1;
                if stall >= stall_limit {
                    step *= 0.5;
                    stall = 0;
                }
            }
            let norm: f64 = r.subgradient.iter().map(|g| g * g).sum();
            let value = r.value;
            let direction = r.subgradient.clone();
            if improved {
                best = Some((value, r));
            }
            let b = best.as_ref().map_or(value, |(b, _)| *b);
            if self.prunes(b) || norm == 0.0 || step < MIN_STEP {
                break;
            }
            let ub = self.upper();
            let gap = (ub - value).max(1e-6 * (1.0 + ub.abs()));
            let t = step * gap / norm;
            for (ui, g) in u.iter_mut().zip(&direction) {
                *ui += t * g;
            }
        }
        u.clone_from(&best_u);
        if let Some((_, r)) = best.as_mut() {
            r.frequency = counts.iter().map(|&c| f64::from(c) / f64::from(rounds.max(1))).collect();
        }
        best
    }

    fn initial_multipliers(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let near = self.cand[i].iter().map(|&(_, d)| d).find(|&d| d > 0.0).unwrap_or(0.0);
                self.dist_w * near + self.fix_w / CLUSTER_CAPACITY as f64
            })
            .collect()
    }

    fn run(&mut self) {
        let root_fix: Vec<Fix> = self
            .model
            .eligible
            .iter()
            .map(|&e| if e { Fix::Free } else { Fix::Closed })
            .collect();
        let mut stack: Vec<(Vec<Fix>, Vec<f64>, bool)> = vec![(root_fix, self.initial_multipliers(), true)];

        while let Some((mut fix, mut u, is_root)) = stack.pop() {
            if Instant::now() >= self.deadline {
                self.timed_out = true;
                return;
            }
            self.explored += 1;

            let (iters, stall, step) = if is_root {
                (ROOT_ITERATIONS, ROOT_STALL, ROOT_STEP)
            } else {
                (CHILD_ITERATIONS, CHILD_STALL, CHILD_STEP)
            };
            // each pass either settles the node or fixes at least one master
            let mut relaxed = None;
            loop {
                if !self.propagate(&mut fix) {
                    break;
                }
                if !fix.contains(&Fix::Free) {
                    let open: Vec<bool> = fix.iter().map(|&f| f == Fix::Open).collect();
                    self.offer(&open);
                    break;
                }
                let Some((bound, r)) = self.ascend(&mut u, &fix, iters, stall, step) else {
                    break;
                };
                if self.prunes(bound) {
                    break;
                }
                let mut open = r.open.clone();
                for j in 0..self.n {
                    if fix[j] == Fix::Open {
                        open[j] = true;
                    }
                }
                self.offer(&open);
                if self.prunes(bound) {
                    break;
                }
                if !self.fix_by_reduced_cost(&u, &r, &mut fix) {
                    relaxed = Some(r);
                    break;
                }
            }
            let Some(r) = relaxed else { continue };

            let branch = (0..self.n)
                .filter(|&j| fix[j] == Fix::Free)
                .min_by(|&a, &b| {
                    let fa = (r.frequency[a] - 0.5).abs();
                    let fb = (r.frequency[b] - 0.5).abs();
                    fa.total_cmp(&fb)
                        .then(r.v[a].abs().total_cmp(&r.v[b].abs()))
                        .then(a.cmp(&b))
                })
                .expect("unsettled node has a free master");
            let mut closed = fix.clone();
            closed[branch] = Fix::Closed;
            let mut opened = fix;
            opened[branch] = Fix::Open;
            stack.push((closed, u.clone(), false));
            stack.push((opened, u, false));
        }
    }

    /// Fixes free masters whose opposite choice would push the bound past the
    /// incumbent. Returns true if anything changed.
    fn fix_by_reduced_cost(&self, u: &[f64], r: &Relaxation, fix: &mut [Fix]) -> bool {
        let base: f64 = u.iter().sum();
        let mut changed = false;
        for j in 0..self.n {
            if fix[j] != Fix::Free {
                continue;
            }
            let (flip, keep) = if r.open[j] {
                (Fix::Closed, Fix::Open)
            } else {
                (Fix::Open, Fix::Closed)
            };
            fix[j] = flip;
            match self.choose_open(&r.v, fix).map(|(s, _)| base + s) {
                Some(b) if !self.prunes(b) => fix[j] = Fix::Free,
                _ => {
                    fix[j] = keep;
                    changed = true;
                }
            }
        }
        changed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{brute_force, build_model, Objective};
    use crate::model::{Instance, Node};

    fn field(points: &[(f64, f64, f64, bool)]) -> Instance {
        let nodes = points
            .iter()
            .enumerate()
            .map(|(k, &(x, y, battery, wifi))| Node { id: k + 1, x, y, battery, wifi })
            .collect();
        Instance::new(100.0, 100.0, 0, nodes).unwrap()
    }

    const LIMIT: Duration = Duration::from_secs(30);

    #[test]
    fn forced_singleton() {
        let inst = field(&[(5.0, 5.0, 80.0, true)]);
        let m = build_model(&inst, Objective::Combined, 100.0, 10.0, 50.0);
        let s = solve_exact(&m, LIMIT).unwrap();
        assert_eq!(s.z, 100.0);
        assert_eq!(s.cluster_count, 1);
        assert_eq!(s.distance_term, 0.0);
        assert!(s.optimal);
    }

    #[test]
    fn pigeonhole_infeasible() {
        let mut pts = vec![(1.0, 1.0, 40.0, true); 9];
        pts[0].2 = 90.0;
        let inst = field(&pts);
        let m = build_model(&inst, Objective::Combined, 100.0, 10.0, 50.0);
        assert!(matches!(solve_exact(&m, LIMIT), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn isolated_ineligible_node_is_named() {
        let inst = field(&[(0.0, 0.0, 90.0, true), (50.0, 50.0, 90.0, false)]);
        let m = build_model(&inst, Objective::Combined, 100.0, 10.0, 50.0);
        match solve_exact(&m, LIMIT) {
            Err(Error::Infeasible { node }) => assert_eq!(node, 2),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn two_close_nodes_share_a_cluster() {
        let inst = field(&[(0.0, 0.0, 90.0, true), (3.0, 0.0, 80.0, true)]);
        let m = build_model(&inst, Objective::Combined, 100.0, 10.0, 50.0);
        let s = solve_exact(&m, LIMIT).unwrap();
        assert_eq!(s.z, 103.0);
        assert_eq!(s.cluster_count, 1);
    }

    #[test]
    fn huge_fixed_cost_minimizes_masters_then_distance() {
        let pts: Vec<(f64, f64, f64, bool)> = (0..10)
            .map(|k| ((k % 4) as f64 * 2.5, (k / 4) as f64 * 3.0, 60.0 + k as f64, k % 3 != 0))
            .collect();
        let inst = field(&pts);
        let m = build_model(&inst, Objective::Combined, 1e9, 10.0, 50.0);
        let s = solve_exact(&m, LIMIT).unwrap();
        let b = brute_force(&m).unwrap();
        assert!(s.optimal);
        assert_eq!(s.cluster_count, b.cluster_count);
        assert!((s.distance_term - b.distance_term).abs() < 1e-9);
    }

    #[test]
    fn zero_time_limit_returns_incumbent() {
        let inst = field(&[(0.0, 0.0, 90.0, true), (3.0, 0.0, 80.0, true), (6.0, 0.0, 80.0, true)]);
        let m = build_model(&inst, Objective::Combined, 100.0, 10.0, 50.0);
        let s = solve_exact(&m, Duration::ZERO).unwrap();
        assert!(!s.optimal);
        assert_eq!(s.assignment.len(), 3);
    }
}
