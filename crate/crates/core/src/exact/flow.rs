//! Capacity-constrained assignment of non-master nodes to a fixed set of open
//! masters, solved as a min-cost flow with successive shortest paths
//! (Bellman-Ford queue variant, since residual arcs carry negative costs).

use std::collections::VecDeque;

use crate::model::CLUSTER_CAPACITY;

const EPS: f64 = 1e-12;

struct Edge {
    to: usize,
    cap: i32,
    cost: f64,
    rev: usize,
}

struct Graph {
    adj: Vec<Vec<Edge>>,
}

impl Graph {
    fn new(n: usize) -> Self {
        Graph {
            adj: (0..n).map(|_| Vec::new()).collect(),
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i32, cost: f64) -> (usize, usize) {
        let rf = self.adj[to].len();
        let rt = self.adj[from].len();
        self.adj[from].push(Edge { to, cap, cost, rev: rf });
        self.adj[to].push(Edge {
            to: from,
            cap: 0,
            cost: -cost,
            rev: rt,
        });
        (from, rt)
    }
}

/// Result of [`assign_to_open`].
#[derive(Debug, Clone)]
pub(crate) struct Transport {
    /// `Some(j)` for every node that found a master; open masters map to
    /// themselves.
    pub master_of: Vec<Option<usize>>,
    pub complete: bool,
}

/// Assigns every non-open node to an open master within range, at most
/// seven members per master, minimizing total distance. `cand[i]` lists the
/// masters node `i` may join together with the distance.
pub(crate) fn assign_to_open(cand: &[Vec<(usize, f64)>], open: &[bool]) -> Transport {
    let n = open.len();
    let source = 2 * n;
    let sink = 2 * n + 1;
    let mut g = Graph::new(2 * n + 2);
    let slots = (CLUSTER_CAPACITY - 1) as i32;

    let mut client_edges: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); n];
    let mut clients = 0;
    for i in 0..n {
        if open[i] {
            continue;
        }
        clients += 1;
        g.add_edge(source, i, 1, 0.0);
        for &(j, d) in &cand[i] {
            if open[j] {
                let (from, idx) = g.add_edge(i, n + j, 1, d);
                client_edges[i].push((from, idx, j));
            }
        }
    }
    for (j, _) in open.iter().enumerate().filter(|(_, o)| **o) {
        g.add_edge(n + j, sink, slots, 0.0);
    }

    let total = g.adj.len();
    let mut flow = 0;
    let mut dist = vec![f64::INFINITY; total];
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; total];
    let mut queued = vec![false; total];
    let mut queue = VecDeque::new();
    while flow < clients {
        dist.fill(f64::INFINITY);
        prev.fill(None);
        dist[source] = 0.0;
        queue.push_back(source);
        queued[source] = true;
        while let Some(v) = queue.pop_front() {
            queued[v] = false;
            for (k, e) in g.adj[v].iter().enumerate() {
                if e.cap <= 0 {
                    continue;
                }
                let nd = dist[v] + e.cost;
                if nd + EPS < dist[e.to] {
                    dist[e.to] = nd;
                    prev[e.to] = Some((v, k));
                    if !queued[e.to] {
                        queued[e.to] = true;
                        queue.push_back(e.to);
                    }
                }
            }
        }
        if !dist[sink].is_finite() {
            break;
        }
        let mut v = sink;
        while let Some((u, k)) = prev[v] {
            let rev = g.adj[u][k].rev;
            g.adj[u][k].cap -= 1;
            g.adj[v][rev].cap += 1;
            v = u;
        }
        flow += 1;
    }

    let mut master_of = vec![None; n];
    for i in 0..n {
        if open[i] {
            master_of[i] = Some(i);
            continue;
        }
        for &(from, idx, j) in &client_edges[i] {
            if g.adj[from][idx].cap == 0 {
                master_of[i] = Some(j);
            }
        }
    }
    Transport {
        complete: flow == clients,
        master_of,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cost(cand: &[Vec<(usize, f64)>], t: &Transport) -> f64 {
        t.master_of
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.filter(|&j| j != i).map(|j| (i, j)))
            .map(|(i, j)| cand[i].iter().find(|(k, _)| *k == j).unwrap().1)
            .sum()
    }

    fn cand_all(c: &[&[f64]]) -> Vec<Vec<(usize, f64)>> {
        c.iter()
            .map(|row| row.iter().enumerate().map(|(j, &d)| (j, d)).collect())
            .collect()
    }

    #[test]
    fn nearest_open_master() {
        let c = cand_all(&[&[0.0, 4.0, 1.0], &[4.0, 0.0, 2.0], &[1.0, 2.0, 0.0]]);
        let t = assign_to_open(&c, &[true, true, false]);
        assert!(t.complete);
        assert_eq!(t.master_of, vec![Some(0), Some(1), Some(0)]);
        assert_eq!(cost(&c, &t), 1.0);
    }

    #[test]
    fn capacity_forces_detour() {
        // eight clients all closest to master 0; one must use master 1
        let n = 10;
        let cand: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| if i < 2 { vec![] } else { vec![(0, 1.0), (1, 1.0 + i as f64)] })
            .collect();
        let mut open = vec![false; n];
        open[0] = true;
        open[1] = true;
        let t = assign_to_open(&cand, &open);
        assert!(t.complete);
        let to_one: Vec<usize> = (2..n).filter(|&i| t.master_of[i] == Some(1)).collect();
        // cheapest detour is node 2 (cost 3 instead of 1)
        assert_eq!(to_one, vec![2]);
        assert_eq!(cost(&cand, &t), 7.0 + 3.0);
    }

    #[test]
    fn incomplete_when_capacity_short() {
        let n = 9;
        let cand: Vec<Vec<(usize, f64)>> = (0..n).map(|_| vec![(0, 0.0)]).collect();
        let mut open = vec![false; n];
        open[0] = true;
        let t = assign_to_open(&cand, &open);
        assert!(!t.complete);
        assert_eq!(t.master_of.iter().filter(|m| m.is_none()).count(), 1);
    }
}
