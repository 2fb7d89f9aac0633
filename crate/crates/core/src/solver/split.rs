//! Processing split for fixed serving sets. Power is linear in the shares
//! and delay does not depend on them, so the cheapest fill is optimal.

use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Residual load below this fraction of the total counts as placed.
const PLACED: f64 = 1e-12;

/// Shares of `load` MIPS over `targets` (node indices), filled in
/// ascending marginal cost with ties broken by node id. Aligned with
/// `targets`.
pub fn greedy_split(scenario: &Scenario, targets: &[usize], load: f64) -> Result<Vec<f64>> {
    let available: f64 = targets.iter().map(|n| scenario.nodes[*n].processor.capacity).sum();
    if available < load {
        return Err(Error::InsufficientCapacity {
            available,
            required: load,
        });
    }
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|a, b| {
        let (na, nb) = (&scenario.nodes[targets[*a]], &scenario.nodes[targets[*b]]);
        na.processor
            .marginal_cost()
            .total_cmp(&nb.processor.marginal_cost())
            .then_with(|| na.id.cmp(&nb.id))
    });
    let mut fractions = vec![0.0; targets.len()];
    let mut remaining = load;
    for i in order {
        if remaining <= 0.0 {
            break;
        }
        let take = scenario.nodes[targets[i]].processor.capacity.min(remaining);
        fractions[i] = take / load;
        remaining -= take;
        if remaining < PLACED * load {
            remaining = 0.0;
        }
    }
    Ok(fractions)
}

/// Cheapest placement of several demands over their serving sets with
/// shared processor capacities, by successive shortest paths. Returns
/// per-demand shares aligned with `sets[d]`.
pub fn joint_split(scenario: &Scenario, loads: &[f64], sets: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
    if loads.len() == 1 {
        return Ok(vec![greedy_split(scenario, &sets[0], loads[0])?]);
    }
    let mut nodes: Vec<usize> = sets.iter().flatten().copied().collect();
    nodes.sort_unstable();
    nodes.dedup();
    let dn = loads.len();
    let source = 0;
    let sink = 1 + dn + nodes.len();
    let mut g = FlowGraph::new(sink + 1);
    for (d, load) in loads.iter().enumerate() {
        g.add(source, 1 + d, *load, 0.0);
        for &n in &sets[d] {
            let p = nodes.binary_search(&n).expect("collected");
            g.add(1 + d, 1 + dn + p, f64::INFINITY, scenario.nodes[n].processor.marginal_cost());
        }
    }
    for (p, &n) in nodes.iter().enumerate() {
        g.add(1 + dn + p, sink, scenario.nodes[n].processor.capacity, 0.0);
    }
    let total: f64 = loads.iter().sum();
    let placed = g.min_cost_flow(source, sink, total);
    if placed < total * (1.0 - PLACED) {
        return Err(Error::InsufficientCapacity {
            available: placed,
            required: total,
        });
    }
    let mut out = Vec::with_capacity(dn);
    for (d, load) in loads.iter().enumerate() {
        let shares = sets[d]
            .iter()
            .map(|&n| {
                let p = nodes.binary_search(&n).expect("collected");
                let flow = g.flow_between(1 + d, 1 + dn + p);
                let share = flow / load;
                if share < PLACED {
                    0.0
                } else {
                    share
                }
            })
            .collect();
        out.push(shares);
    }
    Ok(out)
}

struct Arc {
    to: usize,
    cap: f64,
    cost: f64,
    flow: f64,
}

struct FlowGraph {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

impl FlowGraph {
    fn new(n: usize) -> Self {
        FlowGraph {
            arcs: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    fn add(&mut self, from: usize, to: usize, cap: f64, cost: f64) {
        self.adj[from].push(self.arcs.len());
        self.arcs.push(Arc { to, cap, cost, flow: 0.0 });
        self.adj[to].push(self.arcs.len());
        self.arcs.push(Arc {
            to: from,
            cap: 0.0,
            cost: -cost,
            flow: 0.0,
        });
    }

    fn residual(&self, a: usize) -> f64 {
        self.arcs[a].cap - self.arcs[a].flow
    }

    fn flow_between(&self, from: usize, to: usize) -> f64 {
        self.adj[from]
            .iter()
            .filter(|a| *a % 2 == 0 && self.arcs[**a].to == to)
            .map(|a| self.arcs[*a].flow)
            .sum()
    }

    fn min_cost_flow(&mut self, s: usize, t: usize, want: f64) -> f64 {
        let n = self.adj.len();
        let eps = 1e-12 * want.max(1.0);
        let mut sent = 0.0;
        while sent < want - eps {
            let mut dist = vec![f64::INFINITY; n];
            let mut via = vec![usize::MAX; n];
            dist[s] = 0.0;
            for _ in 0..n {
                let mut changed = false;
                for u in 0..n {
                    if dist[u] == f64::INFINITY {
                        continue;
                    }
                    for &a in &self.adj[u] {
                        if self.residual(a) > eps {
                            let v = self.arcs[a].to;
                            let nd = dist[u] + self.arcs[a].cost;
                            if nd < dist[v] - 1e-15 {
                                dist[v] = nd;
                                via[v] = a;
                                changed = true;
                            }
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            if dist[t] == f64::INFINITY {
                break;
            }
            let mut push = want - sent;
            let mut v = t;
            while v != s {
                let a = via[v];
                push = push.min(self.residual(a));
                v = self.arcs[a ^ 1].to;
            }
            let mut v = t;
            while v != s {
                let a = via[v];
                self.arcs[a].flow += push;
                self.arcs[a ^ 1].flow -= push;
                v = self.arcs[a ^ 1].to;
            }
            sent += push;
        }
        sent
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_scenario;

    #[test]
    fn vehicle_before_edge() {
        let s = default_scenario();
        let x = greedy_split(&s, &[8, 0], 1000.0).unwrap();
        assert!((x[1] - 0.8).abs() < 1e-12);
        assert!((x[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn forced_and_symmetric() {
        let s = default_scenario();
        assert_eq!(greedy_split(&s, &[3], 500.0).unwrap(), vec![1.0]);
        assert_eq!(greedy_split(&s, &[1, 2], 1600.0).unwrap(), vec![0.5, 0.5]);
        assert!(matches!(
            greedy_split(&s, &[1], 900.0),
            Err(Error::InsufficientCapacity { .. })
        ));
    }

    #[test]
    fn ties_fill_by_node_id() {
        let s = default_scenario();
        let x = greedy_split(&s, &[2, 1], 1000.0).unwrap();
        // v2 before v3
        assert_eq!(x, vec![0.2, 0.8]);
    }

    #[test]
    fn joint_split_shares_capacity() {
        let s = default_scenario();
        let x = joint_split(&s, &[600.0, 600.0], &[vec![0, 8], vec![0, 8]]).unwrap();
        let at_v1 = x[0][0] * 600.0 + x[1][0] * 600.0;
        let at_e1 = x[0][1] * 600.0 + x[1][1] * 600.0;
        assert!((at_v1 - 800.0).abs() < 1e-9);
        assert!((at_e1 - 400.0).abs() < 1e-9);
        for shares in &x {
            assert!((shares.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(joint_split(&s, &[600.0, 600.0], &[vec![0], vec![0]]).is_err());
    }
}
