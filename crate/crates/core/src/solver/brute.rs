//! Exhaustive reference optimizer for tiny single-demand instances.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::formulation::{evaluate, tie_order, Allocation, DemandAllocation, Instance, Serving, SolveResult};
use crate::linkmodel::LinkSet;
use crate::scenario::{eligible_processors, ObjectiveWeights};
use crate::solver::{greedy_split, OBJECTIVE_TOLERANCE};

pub const BRUTE_FORCE_MAX_NODES: usize = 6;

fn simple_paths(links: &LinkSet, at: usize, target: usize, visited: &mut Vec<bool>, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if at == target {
        out.push(prefix.clone());
        return;
    }
    for &l in &links.out_links[at] {
        let v = links.links[l].rx_node;
        if !visited[v] {
            visited[v] = true;
            prefix.push(l);
            simple_paths(links, v, target, visited, prefix, out);
            prefix.pop();
            visited[v] = false;
        }
    }
}

/// Every simple path from `source` to `target`.
pub fn all_simple_paths(links: &LinkSet, source: usize, target: usize) -> Vec<Vec<usize>> {
    let mut visited = vec![false; links.node_count()];
    visited[source] = true;
    let mut out = Vec::new();
    simple_paths(links, source, target, &mut visited, &mut Vec::new(), &mut out);
    out
}

/// Scores every serving set and every combination of simple paths with
/// [`evaluate`]. No pruning.
pub fn brute_force(inst: &Instance, weights: &ObjectiveWeights) -> Result<SolveResult> {
    let scenario = &inst.scenario;
    if scenario.nodes.len() > BRUTE_FORCE_MAX_NODES || scenario.demands.len() != 1 {
        return Err(Error::TooLarge(format!(
            "brute force takes one demand and at most {BRUTE_FORCE_MAX_NODES} nodes"
        )));
    }
    let demand = &scenario.demands[0];
    let source = scenario.node_index(&demand.source).expect("validated source");
    let eligible = eligible_processors(scenario);
    let mut best: Option<SolveResult> = None;
    let mut candidates = 0u64;
    let mut any_capacity = false;

    for mask in 1u32..(1u32 << eligible.len()) {
        let set: Vec<usize> = (0..eligible.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| eligible[i])
            .collect();
        let Ok(fractions) = greedy_split(scenario, &set, demand.load_mips()) else {
            continue;
        };
        any_capacity = true;
        let options: Vec<Vec<Vec<usize>>> = set
            .iter()
            .map(|&n| {
                if n == source {
                    vec![Vec::new()]
                } else {
                    all_simple_paths(&inst.links, source, n)
                }
            })
            .collect();
        if options.iter().any(|o| o.is_empty()) {
            continue;
        }
        let mut pick = vec![0usize; set.len()];
        loop {
            candidates += 1;
            let alloc = Allocation {
                demands: vec![DemandAllocation {
                    demand: 0,
                    serving: set
                        .iter()
                        .zip(&fractions)
                        .zip(&pick)
                        .zip(&options)
                        .map(|(((n, x), p), o)| Serving {
                            node: *n,
                            fraction: *x,
                            route: o[*p].clone(),
                        })
                        .collect(),
                }],
            };
            if let Ok(r) = evaluate(inst, &alloc, weights) {
                let replace = match &best {
                    None => true,
                    Some(b) => {
                        let tol = OBJECTIVE_TOLERANCE * b.objective_value.abs().max(f64::MIN_POSITIVE);
                        r.objective_value < b.objective_value - tol
                            || ((r.objective_value - b.objective_value).abs() <= tol
                                && tie_order(&r.allocation, &b.allocation, scenario, &inst.links) == Ordering::Less)
                    }
                };
                if replace {
                    best = Some(r);
                }
            }
            let mut k = 0;
            while k < pick.len() {
                pick[k] += 1;
                if pick[k] < options[k].len() {
                    break;
                }
                pick[k] = 0;
                k += 1;
            }
            if k == pick.len() {
                break;
            }
        }
    }
    match best {
        Some(mut r) => {
            r.stats.nodes_explored = candidates;
            Ok(r)
        }
        None => Err(Error::Infeasible {
            family: if any_capacity { "C5".into() } else { "C3".into() },
            detail: "no allocation passes every constraint".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linkmodel::build_links;
    use crate::scenario::{default_scenario, ProcessingSetting};

    #[test]
    fn complete_graph_path_count() {
        let mut s = default_scenario().with_setting(ProcessingSetting::VehiclesOnly);
        s.settings.edge_relay_in_vehicles_only = false;
        s.nodes.truncate(5);
        let ls = build_links(&s).unwrap();
        // K5: 1 + 3 + 3*2 + 3*2*1
        assert_eq!(all_simple_paths(&ls, 0, 1).len(), 16);
    }
}
