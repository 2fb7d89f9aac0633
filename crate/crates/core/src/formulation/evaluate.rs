use crate::delaymodel::{packet_rate, path_delay, Hop};
use crate::error::{Error, Result};
use crate::formulation::{Allocation, Instance, LinkLoad, SolveResult, SolverStats, TargetDelay, Violation};
use crate::powermodel::{carried_traffic, system_power};
use crate::scenario::{eligible_processors, ObjectiveWeights};

const TOL: f64 = 1e-9;

fn violation(family: &str, entity: String, measure: &str, slack: f64) -> Error {
    Error::Violation(Violation {
        family: family.into(),
        entity,
        measure: measure.into(),
        slack,
    })
}

/// Recomputes every constraint, the power, the maximum path delay and the
/// weighted objective of an allocation from first principles. Reports the
/// first violated constraint.
pub fn evaluate(inst: &Instance, allocation: &Allocation, weights: &ObjectiveWeights) -> Result<SolveResult> {
    weights.validate()?;
    let scenario = &inst.scenario;
    let links = &inst.links;
    let eligible = eligible_processors(scenario);

    let mut seen = vec![false; scenario.demands.len()];
    for da in &allocation.demands {
        let dem = scenario
            .demands
            .get(da.demand)
            .ok_or_else(|| violation("C1", format!("demand #{}", da.demand), "unknown", 1.0))?;
        if std::mem::replace(&mut seen[da.demand], true) {
            return Err(violation("C1", format!("demand {}", dem.id), "duplicate", 1.0));
        }
        let source = scenario.node_index(&dem.source).expect("validated source");
        let mut total = 0.0;
        let mut nodes = Vec::new();
        for s in &da.serving {
            let node = scenario
                .nodes
                .get(s.node)
                .ok_or_else(|| violation("C2", format!("demand {}", dem.id), "unknown node", 1.0))?;
            if !eligible.contains(&s.node) {
                return Err(violation("C2", format!("demand {}, node {}", dem.id, node.id), "ineligible", 1.0));
            }
            if nodes.contains(&s.node) {
                return Err(violation("C2", format!("demand {}, node {}", dem.id, node.id), "duplicate", 1.0));
            }
            nodes.push(s.node);
            if !(s.fraction >= -TOL && s.fraction <= 1.0 + TOL) {
                return Err(violation(
                    "C2",
                    format!("demand {}, node {}", dem.id, node.id),
                    "fraction out of range",
                    s.fraction,
                ));
            }
            total += s.fraction;
            check_route(inst, &dem.id, source, s.node, &s.route)?;
        }
        if total < 1.0 - TOL {
            return Err(violation("C1", format!("demand {}", dem.id), "deficit", 1.0 - total));
        }
        if total > 1.0 + TOL {
            return Err(violation("C1", format!("demand {}", dem.id), "excess", total - 1.0));
        }
    }
    if let Some(d) = seen.iter().position(|s| !s) {
        return Err(violation("C1", format!("demand {}", scenario.demands[d].id), "deficit", 1.0));
    }

    // C3
    let mut processed = vec![0.0; scenario.nodes.len()];
    for da in &allocation.demands {
        for s in &da.serving {
            processed[s.node] += s.fraction * scenario.demands[da.demand].load_mips();
        }
    }
    for (n, node) in scenario.nodes.iter().enumerate() {
        let cap = node.processor.capacity;
        if processed[n] > cap * (1.0 + TOL) {
            return Err(violation("C3", format!("node {}", node.id), "excess MIPS", processed[n] - cap));
        }
    }

    // C5, C7
    let carried = carried_traffic(scenario, links, allocation);
    for (l, link) in links.links.iter().enumerate() {
        if carried[l] > link.capacity * (1.0 + TOL) {
            return Err(violation("C5a", format!("link {}", link.id), "excess bit/s", carried[l] - link.capacity));
        }
    }
    for (dev, cell) in &links.cells {
        let sum: f64 = cell.iter().map(|l| carried[*l]).sum();
        let device = &links.devices[*dev];
        if sum > device.bandwidth * (1.0 + TOL) {
            return Err(violation("C5b", format!("cell {}", device.id), "excess bit/s", sum - device.bandwidth));
        }
    }
    let packet_size = scenario.settings.packet_size;
    let lambda: Vec<f64> = carried.iter().map(|c| packet_rate(*c, packet_size)).collect();
    for (l, link) in links.links.iter().enumerate() {
        let top = inst.tables[l].max_rate();
        if lambda[l] > top {
            return Err(violation("C7", format!("link {}", link.id), "excess packets/s", lambda[l] - top));
        }
    }

    let power = system_power(scenario, links, allocation)?;

    let mut target_delays = Vec::new();
    let mut max_delay: f64 = 0.0;
    for da in &allocation.demands {
        for s in &da.serving {
            let hops = s.route.iter().map(|&l| Hop {
                prop_delay: links.links[l].prop_delay,
                tx_delay: links.links[l].tx_delay_per_packet,
                table: &inst.tables[l],
                lambda: lambda[l],
            });
            let delay = path_delay(hops)?;
            max_delay = max_delay.max(delay);
            target_delays.push(TargetDelay {
                demand: scenario.demands[da.demand].id.clone(),
                node: scenario.nodes[s.node].id.clone(),
                delay,
            });
        }
    }

    let link_loads = links
        .links
        .iter()
        .enumerate()
        .filter(|(l, _)| carried[*l] > 0.0)
        .map(|(l, link)| LinkLoad {
            link: link.id.clone(),
            carried_bps: carried[l],
            lambda_pps: lambda[l],
        })
        .collect();

    let mut normalized = allocation.clone();
    normalized.normalize(scenario);
    Ok(SolveResult {
        allocation: normalized,
        total_power: power.total,
        max_delay,
        objective_value: weights.objective(power.total, max_delay),
        weights: *weights,
        power_breakdown: power.per_device,
        target_delays,
        link_loads,
        stats: SolverStats::default(),
    })
}

fn check_route(inst: &Instance, demand: &str, source: usize, target: usize, route: &[usize]) -> Result<()> {
    let links = &inst.links;
    let entity = || format!("demand {demand}, target {}", inst.scenario.nodes[target].id);
    if target == source {
        if !route.is_empty() {
            return Err(violation("C4", entity(), "route at source", route.len() as f64));
        }
        return Ok(());
    }
    if route.is_empty() {
        return Err(violation("C4", entity(), "missing route", 1.0));
    }
    let mut at = source;
    let mut visited = vec![false; links.node_count()];
    visited[source] = true;
    for &l in route {
        let link = links
            .links
            .get(l)
            .ok_or_else(|| violation("C4", entity(), "unknown link", l as f64))?;
        if link.tx_node != at {
            return Err(violation("C4", entity(), "broken route", 1.0));
        }
        if std::mem::replace(&mut visited[link.rx_node], true) {
            return Err(violation("C4", entity(), "repeated vertex", 1.0));
        }
        at = link.rx_node;
    }
    if at != target {
        return Err(violation("C4", entity(), "route ends elsewhere", 1.0));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{DemandAllocation, Serving};
    use crate::scenario::{default_scenario, ProcessingSetting};

    fn single(node: usize, fraction: f64, route: Vec<usize>) -> Allocation {
        Allocation {
            demands: vec![DemandAllocation {
                demand: 0,
                serving: vec![Serving { node, fraction, route }],
            }],
        }
    }

    #[test]
    fn deficit_is_reported() {
        let mut s = default_scenario();
        s.demands[0].load = Some(500.0);
        let inst = Instance::new(s).unwrap();
        let err = evaluate(&inst, &single(0, 0.9, vec![]), &ObjectiveWeights::power_only()).unwrap_err();
        assert_eq!(err.to_string(), "constraint violation: C1, demand d1, deficit 0.1");
    }

    #[test]
    fn local_processing_has_no_delay() {
        let mut s = default_scenario();
        s.demands[0].load = Some(500.0);
        let inst = Instance::new(s).unwrap();
        let r = evaluate(&inst, &single(0, 1.0, vec![]), &ObjectiveWeights::custom(1.0, 1.0)).unwrap();
        assert_eq!(r.max_delay, 0.0);
        assert!((r.total_power - (5.0 + 5.0 * 500.0 / 800.0)).abs() < 1e-12);
        assert!((r.objective_value - r.total_power).abs() < 1e-12);
    }

    #[test]
    fn over_capacity_is_c3() {
        let inst = Instance::new(default_scenario()).unwrap();
        let err = evaluate(&inst, &single(0, 1.0, vec![]), &ObjectiveWeights::power_only()).unwrap_err();
        match err {
            Error::Violation(v) => assert_eq!(v.family, "C3"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn broken_routes_are_c4() {
        let inst = Instance::new(default_scenario()).unwrap();
        let l = inst.links.link_by_id("v2.v3").unwrap();
        let err = evaluate(&inst, &single(2, 1.0, vec![l]), &ObjectiveWeights::power_only()).unwrap_err();
        assert!(err.to_string().contains("C4"), "{err}");
        let err = evaluate(&inst, &single(1, 1.0, vec![]), &ObjectiveWeights::power_only()).unwrap_err();
        assert!(err.to_string().contains("missing route"), "{err}");
    }

    #[test]
    fn cloud_path_delay_floor() {
        let inst = Instance::new(default_scenario().with_setting(ProcessingSetting::CloudOnly)).unwrap();
        let up = inst.links.link_by_id("v1.e1").unwrap();
        let fiber = inst.links.link_by_id("e1.cloud").unwrap();
        let cloud = inst.scenario.node_index("cloud").unwrap();
        let r = evaluate(&inst, &single(cloud, 1.0, vec![up, fiber]), &ObjectiveWeights::power_only()).unwrap();
        assert!(r.max_delay >= 1.25e-3);
        assert_eq!(r.link_loads.len(), 2);
    }

    #[test]
    fn delay_ignores_split_at_fixed_routes() {
        let inst = Instance::new(default_scenario()).unwrap();
        let l12 = inst.links.link_by_id("v1.v2").unwrap();
        let w = ObjectiveWeights::custom(1.0, 1.0);
        let mk = |a: f64| Allocation {
            demands: vec![DemandAllocation {
                demand: 0,
                serving: vec![
                    Serving {
                        node: 0,
                        fraction: a,
                        route: vec![],
                    },
                    Serving {
                        node: 1,
                        fraction: 1.0 - a,
                        route: vec![l12],
                    },
                ],
            }],
        };
        let d1 = evaluate(&inst, &mk(0.5), &w).unwrap().max_delay;
        let d2 = evaluate(&inst, &mk(0.7), &w).unwrap().max_delay;
        assert_eq!(d1, d2);
    }
}
