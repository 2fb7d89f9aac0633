//! Allocation types, the mixed-integer model of the placement problem, an
//! independent allocation evaluator and LP text interchange.

mod evaluate;
mod lp;
mod model;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::delaymodel::{build_tables, DelayTable};
use crate::error::{Error, Result};
use crate::linkmodel::{build_links, LinkSet};
use crate::scenario::{ObjectiveWeights, Scenario, WeightPreset};

pub use evaluate::evaluate;
pub use lp::{export_lp, read_lp};
pub use model::{census, formulate, Census, Constraint, MilpModel, ModelMetadata, Sense, VarKind, Variable};

/// A validated scenario with its link graph and delay tables.
#[derive(Debug, Clone)]
pub struct Instance {
    pub scenario: Scenario,
    pub links: LinkSet,
    pub tables: Vec<DelayTable<f64>>,
}

impl Instance {
    pub fn new(scenario: Scenario) -> Result<Instance> {
        let scenario = scenario.validate()?;
        let links = build_links(&scenario)?;
        let tables = build_tables(&links, &scenario.settings);
        Ok(Instance {
            scenario,
            links,
            tables,
        })
    }
}

/// One processing target of a demand. `route` is the ordered link list
/// from the demand source; empty when the source processes locally.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Serving {
    pub node: usize,
    pub fraction: f64,
    pub route: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandAllocation {
    pub demand: usize,
    pub serving: Vec<Serving>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Allocation {
    pub demands: Vec<DemandAllocation>,
}

impl Allocation {
    /// Sorts demands by index and serving entries by node id.
    pub fn normalize(&mut self, scenario: &Scenario) {
        self.demands.sort_by_key(|d| d.demand);
        for d in &mut self.demands {
            d.serving
                .sort_by(|a, b| scenario.nodes[a.node].id.cmp(&scenario.nodes[b.node].id));
        }
    }

    /// Key for the deterministic tie-break between equally good
    /// allocations: serving node ids, then route link ids, demand by demand.
    pub fn tie_key(&self, scenario: &Scenario, links: &LinkSet) -> Vec<Vec<String>> {
        let mut key = Vec::new();
        for d in &self.demands {
            let mut nodes: Vec<&str> = d.serving.iter().map(|s| scenario.nodes[s.node].id.as_str()).collect();
            nodes.sort_unstable();
            key.push(nodes.into_iter().map(String::from).collect());
            let mut serving: Vec<&Serving> = d.serving.iter().collect();
            serving.sort_by(|a, b| scenario.nodes[a.node].id.cmp(&scenario.nodes[b.node].id));
            for s in serving {
                key.push(s.route.iter().map(|l| links.links[*l].id.clone()).collect());
            }
        }
        key
    }
}

/// Compares two allocations by the tie-break key.
pub fn tie_order(a: &Allocation, b: &Allocation, scenario: &Scenario, links: &LinkSet) -> Ordering {
    a.tie_key(scenario, links).cmp(&b.tie_key(scenario, links))
}

/// A violated constraint: family (`C1`..`C9`), the entity it concerns and
/// the amount by which it is missed.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub family: String,
    pub entity: String,
    pub measure: String,
    pub slack: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}, {}, {} {}",
            self.family,
            self.entity,
            self.measure,
            crate::experiment::sig9(self.slack)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetDelay {
    pub demand: String,
    pub node: String,
    /// s
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkLoad {
    pub link: String,
    pub carried_bps: f64,
    pub lambda_pps: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolverStats {
    pub nodes_explored: u64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub allocation: Allocation,
    /// W
    pub total_power: f64,
    /// s
    pub max_delay: f64,
    pub objective_value: f64,
    pub weights: ObjectiveWeights,
    pub power_breakdown: BTreeMap<String, f64>,
    pub target_delays: Vec<TargetDelay>,
    pub link_loads: Vec<LinkLoad>,
    pub stats: SolverStats,
}

/// How objective weights are to be derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightRequest {
    PowerOnly,
    /// Normalized by the single-objective optima (W and s).
    JointEqual { power_optimum: f64, delay_optimum: f64 },
    Custom { w_power: f64, w_delay: f64 },
}

pub fn make_weights(request: WeightRequest) -> Result<ObjectiveWeights> {
    let weights = match request {
        WeightRequest::PowerOnly => ObjectiveWeights::power_only(),
        WeightRequest::JointEqual {
            power_optimum,
            delay_optimum,
        } => {
            if !(power_optimum > 0.0 && power_optimum.is_finite()) {
                return Err(Error::Weights(format!("power normalizer must be positive, got {power_optimum}")));
            }
            if !(delay_optimum > 0.0 && delay_optimum.is_finite()) {
                return Err(Error::Weights(format!("delay normalizer must be positive, got {delay_optimum}")));
            }
            ObjectiveWeights {
                preset: WeightPreset::JointEqual,
                w_power: 0.5 / power_optimum,
                w_delay: 0.5 / delay_optimum,
            }
        }
        WeightRequest::Custom { w_power, w_delay } => ObjectiveWeights::custom(w_power, w_delay),
    };
    weights.validate()?;
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_presets() {
        let p = make_weights(WeightRequest::PowerOnly).unwrap();
        assert_eq!((p.w_power, p.w_delay), (1.0, 0.0));
        let j = make_weights(WeightRequest::JointEqual {
            power_optimum: 10.0,
            delay_optimum: 1e-3,
        })
        .unwrap();
        assert!((j.w_power - 0.05).abs() < 1e-15);
        assert!((j.w_delay - 500.0).abs() < 1e-9);
        assert_eq!(j.preset, WeightPreset::JointEqual);
        let c = make_weights(WeightRequest::Custom { w_power: 2.0, w_delay: 3.0 }).unwrap();
        assert_eq!((c.w_power, c.w_delay), (2.0, 3.0));
    }

    #[test]
    fn nonpositive_normalizers_rejected() {
        for (p, t) in [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)] {
            let r = make_weights(WeightRequest::JointEqual {
                power_optimum: p,
                delay_optimum: t,
            });
            assert!(matches!(r, Err(Error::Weights(_))));
        }
    }

    #[test]
    fn violation_text() {
        let v = Violation {
            family: "C1".into(),
            entity: "demand d1".into(),
            measure: "deficit".into(),
            slack: 1.0 - 0.9,
        };
        assert_eq!(v.to_string(), "C1, demand d1, deficit 0.1");
    }
}
