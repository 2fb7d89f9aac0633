use std::collections::BTreeMap;

use crate::delaymodel::packet_rate;
use crate::error::{Error, Result};
use crate::formulation::Instance;
use crate::scenario::{eligible_processors, ObjectiveWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn as_str(&self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// `(variable index, coefficient)`
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    /// Family tag, the name up to the first underscore (`C1`, `C5b`, ...).
    pub fn family(&self) -> &str {
        self.name.split('_').next().unwrap_or("")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelMetadata {
    /// Queue big-M per link id.
    pub big_m: BTreeMap<String, f64>,
    /// Variable name → the scenario entity it stands for.
    pub entities: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Minimized.
    pub objective: Vec<(usize, f64)>,
    pub metadata: ModelMetadata,
}

/// Variable counts by name prefix and constraint counts by family.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Census {
    pub variables: BTreeMap<String, usize>,
    pub constraints: BTreeMap<String, usize>,
}

impl Census {
    pub fn variable_total(&self) -> usize {
        self.variables.values().sum()
    }

    pub fn constraint_total(&self) -> usize {
        self.constraints.values().sum()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.variables {
            out.push_str(&format!("var {k} {v}\n"));
        }
        out.push_str(&format!("var total {}\n", self.variable_total()));
        for (k, v) in &self.constraints {
            out.push_str(&format!("con {k} {v}\n"));
        }
        out.push_str(&format!("con total {}\n", self.constraint_total()));
        out
    }
}

impl MilpModel {
    pub fn variable_index(&self) -> BTreeMap<&str, usize> {
        self.variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), i))
            .collect()
    }

    /// Counts what the model actually contains.
    pub fn census(&self) -> Census {
        let mut c = Census::default();
        for v in &self.variables {
            let prefix = v.name.split('_').next().unwrap_or("").to_string();
            *c.variables.entry(prefix).or_default() += 1;
        }
        for k in &self.constraints {
            *c.constraints.entry(k.family().to_string()).or_default() += 1;
        }
        c
    }

    /// Same variables (kind, bounds), constraints (sense, rhs, coefficients)
    /// and objective, matched by name, with coefficients within `tol`.
    pub fn structurally_equal(&self, other: &MilpModel, tol: f64) -> bool {
        let close = |a: f64, b: f64| a == b || (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0);
        if self.variables.len() != other.variables.len() || self.constraints.len() != other.constraints.len() {
            return false;
        }
        let theirs: BTreeMap<&str, &Variable> = other.variables.iter().map(|v| (v.name.as_str(), v)).collect();
        for v in &self.variables {
            match theirs.get(v.name.as_str()) {
                Some(w) if w.kind == v.kind && close(w.lower, v.lower) && close(w.upper, v.upper) => {}
                _ => return false,
            }
        }
        let named = |m: &MilpModel, terms: &[(usize, f64)]| -> BTreeMap<String, f64> {
            let mut out = BTreeMap::new();
            for (i, c) in terms {
                *out.entry(m.variables[*i].name.clone()).or_insert(0.0) += c;
            }
            out.retain(|_, c| *c != 0.0);
            out
        };
        let same_terms = |a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>| {
            a.len() == b.len() && a.iter().zip(b).all(|((ka, va), (kb, vb))| ka == kb && close(*va, *vb))
        };
        if !same_terms(&named(self, &self.objective), &named(other, &other.objective)) {
            return false;
        }
        let theirs: BTreeMap<&str, &Constraint> = other.constraints.iter().map(|c| (c.name.as_str(), c)).collect();
        self.constraints.iter().all(|c| match theirs.get(c.name.as_str()) {
            Some(k) => {
                k.sense == c.sense
                    && close(k.rhs, c.rhs)
                    && same_terms(&named(self, &c.terms), &named(other, &k.terms))
            }
            None => false,
        })
    }
}

struct Builder {
    model: MilpModel,
}

impl Builder {
    fn var(&mut self, name: String, kind: VarKind, lower: f64, upper: f64, entity: String) -> usize {
        let i = self.model.variables.len();
        self.model.metadata.entities.insert(name.clone(), entity);
        self.model.variables.push(Variable {
            name,
            kind,
            lower,
            upper,
        });
        i
    }

    fn con(&mut self, name: String, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        let terms = terms.into_iter().filter(|(_, c)| *c != 0.0).collect();
        self.model.constraints.push(Constraint {
            name,
            terms,
            sense,
            rhs,
        });
    }
}

fn source_of(inst: &Instance, d: usize) -> usize {
    inst.scenario
        .node_index(&inst.scenario.demands[d].source)
        .expect("validated source")
}

/// Devices that get an activation variable: eligible processors and every
/// interface touched by a link.
fn model_devices(inst: &Instance, eligible: &[usize]) -> Vec<usize> {
    let mut used = vec![false; inst.links.devices.len()];
    for &n in eligible {
        used[inst.links.processor[n]] = true;
    }
    for l in &inst.links.links {
        used[l.tx_device] = true;
        used[l.rx_device] = true;
    }
    (0..used.len()).filter(|g| used[*g]).collect()
}

/// Closed-form variable and constraint counts for an instance.
pub fn census(inst: &Instance) -> Census {
    let eligible = eligible_processors(&inst.scenario);
    let d = inst.scenario.demands.len();
    let e = eligible.len();
    let l = inst.links.links.len();
    let v = inst.links.graph_vertex_count();
    let k = inst.scenario.settings.bins;
    let remote: usize = (0..d)
        .map(|i| e - usize::from(eligible.contains(&source_of(inst, i))))
        .sum();
    let a = model_devices(inst, &eligible).len();
    let mut c = Census::default();
    for (name, n) in [
        ("x", d * e),
        ("y", d * e),
        ("a", a),
        ("r", remote * l),
        ("z", l * k),
        ("Q", l),
        ("q", remote * l),
        ("T", 1),
    ] {
        if n > 0 {
            c.variables.insert(name.into(), n);
        }
    }
    for (name, n) in [
        ("C1", d),
        ("C2x", d * e),
        ("C2a", d * e),
        ("C3", e),
        ("C4", remote * v),
        ("C4s", remote * v),
        ("C5a", l),
        ("C5b", inst.links.cells.len()),
        ("C6t", remote * l),
        ("C6r", remote * l),
        ("C7z", l),
        ("C7l", l),
        ("C7q", l),
        ("C8", remote * l),
        ("C9", remote),
    ] {
        if n > 0 {
            c.constraints.insert(name.into(), n);
        }
    }
    c
}

/// Builds the full mixed-integer model.
pub fn formulate(inst: &Instance, weights: &ObjectiveWeights) -> Result<MilpModel> {
    weights.validate()?;
    let scenario = &inst.scenario;
    let links = &inst.links;
    let eligible = eligible_processors(scenario);
    if eligible.is_empty() {
        return Err(Error::NoEligibleProcessors(
            scenario.settings.processing_setting.as_str().to_string(),
        ));
    }
    let s = &scenario.settings;
    let nid = |n: usize| scenario.nodes[n].id.as_str();
    let mut b = Builder {
        model: MilpModel::default(),
    };
    let mut objective: Vec<(usize, f64)> = Vec::new();

    // x, y
    let mut x = BTreeMap::new();
    let mut y = BTreeMap::new();
    for (d, dem) in scenario.demands.iter().enumerate() {
        for &n in &eligible {
            let xi = b.var(
                format!("x_{}_{}", dem.id, nid(n)),
                VarKind::Continuous,
                0.0,
                1.0,
                format!("share of demand {} processed at {}", dem.id, nid(n)),
            );
            let proc = &scenario.nodes[n].processor;
            objective.push((xi, weights.w_power * proc.marginal_cost() * dem.load_mips()));
            x.insert((d, n), xi);
        }
        for &n in &eligible {
            let yi = b.var(
                format!("y_{}_{}", dem.id, nid(n)),
                VarKind::Binary,
                0.0,
                1.0,
                format!("{} serves demand {}", nid(n), dem.id),
            );
            y.insert((d, n), yi);
        }
    }

    // a
    let mut a = BTreeMap::new();
    for g in model_devices(inst, &eligible) {
        let dev = &links.devices[g];
        let ai = b.var(
            format!("a_{}", dev.id),
            VarKind::Binary,
            0.0,
            1.0,
            format!("device {} active", dev.id),
        );
        objective.push((ai, weights.w_power * dev.power_idle));
        a.insert(g, ai);
    }

    // r, per (demand, remote target, link)
    let mut targets = Vec::new();
    for (d, dem) in scenario.demands.iter().enumerate() {
        let src = source_of(inst, d);
        for &n in &eligible {
            if n != src {
                targets.push((d, n, src));
            }
        }
        if links.out_links[src].is_empty() && !eligible.contains(&src) {
            return Err(Error::IsolatedSource(dem.id.clone()));
        }
    }
    let mut r = BTreeMap::new();
    for &(d, n, _) in &targets {
        let dem = &scenario.demands[d];
        for (li, link) in links.links.iter().enumerate() {
            let ri = b.var(
                format!("r_{}_{}_{}", dem.id, nid(n), link.id),
                VarKind::Binary,
                0.0,
                1.0,
                format!("stream of {} to {} uses {}", dem.id, nid(n), link.id),
            );
            let cost = links.per_bit_power(li, s.core_energy_per_bit) * dem.traffic_bps();
            objective.push((ri, weights.w_power * cost));
            r.insert((d, n, li), ri);
        }
    }

    // z, Q, q, T
    let mut z = BTreeMap::new();
    let mut q_link = Vec::new();
    for (li, link) in links.links.iter().enumerate() {
        let table = &inst.tables[li];
        for k in 0..table.bins() {
            let zi = b.var(
                format!("z_{}_{}", link.id, k + 1),
                VarKind::Binary,
                0.0,
                1.0,
                format!("queue of {} in bin {}", link.id, k + 1),
            );
            z.insert((li, k), zi);
        }
        let qi = b.var(
            format!("Q_{}", link.id),
            VarKind::Continuous,
            0.0,
            table.max_delay(),
            format!("queueing delay of {}", link.id),
        );
        q_link.push(qi);
        b.model.metadata.big_m.insert(link.id.clone(), table.max_delay());
    }
    let mut q = BTreeMap::new();
    for &(d, n, _) in &targets {
        let dem = &scenario.demands[d];
        for (li, link) in links.links.iter().enumerate() {
            let qi = b.var(
                format!("q_{}_{}_{}", dem.id, nid(n), link.id),
                VarKind::Continuous,
                0.0,
                inst.tables[li].max_delay(),
                format!("queueing delay of {} on the path of {} to {}", link.id, dem.id, nid(n)),
            );
            q.insert((d, n, li), qi);
        }
    }
    let t = b.var("T".into(), VarKind::Continuous, 0.0, f64::INFINITY, "maximum path delay".into());
    objective.push((t, weights.w_delay));

    // C1
    for (d, dem) in scenario.demands.iter().enumerate() {
        let terms = eligible.iter().map(|n| (x[&(d, *n)], 1.0)).collect();
        b.con(format!("C1_{}", dem.id), terms, Sense::Eq, 1.0);
    }
    // C2
    for (d, dem) in scenario.demands.iter().enumerate() {
        for &n in &eligible {
            b.con(
                format!("C2x_{}_{}", dem.id, nid(n)),
                vec![(x[&(d, n)], 1.0), (y[&(d, n)], -1.0)],
                Sense::Le,
                0.0,
            );
            b.con(
                format!("C2a_{}_{}", dem.id, nid(n)),
                vec![(y[&(d, n)], 1.0), (a[&links.processor[n]], -1.0)],
                Sense::Le,
                0.0,
            );
        }
    }
    // C3
    for &n in &eligible {
        let terms = scenario
            .demands
            .iter()
            .enumerate()
            .map(|(d, dem)| (x[&(d, n)], dem.load_mips()))
            .collect();
        b.con(format!("C3_{}", nid(n)), terms, Sense::Le, scenario.nodes[n].processor.capacity);
    }
    // C4
    for &(d, n, src) in &targets {
        let dem = &scenario.demands[d];
        for v in (0..links.node_count()).filter(|v| links.in_graph[*v]) {
            let mut terms: Vec<(usize, f64)> = links.out_links[v].iter().map(|l| (r[&(d, n, *l)], 1.0)).collect();
            terms.extend(links.in_links[v].iter().map(|l| (r[&(d, n, *l)], -1.0)));
            let rhs_y = f64::from(u8::from(v == src)) - f64::from(u8::from(v == n));
            if rhs_y != 0.0 {
                terms.push((y[&(d, n)], -rhs_y));
            }
            b.con(format!("C4_{}_{}_{}", dem.id, nid(n), nid(v)), terms, Sense::Eq, 0.0);
            let out = links.out_links[v].iter().map(|l| (r[&(d, n, *l)], 1.0)).collect();
            b.con(format!("C4s_{}_{}_{}", dem.id, nid(n), nid(v)), out, Sense::Le, 1.0);
        }
    }
    // C5
    for (li, link) in links.links.iter().enumerate() {
        let terms = targets
            .iter()
            .map(|&(d, n, _)| (r[&(d, n, li)], scenario.demands[d].traffic_bps()))
            .collect();
        b.con(format!("C5a_{}", link.id), terms, Sense::Le, link.capacity);
    }
    for (dev, cell) in &links.cells {
        let mut terms = Vec::new();
        for &li in cell {
            for &(d, n, _) in &targets {
                terms.push((r[&(d, n, li)], scenario.demands[d].traffic_bps()));
            }
        }
        let device = &links.devices[*dev];
        b.con(format!("C5b_{}", device.id), terms, Sense::Le, device.bandwidth);
    }
    // C6
    for &(d, n, _) in &targets {
        let dem = &scenario.demands[d];
        for (li, link) in links.links.iter().enumerate() {
            let ri = r[&(d, n, li)];
            b.con(
                format!("C6t_{}_{}_{}", dem.id, nid(n), link.id),
                vec![(ri, 1.0), (a[&link.tx_device], -1.0)],
                Sense::Le,
                0.0,
            );
            b.con(
                format!("C6r_{}_{}_{}", dem.id, nid(n), link.id),
                vec![(ri, 1.0), (a[&link.rx_device], -1.0)],
                Sense::Le,
                0.0,
            );
        }
    }
    // C7
    for (li, link) in links.links.iter().enumerate() {
        let table = &inst.tables[li];
        let bins: Vec<usize> = (0..table.bins()).map(|k| z[&(li, k)]).collect();
        b.con(
            format!("C7z_{}", link.id),
            bins.iter().map(|zi| (*zi, 1.0)).collect(),
            Sense::Eq,
            1.0,
        );
        let mut terms: Vec<(usize, f64)> = targets
            .iter()
            .map(|&(d, n, _)| {
                (
                    r[&(d, n, li)],
                    packet_rate(scenario.demands[d].traffic_bps(), s.packet_size),
                )
            })
            .collect();
        terms.extend(bins.iter().zip(&table.bounds).map(|(zi, bound)| (*zi, -bound)));
        b.con(format!("C7l_{}", link.id), terms, Sense::Le, 0.0);
        let mut terms = vec![(q_link[li], 1.0)];
        terms.extend(bins.iter().zip(&table.delays).map(|(zi, delay)| (*zi, -delay)));
        b.con(format!("C7q_{}", link.id), terms, Sense::Eq, 0.0);
    }
    // C8
    for &(d, n, _) in &targets {
        let dem = &scenario.demands[d];
        for (li, link) in links.links.iter().enumerate() {
            let m = inst.tables[li].max_delay();
            b.con(
                format!("C8_{}_{}_{}", dem.id, nid(n), link.id),
                vec![(q[&(d, n, li)], 1.0), (q_link[li], -1.0), (r[&(d, n, li)], -m)],
                Sense::Ge,
                -m,
            );
        }
    }
    // C9
    for &(d, n, _) in &targets {
        let dem = &scenario.demands[d];
        let mut terms = vec![(t, 1.0)];
        for (li, link) in links.links.iter().enumerate() {
            terms.push((r[&(d, n, li)], -(link.prop_delay + link.tx_delay_per_packet)));
            terms.push((q[&(d, n, li)], -1.0));
        }
        b.con(format!("C9_{}_{}", dem.id, nid(n)), terms, Sense::Ge, 0.0);
    }

    b.model.objective = objective.into_iter().filter(|(_, c)| *c != 0.0).collect();
    Ok(b.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{default_scenario, ProcessingSetting};

    #[test]
    fn census_matches_construction() {
        for setting in ProcessingSetting::ALL {
            let inst = Instance::new(default_scenario().with_setting(setting)).unwrap();
            let m = formulate(&inst, &ObjectiveWeights::power_only()).unwrap();
            assert_eq!(m.census(), census(&inst), "{setting:?}");
        }
    }

    #[test]
    fn cloud_only_has_single_completion_term() {
        let inst = Instance::new(default_scenario().with_setting(ProcessingSetting::CloudOnly)).unwrap();
        let m = formulate(&inst, &ObjectiveWeights::power_only()).unwrap();
        let c1 = m.constraints.iter().find(|c| c.name == "C1_d1").unwrap();
        assert_eq!(c1.terms.len(), 1);
        assert_eq!(m.variables[c1.terms[0].0].name, "x_d1_cloud");
        assert_eq!((c1.sense, c1.rhs), (Sense::Eq, 1.0));
    }

    #[test]
    fn power_only_ignores_delay_columns() {
        let inst = Instance::new(default_scenario()).unwrap();
        let m = formulate(&inst, &ObjectiveWeights::power_only()).unwrap();
        for (i, _) in &m.objective {
            let name = &m.variables[*i].name;
            assert!(!(name == "T" || name.starts_with("q_") || name.starts_with("z_") || name.starts_with("Q_")));
        }
        let joint = formulate(&inst, &ObjectiveWeights::custom(1.0, 1.0)).unwrap();
        assert!(joint.objective.iter().any(|(i, _)| joint.variables[*i].name == "T"));
    }

    #[test]
    fn big_m_is_per_link_table_maximum() {
        let inst = Instance::new(default_scenario()).unwrap();
        let m = formulate(&inst, &ObjectiveWeights::power_only()).unwrap();
        for (li, link) in inst.links.links.iter().enumerate() {
            assert_eq!(m.metadata.big_m[&link.id], inst.tables[li].max_delay());
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let inst = Instance::new(default_scenario()).unwrap();
        let w = ObjectiveWeights::custom(0.3, 2.0);
        assert_eq!(formulate(&inst, &w).unwrap(), formulate(&inst, &w).unwrap());
    }
}
