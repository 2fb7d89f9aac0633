//! Exact enumerative branch-and-bound over serving sets and routes.
//!
//! Serving sets are visited in ascending lower-bound order. For each one,
//! candidate simple paths per target are generated by a depth-first search
//! pruned with reverse shortest-path bounds, and a second depth-first search
//! picks one path per target. The processing split of a serving set is the
//! greedy fill, which is optimal once sets and routes are fixed.

mod brute;
mod paths;
mod split;

use std::cmp::Ordering;
use std::time::Instant;

use crate::delaymodel::{bin_index, lookup, packet_rate};
use crate::error::{Error, Result};
use crate::formulation::{
    Allocation, DemandAllocation, Instance, LinkLoad, Serving, SolveResult, SolverStats, TargetDelay,
};
use crate::powermodel::system_power;
use crate::scenario::{eligible_processors, ObjectiveWeights};

pub use brute::{all_simple_paths, brute_force, BRUTE_FORCE_MAX_NODES};
pub use paths::{dijkstra, dijkstra_to, trace};
pub use split::{greedy_split, joint_split};

/// Relative tolerance of objective comparisons.
pub const OBJECTIVE_TOLERANCE: f64 = 1e-9;
/// Capacity comparisons allow this relative slack.
const CAPACITY_TOLERANCE: f64 = 1e-9;
/// Serving-set combinations tried with shortest-path routes before the search.
const SEED_COMBINATIONS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_nodes: usize,
    /// Ignore `max_nodes`.
    pub force: bool,
    /// Candidate paths per target and serving set.
    pub max_paths: usize,
    /// Serving-set combinations (product over demands).
    pub max_combinations: usize,
    /// Search nodes before giving up.
    pub max_search_nodes: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_nodes: 12,
            force: false,
            max_paths: 200_000,
            max_combinations: 2_000_000,
            max_search_nodes: 500_000_000,
        }
    }
}

struct Target {
    node: usize,
    reachable: bool,
    min_dyn: f64,
    min_idle: f64,
    min_delay: f64,
    seeds: Vec<Vec<usize>>,
}

struct DemandCtx {
    source: usize,
    load: f64,
    bps: f64,
    usable: Vec<bool>,
    /// W on each link for this demand's stream
    dyn_cost: Vec<f64>,
    /// delay of each link with only this stream queued
    solo_delay: Vec<f64>,
    /// by eligible position; `None` for the source
    targets: Vec<Option<Target>>,
}

struct PathInfo {
    links: Vec<usize>,
    bound: f64,
}

struct Combo {
    masks: Vec<u64>,
    lb: f64,
}

struct Best {
    objective: f64,
    power: f64,
    delay: f64,
    allocation: Allocation,
    target_delays: Vec<(usize, usize, f64)>,
    carried: Vec<f64>,
}

#[derive(Default)]
struct Failures {
    capacity: u64,
    queue: u64,
}

struct Search<'a> {
    inst: &'a Instance,
    wp: f64,
    wd: f64,
    limits: Limits,
    eligible: Vec<usize>,
    demands: Vec<DemandCtx>,
    fixed_delay: Vec<f64>,
    dev_idle: Vec<f64>,
    is_iface: Vec<bool>,
    /// shared-medium devices each link loads
    link_cells: Vec<Vec<usize>>,
    best: Option<Best>,
    nodes: u64,
    failures: Failures,
}

fn rx_idle(inst: &Instance, l: usize) -> f64 {
    let dev = &inst.links.devices[inst.links.links[l].rx_device];
    if dev.kind.is_interface() {
        dev.power_idle
    } else {
        0.0
    }
}

fn tx_idle(inst: &Instance, l: usize) -> f64 {
    inst.links.devices[inst.links.links[l].tx_device].power_idle
}

/// Optimal allocation under `weights`, or the constraint family that makes
/// the instance infeasible.
pub fn solve(inst: &Instance, weights: &ObjectiveWeights, limits: &Limits) -> Result<SolveResult> {
    weights.validate()?;
    let started = Instant::now();
    let n = inst.scenario.nodes.len();
    if n > limits.max_nodes && !limits.force {
        return Err(Error::TooLarge(format!(
            "{n} nodes exceed the limit of {}; pass force to override",
            limits.max_nodes
        )));
    }
    let mut search = Search::new(inst, weights, *limits)?;
    let combos = search.combinations()?;
    for combo in combos.iter().take(SEED_COMBINATIONS) {
        search.seed(combo);
    }
    for combo in &combos {
        if let Some(best) = &search.best {
            if search.prunable(combo.lb, best.objective) {
                break;
            }
        }
        search.explore(combo)?;
    }
    let nodes = search.nodes;
    let Some(best) = search.best.take() else {
        return Err(search.infeasible());
    };
    search.finish(best, weights, nodes, started)
}

impl<'a> Search<'a> {
    fn new(inst: &'a Instance, weights: &ObjectiveWeights, limits: Limits) -> Result<Self> {
        let scenario = &inst.scenario;
        let links = &inst.links;
        let settings = &scenario.settings;
        let eligible = eligible_processors(scenario);
        if eligible.is_empty() {
            return Err(Error::NoEligibleProcessors(settings.processing_setting.as_str().into()));
        }
        if eligible.len() > 24 {
            return Err(Error::TooLarge(format!("{} eligible processors", eligible.len())));
        }
        let fixed_delay: Vec<f64> = links
            .links
            .iter()
            .map(|l| l.prop_delay + l.tx_delay_per_packet)
            .collect();
        let dev_idle: Vec<f64> = links.devices.iter().map(|d| d.power_idle).collect();
        let is_iface: Vec<bool> = links.devices.iter().map(|d| d.kind.is_interface()).collect();
        let link_cells = links
            .links
            .iter()
            .map(|l| {
                [l.tx_device, l.rx_device]
                    .into_iter()
                    .filter(|d| links.cells.contains_key(d))
                    .collect()
            })
            .collect();

        let wp = weights.w_power;
        let wd = weights.w_delay;
        let mut demands = Vec::new();
        for dem in &scenario.demands {
            let source = scenario.node_index(&dem.source).expect("validated source");
            let bps = dem.traffic_bps();
            let lam = packet_rate(bps, settings.packet_size);
            let usable: Vec<bool> = links
                .links
                .iter()
                .enumerate()
                .map(|(l, link)| bps <= link.capacity * (1.0 + CAPACITY_TOLERANCE) && bin_index(&inst.tables[l], lam).is_ok())
                .collect();
            let dyn_cost: Vec<f64> = (0..links.links.len())
                .map(|l| links.per_bit_power(l, settings.core_energy_per_bit) * bps)
                .collect();
            let solo_delay: Vec<f64> = (0..links.links.len())
                .map(|l| {
                    if usable[l] {
                        fixed_delay[l] + lookup(&inst.tables[l], lam).expect("usable")
                    } else {
                        f64::INFINITY
                    }
                })
                .collect();
            fn gated<'a>(usable: &'a [bool], f: impl Fn(usize) -> f64 + 'a) -> impl Fn(usize) -> Option<f64> + 'a {
                move |l| if usable[l] { Some(f(l)) } else { None }
            }
            let (by_dyn, pred_dyn) = dijkstra(links, source, gated(&usable, |l| dyn_cost[l]));
            let (by_idle, _) = dijkstra(
                links,
                source,
                gated(&usable, |l| rx_idle(inst, l) + if links.links[l].tx_node == source { tx_idle(inst, l) } else { 0.0 }),
            );
            let (by_delay, pred_delay) = dijkstra(links, source, gated(&usable, |l| solo_delay[l]));
            let (_, pred_power) = dijkstra(
                links,
                source,
                gated(&usable, |l| dyn_cost[l] + rx_idle(inst, l) + if links.links[l].tx_node == source { tx_idle(inst, l) } else { 0.0 }),
            );
            let (_, pred_mixed) = dijkstra(
                links,
                source,
                gated(&usable, |l| {
                    wp * (dyn_cost[l] + rx_idle(inst, l) + if links.links[l].tx_node == source { tx_idle(inst, l) } else { 0.0 })
                        + wd * solo_delay[l]
                }),
            );
            let targets = eligible
                .iter()
                .map(|&node| {
                    if node == source {
                        return None;
                    }
                    let reachable = by_dyn[node].is_finite();
                    let mut seeds = Vec::new();
                    if reachable {
                        for pred in [&pred_power, &pred_delay, &pred_mixed, &pred_dyn] {
                            if let Some(r) = trace(links, pred, source, node) {
                                if !seeds.contains(&r) {
                                    seeds.push(r);
                                }
                            }
                        }
                    }
                    Some(Target {
                        node,
                        reachable,
                        min_dyn: by_dyn[node],
                        min_idle: by_idle[node],
                        min_delay: by_delay[node],
                        seeds,
                    })
                })
                .collect();
            demands.push(DemandCtx {
                source,
                load: dem.load_mips(),
                bps,
                usable,
                dyn_cost,
                solo_delay,
                targets,
            });
        }
        Ok(Search {
            inst,
            wp,
            wd,
            limits,
            eligible,
            demands,
            fixed_delay,
            dev_idle,
            is_iface,
            link_cells,
            best: None,
            nodes: 0,
            failures: Failures::default(),
        })
    }

    fn tolerance(&self, incumbent: f64) -> f64 {
        OBJECTIVE_TOLERANCE * incumbent.abs().max(f64::MIN_POSITIVE)
    }

    /// True when a subtree with lower bound `lb` cannot improve on (or,
    /// with power weighted, tie with) the incumbent.
    fn prunable(&self, lb: f64, incumbent: f64) -> bool {
        let tol = self.tolerance(incumbent);
        if self.wp > 0.0 {
            lb > incumbent + tol
        } else {
            // delay-only objectives tie massively; the first optimum found stands
            lb >= incumbent - tol
        }
    }

    fn members(&self, mask: u64) -> Vec<usize> {
        (0..self.eligible.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| self.eligible[i])
            .collect()
    }

    /// Split of every demand over its serving set, or `None` when capacity
    /// is short or some member would receive nothing.
    fn split(&self, masks: &[u64]) -> Option<(Vec<Vec<(usize, f64)>>, f64)> {
        let scenario = &self.inst.scenario;
        let sets: Vec<Vec<usize>> = masks.iter().map(|m| self.members(*m)).collect();
        let loads: Vec<f64> = self.demands.iter().map(|d| d.load).collect();
        let shares = joint_split(scenario, &loads, &sets).ok()?;
        let mut processed = vec![0.0; scenario.nodes.len()];
        let mut active = vec![false; scenario.nodes.len()];
        let mut out = Vec::with_capacity(sets.len());
        for (d, (set, x)) in sets.iter().zip(&shares).enumerate() {
            if x.iter().any(|v| *v <= 0.0) {
                return None;
            }
            for (n, v) in set.iter().zip(x) {
                processed[*n] += v * loads[d];
                active[*n] = true;
            }
            out.push(set.iter().copied().zip(x.iter().copied()).collect());
        }
        let mut power = 0.0;
        for (n, node) in scenario.nodes.iter().enumerate() {
            if active[n] {
                let p = &node.processor;
                power += p.power_idle + (p.power_max - p.power_idle) * processed[n] / p.capacity;
            }
        }
        Some((out, power))
    }

    fn targets_of(&self, masks: &[u64]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (d, mask) in masks.iter().enumerate() {
            for i in 0..self.eligible.len() {
                if mask >> i & 1 == 1 && self.demands[d].targets[i].is_some() {
                    out.push((d, i));
                }
            }
        }
        out
    }

    fn target(&self, d: usize, i: usize) -> &Target {
        self.demands[d].targets[i].as_ref().expect("remote target")
    }

    fn combo_bound(&self, proc_power: f64, targets: &[(usize, usize)]) -> f64 {
        let mut dyn_sum = 0.0;
        let mut idle: f64 = 0.0;
        let mut delay: f64 = 0.0;
        for &(d, i) in targets {
            let t = self.target(d, i);
            dyn_sum += t.min_dyn;
            idle = idle.max(t.min_idle);
            delay = delay.max(t.min_delay);
        }
        self.wp * (proc_power + dyn_sum + idle) + self.wd * delay
    }

    /// Serving-set combinations worth visiting, in ascending bound order.
    fn combinations(&mut self) -> Result<Vec<Combo>> {
        let scenario = &self.inst.scenario;
        let e = self.eligible.len();
        let mut per_demand: Vec<Vec<u64>> = Vec::new();
        for dem in &self.demands {
            let mut masks = Vec::new();
            let mut unreachable = false;
            for mask in 1u64..(1u64 << e) {
                let cap: f64 = (0..e)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| scenario.nodes[self.eligible[i]].processor.capacity)
                    .sum();
                if cap < dem.load {
                    continue;
                }
                let reachable = (0..e)
                    .filter(|i| mask >> i & 1 == 1)
                    .all(|i| dem.targets[i].as_ref().is_none_or(|t| t.reachable));
                if !reachable {
                    unreachable = true;
                    continue;
                }
                masks.push(mask);
            }
            if masks.is_empty() {
                let family = if unreachable { "C4" } else { "C3" };
                return Err(self.infeasible_with(family, &dem_label(scenario, dem.source, dem.load)));
            }
            per_demand.push(masks);
        }
        let total = per_demand
            .iter()
            .try_fold(1usize, |acc, m| acc.checked_mul(m.len()))
            .unwrap_or(usize::MAX);
        if total > self.limits.max_combinations {
            return Err(Error::TooLarge(format!(
                "{total} serving-set combinations exceed the limit of {}",
                self.limits.max_combinations
            )));
        }
        let mut combos = Vec::new();
        let mut pick = vec![0usize; per_demand.len()];
        let mut any_split = false;
        loop {
            let masks: Vec<u64> = pick.iter().zip(&per_demand).map(|(p, m)| m[*p]).collect();
            if let Some((_, proc_power)) = self.split(&masks) {
                any_split = true;
                let targets = self.targets_of(&masks);
                let lb = self.combo_bound(proc_power, &targets);
                combos.push(Combo { masks, lb });
            }
            let mut k = 0;
            while k < pick.len() {
                pick[k] += 1;
                if pick[k] < per_demand[k].len() {
                    break;
                }
                pick[k] = 0;
                k += 1;
            }
            if k == pick.len() {
                break;
            }
        }
        if !any_split {
            return Err(self.infeasible_with("C3", "joint processing capacity is short"));
        }
        combos.sort_by(|a, b| a.lb.total_cmp(&b.lb).then_with(|| a.masks.cmp(&b.masks)));
        Ok(combos)
    }

    fn infeasible_with(&self, family: &str, detail: &str) -> Error {
        Error::Infeasible {
            family: family.into(),
            detail: detail.into(),
        }
    }

    fn infeasible(&self) -> Error {
        if self.failures.queue >= self.failures.capacity {
            self.infeasible_with("C7", "every routing overloads a queue beyond rho_max")
        } else {
            self.infeasible_with("C5", "every routing exceeds a link or cell capacity")
        }
    }

    fn seed(&mut self, combo: &Combo) {
        let Some((shares, proc_power)) = self.split(&combo.masks) else {
            return;
        };
        let targets = self.targets_of(&combo.masks);
        let variants = targets
            .iter()
            .map(|&(d, i)| self.target(d, i).seeds.len())
            .max()
            .unwrap_or(1)
            .max(1);
        for v in 0..variants {
            let routes: Vec<Vec<usize>> = targets
                .iter()
                .map(|&(d, i)| {
                    let seeds = &self.target(d, i).seeds;
                    seeds[v.min(seeds.len() - 1)].clone()
                })
                .collect();
            self.leaf(&shares, proc_power, &targets, &routes);
        }
    }

    /// Exact evaluation of one complete (serving sets, routes) choice.
    fn leaf(&mut self, shares: &[Vec<(usize, f64)>], proc_power: f64, targets: &[(usize, usize)], routes: &[Vec<usize>]) {
        let links = &self.inst.links;
        let mut carried = vec![0.0; links.links.len()];
        for (&(d, _), route) in targets.iter().zip(routes) {
            for &l in route {
                carried[l] += self.demands[d].bps;
            }
        }
        let Some((power, delays)) = self.measure(&carried, proc_power, routes) else {
            return;
        };
        let delay = delays.iter().copied().fold(0.0, f64::max);
        let objective = self.wp * power + self.wd * delay;
        self.offer(objective, power, delay, shares, targets, routes, &delays, carried);
    }

    /// Power and per-target delays of a routing, or `None` if infeasible.
    fn measure(&mut self, carried: &[f64], proc_power: f64, routes: &[Vec<usize>]) -> Option<(f64, Vec<f64>)> {
        let links = &self.inst.links;
        let settings = &self.inst.scenario.settings;
        let mut bins = vec![0usize; carried.len()];
        let mut used = vec![false; links.devices.len()];
        let mut dyn_power = 0.0;
        for (l, link) in links.links.iter().enumerate() {
            if carried[l] <= 0.0 {
                continue;
            }
            if carried[l] > link.capacity * (1.0 + CAPACITY_TOLERANCE) {
                self.failures.capacity += 1;
                return None;
            }
            match bin_index(&self.inst.tables[l], packet_rate(carried[l], settings.packet_size)) {
                Ok(k) => bins[l] = k,
                Err(_) => {
                    self.failures.queue += 1;
                    return None;
                }
            }
            dyn_power += carried[l] * links.per_bit_power(l, settings.core_energy_per_bit);
            used[link.tx_device] = true;
            used[link.rx_device] = true;
        }
        for (dev, cell) in &links.cells {
            let sum: f64 = cell.iter().map(|l| carried[*l]).sum();
            if sum > links.devices[*dev].bandwidth * (1.0 + CAPACITY_TOLERANCE) {
                self.failures.capacity += 1;
                return None;
            }
        }
        let idle: f64 = (0..used.len())
            .filter(|g| used[*g] && self.is_iface[*g])
            .map(|g| self.dev_idle[g])
            .sum();
        let delays = routes
            .iter()
            .map(|route| {
                route
                    .iter()
                    .map(|&l| self.fixed_delay[l] + self.inst.tables[l].delays[bins[l]])
                    .sum()
            })
            .collect();
        Some((proc_power + dyn_power + idle, delays))
    }

    #[allow(clippy::too_many_arguments)]
    fn offer(
        &mut self,
        objective: f64,
        power: f64,
        delay: f64,
        shares: &[Vec<(usize, f64)>],
        targets: &[(usize, usize)],
        routes: &[Vec<usize>],
        delays: &[f64],
        carried: Vec<f64>,
    ) {
        let better = match &self.best {
            None => true,
            Some(b) => objective < b.objective - self.tolerance(b.objective),
        };
        let tie = !better
            && self
                .best
                .as_ref()
                .is_some_and(|b| (objective - b.objective).abs() <= self.tolerance(b.objective));
        if !better && !tie {
            return;
        }
        let allocation = self.allocation(shares, targets, routes);
        if tie {
            let b = self.best.as_ref().expect("tie needs an incumbent");
            let scenario = &self.inst.scenario;
            let order = crate::formulation::tie_order(&allocation, &b.allocation, scenario, &self.inst.links);
            if order != Ordering::Less {
                return;
            }
        }
        let mut target_delays = Vec::new();
        for (d, set) in shares.iter().enumerate() {
            for &(node, _) in set {
                let delay = targets
                    .iter()
                    .zip(delays)
                    .find(|((td, ti), _)| *td == d && self.eligible[*ti] == node)
                    .map_or(0.0, |(_, v)| *v);
                target_delays.push((d, node, delay));
            }
        }
        self.best = Some(Best {
            objective,
            power,
            delay,
            allocation,
            target_delays,
            carried,
        });
    }

    fn allocation(&self, shares: &[Vec<(usize, f64)>], targets: &[(usize, usize)], routes: &[Vec<usize>]) -> Allocation {
        let mut alloc = Allocation {
            demands: shares
                .iter()
                .enumerate()
                .map(|(d, set)| DemandAllocation {
                    demand: d,
                    serving: set
                        .iter()
                        .map(|&(node, fraction)| Serving {
                            node,
                            fraction,
                            route: targets
                                .iter()
                                .zip(routes)
                                .find(|((td, ti), _)| *td == d && self.eligible[*ti] == node)
                                .map(|(_, r)| r.clone())
                                .unwrap_or_default(),
                        })
                        .collect(),
                })
                .collect(),
        };
        alloc.normalize(&self.inst.scenario);
        alloc
    }

    /// Candidate paths of one target, bounded against the incumbent given
    /// the bounds of the other targets in the combination.
    fn candidate_paths(&mut self, proc_power: f64, targets: &[(usize, usize)], which: usize) -> Result<Vec<PathInfo>> {
        let links = &self.inst.links;
        let (d, i) = targets[which];
        let dem = &self.demands[d];
        let target = self.target(d, i);
        let goal = target.node;
        let mut others_dyn = 0.0;
        let mut others_idle: f64 = 0.0;
        let mut others_delay: f64 = 0.0;
        for (k, &(od, oi)) in targets.iter().enumerate() {
            if k != which {
                let t = self.target(od, oi);
                others_dyn += t.min_dyn;
                others_idle = others_idle.max(t.min_idle);
                others_delay = others_delay.max(t.min_delay);
            }
        }
        let (wp, wd) = (self.wp, self.wd);
        let bound = |dyn_cost: f64, idle: f64, delay: f64| {
            wp * (proc_power + others_dyn + dyn_cost + idle.max(others_idle)) + wd * delay.max(others_delay)
        };
        let cutoff = self.best.as_ref().map(|b| b.objective);
        let tol = cutoff.map_or(0.0, |c| self.tolerance(c));
        let keep = |b: f64| match cutoff {
            None => true,
            Some(c) if wp > 0.0 => b <= c + tol,
            Some(c) => b < c - tol,
        };

        let usable = &dem.usable;
        let h_dyn = dijkstra_to(links, goal, |l| usable[l].then(|| dem.dyn_cost[l]));
        let h_idle = dijkstra_to(links, goal, |l| usable[l].then(|| rx_idle(self.inst, l)));
        let h_delay = dijkstra_to(links, goal, |l| usable[l].then(|| dem.solo_delay[l]));

        struct Walk<'w> {
            out: Vec<PathInfo>,
            visited: Vec<bool>,
            dev_used: Vec<bool>,
            prefix: Vec<usize>,
            nodes: u64,
            max_paths: usize,
            overflow: bool,
            goal: usize,
            h: [&'w [f64]; 3],
        }
        let mut walk = Walk {
            out: Vec::new(),
            visited: vec![false; links.node_count()],
            dev_used: vec![false; links.devices.len()],
            prefix: Vec::new(),
            nodes: 0,
            max_paths: self.limits.max_paths,
            overflow: false,
            goal,
            h: [&h_dyn, &h_idle, &h_delay],
        };
        walk.visited[dem.source] = true;

        #[allow(clippy::too_many_arguments)]
        fn step(
            s: &Search<'_>,
            dem: &DemandCtx,
            w: &mut Walk<'_>,
            at: usize,
            dyn_cost: f64,
            idle: f64,
            delay: f64,
            bound: &dyn Fn(f64, f64, f64) -> f64,
            keep: &dyn Fn(f64) -> bool,
        ) {
            if w.overflow {
                return;
            }
            w.nodes += 1;
            if at == w.goal {
                if w.out.len() >= w.max_paths {
                    w.overflow = true;
                    return;
                }
                w.out.push(PathInfo {
                    links: w.prefix.clone(),
                    bound: bound(dyn_cost, idle, delay),
                });
                return;
            }
            let links = &s.inst.links;
            for &l in &links.out_links[at] {
                let link = &links.links[l];
                let v = link.rx_node;
                if w.visited[v] || !dem.usable[l] || w.h[0][v].is_infinite() {
                    continue;
                }
                let mut added = [usize::MAX; 2];
                let mut next_idle = idle;
                for (k, dev) in [link.tx_device, link.rx_device].into_iter().enumerate() {
                    if s.is_iface[dev] && !w.dev_used[dev] {
                        w.dev_used[dev] = true;
                        next_idle += s.dev_idle[dev];
                        added[k] = dev;
                    }
                }
                let nd = dyn_cost + dem.dyn_cost[l];
                let ndelay = delay + dem.solo_delay[l];
                if keep(bound(nd + w.h[0][v], next_idle + w.h[1][v], ndelay + w.h[2][v])) {
                    w.visited[v] = true;
                    w.prefix.push(l);
                    step(s, dem, w, v, nd, next_idle, ndelay, bound, keep);
                    w.prefix.pop();
                    w.visited[v] = false;
                }
                for dev in added {
                    if dev != usize::MAX {
                        w.dev_used[dev] = false;
                    }
                }
            }
        }
        step(self, dem, &mut walk, dem.source, 0.0, 0.0, 0.0, &bound, &keep);
        self.nodes += walk.nodes;
        if walk.overflow {
            return Err(Error::TooLarge(format!(
                "more than {} candidate paths for one target",
                self.limits.max_paths
            )));
        }
        let mut out = walk.out;
        out.sort_by(|a, b| a.bound.total_cmp(&b.bound).then_with(|| a.links.cmp(&b.links)));
        Ok(out)
    }

    fn explore(&mut self, combo: &Combo) -> Result<()> {
        let Some((shares, proc_power)) = self.split(&combo.masks) else {
            return Ok(());
        };
        let targets = self.targets_of(&combo.masks);
        if targets.is_empty() {
            self.leaf(&shares, proc_power, &targets, &[]);
            return Ok(());
        }
        let mut lists = Vec::with_capacity(targets.len());
        for k in 0..targets.len() {
            let list = self.candidate_paths(proc_power, &targets, k)?;
            if list.is_empty() {
                return Ok(());
            }
            lists.push(list);
        }
        let mut order: Vec<usize> = (0..targets.len()).collect();
        order.sort_by_key(|k| (lists[*k].len(), *k));
        let mut state = RouteState {
            carried: vec![0.0; self.inst.links.links.len()],
            cell_load: vec![0.0; self.inst.links.devices.len()],
            dev_count: vec![0u32; self.inst.links.devices.len()],
            idle: 0.0,
            dyn_sum: 0.0,
            chosen: vec![usize::MAX; targets.len()],
        };
        self.route_dfs(&shares, proc_power, &targets, &lists, &order, 0, &mut state)
    }

    #[allow(clippy::too_many_arguments)]
    fn route_dfs(
        &mut self,
        shares: &[Vec<(usize, f64)>],
        proc_power: f64,
        targets: &[(usize, usize)],
        lists: &[Vec<PathInfo>],
        order: &[usize],
        depth: usize,
        st: &mut RouteState,
    ) -> Result<()> {
        if depth == order.len() {
            let routes: Vec<Vec<usize>> = (0..targets.len()).map(|k| lists[k][st.chosen[k]].links.clone()).collect();
            self.leaf(shares, proc_power, targets, &routes);
            return Ok(());
        }
        let k = order[depth];
        let (d, _) = targets[k];
        let bps = self.demands[d].bps;
        for (pi, path) in lists[k].iter().enumerate() {
            if let Some(b) = &self.best {
                if self.prunable(path.bound, b.objective) {
                    break;
                }
            }
            self.nodes += 1;
            if self.nodes > self.limits.max_search_nodes {
                return Err(Error::TooLarge(format!(
                    "search exceeded {} nodes",
                    self.limits.max_search_nodes
                )));
            }
            if !self.apply(st, path, bps) {
                self.remove(st, path, bps);
                continue;
            }
            st.chosen[k] = pi;
            let lb = self.partial_bound(proc_power, targets, lists, order, depth, st);
            let pruned = self.best.as_ref().is_some_and(|b| self.prunable(lb, b.objective));
            if !pruned {
                self.route_dfs(shares, proc_power, targets, lists, order, depth + 1, st)?;
            }
            st.chosen[k] = usize::MAX;
            self.remove(st, path, bps);
        }
        Ok(())
    }

    /// Adds a path's stream; false when a capacity or queue cap breaks.
    fn apply(&mut self, st: &mut RouteState, path: &PathInfo, bps: f64) -> bool {
        let links = &self.inst.links;
        let packet = self.inst.scenario.settings.packet_size;
        for &l in &path.links {
            st.carried[l] += bps;
            st.dyn_sum += self.demands_dyn(l, bps);
            for &c in &self.link_cells[l] {
                st.cell_load[c] += bps;
            }
            let link = &links.links[l];
            for dev in [link.tx_device, link.rx_device] {
                if self.is_iface[dev] {
                    st.dev_count[dev] += 1;
                    if st.dev_count[dev] == 1 {
                        st.idle += self.dev_idle[dev];
                    }
                }
            }
        }
        for &l in &path.links {
            let link = &links.links[l];
            if st.carried[l] > link.capacity * (1.0 + CAPACITY_TOLERANCE)
                || self.link_cells[l]
                    .iter()
                    .any(|c| st.cell_load[*c] > links.devices[*c].bandwidth * (1.0 + CAPACITY_TOLERANCE))
            {
                self.failures.capacity += 1;
                return false;
            }
            if bin_index(&self.inst.tables[l], packet_rate(st.carried[l], packet)).is_err() {
                self.failures.queue += 1;
                return false;
            }
        }
        true
    }

    fn remove(&self, st: &mut RouteState, path: &PathInfo, bps: f64) {
        let links = &self.inst.links;
        for &l in &path.links {
            st.carried[l] -= bps;
            st.dyn_sum -= self.demands_dyn(l, bps);
            for &c in &self.link_cells[l] {
                st.cell_load[c] -= bps;
            }
            let link = &links.links[l];
            for dev in [link.tx_device, link.rx_device] {
                if self.is_iface[dev] {
                    st.dev_count[dev] -= 1;
                    if st.dev_count[dev] == 0 {
                        st.idle -= self.dev_idle[dev];
                    }
                }
            }
        }
    }

    fn demands_dyn(&self, l: usize, bps: f64) -> f64 {
        self.inst
            .links
            .per_bit_power(l, self.inst.scenario.settings.core_energy_per_bit)
            * bps
    }

    fn partial_bound(
        &self,
        proc_power: f64,
        targets: &[(usize, usize)],
        lists: &[Vec<PathInfo>],
        order: &[usize],
        depth: usize,
        st: &RouteState,
    ) -> f64 {
        let packet = self.inst.scenario.settings.packet_size;
        let mut rest_dyn = 0.0;
        let mut rest_idle: f64 = 0.0;
        let mut delay: f64 = 0.0;
        for &k in &order[depth + 1..] {
            let (d, i) = targets[k];
            let t = self.target(d, i);
            rest_dyn += t.min_dyn;
            rest_idle = rest_idle.max(t.min_idle);
            delay = delay.max(t.min_delay);
        }
        if self.wd > 0.0 {
            for &k in &order[..=depth] {
                let path = &lists[k][st.chosen[k]];
                let sum: f64 = path
                    .links
                    .iter()
                    .map(|&l| {
                        let lam = packet_rate(st.carried[l], packet);
                        self.fixed_delay[l] + lookup(&self.inst.tables[l], lam).unwrap_or(f64::INFINITY)
                    })
                    .sum();
                delay = delay.max(sum);
            }
        }
        self.wp * (proc_power + st.dyn_sum + rest_dyn + st.idle.max(rest_idle)) + self.wd * delay
    }

    fn finish(&self, best: Best, weights: &ObjectiveWeights, nodes: u64, started: Instant) -> Result<SolveResult> {
        let scenario = &self.inst.scenario;
        let links = &self.inst.links;
        let breakdown = system_power(scenario, links, &best.allocation)?;
        let mut target_delays: Vec<TargetDelay> = best
            .target_delays
            .iter()
            .map(|(d, n, delay)| TargetDelay {
                demand: scenario.demands[*d].id.clone(),
                node: scenario.nodes[*n].id.clone(),
                delay: *delay,
            })
            .collect();
        target_delays.sort_by(|a, b| a.demand.cmp(&b.demand).then_with(|| a.node.cmp(&b.node)));
        let packet = scenario.settings.packet_size;
        let link_loads = links
            .links
            .iter()
            .enumerate()
            .filter(|(l, _)| best.carried[*l] > 0.0)
            .map(|(l, link)| LinkLoad {
                link: link.id.clone(),
                carried_bps: best.carried[l],
                lambda_pps: packet_rate(best.carried[l], packet),
            })
            .collect();
        Ok(SolveResult {
            allocation: best.allocation,
            total_power: best.power,
            max_delay: best.delay,
            objective_value: best.objective,
            weights: *weights,
            power_breakdown: breakdown.per_device,
            target_delays,
            link_loads,
            stats: SolverStats {
                nodes_explored: nodes,
                wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
            },
        })
    }
}

struct RouteState {
    carried: Vec<f64>,
    cell_load: Vec<f64>,
    dev_count: Vec<u32>,
    idle: f64,
    dyn_sum: f64,
    chosen: Vec<usize>,
}

fn dem_label(scenario: &crate::scenario::Scenario, source: usize, load: f64) -> String {
    let available: f64 = eligible_processors(scenario)
        .iter()
        .map(|n| scenario.nodes[*n].processor.capacity)
        .sum();
    format!(
        "demand from {} needs {} MIPS; eligible processors offer {} MIPS or cannot be reached",
        scenario.nodes[source].id,
        crate::experiment::sig9(load),
        crate::experiment::sig9(available)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{default_scenario, ProcessingSetting};

    fn two_vehicles(traffic: f64) -> Instance {
        let mut s = default_scenario().with_setting(ProcessingSetting::VehiclesOnly);
        s.nodes.truncate(2);
        s.demands[0].traffic = traffic;
        s.demands[0].load = None;
        Instance::new(s).unwrap()
    }

    #[test]
    fn toy_processes_locally_under_power_only() {
        let inst = two_vehicles(600.0);
        let r = solve(&inst, &ObjectiveWeights::power_only(), &Limits::default()).unwrap();
        let serving = &r.allocation.demands[0].serving;
        assert_eq!(serving.len(), 1);
        assert_eq!(serving[0].node, 0);
        assert!(serving[0].route.is_empty());
        assert!((r.total_power - (5.0 + 5.0 * 600.0 / 800.0)).abs() < 1e-12);
        assert_eq!(r.objective_value, r.total_power);
        assert_eq!(r.max_delay, 0.0);
    }

    #[test]
    fn single_eligible_node_matches_brute_force() {
        let mut s = default_scenario().with_setting(ProcessingSetting::CloudOnly);
        s.nodes.retain(|n| ["v1", "e1", "cloud"].contains(&n.id.as_str()));
        let inst = Instance::new(s).unwrap();
        let w = ObjectiveWeights::custom(0.05, 200.0);
        let a = solve(&inst, &w, &Limits::default()).unwrap();
        let b = brute_force(&inst, &w).unwrap();
        assert_eq!(a.allocation, b.allocation);
        assert_eq!(a.allocation.demands[0].serving.len(), 1);
    }

    #[test]
    fn over_capacity_is_infeasible() {
        let inst = two_vehicles(1700.0);
        let err = solve(&inst, &ObjectiveWeights::power_only(), &Limits::default()).unwrap_err();
        assert!(matches!(err, Error::Infeasible { ref family, .. } if family == "C3"), "{err}");
    }

    #[test]
    fn size_guard_and_force() {
        let inst = Instance::new(default_scenario()).unwrap();
        let tight = Limits {
            max_nodes: 6,
            ..Limits::default()
        };
        assert!(matches!(
            solve(&inst, &ObjectiveWeights::power_only(), &tight),
            Err(Error::TooLarge(_))
        ));
        let forced = Limits { force: true, ..tight };
        assert!(solve(&inst, &ObjectiveWeights::power_only(), &forced).is_ok());
    }

    #[test]
    fn power_only_objective_is_evaluated_power() {
        let inst = Instance::new(default_scenario()).unwrap();
        let r = solve(&inst, &ObjectiveWeights::power_only(), &Limits::default()).unwrap();
        let e = crate::formulation::evaluate(&inst, &r.allocation, &r.weights).unwrap();
        assert!((r.objective_value - e.total_power).abs() <= 1e-9 * e.total_power);
    }
}
