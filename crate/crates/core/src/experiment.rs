//! Demand sweeps over processing settings and objectives, comparison
//! metrics, and canonical CSV output.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::formulation::{evaluate, make_weights, Instance, SolveResult, WeightRequest};
use crate::linkmodel::DeviceKind;
use crate::scenario::{NodeKind, ObjectiveWeights, ProcessingSetting, Scenario, WeightPreset};
use crate::solver::{solve, Limits};

/// Nine significant digits, shortest form. Canonical across platforms.
pub fn sig9(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub fn percent_change(baseline: f64, variant: f64) -> Result<f64> {
    if baseline == 0.0 {
        return Err(Error::Report("zero baseline".into()));
    }
    Ok(100.0 * (variant - baseline) / baseline)
}

pub const DEFAULT_DEMANDS_KBPS: [f64; 6] = [1000.0, 2000.0, 3000.0, 4000.0, 5000.0, 6000.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub demands_kbps: Vec<f64>,
    pub settings: Vec<ProcessingSetting>,
    pub objectives: Vec<WeightPreset>,
    /// Used for `CUSTOM` rows.
    pub custom: Option<ObjectiveWeights>,
    pub limits: Limits,
    /// Worker threads; 0 picks the machine default.
    pub threads: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            demands_kbps: DEFAULT_DEMANDS_KBPS.to_vec(),
            settings: ProcessingSetting::ALL.to_vec(),
            objectives: vec![WeightPreset::PowerOnly, WeightPreset::JointEqual],
            custom: None,
            limits: Limits::default(),
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Infeasible,
    Error,
}

impl RowStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Infeasible => "infeasible",
            RowStatus::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub demand_kbps: f64,
    pub setting: ProcessingSetting,
    pub objective: WeightPreset,
    pub status: RowStatus,
    pub total_power_w: Option<f64>,
    pub max_delay_ms: Option<f64>,
    pub objective_value: Option<f64>,
    pub w_power: Option<f64>,
    pub w_delay: Option<f64>,
    /// Serving node ids joined with `+`.
    pub serving: String,
    /// Longest route in hops.
    pub max_hops: usize,
    /// Routes relaying through another vehicle.
    pub vehicle_relays: usize,
    pub nodes_explored: u64,
    pub detail: String,
    #[serde(skip)]
    pub result: Option<SolveResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableMeta {
    pub scenario_hash: String,
    pub mips_per_kbps: f64,
    pub bins: usize,
    pub packet_size: f64,
    pub rho_max: f64,
    pub core_energy_per_bit: f64,
    pub weights: String,
    pub limits: String,
    pub demand_grid: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultTable {
    pub meta: TableMeta,
    pub rows: Vec<ResultRow>,
}

pub const CSV_COLUMNS: [&str; 14] = [
    "demand_kbps",
    "setting",
    "objective",
    "status",
    "total_power_W",
    "max_delay_ms",
    "objective_value",
    "w_power",
    "w_delay",
    "serving",
    "max_hops",
    "vehicle_relays",
    "nodes_explored",
    "detail",
];

fn limits_text(l: &Limits) -> String {
    format!(
        "max_nodes={} force={} max_paths={} max_combinations={} max_search_nodes={}",
        l.max_nodes, l.force, l.max_paths, l.max_combinations, l.max_search_nodes
    )
}

/// Scenario with every demand set to `kbps` and its load re-derived.
pub fn with_traffic(scenario: &Scenario, kbps: f64) -> Scenario {
    let mut s = scenario.clone();
    for d in &mut s.demands {
        d.traffic = kbps;
        d.load = None;
    }
    s
}

fn empty_row(kbps: f64, setting: ProcessingSetting, objective: WeightPreset) -> ResultRow {
    ResultRow {
        demand_kbps: kbps,
        setting,
        objective,
        status: RowStatus::Error,
        total_power_w: None,
        max_delay_ms: None,
        objective_value: None,
        w_power: None,
        w_delay: None,
        serving: String::new(),
        max_hops: 0,
        vehicle_relays: 0,
        nodes_explored: 0,
        detail: String::new(),
        result: None,
    }
}

fn failed_row(kbps: f64, setting: ProcessingSetting, objective: WeightPreset, err: &Error) -> ResultRow {
    let mut row = empty_row(kbps, setting, objective);
    row.status = match err {
        Error::Infeasible { .. } => RowStatus::Infeasible,
        _ => RowStatus::Error,
    };
    row.detail = err.to_string();
    row
}

fn verified_row(
    inst: &Instance,
    kbps: f64,
    setting: ProcessingSetting,
    objective: WeightPreset,
    result: SolveResult,
) -> ResultRow {
    let mut row = empty_row(kbps, setting, objective);
    let check = evaluate(inst, &result.allocation, &result.weights);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300);
    match check {
        Ok(e) if close(e.total_power, result.total_power)
            && close(e.max_delay, result.max_delay)
            && close(e.objective_value, result.objective_value) =>
        {
            row.status = RowStatus::Ok;
        }
        Ok(e) => {
            row.detail = format!(
                "evaluation mismatch: power {} vs {}, delay {} vs {}",
                result.total_power, e.total_power, result.max_delay, e.max_delay
            );
        }
        Err(err) => row.detail = format!("evaluation failed: {err}"),
    }
    let scenario = &inst.scenario;
    let mut serving: Vec<&str> = Vec::new();
    for d in &result.allocation.demands {
        for s in &d.serving {
            serving.push(scenario.nodes[s.node].id.as_str());
            row.max_hops = row.max_hops.max(s.route.len());
            let relays = s.route[..s.route.len().saturating_sub(1)]
                .iter()
                .any(|l| scenario.nodes[inst.links.links[*l].rx_node].kind == NodeKind::Vehicle);
            row.vehicle_relays += usize::from(relays);
        }
    }
    serving.sort_unstable();
    serving.dedup();
    row.serving = serving.join("+");
    row.total_power_w = Some(result.total_power);
    row.max_delay_ms = Some(result.max_delay * 1e3);
    row.objective_value = Some(result.objective_value);
    row.w_power = Some(result.weights.w_power);
    row.w_delay = Some(result.weights.w_delay);
    row.nodes_explored = result.stats.nodes_explored;
    row.result = Some(result);
    row
}

/// All rows of one (demand, setting) cell, in objective order.
fn run_cell(scenario: &Scenario, kbps: f64, setting: ProcessingSetting, config: &SweepConfig) -> Vec<ResultRow> {
    let inst = match Instance::new(with_traffic(scenario, kbps).with_setting(setting)) {
        Ok(i) => i,
        Err(e) => return config.objectives.iter().map(|o| failed_row(kbps, setting, *o, &e)).collect(),
    };
    let limits = &config.limits;
    let mut power_only: Option<Result<SolveResult>> = None;
    let mut rows = Vec::new();
    for &objective in &config.objectives {
        let power = |cache: &mut Option<Result<SolveResult>>| {
            cache
                .get_or_insert_with(|| solve(&inst, &ObjectiveWeights::power_only(), limits))
                .clone()
        };
        let outcome = match objective {
            WeightPreset::PowerOnly => power(&mut power_only),
            WeightPreset::JointEqual => power(&mut power_only).and_then(|p| {
                let t = solve(&inst, &ObjectiveWeights::delay_only(), limits)?;
                let w = make_weights(WeightRequest::JointEqual {
                    power_optimum: p.total_power,
                    delay_optimum: t.max_delay,
                })?;
                solve(&inst, &w, limits)
            }),
            WeightPreset::Custom => match config.custom {
                Some(w) => solve(&inst, &w, limits),
                None => Err(Error::Weights("custom objective requested without weights".into())),
            },
        };
        rows.push(match outcome {
            Ok(r) => verified_row(&inst, kbps, setting, objective, r),
            Err(e) => failed_row(kbps, setting, objective, &e),
        });
    }
    rows
}

/// Runs every (demand, setting, objective) cell. Cells run in parallel;
/// row order and values do not depend on the thread count.
pub fn sweep(scenario: &Scenario, config: &SweepConfig) -> Result<ResultTable> {
    let scenario = scenario.clone().validate()?;
    for d in &config.demands_kbps {
        if !(d.is_finite() && *d > 0.0) {
            return Err(Error::Domain(format!("demand sizes must be positive, got {d}")));
        }
    }
    let cells: Vec<(f64, ProcessingSetting)> = config
        .demands_kbps
        .iter()
        .flat_map(|d| config.settings.iter().map(move |s| (*d, *s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    let rows: Vec<ResultRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|(d, s)| run_cell(&scenario, *d, *s, config))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    });
    let s = &scenario.settings;
    let grid: Vec<String> = config.demands_kbps.iter().map(|d| sig9(*d)).collect();
    Ok(ResultTable {
        meta: TableMeta {
            scenario_hash: scenario.hash(),
            mips_per_kbps: s.mips_per_kbps,
            bins: s.bins,
            packet_size: s.packet_size,
            rho_max: s.rho_max,
            core_energy_per_bit: s.core_energy_per_bit,
            weights: weights_text(config),
            limits: limits_text(&config.limits),
            demand_grid: grid.join(" "),
        },
        rows,
    })
}

fn weights_text(config: &SweepConfig) -> String {
    config
        .objectives
        .iter()
        .map(|o| match o {
            WeightPreset::PowerOnly => "POWER_ONLY=(1,0)".to_string(),
            WeightPreset::JointEqual => "JOINT_EQUAL=(0.5/P_power_only,0.5/T_delay_only)".to_string(),
            WeightPreset::Custom => match config.custom {
                Some(w) => format!("CUSTOM=({},{})", sig9(w.w_power), sig9(w.w_delay)),
                None => "CUSTOM=unset".to_string(),
            },
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn opt(v: Option<f64>) -> String {
    v.map(sig9).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn meta_lines(meta: &TableMeta) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# scenario_hash: {}", meta.scenario_hash);
    let _ = writeln!(out, "# mips_per_kbps: {}", sig9(meta.mips_per_kbps));
    let _ = writeln!(out, "# bins: {}", meta.bins);
    let _ = writeln!(out, "# packet_size_B: {}", sig9(meta.packet_size));
    let _ = writeln!(out, "# rho_max: {}", sig9(meta.rho_max));
    let _ = writeln!(out, "# core_energy_per_bit_J: {}", sig9(meta.core_energy_per_bit));
    let _ = writeln!(out, "# weights: {}", meta.weights);
    let _ = writeln!(out, "# limits: {}", meta.limits);
    let _ = writeln!(out, "# demand_grid_kbps: {}", meta.demand_grid);
    out
}

impl ResultTable {
    /// Canonical CSV: metadata comments, fixed columns, 9 significant
    /// digits, LF line endings. Wall-clock times are left out.
    pub fn to_csv(&self) -> String {
        let mut out = meta_lines(&self.meta);
        out.push_str(&CSV_COLUMNS.join(","));
        out.push('\n');
        for r in &self.rows {
            let fields = [
                sig9(r.demand_kbps),
                r.setting.as_str().to_string(),
                r.objective.as_str().to_string(),
                r.status.as_str().to_string(),
                opt(r.total_power_w),
                opt(r.max_delay_ms),
                opt(r.objective_value),
                opt(r.w_power),
                opt(r.w_delay),
                r.serving.clone(),
                r.max_hops.to_string(),
                r.vehicle_relays.to_string(),
                r.nodes_explored.to_string(),
                csv_field(&r.detail),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Long format `figure,setting,objective,demand_kbps,value` for the
    /// power and delay figures; feasible rows only.
    pub fn to_plotdata(&self) -> String {
        let mut out = meta_lines(&self.meta);
        out.push_str("figure,setting,objective,demand_kbps,value\n");
        for (figure, pick) in [
            ("power_W", (|r: &ResultRow| r.total_power_w) as fn(&ResultRow) -> Option<f64>),
            ("delay_ms", |r: &ResultRow| r.max_delay_ms),
        ] {
            for r in self.rows.iter().filter(|r| r.status == RowStatus::Ok) {
                if let Some(v) = pick(r) {
                    let _ = writeln!(
                        out,
                        "{figure},{},{},{},{}",
                        r.setting.as_str(),
                        r.objective.as_str(),
                        sig9(r.demand_kbps),
                        sig9(v)
                    );
                }
            }
        }
        out
    }

    /// Reads a table written by [`ResultTable::to_csv`].
    pub fn from_csv(text: &str) -> Result<ResultTable> {
        let mut meta: BTreeMap<String, String> = BTreeMap::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            if let Some((k, v)) = line.trim_start_matches('#').split_once(':') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let get = |k: &str| meta.get(k).cloned().unwrap_or_default();
        let num = |k: &str| get(k).parse::<f64>().unwrap_or(f64::NAN);
        let table_meta = TableMeta {
            scenario_hash: get("scenario_hash"),
            mips_per_kbps: num("mips_per_kbps"),
            bins: get("bins").parse().unwrap_or(0),
            packet_size: num("packet_size_B"),
            rho_max: num("rho_max"),
            core_energy_per_bit: num("core_energy_per_bit_J"),
            weights: get("weights"),
            limits: get("limits"),
            demand_grid: get("demand_grid_kbps"),
        };
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != CSV_COLUMNS {
            return Err(Error::Report(format!("unexpected columns: {}", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::Report(format!("row {}: bad {what}", i + 1));
            let f = |k: usize| rec.get(k).unwrap_or("");
            let optf = |k: usize| -> Result<Option<f64>> {
                match f(k) {
                    "" => Ok(None),
                    s => s.parse().map(Some).map_err(|_| bad(CSV_COLUMNS[k])),
                }
            };
            let setting = ProcessingSetting::parse(f(1)).ok_or_else(|| bad("setting"))?;
            let objective = match f(2) {
                "POWER_ONLY" => WeightPreset::PowerOnly,
                "JOINT_EQUAL" => WeightPreset::JointEqual,
                "CUSTOM" => WeightPreset::Custom,
                _ => return Err(bad("objective")),
            };
            let status = match f(3) {
                "ok" => RowStatus::Ok,
                "infeasible" => RowStatus::Infeasible,
                "error" => RowStatus::Error,
                _ => return Err(bad("status")),
            };
            rows.push(ResultRow {
                demand_kbps: f(0).parse().map_err(|_| bad("demand_kbps"))?,
                setting,
                objective,
                status,
                total_power_w: optf(4)?,
                max_delay_ms: optf(5)?,
                objective_value: optf(6)?,
                w_power: optf(7)?,
                w_delay: optf(8)?,
                serving: f(9).to_string(),
                max_hops: f(10).parse().map_err(|_| bad("max_hops"))?,
                vehicle_relays: f(11).parse().map_err(|_| bad("vehicle_relays"))?,
                nodes_explored: f(12).parse().map_err(|_| bad("nodes_explored"))?,
                detail: f(13).to_string(),
                result: None,
            });
        }
        Ok(ResultTable { meta: table_meta, rows })
    }

    pub fn row(&self, kbps: f64, setting: ProcessingSetting, objective: WeightPreset) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.demand_kbps == kbps && r.setting == setting && r.objective == objective)
    }
}

/// The four comparison families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Joint vs power-only total power, per setting (positive = increase).
    JointPowerIncrease,
    /// Distributed setting vs cloud, power-only objective (positive = saving).
    PowerSavingVsCloud,
    /// Joint vs power-only maximum delay, per setting (positive = reduction).
    JointDelayReduction,
    /// Vehicles-and-edge vs cloud under the joint objective (positive = reduction).
    EdgeDelayReductionVsCloud,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::JointPowerIncrease => "joint_power_increase_pct",
            Metric::PowerSavingVsCloud => "power_saving_vs_cloud_pct",
            Metric::JointDelayReduction => "joint_delay_reduction_pct",
            Metric::EdgeDelayReductionVsCloud => "edge_delay_reduction_vs_cloud_pct",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportEntry {
    pub metric: Metric,
    pub setting: ProcessingSetting,
    pub demand_kbps: f64,
    pub value_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub entries: Vec<ReportEntry>,
}

impl Report {
    pub fn values(&self, metric: Metric, setting: ProcessingSetting) -> Vec<(f64, f64)> {
        self.entries
            .iter()
            .filter(|e| e.metric == metric && e.setting == setting)
            .map(|e| (e.demand_kbps, e.value_pct))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,setting,demand_kbps,value_pct\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                e.metric.as_str(),
                e.setting.as_str(),
                sig9(e.demand_kbps),
                sig9(e.value_pct)
            );
        }
        out
    }

    /// Per metric and setting: value range over the demand grid.
    pub fn summary(&self) -> String {
        let mut groups: BTreeMap<(Metric, ProcessingSetting), Vec<f64>> = BTreeMap::new();
        for e in &self.entries {
            groups.entry((e.metric, e.setting)).or_default().push(e.value_pct);
        }
        let mut out = String::new();
        for ((m, s), v) in groups {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let _ = writeln!(
                out,
                "{:<36} {:<18} {:>3} points  {:>9.2}% .. {:>7.2}%",
                m.as_str(),
                s.as_str(),
                v.len(),
                lo,
                hi
            );
        }
        out
    }
}

fn ok_value(row: Option<&ResultRow>, pick: fn(&ResultRow) -> Option<f64>) -> Option<f64> {
    row.filter(|r| r.status == RowStatus::Ok).and_then(pick)
}

/// Comparison metrics per demand size. Needs `CLOUD_ONLY` rows as the
/// baseline; points whose inputs are infeasible are skipped.
pub fn report(table: &ResultTable) -> Result<Report> {
    if !table.rows.iter().any(|r| r.setting == ProcessingSetting::CloudOnly) {
        return Err(Error::Report("baseline absent: no CLOUD_ONLY rows".into()));
    }
    let mut demands: Vec<f64> = table.rows.iter().map(|r| r.demand_kbps).collect();
    demands.sort_by(f64::total_cmp);
    demands.dedup();
    let power = |r: &ResultRow| r.total_power_w;
    let delay = |r: &ResultRow| r.max_delay_ms;
    let distributed = [ProcessingSetting::VehiclesOnly, ProcessingSetting::VehiclesAndEdge];
    let mut entries = Vec::new();
    let mut push = |metric, setting, demand_kbps, v: Result<f64>| -> Result<()> {
        entries.push(ReportEntry {
            metric,
            setting,
            demand_kbps,
            value_pct: v?,
        });
        Ok(())
    };
    for &d in &demands {
        let get = |s, o| table.row(d, s, o);
        for s in ProcessingSetting::ALL {
            let p = ok_value(get(s, WeightPreset::PowerOnly), power);
            let j = ok_value(get(s, WeightPreset::JointEqual), power);
            if let (Some(p), Some(j)) = (p, j) {
                push(Metric::JointPowerIncrease, s, d, percent_change(p, j))?;
            }
        }
        let cloud_p = ok_value(get(ProcessingSetting::CloudOnly, WeightPreset::PowerOnly), power);
        for s in distributed {
            let v = ok_value(get(s, WeightPreset::PowerOnly), power);
            if let (Some(b), Some(v)) = (cloud_p, v) {
                push(Metric::PowerSavingVsCloud, s, d, percent_change(b, v).map(|x| 0.0 - x))?;
            }
        }
        for s in ProcessingSetting::ALL {
            let p = ok_value(get(s, WeightPreset::PowerOnly), delay);
            let j = ok_value(get(s, WeightPreset::JointEqual), delay);
            if let (Some(p), Some(j)) = (p, j) {
                if p > 0.0 {
                    push(Metric::JointDelayReduction, s, d, percent_change(p, j).map(|x| 0.0 - x))?;
                }
            }
        }
        let cloud_t = ok_value(get(ProcessingSetting::CloudOnly, WeightPreset::JointEqual), delay);
        let edge_t = ok_value(get(ProcessingSetting::VehiclesAndEdge, WeightPreset::JointEqual), delay);
        if let (Some(b), Some(v)) = (cloud_t, edge_t) {
            push(
                Metric::EdgeDelayReductionVsCloud,
                ProcessingSetting::VehiclesAndEdge,
                d,
                percent_change(b, v).map(|x| 0.0 - x),
            )?;
        }
    }
    Ok(Report { entries })
}

/// JSON view of a result with node, link and device ids.
pub fn result_document(inst: &Instance, result: &SolveResult) -> serde_json::Value {
    let scenario = &inst.scenario;
    let links = &inst.links;
    let delay_of = |d: &str, n: &str| {
        result
            .target_delays
            .iter()
            .find(|t| t.demand == d && t.node == n)
            .map_or(0.0, |t| t.delay)
    };
    let demands: Vec<serde_json::Value> = result
        .allocation
        .demands
        .iter()
        .map(|da| {
            let dem = &scenario.demands[da.demand];
            let serving: Vec<serde_json::Value> = da
                .serving
                .iter()
                .map(|s| {
                    let node = &scenario.nodes[s.node].id;
                    json!({
                        "node": node,
                        "fraction": s.fraction,
                        "route": s.route.iter().map(|l| links.links[*l].id.clone()).collect::<Vec<_>>(),
                        "delay_s": delay_of(&dem.id, node),
                    })
                })
                .collect();
            json!({ "demand": dem.id, "source": dem.source, "serving": serving })
        })
        .collect();
    let interfaces: Vec<&str> = links
        .devices
        .iter()
        .filter(|d| d.kind != DeviceKind::Processor && result.power_breakdown.contains_key(&d.id))
        .map(|d| d.id.as_str())
        .collect();
    json!({
        "scenario_hash": scenario.hash(),
        "processing_setting": scenario.settings.processing_setting.as_str(),
        "weights": result.weights,
        "total_power_W": result.total_power,
        "max_delay_s": result.max_delay,
        "objective_value": result.objective_value,
        "allocation": demands,
        "power_breakdown_W": result.power_breakdown,
        "active_interfaces": interfaces,
        "link_loads": result.link_loads,
        "stats": result.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_is_canonical() {
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(1.0 - 0.9), "0.1");
        assert_eq!(sig9(16.299999999999), "16.3");
        assert_eq!(sig9(1234567891.0), "1234567890");
        assert_eq!(sig9(-2.5e-7), "-0.00000025");
        assert_eq!(sig9(1.0 / 3.0), "0.333333333");
    }

    #[test]
    fn percent_change_definition() {
        assert_eq!(percent_change(100.0, 120.0).unwrap(), 20.0);
        assert_eq!(percent_change(100.0, 100.0).unwrap(), 0.0);
        assert_eq!(percent_change(50.0, 25.0).unwrap(), -50.0);
        assert!(percent_change(0.0, 1.0).is_err());
    }

    fn synthetic(setting: ProcessingSetting, objective: WeightPreset, power: f64, delay_ms: f64) -> ResultRow {
        let mut r = empty_row(1000.0, setting, objective);
        r.status = RowStatus::Ok;
        r.total_power_w = Some(power);
        r.max_delay_ms = Some(delay_ms);
        r
    }

    fn meta() -> TableMeta {
        TableMeta {
            scenario_hash: "x".into(),
            mips_per_kbps: 1.0,
            bins: 64,
            packet_size: 1500.0,
            rho_max: 0.95,
            core_energy_per_bit: 2e-8,
            weights: String::new(),
            limits: String::new(),
            demand_grid: "1000".into(),
        }
    }

    #[test]
    fn saving_against_cloud() {
        let table = ResultTable {
            meta: meta(),
            rows: vec![
                synthetic(ProcessingSetting::CloudOnly, WeightPreset::PowerOnly, 100.0, 2.0),
                synthetic(ProcessingSetting::VehiclesAndEdge, WeightPreset::PowerOnly, 20.0, 1.0),
            ],
        };
        let r = report(&table).unwrap();
        let v = r.values(Metric::PowerSavingVsCloud, ProcessingSetting::VehiclesAndEdge);
        assert_eq!(v, vec![(1000.0, 80.0)]);
    }

    #[test]
    fn baseline_required() {
        let table = ResultTable {
            meta: meta(),
            rows: vec![synthetic(ProcessingSetting::VehiclesOnly, WeightPreset::PowerOnly, 20.0, 1.0)],
        };
        let err = report(&table).unwrap_err();
        assert!(err.to_string().contains("baseline absent"));
    }

    #[test]
    fn csv_round_trip() {
        let mut row = synthetic(ProcessingSetting::VehiclesOnly, WeightPreset::JointEqual, 22.25, 0.32);
        row.serving = "v1+v3".into();
        row.detail = "a, \"quoted\" note".into();
        let table = ResultTable {
            meta: meta(),
            rows: vec![row, failed_row(6000.0, ProcessingSetting::VehiclesOnly, WeightPreset::PowerOnly, &Error::Infeasible {
                family: "C3".into(),
                detail: "short".into(),
            })],
        };
        let text = table.to_csv();
        assert!(!text.contains('\r'));
        let back = ResultTable::from_csv(&text).unwrap();
        assert_eq!(back.to_csv(), text);
        assert_eq!(back.rows[1].status, RowStatus::Infeasible);
    }

    #[test]
    fn empty_grid_gives_empty_table() {
        let config = SweepConfig {
            demands_kbps: vec![],
            threads: 1,
            ..SweepConfig::default()
        };
        let t = sweep(&crate::scenario::default_scenario(), &config).unwrap();
        assert!(t.rows.is_empty());
        assert_eq!(t.to_csv().lines().filter(|l| !l.starts_with('#')).count(), 1);
    }
}
