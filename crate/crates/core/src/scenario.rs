//! Experiment instance data model: nodes, devices, demands and settings.
//!
//! Scenario documents are JSON. Emission is canonical (object keys sorted,
//! shortest round-trip float formatting) so `parse(emit(s)) == s` and the
//! emitted text is byte-stable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lot {
    pub width: f64,
    pub height: f64,
}

/// Processing device: capacity in MIPS, power in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessorSpec {
    pub capacity: f64,
    pub power_idle: f64,
    pub power_max: f64,
}

impl ProcessorSpec {
    /// Load-proportional watts per MIPS.
    pub fn marginal_cost(&self) -> f64 {
        (self.power_max - self.power_idle) / self.capacity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Medium {
    Dsrc,
    Wifi,
    Fiber,
}

impl Medium {
    pub fn as_str(&self) -> &'static str {
        match self {
            Medium::Dsrc => "DSRC",
            Medium::Wifi => "WIFI",
            Medium::Fiber => "FIBER",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioSpec {
    pub medium: Medium,
    /// bit/s
    pub bandwidth: f64,
    /// Hz
    pub freq: f64,
    /// dBm
    pub tx_power_max: f64,
    /// dBm
    pub rx_sensitivity: f64,
    pub power_idle: f64,
    pub power_max: f64,
    /// dB
    #[serde(default)]
    pub link_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnuSpec {
    pub power_idle: f64,
    pub power_max: f64,
    /// bit/s
    pub fiber_capacity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeKind {
    Vehicle,
    Edge,
    Cloud,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Position>,
    pub processor: ProcessorSpec,
    #[serde(default)]
    pub radios: Vec<RadioSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onu: Option<OnuSpec>,
    /// meters, cloud attachment only
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber_length: Option<f64>,
}

impl NodeSpec {
    pub fn radio(&self, medium: Medium) -> Option<&RadioSpec> {
        self.radios.iter().find(|r| r.medium == medium)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSpec {
    pub id: String,
    pub source: String,
    /// kbit/s
    pub traffic: f64,
    /// MIPS; filled from `mips_per_kbps * traffic` during validation when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load: Option<f64>,
}

impl DemandSpec {
    /// Resolved processing load. Only meaningful on a validated scenario.
    pub fn load_mips(&self) -> f64 {
        self.load.unwrap_or(f64::NAN)
    }

    pub fn traffic_bps(&self) -> f64 {
        self.traffic * 1e3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProcessingSetting {
    VehiclesOnly,
    VehiclesAndEdge,
    CloudOnly,
}

impl ProcessingSetting {
    pub const ALL: [ProcessingSetting; 3] = [
        ProcessingSetting::VehiclesOnly,
        ProcessingSetting::VehiclesAndEdge,
        ProcessingSetting::CloudOnly,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProcessingSetting::VehiclesOnly => "VEHICLES_ONLY",
            ProcessingSetting::VehiclesAndEdge => "VEHICLES_AND_EDGE",
            ProcessingSetting::CloudOnly => "CLOUD_ONLY",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "VEHICLES_ONLY" | "VEHICLES" => Some(ProcessingSetting::VehiclesOnly),
            "VEHICLES_AND_EDGE" | "EDGE" => Some(ProcessingSetting::VehiclesAndEdge),
            "CLOUD_ONLY" | "CLOUD" => Some(ProcessingSetting::CloudOnly),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WeightPreset {
    PowerOnly,
    JointEqual,
    Custom,
}

impl WeightPreset {
    pub fn as_str(&self) -> &'static str {
        match self {
            WeightPreset::PowerOnly => "POWER_ONLY",
            WeightPreset::JointEqual => "JOINT_EQUAL",
            WeightPreset::Custom => "CUSTOM",
        }
    }
}

/// Weighted-sum objective coefficients: `w_power` in 1/W, `w_delay` in 1/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub preset: WeightPreset,
    pub w_power: f64,
    pub w_delay: f64,
}

impl ObjectiveWeights {
    pub fn power_only() -> Self {
        ObjectiveWeights {
            preset: WeightPreset::PowerOnly,
            w_power: 1.0,
            w_delay: 0.0,
        }
    }

    /// Weights `(0, 1)`, used for the delay normalizer of the joint preset.
    pub fn delay_only() -> Self {
        ObjectiveWeights::custom(0.0, 1.0)
    }

    pub fn custom(w_power: f64, w_delay: f64) -> Self {
        ObjectiveWeights {
            preset: WeightPreset::Custom,
            w_power,
            w_delay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(self.w_power) || !ok(self.w_delay) {
            return Err(Error::Weights("weights must be finite and non-negative".into()));
        }
        if self.w_power == 0.0 && self.w_delay == 0.0 {
            return Err(Error::Weights("weights must not both be zero".into()));
        }
        Ok(())
    }

    pub fn objective(&self, power: f64, delay: f64) -> f64 {
        self.w_power * power + self.w_delay * delay
    }
}

/// How much power a transmitter radiates on a feasible link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RadiatedPower {
    /// Just enough to meet the receiver's sensitivity (power control).
    #[default]
    MinRequired,
    /// Always the transmitter's maximum.
    Max,
}

fn default_true() -> bool {
    true
}

fn default_radiated() -> RadiatedPower {
    RadiatedPower::MinRequired
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub processing_setting: ProcessingSetting,
    pub objective: ObjectiveWeights,
    /// bytes
    pub packet_size: f64,
    pub rho_max: f64,
    pub bins: usize,
    pub mips_per_kbps: f64,
    /// J/bit charged on traffic crossing the fiber hop
    pub core_energy_per_bit: f64,
    #[serde(default = "default_radiated")]
    pub radiated_power: RadiatedPower,
    /// In `VEHICLES_ONLY`, keep edge access points in the graph as relays
    /// (their servers stay ineligible).
    #[serde(default = "default_true")]
    pub edge_relay_in_vehicles_only: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            processing_setting: ProcessingSetting::VehiclesAndEdge,
            objective: ObjectiveWeights::power_only(),
            packet_size: 1500.0,
            rho_max: 0.95,
            bins: 64,
            mips_per_kbps: 1.0,
            core_energy_per_bit: 2e-8,
            radiated_power: RadiatedPower::MinRequired,
            edge_relay_in_vehicles_only: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub lot: Lot,
    pub nodes: Vec<NodeSpec>,
    pub demands: Vec<DemandSpec>,
    pub settings: Settings,
}

impl Scenario {
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn node(&self, id: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn with_setting(&self, setting: ProcessingSetting) -> Scenario {
        let mut s = self.clone();
        s.settings.processing_setting = setting;
        s
    }

    /// Canonical JSON text (sorted keys, LF, trailing newline).
    pub fn emit(&self) -> String {
        let value = serde_json::to_value(self).expect("scenario serializes");
        let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
        text.push('\n');
        text
    }

    /// Hex SHA-256 of the canonical emission.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.emit().as_bytes()))
    }

    /// Checks every invariant and resolves defaulted demand loads. Idempotent.
    pub fn validate(mut self) -> Result<Scenario> {
        validate_lot(&self.lot)?;
        validate_settings(&self.settings)?;
        let mut seen = std::collections::BTreeSet::new();
        let mut clouds = 0usize;
        for (i, node) in self.nodes.iter().enumerate() {
            let at = format!("nodes[{i}]");
            validate_id(&node.id, &format!("{at}.id"))?;
            if !seen.insert(node.id.clone()) {
                return Err(Error::semantic(format!("{at}.id"), format!("duplicate node id {:?}", node.id)));
            }
            validate_processor(&node.processor, &format!("{at}.processor"))?;
            for (j, radio) in node.radios.iter().enumerate() {
                validate_radio(radio, &format!("{at}.radios[{j}]"))?;
            }
            match node.kind {
                NodeKind::Vehicle => {
                    let pos = node
                        .position
                        .ok_or_else(|| Error::semantic(format!("{at}.position"), "vehicle requires a position"))?;
                    validate_position(&pos, &format!("{at}.position"))?;
                    if pos.x < 0.0 || pos.y < 0.0 || pos.x > self.lot.width || pos.y > self.lot.height {
                        return Err(Error::semantic(format!("{at}.position"), "vehicle outside the lot bounds"));
                    }
                    expect_radios(node, &[Medium::Dsrc, Medium::Wifi], &at)?;
                    if node.onu.is_some() {
                        return Err(Error::semantic(format!("{at}.onu"), "only edge nodes carry an ONU"));
                    }
                }
                NodeKind::Edge => {
                    let pos = node
                        .position
                        .ok_or_else(|| Error::semantic(format!("{at}.position"), "edge node requires a position"))?;
                    validate_position(&pos, &format!("{at}.position"))?;
                    expect_radios(node, &[Medium::Wifi], &at)?;
                    let onu = node
                        .onu
                        .ok_or_else(|| Error::semantic(format!("{at}.onu"), "missing device: edge node requires an ONU"))?;
                    validate_power_pair(onu.power_idle, onu.power_max, &format!("{at}.onu"))?;
                    if !(onu.fiber_capacity.is_finite() && onu.fiber_capacity > 0.0) {
                        return Err(Error::semantic(format!("{at}.onu.fiber_capacity"), "must be positive"));
                    }
                }
                NodeKind::Cloud => {
                    clouds += 1;
                    if clouds > 1 {
                        return Err(Error::semantic(format!("{at}.kind"), "at most one cloud node is supported"));
                    }
                    if !node.radios.is_empty() {
                        return Err(Error::semantic(format!("{at}.radios"), "cloud node has no radios"));
                    }
                    let len = node
                        .fiber_length
                        .ok_or_else(|| Error::semantic(format!("{at}.fiber_length"), "cloud requires fiber_length"))?;
                    if !(len.is_finite() && len > 0.0) {
                        return Err(Error::semantic(format!("{at}.fiber_length"), "must be positive"));
                    }
                }
            }
        }

        let rho = self.settings.mips_per_kbps;
        let mut demand_ids = std::collections::BTreeSet::new();
        for (i, demand) in self.demands.iter_mut().enumerate() {
            let at = format!("demands[{i}]");
            validate_id(&demand.id, &format!("{at}.id"))?;
            if !demand_ids.insert(demand.id.clone()) {
                return Err(Error::semantic(format!("{at}.id"), format!("duplicate demand id {:?}", demand.id)));
            }
            let source = self
                .nodes
                .iter()
                .find(|n| n.id == demand.source)
                .ok_or_else(|| Error::semantic(format!("{at}.source"), format!("unknown node reference {:?}", demand.source)))?;
            if source.kind != NodeKind::Vehicle {
                return Err(Error::semantic(format!("{at}.source"), "source must be a vehicle"));
            }
            if !(demand.traffic.is_finite() && demand.traffic > 0.0) {
                return Err(Error::semantic(format!("{at}.traffic"), "traffic must be positive"));
            }
            match demand.load {
                Some(load) if !(load.is_finite() && load > 0.0) => {
                    return Err(Error::semantic(format!("{at}.load"), "load must be positive"));
                }
                Some(_) => {}
                None => demand.load = Some(rho * demand.traffic),
            }
        }

        if eligible_processors(&self).is_empty() {
            return Err(Error::semantic(
                "settings.processing_setting",
                format!("no eligible processor for {}", self.settings.processing_setting.as_str()),
            ));
        }
        Ok(self)
    }
}

fn validate_id(id: &str, field: &str) -> Result<()> {
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric()) {
        return Err(Error::semantic(field, "identifiers must be non-empty ASCII alphanumerics"));
    }
    Ok(())
}

fn validate_lot(lot: &Lot) -> Result<()> {
    if !(lot.width.is_finite() && lot.width > 0.0 && lot.height.is_finite() && lot.height > 0.0) {
        return Err(Error::semantic("lot", "lot dimensions must be positive"));
    }
    Ok(())
}

fn validate_position(p: &Position, field: &str) -> Result<()> {
    if !(p.x.is_finite() && p.y.is_finite()) {
        return Err(Error::semantic(field, "position must be finite"));
    }
    Ok(())
}

fn validate_power_pair(idle: f64, max: f64, field: &str) -> Result<()> {
    if !(idle.is_finite() && max.is_finite() && idle >= 0.0 && idle <= max) {
        return Err(Error::semantic(field, "require 0 <= power_idle <= power_max"));
    }
    Ok(())
}

fn validate_processor(p: &ProcessorSpec, field: &str) -> Result<()> {
    if !(p.capacity.is_finite() && p.capacity > 0.0) {
        return Err(Error::semantic(format!("{field}.capacity"), "negative or zero capacity"));
    }
    if !(p.power_idle.is_finite() && p.power_max.is_finite() && p.power_idle > 0.0 && p.power_idle <= p.power_max) {
        return Err(Error::semantic(field, "require 0 < power_idle <= power_max"));
    }
    Ok(())
}

fn validate_radio(r: &RadioSpec, field: &str) -> Result<()> {
    if r.medium == Medium::Fiber {
        return Err(Error::semantic(format!("{field}.medium"), "radios are DSRC or WIFI"));
    }
    if !(r.bandwidth.is_finite() && r.bandwidth > 0.0) {
        return Err(Error::semantic(format!("{field}.bandwidth"), "must be positive"));
    }
    if !(r.freq.is_finite() && r.freq > 0.0) {
        return Err(Error::semantic(format!("{field}.freq"), "must be positive"));
    }
    if !(r.tx_power_max.is_finite() && r.rx_sensitivity.is_finite() && r.link_margin.is_finite()) {
        return Err(Error::semantic(field, "radio levels must be finite"));
    }
    validate_power_pair(r.power_idle, r.power_max, field)
}

fn expect_radios(node: &NodeSpec, media: &[Medium], at: &str) -> Result<()> {
    for m in media {
        let count = node.radios.iter().filter(|r| r.medium == *m).count();
        if count != 1 {
            return Err(Error::semantic(
                format!("{at}.radios"),
                format!("missing device: expected exactly one {} radio", m.as_str()),
            ));
        }
    }
    if node.radios.len() != media.len() {
        return Err(Error::semantic(format!("{at}.radios"), "unexpected radio"));
    }
    Ok(())
}

fn validate_settings(s: &Settings) -> Result<()> {
    if !(s.rho_max > 0.0 && s.rho_max < 1.0) {
        return Err(Error::semantic("settings.rho_max", "require 0 < rho_max < 1"));
    }
    if s.bins < 2 {
        return Err(Error::semantic("settings.bins", "require at least 2 bins"));
    }
    if !(s.packet_size.is_finite() && s.packet_size > 0.0) {
        return Err(Error::semantic("settings.packet_size", "must be positive"));
    }
    if !(s.mips_per_kbps.is_finite() && s.mips_per_kbps > 0.0) {
        return Err(Error::semantic("settings.mips_per_kbps", "must be positive"));
    }
    if !(s.core_energy_per_bit.is_finite() && s.core_energy_per_bit >= 0.0) {
        return Err(Error::semantic("settings.core_energy_per_bit", "must be non-negative"));
    }
    s.objective
        .validate()
        .map_err(|e| Error::semantic("settings.objective", e.to_string()))
}

/// Parses and validates a scenario document.
pub fn parse_scenario(document: &str) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(document).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => Error::Semantic {
            field: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        },
        _ => Error::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        },
    })?;
    scenario.validate()
}

/// Node indices (in document order) that may process demands under the
/// scenario's processing setting.
pub fn eligible_processors(scenario: &Scenario) -> Vec<usize> {
    let setting = scenario.settings.processing_setting;
    scenario
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| match setting {
            ProcessingSetting::VehiclesOnly => n.kind == NodeKind::Vehicle,
            ProcessingSetting::VehiclesAndEdge => matches!(n.kind, NodeKind::Vehicle | NodeKind::Edge),
            ProcessingSetting::CloudOnly => n.kind == NodeKind::Cloud,
        })
        .map(|(i, _)| i)
        .collect()
}

pub const LOT_SIDE_M: f64 = 40.0;
pub const DEFAULT_VEHICLES: usize = 8;
pub const EDGE_POSITIONS: [(f64, f64); 2] = [(10.0, 20.0), (30.0, 20.0)];

pub fn vehicle_processor() -> ProcessorSpec {
    // 800 MHz at one instruction per cycle
    ProcessorSpec {
        capacity: 800.0,
        power_idle: 5.0,
        power_max: 10.0,
    }
}

pub fn edge_processor() -> ProcessorSpec {
    ProcessorSpec {
        capacity: 1200.0,
        power_idle: 2.0,
        power_max: 12.5,
    }
}

pub fn cloud_processor() -> ProcessorSpec {
    ProcessorSpec {
        capacity: 50_000.0,
        power_idle: 150.0,
        power_max: 300.0,
    }
}

pub fn vehicle_dsrc() -> RadioSpec {
    // The transceiver power pair is not published for DSRC; it reuses the
    // WiFi transceiver pair below.
    RadioSpec {
        medium: Medium::Dsrc,
        bandwidth: 27e6,
        freq: 5.9e9,
        tx_power_max: 22.0,
        rx_sensitivity: -77.0,
        power_idle: 0.000072,
        power_max: 0.612,
        link_margin: 0.0,
    }
}

pub fn vehicle_wifi() -> RadioSpec {
    RadioSpec {
        medium: Medium::Wifi,
        bandwidth: 150e6,
        freq: 2.4e9,
        tx_power_max: 14.0,
        rx_sensitivity: -72.0,
        power_idle: 0.000072,
        power_max: 0.612,
        link_margin: 0.0,
    }
}

pub fn access_point() -> RadioSpec {
    RadioSpec {
        medium: Medium::Wifi,
        bandwidth: 150e6,
        freq: 2.4e9,
        tx_power_max: 22.0,
        rx_sensitivity: -104.0,
        power_idle: 5.5,
        power_max: 25.0,
        link_margin: 0.0,
    }
}

pub fn edge_onu() -> OnuSpec {
    OnuSpec {
        power_idle: 6.8,
        power_max: 8.0,
        fiber_capacity: 3.75e9,
    }
}

/// The parking-lot instance: 8 vehicles drawn uniformly from a seeded
/// generator, edges at fixed positions, one cloud 250 km away, and one
/// 1000 kbit/s demand from `v1`.
pub fn generate_default(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::new();
    for i in 1..=DEFAULT_VEHICLES {
        // centimeter resolution keeps the document readable
        let x = (rng.gen_range(0.0..=LOT_SIDE_M) * 100.0).round() / 100.0;
        let y = (rng.gen_range(0.0..=LOT_SIDE_M) * 100.0).round() / 100.0;
        nodes.push(NodeSpec {
            id: format!("v{i}"),
            kind: NodeKind::Vehicle,
            position: Some(Position { x, y }),
            processor: vehicle_processor(),
            radios: vec![vehicle_dsrc(), vehicle_wifi()],
            onu: None,
            fiber_length: None,
        });
    }
    for (i, (x, y)) in EDGE_POSITIONS.iter().enumerate() {
        nodes.push(NodeSpec {
            id: format!("e{}", i + 1),
            kind: NodeKind::Edge,
            position: Some(Position { x: *x, y: *y }),
            processor: edge_processor(),
            radios: vec![access_point()],
            onu: Some(edge_onu()),
            fiber_length: None,
        });
    }
    nodes.push(NodeSpec {
        id: "cloud".into(),
        kind: NodeKind::Cloud,
        position: None,
        processor: cloud_processor(),
        radios: vec![],
        onu: None,
        fiber_length: Some(250e3),
    });
    Scenario {
        lot: Lot {
            width: LOT_SIDE_M,
            height: LOT_SIDE_M,
        },
        nodes,
        demands: vec![DemandSpec {
            id: "d1".into(),
            source: "v1".into(),
            traffic: 1000.0,
            load: None,
        }],
        settings: Settings::default(),
    }
    .validate()
    .expect("default scenario is valid")
}

/// The checked-in default scenario document.
pub const DEFAULT_SCENARIO_JSON: &str = include_str!("../../../scenarios/parking-lot-8v2e.json");

pub fn default_scenario() -> Scenario {
    parse_scenario(DEFAULT_SCENARIO_JSON).expect("shipped scenario is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_file_has_expected_population() {
        let s = default_scenario();
        let count = |k| s.nodes.iter().filter(|n| n.kind == k).count();
        assert_eq!(count(NodeKind::Vehicle), 8);
        assert_eq!(count(NodeKind::Edge), 2);
        assert_eq!(count(NodeKind::Cloud), 1);
    }

    #[test]
    fn default_file_matches_generator() {
        assert_eq!(default_scenario().emit(), generate_default(42).emit());
    }

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(generate_default(42).emit(), generate_default(42).emit());
        assert_ne!(generate_default(42).emit(), generate_default(7).emit());
    }

    #[test]
    fn generated_capacities() {
        let s = generate_default(3);
        for n in &s.nodes {
            match n.kind {
                NodeKind::Vehicle => {
                    assert_eq!(n.processor.capacity, 800.0);
                    let p = n.position.unwrap();
                    assert!((0.0..=40.0).contains(&p.x) && (0.0..=40.0).contains(&p.y));
                }
                NodeKind::Edge => assert_eq!(n.processor.capacity, 1200.0),
                NodeKind::Cloud => {}
            }
        }
    }

    #[test]
    fn source_must_be_vehicle() {
        let mut s = generate_default(1);
        s.demands[0].source = "e1".into();
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("source must be a vehicle"), "{err}");
        assert!(err.to_string().contains("demands[0].source"));
    }

    #[test]
    fn cloud_only_without_cloud_is_rejected() {
        let mut s = generate_default(1);
        s.nodes.retain(|n| n.kind != NodeKind::Cloud);
        s.settings.processing_setting = ProcessingSetting::CloudOnly;
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("no eligible processor"), "{err}");
    }

    #[test]
    fn unknown_reference_and_negative_capacity() {
        let mut s = generate_default(1);
        s.demands[0].source = "v99".into();
        assert!(s.validate().unwrap_err().to_string().contains("unknown node reference"));

        let mut s = generate_default(1);
        s.nodes[2].processor.capacity = -1.0;
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("nodes[2].processor.capacity"), "{err}");
    }

    #[test]
    fn missing_onu_is_reported() {
        let mut s = generate_default(1);
        s.nodes[8].onu = None;
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("nodes[8].onu"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_scenario("{\n  \"lot\": ,\n}") {
            Err(Error::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn load_defaults_to_ratio_times_traffic() {
        let mut s = generate_default(1);
        s.settings.mips_per_kbps = 1.1;
        s.demands[0].load = None;
        let v = s.validate().unwrap();
        assert!((v.demands[0].load_mips() - 1100.0).abs() < 1e-9);
        let again = v.clone().validate().unwrap();
        assert_eq!(v, again);
    }

    #[test]
    fn eligible_sets_per_setting() {
        let s = default_scenario();
        let ids = |set: ProcessingSetting| -> Vec<String> {
            eligible_processors(&s.with_setting(set))
                .into_iter()
                .map(|i| s.nodes[i].id.clone())
                .collect()
        };
        assert_eq!(ids(ProcessingSetting::VehiclesOnly).len(), 8);
        assert_eq!(ids(ProcessingSetting::CloudOnly), vec!["cloud".to_string()]);
        assert_eq!(ids(ProcessingSetting::VehiclesAndEdge).len(), 10);
    }
}
