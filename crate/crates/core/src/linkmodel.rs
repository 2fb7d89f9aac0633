//! Directed feasible-link graph with free-space link budgets.
//!
//! Vehicles talk to each other over DSRC and to access points over WiFi;
//! access points talk to each other over WiFi; every edge ONU has one fiber
//! hop to the cloud. A wireless link exists iff the transmitter can close
//! the budget against the receiver's sensitivity.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};
use crate::scenario::{
    eligible_processors, Medium, NodeKind, NodeSpec, ProcessingSetting, RadiatedPower, RadioSpec, Scenario,
};

/// m/s
pub const WIRELESS_PROPAGATION_SPEED: f64 = 3e8;
/// m/s
pub const FIBER_PROPAGATION_SPEED: f64 = 2e8;
/// Path loss is evaluated no closer than this (far-field reference, m).
pub const MIN_LINK_DISTANCE: f64 = 1.0;

/// Free-space path loss in dB for `distance` meters at `freq` Hz.
pub fn fspl_db<T: Scalar>(distance: T, freq: T) -> Result<T> {
    if !(distance > T::zero()) || !(freq > T::zero()) {
        return Err(Error::Domain(format!(
            "path loss needs positive distance and frequency, got {distance} m, {freq} Hz"
        )));
    }
    let twenty: T = lit(20.0);
    Ok(twenty * distance.log10() + twenty * freq.log10() - lit(147.55))
}

/// Transmit level (dBm) that just closes the link.
pub fn required_tx_dbm<T: Scalar>(distance: T, freq: T, rx_sensitivity: T, margin: T) -> Result<T> {
    Ok(rx_sensitivity + margin + fspl_db(distance, freq)?)
}

pub fn dbm_to_watts<T: Scalar>(p: T) -> T {
    let ten: T = lit(10.0);
    ten.powf(p / ten) / lit(1000.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DeviceKind {
    Processor,
    Dsrc,
    Wifi,
    AccessPoint,
    Onu,
}

impl DeviceKind {
    pub fn is_interface(&self) -> bool {
        !matches!(self, DeviceKind::Processor)
    }
}

/// A powered device. `bandwidth` is bit/s for interfaces and MIPS for
/// processors.
#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub id: String,
    pub node: usize,
    pub kind: DeviceKind,
    pub power_idle: f64,
    pub power_max: f64,
    pub bandwidth: f64,
}

impl Device {
    pub fn span(&self) -> f64 {
        self.power_max - self.power_idle
    }

    /// Interfaces whose links share one airtime budget. DSRC links are
    /// budgeted point to point instead.
    pub fn is_shared_medium(&self) -> bool {
        matches!(self.kind, DeviceKind::Wifi | DeviceKind::AccessPoint)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: String,
    pub tx_node: usize,
    pub rx_node: usize,
    pub tx_device: usize,
    pub rx_device: usize,
    pub medium: Medium,
    /// m
    pub distance: f64,
    /// bit/s
    pub capacity: f64,
    /// W, 0 for fiber
    pub radiated_power: f64,
    /// s
    pub prop_delay: f64,
    /// s
    pub tx_delay_per_packet: f64,
}

#[derive(Debug, Clone)]
pub struct LinkSet {
    pub links: Vec<Link>,
    pub devices: Vec<Device>,
    /// Node ids in scenario order.
    pub node_ids: Vec<String>,
    pub in_graph: Vec<bool>,
    pub out_links: Vec<Vec<usize>>,
    pub in_links: Vec<Vec<usize>>,
    /// Processor device of each node.
    pub processor: Vec<usize>,
    /// Shared-medium device → links touching it (WiFi cells).
    pub cells: BTreeMap<usize, Vec<usize>>,
    link_index: BTreeMap<String, usize>,
}

impl LinkSet {
    pub fn link_by_id(&self, id: &str) -> Option<usize> {
        self.link_index.get(id).copied()
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn graph_vertex_count(&self) -> usize {
        self.in_graph.iter().filter(|b| **b).count()
    }

    /// Per-bit watts a link adds through load-proportional interface terms
    /// at both ends plus the radiated share (and core energy on fiber).
    pub fn per_bit_power(&self, link: usize, core_energy_per_bit: f64) -> f64 {
        let l = &self.links[link];
        let tx = &self.devices[l.tx_device];
        let rx = &self.devices[l.rx_device];
        let mut c = (tx.span() + l.radiated_power) / tx.bandwidth;
        if rx.kind.is_interface() {
            c += rx.span() / rx.bandwidth;
        }
        if l.medium == Medium::Fiber {
            c += core_energy_per_bit;
        }
        c
    }

    /// `tx, rx, medium, distance_m, capacity_bps, radiated_mW, prop_ns, txdelay_us`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tx,rx,medium,distance_m,capacity_bps,radiated_mW,prop_ns,txdelay_us\n");
        for l in &self.links {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.node_ids[l.tx_node],
                self.node_ids[l.rx_node],
                l.medium.as_str(),
                crate::experiment::sig9(l.distance),
                crate::experiment::sig9(l.capacity),
                crate::experiment::sig9(l.radiated_power * 1e3),
                crate::experiment::sig9(l.prop_delay * 1e9),
                crate::experiment::sig9(l.tx_delay_per_packet * 1e6),
            );
        }
        out
    }
}

fn device_suffix(kind: DeviceKind, node_kind: NodeKind) -> &'static str {
    match (kind, node_kind) {
        (DeviceKind::Processor, NodeKind::Vehicle) => "obu",
        (DeviceKind::Processor, _) => "server",
        (DeviceKind::Dsrc, _) => "dsrc",
        (DeviceKind::Wifi, _) => "wifi",
        (DeviceKind::AccessPoint, _) => "ap",
        (DeviceKind::Onu, _) => "onu",
    }
}

fn register_devices(scenario: &Scenario) -> (Vec<Device>, Vec<usize>) {
    let mut devices = Vec::new();
    let mut processor = Vec::new();
    for (i, node) in scenario.nodes.iter().enumerate() {
        let mut push = |kind: DeviceKind, idle: f64, max: f64, bw: f64| {
            devices.push(Device {
                id: format!("{}.{}", node.id, device_suffix(kind, node.kind)),
                node: i,
                kind,
                power_idle: idle,
                power_max: max,
                bandwidth: bw,
            });
            devices.len() - 1
        };
        let p = &node.processor;
        processor.push(push(DeviceKind::Processor, p.power_idle, p.power_max, p.capacity));
        for r in &node.radios {
            let kind = match (node.kind, r.medium) {
                (NodeKind::Edge, _) => DeviceKind::AccessPoint,
                (_, Medium::Dsrc) => DeviceKind::Dsrc,
                _ => DeviceKind::Wifi,
            };
            push(kind, r.power_idle, r.power_max, r.bandwidth);
        }
        if let Some(onu) = &node.onu {
            push(DeviceKind::Onu, onu.power_idle, onu.power_max, onu.fiber_capacity);
        }
    }
    (devices, processor)
}

fn in_graph(scenario: &Scenario, node: &NodeSpec) -> bool {
    let s = &scenario.settings;
    match (s.processing_setting, node.kind) {
        (_, NodeKind::Vehicle) => true,
        (ProcessingSetting::VehiclesOnly, NodeKind::Edge) => s.edge_relay_in_vehicles_only,
        (ProcessingSetting::VehiclesOnly, NodeKind::Cloud) => false,
        (ProcessingSetting::VehiclesAndEdge, NodeKind::Edge) => true,
        (ProcessingSetting::VehiclesAndEdge, NodeKind::Cloud) => false,
        (ProcessingSetting::CloudOnly, _) => true,
    }
}

/// Builds the directed feasible link graph for the scenario's setting.
pub fn build_links(scenario: &Scenario) -> Result<LinkSet> {
    let (devices, processor) = register_devices(scenario);
    let n = scenario.nodes.len();
    let present: Vec<bool> = scenario.nodes.iter().map(|node| in_graph(scenario, node)).collect();
    let device_of = |node: usize, kind: DeviceKind| -> usize {
        devices
            .iter()
            .position(|d| d.node == node && d.kind == kind)
            .expect("validated node carries the device")
    };

    let mut links = Vec::new();
    for a in 0..n {
        if !present[a] {
            continue;
        }
        for b in 0..n {
            if a == b || !present[b] {
                continue;
            }
            let (na, nb) = (&scenario.nodes[a], &scenario.nodes[b]);
            let wireless = match (na.kind, nb.kind) {
                (NodeKind::Vehicle, NodeKind::Vehicle) => Some((Medium::Dsrc, DeviceKind::Dsrc, DeviceKind::Dsrc)),
                (NodeKind::Vehicle, NodeKind::Edge) => Some((Medium::Wifi, DeviceKind::Wifi, DeviceKind::AccessPoint)),
                (NodeKind::Edge, NodeKind::Vehicle) => Some((Medium::Wifi, DeviceKind::AccessPoint, DeviceKind::Wifi)),
                (NodeKind::Edge, NodeKind::Edge) => {
                    Some((Medium::Wifi, DeviceKind::AccessPoint, DeviceKind::AccessPoint))
                }
                _ => None,
            };
            if let Some((medium, tx_kind, rx_kind)) = wireless {
                let tx_radio = na.radio(medium).expect("validated radio");
                let rx_radio = nb.radio(medium).expect("validated radio");
                let distance = na.position.expect("positioned").distance(&nb.position.expect("positioned"));
                if let Some((radiated, capacity)) = wireless_budget(tx_radio, rx_radio, distance, scenario)? {
                    links.push(Link {
                        id: format!("{}.{}", na.id, nb.id),
                        tx_node: a,
                        rx_node: b,
                        tx_device: device_of(a, tx_kind),
                        rx_device: device_of(b, rx_kind),
                        medium,
                        distance,
                        capacity,
                        radiated_power: radiated,
                        prop_delay: distance / WIRELESS_PROPAGATION_SPEED,
                        tx_delay_per_packet: 8.0 * scenario.settings.packet_size / capacity,
                    });
                }
            } else if na.kind == NodeKind::Edge && nb.kind == NodeKind::Cloud {
                let onu = na.onu.expect("validated onu");
                let distance = nb.fiber_length.expect("validated fiber length");
                links.push(Link {
                    id: format!("{}.{}", na.id, nb.id),
                    tx_node: a,
                    rx_node: b,
                    tx_device: device_of(a, DeviceKind::Onu),
                    rx_device: processor[b],
                    medium: Medium::Fiber,
                    distance,
                    capacity: onu.fiber_capacity,
                    radiated_power: 0.0,
                    prop_delay: distance / FIBER_PROPAGATION_SPEED,
                    tx_delay_per_packet: 8.0 * scenario.settings.packet_size / onu.fiber_capacity,
                });
            }
        }
    }

    let mut out_links = vec![Vec::new(); n];
    let mut in_links = vec![Vec::new(); n];
    let mut cells: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut link_index = BTreeMap::new();
    for (i, l) in links.iter().enumerate() {
        out_links[l.tx_node].push(i);
        in_links[l.rx_node].push(i);
        link_index.insert(l.id.clone(), i);
        for dev in [l.tx_device, l.rx_device] {
            if devices[dev].is_shared_medium() {
                cells.entry(dev).or_default().push(i);
            }
        }
    }

    let set = LinkSet {
        links,
        devices,
        node_ids: scenario.nodes.iter().map(|n| n.id.clone()).collect(),
        in_graph: present,
        out_links,
        in_links,
        processor,
        cells,
        link_index,
    };

    let eligible = eligible_processors(scenario);
    for d in &scenario.demands {
        let s = scenario.node_index(&d.source).expect("validated source");
        if !eligible.contains(&s) && set.out_links[s].is_empty() {
            return Err(Error::IsolatedSource(format!(
                "demand {} at {} has no feasible outgoing link and cannot process locally",
                d.id, d.source
            )));
        }
    }
    Ok(set)
}

/// Returns `(radiated watts, capacity bit/s)` when the budget closes.
fn wireless_budget(
    tx: &RadioSpec,
    rx: &RadioSpec,
    distance: f64,
    scenario: &Scenario,
) -> Result<Option<(f64, f64)>> {
    let required = required_tx_dbm(distance.max(MIN_LINK_DISTANCE), tx.freq, rx.rx_sensitivity, tx.link_margin)?;
    if required > tx.tx_power_max {
        return Ok(None);
    }
    let radiated = match scenario.settings.radiated_power {
        RadiatedPower::MinRequired => dbm_to_watts(required.min(tx.tx_power_max)),
        RadiatedPower::Max => dbm_to_watts(tx.tx_power_max),
    };
    Ok(Some((radiated, tx.bandwidth.min(rx.bandwidth))))
}
