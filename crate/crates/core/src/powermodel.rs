//! Device and system power: idle power on activation, load-proportional
//! power, and for transmitters a radiated component charged by airtime.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::formulation::Allocation;
use crate::linkmodel::{DeviceKind, LinkSet};
use crate::scalar::{lit, to_f64, Scalar};
use crate::scenario::{Medium, Scenario};

/// Utilizations above `1 + UTILIZATION_TOLERANCE` are rejected.
pub const UTILIZATION_TOLERANCE: f64 = 1e-9;

/// Key under which per-bit core network energy appears in breakdowns.
pub const CORE_KEY: &str = "core";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSpec<T> {
    pub power_idle: T,
    pub power_max: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceLoad<T> {
    pub device: String,
    pub active: bool,
    pub utilization: T,
    /// W, transmit interfaces only
    pub radiated_component: T,
}

/// Load-dependent part of a device's draw.
pub fn dynamic_power<T: Scalar>(spec: &PowerSpec<T>, utilization: T, radiated_component: T) -> T {
    (spec.power_max - spec.power_idle) * utilization + utilization * radiated_component
}

pub fn device_power<T: Scalar>(spec: &PowerSpec<T>, load: &DeviceLoad<T>) -> Result<T> {
    check_utilization(load)?;
    if !load.active {
        return Ok(T::zero());
    }
    Ok(spec.power_idle + dynamic_power(spec, load.utilization, load.radiated_component))
}

fn check_utilization<T: Scalar>(load: &DeviceLoad<T>) -> Result<()> {
    let u = load.utilization;
    if u.is_nan() || u < T::zero() || u > T::one() + lit(UTILIZATION_TOLERANCE) {
        return Err(Error::OverCapacity {
            device: load.device.clone(),
            utilization: to_f64(u),
        });
    }
    if !load.active && u > T::zero() {
        return Err(Error::Domain(format!("{} carries load while inactive", load.device)));
    }
    Ok(())
}

/// Draw of a device whose airtime is split over independent channels
/// (point-to-point DSRC links). Idle power is charged once.
pub fn channel_power<T: Scalar>(spec: &PowerSpec<T>, channels: &[DeviceLoad<T>]) -> Result<T> {
    let Some(first) = channels.first() else {
        return Ok(T::zero());
    };
    let mut total = device_power(spec, first)?;
    for ch in &channels[1..] {
        check_utilization(ch)?;
        if ch.active {
            total += dynamic_power(spec, ch.utilization, ch.radiated_component);
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerBreakdown {
    pub total: f64,
    /// Watts per active device id, plus `core` for per-bit core energy.
    pub per_device: BTreeMap<String, f64>,
}

/// Traffic carried by each link under the allocation, bit/s.
pub fn carried_traffic(scenario: &Scenario, links: &LinkSet, allocation: &Allocation) -> Vec<f64> {
    let mut carried = vec![0.0; links.links.len()];
    for da in &allocation.demands {
        let bps = scenario.demands[da.demand].traffic_bps();
        for s in &da.serving {
            for &l in &s.route {
                carried[l] += bps;
            }
        }
    }
    carried
}

/// Per-device loads (one entry per channel for point-to-point interfaces).
pub fn device_loads(scenario: &Scenario, links: &LinkSet, allocation: &Allocation) -> Vec<Vec<DeviceLoad<f64>>> {
    let carried = carried_traffic(scenario, links, allocation);
    let mut processed = vec![0.0; scenario.nodes.len()];
    let mut serving = vec![false; scenario.nodes.len()];
    for da in &allocation.demands {
        let w = scenario.demands[da.demand].load_mips();
        for s in &da.serving {
            processed[s.node] += s.fraction * w;
            serving[s.node] = true;
        }
    }

    links
        .devices
        .iter()
        .enumerate()
        .map(|(dev, d)| match d.kind {
            DeviceKind::Processor => vec![DeviceLoad {
                device: d.id.clone(),
                active: serving[d.node],
                utilization: processed[d.node] / d.bandwidth,
                radiated_component: 0.0,
            }],
            DeviceKind::Dsrc => links
                .links
                .iter()
                .enumerate()
                .filter(|(l, link)| {
                    (link.tx_device == dev || link.rx_device == dev) && carried[*l] > 0.0
                })
                .map(|(l, link)| DeviceLoad {
                    device: d.id.clone(),
                    active: true,
                    utilization: carried[l] / d.bandwidth,
                    radiated_component: if link.tx_device == dev { link.radiated_power } else { 0.0 },
                })
                .collect(),
            DeviceKind::Wifi | DeviceKind::AccessPoint | DeviceKind::Onu => {
                let mut total = 0.0;
                let mut radiated = 0.0;
                for (l, link) in links.links.iter().enumerate() {
                    if link.tx_device == dev || link.rx_device == dev {
                        total += carried[l];
                        if link.tx_device == dev {
                            radiated += link.radiated_power * carried[l];
                        }
                    }
                }
                if total > 0.0 {
                    vec![DeviceLoad {
                        device: d.id.clone(),
                        active: true,
                        utilization: total / d.bandwidth,
                        radiated_component: radiated / total,
                    }]
                } else {
                    Vec::new()
                }
            }
        })
        .collect()
}

/// Total and per-device power of an allocation.
pub fn system_power(scenario: &Scenario, links: &LinkSet, allocation: &Allocation) -> Result<PowerBreakdown> {
    let loads = device_loads(scenario, links, allocation);
    let mut per_device = BTreeMap::new();
    for (dev, channels) in links.devices.iter().zip(&loads) {
        let spec = PowerSpec {
            power_idle: dev.power_idle,
            power_max: dev.power_max,
        };
        let p = channel_power(&spec, channels)?;
        if channels.iter().any(|c| c.active) {
            per_device.insert(dev.id.clone(), p);
        }
    }
    let carried = carried_traffic(scenario, links, allocation);
    let fiber_bps: f64 = links
        .links
        .iter()
        .zip(&carried)
        .filter(|(l, _)| l.medium == Medium::Fiber)
        .map(|(_, c)| *c)
        .sum();
    if fiber_bps > 0.0 {
        per_device.insert(CORE_KEY.to_string(), fiber_bps * scenario.settings.core_energy_per_bit);
    }
    let total = per_device.values().sum();
    Ok(PowerBreakdown { total, per_device })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{DemandAllocation, Serving};
    use crate::linkmodel::{build_links, dbm_to_watts, required_tx_dbm};
    use crate::scenario::{default_scenario, ProcessingSetting};
    use proptest::prelude::*;

    const OBU: PowerSpec<f64> = PowerSpec {
        power_idle: 5.0,
        power_max: 10.0,
    };

    fn load(active: bool, u: f64) -> DeviceLoad<f64> {
        DeviceLoad {
            device: "v1.obu".into(),
            active,
            utilization: u,
            radiated_component: 0.0,
        }
    }

    #[test]
    fn obu_anchor_points() {
        assert_eq!(device_power(&OBU, &load(true, 0.0)).unwrap(), 5.0);
        assert_eq!(device_power(&OBU, &load(true, 1.0)).unwrap(), 10.0);
        assert_eq!(device_power(&OBU, &load(true, 0.5)).unwrap(), 7.5);
        assert_eq!(device_power(&OBU, &load(false, 0.0)).unwrap(), 0.0);
        let f32_spec = PowerSpec {
            power_idle: 5.0f32,
            power_max: 10.0f32,
        };
        let l = DeviceLoad {
            device: "x".into(),
            active: true,
            utilization: 0.5f32,
            radiated_component: 0.0,
        };
        assert_eq!(device_power(&f32_spec, &l).unwrap(), 7.5f32);
    }

    #[test]
    fn utilization_out_of_range() {
        assert!(matches!(device_power(&OBU, &load(true, 1.5)), Err(Error::OverCapacity { .. })));
        assert!(device_power(&OBU, &load(true, -0.1)).is_err());
    }

    #[test]
    fn empty_allocation_draws_nothing() {
        let s = default_scenario();
        let ls = build_links(&s).unwrap();
        let p = system_power(&s, &ls, &Allocation::default()).unwrap();
        assert_eq!(p.total, 0.0);
        assert!(p.per_device.is_empty());
    }

    #[test]
    fn local_processing_is_obu_only() {
        let mut s = default_scenario();
        s.demands[0].load = Some(600.0);
        let ls = build_links(&s).unwrap();
        let alloc = Allocation {
            demands: vec![DemandAllocation {
                demand: 0,
                serving: vec![Serving {
                    node: 0,
                    fraction: 1.0,
                    route: vec![],
                }],
            }],
        };
        let p = system_power(&s, &ls, &alloc).unwrap();
        assert!((p.total - (5.0 + 5.0 * 600.0 / 800.0)).abs() < 1e-12);
        assert_eq!(p.per_device.len(), 1);
    }

    #[test]
    fn cloud_path_activates_ap_and_onu() {
        let s = default_scenario().with_setting(ProcessingSetting::CloudOnly);
        let ls = build_links(&s).unwrap();
        let up = ls.link_by_id("v1.e1").unwrap();
        let fiber = ls.link_by_id("e1.cloud").unwrap();
        let cloud = s.node_index("cloud").unwrap();
        let alloc = Allocation {
            demands: vec![DemandAllocation {
                demand: 0,
                serving: vec![Serving {
                    node: cloud,
                    fraction: 1.0,
                    route: vec![up, fiber],
                }],
            }],
        };
        let p = system_power(&s, &ls, &alloc).unwrap();
        assert!(p.per_device["e1.ap"] >= 5.5);
        assert!(p.per_device["e1.onu"] >= 6.8);
        assert!(p.per_device["cloud.server"] >= 150.0);
        assert!((p.per_device[CORE_KEY] - 1e6 * 2e-8).abs() < 1e-15);
        let sum: f64 = p.per_device.values().sum();
        assert!((sum - p.total).abs() <= 1e-9 * p.total);
    }

    #[test]
    fn dsrc_costs_more_per_bit_than_wifi_at_full_load() {
        let s = default_scenario();
        let v = &s.nodes[0];
        let dsrc = v.radio(Medium::Dsrc).unwrap();
        let wifi = v.radio(Medium::Wifi).unwrap();
        let ap = s.nodes[8].radio(Medium::Wifi).unwrap();
        for d in [5.0, 20.0, 35.0] {
            let rad_d = dbm_to_watts(required_tx_dbm(d, dsrc.freq, dsrc.rx_sensitivity, 0.0).unwrap());
            let rad_w = dbm_to_watts(required_tx_dbm(d, wifi.freq, ap.rx_sensitivity, 0.0).unwrap());
            let dsrc_bit = (dsrc.power_max + rad_d) / dsrc.bandwidth;
            let wifi_bit = (wifi.power_max + rad_w) / wifi.bandwidth;
            assert!(dsrc_bit > wifi_bit, "d={d}: {dsrc_bit} vs {wifi_bit}");
        }
    }

    proptest! {
        #[test]
        fn power_is_monotone_in_utilization(
            idle in 0.0f64..50.0,
            span in 0.0f64..50.0,
            rad in 0.0f64..0.2,
            u in 0.0f64..1.0,
            du in 0.0f64..1.0,
        ) {
            let spec = PowerSpec { power_idle: idle, power_max: idle + span };
            let hi = (u + du).min(1.0);
            let mk = |u: f64| DeviceLoad { device: "d".into(), active: true, utilization: u, radiated_component: rad };
            let p0 = device_power(&spec, &mk(u)).unwrap();
            let p1 = device_power(&spec, &mk(hi)).unwrap();
            prop_assert!(p1 >= p0);
        }

        #[test]
        fn channel_power_is_additive(us in proptest::collection::vec(0.0f64..1.0, 1..6)) {
            let spec = PowerSpec { power_idle: 0.000072, power_max: 0.612 };
            let chans: Vec<_> = us.iter().map(|u| DeviceLoad {
                device: "d".into(), active: true, utilization: *u, radiated_component: 0.01,
            }).collect();
            let total = channel_power(&spec, &chans).unwrap();
            let expect = 0.000072 + us.iter().map(|u| dynamic_power(&spec, *u, 0.01)).sum::<f64>();
            prop_assert!((total - expect).abs() <= 1e-12);
        }
    }
}
