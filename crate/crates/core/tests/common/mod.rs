#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vecop_core::scenario::{
    access_point, cloud_processor, edge_onu, edge_processor, vehicle_dsrc, vehicle_processor, vehicle_wifi,
    DemandSpec, Lot, NodeKind, NodeSpec, Position, Settings,
};
use vecop_core::{ProcessingSetting, Scenario};

/// Small single-demand instance: 2-4 vehicles, 0-1 edge, 0-1 cloud (the
/// cloud needs an edge ONU to be reachable).
pub fn small_instance(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vehicles = rng.gen_range(2..=4);
    let edge = rng.gen_bool(0.5);
    let cloud = edge && rng.gen_bool(0.5);
    let mut nodes = Vec::new();
    for i in 1..=vehicles {
        nodes.push(NodeSpec {
            id: format!("v{i}"),
            kind: NodeKind::Vehicle,
            position: Some(Position {
                x: (rng.gen_range(0.0..40.0_f64) * 100.0).round() / 100.0,
                y: (rng.gen_range(0.0..40.0_f64) * 100.0).round() / 100.0,
            }),
            processor: vehicle_processor(),
            radios: vec![vehicle_dsrc(), vehicle_wifi()],
            onu: None,
            fiber_length: None,
        });
    }
    if edge {
        nodes.push(NodeSpec {
            id: "e1".into(),
            kind: NodeKind::Edge,
            position: Some(Position { x: 20.0, y: 20.0 }),
            processor: edge_processor(),
            radios: vec![access_point()],
            onu: Some(edge_onu()),
            fiber_length: None,
        });
    }
    if cloud {
        nodes.push(NodeSpec {
            id: "cloud".into(),
            kind: NodeKind::Cloud,
            position: None,
            processor: cloud_processor(),
            radios: vec![],
            onu: None,
            fiber_length: Some(250e3),
        });
    }
    let setting = match (edge, cloud, rng.gen_range(0..3)) {
        (_, true, 2) => ProcessingSetting::CloudOnly,
        (true, _, 1 | 2) => ProcessingSetting::VehiclesAndEdge,
        _ => ProcessingSetting::VehiclesOnly,
    };
    let traffic = (rng.gen_range(200.0..2400.0_f64)).round();
    Scenario {
        lot: Lot {
            width: 40.0,
            height: 40.0,
        },
        nodes,
        demands: vec![DemandSpec {
            id: "d1".into(),
            source: "v1".into(),
            traffic,
            load: None,
        }],
        settings: Settings {
            processing_setting: setting,
            ..Settings::default()
        },
    }
    .validate()
    .expect("generated instance is valid")
}
