mod common;

use proptest::prelude::*;
use vecop_core::delaymodel::{build_table, lookup, mm1_delay, QueueSpec};
use vecop_core::formulation::{census, evaluate, export_lp, formulate, read_lp, Instance};
use vecop_core::scenario::{default_scenario, parse_scenario};
use vecop_core::solver::{brute_force, greedy_split, solve, Limits};
use vecop_core::{make_weights, ObjectiveWeights, WeightRequest};

fn instance(seed: u64) -> Instance {
    Instance::new(common::small_instance(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lookup_is_conservative_and_refines(
        mu in 1.0f64..1e7,
        rho_max in 0.01f64..0.999,
        bins in 2usize..200,
        frac in 0.0f64..=1.0,
    ) {
        let lambda = frac * rho_max * mu;
        let coarse = build_table("l", QueueSpec { mu, rho_max }, bins);
        let fine = build_table("l", QueueSpec { mu, rho_max }, 2 * bins);
        let c = lookup(&coarse, lambda).unwrap();
        let f = lookup(&fine, lambda).unwrap();
        prop_assert!(c >= mm1_delay(lambda, mu).unwrap());
        prop_assert!(f <= c);
        prop_assert!(lookup(&coarse, rho_max * mu * 1.0001).is_err());
    }

    #[test]
    fn scenario_emission_round_trips(seed in 0u64..1000) {
        let s = common::small_instance(seed);
        let text = s.emit();
        let back = parse_scenario(&text).unwrap();
        prop_assert_eq!(back.emit(), text);
        prop_assert_eq!(back.hash(), s.hash());
    }

    #[test]
    fn greedy_split_places_the_whole_load(seed in 0u64..1000, load in 1.0f64..3000.0) {
        let s = default_scenario();
        let mut targets: Vec<usize> = (0..s.nodes.len()).filter(|n| (seed >> n) & 1 == 1).collect();
        if targets.is_empty() {
            targets.push(0);
        }
        let capacity: f64 = targets.iter().map(|n| s.nodes[*n].processor.capacity).sum();
        match greedy_split(&s, &targets, load) {
            Ok(x) => {
                prop_assert!(capacity >= load);
                prop_assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                for (n, share) in targets.iter().zip(&x) {
                    prop_assert!(*share >= 0.0);
                    prop_assert!(share * load <= s.nodes[*n].processor.capacity * (1.0 + 1e-12));
                }
            }
            Err(_) => prop_assert!(capacity < load),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn argmin_is_scale_invariant(seed in 0u64..10_000, wp in 0.01f64..10.0, wd in 1.0f64..1e4) {
        let inst = instance(seed);
        let w = ObjectiveWeights::custom(wp, wd);
        let w7 = ObjectiveWeights::custom(7.0 * wp, 7.0 * wd);
        match (solve(&inst, &w, &Limits::default()), solve(&inst, &w7, &Limits::default())) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(&a.allocation, &b.allocation);
                prop_assert!((7.0 * a.objective_value - b.objective_value).abs() <= 1e-9 * b.objective_value);
                let brute = brute_force(&inst, &w7).unwrap();
                prop_assert_eq!(&brute.allocation, &b.allocation);
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "feasibility differs under scaling"),
        }
    }

    #[test]
    fn power_only_optimum_is_monotone_in_demand(seed in 0u64..10_000, step in 50.0f64..600.0) {
        let small = common::small_instance(seed);
        let mut large = small.clone();
        for d in &mut large.demands {
            d.traffic += step;
            d.load = None;
        }
        let small = Instance::new(small).unwrap();
        let large = Instance::new(large).unwrap();
        let w = ObjectiveWeights::power_only();
        if let (Ok(a), Ok(b)) = (solve(&small, &w, &Limits::default()), solve(&large, &w, &Limits::default())) {
            prop_assert!(a.total_power <= b.total_power * (1.0 + 1e-9));
        }
    }

    #[test]
    fn joint_optimum_dominates_power_allocation(seed in 0u64..10_000, wd in 1.0f64..1e4) {
        let inst = instance(seed);
        let limits = Limits::default();
        let Ok(power) = solve(&inst, &ObjectiveWeights::power_only(), &limits) else { return Ok(()) };
        let w = ObjectiveWeights::custom(1.0, wd);
        let joint = solve(&inst, &w, &limits).unwrap();
        let rescored = evaluate(&inst, &power.allocation, &w).unwrap();
        prop_assert!(joint.objective_value <= rescored.objective_value * (1.0 + 1e-9));
        prop_assert!(power.total_power <= joint.total_power * (1.0 + 1e-9));
    }

    #[test]
    fn solve_is_deterministic(seed in 0u64..10_000) {
        let inst = instance(seed);
        let w = make_weights(WeightRequest::Custom { w_power: 0.04, w_delay: 300.0 }).unwrap();
        let a = solve(&inst, &w, &Limits::default());
        let b = solve(&inst, &w, &Limits::default());
        match (a, b) {
            (Ok(mut a), Ok(mut b)) => {
                a.stats.wall_time_ms = 0.0;
                b.stats.wall_time_ms = 0.0;
                prop_assert_eq!(a, b);
            }
            (a, b) => prop_assert_eq!(a.err(), b.err()),
        }
    }

    #[test]
    fn model_census_and_lp_round_trip(seed in 0u64..10_000) {
        let inst = instance(seed);
        let w = ObjectiveWeights::custom(0.5, 250.0);
        let model = formulate(&inst, &w).unwrap();
        prop_assert_eq!(model.census(), census(&inst));
        let back = read_lp(&export_lp(&model)).unwrap();
        prop_assert!(model.structurally_equal(&back, 1e-12));
    }
}
