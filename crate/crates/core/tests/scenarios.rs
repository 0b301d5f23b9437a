use proptest::prelude::*;

use drivesim::rng::rng_from_seed;
use drivesim::scenarios::{preset, preset_specs, sample_traffic_seeded, FreeSpaceLattice, ScenarioKind};
use drivesim::sim::{check_collision, ObstacleSet, VehicleParams};

/// 0.999 quantile of χ² with 9 degrees of freedom.
const CHI2_9_999: f64 = 27.877;

#[test]
fn waypoint_sampling_is_uniform_over_free_space() {
    let params = VehicleParams::default();
    for spec in preset_specs() {
        let scenario = spec.build(&params).unwrap();
        let lattice = FreeSpaceLattice::new(&scenario.track, &params);
        let n = lattice.len();
        assert!(n >= 10, "{}: only {n} free cells", spec.name);
        let group = |cell: usize| cell * 10 / n;
        let mut expected = [0.0; 10];
        for c in 0..n {
            expected[group(c)] += 1.0;
        }
        let draws = 10_000.0;
        for e in &mut expected {
            *e *= draws / n as f64;
        }
        let mut observed = [0.0; 10];
        let mut rng = rng_from_seed(spec.seed ^ 0xC415);
        for _ in 0..draws as usize {
            observed[group(lattice.sample_cell(&mut rng))] += 1.0;
        }
        let chi2: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e).powi(2) / e).sum();
        assert!(chi2 < CHI2_9_999, "{}: χ² = {chi2}", spec.name);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_spawn_starts_collision_free(seed in any::<u64>(), which in 0usize..5) {
        let params = VehicleParams::default();
        let mut spec = preset_specs().remove(which);
        spec.params.traffic_count = 4;
        let scenario = spec.build(&params).unwrap();
        let traffic = sample_traffic_seeded(&scenario, &params, seed);
        let walls = scenario.track.walls.clone();
        let bodies: Vec<_> = traffic.cars.iter().map(|c| c.body(&params)).collect();
        prop_assert!(!check_collision(&scenario.track.start_pose, &params, &ObstacleSet::new(walls.clone(), bodies.clone())));
        for (i, car) in traffic.cars.iter().enumerate() {
            let others: Vec<_> = bodies.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, b)| *b).collect();
            prop_assert!(!check_collision(&car.state, &params, &ObstacleSet::new(walls.clone(), others)));
            prop_assert!(car.speed >= scenario.traffic_speed_range()[0] && car.speed <= scenario.traffic_speed_range()[1]);
        }
    }

    #[test]
    fn construction_is_a_pure_function_of_its_inputs(seed in 0u64..1000) {
        let params = VehicleParams::default();
        for kind in ScenarioKind::ALL {
            let mut spec = preset(match kind {
                ScenarioKind::StraightHighway => "straight_highway",
                ScenarioKind::CurvedRoad => "curved_road",
                ScenarioKind::InnerCity => "inner_city",
                ScenarioKind::SeamlessGenerated => "seamless_a",
            })
            .unwrap();
            spec.seed = seed;
            let (a, b) = (spec.build(&params), spec.build(&params));
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
                _ => prop_assert!(false, "same inputs gave different outcomes"),
            }
        }
    }
}
