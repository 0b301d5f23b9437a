mod common;

use std::f64::consts::PI;

use proptest::prelude::*;

use drivesim::geometry::{OrientedRect, Segment, Vec2};
use drivesim::sensing::{cast_rays, min_reading, rasterize_occupancy_grid, Occupancy, SensorConfig};
use drivesim::sim::{ObstacleSet, VehicleParams, VehicleState};

#[test]
fn rays_agree_with_marching_oracle() {
    let (worst, step) = common::ray_oracle_worst_gap(100);
    assert!(worst <= step + 1e-9, "worst gap {worst} exceeds one marching step {step}");
}

#[test]
fn single_hit_marks_the_matching_cell() {
    let cfg = SensorConfig::default();
    let ego = VehicleState::default();
    let mut distances = vec![cfg.max_range; cfg.ray_count];
    let centre = cfg.ray_count / 2;
    distances[centre] = cfg.max_range / 2.0;
    let reading = drivesim::sensing::SensorReading::from_distances(distances, cfg.max_range);
    let grid = rasterize_occupancy_grid(&reading, &ego, &cfg);
    assert_eq!(grid.count(Occupancy::Occupied), 1);
    // Hit at (forward 25, left 0) in a grid centred on the sensor origin.
    let cell = cfg.grid_extent / cfg.grid_size as f64;
    let col = ((25.0 + cfg.grid_extent / 2.0) / cell).floor() as usize;
    let row = ((0.0 + cfg.grid_extent / 2.0) / cell).floor() as usize;
    assert_eq!(grid.get(col, row), Occupancy::Occupied);
}

fn scene_strategy() -> impl Strategy<Value = u64> {
    0u64..10_000
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn adding_an_obstacle_never_lengthens_a_ray(seed in scene_strategy(), extra in scene_strategy()) {
        let params = VehicleParams::default();
        let cfg = SensorConfig::default();
        let scene = common::random_scene(seed);
        let more = common::random_scene(extra);
        let base = ObstacleSet::new(scene.walls.clone(), scene.rects.clone());
        let body = scene.ego.body(&params);
        let mut walls = scene.walls.clone();
        walls.extend(more.walls.iter().filter(|w| !body.intersects_segment(w)));
        let before = cast_rays(&scene.ego, &params, &base, &cfg);
        let after = cast_rays(&scene.ego, &params, &ObstacleSet::new(walls, scene.rects.clone()), &cfg);
        for (a, b) in after.distances.iter().zip(&before.distances) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn rigid_motion_leaves_readings_unchanged(
        seed in scene_strategy(),
        angle in -PI..PI,
        dx in -100.0..100.0f64,
        dy in -100.0..100.0f64,
    ) {
        let params = VehicleParams::default();
        let cfg = SensorConfig::default();
        let scene = common::random_scene(seed);
        let t = Vec2::new(dx, dy);
        let move_pt = |p: Vec2| p.rotated(angle) + t;
        let ego = VehicleState::at(move_pt(scene.ego.position()), scene.ego.heading + angle);
        let walls: Vec<Segment> = scene.walls.iter().map(|s| Segment::new(move_pt(s.a), move_pt(s.b))).collect();
        let rects: Vec<OrientedRect> = scene
            .rects
            .iter()
            .map(|r| OrientedRect { center: move_pt(r.center), heading: r.heading + angle, ..*r })
            .collect();
        let a = cast_rays(&scene.ego, &params, &ObstacleSet::new(scene.walls.clone(), scene.rects.clone()), &cfg);
        let b = cast_rays(&ego, &params, &ObstacleSet::new(walls, rects), &cfg);
        for (x, y) in a.distances.iter().zip(&b.distances) {
            prop_assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn normalized_readings_bounded_and_min_is_lowest(seed in scene_strategy()) {
        let params = VehicleParams::default();
        let cfg = SensorConfig::default();
        let scene = common::random_scene(seed);
        let r = cast_rays(&scene.ego, &params, &ObstacleSet::new(scene.walls, scene.rects), &cfg);
        prop_assert_eq!(r.distances.len(), cfg.ray_count);
        let m = min_reading(&r);
        for (d, n) in r.distances.iter().zip(&r.normalized) {
            prop_assert!((0.0..=1.0).contains(n));
            prop_assert!((0.0..=cfg.max_range).contains(d));
            prop_assert_eq!(*n, d / cfg.max_range);
            prop_assert!(m <= *n);
        }
    }

    #[test]
    fn occupied_cells_lie_on_a_ray_at_its_hit(seed in scene_strategy()) {
        let params = VehicleParams::default();
        let cfg = SensorConfig::default();
        let scene = common::random_scene(seed);
        let r = cast_rays(&scene.ego, &params, &ObstacleSet::new(scene.walls, scene.rects), &cfg);
        let grid = rasterize_occupancy_grid(&r, &scene.ego, &cfg);
        let cell = cfg.grid_extent / cfg.grid_size as f64;
        let half = cfg.grid_extent / 2.0;
        for iy in 0..cfg.grid_size {
            for ix in 0..cfg.grid_size {
                let (cx, cy) = ((ix as f64 + 0.5) * cell - half, (iy as f64 + 0.5) * cell - half);
                let inside_wedge = cy.atan2(cx).abs() <= cfg.fov / 2.0 + (cell / (cx * cx + cy * cy).sqrt()).min(PI);
                if !inside_wedge {
                    prop_assert_eq!(grid.get(ix, iy), Occupancy::Unknown);
                }
                if grid.get(ix, iy) == Occupancy::Occupied {
                    let on_ray = r.distances.iter().enumerate().any(|(i, &d)| {
                        let a = cfg.relative_bearing(i);
                        let (hx, hy) = (d * a.cos(), d * a.sin());
                        d < cfg.max_range
                            && ((hx + half) / cell).floor() as usize == ix
                            && ((hy + half) / cell).floor() as usize == iy
                    });
                    prop_assert!(on_ray, "occupied cell ({ix},{iy}) matches no hit");
                }
            }
        }
    }
}
