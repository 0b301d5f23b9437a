//! Independent reference implementations shared by the oracle tests and
//! the acceptance run. None of these call into the code they check.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use drivesim::evo::{FitnessReport, Individual, Population};
use drivesim::geometry::{OrientedRect, Segment, Vec2};
use drivesim::neuro::{backward, forward, param_count, unflatten, NetworkTopology, SolutionVector};
use drivesim::rng::rng_from_seed;
use drivesim::sensing::{cast_rays, SensorConfig};
use drivesim::sim::{step_kinematics, ObstacleSet, VehicleParams, VehicleState};

pub fn unit_wheelbase() -> VehicleParams {
    VehicleParams {
        wheelbase: 1.0,
        ..VehicleParams::default()
    }
}

/// Largest distance between the Euler trajectory and the exact circular
/// arc for v = 1, δ = 0.3, wheelbase = 1 over one second.
pub fn arc_max_error(dt: f64) -> f64 {
    let params = unit_wheelbase();
    let (v, delta, t_end) = (1.0, 0.3_f64, 1.0);
    let radius = params.wheelbase / delta.tan();
    let omega = v / radius;
    let mut s = VehicleState {
        speed: v,
        steering: delta,
        ..VehicleState::default()
    };
    let steps = (t_end / dt).round() as usize;
    let mut worst = 0.0_f64;
    for k in 1..=steps {
        s = step_kinematics(&s, &params, dt);
        let t = k as f64 * dt;
        let (ex, ey) = (radius * (omega * t).sin(), radius * (1.0 - (omega * t).cos()));
        worst = worst.max(((s.x - ex).powi(2) + (s.y - ey).powi(2)).sqrt());
    }
    worst
}

fn side(seg: &Segment, p: Vec2) -> f64 {
    (seg.b.x - seg.a.x) * (p.y - seg.a.y) - (seg.b.y - seg.a.y) * (p.x - seg.a.x)
}

fn along(seg: &Segment, p: Vec2) -> f64 {
    let (ex, ey) = (seg.b.x - seg.a.x, seg.b.y - seg.a.y);
    ((p.x - seg.a.x) * ex + (p.y - seg.a.y) * ey) / (ex * ex + ey * ey)
}

fn inside(r: &OrientedRect, p: Vec2) -> bool {
    let (c, s) = (r.heading.cos(), r.heading.sin());
    let (dx, dy) = (p.x - r.center.x, p.y - r.center.y);
    (dx * c + dy * s).abs() <= r.half_length && (-dx * s + dy * c).abs() <= r.half_width
}

/// Brute-force ray march: the first sample that has crossed a wall line
/// within the wall's extent, or lies inside a rectangle. Returns `max_range`
/// when nothing is reached.
pub fn march_ray(origin: Vec2, angle: f64, walls: &[Segment], rects: &[OrientedRect], max_range: f64, step: f64) -> f64 {
    let (dx, dy) = (angle.cos(), angle.sin());
    let at = |t: f64| Vec2::new(origin.x + dx * t, origin.y + dy * t);
    let mut prev: Vec<f64> = walls.iter().map(|w| side(w, origin)).collect();
    let n = (max_range / step).ceil() as usize;
    for k in 1..=n {
        let t = (k as f64 * step).min(max_range);
        let p = at(t);
        for (i, w) in walls.iter().enumerate() {
            let now = side(w, p);
            if prev[i] * now <= 0.0 && (0.0..=1.0).contains(&along(w, p)) {
                return t;
            }
            prev[i] = now;
        }
        if rects.iter().any(|r| inside(r, p)) {
            return t;
        }
    }
    max_range
}

/// Exact probability that each member wins a `t`-tournament drawn without
/// replacement, by enumerating every `t`-subset. Ties go to the lower index.
pub fn tournament_probabilities(fitness: &[f64], t: usize) -> Vec<f64> {
    let k = fitness.len();
    let mut wins = vec![0u64; k];
    let mut total = 0u64;
    let mut subset: Vec<usize> = (0..t).collect();
    loop {
        let winner = subset
            .iter()
            .copied()
            .fold(subset[0], |b, i| if fitness[i] > fitness[b] { i } else { b });
        wins[winner] += 1;
        total += 1;
        // Next combination in lexicographic order.
        let mut i = t;
        while i > 0 && subset[i - 1] == k - t + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        subset[i - 1] += 1;
        for j in i..t {
            subset[j] = subset[j - 1] + 1;
        }
    }
    wins.iter().map(|&w| w as f64 / total as f64).collect()
}

pub fn population_with_fitness(fitness: &[f64]) -> Population {
    Population {
        individuals: fitness
            .iter()
            .map(|&f| Individual {
                genome: SolutionVector(vec![0.0]),
                fitness: Some(FitnessReport {
                    distance: f,
                    mean_speed: 0.0,
                    scalar: f,
                }),
            })
            .collect(),
        generation: 0,
    }
}

/// Straightforward dense forward pass over a flat parameter vector laid out
/// as weights (row-major, outputs × inputs) then biases, per layer.
pub fn naive_forward(layers: &[usize], theta: &[f64], input: &[f64]) -> Vec<f64> {
    let mut x = input.to_vec();
    let mut k = 0;
    for l in 0..layers.len() - 1 {
        let (n_in, n_out) = (layers[l], layers[l + 1]);
        let w = &theta[k..k + n_in * n_out];
        let b = &theta[k + n_in * n_out..k + n_in * n_out + n_out];
        k += n_in * n_out + n_out;
        let mut y = vec![0.0; n_out];
        for o in 0..n_out {
            let mut z = b[o];
            for i in 0..n_in {
                z += w[o * n_in + i] * x[i];
            }
            y[o] = if l + 2 == layers.len() { z } else { z.tanh() };
        }
        x = y;
    }
    x
}

pub fn default_topology() -> NetworkTopology {
    NetworkTopology::new(vec![11, 16, 16, 8]).unwrap()
}

pub struct Scene {
    pub ego: VehicleState,
    pub walls: Vec<Segment>,
    pub rects: Vec<OrientedRect>,
}

pub fn random_scene(seed: u64) -> Scene {
    let mut rng = rng_from_seed(seed);
    let ego = VehicleState::at(
        Vec2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)),
        rng.random_range(-PI..PI),
    );
    let params = VehicleParams::default();
    let body = ego.body(&params);
    let mut walls = Vec::new();
    for _ in 0..rng.random_range(3..9) {
        let a = Vec2::new(rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0));
        let b = a + Vec2::from_angle(rng.random_range(-PI..PI)) * rng.random_range(2.0..40.0);
        let seg = Segment::new(a, b);
        if !body.intersects_segment(&seg) {
            walls.push(seg);
        }
    }
    let mut rects = Vec::new();
    for _ in 0..rng.random_range(0..5) {
        let r = OrientedRect {
            center: Vec2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)),
            heading: rng.random_range(-PI..PI),
            half_length: rng.random_range(1.0..3.0),
            half_width: rng.random_range(0.5..1.5),
        };
        if !r.intersects_rect(&body) {
            rects.push(r);
        }
    }
    Scene { ego, walls, rects }
}

/// Largest gap between `cast_rays` and the marching oracle over the scenes
/// seeded `0..scenes`, and the marching step used.
pub fn ray_oracle_worst_gap(scenes: u64) -> (f64, f64) {
    let params = VehicleParams::default();
    let cfg = SensorConfig::default();
    let step = cfg.max_range / 1e5;
    let mut worst = 0.0_f64;
    for seed in 0..scenes {
        let scene = random_scene(seed);
        let reading = cast_rays(
            &scene.ego,
            &params,
            &ObstacleSet::new(scene.walls.clone(), scene.rects.clone()),
            &cfg,
        );
        let front = params.wheelbase / 2.0 + params.body_length / 2.0;
        let origin = Vec2::new(
            scene.ego.x + front * scene.ego.heading.cos(),
            scene.ego.y + front * scene.ego.heading.sin(),
        );
        for (i, &d) in reading.distances.iter().enumerate() {
            let angle = scene.ego.heading - cfg.fov / 2.0 + i as f64 * cfg.fov / (cfg.ray_count - 1) as f64;
            let oracle = march_ray(origin, angle, &scene.walls, &scene.rects, cfg.max_range, step);
            worst = worst.max((d - oracle).abs());
        }
    }
    (worst, step)
}

pub fn random_theta(n: usize, seed: u64) -> SolutionVector {
    let mut rng = rng_from_seed(seed);
    let d = Normal::new(0.0, 0.5).unwrap();
    SolutionVector((0..n).map(|_| d.sample(&mut rng)).collect())
}

pub fn random_input(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Worst relative error between `backward` and central differences of the
/// scalar `⟨g, forward(x)⟩`.
pub fn gradient_check(layers: Vec<usize>, seed: u64) -> f64 {
    let topo = NetworkTopology::new(layers).unwrap();
    let theta = random_theta(param_count(&topo), seed);
    let x = random_input(topo.inputs(), seed + 1);
    let g = random_input(topo.outputs(), seed + 2);
    let net = unflatten(&topo, &theta).unwrap();
    let analytic = backward(&net, &x, &g).unwrap();
    let objective = |t: &SolutionVector| -> f64 {
        let y = forward(&unflatten(&topo, t).unwrap(), &x).unwrap();
        y.iter().zip(&g).map(|(a, b)| a * b).sum()
    };
    let h = 1e-5;
    let mut worst = 0.0_f64;
    for k in 0..theta.len() {
        let mut plus = theta.clone();
        let mut minus = theta.clone();
        plus.0[k] += h;
        minus.0[k] -= h;
        let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
        let denom = analytic[k].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[k] - numeric).abs() / denom);
    }
    worst
}

