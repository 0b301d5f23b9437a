mod common;

use std::f64::consts::PI;

use num_rational::Ratio;
use proptest::prelude::*;

use drivesim::geometry::{Segment, Vec2};
use drivesim::pipeline::environment;
use drivesim::formats::RunConfig;
use drivesim::scenarios::preset;
use drivesim::sim::{
    apply_control, check_collision, step_kinematics, AccelCmd, ControlInput, ObstacleSet, SteerCmd, Terminal,
    TickConfig, VehicleParams, VehicleState,
};

#[test]
fn constant_steer_matches_circular_arc() {
    let err = common::arc_max_error(1e-4);
    assert!(err < 1e-3, "max error {err}");
}

#[test]
fn euler_error_is_first_order() {
    let ratio = common::arc_max_error(1e-4) / common::arc_max_error(5e-5);
    assert!((1.8..=2.2).contains(&ratio), "ratio {ratio}");
}

type Q = Ratio<i128>;

fn q(n: i128) -> Q {
    Q::new(n, 1024)
}

/// Exact closed-set intersection of an axis-aligned box and a segment by
/// parametric clipping in rational arithmetic.
fn box_meets_segment(lo: (Q, Q), hi: (Q, Q), a: (Q, Q), b: (Q, Q)) -> bool {
    let (mut t0, mut t1) = (Q::from_integer(0), Q::from_integer(1));
    for (p, d, l, h) in [(a.0, b.0 - a.0, lo.0, hi.0), (a.1, b.1 - a.1, lo.1, hi.1)] {
        if d == Q::from_integer(0) {
            if p < l || p > h {
                return false;
            }
            continue;
        }
        let (mut e0, mut e1) = ((l - p) / d, (h - p) / d);
        if e0 > e1 {
            std::mem::swap(&mut e0, &mut e1);
        }
        t0 = t0.max(e0);
        t1 = t1.min(e1);
    }
    t0 <= t1
}

fn to_f64(v: Q) -> f64 {
    *v.numer() as f64 / *v.denom() as f64
}

#[test]
fn corner_touching_wall_endpoint_collides() {
    // Heading 0 with dyadic body dimensions puts every corner on a dyadic grid, so the float and
    // rational descriptions of the body coincide exactly.
    let params = VehicleParams {
        body_width: 2.0,
        ..VehicleParams::default()
    };
    let ego = VehicleState::default();
    let half_l = q((params.body_length * 512.0) as i128);
    let half_w = q((params.body_width * 512.0) as i128);
    let cx = q((params.center_offset() * 1024.0) as i128);
    let (lo, hi) = ((cx - half_l, -half_w), (cx + half_l, half_w));
    let corner = hi;
    let cases = [
        (corner, (corner.0 + q(2048), corner.1 + q(3000)), true),
        ((corner.0 + q(1), corner.1), (corner.0 + q(900), corner.1 + q(40)), false),
        ((corner.0, corner.1 + q(1)), (corner.0 - q(500), corner.1 + q(700)), false),
        ((corner.0 - q(1), corner.1 + q(1)), (corner.0 + q(1), corner.1 - q(1)), true),
        ((corner.0 + q(1), corner.1 + q(1)), (corner.0 - q(5), corner.1 - q(2)), true),
        ((corner.0 + q(1), corner.1 - q(1)), (corner.0 + q(3), corner.1 + q(2)), false),
    ];
    for (a, b, expect) in cases {
        let exact = box_meets_segment(lo, hi, a, b);
        assert_eq!(exact, expect, "oracle disagrees with the hand label for {a:?}-{b:?}");
        let wall = Segment::new(Vec2::new(to_f64(a.0), to_f64(a.1)), Vec2::new(to_f64(b.0), to_f64(b.1)));
        assert_eq!(
            check_collision(&ego, &params, &ObstacleSet::new(vec![wall], vec![])),
            exact,
            "segment {a:?}-{b:?}"
        );
    }
}

#[test]
fn collision_flag_raised_on_the_intersecting_tick() {
    let cfg = RunConfig::default();
    let env = environment(&cfg, &preset("straight_highway").unwrap()).unwrap();
    let mut world = env.world(TickConfig::new(cfg.tick.dt, 9));
    let cmd = ControlInput::new(SteerCmd::Left, AccelCmd::Accelerate);
    loop {
        let out = world.step(cmd).unwrap();
        let hit = check_collision(world.ego(), world.params(), &world.obstacles());
        assert_eq!(out.terminal == Some(Terminal::Collision), hit, "tick {}", out.tick);
        if out.terminal.is_some() {
            assert_eq!(out.terminal, Some(Terminal::Collision));
            break;
        }
        assert!(out.tick < 2000, "never reached a wall");
    }
}

fn control() -> impl Strategy<Value = ControlInput> {
    (0..3usize, 0..3usize).prop_map(|(s, a)| {
        ControlInput::new(
            [SteerCmd::Left, SteerCmd::None, SteerCmd::Right][s],
            [AccelCmd::Accelerate, AccelCmd::Coast, AccelCmd::Brake][a],
        )
    })
}

fn state_at_rest() -> impl Strategy<Value = VehicleState> {
    (-1e3..1e3f64, -1e3..1e3f64, -PI..PI, -0.6..=0.6f64).prop_map(|(x, y, h, d)| VehicleState {
        x,
        y,
        heading: if h == -PI { PI } else { h },
        speed: 0.0,
        steering: d,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn zero_speed_never_moves(s in state_at_rest(), cmd in control()) {
        let params = VehicleParams::default();
        // With v = 0 the pose update sees no speed regardless of the command.
        let next = step_kinematics(&s, &params, 0.05);
        prop_assert_eq!((next.x, next.y), (s.x, s.y));
        let actuated = apply_control(&s, cmd, &params, 0.05);
        let moved = step_kinematics(&VehicleState { speed: 0.0, ..actuated }, &params, 0.05);
        prop_assert_eq!((moved.x, moved.y), (s.x, s.y));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn heading_speed_and_steer_stay_in_range(
        start in state_at_rest(),
        cmds in prop::collection::vec(control(), 1..400),
    ) {
        let params = VehicleParams::default();
        let mut s = start;
        for c in cmds {
            s = step_kinematics(&apply_control(&s, c, &params, 0.05), &params, 0.05);
            prop_assert!(s.heading > -PI && s.heading <= PI, "heading {}", s.heading);
            prop_assert!((0.0..=params.max_speed).contains(&s.speed));
            prop_assert!(s.steering.abs() <= params.max_steer);
        }
    }

    #[test]
    fn seed_and_controls_determine_the_state_stream(
        seed in any::<u64>(),
        cmds in prop::collection::vec(control(), 1..200),
    ) {
        let cfg = RunConfig::default();
        let env = environment(&cfg, &preset("curved_road").unwrap()).unwrap();
        let mut a = env.world(TickConfig::new(cfg.tick.dt, seed));
        let mut b = env.world(TickConfig::new(cfg.tick.dt, seed));
        for c in cmds {
            if a.terminal().is_some() {
                break;
            }
            let (oa, ob) = (a.step(c).unwrap(), b.step(c).unwrap());
            prop_assert_eq!(oa, ob);
            prop_assert_eq!(a.traffic(), b.traffic());
        }
    }
}
