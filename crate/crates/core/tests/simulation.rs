use hpar_core::geometry::{Position, Zone};
use hpar_core::gpsr::{reachable, unit_disk_neighbors};
use hpar_core::identity::{make_pseudonym, GroupId, NeighborTable, NodeId};
use hpar_core::simcore::{
    frame_lost, initial_layout, mobility_step, receivers, run, run_with, write_trace_jsonl, Coverage, Mobility, Motion,
    NodeState, Protocol, RunOptions, ScenarioConfig, TrafficFlow,
};
use hpar_core::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn square(side: f64) -> Zone {
    Zone::with_size(side, side).unwrap()
}

fn flow(src: usize, dst: usize, count: u32) -> TrafficFlow {
    TrafficFlow {
        src,
        dst,
        start: 5.0,
        period: 4.0,
        size: 512,
        count,
    }
}

fn connected_seed(n: usize, side: f64, range: f64) -> u64 {
    (1..)
        .find(|&seed| {
            let pos = initial_layout(&ScenarioConfig::new(square(side), n, range, seed)).unwrap();
            reachable(&unit_disk_neighbors(&pos, range), 0).iter().all(|&r| r)
        })
        .unwrap()
}

#[test]
fn zero_traffic_has_no_rate_and_only_beacons() {
    let cfg = ScenarioConfig::new(square(500.0), 20, 150.0, 3);
    let out = run(&cfg).unwrap();
    assert_eq!(out.metrics.delivery_rate, None);
    assert_eq!(out.metrics.mean_latency, None);
    assert_eq!(out.metrics.transmissions_total, 0);
    assert!(out.metrics.hello_transmissions > 0);
    assert_eq!(out.observations.len() as u64, out.metrics.hello_transmissions);
}

#[test]
fn connected_static_baseline_delivers_everything() {
    let seed = connected_seed(50, 600.0, 180.0);
    let mut cfg = ScenarioConfig::new(square(600.0), 50, 180.0, seed);
    cfg.protocol = Protocol::GpsrBaseline;
    cfg.traffic = vec![flow(0, 1, 5), flow(2, 3, 5), flow(4, 5, 5)];
    cfg.duration = 40.0;
    let out = run(&cfg).unwrap();
    assert_eq!(out.metrics.delivery_rate, Some(1.0));
}

#[test]
fn hold_release_delivers_every_packet_including_the_last() {
    let seed = connected_seed(80, 800.0, 220.0);
    let mut cfg = ScenarioConfig::new(square(800.0), 80, 220.0, seed);
    cfg.hold_release = true;
    // zones of about ten nodes, so holders are always available
    cfg.k = 10;
    cfg.traffic = vec![flow(0, 1, 6)];
    cfg.duration = 60.0;
    let out = run(&cfg).unwrap();
    assert_eq!(out.metrics.packets_delivered, 6);
    // each packet is held until the next arrives, so it waits about one period
    let latency = out.metrics.mean_latency.unwrap();
    assert!(latency > 3.0 && latency < 6.0, "latency {latency}");
}

#[test]
fn global_observer_logs_every_transmission_once() {
    let mut cfg = ScenarioConfig::new(square(800.0), 80, 220.0, 9);
    cfg.hold_release = true;
    cfg.traffic = vec![flow(0, 1, 4), flow(3, 2, 4)];
    cfg.duration = 40.0;
    let out = run(&cfg).unwrap();
    let m = &out.metrics;
    assert_eq!(
        out.observations.len() as u64,
        m.transmissions_total + m.hello_transmissions
    );
}

#[test]
fn region_observer_sees_only_its_region() {
    let region = Zone::new(Position::new(0.0, 0.0), Position::new(400.0, 400.0)).unwrap();
    let mut cfg = ScenarioConfig::new(square(800.0), 80, 220.0, 9);
    cfg.traffic = vec![flow(0, 1, 4)];
    cfg.duration = 30.0;
    let global = run(&cfg).unwrap();
    cfg.observer = Coverage::Region(region);
    let local = run(&cfg).unwrap();
    assert!(local.observations.len() < global.observations.len());
    assert!(local
        .observations
        .observations()
        .iter()
        .all(|o| region.contains(&o.position)));
    let expected = global
        .observations
        .observations()
        .iter()
        .filter(|o| region.contains(&o.position))
        .count();
    assert_eq!(local.observations.len(), expected);
}

#[test]
fn identical_configs_give_identical_traces() {
    let mut cfg = ScenarioConfig::new(square(800.0), 60, 200.0, 21);
    cfg.jitter_max = 0.5;
    cfg.loss = 0.05;
    cfg.mobility = Mobility::RandomWaypoint {
        speed_min: 1.0,
        speed_max: 5.0,
        pause: 1.0,
    };
    cfg.traffic = vec![flow(0, 1, 5)];
    cfg.duration = 40.0;
    let render = |cfg: &ScenarioConfig| {
        let out = run(cfg).unwrap();
        let mut trace = Vec::new();
        write_trace_jsonl(&out.trace, &mut trace).unwrap();
        let mut obs = Vec::new();
        out.observations.write_jsonl(&mut obs).unwrap();
        (trace, obs, format!("{:?}", out.metrics))
    };
    let a = render(&cfg);
    assert!(!a.0.is_empty());
    assert_eq!(a, render(&cfg));
    cfg.seed += 1;
    assert_ne!(a, render(&cfg));
}

#[test]
fn invalid_config_is_rejected_before_running() {
    let mut cfg = ScenarioConfig::new(square(100.0), 10, 50.0, 1);
    cfg.radio_range = 0.0;
    assert!(matches!(run(&cfg), Err(Error::Parameter { name: "range", .. })));
    let mut cfg = ScenarioConfig::new(square(100.0), 10, 50.0, 1);
    cfg.traffic = vec![flow(0, 10, 1)];
    assert!(run(&cfg).is_err());
}

#[test]
fn radio_range_is_an_open_disk() {
    let pos = [
        Position::new(0.0, 0.0),
        Position::new(100.0, 0.0),
        Position::new(100.0 + 1e-9, 0.0),
        Position::new(0.0, 99.9),
    ];
    assert_eq!(receivers(&pos[..2], 0, 100.0 + 1e-6), vec![1]);
    assert_eq!(receivers(&pos, 0, 100.0), vec![3]);
}

#[test]
fn loss_rate_matches_probability() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    assert!((0..1000).all(|_| !frame_lost(0.0, &mut rng)));
    let lost = (0..10_000).filter(|_| frame_lost(0.1, &mut rng)).count();
    assert!((lost as f64 / 1e4 - 0.1).abs() <= 0.01, "lost {lost}");
}

fn walker(position: Position, motion: Motion) -> NodeState {
    let id = NodeId::new(0x0a0b_0c0d_0e0f);
    NodeState {
        index: 0,
        id,
        position,
        pseudonym: make_pseudonym(id, 0.0),
        prev_pseudonym: None,
        neighbors: NeighborTable::new(),
        group: GroupId(0),
        motion,
    }
}

#[test]
fn static_model_never_moves() {
    let area = square(100.0);
    let mut n = walker(Position::new(10.0, 20.0), Motion::Still);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for t in 1..50 {
        mobility_step(&mut n, &area, &Mobility::Static, 1.0, t as f64, &mut rng);
    }
    assert_eq!(n.position, Position::new(10.0, 20.0));
}

#[test]
fn waypoint_step_moves_speed_times_dt_along_segment() {
    let area = square(1000.0);
    let model = Mobility::RandomWaypoint {
        speed_min: 10.0,
        speed_max: 10.0,
        pause: 0.0,
    };
    let target = Position::new(160.0, 180.0);
    let mut n = walker(Position::new(100.0, 100.0), Motion::Moving { target, speed: 10.0 });
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    mobility_step(&mut n, &area, &model, 1.0, 1.0, &mut rng);
    assert!((n.position.x - 106.0).abs() < 1e-9 && (n.position.y - 108.0).abs() < 1e-9);
}

#[test]
fn random_waypoint_is_center_biased() {
    let side = 1000.0;
    let area = square(side);
    let center = area.center();
    let model = Mobility::RandomWaypoint {
        speed_min: 5.0,
        speed_max: 15.0,
        pause: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut n = walker(
        Position::new(10.0, 10.0),
        Motion::Moving {
            target: center,
            speed: 10.0,
        },
    );
    let mut total = 0.0;
    let samples = 100_000;
    for t in 0..samples + 1000 {
        mobility_step(&mut n, &area, &model, 1.0, t as f64, &mut rng);
        if t >= 1000 {
            total += n.position.distance(&center);
        }
    }
    // mean distance from the center of a uniformly drawn point in a unit square
    let uniform = (2f64.sqrt() + (1.0 + 2f64.sqrt()).ln()) / 6.0 * side;
    let mean = total / samples as f64;
    assert!(mean < uniform, "mean {mean} vs uniform {uniform}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn run_invariants_hold(
        seed in 0u64..10_000,
        n in 10usize..60,
        range in 120.0f64..300.0,
        hpar in any::<bool>(),
        hold in any::<bool>(),
        jitter in prop_oneof![Just(0.0), 0.0f64..1.0],
        loss in prop_oneof![Just(0.0), 0.0f64..0.2],
        moving in any::<bool>(),
    ) {
        let mut cfg = ScenarioConfig::new(square(700.0), n, range, seed);
        cfg.protocol = if hpar { Protocol::Hpar } else { Protocol::GpsrBaseline };
        cfg.hold_release = hold;
        cfg.jitter_max = jitter;
        cfg.loss = loss;
        if moving {
            cfg.mobility = Mobility::RandomWaypoint { speed_min: 1.0, speed_max: 10.0, pause: 1.0 };
        }
        cfg.traffic = vec![flow(0, n - 1, 4), flow(1, n / 2, 3)];
        cfg.duration = 40.0;
        let out = run_with(&cfg, RunOptions { trace: false, audit: true }).unwrap();
        let m = &out.metrics;
        prop_assert_eq!(m.packets_sent, 7);
        prop_assert!(m.delivery_rate.is_none_or(|r| (0.0..=1.0).contains(&r)));
        // a consumed packet can still fail at the source when every confirmation is lost
        prop_assert!(m.packets_delivered <= m.packets_sent && m.packets_failed <= m.packets_sent);
        prop_assert!(m.participating_nodes <= n);
        prop_assert_eq!(m.instances_initiated, m.instances_consumed + m.instances_dropped + m.instances_alive);
        prop_assert_eq!(out.observations.len() as u64, m.transmissions_total + m.hello_transmissions);
        let audit = out.audit.unwrap();
        prop_assert_eq!(audit.mac_leaks, 0);
        prop_assert_eq!(audit.position_leaks, 0);
        let times: Vec<f64> = out.observations.observations().iter().map(|o| o.time).collect();
        prop_assert!(times.windows(2).all(|w| w[0] <= w[1]));
    }
}
