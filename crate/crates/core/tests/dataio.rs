use std::io::Write;

use stgia_core::dataio::{
    constrained_domain_for, load_checkins, read_trajectories_jsonl, resample_trajectory,
    synthesize_trajectories, write_trajectories_jsonl, CheckIn, ResampleOptions, Trajectory,
};
use stgia_core::geo::{to_planar, Location, ProjectionSpec, RoadNetwork};
use stgia_core::rng::{derive, Stream};
use stgia_core::Error;

/// Network distance between two on-network points.
fn path_distance(net: &RoadNetwork, p: &Location, q: &Location) -> f64 {
    let ep = net.edges()[net.nearest_point(p).unwrap().edge.unwrap()];
    let eq = net.edges()[net.nearest_point(q).unwrap().edge.unwrap()];
    let mut best = f64::INFINITY;
    if (ep.a, ep.b) == (eq.a, eq.b) {
        best = p.dist(q);
    }
    for a in [ep.a, ep.b] {
        let from_a = net.dijkstra(a, None).unwrap();
        for b in [eq.a, eq.b] {
            let via = p.dist(&net.node(a)) + from_a[b].unwrap() + net.node(b).dist(q);
            best = best.min(via);
        }
    }
    best
}

#[test]
fn synthetic_walks_stay_on_network_within_budget() {
    let mut rng = derive(4, Stream::Misc, &[]);
    let net = RoadNetwork::random_connected(30, 2000.0, &mut rng).unwrap();
    let budget = 250.0;
    let trajs = synthesize_trajectories(&net, 8, 40, 17, budget).unwrap();
    assert_eq!(trajs.len(), 8);
    for t in &trajs {
        assert_eq!(t.len(), 40);
        for w in t.points.windows(2) {
            assert_eq!(w[1].t - w[0].t, 600);
            assert!(net.distance_to_network(&w[1].loc).unwrap() < 1e-6);
            let d = path_distance(&net, &w[0].loc, &w[1].loc);
            assert!(d <= budget + 1e-6, "{} step of {d} m", t.user_id);
        }
    }
    assert_eq!(
        trajs,
        synthesize_trajectories(&net, 8, 40, 17, budget).unwrap()
    );
    assert_ne!(
        trajs,
        synthesize_trajectories(&net, 8, 40, 18, budget).unwrap()
    );
}

#[test]
fn csv_ingestion_end_to_end() {
    let proj = ProjectionSpec::new(40.7, -74.0).unwrap();
    // a 3 km east-west road through the origin
    let net = RoadNetwork::new(
        vec![Location::new(-1500.0, 0.0), Location::new(1500.0, 0.0)],
        &[(0, 1)],
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("checkins.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "user_id,timestamp,lat,lon").unwrap();
    // user a: eight check-ins 10 minutes apart, slightly north of the road
    for i in 0..8 {
        let minute = i * 10 + 2;
        writeln!(
            f,
            "a,2012-04-03T{}:{:02}:00Z,40.7002,{:.5}",
            18 + minute / 60,
            minute % 60,
            -74.0 + 0.001 * i as f64
        )
        .unwrap();
    }
    // user b: too short to survive
    writeln!(f, "b,2012-04-03T18:00:00Z,40.7,-74.0").unwrap();
    writeln!(f, "b,2012-04-03T18:10:00Z,40.7,-74.0").unwrap();
    drop(f);

    let rows = load_checkins(&path).unwrap();
    assert_eq!(rows.len(), 10);
    let a: Vec<CheckIn> = rows.iter().filter(|c| c.user_id == "a").cloned().collect();
    let segs = resample_trajectory(&a, &proj, &net, &ResampleOptions::for_window(4)).unwrap();
    assert_eq!(segs.len(), 1);
    assert_eq!(segs[0].len(), 8);
    for p in &segs[0].points {
        assert!(p.loc.y.abs() < 1e-9, "not snapped: {:?}", p.loc);
    }
    let first = to_planar(40.7002, -74.0, &proj).unwrap();
    assert!((segs[0].points[0].loc.x - first.x).abs() < 1e-6);

    let b: Vec<CheckIn> = rows.iter().filter(|c| c.user_id == "b").cloned().collect();
    assert!(
        resample_trajectory(&b, &proj, &net, &ResampleOptions::for_window(4))
            .unwrap()
            .is_empty()
    );
}

#[test]
fn malformed_csv_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(
        &path,
        "user_id,timestamp,lat,lon\nu,2012-04-03T18:00:00Z,40.7,-74.0\nu,yesterday,40.7,-74.0\n",
    )
    .unwrap();
    match load_checkins(&path) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
    assert!(matches!(
        load_checkins(&dir.path().join("missing.csv")),
        Err(Error::Io(_))
    ));
}

#[test]
fn jsonl_round_trip() {
    let net = RoadNetwork::grid(3, 3, 100.0).unwrap();
    let trajs = synthesize_trajectories(&net, 3, 7, 1, 80.0).unwrap();
    let mut buf = Vec::new();
    write_trajectories_jsonl(&mut buf, &trajs).unwrap();
    let back: Vec<Trajectory> = read_trajectories_jsonl(buf.as_slice()).unwrap();
    assert_eq!(back, trajs);
}

#[test]
fn constrained_domain_grows_with_radius() {
    let net = RoadNetwork::grid(6, 6, 100.0).unwrap();
    let traj = &synthesize_trajectories(&net, 1, 6, 2, 90.0).unwrap()[0];
    let mut prev: Vec<usize> = Vec::new();
    for radius in [0.0, 100.0, 250.0, 600.0, 10_000.0] {
        let d = constrained_domain_for(traj, &net, radius).unwrap();
        assert!(prev.iter().all(|id| d.contains(*id)));
        for l in traj.locations() {
            assert!(d.contains(net.nearest_node(l).unwrap()));
        }
        prev = d.node_ids().to_vec();
    }
    assert_eq!(prev.len(), 36);
}
