use rand::Rng;
use stgia_core::geo::{Location, RoadNetwork};
use stgia_core::rng::{derive, Stream};

fn floyd_warshall(net: &RoadNetwork) -> Vec<Vec<f64>> {
    let n = net.num_nodes();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for e in net.edges() {
        let (a, b) = (net.node(e.a), net.node(e.b));
        let len = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
        d[e.a][e.b] = d[e.a][e.b].min(len);
        d[e.b][e.a] = d[e.b][e.a].min(len);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Random graph that may be disconnected: `n` nodes, `m` random edges.
fn sparse_graph(seed: u64, n: usize, m: usize) -> RoadNetwork {
    let mut rng = derive(seed, Stream::Misc, &[1]);
    let nodes: Vec<Location> = (0..n)
        .map(|_| Location::new(rng.random_range(0.0..2000.0), rng.random_range(0.0..2000.0)))
        .collect();
    let mut edges = Vec::new();
    while edges.len() < m {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.push((a, b));
        }
    }
    RoadNetwork::new(nodes, &edges).unwrap()
}

#[test]
fn dijkstra_matches_floyd_warshall() {
    for seed in 0..20u64 {
        let net = if seed % 2 == 0 {
            let mut rng = derive(seed, Stream::Misc, &[0]);
            RoadNetwork::random_connected(25 + seed as usize, 3000.0, &mut rng).unwrap()
        } else {
            sparse_graph(seed, 20, 18)
        };
        let fw = floyd_warshall(&net);
        for (src, fw_row) in fw.iter().enumerate() {
            let dj = net.dijkstra(src, None).unwrap();
            for (dst, got) in dj.iter().enumerate() {
                let want = fw_row[dst];
                match got {
                    Some(v) => assert!(
                        (v - want).abs() <= 1e-9 * want.max(1.0),
                        "seed {seed} {src}->{dst}: {v} vs {want}"
                    ),
                    None => assert!(
                        want.is_infinite(),
                        "seed {seed} {src}->{dst} reported unreachable"
                    ),
                }
            }
        }
    }
}

/// Closest sampled point when every edge is walked in steps of at most 1 mm.
fn dense_nearest(net: &RoadNetwork, q: &Location) -> f64 {
    let mut best = f64::INFINITY;
    for e in net.edges() {
        let (a, b) = (net.node(e.a), net.node(e.b));
        let len = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
        let steps = (len / 0.001).ceil() as usize;
        for s in 0..=steps {
            let f = s as f64 / steps as f64;
            let p = Location::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y));
            best = best.min(((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt());
        }
    }
    best
}

#[test]
fn nearest_point_matches_dense_sampling() {
    let mut rng = derive(11, Stream::Misc, &[]);
    let net = RoadNetwork::random_connected(12, 400.0, &mut rng).unwrap();
    for _ in 0..100 {
        let q = Location::new(
            rng.random_range(-100.0..500.0),
            rng.random_range(-100.0..500.0),
        );
        let p = net.nearest_on_network(&q).unwrap();
        let got = p.dist(&q);
        let oracle = dense_nearest(&net, &q);
        // the sampled oracle overestimates by at most half a step
        assert!(got <= oracle + 1e-9, "{got} > {oracle}");
        assert!(oracle - got <= 0.002, "{got} vs {oracle}");
        assert!((net.distance_to_network(&q).unwrap() - got).abs() < 1e-9);
    }
}

#[test]
fn lattice_distances_are_manhattan() {
    let net = RoadNetwork::grid(4, 5, 50.0).unwrap();
    for a in 0..net.num_nodes() {
        for b in 0..net.num_nodes() {
            let (ra, ca) = (a / 5, a % 5);
            let (rb, cb) = (b / 5, b % 5);
            let manhattan = 50.0 * (ra.abs_diff(rb) + ca.abs_diff(cb)) as f64;
            let d = net.shortest_path_distance(a, b).unwrap().unwrap();
            assert!((d - manhattan).abs() < 1e-9);
        }
    }
}

#[test]
fn json_round_trip_preserves_network() {
    let mut rng = derive(3, Stream::Misc, &[]);
    let net = RoadNetwork::random_connected(30, 1500.0, &mut rng).unwrap();
    let back = RoadNetwork::from_json_str(&net.to_json_string()).unwrap();
    assert_eq!(back, net);
}
