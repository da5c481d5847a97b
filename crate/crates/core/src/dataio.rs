//! Trajectory ingestion and synthesis.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use chrono::DateTime;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{to_planar, ConstrainedDomain, Location, NodeId, ProjectionSpec, RoadNetwork};
use crate::rng::{derive, Stream};

/// Resampling interval in seconds.
pub const DEFAULT_INTERVAL_S: i64 = 600;

/// Largest bin-index difference between consecutive kept points that does
/// not split a trajectory.
pub const DEFAULT_MAX_BIN_GAP: i64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckIn {
    pub user_id: String,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPoint {
    pub t: i64,
    pub loc: Location,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub user_id: String,
    pub points: Vec<TimedPoint>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn locations(&self) -> impl Iterator<Item = &Location> {
        self.points.iter().map(|p| &p.loc)
    }
}

#[derive(Debug, Deserialize)]
struct CheckInRow {
    user_id: String,
    timestamp: String,
    lat: f64,
    lon: f64,
}

/// Reads a `user_id,timestamp,lat,lon` CSV (RFC 3339 timestamps) sorted by
/// user, then time.
pub fn load_checkins(path: &Path) -> Result<Vec<CheckIn>> {
    let file =
        std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_checkins(file)
}

pub fn parse_checkins<R: std::io::Read>(reader: R) -> Result<Vec<CheckIn>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<CheckInRow>().enumerate() {
        // header is line 1
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            detail: e.to_string(),
        })?;
        let ts = DateTime::parse_from_rfc3339(&row.timestamp).map_err(|e| Error::Parse {
            line,
            detail: format!("timestamp {:?}: {e}", row.timestamp),
        })?;
        if !(-90.0..=90.0).contains(&row.lat) || !(-180.0..=180.0).contains(&row.lon) {
            return Err(Error::Parse {
                line,
                detail: format!("coordinates ({}, {}) out of range", row.lat, row.lon),
            });
        }
        out.push(CheckIn {
            user_id: row.user_id,
            timestamp: ts.timestamp(),
            lat: row.lat,
            lon: row.lon,
        });
    }
    if out.is_empty() {
        return Err(Error::input("check-in file has no rows"));
    }
    out.sort_by(|a, b| {
        a.user_id
            .cmp(&b.user_id)
            .then(a.timestamp.cmp(&b.timestamp))
    });
    Ok(out)
}

/// Splits sorted check-ins into per-user groups.
pub fn group_by_user(checkins: &[CheckIn]) -> BTreeMap<String, Vec<CheckIn>> {
    let mut map: BTreeMap<String, Vec<CheckIn>> = BTreeMap::new();
    for c in checkins {
        map.entry(c.user_id.clone()).or_default().push(c.clone());
    }
    map
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResampleOptions {
    pub interval_s: i64,
    pub max_bin_gap: i64,
    /// Segments shorter than this are discarded (normally `k + 2`).
    pub min_segment_len: usize,
}

impl ResampleOptions {
    pub fn for_window(k: usize) -> Self {
        ResampleOptions {
            interval_s: DEFAULT_INTERVAL_S,
            max_bin_gap: DEFAULT_MAX_BIN_GAP,
            min_segment_len: k + 2,
        }
    }
}

/// Bins one user's check-ins into fixed intervals, keeps the check-in nearest
/// each bin center, projects and snaps it onto the network, and splits the
/// result at gaps. Returns the surviving segments (possibly none).
pub fn resample_trajectory(
    checkins: &[CheckIn],
    proj: &ProjectionSpec,
    net: &RoadNetwork,
    opts: &ResampleOptions,
) -> Result<Vec<Trajectory>> {
    if checkins.len() < 2 {
        return Err(Error::input("resampling needs at least two check-ins"));
    }
    if opts.interval_s <= 0 {
        return Err(Error::input("resampling interval must be positive"));
    }
    let user = &checkins[0].user_id;
    if checkins.iter().any(|c| &c.user_id != user) {
        return Err(Error::input(
            "resample_trajectory expects a single user's check-ins",
        ));
    }
    let mut bins: BTreeMap<i64, &CheckIn> = BTreeMap::new();
    for c in checkins {
        let bin = c.timestamp.div_euclid(opts.interval_s);
        let center2 = 2 * bin * opts.interval_s + opts.interval_s;
        let off = |c: &CheckIn| (2 * c.timestamp - center2).abs();
        bins.entry(bin)
            .and_modify(|kept| {
                if off(c) < off(kept) {
                    *kept = c;
                }
            })
            .or_insert(c);
    }

    let mut segments: Vec<Vec<TimedPoint>> = Vec::new();
    let mut prev_bin: Option<i64> = None;
    for (&bin, c) in &bins {
        let planar = to_planar(c.lat, c.lon, proj)?;
        let point = TimedPoint {
            t: c.timestamp,
            loc: net.nearest_on_network(&planar)?,
        };
        match prev_bin {
            Some(p) if bin - p <= opts.max_bin_gap => {
                segments.last_mut().expect("open segment").push(point)
            }
            _ => segments.push(vec![point]),
        }
        prev_bin = Some(bin);
    }
    let total = segments.len();
    let kept: Vec<Trajectory> = segments
        .into_iter()
        .filter(|s| s.len() >= opts.min_segment_len)
        .map(|points| Trajectory {
            user_id: user.clone(),
            points,
        })
        .collect();
    if kept.is_empty() {
        log::info!(
            "dropping user {user}: none of {total} segments reaches {} points",
            opts.min_segment_len
        );
    }
    Ok(kept)
}

/// Position on the network during a random walk.
#[derive(Debug, Clone, Copy)]
struct WalkState {
    edge: usize,
    /// distance from `edges[edge].a`
    offset: f64,
    /// moving towards `b` when true
    forward: bool,
}

fn state_location(net: &RoadNetwork, s: &WalkState) -> Location {
    let e = net.edges()[s.edge];
    let (a, b) = (net.node(e.a), net.node(e.b));
    let t = if e.length > 0.0 {
        s.offset / e.length
    } else {
        0.0
    };
    Location::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
}

fn leave_node<R: Rng + ?Sized>(net: &RoadNetwork, node: NodeId, rng: &mut R) -> WalkState {
    let nbrs = net.neighbors(node);
    let (_, edge) = nbrs[rng.random_range(0..nbrs.len())];
    let e = net.edges()[edge];
    let forward = e.a == node;
    WalkState {
        edge,
        offset: if forward { 0.0 } else { e.length },
        forward,
    }
}

fn advance<R: Rng + ?Sized>(
    net: &RoadNetwork,
    mut s: WalkState,
    mut dist: f64,
    rng: &mut R,
) -> WalkState {
    loop {
        let e = net.edges()[s.edge];
        let room = if s.forward {
            e.length - s.offset
        } else {
            s.offset
        };
        if dist < room {
            s.offset += if s.forward { dist } else { -dist };
            return s;
        }
        dist -= room;
        let node = if s.forward { e.b } else { e.a };
        s = leave_node(net, node, rng);
        if dist <= 0.0 {
            return s;
        }
    }
}

/// Random walks on the network, one point every 600 s, each step moving a
/// uniform distance in `(0, step_budget]` along the network.
pub fn synthesize_trajectories(
    net: &RoadNetwork,
    n_users: usize,
    length: usize,
    seed: u64,
    step_budget: f64,
) -> Result<Vec<Trajectory>> {
    if net.edges().is_empty() || !net.is_connected() {
        return Err(Error::config(
            "synthesis needs a connected network with edges",
        ));
    }
    if !(step_budget > 0.0) {
        return Err(Error::input("step_budget must be positive"));
    }
    Ok((0..n_users)
        .map(|u| {
            let mut rng = derive(seed, Stream::Synthesis, &[u as u64]);
            let start = rng.random_range(0..net.num_nodes());
            let mut state = leave_node(net, start, &mut rng);
            let mut points = Vec::with_capacity(length);
            for i in 0..length {
                if i > 0 {
                    let d = step_budget * (1.0 - rng.random::<f64>());
                    state = advance(net, state, d, &mut rng);
                }
                points.push(TimedPoint {
                    t: i as i64 * DEFAULT_INTERVAL_S,
                    loc: state_location(net, &state),
                });
            }
            Trajectory {
                user_id: format!("u{u:03}"),
                points,
            }
        })
        .collect())
}

/// All nodes within path distance `radius` of a node the user visited
/// (visited = nearest node of some trajectory point).
pub fn constrained_domain_for(
    traj: &Trajectory,
    net: &RoadNetwork,
    radius: f64,
) -> Result<ConstrainedDomain> {
    if traj.is_empty() {
        return Err(Error::input(
            "constrained domain needs a nonempty trajectory",
        ));
    }
    let mut visited: Vec<NodeId> = traj
        .locations()
        .map(|l| net.nearest_node(l))
        .collect::<Result<_>>()?;
    visited.sort_unstable();
    visited.dedup();
    let dist = net.multi_source_dijkstra(&visited)?;
    let ids = dist
        .iter()
        .enumerate()
        .filter(|(_, d)| d.is_some_and(|d| d <= radius))
        .map(|(i, _)| i);
    ConstrainedDomain::new(ids, net)
}

#[derive(Serialize, Deserialize)]
struct TrajectoryLine {
    user_id: String,
    points: Vec<(i64, f64, f64)>,
}

/// One JSON object per line: `{"user_id": …, "points": [[t, x, y], …]}`.
pub fn write_trajectories_jsonl<W: Write>(mut w: W, trajs: &[Trajectory]) -> Result<()> {
    for t in trajs {
        let line = TrajectoryLine {
            user_id: t.user_id.clone(),
            points: t.points.iter().map(|p| (p.t, p.loc.x, p.loc.y)).collect(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trajectories_jsonl<R: BufRead>(r: R) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TrajectoryLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            detail: e.to_string(),
        })?;
        out.push(Trajectory {
            user_id: parsed.user_id,
            points: parsed
                .points
                .into_iter()
                .map(|(t, x, y)| TimedPoint {
                    t,
                    loc: Location::new(x, y),
                })
                .collect(),
        });
    }
    Ok(out)
}
