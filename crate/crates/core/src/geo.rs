//! Planar geometry and road networks.
//!
//! Locations live in a local east/north frame measured in meters. A
//! [`RoadNetwork`] is an undirected graph whose edges are straight segments;
//! it serves as the feasibility prior for mapping attack iterates, as the
//! metric space for the graph exponential mechanisms, and as the substrate
//! for synthetic trajectories.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius used by the equirectangular projection.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

const COORD_LIMIT: f64 = 1e7;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub const fn new(x: f64, y: f64) -> Self {
        Location { x, y }
    }

    pub fn dist(&self, other: &Location) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist_sq(&self, other: &Location) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.x.abs() <= COORD_LIMIT
            && self.y.abs() <= COORD_LIMIT
    }

    pub fn scaled(&self, s: f64) -> Location {
        Location::new(self.x * s, self.y * s)
    }
}

/// Origin of the local planar frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub origin_lat: f64,
    pub origin_lon: f64,
}

impl ProjectionSpec {
    pub fn new(origin_lat: f64, origin_lon: f64) -> Result<Self> {
        check_degrees(origin_lat, origin_lon)?;
        Ok(ProjectionSpec {
            origin_lat,
            origin_lon,
        })
    }
}

fn check_degrees(lat: f64, lon: f64) -> Result<()> {
    if !(-90.0..=90.0).contains(&lat) {
        return Err(Error::input(format!("latitude {lat} outside [-90, 90]")));
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err(Error::input(format!("longitude {lon} outside [-180, 180]")));
    }
    Ok(())
}

/// Equirectangular projection around `proj`'s origin.
pub fn to_planar(lat: f64, lon: f64, proj: &ProjectionSpec) -> Result<Location> {
    check_degrees(lat, lon)?;
    check_degrees(proj.origin_lat, proj.origin_lon)?;
    let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
    let x = k * (lon - proj.origin_lon) * proj.origin_lat.to_radians().cos();
    let y = k * (lat - proj.origin_lat);
    Ok(Location::new(x, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    pub length: f64,
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min: Location,
    pub max: Location,
}

impl BBox {
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }
}

/// A point of the network expressed as a position along one of its edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkPoint {
    pub location: Location,
    /// `None` when the closest feature is an isolated node.
    pub edge: Option<usize>,
    /// Parameter in `[0, 1]` from `edge.a` to `edge.b`.
    pub t: f64,
}

/// Undirected road network with straight-line edges.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    nodes: Vec<Location>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(NodeId, usize)>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeRecord {
    id: usize,
    x: f64,
    y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRecord {
    a: usize,
    b: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkFile {
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
}

impl RoadNetwork {
    /// Builds a network; edge lengths are the Euclidean lengths of their endpoints.
    pub fn new(nodes: Vec<Location>, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        if let Some((i, loc)) = nodes.iter().enumerate().find(|(_, l)| !l.is_valid()) {
            return Err(Error::input(format!(
                "node {i} has invalid coordinates {loc:?}"
            )));
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        let mut out = Vec::with_capacity(edges.len());
        for (idx, &(a, b)) in edges.iter().enumerate() {
            if a >= nodes.len() || b >= nodes.len() {
                return Err(Error::config(format!(
                    "edge {idx} ({a}, {b}) references a missing node"
                )));
            }
            if a == b {
                return Err(Error::config(format!(
                    "edge {idx} is a self-loop on node {a}"
                )));
            }
            let length = nodes[a].dist(&nodes[b]);
            adjacency[a].push((b, idx));
            adjacency[b].push((a, idx));
            out.push(Edge { a, b, length });
        }
        Ok(RoadNetwork {
            nodes,
            edges: out,
            adjacency,
        })
    }

    /// `rows × cols` lattice with node `(r, c)` at `(c·spacing, r·spacing)`.
    pub fn grid(rows: usize, cols: usize, spacing: f64) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::input(format!(
                "grid needs rows, cols >= 2, got {rows}x{cols}"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::input(format!(
                "grid spacing must be positive, got {spacing}"
            )));
        }
        let id = |r: usize, c: usize| r * cols + c;
        let mut nodes = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                nodes.push(Location::new(c as f64 * spacing, r as f64 * spacing));
            }
        }
        let mut edges = Vec::with_capacity(2 * rows * cols - rows - cols);
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    edges.push((id(r, c), id(r, c + 1)));
                }
                if r + 1 < rows {
                    edges.push((id(r, c), id(r + 1, c)));
                }
            }
        }
        RoadNetwork::new(nodes, &edges)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(s)?;
        let n = file.nodes.len();
        let mut nodes = vec![None; n];
        for rec in &file.nodes {
            if rec.id >= n {
                return Err(Error::config(format!(
                    "node ids must be dense 0..{n}, found {}",
                    rec.id
                )));
            }
            if nodes[rec.id].replace(Location::new(rec.x, rec.y)).is_some() {
                return Err(Error::config(format!("duplicate node id {}", rec.id)));
            }
        }
        let nodes: Vec<Location> = nodes.into_iter().map(|n| n.expect("dense ids")).collect();
        let edges: Vec<(NodeId, NodeId)> = file.edges.iter().map(|e| (e.a, e.b)).collect();
        RoadNetwork::new(nodes, &edges)
    }

    pub fn to_json_string(&self) -> String {
        let file = NetworkFile {
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(id, l)| NodeRecord { id, x: l.x, y: l.y })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord { a: e.a, b: e.b })
                .collect(),
        };
        serde_json::to_string(&file).expect("network serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        RoadNetwork::from_json_str(&s)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Location] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Location {
        self.nodes[id]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.adjacency[id].len()
    }

    /// `(neighbor, edge index)` pairs incident to `id`.
    pub fn neighbors(&self, id: NodeId) -> &[(NodeId, usize)] {
        &self.adjacency[id]
    }

    pub fn bbox(&self) -> Option<BBox> {
        let first = *self.nodes.first()?;
        let mut b = BBox {
            min: first,
            max: first,
        };
        for n in &self.nodes[1..] {
            b.min.x = b.min.x.min(n.x);
            b.min.y = b.min.y.min(n.y);
            b.max.x = b.max.x.max(n.x);
            b.max.y = b.max.y.max(n.y);
        }
        Some(b)
    }

    /// Closest point of the network (edge segments plus isolated nodes) to `loc`.
    pub fn nearest_point(&self, loc: &Location) -> Result<NetworkPoint> {
        if self.nodes.is_empty() {
            return Err(Error::config("cannot map onto an empty road network"));
        }
        let mut best: Option<(f64, NetworkPoint)> = None;
        for (idx, e) in self.edges.iter().enumerate() {
            let (p, t) = project_onto_segment(loc, &self.nodes[e.a], &self.nodes[e.b]);
            let d = p.dist_sq(loc);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((
                    d,
                    NetworkPoint {
                        location: p,
                        edge: Some(idx),
                        t,
                    },
                ));
            }
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if !self.adjacency[id].is_empty() {
                continue;
            }
            let d = node.dist_sq(loc);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((
                    d,
                    NetworkPoint {
                        location: *node,
                        edge: None,
                        t: 0.0,
                    },
                ));
            }
        }
        Ok(best.expect("nonempty network").1)
    }

    /// Closest point of the network to `loc`.
    pub fn nearest_on_network(&self, loc: &Location) -> Result<Location> {
        Ok(self.nearest_point(loc)?.location)
    }

    /// Euclidean distance from `loc` to the network.
    pub fn distance_to_network(&self, loc: &Location) -> Result<f64> {
        Ok(self.nearest_on_network(loc)?.dist(loc))
    }

    /// Node closest to `loc` in Euclidean distance; ties go to the lowest id.
    pub fn nearest_node(&self, loc: &Location) -> Result<NodeId> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (i, n.dist_sq(loc)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
            .ok_or_else(|| Error::config("empty road network has no nodes"))
    }

    fn check_node(&self, id: NodeId) -> Result<()> {
        if id >= self.nodes.len() {
            return Err(Error::input(format!(
                "node {id} out of range (network has {} nodes)",
                self.nodes.len()
            )));
        }
        Ok(())
    }

    /// Single-source shortest path lengths. With `allowed`, only nodes whose
    /// flag is set may be visited (the source must be allowed). `None` marks
    /// unreachable nodes.
    pub fn dijkstra(&self, src: NodeId, allowed: Option<&[bool]>) -> Result<Vec<Option<f64>>> {
        self.check_node(src)?;
        if let Some(mask) = allowed {
            if mask.len() != self.nodes.len() {
                return Err(Error::input("node mask length differs from node count"));
            }
            if !mask[src] {
                return Err(Error::input(format!(
                    "source node {src} is outside the allowed set"
                )));
            }
        }
        let mut dist: Vec<Option<f64>> = vec![None; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[src] = Some(0.0);
        heap.push(HeapEntry {
            cost: 0.0,
            node: src,
        });
        while let Some(HeapEntry { cost, node }) = heap.pop() {
            if dist[node].is_some_and(|d| cost > d) {
                continue;
            }
            for &(next, edge) in &self.adjacency[node] {
                if allowed.is_some_and(|m| !m[next]) {
                    continue;
                }
                let cand = cost + self.edges[edge].length;
                if dist[next].is_none_or(|d| cand < d) {
                    dist[next] = Some(cand);
                    heap.push(HeapEntry {
                        cost: cand,
                        node: next,
                    });
                }
            }
        }
        Ok(dist)
    }

    /// Shortest path length between two nodes, `None` if they are disconnected.
    pub fn shortest_path_distance(&self, a: NodeId, b: NodeId) -> Result<Option<f64>> {
        self.check_node(b)?;
        Ok(self.dijkstra(a, None)?[b])
    }

    /// Distance from the nearest of `sources` to every node.
    pub fn multi_source_dijkstra(&self, sources: &[NodeId]) -> Result<Vec<Option<f64>>> {
        let mut best: Vec<Option<f64>> = vec![None; self.nodes.len()];
        for &s in sources {
            for (b, d) in best.iter_mut().zip(self.dijkstra(s, None)?) {
                if let Some(d) = d {
                    if b.is_none_or(|cur| d < cur) {
                        *b = Some(d);
                    }
                }
            }
        }
        Ok(best)
    }

    /// Random connected planar-ish network: `n` points uniform in an
    /// `extent × extent` square, each joined to its nearest predecessor, plus
    /// a few extra short edges.
    pub fn random_connected<R: Rng + ?Sized>(n: usize, extent: f64, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("random network needs at least one node"));
        }
        let nodes: Vec<Location> = (0..n)
            .map(|_| Location::new(rng.random::<f64>() * extent, rng.random::<f64>() * extent))
            .collect();
        let mut edges: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
        for i in 1..n {
            let j = (0..i)
                .min_by(|&a, &b| {
                    nodes[i]
                        .dist_sq(&nodes[a])
                        .total_cmp(&nodes[i].dist_sq(&nodes[b]))
                })
                .expect("i >= 1");
            edges.insert((j, i));
        }
        for _ in 0..n / 2 {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let edges: Vec<_> = edges.into_iter().collect();
        RoadNetwork::new(nodes, &edges)
    }

    pub fn is_connected(&self) -> bool {
        match self.nodes.len() {
            0 => false,
            _ => self
                .dijkstra(0, None)
                .map(|d| d.iter().all(Option::is_some))
                .unwrap_or(false),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    cost: f64,
    node: NodeId,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, then on node id for a stable pop order
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Orthogonal projection of `p` onto segment `a`–`b`, clamped to the segment.
pub fn project_onto_segment(p: &Location, a: &Location, b: &Location) -> (Location, f64) {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len_sq = dx * dx + dy * dy;
    if len_sq == 0.0 {
        return (*a, 0.0);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len_sq).clamp(0.0, 1.0);
    (Location::new(a.x + t * dx, a.y + t * dy), t)
}

/// Nonempty set of node ids a user considers possible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstrainedDomain {
    node_ids: Vec<NodeId>,
}

impl ConstrainedDomain {
    pub fn new(ids: impl IntoIterator<Item = NodeId>, net: &RoadNetwork) -> Result<Self> {
        let set: BTreeSet<NodeId> = ids.into_iter().collect();
        if set.is_empty() {
            return Err(Error::input("constrained domain must be nonempty"));
        }
        if let Some(&bad) = set.iter().find(|&&id| id >= net.num_nodes()) {
            return Err(Error::input(format!(
                "domain node {bad} is not in the network"
            )));
        }
        Ok(ConstrainedDomain {
            node_ids: set.into_iter().collect(),
        })
    }

    pub fn all(net: &RoadNetwork) -> Result<Self> {
        ConstrainedDomain::new(0..net.num_nodes(), net)
    }

    /// Sorted node ids.
    pub fn node_ids(&self) -> &[NodeId] {
        &self.node_ids
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.node_ids.binary_search(&id).is_ok()
    }

    pub fn mask(&self, num_nodes: usize) -> Vec<bool> {
        let mut m = vec![false; num_nodes];
        for &id in &self.node_ids {
            m[id] = true;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn projection_reference_values() {
        let p = ProjectionSpec::new(40.7, -74.0).unwrap();
        let o = to_planar(40.7, -74.0, &p).unwrap();
        assert_eq!(o, Location::new(0.0, 0.0));

        let north = to_planar(41.7, -74.0, &p).unwrap();
        assert_abs_diff_eq!(north.y, 111_194.9, epsilon = 0.1);
        assert_eq!(north.x, 0.0);

        let p60 = ProjectionSpec::new(60.0, 10.0).unwrap();
        let east = to_planar(60.0, 11.0, &p60).unwrap();
        assert_abs_diff_eq!(east.x, 55_597.5, epsilon = 0.1);
    }

    #[test]
    fn projection_rejects_bad_degrees() {
        let p = ProjectionSpec::new(0.0, 0.0).unwrap();
        assert!(matches!(to_planar(95.0, 0.0, &p), Err(Error::Input(_))));
        assert!(matches!(to_planar(0.0, -181.0, &p), Err(Error::Input(_))));
        assert!(ProjectionSpec::new(0.0, 200.0).is_err());
    }

    #[test]
    fn grid_shapes() {
        let g = RoadNetwork::grid(2, 2, 100.0).unwrap();
        assert_eq!(g.num_nodes(), 4);
        assert_eq!(g.edges().len(), 4);
        assert!(g.edges().iter().all(|e| e.length == 100.0));

        let g = RoadNetwork::grid(3, 3, 100.0).unwrap();
        assert_eq!(g.num_nodes(), 9);
        assert_eq!(g.edges().len(), 12);
        assert!((0..9).all(|n| (2..=4).contains(&g.degree(n))));

        let g = RoadNetwork::grid(2, 3, 50.0).unwrap();
        assert_eq!(g.node(3 + 2), Location::new(100.0, 50.0));

        assert!(RoadNetwork::grid(1, 3, 1.0).is_err());
        assert!(RoadNetwork::grid(3, 3, 0.0).is_err());
    }

    #[test]
    fn network_validation() {
        let nodes = vec![Location::new(0.0, 0.0), Location::new(1.0, 0.0)];
        assert!(matches!(
            RoadNetwork::new(nodes.clone(), &[(0, 0)]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RoadNetwork::new(nodes, &[(0, 2)]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let g = RoadNetwork::grid(3, 4, 25.0).unwrap();
        let back = RoadNetwork::from_json_str(&g.to_json_string()).unwrap();
        assert_eq!(g, back);

        let s = r#"{"nodes":[{"id":1,"x":3.0,"y":4.0},{"id":0,"x":0.0,"y":0.0}],"edges":[{"a":0,"b":1}]}"#;
        let n = RoadNetwork::from_json_str(s).unwrap();
        assert_eq!(n.edges()[0].length, 5.0);
        let gap = r#"{"nodes":[{"id":0,"x":0,"y":0},{"id":2,"x":1,"y":1}],"edges":[]}"#;
        assert!(RoadNetwork::from_json_str(gap).is_err());
    }

    #[test]
    fn nearest_basic_cases() {
        let net = RoadNetwork::new(
            vec![Location::new(0.0, 0.0), Location::new(100.0, 0.0)],
            &[(0, 1)],
        )
        .unwrap();
        let on = Location::new(37.5, 0.0);
        assert_eq!(net.nearest_on_network(&on).unwrap(), on);
        assert_eq!(
            net.nearest_on_network(&Location::new(50.0, 10.0)).unwrap(),
            Location::new(50.0, 0.0)
        );
        assert_eq!(
            net.nearest_on_network(&Location::new(-20.0, 5.0)).unwrap(),
            Location::new(0.0, 0.0)
        );
        let empty = RoadNetwork::new(vec![], &[]).unwrap();
        assert!(matches!(
            empty.nearest_on_network(&on),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn nearest_ties_take_lowest_edge() {
        // equidistant from the horizontal (edge 0) and vertical (edge 1) segments
        let net = RoadNetwork::new(
            vec![
                Location::new(0.0, 0.0),
                Location::new(10.0, 0.0),
                Location::new(0.0, 10.0),
            ],
            &[(0, 1), (0, 2)],
        )
        .unwrap();
        let p = net.nearest_point(&Location::new(-1.0, -1.0)).unwrap();
        assert_eq!(p.edge, Some(0));
        assert_eq!(p.location, Location::new(0.0, 0.0));
    }

    #[test]
    fn isolated_node_is_part_of_network() {
        let net = RoadNetwork::new(vec![Location::new(5.0, 5.0)], &[]).unwrap();
        assert_eq!(
            net.nearest_on_network(&Location::new(0.0, 0.0)).unwrap(),
            Location::new(5.0, 5.0)
        );
    }

    #[test]
    fn shortest_paths() {
        let g = RoadNetwork::grid(3, 3, 100.0).unwrap();
        assert_eq!(g.shortest_path_distance(4, 4).unwrap(), Some(0.0));
        assert_eq!(g.shortest_path_distance(0, 8).unwrap(), Some(400.0));
        assert_eq!(g.shortest_path_distance(8, 0).unwrap(), Some(400.0));
        assert!(g.shortest_path_distance(0, 9).is_err());

        let split = RoadNetwork::new(
            vec![
                Location::new(0.0, 0.0),
                Location::new(1.0, 0.0),
                Location::new(5.0, 0.0),
            ],
            &[(0, 1)],
        )
        .unwrap();
        assert_eq!(split.shortest_path_distance(0, 2).unwrap(), None);
        assert!(!split.is_connected());
        assert!(g.is_connected());
    }

    #[test]
    fn masked_dijkstra_respects_domain() {
        // path 0-1-2 plus a long detour 0-3-2; masking node 1 forces the detour
        let net = RoadNetwork::new(
            vec![
                Location::new(0.0, 0.0),
                Location::new(1.0, 0.0),
                Location::new(2.0, 0.0),
                Location::new(1.0, 5.0),
            ],
            &[(0, 1), (1, 2), (0, 3), (3, 2)],
        )
        .unwrap();
        let full = net.dijkstra(0, None).unwrap();
        assert_eq!(full[2], Some(2.0));
        let mask = [true, false, true, true];
        let masked = net.dijkstra(0, Some(&mask)).unwrap();
        assert_eq!(masked[1], None);
        assert_abs_diff_eq!(masked[2].unwrap(), 2.0 * 26f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn domain_validation() {
        let g = RoadNetwork::grid(2, 2, 1.0).unwrap();
        assert!(ConstrainedDomain::new(Vec::<usize>::new(), &g).is_err());
        assert!(ConstrainedDomain::new([7], &g).is_err());
        let d = ConstrainedDomain::new([3, 1, 3], &g).unwrap();
        assert_eq!(d.node_ids(), &[1, 3]);
        assert!(d.contains(3) && !d.contains(0));
    }
}
