//! Sampled configuration graphs with Dijkstra shortest paths.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::io::Write;

use rand::Rng;
use thiserror::Error;

use crate::geometry::{Aabb, Configuration, Vec3};
use crate::sensors::{collision_check, segment_is_free, RobotBox};
use crate::voxel_map::VoxelMap;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("unsafe start: root configuration is in collision")]
    UnsafeStart,
    #[error("graph degenerate: {0} reachable vertices")]
    Degenerate(usize),
    #[error("vertex {0} is unreachable")]
    Unreachable(usize),
    #[error("vertex {0} does not exist")]
    UnknownVertex(usize),
}

/// Role a vertex plays in the planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VertexTag {
    Root,
    Sample,
    Viewpoint,
    Extension,
    RobotPose,
    Manhole,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: usize,
    pub config: Configuration,
    pub tags: Vec<VertexTag>,
}

impl Vertex {
    pub fn position(&self) -> Vec3 {
        self.config.position()
    }

    pub fn has_tag(&self, tag: VertexTag) -> bool {
        self.tags.contains(&tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
    /// Validated with the reduced clearance box used for manholes.
    pub tight: bool,
}

/// Undirected graph of configurations.
#[derive(Debug, Clone, Default)]
pub struct PlanGraph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, usize)>>,
    edge_keys: HashSet<(usize, usize)>,
}

impl PlanGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex(&self, id: usize) -> &Vertex {
        &self.vertices[id]
    }

    pub fn add_vertex(&mut self, config: Configuration, tag: VertexTag) -> usize {
        let id = self.vertices.len();
        self.vertices.push(Vertex {
            id,
            config,
            tags: vec![tag],
        });
        self.adjacency.push(Vec::new());
        id
    }

    pub fn add_tag(&mut self, id: usize, tag: VertexTag) {
        let tags = &mut self.vertices[id].tags;
        if !tags.contains(&tag) {
            tags.push(tag);
            tags.sort();
        }
    }

    fn key(a: usize, b: usize) -> (usize, usize) {
        (a.min(b), a.max(b))
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edge_keys.contains(&Self::key(a, b))
    }

    /// Adds an undirected edge with Euclidean length. Self-loops and
    /// duplicates are ignored and return `false`.
    pub fn add_edge(&mut self, a: usize, b: usize, tight: bool) -> bool {
        if a == b || a >= self.len() || b >= self.len() || self.has_edge(a, b) {
            return false;
        }
        let length = (self.vertices[a].position() - self.vertices[b].position()).norm();
        let e = self.edges.len();
        self.edges.push(Edge { a, b, length, tight });
        self.adjacency[a].push((b, e));
        self.adjacency[b].push((a, e));
        self.edge_keys.insert(Self::key(a, b));
        true
    }

    /// Neighbours of `id` with the connecting edge length.
    pub fn neighbors(&self, id: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adjacency[id]
            .iter()
            .map(move |&(n, e)| (n, self.edges[e].length))
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<&Edge> {
        self.adjacency
            .get(a)?
            .iter()
            .find(|(n, _)| *n == b)
            .map(|&(_, e)| &self.edges[e])
    }

    /// Keeps only edges for which `keep` returns true.
    pub fn retain_edges<F: FnMut(&Edge) -> bool>(&mut self, mut keep: F) -> usize {
        let before = self.edges.len();
        let old = std::mem::take(&mut self.edges);
        self.edge_keys.clear();
        for adj in &mut self.adjacency {
            adj.clear();
        }
        for e in old {
            if keep(&e) {
                let idx = self.edges.len();
                self.edges.push(e);
                self.adjacency[e.a].push((e.b, idx));
                self.adjacency[e.b].push((e.a, idx));
                self.edge_keys.insert(Self::key(e.a, e.b));
            }
        }
        before - self.edges.len()
    }

    /// Vertex ids ordered by distance to `p`, ties by id.
    pub fn nearest(&self, p: &Vec3, k: usize) -> Vec<usize> {
        let mut ids: Vec<(f64, usize)> = self
            .vertices
            .iter()
            .map(|v| ((v.position() - p).norm(), v.id))
            .collect();
        ids.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ids.into_iter().take(k).map(|(_, id)| id).collect()
    }

    /// Connects `id` to other vertices within `radius` whose straight
    /// segments are collision-free, closest first, up to `max_new` edges.
    pub fn connect_vertex(
        &mut self,
        map: &VoxelMap,
        id: usize,
        radius: f64,
        robot: &RobotBox,
        max_new: Option<usize>,
    ) -> usize {
        let p = self.vertices[id].position();
        let mut candidates: Vec<(f64, usize)> = self
            .vertices
            .iter()
            .filter(|v| v.id != id)
            .map(|v| ((v.position() - p).norm(), v.id))
            .filter(|(d, _)| *d <= radius)
            .collect();
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut added = 0;
        for (_, other) in candidates {
            if max_new.is_some_and(|m| added >= m) {
                break;
            }
            if self.has_edge(id, other) {
                continue;
            }
            let q = self.vertices[other].position();
            if segment_is_free(map, &p, &q, robot) && self.add_edge(id, other, false) {
                added += 1;
            }
        }
        added
    }

    /// Component label per vertex, labels assigned in order of lowest id.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.len()];
        let mut next = 0;
        for s in 0..self.len() {
            if label[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            label[s] = next;
            while let Some(v) = stack.pop() {
                for &(n, _) in &self.adjacency[v] {
                    if label[n] == usize::MAX {
                        label[n] = next;
                        stack.push(n);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Subgraph induced by `keep`, with vertices renumbered in order.
    /// Returns the graph and the old-to-new id map.
    pub fn induced(&self, keep: &[bool]) -> (PlanGraph, Vec<Option<usize>>) {
        let mut out = PlanGraph::new();
        let mut remap = vec![None; self.len()];
        for v in &self.vertices {
            if keep[v.id] {
                let id = out.add_vertex(v.config, v.tags[0]);
                out.vertices[id].tags = v.tags.clone();
                remap[v.id] = Some(id);
            }
        }
        for e in &self.edges {
            if let (Some(a), Some(b)) = (remap[e.a], remap[e.b]) {
                out.add_edge(a, b, e.tight);
            }
        }
        (out, remap)
    }

    /// Writes `V id x y z psi` and `E a b length` lines.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for v in &self.vertices {
            let c = v.config;
            writeln!(out, "V {} {} {} {} {}", v.id, c.x, c.y, c.z, c.psi)?;
        }
        for e in &self.edges {
            writeln!(out, "E {} {} {}", e.a, e.b, e.length)?;
        }
        Ok(())
    }
}

/// Ordered waypoints. `tight[i]` marks waypoints validated with the reduced
/// manhole clearance box.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Path {
    pub waypoints: Vec<Configuration>,
    pub tight: Vec<bool>,
}

impl Path {
    pub fn new(waypoints: Vec<Configuration>) -> Self {
        let tight = vec![false; waypoints.len()];
        Self { waypoints, tight }
    }

    pub fn single(c: Configuration) -> Self {
        Self::new(vec![c])
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| w[0].distance(&w[1]))
            .sum()
    }

    /// Cumulative distance from the first waypoint to each waypoint.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.waypoints.len());
        for (i, w) in self.waypoints.iter().enumerate() {
            if i > 0 {
                acc += self.waypoints[i - 1].distance(w);
            }
            out.push(acc);
        }
        out
    }

    pub fn first(&self) -> Option<&Configuration> {
        self.waypoints.first()
    }

    pub fn last(&self) -> Option<&Configuration> {
        self.waypoints.last()
    }

    pub fn push(&mut self, c: Configuration, tight: bool) {
        self.waypoints.push(c);
        self.tight.push(tight);
    }

    /// Appends `other`, skipping its first waypoint when it repeats our last.
    pub fn append(&mut self, other: &Path) {
        for (i, (w, t)) in other.waypoints.iter().zip(&other.tight).enumerate() {
            if i == 0 {
                if let Some(last) = self.waypoints.last() {
                    if last.distance(w) < 1e-9 {
                        if *t {
                            *self.tight.last_mut().unwrap() = true;
                        }
                        continue;
                    }
                }
            }
            self.push(*w, *t);
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Single-source shortest path tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPaths {
    pub source: usize,
    /// `INFINITY` for unreachable vertices.
    pub dist: Vec<f64>,
    pub parent: Vec<Option<usize>>,
}

impl ShortestPaths {
    pub fn reachable(&self, v: usize) -> bool {
        self.dist[v].is_finite()
    }
}

pub fn shortest_paths(graph: &PlanGraph, source: usize) -> Result<ShortestPaths, GraphError> {
    if source >= graph.len() {
        return Err(GraphError::UnknownVertex(source));
    }
    let mut dist = vec![f64::INFINITY; graph.len()];
    let mut parent = vec![None; graph.len()];
    let mut done = vec![false; graph.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry(0.0, source));
    while let Some(Entry(d, v)) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        for (n, w) in graph.neighbors(v) {
            let nd = d + w;
            if nd < dist[n] {
                dist[n] = nd;
                parent[n] = Some(v);
                heap.push(Entry(nd, n));
            }
        }
    }
    Ok(ShortestPaths {
        source,
        dist,
        parent,
    })
}

/// Root-to-target path along parent pointers, carrying edge clearance flags.
pub fn extract_path(
    graph: &PlanGraph,
    tree: &ShortestPaths,
    target: usize,
) -> Result<Path, GraphError> {
    if target >= graph.len() {
        return Err(GraphError::UnknownVertex(target));
    }
    if !tree.reachable(target) {
        return Err(GraphError::Unreachable(target));
    }
    let mut ids = vec![target];
    let mut v = target;
    while let Some(p) = tree.parent[v] {
        ids.push(p);
        v = p;
    }
    ids.reverse();
    let mut path = Path::default();
    for (i, &id) in ids.iter().enumerate() {
        let tight_in = i > 0 && graph.edge_between(ids[i - 1], id).is_some_and(|e| e.tight);
        let tight_out =
            i + 1 < ids.len() && graph.edge_between(id, ids[i + 1]).is_some_and(|e| e.tight);
        path.push(graph.vertex(id).config, tight_in || tight_out);
    }
    Ok(path)
}

/// Sampling parameters of a local graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalGraphParams {
    pub vertex_count: usize,
    /// Connection radius.
    pub edge_radius: f64,
    pub robot: RobotBox,
}

impl Default for LocalGraphParams {
    fn default() -> Self {
        Self {
            vertex_count: 200,
            edge_radius: 1.5,
            robot: RobotBox::default(),
        }
    }
}

/// Uniform collision-free configuration in `region`, or `None` after
/// `attempts` rejections.
pub fn sample_free<R: Rng>(
    map: &VoxelMap,
    region: &Aabb,
    robot: &RobotBox,
    rng: &mut R,
    attempts: usize,
) -> Option<Configuration> {
    if region.is_empty() {
        return None;
    }
    for _ in 0..attempts {
        let p = Vec3::new(
            rng.random_range(region.min.x..=region.max.x),
            rng.random_range(region.min.y..=region.max.y),
            rng.random_range(region.min.z..=region.max.z),
        );
        let c = Configuration::from_position(p, 0.0);
        if collision_check(map, &c, robot) {
            return Some(c);
        }
    }
    None
}

/// Builds a local graph around `root` in `region`, restricted to the
/// component containing the root (vertex 0).
pub fn build_local_graph<R: Rng>(
    map: &VoxelMap,
    root: &Configuration,
    region: &Aabb,
    params: &LocalGraphParams,
    rng: &mut R,
) -> Result<PlanGraph, GraphError> {
    if !collision_check(map, root, &params.robot) {
        return Err(GraphError::UnsafeStart);
    }
    let region = region.intersection(&map.bounds());
    let mut g = PlanGraph::new();
    g.add_vertex(*root, VertexTag::Root);
    let attempts = params.vertex_count.max(1) * 30;
    let mut tries = 0;
    while g.len() <= params.vertex_count && tries < attempts {
        tries += 1;
        if let Some(c) = sample_free(map, &region, &params.robot, rng, 1) {
            g.add_vertex(c, VertexTag::Sample);
        }
    }
    for a in 0..g.len() {
        for b in (a + 1)..g.len() {
            let pa = g.vertices[a].position();
            let pb = g.vertices[b].position();
            if (pa - pb).norm() <= params.edge_radius && segment_is_free(map, &pa, &pb, &params.robot)
            {
                g.add_edge(a, b, false);
            }
        }
    }
    let labels = g.components();
    let keep: Vec<bool> = labels.iter().map(|&l| l == labels[0]).collect();
    let (g, _) = g.induced(&keep);
    if g.len() < 2 {
        return Err(GraphError::Degenerate(g.len()));
    }
    Ok(g)
}
