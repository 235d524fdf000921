//! Receding-horizon volumetric exploration of one compartment and the
//! lightweight global graph used for repositioning.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Configuration, Vec3};
use crate::graph::{
    build_local_graph, extract_path, shortest_paths, GraphError, LocalGraphParams, Path,
    PlanGraph, VertexTag,
};
use crate::sensors::{segment_is_free, GainEvaluator, RobotBox, SensorModel};
use crate::voxel_map::VoxelMap;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplorationError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("no global route to ({:.2}, {:.2}, {:.2})", .0.x, .0.y, .0.z)]
    NoGlobalRoute(Vec3),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplorationParams {
    /// Weight of the direction-similarity penalty.
    pub zeta: f64,
    /// Distance decay rate, 1/m.
    pub mu: f64,
    /// Minimum vertex volume gain (voxels) to keep exploring.
    pub gamma_min: f64,
    /// Local box size as a multiple of the compartment dimensions.
    pub local_box_pad: f64,
    pub vertex_count: usize,
    pub edge_radius: f64,
    /// Arc-length samples used by the similarity distance.
    pub similarity_samples: usize,
    /// Consecutive low-progress steps tolerated before giving up.
    pub no_progress_steps: usize,
    /// Unknown-voxel reduction below this fraction counts as no progress.
    pub no_progress_fraction: f64,
    /// Hard cap on steps per compartment.
    pub max_iterations: usize,
    /// Paths per step merged into the global graph.
    pub global_paths_per_step: usize,
}

impl Default for ExplorationParams {
    fn default() -> Self {
        Self {
            zeta: 0.25,
            mu: 0.3,
            gamma_min: 20.0,
            local_box_pad: 1.2,
            vertex_count: 200,
            edge_radius: 1.5,
            similarity_samples: 10,
            no_progress_steps: 2,
            no_progress_fraction: 0.01,
            max_iterations: 40,
            global_paths_per_step: 5,
        }
    }
}

impl ExplorationParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.zeta > 0.0) {
            return Err("zeta must be positive".into());
        }
        if !(self.mu > 0.0) {
            return Err("mu must be positive".into());
        }
        if !(self.gamma_min >= 0.0) {
            return Err("gamma_min must be non-negative".into());
        }
        if !(self.local_box_pad > 0.0) {
            return Err("local_box_pad must be positive".into());
        }
        if !(self.edge_radius > 0.0) {
            return Err("edge_radius must be positive".into());
        }
        if self.vertex_count == 0 || self.similarity_samples < 2 || self.max_iterations == 0 {
            return Err("vertex_count, max_iterations must be positive and similarity_samples at least 2".into());
        }
        Ok(())
    }
}

/// Point at arc length `s` along the path, clamped to its ends.
fn point_at(path: &Path, cumulative: &[f64], s: f64) -> Vec3 {
    let w = &path.waypoints;
    if w.len() == 1 || s <= 0.0 {
        return w[0].position();
    }
    for i in 1..w.len() {
        if s <= cumulative[i] || i == w.len() - 1 {
            let seg = cumulative[i] - cumulative[i - 1];
            let f = if seg > 0.0 { ((s - cumulative[i - 1]) / seg).min(1.0) } else { 1.0 };
            return w[i - 1].position() + (w[i].position() - w[i - 1].position()) * f;
        }
    }
    w[w.len() - 1].position()
}

/// Mean distance between the path and a straight segment of equal length
/// from the root along `direction`, sampled at `samples` equal arc lengths.
pub fn similarity_distance(path: &Path, direction: &Vec3, samples: usize) -> f64 {
    if path.len() < 2 || samples < 2 {
        return 0.0;
    }
    let dir = if direction.norm() > 1e-12 {
        direction.normalize()
    } else {
        return 0.0;
    };
    let cumulative = path.cumulative();
    let total = *cumulative.last().unwrap();
    let root = path.waypoints[0].position();
    let mut sum = 0.0;
    for k in 0..samples {
        let s = total * k as f64 / (samples - 1) as f64;
        sum += (point_at(path, &cumulative, s) - (root + dir * s)).norm();
    }
    sum / samples as f64
}

/// Path score: `exp(-zeta Z) * sum_j gain_j exp(-mu D_j)` with `D_j` the
/// arc length from the root to waypoint `j`.
pub fn exploration_gain(path: &Path, gains: &[f64], direction: &Vec3, params: &ExplorationParams) -> f64 {
    let z = similarity_distance(path, direction, params.similarity_samples);
    exploration_gain_with(path, gains, z, params.zeta, params.mu)
}

/// Score with an explicit similarity distance `z`.
pub fn exploration_gain_with(path: &Path, gains: &[f64], z: f64, zeta: f64, mu: f64) -> f64 {
    let d = path.cumulative();
    let sum: f64 = gains.iter().zip(&d).map(|(g, dj)| g * (-mu * dj).exp()).sum();
    (-zeta * z).exp() * sum
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Continue,
    LocalComplete,
}

/// One planning record.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationStep {
    pub path: Path,
    pub status: StepStatus,
    pub vertex_count: usize,
    pub best_score: f64,
    /// Largest vertex volume gain in the local graph.
    pub best_gain: f64,
    /// Highest-scoring paths, best first, for the global graph.
    pub top_paths: Vec<Path>,
}

impl fmt::Display for ExplorationStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "vertices={} best_score={:.3} best_gain={} status={:?}",
            self.vertex_count, self.best_score, self.best_gain, self.status
        )
    }
}

/// Context the step needs besides the map.
#[derive(Debug, Clone, Copy)]
pub struct ExplorationContext<'a> {
    /// Region whose unknown voxels count towards the volume gain.
    pub local_box: &'a Aabb,
    /// Region vertices are sampled from.
    pub sample_region: &'a Aabb,
    pub direction: &'a Vec3,
    pub depth: &'a SensorModel,
    pub robot: &'a RobotBox,
}

/// Heading of the edge into each waypoint; the first keeps `first_yaw`.
fn assign_travel_yaw(path: &mut Path, first_yaw: f64) {
    let n = path.waypoints.len();
    if n == 0 {
        return;
    }
    path.waypoints[0] = path.waypoints[0].with_yaw(first_yaw);
    for i in 1..n {
        let d = path.waypoints[i].position() - path.waypoints[i - 1].position();
        let yaw = if d.x.hypot(d.y) > 1e-9 {
            d.y.atan2(d.x)
        } else {
            path.waypoints[i - 1].psi
        };
        path.waypoints[i] = path.waypoints[i].with_yaw(yaw);
    }
}

/// Builds the local graph, scores every root-to-vertex path and returns the
/// best one.
pub fn plan_exploration_step<R: Rng>(
    map: &VoxelMap,
    current: &Configuration,
    ctx: &ExplorationContext<'_>,
    params: &ExplorationParams,
    evaluator: &mut GainEvaluator,
    rng: &mut R,
) -> Result<ExplorationStep, ExplorationError> {
    let graph_params = LocalGraphParams {
        vertex_count: params.vertex_count,
        edge_radius: params.edge_radius,
        robot: *ctx.robot,
    };
    let graph = match build_local_graph(map, current, ctx.sample_region, &graph_params, rng) {
        Ok(g) => g,
        Err(GraphError::Degenerate(n)) => {
            return Ok(ExplorationStep {
                path: Path::single(*current),
                status: StepStatus::LocalComplete,
                vertex_count: n,
                best_score: 0.0,
                best_gain: 0.0,
                top_paths: Vec::new(),
            })
        }
        Err(e) => return Err(e.into()),
    };
    let gains: Vec<f64> = graph
        .vertices()
        .iter()
        .map(|v| evaluator.volume_gain(map, &v.config, ctx.depth, Some(ctx.local_box)) as f64)
        .collect();
    score_graph(&graph, &gains, current, ctx.direction, params)
}

/// Scoring half of the step, separated so it can be checked exhaustively.
pub fn score_graph(
    graph: &PlanGraph,
    gains: &[f64],
    current: &Configuration,
    direction: &Vec3,
    params: &ExplorationParams,
) -> Result<ExplorationStep, ExplorationError> {
    let tree = shortest_paths(graph, 0)?;
    let best_gain = gains.iter().cloned().fold(0.0, f64::max);
    let mut scored: Vec<(f64, f64, usize, Path)> = Vec::new();
    for v in 0..graph.len() {
        if !tree.reachable(v) {
            continue;
        }
        let mut path = extract_path(graph, &tree, v)?;
        let mut ids = vec![v];
        let mut cur = v;
        while let Some(p) = tree.parent[cur] {
            ids.push(p);
            cur = p;
        }
        ids.reverse();
        let path_gains: Vec<f64> = ids.iter().map(|&i| gains[i]).collect();
        let score = exploration_gain(&path, &path_gains, direction, params);
        assign_travel_yaw(&mut path, current.psi);
        scored.push((score, tree.dist[v], v, path));
    }
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let status = if best_gain <= params.gamma_min {
        StepStatus::LocalComplete
    } else {
        StepStatus::Continue
    };
    let best_score = scored.first().map_or(0.0, |s| s.0);
    let top_paths = scored
        .iter()
        .take(params.global_paths_per_step)
        .map(|s| s.3.clone())
        .collect();
    let path = scored.into_iter().next().map(|s| s.3).unwrap_or_else(|| Path::single(*current));
    Ok(ExplorationStep {
        path,
        status,
        vertex_count: graph.len(),
        best_score,
        best_gain,
        top_paths,
    })
}

/// Tracks unknown-voxel reduction across steps and reports stagnation.
#[derive(Debug, Clone, Copy)]
pub struct ProgressGuard {
    limit: usize,
    fraction: f64,
    stalled: usize,
}

impl ProgressGuard {
    pub fn new(params: &ExplorationParams) -> Self {
        Self {
            limit: params.no_progress_steps,
            fraction: params.no_progress_fraction,
            stalled: 0,
        }
    }

    /// Records one executed step; true once the stall limit is reached.
    pub fn record(&mut self, unknown_before: usize, unknown_after: usize) -> bool {
        let reduced = unknown_before.saturating_sub(unknown_after) as f64;
        if unknown_before == 0 || reduced < self.fraction * unknown_before as f64 {
            self.stalled += 1;
        } else {
            self.stalled = 0;
        }
        self.limit > 0 && self.stalled >= self.limit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalGraphParams {
    pub edge_radius: f64,
    /// Minimum spacing between robot-pose vertices.
    pub pose_spacing: f64,
    /// Path waypoints closer than this to an existing vertex reuse it.
    pub merge_distance: f64,
    pub max_neighbors: usize,
    /// Nearest vertices tried when attaching the robot or target.
    pub attach_candidates: usize,
}

impl Default for GlobalGraphParams {
    fn default() -> Self {
        Self {
            edge_radius: 1.5,
            pose_spacing: 0.5,
            merge_distance: 0.1,
            max_neighbors: 8,
            attach_candidates: 10,
        }
    }
}

fn nearest_within(graph: &PlanGraph, p: &Vec3, radius: f64) -> Option<usize> {
    graph
        .nearest(p, 1)
        .first()
        .copied()
        .filter(|&id| (graph.vertex(id).position() - p).norm() < radius)
}

/// Adds path waypoints and sub-sampled robot poses to the global graph.
/// Returns the number of new vertices.
pub fn update_global_graph(
    global: &mut PlanGraph,
    map: &VoxelMap,
    paths: &[Path],
    poses: &[Configuration],
    robot: &RobotBox,
    params: &GlobalGraphParams,
) -> usize {
    let before = global.len();
    let insert = |global: &mut PlanGraph, c: &Configuration, merge: f64, tag: VertexTag| -> usize {
        if let Some(id) = nearest_within(global, &c.position(), merge) {
            return id;
        }
        let id = global.add_vertex(*c, tag);
        global.connect_vertex(map, id, params.edge_radius, robot, Some(params.max_neighbors));
        id
    };
    for path in paths {
        let mut prev: Option<usize> = None;
        for w in &path.waypoints {
            let id = insert(global, w, params.merge_distance, VertexTag::Sample);
            if let Some(p) = prev {
                if p != id
                    && !global.has_edge(p, id)
                    && segment_is_free(map, &global.vertex(p).position(), &global.vertex(id).position(), robot)
                {
                    global.add_edge(p, id, false);
                }
            }
            prev = Some(id);
        }
    }
    for pose in poses {
        insert(global, pose, params.pose_spacing, VertexTag::RobotPose);
    }
    global.len() - before
}

/// Adds a pre-validated chain (such as a manhole crossing) whose edges are
/// flagged tight and linked to the rest of the graph at both ends.
pub fn add_tight_chain(
    global: &mut PlanGraph,
    map: &VoxelMap,
    chain: &[Configuration],
    robot: &RobotBox,
    params: &GlobalGraphParams,
) -> Vec<usize> {
    let mut ids = Vec::with_capacity(chain.len());
    for (i, c) in chain.iter().enumerate() {
        let id = global.add_vertex(*c, VertexTag::Manhole);
        if i == 0 || i + 1 == chain.len() {
            global.connect_vertex(map, id, params.edge_radius, robot, Some(params.max_neighbors));
        }
        if let Some(&p) = ids.last() {
            global.add_edge(p, id, true);
        }
        ids.push(id);
    }
    ids
}

/// Route through the global graph from `current` to the vertex closest to
/// `target`, ending at `target` itself when the last leg is free.
///
/// Edges that collide with the current map are removed first. `tight` is the
/// clearance box used for edges flagged tight.
pub fn plan_repositioning(
    global: &mut PlanGraph,
    map: &VoxelMap,
    current: &Configuration,
    target: &Vec3,
    robot: &RobotBox,
    tight: &RobotBox,
    params: &GlobalGraphParams,
) -> Result<Path, ExplorationError> {
    let here = current.position();
    if (here - target).norm() < 1e-9 {
        return Ok(Path::single(*current));
    }
    if segment_is_free(map, &here, target, robot) && (here - target).norm() <= params.edge_radius {
        return Ok(Path::new(vec![*current, Configuration::from_position(*target, current.psi)]));
    }
    let positions: Vec<Vec3> = global.vertices().iter().map(|v| v.position()).collect();
    global.retain_edges(|e| {
        let bx = if e.tight { tight } else { robot };
        segment_is_free(map, &positions[e.a], &positions[e.b], bx)
    });
    let no_route = || ExplorationError::NoGlobalRoute(*target);
    let start = global
        .nearest(&here, params.attach_candidates)
        .into_iter()
        .find(|&id| segment_is_free(map, &here, &positions[id], robot))
        .ok_or_else(no_route)?;
    let tree = shortest_paths(global, start).map_err(|_| no_route())?;
    let near_target = global.nearest(target, params.attach_candidates);
    let goal = near_target
        .iter()
        .copied()
        .find(|&id| segment_is_free(map, &positions[id], target, robot))
        .or_else(|| near_target.first().copied())
        .ok_or_else(no_route)?;
    if !tree.reachable(goal) {
        return Err(no_route());
    }
    let mut path = Path::single(*current);
    path.append(&extract_path(global, &tree, goal)?);
    if segment_is_free(map, &positions[goal], target, robot) {
        path.push(Configuration::from_position(*target, current.psi), false);
    }
    assign_travel_yaw(&mut path, current.psi);
    Ok(path)
}
