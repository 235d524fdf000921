//! Distance-constrained general visual inspection of one compartment:
//! viewpoint lattice, inspection graph, greedy cover and tour ordering.

use std::fmt;

use fixedbitset::FixedBitSet;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Configuration, Vec3};
use crate::graph::{extract_path, sample_free, shortest_paths, GraphError, Path, PlanGraph, VertexTag};
use crate::sensors::{collision_check, GainEvaluator, RobotBox, SensorModel};
use crate::tsp::{solve, SolverOptions, TourProblem, TspError};
use crate::voxel_map::{Occupancy, VoxelMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GviError {
    #[error("inspection graph unreachable: current configuration has no collision-free edge")]
    Unreachable,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Tour(#[from] TspError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GviParams {
    /// Minimum viewing distance to the closest occupied voxel.
    pub delta_min: f64,
    /// Maximum viewing distance to the closest occupied voxel.
    pub delta_max: f64,
    /// Viewpoint lattice spacing.
    pub grid_pitch: f64,
    pub connect_radius: f64,
    /// Selection stops once no viewpoint adds more than this many voxels.
    pub gamma_v_min: f64,
    pub extend_sample_budget: usize,
    /// Inspection box size as a multiple of the compartment dimensions.
    pub box_pad: f64,
    /// Extra clearance kept above `delta_min` at generation time, so the
    /// bound still holds once the map grows.
    pub lower_margin: f64,
    /// Headings offered at lattice points whose closest surface lies mostly
    /// below or above them, where the gradient gives no usable heading.
    /// Zero makes such points face the box center instead.
    pub level_headings: usize,
}

impl Default for GviParams {
    fn default() -> Self {
        Self {
            delta_min: 0.8,
            delta_max: 1.25,
            grid_pitch: 0.4,
            connect_radius: 1.5,
            gamma_v_min: 5.0,
            extend_sample_budget: 300,
            box_pad: 1.1,
            lower_margin: 0.05,
            level_headings: 8,
        }
    }
}

impl GviParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.delta_min > 0.0 && self.delta_min < self.delta_max) {
            return Err(format!(
                "delta_min must satisfy 0 < delta_min < delta_max, got {} and {}",
                self.delta_min, self.delta_max
            ));
        }
        if !(self.grid_pitch > 0.0) {
            return Err("grid_pitch must be positive".into());
        }
        if !(self.connect_radius > 0.0) {
            return Err("connect_radius must be positive".into());
        }
        if !(self.gamma_v_min >= 0.0) {
            return Err("gamma_v_min must be non-negative".into());
        }
        if !(self.box_pad > 0.0) {
            return Err("box_pad must be positive".into());
        }
        if !(self.lower_margin >= 0.0 && self.delta_min + self.lower_margin < self.delta_max) {
            return Err("lower_margin must be non-negative and leave a non-empty band".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewpoint {
    pub config: Configuration,
    /// Distance to the closest occupied voxel.
    pub surface_distance: f64,
    pub gain: usize,
}

/// Lattice coordinates along one axis, centred in `[lo, hi]`.
fn axis_samples(lo: f64, hi: f64, pitch: f64) -> Vec<f64> {
    let ext = hi - lo;
    if ext < 0.0 {
        return Vec::new();
    }
    let n = (ext / pitch + 1e-9).floor() as usize + 1;
    let offset = 0.5 * (ext - (n - 1) as f64 * pitch);
    (0..n).map(|i| lo + offset + i as f64 * pitch).collect()
}

/// True if an unknown voxel center lies within `radius` of `p`.
fn unknown_within(map: &VoxelMap, p: &Vec3, radius: f64) -> bool {
    let b = Aabb::new(p - Vec3::repeat(radius), p + Vec3::repeat(radius));
    let grid = map.grid();
    let Some((lo, hi)) = grid.cells_with_center_in(&b) else {
        return false;
    };
    let r2 = radius * radius;
    for i in lo[0]..=hi[0] {
        for j in lo[1]..=hi[1] {
            for k in lo[2]..=hi[2] {
                let idx = grid.index([i, j, k]);
                if map.occupancy(idx) == Occupancy::Unknown
                    && (grid.center_of([i, j, k]) - p).norm_squared() < r2
                {
                    return true;
                }
            }
        }
    }
    false
}

/// Horizontal share of the surface direction below which the closest
/// surface counts as a floor or ceiling.
const LEVEL_SURFACE_PLANAR: f64 = 0.5;

/// Collision-free lattice points in `region` whose distance to the closest
/// occupied voxel lies in the viewing band. Each faces that voxel, except
/// above a floor or below a ceiling, where it is offered at several headings.
pub fn generate_viewpoints(
    map: &VoxelMap,
    region: &Aabb,
    params: &GviParams,
    robot: &RobotBox,
) -> Vec<Viewpoint> {
    let region = region.intersection(&map.bounds());
    let center = region.center();
    let xs = axis_samples(region.min.x, region.max.x, params.grid_pitch);
    let ys = axis_samples(region.min.y, region.max.y, params.grid_pitch);
    let zs = axis_samples(region.min.z, region.max.z, params.grid_pitch);
    let mut out = Vec::new();
    for &x in &xs {
        for &y in &ys {
            for &z in &zs {
                let p = Vec3::new(x, y, z);
                let Ok(sample) = map.esdf_query(&p) else {
                    continue;
                };
                let d = sample.distance;
                if d < params.delta_min + params.lower_margin || d > params.delta_max {
                    continue;
                }
                let c = Configuration::from_position(p, 0.0);
                if !collision_check(map, &c, robot) || unknown_within(map, &p, params.delta_min) {
                    continue;
                }
                let g = -sample.gradient;
                let planar = g.x.hypot(g.y);
                let yaws: Vec<f64> = if planar >= LEVEL_SURFACE_PLANAR {
                    vec![g.y.atan2(g.x)]
                } else if params.level_headings > 0 {
                    let n = params.level_headings;
                    (0..n).map(|k| k as f64 * std::f64::consts::TAU / n as f64).collect()
                } else if planar >= 1e-3 {
                    vec![g.y.atan2(g.x)]
                } else {
                    let to_center = center - p;
                    vec![to_center.y.atan2(to_center.x)]
                };
                for yaw in yaws {
                    out.push(Viewpoint {
                        config: c.with_yaw(yaw),
                        surface_distance: d,
                        gain: 0,
                    });
                }
            }
        }
    }
    out
}

/// Inspection graph over the current configuration (vertex 0) and the
/// viewpoints.
#[derive(Debug, Clone)]
pub struct InspectionGraph {
    pub graph: PlanGraph,
    /// Graph vertex of each input viewpoint; `None` if dropped as disconnected.
    pub viewpoint_vertex: Vec<Option<usize>>,
    pub extension_samples: usize,
    pub dropped: usize,
}

fn connect_all(map: &VoxelMap, g: &mut PlanGraph, from: usize, radius: f64, robot: &RobotBox) {
    g.connect_vertex(map, from, radius, robot, None);
}

#[allow(clippy::too_many_arguments)]
pub fn build_inspection_graph<R: Rng>(
    map: &VoxelMap,
    viewpoints: &[Viewpoint],
    current: &Configuration,
    region: &Aabb,
    params: &GviParams,
    robot: &RobotBox,
    rng: &mut R,
) -> Result<InspectionGraph, GviError> {
    let mut g = PlanGraph::new();
    g.add_vertex(*current, VertexTag::Root);
    for v in viewpoints {
        g.add_vertex(v.config, VertexTag::Viewpoint);
    }
    for id in 0..g.len() {
        connect_all(map, &mut g, id, params.connect_radius, robot);
    }
    let all_connected = |g: &PlanGraph| {
        let labels = g.components();
        (1..=viewpoints.len()).all(|i| labels[i] == labels[0])
    };
    let region = region.intersection(&map.bounds());
    let mut added = 0;
    let mut attempts = 0;
    while !all_connected(&g) && added < params.extend_sample_budget && attempts < params.extend_sample_budget * 20 {
        attempts += 1;
        if let Some(c) = sample_free(map, &region, robot, rng, 1) {
            let id = g.add_vertex(c, VertexTag::Extension);
            connect_all(map, &mut g, id, params.connect_radius, robot);
            added += 1;
        }
    }
    let labels = g.components();
    let keep: Vec<bool> = labels.iter().map(|&l| l == labels[0]).collect();
    if !viewpoints.is_empty() && (1..=viewpoints.len()).all(|i| !keep[i]) && g.neighbors(0).next().is_none() {
        return Err(GviError::Unreachable);
    }
    let (graph, remap) = g.induced(&keep);
    let viewpoint_vertex: Vec<Option<usize>> = (1..=viewpoints.len()).map(|i| remap[i]).collect();
    let dropped = viewpoint_vertex.iter().filter(|v| v.is_none()).count();
    if dropped > 0 {
        log::warn!("{dropped} viewpoints dropped as unreachable from the current configuration");
    }
    Ok(InspectionGraph {
        graph,
        viewpoint_vertex,
        extension_samples: added,
        dropped,
    })
}

/// One greedy pick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub index: usize,
    /// Voxels this pick adds beyond earlier picks.
    pub marginal_gain: usize,
}

/// Greedy set cover over explicit voxel sets. Repeatedly picks the set with
/// the largest marginal gain (lowest index on ties) until no remaining set
/// adds more than `gamma_min` voxels.
pub fn greedy_select(sets: &[Vec<usize>], gamma_min: f64) -> Vec<Selection> {
    let mut universe: Vec<usize> = sets.iter().flatten().copied().collect();
    universe.sort_unstable();
    universe.dedup();
    let n = universe.len();
    let bits: Vec<FixedBitSet> = sets
        .iter()
        .map(|s| {
            let mut b = FixedBitSet::with_capacity(n);
            for v in s {
                b.insert(universe.binary_search(v).unwrap());
            }
            b
        })
        .collect();
    let mut covered = FixedBitSet::with_capacity(n);
    let mut remaining: Vec<bool> = vec![true; sets.len()];
    let mut out = Vec::new();
    loop {
        let mut best: Option<(usize, usize)> = None;
        for (i, b) in bits.iter().enumerate() {
            if !remaining[i] {
                continue;
            }
            let gain = b.difference(&covered).count();
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        match best {
            Some((i, gain)) if gain as f64 > gamma_min => {
                covered.union_with(&bits[i]);
                remaining[i] = false;
                out.push(Selection {
                    index: i,
                    marginal_gain: gain,
                });
            }
            _ => return out,
        }
    }
}

/// Summary of one inspection plan.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GviReport {
    pub viewpoints_generated: usize,
    pub selected: usize,
    pub dropped_disconnected: usize,
    pub predicted_new_voxels: usize,
    pub tour_cost: f64,
    /// Unseen surface voxels in the box that no generated viewpoint sees.
    pub residual_voxels: usize,
    pub extension_samples: usize,
}

impl fmt::Display for GviReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "viewpoints_generated={} selected={} dropped_disconnected={} predicted_new_voxels={} tour_cost_m={:.3} residual_voxels={} extension_samples={}",
            self.viewpoints_generated,
            self.selected,
            self.dropped_disconnected,
            self.predicted_new_voxels,
            self.tour_cost,
            self.residual_voxels,
            self.extension_samples
        )
    }
}

#[derive(Debug, Clone)]
pub struct InspectionPlan {
    pub path: Path,
    /// Selected viewpoints in tour order.
    pub tour: Vec<Viewpoint>,
    pub report: GviReport,
}

/// Inputs of one inspection plan besides the map.
#[derive(Debug, Clone, Copy)]
pub struct InspectionContext<'a> {
    pub region: &'a Aabb,
    pub camera: &'a SensorModel,
    pub robot: &'a RobotBox,
    pub tsp: &'a SolverOptions,
}

pub fn plan_inspection<R: Rng>(
    map: &VoxelMap,
    current: &Configuration,
    ctx: &InspectionContext<'_>,
    params: &GviParams,
    evaluator: &mut GainEvaluator,
    rng: &mut R,
) -> Result<InspectionPlan, GviError> {
    let mut viewpoints = generate_viewpoints(map, ctx.region, params, ctx.robot);
    let sets: Vec<Vec<usize>> = viewpoints
        .iter()
        .map(|v| evaluator.visible_unseen(map, &v.config, ctx.camera, Some(ctx.region)))
        .collect();
    for (v, s) in viewpoints.iter_mut().zip(&sets) {
        v.gain = s.len();
    }
    let mut report = GviReport {
        viewpoints_generated: viewpoints.len(),
        residual_voxels: residual_count(map, ctx.region, &sets),
        ..Default::default()
    };
    if viewpoints.is_empty() {
        return Ok(InspectionPlan {
            path: Path::single(*current),
            tour: Vec::new(),
            report,
        });
    }
    let ig = build_inspection_graph(map, &viewpoints, current, ctx.region, params, ctx.robot, rng)?;
    report.dropped_disconnected = ig.dropped;
    report.extension_samples = ig.extension_samples;

    let reachable: Vec<usize> = (0..viewpoints.len()).filter(|&i| ig.viewpoint_vertex[i].is_some()).collect();
    let reachable_sets: Vec<Vec<usize>> = reachable.iter().map(|&i| sets[i].clone()).collect();
    let picks = greedy_select(&reachable_sets, params.gamma_v_min);
    report.selected = picks.len();
    report.predicted_new_voxels = picks.iter().map(|p| p.marginal_gain).sum();
    if picks.is_empty() {
        return Ok(InspectionPlan {
            path: Path::single(*current),
            tour: Vec::new(),
            report,
        });
    }
    let chosen: Vec<usize> = picks.iter().map(|p| reachable[p.index]).collect();
    let nodes: Vec<usize> = std::iter::once(0)
        .chain(chosen.iter().map(|&i| ig.viewpoint_vertex[i].unwrap()))
        .collect();
    let trees: Vec<_> = nodes
        .iter()
        .map(|&n| shortest_paths(&ig.graph, n))
        .collect::<Result<_, _>>()?;
    let cost: Vec<Vec<f64>> = trees
        .iter()
        .map(|t| nodes.iter().map(|&m| t.dist[m]).collect())
        .collect();
    let problem = TourProblem::open_ended(cost, 0)?;
    let tour = solve(&problem, ctx.tsp)?;
    report.tour_cost = tour.cost;

    let mut path = Path::single(*current);
    for w in tour.order.windows(2) {
        let seg = extract_path(&ig.graph, &trees[w[0]], nodes[w[1]])?;
        path.append(&seg);
    }
    face_along_travel(&mut path, &ig.graph);
    let tour_viewpoints = tour.order[1..]
        .iter()
        .map(|&k| viewpoints[chosen[k - 1]])
        .collect();
    Ok(InspectionPlan {
        path,
        tour: tour_viewpoints,
        report,
    })
}

/// Non-viewpoint waypoints look toward the next waypoint.
fn face_along_travel(path: &mut Path, graph: &PlanGraph) {
    let is_viewpoint = |c: &Configuration| {
        graph
            .vertices()
            .iter()
            .any(|v| v.has_tag(VertexTag::Viewpoint) && v.config == *c)
    };
    let n = path.len();
    for i in 1..n.saturating_sub(1) {
        let w = path.waypoints[i];
        if is_viewpoint(&w) {
            continue;
        }
        let d = path.waypoints[i + 1].position() - w.position();
        if d.x.hypot(d.y) > 1e-9 {
            path.waypoints[i] = w.with_yaw(d.y.atan2(d.x));
        }
    }
}

/// Unseen surface voxels in `region` absent from every set.
fn residual_count(map: &VoxelMap, region: &Aabb, sets: &[Vec<usize>]) -> usize {
    let mut seen: Vec<usize> = sets.iter().flatten().copied().collect();
    seen.sort_unstable();
    seen.dedup();
    let Some((lo, hi)) = map.grid().cells_with_center_in(region) else {
        return 0;
    };
    let mut n = 0;
    for i in lo[0]..=hi[0] {
        for j in lo[1]..=hi[1] {
            for k in lo[2]..=hi[2] {
                let idx = map.grid().index([i, j, k]);
                if map.is_surface(idx) && !map.is_seen(idx) && seen.binary_search(&idx).is_err() {
                    n += 1;
                }
            }
        }
    }
    n
}
