//! Procedural multi-compartment tank worlds with ray casting and ground
//! truth voxelization.

use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Configuration, Vec3};
use crate::mission::{Compartment, Manhole, MissionSpec, PlannerParams};
use crate::sensors::SensorModel;
use crate::voxel_map::{traverse, GridGeometry, MapError, Occupancy, ScanReturn, VoxelMap, FACE_NEIGHBORS};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("inconsistent tank dimensions: {0}")]
    Dimensions(String),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Generation parameters of a tank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TankParams {
    pub rows: usize,
    pub cols: usize,
    /// Interior compartment size (x, y, z).
    pub comp_dims: Vec3,
    pub manhole_height: f64,
    pub manhole_width: f64,
    pub wall_thickness: f64,
    /// Grid the geometry is aligned to; wall faces land on voxel boundaries.
    pub resolution: f64,
    /// Maximum random offset of each manhole from its wall center.
    pub manhole_jitter: f64,
    /// Adds plates standing in for stiffeners.
    pub clutter: bool,
    pub seed: u64,
}

impl Default for TankParams {
    fn default() -> Self {
        Self {
            rows: 6,
            cols: 3,
            comp_dims: Vec3::new(4.0, 3.5, 3.0),
            manhole_height: 0.8,
            manhole_width: 0.6,
            wall_thickness: 0.2,
            resolution: 0.1,
            manhole_jitter: 0.0,
            clutter: false,
            seed: 0,
        }
    }
}

/// Uniform-grid bucket of primitives for ray queries.
#[derive(Debug, Clone)]
struct Accel {
    grid: GridGeometry,
    cells: Vec<Vec<u32>>,
}

impl Accel {
    fn build(bounds: &Aabb, boxes: &[Aabb], cell: f64) -> Self {
        let ext = bounds.extents();
        let dims = [0, 1, 2].map(|a| ((ext[a] / cell).ceil() as usize).max(1));
        let grid = GridGeometry {
            min: bounds.min,
            resolution: cell,
            dims,
        };
        let mut cells = vec![Vec::new(); grid.len()];
        for (bi, b) in boxes.iter().enumerate() {
            let lo = grid.cell_of(&b.min);
            let hi = grid.cell_of(&b.max);
            let clamp = |v: i64, a: usize| v.clamp(0, dims[a] as i64 - 1) as usize;
            for i in clamp(lo[0], 0)..=clamp(hi[0], 0) {
                for j in clamp(lo[1], 1)..=clamp(hi[1], 1) {
                    for k in clamp(lo[2], 2)..=clamp(hi[2], 2) {
                        cells[grid.index([i, j, k])].push(bi as u32);
                    }
                }
            }
        }
        Self { grid, cells }
    }
}

/// Immutable ground-truth world made of solid boxes.
#[derive(Debug, Clone)]
pub struct TankWorld {
    pub params: TankParams,
    pub boxes: Vec<Aabb>,
    /// Region the occupancy map must cover.
    pub bounds: Aabb,
    pub compartments: Vec<Compartment>,
    pub manholes: Vec<Manhole>,
    accel: Accel,
}

/// Result of a ray query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub point: Vec3,
    pub distance: f64,
}

/// Splits the slab `[lo, hi]` (thin along `axis`) around rectangular holes
/// given as boxes; holes must not overlap along `split`.
fn slab_with_holes(lo: Vec3, hi: Vec3, split: usize, other: usize, holes: &[Aabb]) -> Vec<Aabb> {
    let mut holes: Vec<Aabb> = holes.to_vec();
    holes.sort_by(|a, b| a.min[split].total_cmp(&b.min[split]));
    let mut out = Vec::new();
    let mut cursor = lo[split];
    for h in &holes {
        if h.min[split] > cursor {
            let mut a = hi;
            a[split] = h.min[split];
            let mut b = lo;
            b[split] = cursor;
            out.push(Aabb::new(b, a));
        }
        // Below and above the hole within its span.
        let mut below_min = lo;
        below_min[split] = h.min[split];
        let mut below_max = hi;
        below_max[split] = h.max[split];
        below_max[other] = h.min[other];
        if below_max[other] > below_min[other] {
            out.push(Aabb::new(below_min, below_max));
        }
        let mut above_min = lo;
        above_min[split] = h.min[split];
        above_min[other] = h.max[other];
        let mut above_max = hi;
        above_max[split] = h.max[split];
        if above_max[other] > above_min[other] {
            out.push(Aabb::new(above_min, above_max));
        }
        cursor = h.max[split];
    }
    if hi[split] > cursor {
        let mut b = lo;
        b[split] = cursor;
        out.push(Aabb::new(b, hi));
    }
    out
}

fn snap(v: f64, r: f64) -> f64 {
    (v / r).round() * r
}

/// Builds a rows x cols tank. Columns run along x and rows along y.
pub fn generate_tank(params: &TankParams) -> Result<TankWorld, SimError> {
    let p = *params;
    let r = p.resolution;
    let (l, w, h, t) = (p.comp_dims.x, p.comp_dims.y, p.comp_dims.z, p.wall_thickness);
    if p.rows == 0 || p.cols == 0 {
        return Err(SimError::Dimensions("rows and cols must be positive".into()));
    }
    if !(r > 0.0 && l > 0.0 && w > 0.0 && h > 0.0 && t > 0.0) {
        return Err(SimError::Dimensions("dimensions, wall thickness and resolution must be positive".into()));
    }
    if !(p.manhole_width > 0.0 && p.manhole_height > 0.0) {
        return Err(SimError::Dimensions("manhole dimensions must be positive".into()));
    }
    if p.manhole_height + 2.0 * r > h || p.manhole_width + 2.0 * r > w.min(l) {
        return Err(SimError::Dimensions(format!(
            "manhole {}x{} does not fit a shared wall of {}x{}x{}",
            p.manhole_height, p.manhole_width, l, w, h
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let origin = r;
    let wall_x = |k: usize| origin + k as f64 * (l + t);
    let wall_y = |k: usize| origin + k as f64 * (w + t);
    let floor_z = origin;
    let total = Vec3::new(
        p.cols as f64 * (l + t) + t,
        p.rows as f64 * (w + t) + t,
        h + 2.0 * t,
    );
    let bounds = Aabb::new(Vec3::zeros(), Vec3::repeat(origin) * 2.0 + total);

    let mut compartments = Vec::new();
    for i in 0..p.rows {
        for j in 0..p.cols {
            compartments.push(Compartment {
                id: i * p.cols + j,
                center: Vec3::new(wall_x(j) + t + 0.5 * l, wall_y(i) + t + 0.5 * w, floor_z + t + 0.5 * h),
                dims: p.comp_dims,
            });
        }
    }

    // Manhole opening along the wall, snapped so its edges sit on voxel
    // boundaries, jittered and clamped inside the shared wall.
    let place = |center: f64, half: f64, lo: f64, hi: f64, rng: &mut ChaCha8Rng| -> f64 {
        let jitter = if p.manhole_jitter > 0.0 {
            rng.random_range(-p.manhole_jitter..=p.manhole_jitter)
        } else {
            0.0
        };
        let start = snap(center + jitter - half - origin, r) + origin;
        let start = start.clamp(snap(lo + r - origin, r) + origin, snap(hi - r - 2.0 * half - origin, r) + origin);
        start + half
    };

    let mut manholes = Vec::new();
    let mut x_holes: Vec<Vec<Aabb>> = vec![Vec::new(); p.cols + 1];
    let mut y_holes: Vec<Vec<Aabb>> = vec![Vec::new(); p.rows + 1];
    let (hw, hh) = (0.5 * p.manhole_width, 0.5 * p.manhole_height);
    for i in 0..p.rows {
        for j in 0..p.cols {
            let a = i * p.cols + j;
            if j + 1 < p.cols {
                let b = a + 1;
                let y_lo = wall_y(i) + t;
                let y = place(compartments[a].center.y, hw, y_lo, y_lo + w, &mut rng);
                let z = place(compartments[a].center.z, hh, floor_z + t, floor_z + t + h, &mut rng);
                let x = wall_x(j + 1) + 0.5 * t;
                manholes.push(Manhole {
                    id: manholes.len(),
                    center: Vec3::new(x, y, z),
                    normal: -Vec3::x(),
                    height: p.manhole_height,
                    width: p.manhole_width,
                    connects: (a, b),
                });
                x_holes[j + 1].push(Aabb::new(Vec3::new(x - t, y - hw, z - hh), Vec3::new(x + t, y + hw, z + hh)));
            }
            if i + 1 < p.rows {
                let b = a + p.cols;
                let x_lo = wall_x(j) + t;
                let x = place(compartments[a].center.x, hw, x_lo, x_lo + l, &mut rng);
                let z = place(compartments[a].center.z, hh, floor_z + t, floor_z + t + h, &mut rng);
                let y = wall_y(i + 1) + 0.5 * t;
                manholes.push(Manhole {
                    id: manholes.len(),
                    center: Vec3::new(x, y, z),
                    normal: -Vec3::y(),
                    height: p.manhole_height,
                    width: p.manhole_width,
                    connects: (a, b),
                });
                y_holes[i + 1].push(Aabb::new(Vec3::new(x - hw, y - t, z - hh), Vec3::new(x + hw, y + t, z + hh)));
            }
        }
    }

    let mut boxes = Vec::new();
    let top = floor_z + 2.0 * t + h;
    let far = Vec3::repeat(origin) + total;
    boxes.push(Aabb::new(Vec3::new(origin, origin, floor_z), Vec3::new(far.x, far.y, floor_z + t)));
    boxes.push(Aabb::new(Vec3::new(origin, origin, top - t), Vec3::new(far.x, far.y, top)));
    for (k, holes) in x_holes.iter().enumerate() {
        let lo = Vec3::new(wall_x(k), origin, floor_z + t);
        let hi = Vec3::new(wall_x(k) + t, far.y, top - t);
        boxes.extend(slab_with_holes(lo, hi, 1, 2, holes));
    }
    for (k, row_holes) in y_holes.iter().enumerate() {
        // y-walls run between the x-walls to avoid overlapping primitives.
        for j in 0..p.cols {
            let lo = Vec3::new(wall_x(j) + t, wall_y(k), floor_z + t);
            let hi = Vec3::new(wall_x(j + 1), wall_y(k) + t, top - t);
            let holes: Vec<Aabb> = row_holes
                .iter()
                .filter(|hb| hb.min.x >= lo.x && hb.max.x <= hi.x)
                .copied()
                .collect();
            boxes.extend(slab_with_holes(lo, hi, 0, 2, &holes));
        }
    }
    if p.clutter {
        for c in &compartments {
            // Two plates on each y-wall at a third and two thirds along x.
            let depth = snap(0.3, r).max(r);
            let thick = snap(0.1, r).max(r);
            let x0 = c.center.x - 0.5 * l;
            let y_lo = c.center.y - 0.5 * w;
            let y_hi = c.center.y + 0.5 * w;
            let z_lo = c.center.z - 0.5 * h;
            let z_hi = z_lo + snap(h * 2.0 / 3.0, r);
            for f in [1.0 / 3.0, 2.0 / 3.0] {
                let x = snap(x0 + f * l - origin, r) + origin + rng.random_range(-2..=2) as f64 * r;
                boxes.push(Aabb::new(Vec3::new(x, y_lo, z_lo), Vec3::new(x + thick, y_lo + depth, z_hi)));
                boxes.push(Aabb::new(Vec3::new(x, y_hi - depth, z_lo), Vec3::new(x + thick, y_hi, z_hi)));
            }
        }
    }
    boxes.retain(|b| !b.is_empty() && b.volume() > 0.0);
    Ok(TankWorld::from_parts(p, boxes, bounds, compartments, manholes))
}

impl TankWorld {
    pub fn from_parts(
        params: TankParams,
        boxes: Vec<Aabb>,
        bounds: Aabb,
        compartments: Vec<Compartment>,
        manholes: Vec<Manhole>,
    ) -> Self {
        let accel = Accel::build(&bounds, &boxes, 0.5);
        Self {
            params,
            boxes,
            bounds,
            compartments,
            manholes,
            accel,
        }
    }

    /// Mission description matching this world.
    pub fn mission_spec(&self, params: PlannerParams, start: usize, time_budget: f64) -> MissionSpec {
        MissionSpec {
            compartments: self.compartments.clone(),
            manholes: self.manholes.clone(),
            start_compartment: start,
            time_budget,
            params,
        }
    }

    /// Nearest intersection of `origin + t * dir` with a primitive for
    /// `t <= max_range`.
    pub fn raycast(&self, origin: &Vec3, dir: &Vec3, max_range: f64) -> Option<RayHit> {
        let n = dir.norm();
        if !(n > 0.0) {
            return None;
        }
        let d = dir / n;
        let mut best = f64::INFINITY;
        let mut checked: Vec<u32> = Vec::new();
        traverse(&self.accel.grid, *origin, d, max_range, |idx, _, t_enter| {
            if best <= t_enter {
                return false;
            }
            for &b in &self.accel.cells[idx] {
                if checked.contains(&b) {
                    continue;
                }
                checked.push(b);
                if let Some(t) = self.boxes[b as usize].ray_entry(origin, &d, max_range) {
                    if t < best {
                        best = t;
                    }
                }
            }
            true
        });
        // A ray that starts outside the acceleration grid never visits it.
        if best.is_finite() && best <= max_range {
            Some(RayHit {
                point: origin + d * best,
                distance: best,
            })
        } else {
            None
        }
    }

    /// Whether `p` lies inside any primitive.
    pub fn is_solid(&self, p: &Vec3) -> bool {
        self.boxes.iter().any(|b| b.contains(p))
    }

    /// Simulated depth scan from `pose`: one return per ray of the sensor's
    /// angular grid at `resolution` degrees. Hit points are nudged a
    /// micrometre past the surface so they fall inside the hit voxel.
    pub fn simulate_scan<R: Rng>(
        &self,
        pose: &Configuration,
        depth: &SensorModel,
        resolution: f64,
        noise: Option<(f64, &mut R)>,
    ) -> Vec<ScanReturn> {
        let pattern = SensorModel {
            ray_resolution: resolution,
            ..*depth
        };
        let origin = pose.position();
        let mut noise = noise.and_then(|(sigma, rng)| {
            (sigma > 0.0).then(|| (Normal::new(0.0, sigma).expect("finite sigma"), rng))
        });
        pattern
            .ray_directions()
            .into_iter()
            .map(|body| {
                let d = pose.to_world(body);
                match self.raycast(&origin, &d, depth.max_range) {
                    Some(hit) => {
                        let mut range = hit.distance + 1e-6;
                        if let Some((dist, rng)) = noise.as_mut() {
                            range = (range + dist.sample(*rng)).max(1e-3);
                        }
                        ScanReturn::Hit(origin + d * range)
                    }
                    None => ScanReturn::Miss(d),
                }
            })
            .collect()
    }

    /// Writes every box as 12 triangles, one `x y z x y z x y z` line each.
    pub fn export_triangles<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        const FACES: [[usize; 4]; 6] = [
            [0, 1, 3, 2],
            [4, 6, 7, 5],
            [0, 4, 5, 1],
            [2, 3, 7, 6],
            [0, 2, 6, 4],
            [1, 5, 7, 3],
        ];
        for b in &self.boxes {
            let corner = |i: usize| {
                Vec3::new(
                    if i & 4 != 0 { b.max.x } else { b.min.x },
                    if i & 2 != 0 { b.max.y } else { b.min.y },
                    if i & 1 != 0 { b.max.z } else { b.min.z },
                )
            };
            for f in FACES {
                for tri in [[f[0], f[1], f[2]], [f[0], f[2], f[3]]] {
                    let v: Vec<String> = tri
                        .iter()
                        .map(|&i| {
                            let c = corner(i);
                            format!("{} {} {}", c.x, c.y, c.z)
                        })
                        .collect();
                    writeln!(out, "{}", v.join(" "))?;
                }
            }
        }
        Ok(())
    }
}

/// Exact voxelization of a world.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Solid voxels are occupied, voxels reachable from a compartment
    /// interior are free, everything else is unknown.
    pub map: VoxelMap,
    /// Solid voxels with a reachable free face neighbour, sorted.
    pub surface: Vec<usize>,
    pub free_volume: f64,
}

impl GroundTruth {
    pub fn surface_area(&self) -> f64 {
        let r = self.map.resolution();
        self.surface.len() as f64 * r * r
    }
}

pub fn ground_truth_stats(world: &TankWorld, resolution: f64) -> Result<GroundTruth, SimError> {
    let mut map = VoxelMap::new(world.bounds, resolution)?;
    let grid = *map.grid();
    let mut solid = vec![false; grid.len()];
    for b in &world.boxes {
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut empty = false;
        for a in 0..3 {
            let x = (b.min[a] - grid.min[a]) / resolution;
            let y = (b.max[a] - grid.min[a]) / resolution;
            let l = (x - 1.0 + 1e-9).floor() as i64 + 1;
            let h = (y - 1e-9).ceil() as i64 - 1;
            let l = l.max(0);
            let h = h.min(grid.dims[a] as i64 - 1);
            if h < l {
                empty = true;
                break;
            }
            lo[a] = l as usize;
            hi[a] = h as usize;
        }
        if empty {
            continue;
        }
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    solid[grid.index([i, j, k])] = true;
                }
            }
        }
    }
    let mut free = vec![false; grid.len()];
    let mut queue = VecDeque::new();
    for c in &world.compartments {
        if let Some(idx) = grid.index_of(&c.center) {
            if !solid[idx] && !free[idx] {
                free[idx] = true;
                queue.push_back(idx);
            }
        }
    }
    while let Some(idx) = queue.pop_front() {
        let c = grid.coords(idx);
        for n in FACE_NEIGHBORS.iter() {
            if let Some(j) = grid.checked_index([c[0] as i64 + n[0], c[1] as i64 + n[1], c[2] as i64 + n[2]]) {
                if !solid[j] && !free[j] {
                    free[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    let mut free_count = 0;
    for idx in 0..grid.len() {
        if solid[idx] {
            map.set_occupancy_raw(idx, Occupancy::Occupied);
        } else if free[idx] {
            map.set_occupancy_raw(idx, Occupancy::Free);
            free_count += 1;
        }
    }
    map.recompute_esdf();
    let surface: Vec<usize> = (0..grid.len()).filter(|&i| map.is_surface(i)).collect();
    let r3 = resolution.powi(3);
    Ok(GroundTruth {
        map,
        surface,
        free_volume: free_count as f64 * r3,
    })
}
