//! Uniform occupancy grid with camera-inspection annotations and an
//! incrementally maintained distance field.

mod esdf;
mod io;
pub mod traversal;

use std::fmt;

use thiserror::Error;

use crate::geometry::{Aabb, Configuration, Vec3};
use crate::sensors::SensorModel;
use esdf::Esdf;
pub use io::{export_map, import_map, read_map, write_map};
pub use traversal::{traverse, GridGeometry};

/// Face-neighbour offsets.
pub(crate) const FACE_NEIGHBORS: [[i64; 3]; 6] = [
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
];

#[derive(Debug, Error)]
pub enum MapError {
    #[error("invalid map geometry: {0}")]
    InvalidGeometry(String),
    #[error("point ({:.3}, {:.3}, {:.3}) lies outside the map bounds", .0.x, .0.y, .0.z)]
    OutOfBounds(Vec3),
    #[error("esdf undefined: the map contains no occupied voxel")]
    EsdfUndefined,
    #[error("map file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Occupancy {
    Unknown = 0,
    Free = 1,
    Occupied = 2,
}

/// Snapshot of a single voxel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelState {
    pub occupancy: Occupancy,
    pub seen_by_camera: bool,
    /// Closest camera observation distance; present iff `seen_by_camera`.
    pub observation_distance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OccupancyCounts {
    pub unknown: usize,
    pub free: usize,
    pub occupied: usize,
}

impl OccupancyCounts {
    pub fn total(&self) -> usize {
        self.unknown + self.free + self.occupied
    }
}

/// One return of a depth scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanReturn {
    /// Surface point hit by the ray.
    Hit(Vec3),
    /// No return within range; carries the ray direction.
    Miss(Vec3),
}

/// What a depth scan changed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanDelta {
    pub newly_free: usize,
    pub newly_occupied: Vec<usize>,
    /// Rays dropped for non-finite or out-of-range input.
    pub skipped_rays: usize,
}

impl ScanDelta {
    pub fn is_empty(&self) -> bool {
        self.newly_free == 0 && self.newly_occupied.is_empty() && self.skipped_rays == 0
    }
}

/// Distance-field sample at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsdfSample {
    pub distance: f64,
    /// Unit vector pointing away from the nearest occupied voxel, or zero.
    pub gradient: Vec3,
    pub nearest: usize,
}

/// Coverage figures over a region of the map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageStats {
    /// Explored volume `(free + occupied) * r^3`.
    pub explored_volume: f64,
    /// Mapped surface area `surface voxels * r^2`.
    pub surface_area: f64,
    /// Surface area seen by the camera.
    pub inspected_area: f64,
    /// Percentage of surface voxels seen; `None` when there is no surface.
    pub lambda_c: Option<f64>,
    pub surface_voxels: usize,
    pub seen_surface_voxels: usize,
    /// Surface voxels not yet seen by the camera.
    pub unseen_occupied: usize,
}

/// Formats a coverage percentage with two decimals, `n/a` when undefined.
pub fn format_lambda(lambda: Option<f64>) -> String {
    match lambda {
        Some(v) => format!("{v:.2}"),
        None => "n/a".to_string(),
    }
}

#[derive(Clone)]
pub struct VoxelMap {
    grid: GridGeometry,
    occupancy: Vec<Occupancy>,
    /// Closest observation distance, `INFINITY` when never seen.
    observation: Vec<f64>,
    esdf: Esdf,
    counts: OccupancyCounts,
}

impl fmt::Debug for VoxelMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VoxelMap")
            .field("grid", &self.grid)
            .field("counts", &self.counts)
            .finish()
    }
}

impl VoxelMap {
    /// Creates an all-unknown map covering `bounds`. The upper corner is
    /// extended to a whole number of voxels.
    pub fn new(bounds: Aabb, resolution: f64) -> Result<Self, MapError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MapError::InvalidGeometry(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        let ext = bounds.extents();
        let mut dims = [0usize; 3];
        for a in 0..3 {
            if !(ext[a] > 0.0 && ext[a].is_finite()) {
                return Err(MapError::InvalidGeometry(format!(
                    "bounds must have positive finite extent on every axis, got {ext:?}"
                )));
            }
            dims[a] = ((ext[a] / resolution) - 1e-9).ceil().max(1.0) as usize;
        }
        let grid = GridGeometry {
            min: bounds.min,
            resolution,
            dims,
        };
        let len = grid.len();
        Ok(Self {
            grid,
            occupancy: vec![Occupancy::Unknown; len],
            observation: vec![f64::INFINITY; len],
            esdf: Esdf::new(len),
            counts: OccupancyCounts {
                unknown: len,
                free: 0,
                occupied: 0,
            },
        })
    }

    pub fn grid(&self) -> &GridGeometry {
        &self.grid
    }

    pub fn resolution(&self) -> f64 {
        self.grid.resolution
    }

    pub fn bounds(&self) -> Aabb {
        self.grid.bounds()
    }

    pub fn len(&self) -> usize {
        self.occupancy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancy.is_empty()
    }

    pub fn counts(&self) -> OccupancyCounts {
        self.counts
    }

    pub fn index_of(&self, p: &Vec3) -> Option<usize> {
        self.grid.index_of(p)
    }

    pub fn center(&self, idx: usize) -> Vec3 {
        self.grid.center(idx)
    }

    #[inline]
    pub fn occupancy(&self, idx: usize) -> Occupancy {
        self.occupancy[idx]
    }

    pub fn occupancy_at(&self, p: &Vec3) -> Option<Occupancy> {
        self.index_of(p).map(|i| self.occupancy[i])
    }

    #[inline]
    pub fn is_seen(&self, idx: usize) -> bool {
        self.observation[idx].is_finite()
    }

    pub fn state(&self, idx: usize) -> VoxelState {
        let obs = self.observation[idx];
        VoxelState {
            occupancy: self.occupancy[idx],
            seen_by_camera: obs.is_finite(),
            observation_distance: obs.is_finite().then_some(obs),
        }
    }

    /// Occupied voxel with at least one free face neighbour.
    pub fn is_surface(&self, idx: usize) -> bool {
        if self.occupancy[idx] != Occupancy::Occupied {
            return false;
        }
        let c = self.grid.coords(idx);
        FACE_NEIGHBORS.iter().any(|n| {
            self.grid
                .checked_index([c[0] as i64 + n[0], c[1] as i64 + n[1], c[2] as i64 + n[2]])
                .is_some_and(|j| self.occupancy[j] == Occupancy::Free)
        })
    }

    pub fn set_occupancy(&mut self, idx: usize, state: Occupancy) {
        let old = self.occupancy[idx];
        if old == state {
            return;
        }
        match old {
            Occupancy::Unknown => self.counts.unknown -= 1,
            Occupancy::Free => self.counts.free -= 1,
            Occupancy::Occupied => self.counts.occupied -= 1,
        }
        match state {
            Occupancy::Unknown => self.counts.unknown += 1,
            Occupancy::Free => self.counts.free += 1,
            Occupancy::Occupied => self.counts.occupied += 1,
        }
        self.occupancy[idx] = state;
        if old == Occupancy::Occupied {
            // Only fixtures demote occupied cells; rebuild from scratch.
            self.recompute_esdf();
        } else if state == Occupancy::Occupied {
            self.esdf.insert(&self.grid, &[idx]);
        }
    }

    /// Records a camera observation, keeping the closest distance.
    pub(crate) fn observe(&mut self, idx: usize, distance: f64) -> bool {
        let fresh = !self.observation[idx].is_finite();
        if distance < self.observation[idx] {
            self.observation[idx] = distance;
        }
        fresh
    }

    /// Marks every unknown voxel whose center is in `region` as free.
    pub fn clear_unknown_in(&mut self, region: &Aabb) -> usize {
        let Some((lo, hi)) = self.grid.cells_with_center_in(region) else {
            return 0;
        };
        let mut n = 0;
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    let idx = self.grid.index([i, j, k]);
                    if self.occupancy[idx] == Occupancy::Unknown {
                        self.set_occupancy(idx, Occupancy::Free);
                        n += 1;
                    }
                }
            }
        }
        n
    }

    /// Counts unknown voxels with centers in `region`.
    pub fn unknown_in(&self, region: &Aabb) -> usize {
        let Some((lo, hi)) = self.grid.cells_with_center_in(region) else {
            return 0;
        };
        let mut n = 0;
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                let base = self.grid.index([i, j, 0]);
                n += self.occupancy[base + lo[2]..=base + hi[2]]
                    .iter()
                    .filter(|&&o| o == Occupancy::Unknown)
                    .count();
            }
        }
        n
    }

    /// Integrates one depth scan taken from `pose`.
    ///
    /// Terminal voxels become occupied first; free space is then carved along
    /// each ray without ever demoting an occupied voxel.
    pub fn integrate_depth_scan(
        &mut self,
        pose: &Configuration,
        returns: &[ScanReturn],
        max_range: f64,
    ) -> Result<ScanDelta, MapError> {
        let origin = pose.position();
        if self.index_of(&origin).is_none() {
            return Err(MapError::OutOfBounds(origin));
        }
        let mut delta = ScanDelta::default();
        let mut rays = Vec::with_capacity(returns.len());
        for ret in returns {
            match *ret {
                ScanReturn::Hit(p) => {
                    let v = p - origin;
                    let d = v.norm();
                    if !d.is_finite() || d <= 1e-12 || d > max_range * (1.0 + 1e-9) {
                        delta.skipped_rays += 1;
                        continue;
                    }
                    if let Some(idx) = self.index_of(&p) {
                        if self.occupancy[idx] != Occupancy::Occupied {
                            self.set_occupancy_raw(idx, Occupancy::Occupied);
                            delta.newly_occupied.push(idx);
                        }
                    }
                    rays.push((v / d, d, true));
                }
                ScanReturn::Miss(dir) => {
                    let n = dir.norm();
                    if !n.is_finite() || n <= 1e-12 {
                        delta.skipped_rays += 1;
                        continue;
                    }
                    rays.push((dir / n, max_range, false));
                }
            }
        }
        for (dir, len, hit) in rays {
            // Stop just short of a hit so the terminal voxel is not carved.
            let limit = if hit { len - 1e-9 } else { len };
            let occupancy = &mut self.occupancy;
            let counts = &mut self.counts;
            traverse(&self.grid, origin, dir, limit, |idx, _, t| {
                if t >= limit {
                    return false;
                }
                if occupancy[idx] == Occupancy::Unknown {
                    occupancy[idx] = Occupancy::Free;
                    counts.unknown -= 1;
                    counts.free += 1;
                    delta.newly_free += 1;
                }
                true
            });
        }
        self.esdf.insert(&self.grid, &delta.newly_occupied);
        Ok(delta)
    }

    pub(crate) fn set_occupancy_raw(&mut self, idx: usize, state: Occupancy) {
        let old = self.occupancy[idx];
        match old {
            Occupancy::Unknown => self.counts.unknown -= 1,
            Occupancy::Free => self.counts.free -= 1,
            Occupancy::Occupied => self.counts.occupied -= 1,
        }
        match state {
            Occupancy::Unknown => self.counts.unknown += 1,
            Occupancy::Free => self.counts.free += 1,
            Occupancy::Occupied => self.counts.occupied += 1,
        }
        self.occupancy[idx] = state;
    }

    /// Rebuilds the distance field from scratch.
    pub fn recompute_esdf(&mut self) {
        self.esdf.clear();
        let sites: Vec<usize> = (0..self.len())
            .filter(|&i| self.occupancy[i] == Occupancy::Occupied)
            .collect();
        self.esdf.insert(&self.grid, &sites);
    }

    /// Distance from the center of `idx` to its nearest occupied voxel center.
    pub fn esdf_cell_distance(&self, idx: usize) -> Option<f64> {
        self.esdf
            .dist2(idx)
            .map(|d2| (d2 as f64).sqrt() * self.grid.resolution)
    }

    pub fn esdf_query(&self, point: &Vec3) -> Result<EsdfSample, MapError> {
        let idx = self.index_of(point).ok_or(MapError::OutOfBounds(*point))?;
        let site = self.esdf.site(idx).ok_or(MapError::EsdfUndefined)?;
        let v = point - self.center(site);
        let distance = v.norm();
        let gradient = if distance > 1e-12 {
            v / distance
        } else {
            Vec3::zeros()
        };
        Ok(EsdfSample {
            distance,
            gradient,
            nearest: site,
        })
    }

    /// True if some exposed face of occupied voxel `idx` is in front of
    /// `origin` and the segment from `origin` to that face's center crosses
    /// only free voxels. Unknown voxels occlude.
    pub fn surface_visible_from(&self, origin: &Vec3, idx: usize) -> bool {
        let c = self.grid.coords(idx);
        let center = self.grid.center_of(c);
        let half = 0.5 * self.grid.resolution;
        for n in FACE_NEIGHBORS.iter() {
            let Some(nb) = self.grid.checked_index([
                c[0] as i64 + n[0],
                c[1] as i64 + n[1],
                c[2] as i64 + n[2],
            ]) else {
                continue;
            };
            if self.occupancy[nb] != Occupancy::Free {
                continue;
            }
            let normal = Vec3::new(n[0] as f64, n[1] as f64, n[2] as f64);
            let face = center + normal * half;
            let to_origin = origin - face;
            if to_origin.dot(&normal) <= 1e-12 {
                continue;
            }
            let len = to_origin.norm();
            let dir = -to_origin / len;
            let limit = len - 1e-9;
            let mut clear = true;
            traverse(&self.grid, *origin, dir, limit, |cell, _, t| {
                if t >= limit {
                    return false;
                }
                if self.occupancy[cell] != Occupancy::Free {
                    clear = false;
                    return false;
                }
                true
            });
            if clear {
                return true;
            }
        }
        false
    }

    /// Indices of occupied voxels the camera at `pose` sees: voxel center in
    /// the frustum and within range, plus an unobstructed exposed face.
    pub fn camera_visible_voxels(&self, pose: &Configuration, camera: &SensorModel) -> Vec<usize> {
        let origin = pose.position();
        let range = camera.max_range;
        let reach = Aabb::new(
            origin - Vec3::repeat(range),
            origin + Vec3::repeat(range),
        );
        let Some((lo, hi)) = self.grid.cells_with_center_in(&reach) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                let base = self.grid.index([i, j, 0]);
                for k in lo[2]..=hi[2] {
                    let idx = base + k;
                    if self.occupancy[idx] != Occupancy::Occupied {
                        continue;
                    }
                    let v = self.grid.center_of([i, j, k]) - origin;
                    if !camera.contains_body(&pose.to_body(v)) {
                        continue;
                    }
                    if self.surface_visible_from(&origin, idx) {
                        out.push(idx);
                    }
                }
            }
        }
        out
    }

    /// Marks every camera-visible occupied voxel as seen and returns how many
    /// were seen for the first time.
    pub fn mark_camera_coverage(
        &mut self,
        pose: &Configuration,
        camera: &SensorModel,
    ) -> Result<usize, MapError> {
        let origin = pose.position();
        if self.index_of(&origin).is_none() {
            return Err(MapError::OutOfBounds(origin));
        }
        let visible = self.camera_visible_voxels(pose, camera);
        let mut fresh = 0;
        for idx in visible {
            let d = (self.center(idx) - origin).norm();
            if self.observe(idx, d) {
                fresh += 1;
            }
        }
        Ok(fresh)
    }

    /// Coverage figures over the voxels whose centers lie in `region`.
    pub fn coverage_stats(&self, region: &Aabb) -> CoverageStats {
        let mut explored = 0usize;
        let mut surface = 0usize;
        let mut seen = 0usize;
        if let Some((lo, hi)) = self.grid.cells_with_center_in(region) {
            for i in lo[0]..=hi[0] {
                for j in lo[1]..=hi[1] {
                    for k in lo[2]..=hi[2] {
                        let idx = self.grid.index([i, j, k]);
                        match self.occupancy[idx] {
                            Occupancy::Unknown => {}
                            Occupancy::Free => explored += 1,
                            Occupancy::Occupied => {
                                explored += 1;
                                if self.is_surface(idx) {
                                    surface += 1;
                                    if self.is_seen(idx) {
                                        seen += 1;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        let r = self.grid.resolution;
        CoverageStats {
            explored_volume: explored as f64 * r * r * r,
            surface_area: surface as f64 * r * r,
            inspected_area: seen as f64 * r * r,
            lambda_c: (surface > 0).then(|| 100.0 * seen as f64 / surface as f64),
            surface_voxels: surface,
            seen_surface_voxels: seen,
            unseen_occupied: surface - seen,
        }
    }

    pub fn seen_count(&self) -> usize {
        self.observation.iter().filter(|d| d.is_finite()).count()
    }
}
