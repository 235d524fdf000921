//! Frustum sensor models, ray-sampled information gains and collision checks.

use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Configuration, Vec3};
use crate::voxel_map::{traverse, Occupancy, VoxelMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Depth,
    Camera,
}

/// Yaw-mounted frustum sensor. Pitch and roll are fixed at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub kind: SensorKind,
    /// Horizontal field of view, degrees.
    pub fov_h: f64,
    /// Vertical field of view, degrees.
    pub fov_v: f64,
    pub max_range: f64,
    /// Angular step of the gain-estimation ray grid, degrees.
    pub ray_resolution: f64,
}

impl SensorModel {
    /// 360 x 90 degree LiDAR-like depth sensor.
    pub fn default_depth() -> Self {
        Self {
            kind: SensorKind::Depth,
            fov_h: 360.0,
            fov_v: 90.0,
            max_range: 10.0,
            ray_resolution: 3.0,
        }
    }

    /// 85 x 64 degree inspection camera.
    pub fn default_camera() -> Self {
        Self {
            kind: SensorKind::Camera,
            fov_h: 85.0,
            fov_v: 64.0,
            max_range: 3.0,
            ray_resolution: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.fov_h > 0.0 && self.fov_h <= 360.0) {
            return Err(format!("fov_h must be in (0, 360], got {}", self.fov_h));
        }
        if !(self.fov_v > 0.0 && self.fov_v < 180.0) {
            return Err(format!("fov_v must be in (0, 180), got {}", self.fov_v));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(format!("max_range must be positive, got {}", self.max_range));
        }
        if !(self.ray_resolution > 0.0 && self.ray_resolution <= 90.0) {
            return Err(format!(
                "ray_resolution must be in (0, 90], got {}",
                self.ray_resolution
            ));
        }
        Ok(())
    }

    pub fn with_range(mut self, max_range: f64) -> Self {
        self.max_range = max_range;
        self
    }

    pub fn with_fov(mut self, fov_h: f64, fov_v: f64) -> Self {
        self.fov_h = fov_h;
        self.fov_v = fov_v;
        self
    }

    /// Whether a body-frame vector lies inside the frustum and range.
    #[inline]
    pub fn contains_body(&self, v: &Vec3) -> bool {
        let planar2 = v.x * v.x + v.y * v.y;
        let d2 = planar2 + v.z * v.z;
        if d2 <= 0.0 || d2 > self.max_range * self.max_range {
            return false;
        }
        if self.fov_h < 360.0 {
            let az = v.y.atan2(v.x).to_degrees();
            if az.abs() > 0.5 * self.fov_h + 1e-9 {
                return false;
            }
        }
        let el = v.z.atan2(planar2.sqrt()).to_degrees();
        el.abs() <= 0.5 * self.fov_v + 1e-9
    }

    /// Body-frame unit directions of the gain ray grid. The grid is anchored
    /// at the optical axis so that narrowing the field of view only removes
    /// rays.
    pub fn ray_directions(&self) -> Vec<Vec3> {
        let res = self.ray_resolution;
        let steps = |fov: f64| -> Vec<f64> {
            let n = ((0.5 * fov) / res + 1e-9).floor() as i64;
            (-n..=n).map(|k| k as f64 * res).collect()
        };
        let azimuths: Vec<f64> = if self.fov_h >= 360.0 {
            let n = (180.0 / res - 1e-9).floor() as i64;
            (-n..=n)
                .map(|k| k as f64 * res)
                .filter(|a| *a > -180.0)
                .chain(((180.0 / res).fract() < 1e-9).then_some(180.0))
                .collect()
        } else {
            steps(self.fov_h)
        };
        let elevations = steps(self.fov_v);
        let mut dirs = Vec::with_capacity(azimuths.len() * elevations.len());
        for &el in &elevations {
            let (se, ce) = el.to_radians().sin_cos();
            for &az in &azimuths {
                let (sa, ca) = az.to_radians().sin_cos();
                dirs.push(Vec3::new(ca * ce, sa * ce, se));
            }
        }
        dirs
    }
}

/// Robot bounding box extents (x, y, z) in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotBox {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for RobotBox {
    fn default() -> Self {
        Self {
            x: 0.4,
            y: 0.4,
            z: 0.3,
        }
    }
}

impl RobotBox {
    pub fn extents(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn at(&self, p: &Vec3) -> Aabb {
        Aabb::from_center_extents(*p, self.extents())
    }
}

/// True iff every voxel whose center lies inside the robot box at `config`
/// is free. Unknown and out-of-map voxels count as obstacles.
pub fn collision_check(map: &VoxelMap, config: &Configuration, robot: &RobotBox) -> bool {
    point_is_free(map, &config.position(), robot)
}

pub fn point_is_free(map: &VoxelMap, p: &Vec3, robot: &RobotBox) -> bool {
    let bx = robot.at(p);
    if !map.bounds().contains(&bx.min) || !map.bounds().contains(&bx.max) {
        return false;
    }
    let grid = map.grid();
    let Some((lo, hi)) = grid.cells_with_center_in(&bx) else {
        return map.occupancy_at(p) == Some(Occupancy::Free);
    };
    for i in lo[0]..=hi[0] {
        for j in lo[1]..=hi[1] {
            let base = grid.index([i, j, 0]);
            for k in lo[2]..=hi[2] {
                if map.occupancy(base + k) != Occupancy::Free {
                    return false;
                }
            }
        }
    }
    true
}

/// Sweeps the robot box along the straight segment `a -> b` at steps of at
/// most half a voxel.
pub fn segment_is_free(map: &VoxelMap, a: &Vec3, b: &Vec3, robot: &RobotBox) -> bool {
    let d = b - a;
    let len = d.norm();
    let step = 0.5 * map.resolution();
    let n = (len / step).ceil().max(1.0) as usize;
    (0..=n).all(|i| {
        let p = a + d * (i as f64 / n as f64);
        point_is_free(map, &p, robot)
    })
}

/// Reusable scratch for gain evaluation: a per-voxel stamp so a voxel hit by
/// several rays is counted once.
#[derive(Debug, Clone)]
pub struct GainEvaluator {
    stamp: Vec<u32>,
    epoch: u32,
}

impl GainEvaluator {
    pub fn new(map: &VoxelMap) -> Self {
        Self {
            stamp: vec![0; map.len()],
            epoch: 0,
        }
    }

    fn next_epoch(&mut self, len: usize) {
        if self.stamp.len() != len {
            self.stamp = vec![0; len];
            self.epoch = 0;
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
    }

    /// Unknown voxels a depth sensor at `config` would observe.
    ///
    /// Rays stop at the first occupied voxel, at `max_range`, or on leaving
    /// `region`. Only voxels whose centers lie in the frustum, and in
    /// `region` if given, are counted.
    pub fn volume_gain(
        &mut self,
        map: &VoxelMap,
        config: &Configuration,
        depth: &SensorModel,
        region: Option<&Aabb>,
    ) -> usize {
        self.next_epoch(map.len());
        let origin = config.position();
        let grid = *map.grid();
        let mut count = 0usize;
        for dir in depth.ray_directions() {
            let world_dir = config.to_world(dir);
            let mut entered = false;
            traverse(&grid, origin, world_dir, depth.max_range, |idx, c, _| {
                let center = grid.center_of(c);
                if let Some(r) = region {
                    if r.contains(&center) {
                        entered = true;
                    } else if entered {
                        return false;
                    }
                }
                match map.occupancy(idx) {
                    Occupancy::Occupied => false,
                    Occupancy::Free => true,
                    Occupancy::Unknown => {
                        if self.stamp[idx] != self.epoch {
                            self.stamp[idx] = self.epoch;
                            let inside = region.is_none_or(|r| r.contains(&center));
                            if inside && depth.contains_body(&config.to_body(center - origin)) {
                                count += 1;
                            }
                        }
                        true
                    }
                }
            });
        }
        count
    }

    /// Unseen occupied voxels the camera at `config` would observe, sorted.
    ///
    /// Each ray stops at the first non-free voxel; an occupied, unseen
    /// terminal voxel is kept if its center is in the frustum, it lies in
    /// `region` (if given) and it passes the exact surface-visibility test.
    pub fn visible_unseen(
        &mut self,
        map: &VoxelMap,
        config: &Configuration,
        camera: &SensorModel,
        region: Option<&Aabb>,
    ) -> Vec<usize> {
        self.next_epoch(map.len());
        let origin = config.position();
        let grid = *map.grid();
        let mut out = Vec::new();
        for dir in camera.ray_directions() {
            let world_dir = config.to_world(dir);
            traverse(&grid, origin, world_dir, camera.max_range, |idx, c, _| {
                match map.occupancy(idx) {
                    Occupancy::Free => true,
                    Occupancy::Unknown => false,
                    Occupancy::Occupied => {
                        if self.stamp[idx] != self.epoch {
                            self.stamp[idx] = self.epoch;
                            let center = grid.center_of(c);
                            if !map.is_seen(idx)
                                && region.is_none_or(|r| r.contains(&center))
                                && camera.contains_body(&config.to_body(center - origin))
                                && map.surface_visible_from(&origin, idx)
                            {
                                out.push(idx);
                            }
                        }
                        false
                    }
                }
            });
        }
        out.sort_unstable();
        out
    }

    pub fn visual_gain(
        &mut self,
        map: &VoxelMap,
        config: &Configuration,
        camera: &SensorModel,
        region: Option<&Aabb>,
    ) -> usize {
        self.visible_unseen(map, config, camera, region).len()
    }
}

/// One-shot volume gain over the whole map.
pub fn volume_gain(map: &VoxelMap, config: &Configuration, depth: &SensorModel) -> usize {
    GainEvaluator::new(map).volume_gain(map, config, depth, None)
}

/// One-shot visual gain over the whole map.
pub fn visual_gain(map: &VoxelMap, config: &Configuration, camera: &SensorModel) -> usize {
    GainEvaluator::new(map).visual_gain(map, config, camera, None)
}

#[cfg(test)]
mod tests;
