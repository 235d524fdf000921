//! Mission description: compartment priors, manholes and planner settings.

use serde::{Deserialize, Serialize};

use crate::exploration::{ExplorationParams, GlobalGraphParams};
use crate::geometry::{Aabb, Vec3};
use crate::gvi::GviParams;
use crate::sensors::{RobotBox, SensorModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Compartment {
    pub id: usize,
    pub center: Vec3,
    /// Approximate interior dimensions.
    pub dims: Vec3,
}

impl Compartment {
    /// Box of the compartment scaled by `pad` about its center.
    pub fn padded_box(&self, pad: f64) -> Aabb {
        Aabb::from_center_extents(self.center, self.dims * pad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Manhole {
    pub id: usize,
    pub center: Vec3,
    /// Unit axis pointing into the first compartment of `connects`.
    pub normal: Vec3,
    pub height: f64,
    pub width: f64,
    pub connects: (usize, usize),
}

impl Manhole {
    pub fn joins(&self, a: usize, b: usize) -> bool {
        self.connects == (a, b) || self.connects == (b, a)
    }

    /// Normal pointing into compartment `from`.
    pub fn normal_into(&self, from: usize) -> Vec3 {
        if self.connects.0 == from {
            self.normal
        } else {
            -self.normal
        }
    }
}

/// Settings shared by every planner in a mission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerParams {
    pub resolution: f64,
    pub depth: SensorModel,
    pub camera: SensorModel,
    pub robot: RobotBox,
    pub exploration: ExplorationParams,
    pub gvi: GviParams,
    pub global: GlobalGraphParams,
    /// m/s.
    pub nominal_speed: f64,
    /// Turn-rate limit, rad/s; a segment lasts as long as the slower of its
    /// translation and its heading change.
    pub max_yaw_rate: f64,
    /// Simulated depth scan angular step, degrees.
    pub scan_resolution: f64,
    /// Sensor update rate, Hz.
    pub scan_rate: f64,
    /// Gaussian range noise on simulated returns; zero disables it.
    pub range_noise: f64,
    pub tsp_restarts: usize,
    /// Distance of the manhole standoff points from the opening.
    pub manhole_standoff: f64,
    pub seed: u64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            resolution: 0.1,
            depth: SensorModel::default_depth(),
            camera: SensorModel::default_camera(),
            robot: RobotBox::default(),
            exploration: ExplorationParams::default(),
            gvi: GviParams::default(),
            global: GlobalGraphParams::default(),
            nominal_speed: 1.0,
            max_yaw_rate: 0.5,
            scan_resolution: 1.5,
            scan_rate: 10.0,
            range_noise: 0.0,
            tsp_restarts: 16,
            manhole_standoff: 0.6,
            seed: 0,
        }
    }
}

impl PlannerParams {
    /// Checks every field; errors name the offending field path.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let err = |f: &str, m: String| Err((f.to_string(), m));
        if !(self.resolution > 0.0) {
            return err("resolution", format!("must be positive, got {}", self.resolution));
        }
        if let Err(m) = self.depth.validate() {
            return err("depth", m);
        }
        if let Err(m) = self.camera.validate() {
            return err("camera", m);
        }
        let r = self.robot;
        if !(r.x > 0.0 && r.y > 0.0 && r.z > 0.0) {
            return err("robot", "extents must be positive".into());
        }
        if let Err(m) = self.exploration.validate() {
            return err("exploration", m);
        }
        if !(self.gvi.delta_min < self.gvi.delta_max) {
            return err(
                "gvi.delta_min",
                format!(
                    "must be below gvi.delta_max ({} >= {})",
                    self.gvi.delta_min, self.gvi.delta_max
                ),
            );
        }
        if let Err(m) = self.gvi.validate() {
            return err("gvi", m);
        }
        if self.gvi.delta_max > self.camera.max_range {
            return err(
                "gvi.delta_max",
                format!("must not exceed camera.max_range ({})", self.camera.max_range),
            );
        }
        if !(self.global.edge_radius > 0.0 && self.global.pose_spacing > 0.0) {
            return err("global", "edge_radius and pose_spacing must be positive".into());
        }
        if !(self.nominal_speed > 0.0) {
            return err("nominal_speed", format!("must be positive, got {}", self.nominal_speed));
        }
        if !(self.max_yaw_rate > 0.0) {
            return err("max_yaw_rate", format!("must be positive, got {}", self.max_yaw_rate));
        }
        if !(self.scan_resolution > 0.0 && self.scan_resolution <= 90.0) {
            return err("scan_resolution", format!("must be in (0, 90], got {}", self.scan_resolution));
        }
        if !(self.scan_rate > 0.0) {
            return err("scan_rate", format!("must be positive, got {}", self.scan_rate));
        }
        if !(self.range_noise >= 0.0) {
            return err("range_noise", "must be non-negative".into());
        }
        if !(self.manhole_standoff > 0.0) {
            return err("manhole_standoff", "must be positive".into());
        }
        Ok(())
    }

    /// Robot box with the cross-section shrunk by half a voxel per side, used
    /// only for manhole crossings along `normal`.
    pub fn tight_robot(&self, normal: &Vec3) -> RobotBox {
        let shrink = self.resolution;
        let along = |axis: usize| normal[axis].abs() > 0.5;
        RobotBox {
            x: if along(0) { self.robot.x } else { self.robot.x - shrink },
            y: if along(1) { self.robot.y } else { self.robot.y - shrink },
            z: if along(2) { self.robot.z } else { self.robot.z - shrink },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionSpec {
    pub compartments: Vec<Compartment>,
    pub manholes: Vec<Manhole>,
    pub start_compartment: usize,
    /// Simulated-time budget, seconds.
    pub time_budget: f64,
    pub params: PlannerParams,
}

impl MissionSpec {
    pub fn validate(&self) -> Result<(), (String, String)> {
        if self.compartments.is_empty() {
            return Err(("compartments".into(), "at least one compartment is required".into()));
        }
        for (i, c) in self.compartments.iter().enumerate() {
            if c.id != i {
                return Err((format!("compartments[{i}].id"), format!("expected {i}, got {}", c.id)));
            }
            if !(c.dims.x > 0.0 && c.dims.y > 0.0 && c.dims.z > 0.0) {
                return Err((format!("compartments[{i}].dims"), "must be positive".into()));
            }
        }
        for (i, m) in self.manholes.iter().enumerate() {
            let (a, b) = m.connects;
            if a == b || a >= self.compartments.len() || b >= self.compartments.len() {
                return Err((
                    format!("manholes[{i}].connects"),
                    format!("must join two distinct existing compartments, got ({a}, {b})"),
                ));
            }
            if (m.normal.norm() - 1.0).abs() > 1e-6 {
                return Err((format!("manholes[{i}].normal"), "must be a unit vector".into()));
            }
        }
        if self.start_compartment >= self.compartments.len() {
            return Err(("start_compartment".into(), "does not exist".into()));
        }
        if !(self.time_budget > 0.0) {
            return Err(("time_budget".into(), "must be positive".into()));
        }
        self.params.validate()
    }

    /// Manholes joining `a` and `b`.
    pub fn manholes_between(&self, a: usize, b: usize) -> impl Iterator<Item = &Manhole> {
        self.manholes.iter().filter(move |m| m.joins(a, b))
    }
}
