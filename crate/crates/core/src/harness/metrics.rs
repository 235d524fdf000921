use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::HarnessError;
use crate::gvi::generate_viewpoints;
use crate::mission::{MissionState, PlannerParams};
use crate::sensors::SensorModel;
use crate::sim::{ground_truth_stats, TankWorld};
use crate::voxel_map::{format_lambda, VoxelMap};

/// Mission summary. The text form is byte-stable for a given run.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub compartments: usize,
    pub visited: usize,
    pub completed: bool,
    pub budget_exceeded: bool,
    /// m^3.
    pub explored_volume: f64,
    /// m^2.
    pub surface_area: f64,
    /// m^2.
    pub inspected_area: f64,
    /// Percent of mapped surface voxels seen by the camera.
    pub lambda_c: Option<f64>,
    pub delta_max: f64,
    /// Simulated seconds.
    pub duration: f64,
    pub path_length: f64,
}

impl Metrics {
    pub fn from_mission(state: &MissionState, map: &VoxelMap, compartments: usize, params: &PlannerParams) -> Self {
        let stats = map.coverage_stats(&map.bounds());
        Self {
            compartments,
            visited: state.visited.len(),
            completed: state.succeeded(),
            budget_exceeded: state.budget_exceeded,
            explored_volume: stats.explored_volume,
            surface_area: stats.surface_area,
            inspected_area: stats.inspected_area,
            lambda_c: stats.lambda_c,
            delta_max: params.gvi.delta_max,
            duration: state.elapsed,
            path_length: state.path_length,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "compartments {}", self.compartments);
        let _ = writeln!(s, "visited {}", self.visited);
        let _ = writeln!(s, "completed {}", self.completed);
        let _ = writeln!(s, "budget_exceeded {}", self.budget_exceeded);
        let _ = writeln!(s, "explored_volume_m3 {:.3}", self.explored_volume);
        let _ = writeln!(s, "surface_area_m2 {:.3}", self.surface_area);
        let _ = writeln!(s, "inspected_area_m2 {:.3}", self.inspected_area);
        let _ = writeln!(s, "lambda_c_pct {}", format_lambda(self.lambda_c));
        let _ = writeln!(s, "delta_max_m {:.3}", self.delta_max);
        let _ = writeln!(s, "duration_s {:.3}", self.duration);
        let _ = writeln!(s, "path_length_m {:.3}", self.path_length);
        s
    }

    pub fn parse(text: &str, file: &str) -> Result<Self, HarnessError> {
        let mut m = Metrics {
            compartments: 0,
            visited: 0,
            completed: false,
            budget_exceeded: false,
            explored_volume: 0.0,
            surface_area: 0.0,
            inspected_area: 0.0,
            lambda_c: None,
            delta_max: 0.0,
            duration: 0.0,
            path_length: 0.0,
        };
        let mut keys = BTreeSet::new();
        for (n, line) in text.lines().enumerate() {
            let err = |message: String| HarnessError::Parse {
                file: file.to_string(),
                line: n + 1,
                message,
            };
            let (key, value) = line.split_once(' ').ok_or_else(|| err(format!("expected `key value`, got {line:?}")))?;
            let float = || value.parse::<f64>().map_err(|e| err(format!("{key}: {e}")));
            let int = || value.parse::<usize>().map_err(|e| err(format!("{key}: {e}")));
            let flag = || value.parse::<bool>().map_err(|e| err(format!("{key}: {e}")));
            match key {
                "compartments" => m.compartments = int()?,
                "visited" => m.visited = int()?,
                "completed" => m.completed = flag()?,
                "budget_exceeded" => m.budget_exceeded = flag()?,
                "explored_volume_m3" => m.explored_volume = float()?,
                "surface_area_m2" => m.surface_area = float()?,
                "inspected_area_m2" => m.inspected_area = float()?,
                "lambda_c_pct" => m.lambda_c = if value == "n/a" { None } else { Some(float()?) },
                "delta_max_m" => m.delta_max = float()?,
                "duration_s" => m.duration = float()?,
                "path_length_m" => m.path_length = float()?,
                other => return Err(err(format!("unknown key {other:?}"))),
            }
            keys.insert(key.to_string());
        }
        if keys.len() != 11 {
            return Err(HarnessError::Parse {
                file: file.to_string(),
                line: text.lines().count(),
                message: format!("expected 11 metrics, found {}", keys.len()),
            });
        }
        Ok(m)
    }
}

/// Coverage figures of a map export (no mission context).
pub fn map_metrics(map: &VoxelMap) -> String {
    let s = map.coverage_stats(&map.bounds());
    let mut out = String::new();
    let _ = writeln!(out, "explored_volume_m3 {:.3}", s.explored_volume);
    let _ = writeln!(out, "surface_area_m2 {:.3}", s.surface_area);
    let _ = writeln!(out, "inspected_area_m2 {:.3}", s.inspected_area);
    let _ = writeln!(out, "lambda_c_pct {}", format_lambda(s.lambda_c));
    let _ = writeln!(out, "surface_voxels {}", s.surface_voxels);
    let _ = writeln!(out, "seen_surface_voxels {}", s.seen_surface_voxels);
    out
}

/// Coverage over the surface the robot can inspect at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachableCoverage {
    pub truth_surface: usize,
    /// True surface voxels visible from some admissible viewpoint.
    pub reachable: usize,
    /// Reachable voxels the mission's camera saw.
    pub seen: usize,
}

impl ReachableCoverage {
    pub fn percent(&self) -> Option<f64> {
        (self.reachable > 0).then(|| 100.0 * self.seen as f64 / self.reachable as f64)
    }
}

/// A true surface voxel counts as reachable when the camera, at any
/// heading, sees it from an inspection-lattice viewpoint that is admissible
/// on the ground-truth map (collision-free, inside the distance band).
pub fn reachable_coverage(world: &TankWorld, map: &VoxelMap, params: &PlannerParams) -> Result<ReachableCoverage, HarnessError> {
    let truth = ground_truth_stats(world, params.resolution)?;
    let camera = SensorModel {
        fov_h: 360.0,
        ..params.camera
    };
    let mut reachable = BTreeSet::new();
    for c in &world.compartments {
        let region = c.padded_box(params.gvi.box_pad);
        for v in generate_viewpoints(&truth.map, &region, &params.gvi, &params.robot) {
            reachable.extend(truth.map.camera_visible_voxels(&v.config, &camera));
        }
    }
    let seen = reachable.iter().filter(|&&i| map.is_seen(i)).count();
    Ok(ReachableCoverage {
        truth_surface: truth.surface.len(),
        reachable: reachable.len(),
        seen,
    })
}
