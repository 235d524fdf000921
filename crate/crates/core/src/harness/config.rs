use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::mission::{MissionSpec, PlannerParams};
use crate::sim::{generate_tank, TankParams, TankWorld};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionSettings {
    pub start_compartment: usize,
    /// Simulated seconds before the robot is sent home.
    pub time_budget: f64,
    /// Wall-clock cap in seconds for the whole run; zero disables it. It only
    /// guards against runaway runs and never affects a completed result.
    pub wall_time_cap: f64,
}

impl Default for MissionSettings {
    fn default() -> Self {
        Self {
            start_compartment: 0,
            time_budget: 7200.0,
            wall_time_cap: 0.0,
        }
    }
}

/// Everything a run needs. Serializes to TOML with every default spelled
/// out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Scenario file holding `TankParams`; replaces `scenario` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario_file: Option<PathBuf>,
    pub scenario: TankParams,
    pub mission: MissionSettings,
    pub planner: PlannerParams,
}

fn field_error(field: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Deserializes TOML, reporting the failing field path.
pub(crate) fn from_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, HarnessError> {
    let de = toml::Deserializer::parse(text).map_err(|e| field_error("<document>", e.message().to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "<document>".to_string() } else { path };
        field_error(&field, e.inner().message().to_string())
    })
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        from_toml(text)
    }

    /// Reads a config; a relative `scenario_file` is resolved against the
    /// config's directory and inlined.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.resolve(path.parent().unwrap_or(Path::new(".")))?;
        Ok(cfg)
    }

    /// Inlines `scenario_file`.
    pub fn resolve(&mut self, base: &Path) -> Result<(), HarnessError> {
        if let Some(file) = self.scenario_file.take() {
            let full = if file.is_absolute() { file } else { base.join(file) };
            let text = std::fs::read_to_string(&full).map_err(HarnessError::io(&full))?;
            self.scenario = from_toml(&text).map_err(|e| match e {
                HarnessError::Config { field, message } => field_error(&format!("scenario_file.{field}"), message),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let s = &self.scenario;
        if s.rows == 0 {
            return Err(field_error("scenario.rows", "must be positive"));
        }
        if s.cols == 0 {
            return Err(field_error("scenario.cols", "must be positive"));
        }
        if !(s.comp_dims.x > 0.0 && s.comp_dims.y > 0.0 && s.comp_dims.z > 0.0) {
            return Err(field_error("scenario.comp_dims", "must be positive"));
        }
        for (name, v) in [
            ("scenario.manhole_height", s.manhole_height),
            ("scenario.manhole_width", s.manhole_width),
            ("scenario.wall_thickness", s.wall_thickness),
            ("scenario.resolution", s.resolution),
        ] {
            if !(v > 0.0) {
                return Err(field_error(name, format!("must be positive, got {v}")));
            }
        }
        if !(s.manhole_jitter >= 0.0) {
            return Err(field_error("scenario.manhole_jitter", "must be non-negative"));
        }
        let m = &self.mission;
        if m.start_compartment >= s.rows * s.cols {
            return Err(field_error("mission.start_compartment", "does not exist"));
        }
        if !(m.time_budget > 0.0) {
            return Err(field_error("mission.time_budget", "must be positive"));
        }
        if !(m.wall_time_cap >= 0.0) {
            return Err(field_error("mission.wall_time_cap", "must be non-negative"));
        }
        self.planner
            .validate()
            .map_err(|(field, message)| field_error(&format!("planner.{field}"), message))
    }

    pub fn world(&self) -> Result<TankWorld, HarnessError> {
        Ok(generate_tank(&self.scenario)?)
    }

    pub fn mission_spec(&self, world: &TankWorld) -> MissionSpec {
        world.mission_spec(self.planner, self.mission.start_compartment, self.mission.time_budget)
    }
}
