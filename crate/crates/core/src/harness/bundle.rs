use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::from_toml;
use super::{HarnessError, Metrics, RunConfig};
use crate::geometry::{Aabb, Configuration, Vec3};
use crate::mission::{check_transitions, Event, Mission, MissionState, Mode, SensorRig};
use crate::voxel_map::{format_lambda, write_map, VoxelMap};

pub const BUNDLE_FILES: [&str; 6] = ["config.toml", "events.log", "trace.txt", "gvi.txt", "map.txt", "metrics.txt"];

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: MissionState,
    pub metrics: Metrics,
    pub bundle: PathBuf,
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), HarnessError> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(HarnessError::io(&path))
}

/// Runs one mission and writes the artifact bundle into `dir`. The config
/// is written first so a failed run still leaves a self-describing bundle.
pub fn run_mission(config: &RunConfig, dir: &Path) -> Result<RunOutcome, HarnessError> {
    config.validate()?;
    fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
    write_file(dir, "config.toml", &config.to_toml())?;
    let world = config.world()?;
    let spec = config.mission_spec(&world);
    let compartments = spec.compartments.len();
    let mut mission = Mission::new(spec, &world)?;
    let started = Instant::now();
    let cap = config.mission.wall_time_cap;
    while mission.state().mode != Mode::Done {
        if cap > 0.0 && started.elapsed().as_secs_f64() > cap && mission.state().mode != Mode::ReturnHome {
            mission.interrupt("wall-time cap reached");
        }
        mission.step()?;
    }

    let state = mission.state().clone();
    let mut events = String::new();
    for e in &state.events {
        events.push_str(&e.to_string());
        events.push('\n');
    }
    write_file(dir, "events.log", &events)?;

    let b = mission.start_bubble();
    let mut trace = format!("B {} {} {} {} {} {}\n", b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z);
    for s in mission.trace() {
        let p = s.pose;
        trace.push_str(&format!("S {} {} {} {} {}\n", s.time, p.x, p.y, p.z, p.psi));
    }
    trace.push_str(&format!("E {}\n", mission.trace().len()));
    write_file(dir, "trace.txt", &trace)?;

    let mut gvi = String::new();
    for rec in mission.inspections() {
        gvi.push_str(&format!("R {} {}\n", rec.compartment, rec.report));
        for v in &rec.tour {
            let c = v.config;
            gvi.push_str(&format!("V {} {} {} {} {} {}\n", rec.compartment, c.x, c.y, c.z, c.psi, v.surface_distance));
        }
    }
    let tour_len: usize = mission.inspections().iter().map(|r| r.tour.len()).sum();
    gvi.push_str(&format!("E {tour_len}\n"));
    write_file(dir, "gvi.txt", &gvi)?;

    let map_path = dir.join("map.txt");
    let file = fs::File::create(&map_path).map_err(HarnessError::io(&map_path))?;
    let mut w = BufWriter::new(file);
    write_map(mission.map(), &mut w, false).map_err(HarnessError::io(&map_path))?;
    w.flush().map_err(HarnessError::io(&map_path))?;

    let metrics = Metrics::from_mission(&state, mission.map(), compartments, &config.planner);
    write_file(dir, "metrics.txt", &metrics.to_text())?;
    Ok(RunOutcome {
        state,
        metrics,
        bundle: dir.to_path_buf(),
    })
}

/// A GVI tour viewpoint outside the admissible distance band.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub compartment: usize,
    pub position: Vec3,
    /// `None` when the distance is undefined or the point is off the map.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub samples: usize,
    pub lambda_logged: Option<f64>,
    pub lambda_replayed: Option<f64>,
    pub lambda_matches: bool,
    pub viewpoints_checked: usize,
    pub violations: Vec<Violation>,
    pub transitions: Result<(), String>,
    /// Admissible band `[delta_min, delta_max + r*sqrt(3)]`.
    pub band: (f64, f64),
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.lambda_matches && self.violations.is_empty() && self.transitions.is_ok()
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples {}", self.samples)?;
        writeln!(
            f,
            "lambda_c logged {} replayed {} {}",
            format_lambda(self.lambda_logged),
            format_lambda(self.lambda_replayed),
            if self.lambda_matches { "ok" } else { "MISMATCH" }
        )?;
        writeln!(
            f,
            "distance band [{:.3}, {:.3}] viewpoints {} violations {}",
            self.band.0,
            self.band.1,
            self.viewpoints_checked,
            self.violations.len()
        )?;
        for v in &self.violations {
            let d = v.distance.map_or("undefined".to_string(), |d| format!("{d:.3}"));
            writeln!(
                f,
                "  compartment {} at ({:.3}, {:.3}, {:.3}) distance {}",
                v.compartment, v.position.x, v.position.y, v.position.z, d
            )?;
        }
        match &self.transitions {
            Ok(()) => writeln!(f, "transitions ok")?,
            Err(e) => writeln!(f, "transitions REJECTED: {e}")?,
        }
        write!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

fn read(dir: &Path, name: &str) -> Result<String, HarnessError> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(HarnessError::io(&path))
}

fn parse_fields(file: &str, line_no: usize, tag: &str, rest: &str, n: usize) -> Result<Vec<f64>, HarnessError> {
    let err = |message: String| HarnessError::Parse {
        file: file.to_string(),
        line: line_no,
        message,
    };
    let vals: Vec<f64> = rest
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| err(format!("{tag} record: {e}"))))
        .collect::<Result<_, _>>()?;
    if vals.len() != n {
        return Err(err(format!("{tag} record needs {n} numbers, found {}", vals.len())));
    }
    Ok(vals)
}

/// Checks the `E count` trailer that closes a complete artifact file.
fn check_end(file: &str, end: Option<(usize, usize)>, records: usize, lines: usize) -> Result<(), HarnessError> {
    match end {
        Some((_, n)) if n == records => Ok(()),
        Some((line, n)) => Err(HarnessError::Parse {
            file: file.into(),
            line,
            message: format!("end record announces {n} records, found {records}"),
        }),
        None => Err(HarnessError::Parse {
            file: file.into(),
            line: lines,
            message: "missing end record; the file is truncated".into(),
        }),
    }
}

fn parse_end(file: &str, line_no: usize, rest: &str, seen: &Option<(usize, usize)>) -> Result<(usize, usize), HarnessError> {
    let err = |message: String| HarnessError::Parse {
        file: file.into(),
        line: line_no,
        message,
    };
    if seen.is_some() {
        return Err(err("duplicate end record".into()));
    }
    let n = rest.trim().parse::<usize>().map_err(|e| err(format!("E record: {e}")))?;
    Ok((line_no, n))
}

/// Rebuilds the map by replaying the logged trajectory against the
/// scenario, then checks coverage, the inspection distance band and the
/// mode log.
pub fn replay_and_verify(dir: &Path) -> Result<VerifyReport, HarnessError> {
    let config: RunConfig = from_toml(&read(dir, "config.toml")?)?;
    config.validate()?;
    let p = config.planner;
    let world = config.world()?;

    let trace = read(dir, "trace.txt")?;
    let mut bubble = None;
    let mut poses = Vec::new();
    let mut end = None;
    for (n, line) in trace.lines().enumerate() {
        let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
        if end.is_some() {
            return Err(HarnessError::Parse {
                file: "trace.txt".into(),
                line: n + 1,
                message: "record after end record".into(),
            });
        }
        match tag {
            "E" => end = Some(parse_end("trace.txt", n + 1, rest, &end)?),
            "B" => {
                let v = parse_fields("trace.txt", n + 1, "B", rest, 6)?;
                bubble = Some(Aabb::new(Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5])));
            }
            "S" => {
                let v = parse_fields("trace.txt", n + 1, "S", rest, 5)?;
                // Struct literal: the logged yaw is already wrapped and must not be
                // rounded again.
                poses.push(Configuration {
                    x: v[1],
                    y: v[2],
                    z: v[3],
                    psi: v[4],
                });
            }
            other => {
                return Err(HarnessError::Parse {
                    file: "trace.txt".into(),
                    line: n + 1,
                    message: format!("unknown record {other:?}"),
                })
            }
        }
    }
    check_end("trace.txt", end, poses.len(), trace.lines().count())?;
    let bubble = bubble.ok_or_else(|| HarnessError::Parse {
        file: "trace.txt".into(),
        line: 1,
        message: "missing start bubble record".into(),
    })?;

    let mut map = VoxelMap::new(world.bounds, p.resolution)?;
    map.clear_unknown_in(&bubble);
    let mut rig = SensorRig::new(&p);
    for pose in &poses {
        rig.sense(&world, &mut map, pose)?;
    }

    let logged = Metrics::parse(&read(dir, "metrics.txt")?, "metrics.txt")?;
    let replayed = map.coverage_stats(&map.bounds()).lambda_c;
    let lambda_matches = match (logged.lambda_c, replayed) {
        (None, None) => true,
        (Some(a), Some(b)) => (a - b).abs() <= 1e-3 * b.abs().max(1e-9),
        _ => false,
    };

    let band = (p.gvi.delta_min, p.gvi.delta_max + p.resolution * 3f64.sqrt());
    let mut violations = Vec::new();
    let mut checked = 0;
    let gvi = read(dir, "gvi.txt")?;
    let mut end = None;
    for (n, line) in gvi.lines().enumerate() {
        let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
        match tag {
            "R" => continue,
            "E" => end = Some(parse_end("gvi.txt", n + 1, rest, &end)?),
            "V" => {
                let v = parse_fields("gvi.txt", n + 1, "V", rest, 6)?;
                let position = Vec3::new(v[1], v[2], v[3]);
                checked += 1;
                let distance = map.esdf_query(&position).ok().map(|s| s.distance);
                if !distance.is_some_and(|d| d >= band.0 && d <= band.1) {
                    violations.push(Violation {
                        compartment: v[0] as usize,
                        position,
                        distance,
                    });
                }
            }
            other => {
                return Err(HarnessError::Parse {
                    file: "gvi.txt".into(),
                    line: n + 1,
                    message: format!("unknown record {other:?}"),
                })
            }
        }
    }

    check_end("gvi.txt", end, checked, gvi.lines().count())?;

    let mut modes: Vec<Mode> = Vec::new();
    for (n, line) in read(dir, "events.log")?.lines().enumerate() {
        let e: Event = line.parse().map_err(|message| HarnessError::Parse {
            file: "events.log".into(),
            line: n + 1,
            message,
        })?;
        if modes.last() != Some(&e.mode) {
            modes.push(e.mode);
        }
    }

    Ok(VerifyReport {
        samples: poses.len(),
        lambda_logged: logged.lambda_c,
        lambda_replayed: replayed,
        lambda_matches,
        viewpoints_checked: checked,
        violations,
        transitions: check_transitions(&modes),
        band,
    })
}
