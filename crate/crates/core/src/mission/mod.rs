//! Mission state machine: explore and inspect one compartment at a time,
//! cross manholes to the next one and finally fly home.

mod spec;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exploration::{
    add_tight_chain, plan_exploration_step, plan_repositioning, update_global_graph, ExplorationContext,
    ExplorationError, ProgressGuard, StepStatus,
};
use crate::geometry::{normalize_angle, Aabb, Configuration, Vec3};
use crate::graph::{Path, PlanGraph, VertexTag};
use crate::gvi::{plan_inspection, GviError, GviReport, InspectionContext, Viewpoint};
use crate::sensors::{collision_check, GainEvaluator, RobotBox};
use crate::sim::TankWorld;
use crate::tsp::SolverOptions;
use crate::voxel_map::{MapError, VoxelMap};

pub use spec::*;

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("invalid mission: {field}: {message}")]
    InvalidSpec { field: String, message: String },
    #[error("manhole {0} infeasible: opening is not larger than the robot cross-section")]
    ManholeInfeasible(usize),
    #[error("manhole {id} front is {distance:.2} m away")]
    ManholeTooFar { id: usize, distance: f64 },
    #[error("waypoint ({:.2}, {:.2}, {:.2}) is in collision", .0.x, .0.y, .0.z)]
    Collision(Vec3),
    #[error("mission already done")]
    Finished,
    #[error("interrupted: {0}")]
    Interrupted(String),
    #[error(transparent)]
    Exploration(#[from] ExplorationError),
    #[error(transparent)]
    Inspection(#[from] GviError),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Explore,
    Inspect,
    Transit,
    ManholeTraversal,
    ReturnHome,
    Done,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Explore => "VE",
            Mode::Inspect => "GVI",
            Mode::Transit => "Transit",
            Mode::ManholeTraversal => "ManholeTraversal",
            Mode::ReturnHome => "ReturnHome",
            Mode::Done => "Done",
        }
    }

    /// Allowed mode changes; staying in a mode is always allowed except in
    /// `Done`.
    pub fn can_follow(self, next: Mode) -> bool {
        use Mode::*;
        if self == next {
            return self != Done;
        }
        matches!(
            (self, next),
            (Explore, Inspect)
                | (Inspect, Explore)
                | (Inspect, Transit)
                | (Transit, ManholeTraversal)
                | (Transit, Explore)
                | (ManholeTraversal, Explore)
                | (ReturnHome, Done)
        ) || (next == ReturnHome && self != Done)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "VE" => Mode::Explore,
            "GVI" => Mode::Inspect,
            "Transit" => Mode::Transit,
            "ManholeTraversal" => Mode::ManholeTraversal,
            "ReturnHome" => Mode::ReturnHome,
            "Done" => Mode::Done,
            other => return Err(format!("unknown mode {other:?}")),
        })
    }
}

/// One event-log record: `t mode event detail`.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub mode: Mode,
    pub kind: String,
    pub detail: String,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} {} {}", self.time, self.mode, self.kind)?;
        if !self.detail.is_empty() {
            write!(f, " {}", self.detail)?;
        }
        Ok(())
    }
}

impl FromStr for Event {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let mut parts = line.splitn(4, ' ');
        let time = parts
            .next()
            .filter(|s| !s.is_empty())
            .ok_or("missing time")?
            .parse::<f64>()
            .map_err(|e| format!("bad time: {e}"))?;
        let mode = parts.next().ok_or("missing mode")?.parse::<Mode>()?;
        let kind = parts.next().ok_or("missing event")?.to_string();
        let detail = parts.next().unwrap_or("").to_string();
        Ok(Event {
            time,
            mode,
            kind,
            detail,
        })
    }
}

/// Checks a mode sequence against the transition relation: it must start
/// exploring, end in `Done` and only take allowed edges.
pub fn check_transitions(modes: &[Mode]) -> Result<(), String> {
    match modes.first() {
        None => return Err("empty log".into()),
        Some(Mode::Explore) => {}
        Some(m) => return Err(format!("log starts in {m}")),
    }
    for (i, w) in modes.windows(2).enumerate() {
        if !w[0].can_follow(w[1]) {
            return Err(format!("record {}: {} -> {} is not allowed", i + 1, w[0], w[1]));
        }
    }
    if modes.last() != Some(&Mode::Done) {
        return Err("log does not end in Done".into());
    }
    Ok(())
}

/// Simulated pose sample along the executed trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub time: f64,
    pub pose: Configuration,
}

#[derive(Debug, Clone)]
pub struct InspectionRecord {
    pub compartment: usize,
    pub report: GviReport,
    pub tour: Vec<Viewpoint>,
}

#[derive(Debug, Clone)]
pub struct MissionState {
    pub mode: Mode,
    pub current_compartment: usize,
    pub visited: BTreeSet<usize>,
    pub robot: Configuration,
    /// Simulated seconds.
    pub elapsed: f64,
    pub path_length: f64,
    pub events: Vec<Event>,
    pub aborted: Option<String>,
    pub budget_exceeded: bool,
}

impl MissionState {
    /// Done without abort.
    pub fn succeeded(&self) -> bool {
        self.mode == Mode::Done && self.aborted.is_none()
    }
}

/// Pending crossing chosen during transit.
#[derive(Debug, Clone, Copy)]
struct Crossing {
    manhole: usize,
    from: usize,
    to: usize,
}

/// Three-waypoint crossing from the `from` side of `manhole`: front standoff,
/// opening center, rear standoff, all facing through the opening.
pub fn traverse_manhole(
    map: &VoxelMap,
    current: &Configuration,
    manhole: &Manhole,
    from: usize,
    params: &PlannerParams,
) -> Result<Path, MissionError> {
    let n = manhole.normal_into(from);
    let robot = params.robot;
    let lateral = if n.x.abs() > n.y.abs() { robot.y } else { robot.x };
    if manhole.width <= lateral || manhole.height <= robot.z {
        return Err(MissionError::ManholeInfeasible(manhole.id));
    }
    let front = manhole.center + n * params.manhole_standoff;
    let distance = (current.position() - front).norm();
    if distance > 2.0 {
        return Err(MissionError::ManholeTooFar {
            id: manhole.id,
            distance,
        });
    }
    let yaw = (-n.y).atan2(-n.x);
    let tight = params.tight_robot(&n);
    let rear = manhole.center - n * params.manhole_standoff;
    let mut path = Path::default();
    for p in [front, manhole.center, rear] {
        let c = Configuration::from_position(p, yaw);
        if !collision_check(map, &c, &tight) {
            return Err(MissionError::Collision(p));
        }
        path.push(c, true);
    }
    Ok(path)
}

/// Simulated sensor suite. Replaying the same poses through a fresh rig
/// rebuilds the same map, noise included.
#[derive(Debug, Clone)]
pub struct SensorRig {
    params: PlannerParams,
    noise: ChaCha8Rng,
}

impl SensorRig {
    pub fn new(params: &PlannerParams) -> Self {
        Self {
            params: *params,
            noise: ChaCha8Rng::seed_from_u64(params.seed ^ 0x5e_ed0f_5ca7),
        }
    }

    /// Depth scan integration followed by camera marking at `pose`.
    pub fn sense(&mut self, world: &TankWorld, map: &mut VoxelMap, pose: &Configuration) -> Result<(), MapError> {
        let p = &self.params;
        let noise = (p.range_noise > 0.0).then_some((p.range_noise, &mut self.noise));
        let scan = world.simulate_scan(pose, &p.depth, p.scan_resolution, noise);
        map.integrate_depth_scan(pose, &scan, p.depth.max_range)?;
        map.mark_camera_coverage(pose, &p.camera)?;
        Ok(())
    }
}

/// Region cleared as free around the start pose before the first scan, so
/// the robot is not boxed in by voxels outside the depth sensor's view.
pub fn start_bubble(params: &PlannerParams, home: &Vec3) -> Aabb {
    Aabb::from_center_extents(*home, params.robot.extents() * 2.0)
}

/// Robot box used for tight edges regardless of their direction.
fn tight_any(params: &PlannerParams) -> RobotBox {
    let s = params.resolution;
    RobotBox {
        x: params.robot.x - s,
        y: params.robot.y - s,
        z: params.robot.z - s,
    }
}

pub struct Mission<'w> {
    spec: MissionSpec,
    world: &'w TankWorld,
    state: MissionState,
    map: VoxelMap,
    global: PlanGraph,
    evaluator: GainEvaluator,
    rng: ChaCha8Rng,
    rig: SensorRig,
    guard: ProgressGuard,
    iterations: usize,
    direction: Vec3,
    crossing: Option<Crossing>,
    bubble: Aabb,
    trace: Vec<TraceSample>,
    inspections: Vec<InspectionRecord>,
    home: Configuration,
}

impl<'w> Mission<'w> {
    /// Places the robot at the start compartment center, clears a small
    /// bubble around it and takes the first scan.
    pub fn new(spec: MissionSpec, world: &'w TankWorld) -> Result<Self, MissionError> {
        spec.validate()
            .map_err(|(field, message)| MissionError::InvalidSpec { field, message })?;
        let p = spec.params;
        let mut map = VoxelMap::new(world.bounds, p.resolution)?;
        let home = Configuration::from_position(spec.compartments[spec.start_compartment].center, 0.0);
        let bubble = start_bubble(&p, &home.position());
        map.clear_unknown_in(&bubble);
        let evaluator = GainEvaluator::new(&map);
        let mut global = PlanGraph::new();
        global.add_vertex(home, VertexTag::Root);
        let mut mission = Self {
            state: MissionState {
                mode: Mode::Explore,
                current_compartment: spec.start_compartment,
                visited: BTreeSet::new(),
                robot: home,
                elapsed: 0.0,
                path_length: 0.0,
                events: Vec::new(),
                aborted: None,
                budget_exceeded: false,
            },
            world,
            map,
            global,
            evaluator,
            rng: ChaCha8Rng::seed_from_u64(p.seed),
            rig: SensorRig::new(&p),
            guard: ProgressGuard::new(&p.exploration),
            iterations: 0,
            direction: Vec3::x(),
            crossing: None,
            bubble,
            trace: Vec::new(),
            inspections: Vec::new(),
            home,
            spec,
        };
        mission.log("start", format!("compartment={}", mission.state.current_compartment));
        mission.sense(home)?;
        Ok(mission)
    }

    pub fn state(&self) -> &MissionState {
        &self.state
    }

    pub fn map(&self) -> &VoxelMap {
        &self.map
    }

    pub fn spec(&self) -> &MissionSpec {
        &self.spec
    }

    pub fn trace(&self) -> &[TraceSample] {
        &self.trace
    }

    /// Region cleared as free before the first scan.
    pub fn start_bubble(&self) -> Aabb {
        self.bubble
    }

    pub fn inspections(&self) -> &[InspectionRecord] {
        &self.inspections
    }

    pub fn global_graph(&self) -> &PlanGraph {
        &self.global
    }

    fn log(&mut self, kind: &str, detail: String) {
        let e = Event {
            time: self.state.elapsed,
            mode: self.state.mode,
            kind: kind.to_string(),
            detail,
        };
        log::debug!("{e}");
        self.state.events.push(e);
    }

    fn set_mode(&mut self, mode: Mode) {
        debug_assert!(self.state.mode.can_follow(mode), "{} -> {}", self.state.mode, mode);
        self.state.mode = mode;
    }

    fn sense(&mut self, pose: Configuration) -> Result<(), MissionError> {
        self.rig.sense(self.world, &mut self.map, &pose)?;
        self.trace.push(TraceSample {
            time: self.state.elapsed,
            pose,
        });
        Ok(())
    }

    /// Flies `path` at nominal speed, turning at most at the yaw-rate
    /// limit, and senses at the scan rate and at each waypoint. Each waypoint
    /// is collision-checked against the map as it stands when the robot
    /// starts towards it.
    pub fn execute_path(&mut self, path: &Path) -> Result<(), MissionError> {
        let p = self.spec.params;
        let tight = tight_any(&p);
        for i in 1..path.len() {
            let a = path.waypoints[i - 1];
            let b = path.waypoints[i];
            let bx = if path.tight[i] { &tight } else { &p.robot };
            if !collision_check(&self.map, &b, bx) {
                return Err(MissionError::Collision(b.position()));
            }
            let seg = a.distance(&b);
            let turn = normalize_angle(b.psi - a.psi);
            let duration = (seg / p.nominal_speed).max(turn.abs() / p.max_yaw_rate);
            if duration <= 0.0 {
                continue;
            }
            let n = ((duration * p.scan_rate) - 1e-9).ceil().max(1.0) as usize;
            let start = self.state.elapsed;
            let (pa, pb) = (a.position(), b.position());
            for s in 1..=n {
                let f = s as f64 / n as f64;
                self.state.elapsed = start + duration * f;
                let pose = Configuration::from_position(pa + (pb - pa) * f, a.psi + turn * f);
                self.state.robot = pose;
                self.sense(pose)?;
            }
            self.state.elapsed = start + duration;
            self.state.path_length += seg;
            self.state.robot = b;
        }
        if let Some(last) = path.last() {
            self.state.robot = *last;
        }
        Ok(())
    }

    fn abort(&mut self, err: MissionError) {
        let msg = err.to_string();
        log::warn!("mission abort: {msg}");
        self.log("abort", msg.clone());
        self.state.aborted = Some(msg);
        if self.state.mode == Mode::ReturnHome {
            self.set_mode(Mode::Done);
            self.log("done", "return failed".into());
        } else {
            self.set_mode(Mode::ReturnHome);
        }
    }

    /// Aborts the current activity and sends the robot home.
    pub fn interrupt(&mut self, reason: &str) {
        if self.state.mode != Mode::Done {
            self.abort(MissionError::Interrupted(reason.to_string()));
        }
    }

    /// Advances the mission by one planning decision.
    pub fn step(&mut self) -> Result<(), MissionError> {
        if self.state.mode == Mode::Done {
            return Err(MissionError::Finished);
        }
        if self.state.mode != Mode::ReturnHome && self.state.elapsed >= self.spec.time_budget {
            self.state.budget_exceeded = true;
            self.log("budget", format!("elapsed={:.1}", self.state.elapsed));
            self.set_mode(Mode::ReturnHome);
            return Ok(());
        }
        let result = match self.state.mode {
            Mode::Explore => self.step_explore(),
            Mode::Inspect => self.step_inspect(),
            Mode::Transit => self.step_transit(),
            Mode::ManholeTraversal => self.step_manhole(),
            Mode::ReturnHome => self.step_return(),
            Mode::Done => unreachable!(),
        };
        if let Err(e) = result {
            self.abort(e);
        }
        Ok(())
    }

    /// Steps until `Done`.
    pub fn run(&mut self) -> &MissionState {
        while self.state.mode != Mode::Done {
            self.step().expect("not done");
        }
        &self.state
    }

    fn compartment_box(&self, pad: f64) -> Aabb {
        self.spec.compartments[self.state.current_compartment].padded_box(pad)
    }

    fn step_explore(&mut self) -> Result<(), MissionError> {
        let p = self.spec.params;
        let local_box = self.compartment_box(p.exploration.local_box_pad);
        // Vertices stay within the nominal compartment so exploration never
        // slips through a manhole.
        let sample_region = self.compartment_box(1.0);
        let ctx = ExplorationContext {
            local_box: &local_box,
            sample_region: &sample_region,
            direction: &self.direction,
            depth: &p.depth,
            robot: &p.robot,
        };
        let current = self.state.robot;
        let plan = plan_exploration_step(&self.map, &current, &ctx, &p.exploration, &mut self.evaluator, &mut self.rng)?;
        self.iterations += 1;
        if plan.status == StepStatus::LocalComplete || plan.path.len() < 2 {
            self.log("local_complete", format!("best_gain={:.0} vertices={}", plan.best_gain, plan.vertex_count));
            self.finish_exploration();
            return Ok(());
        }
        let before = self.map.unknown_in(&local_box);
        let first_trace = self.trace.len();
        self.execute_path(&plan.path)?;
        let after = self.map.unknown_in(&local_box);
        self.log(
            "explore",
            format!(
                "waypoints={} length={:.2} score={:.3} best_gain={:.0} unknown={}",
                plan.path.len(),
                plan.path.length(),
                plan.best_score,
                plan.best_gain,
                after
            ),
        );
        let start = plan.path.waypoints[0].position();
        let end = plan.path.waypoints[plan.path.len() - 1].position();
        if (end - start).norm() > 1e-6 {
            self.direction = (end - start).normalize();
        }
        let poses: Vec<Configuration> = self.trace[first_trace..].iter().map(|s| s.pose).collect();
        update_global_graph(&mut self.global, &self.map, &plan.top_paths, &poses, &p.robot, &p.global);
        let stalled = self.guard.record(before, after);
        if stalled || self.iterations >= p.exploration.max_iterations {
            self.log("local_complete", if stalled { "stalled".into() } else { "iteration cap".into() });
            self.finish_exploration();
        }
        Ok(())
    }

    fn finish_exploration(&mut self) {
        self.iterations = 0;
        self.guard = ProgressGuard::new(&self.spec.params.exploration);
        self.set_mode(Mode::Inspect);
    }

    fn step_inspect(&mut self) -> Result<(), MissionError> {
        let p = self.spec.params;
        let region = self.compartment_box(p.gvi.box_pad);
        let tsp = SolverOptions {
            seed: p.seed.wrapping_add(self.state.current_compartment as u64),
            restarts: p.tsp_restarts,
            time_budget: None,
        };
        let ctx = InspectionContext {
            region: &region,
            camera: &p.camera,
            robot: &p.robot,
            tsp: &tsp,
        };
        let current = self.state.robot;
        let plan = plan_inspection(&self.map, &current, &ctx, &p.gvi, &mut self.evaluator, &mut self.rng)?;
        self.log("inspect", format!("compartment={} {}", self.state.current_compartment, plan.report));
        let first_trace = self.trace.len();
        self.execute_path(&plan.path)?;
        // The tour may be the only route through a compartment that needed
        // no exploration, so it joins the global graph too.
        let poses: Vec<Configuration> = self.trace[first_trace..].iter().map(|s| s.pose).collect();
        update_global_graph(&mut self.global, &self.map, std::slice::from_ref(&plan.path), &poses, &p.robot, &p.global);
        self.inspections.push(InspectionRecord {
            compartment: self.state.current_compartment,
            report: plan.report,
            tour: plan.tour,
        });
        self.state.visited.insert(self.state.current_compartment);
        if self.state.visited.len() == self.spec.compartments.len() {
            self.set_mode(Mode::ReturnHome);
            self.log("all_visited", format!("count={}", self.state.visited.len()));
        } else {
            self.set_mode(Mode::Transit);
        }
        Ok(())
    }

    /// Nearest unvisited compartment that shares a manhole with a visited
    /// one, by center distance from the current compartment.
    fn next_target(&self) -> Option<(usize, Option<Crossing>)> {
        let here = self.spec.compartments[self.state.current_compartment].center;
        let mut best: Option<(f64, usize)> = None;
        for c in &self.spec.compartments {
            if self.state.visited.contains(&c.id) {
                continue;
            }
            let linked = self.spec.manholes.iter().any(|m| {
                (m.connects.1 == c.id && self.state.visited.contains(&m.connects.0))
                    || (m.connects.0 == c.id && self.state.visited.contains(&m.connects.1))
            });
            if !linked {
                continue;
            }
            let d = (c.center - here).norm();
            if best.is_none_or(|(bd, _)| d < bd - 1e-12) {
                best = Some((d, c.id));
            }
        }
        let (_, target) = best?;
        let goal = self.spec.compartments[target].center;
        let mut chosen: Option<(f64, Crossing)> = None;
        for m in &self.spec.manholes {
            let from = if m.connects.1 == target {
                m.connects.0
            } else if m.connects.0 == target {
                m.connects.1
            } else {
                continue;
            };
            if !self.state.visited.contains(&from) {
                continue;
            }
            let d = (m.center - goal).norm();
            if chosen.as_ref().is_none_or(|(bd, _)| d < bd - 1e-12) {
                chosen = Some((
                    d,
                    Crossing {
                        manhole: m.id,
                        from,
                        to: target,
                    },
                ));
            }
        }
        Some((target, chosen.map(|(_, c)| c)))
    }

    fn step_transit(&mut self) -> Result<(), MissionError> {
        let p = self.spec.params;
        let Some((target, crossing)) = self.next_target() else {
            self.log("unreachable", "no unvisited compartment shares a manhole with a visited one".into());
            self.set_mode(Mode::ReturnHome);
            return Ok(());
        };
        let tight = tight_any(&p);
        let current = self.state.robot;
        match crossing {
            Some(c) => {
                let m = self.spec.manholes[c.manhole];
                let n = m.normal_into(c.from);
                let front = m.center + n * p.manhole_standoff;
                let mut path = plan_repositioning(&mut self.global, &self.map, &current, &front, &p.robot, &tight, &p.global)?;
                if let Some(last) = path.waypoints.last_mut() {
                    if (last.position() - front).norm() < 1e-9 {
                        *last = last.with_yaw((-n.y).atan2(-n.x));
                    }
                }
                self.log(
                    "transit",
                    format!("from={} to={} manhole={} waypoints={}", c.from, target, m.id, path.len()),
                );
                self.execute_path(&path)?;
                self.crossing = Some(c);
                self.set_mode(Mode::ManholeTraversal);
            }
            None => {
                let goal = self.spec.compartments[target].center;
                let path = plan_repositioning(&mut self.global, &self.map, &current, &goal, &p.robot, &tight, &p.global)?;
                self.log("transit", format!("to={target} waypoints={}", path.len()));
                self.execute_path(&path)?;
                self.enter(target, goal - current.position());
            }
        }
        Ok(())
    }

    fn enter(&mut self, compartment: usize, heading: Vec3) {
        self.state.current_compartment = compartment;
        if heading.norm() > 1e-9 {
            self.direction = heading.normalize();
        }
        self.set_mode(Mode::Explore);
        self.log("enter", format!("compartment={compartment}"));
    }

    fn step_manhole(&mut self) -> Result<(), MissionError> {
        let p = self.spec.params;
        let c = self.crossing.take().expect("crossing chosen in transit");
        let m = self.spec.manholes[c.manhole];
        let path = traverse_manhole(&self.map, &self.state.robot, &m, c.from, &p)?;
        let mut full = Path::single(self.state.robot);
        full.append(&path);
        self.log("manhole", format!("id={} from={} to={}", m.id, c.from, c.to));
        self.execute_path(&full)?;
        add_tight_chain(&mut self.global, &self.map, &path.waypoints, &p.robot, &p.global);
        self.enter(c.to, -m.normal_into(c.from));
        Ok(())
    }

    fn step_return(&mut self) -> Result<(), MissionError> {
        let p = self.spec.params;
        let tight = tight_any(&p);
        let current = self.state.robot;
        let home = self.home.position();
        let path = plan_repositioning(&mut self.global, &self.map, &current, &home, &p.robot, &tight, &p.global)?;
        self.log("return", format!("waypoints={} length={:.2}", path.len(), path.length()));
        self.execute_path(&path)?;
        self.state.current_compartment = self.spec.start_compartment;
        self.set_mode(Mode::Done);
        let d = (self.state.robot.position() - home).norm();
        self.log("done", format!("visited={} home_distance={:.3}", self.state.visited.len(), d));
        Ok(())
    }
}
