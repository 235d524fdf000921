use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use tankinspect::harness::{map_metrics, reachable_coverage, replay_and_verify, run_mission, RunConfig};
use tankinspect::sim::{generate_tank, TankParams};
use tankinspect::voxel_map::import_map;
use tankinspect::Vec3;

#[derive(Parser)]
#[command(name = "tankinspect", version, about = "Exploration and visual inspection missions in simulated tanks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a scenario file and optionally the tank geometry.
    Generate(GenerateArgs),
    /// Run a mission and write its artifact bundle.
    Run(RunArgs),
    /// Replay a bundle and check coverage and viewing distances.
    Verify {
        /// Bundle directory written by `run`.
        bundle: PathBuf,
    },
    /// Coverage figures of a map export.
    Stats(StatsArgs),
}

#[derive(Args, Default)]
struct ScenarioFlags {
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    /// Compartment interior size as `x,y,z` in meters.
    #[arg(long, value_parser = parse_vec3)]
    comp_dims: Option<Vec3>,
    #[arg(long)]
    manhole_height: Option<f64>,
    #[arg(long)]
    manhole_width: Option<f64>,
    #[arg(long)]
    wall_thickness: Option<f64>,
    #[arg(long)]
    manhole_jitter: Option<f64>,
    #[arg(long)]
    clutter: bool,
    /// Generation seed.
    #[arg(long)]
    scenario_seed: Option<u64>,
}

impl ScenarioFlags {
    fn apply(&self, s: &mut TankParams) {
        if let Some(v) = self.rows {
            s.rows = v;
        }
        if let Some(v) = self.cols {
            s.cols = v;
        }
        if let Some(v) = self.comp_dims {
            s.comp_dims = v;
        }
        if let Some(v) = self.manhole_height {
            s.manhole_height = v;
        }
        if let Some(v) = self.manhole_width {
            s.manhole_width = v;
        }
        if let Some(v) = self.wall_thickness {
            s.wall_thickness = v;
        }
        if let Some(v) = self.manhole_jitter {
            s.manhole_jitter = v;
        }
        if self.clutter {
            s.clutter = true;
        }
        if let Some(v) = self.scenario_seed {
            s.seed = v;
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    scenario: ScenarioFlags,
    /// Voxel size the geometry is aligned to.
    #[arg(long)]
    resolution: Option<f64>,
    /// Scenario file to write.
    #[arg(short, long)]
    output: PathBuf,
    /// Also write the geometry as an ASCII triangle list.
    #[arg(long)]
    triangles: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML); defaults are used for anything missing.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Scenario file from `generate`; replaces the config's scenario.
    #[arg(long)]
    scenario_file: Option<PathBuf>,
    #[command(flatten)]
    scenario: ScenarioFlags,
    /// Bundle directory.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    start_compartment: Option<usize>,
    /// Simulated-time budget in seconds.
    #[arg(long)]
    time_budget: Option<f64>,
    /// Wall-clock safety cap in seconds; 0 disables it.
    #[arg(long)]
    wall_time_cap: Option<f64>,
    /// Map voxel size; also used to align the generated geometry.
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long)]
    delta_min: Option<f64>,
    #[arg(long)]
    delta_max: Option<f64>,
    /// Depth sensor range in meters.
    #[arg(long)]
    depth_range: Option<f64>,
    /// Camera range in meters.
    #[arg(long)]
    camera_range: Option<f64>,
    /// Nominal speed in m/s.
    #[arg(long)]
    speed: Option<f64>,
    #[arg(long)]
    range_noise: Option<f64>,
    /// Planner seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(file) = &self.scenario_file {
            cfg.scenario_file = Some(file.clone());
            cfg.resolve(Path::new("."))?;
        }
        self.scenario.apply(&mut cfg.scenario);
        let m = &mut cfg.mission;
        if let Some(v) = self.start_compartment {
            m.start_compartment = v;
        }
        if let Some(v) = self.time_budget {
            m.time_budget = v;
        }
        if let Some(v) = self.wall_time_cap {
            m.wall_time_cap = v;
        }
        let p = &mut cfg.planner;
        if let Some(v) = self.resolution {
            p.resolution = v;
            cfg.scenario.resolution = v;
        }
        if let Some(v) = self.delta_min {
            p.gvi.delta_min = v;
        }
        if let Some(v) = self.delta_max {
            p.gvi.delta_max = v;
        }
        if let Some(v) = self.depth_range {
            p.depth.max_range = v;
        }
        if let Some(v) = self.camera_range {
            p.camera.max_range = v;
        }
        if let Some(v) = self.speed {
            p.nominal_speed = v;
        }
        if let Some(v) = self.range_noise {
            p.range_noise = v;
        }
        if let Some(v) = self.seed {
            p.seed = v;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct StatsArgs {
    /// Map export, e.g. `map.txt` from a bundle.
    map: PathBuf,
    /// Run configuration of the bundle; adds coverage of the reachable
    /// ground-truth surface.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err(format!("expected three comma-separated numbers, got {}", parts.len())),
    }
}

fn generate(args: &GenerateArgs) -> Result<ExitCode> {
    let mut params = TankParams::default();
    args.scenario.apply(&mut params);
    if let Some(r) = args.resolution {
        params.resolution = r;
    }
    let world = generate_tank(&params)?;
    let text = toml::to_string(&params).context("serializing scenario")?;
    fs::write(&args.output, text).with_context(|| format!("writing {}", args.output.display()))?;
    if let Some(path) = &args.triangles {
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        world
            .export_triangles(BufWriter::new(file))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!("compartments {}", world.compartments.len());
    println!("manholes {}", world.manholes.len());
    Ok(ExitCode::SUCCESS)
}

fn run(args: &RunArgs) -> Result<ExitCode> {
    let cfg = args.config()?;
    if args.print_config {
        print!("{}", cfg.to_toml());
        return Ok(ExitCode::SUCCESS);
    }
    info!("running mission into {}", args.output.display());
    let outcome = run_mission(&cfg, &args.output)?;
    print!("{}", outcome.metrics.to_text());
    let state = &outcome.state;
    if let Some(reason) = &state.aborted {
        eprintln!("mission aborted: {reason}");
    }
    Ok(if state.succeeded() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn verify(bundle: &Path) -> Result<ExitCode> {
    let report = replay_and_verify(bundle)?;
    print!("{report}");
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn stats(args: &StatsArgs) -> Result<ExitCode> {
    let map = import_map(&args.map).with_context(|| format!("reading {}", args.map.display()))?;
    print!("{}", map_metrics(&map));
    if let Some(path) = &args.config {
        let cfg = RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
        if (cfg.planner.resolution - map.resolution()).abs() > 1e-12 {
            bail!(
                "map resolution {} differs from the configured {}",
                map.resolution(),
                cfg.planner.resolution
            );
        }
        let world = cfg.world()?;
        let rc = reachable_coverage(&world, &map, &cfg.planner)?;
        println!("truth_surface_voxels {}", rc.truth_surface);
        println!("reachable_surface_voxels {}", rc.reachable);
        println!("reachable_seen_voxels {}", rc.seen);
        match rc.percent() {
            Some(p) => println!("reachable_lambda_c_pct {p:.2}"),
            None => println!("reachable_lambda_c_pct n/a"),
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Verify { bundle } => verify(bundle),
        Command::Stats(a) => stats(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
