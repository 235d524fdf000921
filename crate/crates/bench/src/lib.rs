//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tankinspect::mission::{PlannerParams, SensorRig};
use tankinspect::sim::{generate_tank, TankParams, TankWorld};
use tankinspect::tsp::TourProblem;
use tankinspect::{Configuration, Vec3, VoxelMap};

/// A single compartment of the given interior size.
pub fn room(dims: Vec3) -> TankWorld {
    let params = TankParams {
        rows: 1,
        cols: 1,
        comp_dims: dims,
        ..Default::default()
    };
    generate_tank(&params).expect("valid room")
}

/// Map of `world` after one full turn of depth scans from the first
/// compartment center.
pub fn scanned_map(world: &TankWorld, params: &PlannerParams) -> VoxelMap {
    let mut map = VoxelMap::new(world.bounds, params.resolution).expect("valid bounds");
    let mut rig = SensorRig::new(params);
    let c = world.compartments[0].center;
    for k in 0..8 {
        let yaw = k as f64 * std::f64::consts::TAU / 8.0;
        let pose = Configuration::new(c.x, c.y, c.z, yaw);
        rig.sense(world, &mut map, &pose).expect("pose inside map");
    }
    map
}

/// Symmetric Euclidean instance of `n` random points in a 10 m square.
pub fn random_tour_problem(n: usize, seed: u64) -> TourProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)))
        .collect();
    let cost = pts
        .iter()
        .map(|a| pts.iter().map(|b| (a.0 - b.0).hypot(a.1 - b.1)).collect())
        .collect();
    TourProblem::open_ended(cost, 0).expect("square matrix")
}

/// Unit directions drawn uniformly on the sphere.
pub fn random_directions(n: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let z: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let s = (1.0 - z * z).sqrt();
            Vec3::new(s * phi.cos(), s * phi.sin(), z)
        })
        .collect()
}
