use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::voxel_map::VoxelMap;

fn cube(n: usize, r: f64) -> VoxelMap {
    VoxelMap::new(Aabb::new(Vec3::zeros(), Vec3::repeat(n as f64 * r)), r).unwrap()
}

fn free_all(map: &mut VoxelMap) {
    let b = map.bounds();
    map.clear_unknown_in(&b);
}

/// Unknown voxels whose center is in the frustum and whose center segment
/// crosses no occupied voxel (marched at r/20).
fn brute_volume(map: &VoxelMap, config: &Configuration, sensor: &SensorModel) -> usize {
    let o = config.position();
    let step = map.resolution() / 20.0;
    (0..map.len())
        .filter(|&i| {
            let c = map.center(i);
            if map.occupancy(i) != Occupancy::Unknown
                || !sensor.contains_body(&config.to_body(c - o))
            {
                return false;
            }
            let d = c - o;
            let n = (d.norm() / step).ceil() as usize;
            (0..n).all(|s| {
                let p = o + d * (s as f64 / n as f64);
                map.occupancy_at(&p) != Some(Occupancy::Occupied)
            })
        })
        .count()
}

fn brute_visual(map: &VoxelMap, config: &Configuration, camera: &SensorModel) -> usize {
    map.camera_visible_voxels(config, camera)
        .into_iter()
        .filter(|&i| !map.is_seen(i))
        .count()
}

#[test]
fn validation_rejects_bad_geometry() {
    assert!(SensorModel::default_depth().validate().is_ok());
    assert!(SensorModel::default_camera().validate().is_ok());
    assert!(SensorModel::default_camera().with_fov(0.0, 10.0).validate().is_err());
    assert!(SensorModel::default_camera().with_fov(400.0, 10.0).validate().is_err());
    assert!(SensorModel::default_camera().with_fov(90.0, 180.0).validate().is_err());
    assert!(SensorModel::default_camera().with_range(0.0).validate().is_err());
}

#[test]
fn ray_grid_is_anchored_and_nested() {
    let depth = SensorModel::default_depth();
    let dirs = depth.ray_directions();
    assert_eq!(dirs.len(), 120 * 31);
    assert!(dirs.iter().all(|d| (d.norm() - 1.0).abs() < 1e-12));
    let cam = SensorModel::default_camera();
    assert_eq!(cam.ray_directions().len(), 85 * 65);
    let narrow = cam.with_fov(40.0, 20.0).ray_directions();
    let wide = cam.ray_directions();
    assert!(narrow.iter().all(|d| wide.contains(d)));
}

#[test]
fn frustum_membership() {
    let cam = SensorModel::default_camera();
    assert!(cam.contains_body(&Vec3::new(1.0, 0.0, 0.0)));
    assert!(!cam.contains_body(&Vec3::new(-1.0, 0.0, 0.0)));
    assert!(!cam.contains_body(&Vec3::new(1.0, 1.0, 0.0)));
    assert!(cam.contains_body(&Vec3::new(1.0, 0.9, 0.0)));
    assert!(!cam.contains_body(&Vec3::new(1.0, 0.0, 0.7)));
    assert!(!cam.contains_body(&Vec3::new(3.1, 0.0, 0.0)));
    assert!(!cam.contains_body(&Vec3::zeros()));
    let depth = SensorModel::default_depth();
    assert!(depth.contains_body(&Vec3::new(-1.0, 0.0, 0.0)));
    assert!(!depth.contains_body(&Vec3::new(0.1, 0.0, 1.0)));
}

#[test]
fn fully_explored_map_has_no_volume_gain() {
    let mut map = cube(20, 0.1);
    free_all(&mut map);
    let c = Configuration::new(1.0, 1.0, 1.0, 0.3);
    assert_eq!(volume_gain(&map, &c, &SensorModel::default_depth()), 0);
}

#[test]
fn volume_gain_in_unknown_void_matches_per_voxel_oracle() {
    let map = cube(20, 0.1);
    let sensor = SensorModel::default_depth()
        .with_range(0.6)
        .with_fov(360.0, 90.0);
    let sensor = SensorModel {
        ray_resolution: 1.0,
        ..sensor
    };
    for (x, y, z, psi) in [(1.0, 1.0, 1.0, 0.0), (1.05, 0.95, 1.0, 0.7), (0.55, 1.45, 1.15, -2.0)] {
        let c = Configuration::new(x, y, z, psi);
        let gain = volume_gain(&map, &c, &sensor);
        assert_eq!(gain, brute_volume(&map, &c, &sensor));
        assert!(gain > 0);
    }
}

#[test]
fn unknown_behind_wall_is_not_counted() {
    let mut map = cube(20, 0.1);
    let pose = Configuration::new(0.55, 1.05, 1.05, 0.0);
    // Free up to x < 1.0, a wall slab at x = 1.05, unknown behind it.
    for i in 0..map.len() {
        let c = map.center(i);
        if c.x < 1.0 {
            map.set_occupancy(i, Occupancy::Free);
        } else if c.x < 1.1 {
            map.set_occupancy(i, Occupancy::Occupied);
        }
    }
    assert_eq!(volume_gain(&map, &pose, &SensorModel::default_depth()), 0);
    assert_eq!(brute_volume(&map, &pose, &SensorModel::default_depth()), 0);
}

#[test]
fn volume_gain_respects_region() {
    let map = cube(20, 0.1);
    let sensor = SensorModel {
        ray_resolution: 1.0,
        ..SensorModel::default_depth().with_range(0.6)
    };
    let c = Configuration::new(1.0, 1.0, 1.0, 0.0);
    let region = Aabb::new(Vec3::new(0.8, 0.8, 0.8), Vec3::new(1.2, 1.2, 1.2));
    let mut eval = GainEvaluator::new(&map);
    let inside = eval.volume_gain(&map, &c, &sensor, Some(&region));
    let expected = (0..map.len())
        .filter(|&i| {
            let p = map.center(i);
            region.contains(&p) && sensor.contains_body(&c.to_body(p - c.position()))
        })
        .count();
    assert_eq!(inside, expected);
}

fn room(n: usize, r: f64) -> VoxelMap {
    let mut map = cube(n, r);
    for i in 0..map.len() {
        let c = map.grid().coords(i);
        let shell = c.iter().any(|&v| v == 0 || v == n - 1);
        map.set_occupancy(i, if shell { Occupancy::Occupied } else { Occupancy::Free });
    }
    map
}

#[test]
fn visual_gain_trivial_cases() {
    let mut map = room(40, 0.1);
    let cam = SensorModel::default_camera();
    let pose = Configuration::new(2.0, 2.0, 2.0, 0.0);
    let before = visual_gain(&map, &pose, &cam);
    assert!(before > 0);
    map.mark_camera_coverage(&pose, &cam).unwrap();
    assert_eq!(visual_gain(&map, &pose, &cam), 0);

    let mut single = cube(30, 0.1);
    free_all(&mut single);
    let target = single.index_of(&Vec3::new(2.05, 1.55, 1.55)).unwrap();
    single.set_occupancy(target, Occupancy::Occupied);
    let at = Configuration::new(1.05, 1.55, 1.55, 0.0);
    assert_eq!(visual_gain(&single, &at, &cam), 1);
}

#[test]
fn visual_gain_matches_exhaustive_oracle_in_random_rooms() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cam = SensorModel {
        ray_resolution: 0.25,
        ..SensorModel::default_camera()
    };
    for _ in 0..6 {
        let n = rng.random_range(20..36);
        let mut map = room(n, 0.1);
        let hi = n as f64 * 0.1 - 0.35;
        let pose = Configuration::new(
            rng.random_range(0.35..hi),
            rng.random_range(0.35..hi),
            rng.random_range(0.35..hi),
            rng.random_range(-PI..PI),
        );
        // Pre-mark some voxels as seen so the unseen filter matters.
        let peek = Configuration::new(pose.x, pose.y, pose.z, pose.psi + 1.0);
        map.mark_camera_coverage(&peek, &cam).unwrap();
        assert_eq!(visual_gain(&map, &pose, &cam), brute_visual(&map, &pose, &cam));
    }
}

#[test]
fn ray_sampled_visual_gain_never_exceeds_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cam = SensorModel::default_camera();
    for _ in 0..10 {
        let mut map = room(30, 0.1);
        for _ in 0..40 {
            let i = rng.random_range(0..map.len());
            map.set_occupancy(i, Occupancy::Occupied);
        }
        let pose = Configuration::new(
            rng.random_range(0.5..2.5),
            rng.random_range(0.5..2.5),
            rng.random_range(0.5..2.5),
            rng.random_range(-PI..PI),
        );
        if map.occupancy_at(&pose.position()) != Some(Occupancy::Free) {
            continue;
        }
        let mut eval = GainEvaluator::new(&map);
        let got = eval.visible_unseen(&map, &pose, &cam, None);
        let all = map.camera_visible_voxels(&pose, &cam);
        assert!(got.iter().all(|i| all.binary_search(i).is_ok()));
    }
}

#[test]
fn collision_checks() {
    let mut map = cube(40, 0.1);
    let robot = RobotBox::default();
    let open = Aabb::new(Vec3::repeat(0.5), Vec3::repeat(3.5));
    map.clear_unknown_in(&open);
    assert!(collision_check(&map, &Configuration::new(2.0, 2.0, 2.0, 0.0), &robot));
    // Straddling the unknown frontier at x = 0.5.
    assert!(!collision_check(&map, &Configuration::new(0.6, 2.0, 2.0, 0.0), &robot));
    let wall = map.index_of(&Vec3::new(2.15, 2.05, 2.05)).unwrap();
    map.set_occupancy(wall, Occupancy::Occupied);
    assert!(!collision_check(&map, &Configuration::new(2.0, 2.0, 2.0, 0.0), &robot));
    assert!(segment_is_free(&map, &Vec3::new(1.0, 1.0, 1.0), &Vec3::new(3.0, 1.0, 1.0), &robot));
    assert!(!segment_is_free(&map, &Vec3::new(1.0, 2.05, 2.05), &Vec3::new(3.0, 2.05, 2.05), &robot));
    assert!(!point_is_free(&map, &Vec3::new(-1.0, 2.0, 2.0), &robot));
}

/// Rotates cell contents by +90 degrees about the vertical axis through the
/// grid center.
fn rotate_map(map: &VoxelMap) -> VoxelMap {
    let mut out = map.clone();
    let n = map.grid().dims[0];
    for i in 0..map.len() {
        let [x, y, z] = map.grid().coords(i);
        let j = map.grid().index([n - 1 - y, x, z]);
        out.set_occupancy(j, map.occupancy(i));
    }
    out.recompute_esdf();
    out
}

fn rotate_config(c: &Configuration, half: f64) -> Configuration {
    Configuration::new(half - (c.y - half), c.x, c.z, c.psi + FRAC_PI_2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gains_are_invariant_under_quarter_turns(seed in any::<u64>(), q in 0usize..4) {
        let r = 0.125;
        let n = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut map = cube(n, r);
        for i in 0..map.len() {
            let roll: f64 = rng.random();
            let s = if roll < 0.05 { Occupancy::Occupied } else if roll < 0.6 { Occupancy::Free } else { Occupancy::Unknown };
            map.set_occupancy(i, s);
        }
        let cell = [rng.random_range(2..n - 2), rng.random_range(2..n - 2), rng.random_range(2..n - 2)];
        let p = map.grid().center_of(cell);
        let c = Configuration::new(p.x, p.y, p.z, [0.0, FRAC_PI_2, PI, -FRAC_PI_2][q]);
        let depth = SensorModel { max_range: 1.2, ..SensorModel::default_depth() };
        let cam = SensorModel { max_range: 1.2, ray_resolution: 3.0, ..SensorModel::default_camera() };
        let rot = rotate_map(&map);
        let rc = rotate_config(&c, 0.5 * n as f64 * r);
        prop_assert_eq!(volume_gain(&map, &c, &depth), volume_gain(&rot, &rc, &depth));
        prop_assert_eq!(visual_gain(&map, &c, &cam), visual_gain(&rot, &rc, &cam));
    }

    #[test]
    fn shrinking_sensor_never_increases_gain(seed in any::<u64>(), fh in 10.0f64..85.0, fv in 10.0f64..64.0, range in 0.3f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut map = cube(24, 0.1);
        for i in 0..map.len() {
            let roll: f64 = rng.random();
            let s = if roll < 0.04 { Occupancy::Occupied } else if roll < 0.7 { Occupancy::Free } else { Occupancy::Unknown };
            map.set_occupancy(i, s);
        }
        let c = Configuration::new(1.2, 1.2, 1.2, rng.random_range(-PI..PI));
        let cam = SensorModel::default_camera();
        let small = cam.with_fov(fh, fv).with_range(range);
        let depth = SensorModel::default_depth().with_range(3.0);
        let small_depth = depth.with_fov(fh * 4.0, fv).with_range(range);
        let big_v = visual_gain(&map, &c, &cam);
        prop_assert!(visual_gain(&map, &c, &small) <= big_v);
        let big_g = volume_gain(&map, &c, &depth);
        prop_assert!(volume_gain(&map, &c, &small_depth) <= big_g);
        let sphere = (0..map.len()).filter(|&i| map.occupancy(i) == Occupancy::Unknown && (map.center(i) - c.position()).norm() <= 3.0).count();
        prop_assert!(big_g <= sphere);
    }
}
