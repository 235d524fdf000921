//! Basic geometric types shared by the map, the planners and the simulator.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(2.0 * PI);
    if wrapped > PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Returns `Some(q)` when `psi` is (numerically) a multiple `q * pi/2`.
fn quarter_turns(psi: f64) -> Option<i64> {
    let q = (psi / FRAC_PI_2).round();
    if (psi - q * FRAC_PI_2).abs() < 1e-12 {
        Some((q as i64).rem_euclid(4))
    } else {
        None
    }
}

/// Rotates `v` about +z by `psi`. Multiples of 90 degrees are applied as
/// exact axis swaps so that rotated scenes reproduce bit-identical results.
pub fn rotate_z(v: Vec3, psi: f64) -> Vec3 {
    match quarter_turns(psi) {
        Some(0) => v,
        Some(1) => Vec3::new(-v.y, v.x, v.z),
        Some(2) => Vec3::new(-v.x, -v.y, v.z),
        Some(3) => Vec3::new(v.y, -v.x, v.z),
        _ => {
            let (s, c) = psi.sin_cos();
            Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
        }
    }
}

/// A robot configuration `[x, y, z, psi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Yaw in radians, kept in (-pi, pi].
    pub psi: f64,
}

impl Configuration {
    pub fn new(x: f64, y: f64, z: f64, psi: f64) -> Self {
        Self {
            x,
            y,
            z,
            psi: normalize_angle(psi),
        }
    }

    pub fn from_position(p: Vec3, psi: f64) -> Self {
        Self::new(p.x, p.y, p.z, psi)
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn with_yaw(&self, psi: f64) -> Self {
        Self::new(self.x, self.y, self.z, psi)
    }

    pub fn distance(&self, other: &Configuration) -> f64 {
        (self.position() - other.position()).norm()
    }

    /// Expresses a world-frame vector in the yaw-only sensor frame.
    pub fn to_body(&self, v: Vec3) -> Vec3 {
        rotate_z(v, -self.psi)
    }

    /// Expresses a body-frame vector in the world frame.
    pub fn to_world(&self, v: Vec3) -> Vec3 {
        rotate_z(v, self.psi)
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn from_center_extents(center: Vec3, extents: Vec3) -> Self {
        let half = extents * 0.5;
        Self {
            min: center - half,
            max: center + half,
        }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extents(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.max[i] <= self.min[i])
    }

    pub fn intersection(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.sup(&other.min),
            max: self.max.inf(&other.max),
        }
    }

    /// True when the boxes share a region of positive volume.
    pub fn overlaps_strictly(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] < other.max[i] && other.min[i] < self.max[i])
    }

    pub fn volume(&self) -> f64 {
        let e = self.extents();
        e.x.max(0.0) * e.y.max(0.0) * e.z.max(0.0)
    }

    /// Slab test. Returns the entry parameter of the ray `origin + t * dir`
    /// for `t` in `[0, t_max]`; an origin inside the box yields `0`.
    pub fn ray_entry(&self, origin: &Vec3, dir: &Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0_f64;
        let mut t1 = t_max;
        for i in 0..3 {
            if dir[i].abs() < 1e-300 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let mut ta = (self.min[i] - origin[i]) * inv;
            let mut tb = (self.max[i] - origin[i]) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_wrap_into_half_open_interval() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(3.0 * PI / 2.0) + FRAC_PI_2).abs() < 1e-12);
        assert!((normalize_angle(7.0 * PI) - PI).abs() < 1e-9);
    }

    #[test]
    fn quarter_turn_rotation_is_exact() {
        let v = Vec3::new(0.3, -1.7, 2.0);
        assert_eq!(rotate_z(v, FRAC_PI_2), Vec3::new(1.7, 0.3, 2.0));
        assert_eq!(rotate_z(rotate_z(v, FRAC_PI_2), -FRAC_PI_2), v);
        let c = Configuration::new(0.0, 0.0, 0.0, PI);
        assert_eq!(c.to_body(Vec3::new(1.0, 2.0, 0.0)), Vec3::new(-1.0, -2.0, 0.0));
    }

    #[test]
    fn slab_test_hits_and_misses() {
        let b = Aabb::new(Vec3::new(1.0, -1.0, -1.0), Vec3::new(2.0, 1.0, 1.0));
        let o = Vec3::zeros();
        assert_eq!(b.ray_entry(&o, &Vec3::x(), 10.0), Some(1.0));
        assert_eq!(b.ray_entry(&o, &Vec3::y(), 10.0), None);
        assert_eq!(b.ray_entry(&o, &Vec3::x(), 0.5), None);
        assert_eq!(b.ray_entry(&Vec3::new(1.5, 0.0, 0.0), &Vec3::x(), 1.0), Some(0.0));
    }
}
