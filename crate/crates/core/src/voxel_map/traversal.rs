//! Amanatides–Woo voxel traversal.
//!
//! When a ray crosses an edge or corner exactly, every tied axis is stepped
//! at once, so the voxels that are only touched at a point are skipped. This
//! keeps traversal equivariant under axis permutations and reflections.

use crate::geometry::{Aabb, Vec3};

/// Uniform grid layout: `dims` cells of edge `resolution` starting at `min`.
/// Linear index is `(i * ny + j) * nz + k`, so index order is lexicographic
/// in `(i, j, k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub min: Vec3,
    pub resolution: f64,
    pub dims: [usize; 3],
}

impl GridGeometry {
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self) -> Aabb {
        let r = self.resolution;
        Aabb::new(
            self.min,
            self.min
                + Vec3::new(
                    self.dims[0] as f64 * r,
                    self.dims[1] as f64 * r,
                    self.dims[2] as f64 * r,
                ),
        )
    }

    #[inline]
    pub fn index(&self, c: [usize; 3]) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.dims[2];
        let rest = idx / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], k]
    }

    #[inline]
    pub fn checked_index(&self, c: [i64; 3]) -> Option<usize> {
        if (0..3).all(|a| c[a] >= 0 && (c[a] as usize) < self.dims[a]) {
            Some(self.index([c[0] as usize, c[1] as usize, c[2] as usize]))
        } else {
            None
        }
    }

    /// Signed cell coordinates of a point (may lie outside the grid).
    #[inline]
    pub fn cell_of(&self, p: &Vec3) -> [i64; 3] {
        let r = self.resolution;
        [
            ((p.x - self.min.x) / r).floor() as i64,
            ((p.y - self.min.y) / r).floor() as i64,
            ((p.z - self.min.z) / r).floor() as i64,
        ]
    }

    #[inline]
    pub fn index_of(&self, p: &Vec3) -> Option<usize> {
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return None;
        }
        self.checked_index(self.cell_of(p))
    }

    #[inline]
    pub fn center(&self, idx: usize) -> Vec3 {
        self.center_of(self.coords(idx))
    }

    #[inline]
    pub fn center_of(&self, c: [usize; 3]) -> Vec3 {
        let r = self.resolution;
        Vec3::new(
            self.min.x + (c[0] as f64 + 0.5) * r,
            self.min.y + (c[1] as f64 + 0.5) * r,
            self.min.z + (c[2] as f64 + 0.5) * r,
        )
    }

    /// Inclusive cell-coordinate range of all cells whose centers fall in `b`.
    pub fn cells_with_center_in(&self, b: &Aabb) -> Option<([usize; 3], [usize; 3])> {
        let r = self.resolution;
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..3 {
            let first = ((b.min[a] - self.min[a]) / r - 0.5).ceil().max(0.0);
            let last = ((b.max[a] - self.min[a]) / r - 0.5).floor();
            if last < 0.0 || first > last || first >= self.dims[a] as f64 {
                return None;
            }
            lo[a] = first as usize;
            hi[a] = (last as usize).min(self.dims[a] - 1);
        }
        Some((lo, hi))
    }
}

/// Walks the cells pierced by `origin + t * dir`, `t in [0, t_max]`, in order.
///
/// `dir` must be unit length for `t` to be metric. The visitor receives the
/// linear index, the cell coordinates and the entry parameter of each cell;
/// returning `false` stops the walk. An origin outside the grid is advanced
/// to the grid entry point first.
pub fn traverse<F>(grid: &GridGeometry, origin: Vec3, dir: Vec3, t_max: f64, mut visit: F)
where
    F: FnMut(usize, [usize; 3], f64) -> bool,
{
    if grid.is_empty() || !(t_max >= 0.0) {
        return;
    }
    let bounds = grid.bounds();
    let t_start = match bounds.ray_entry(&origin, &dir, t_max) {
        Some(t) => t,
        None => return,
    };
    let start = origin + dir * t_start;
    let r = grid.resolution;
    let mut cell = grid.cell_of(&start);
    for (c, &n) in cell.iter_mut().zip(&grid.dims) {
        *c = (*c).clamp(0, n as i64 - 1);
    }

    let mut step = [0i64; 3];
    let mut t_next = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        if dir[a] > 0.0 {
            step[a] = 1;
            let boundary = grid.min[a] + (cell[a] + 1) as f64 * r;
            t_next[a] = (boundary - origin[a]) / dir[a];
            t_delta[a] = r / dir[a];
        } else if dir[a] < 0.0 {
            step[a] = -1;
            let boundary = grid.min[a] + cell[a] as f64 * r;
            t_next[a] = (origin[a] - boundary) / -dir[a];
            t_delta[a] = r / -dir[a];
        }
    }

    let mut t_enter = t_start;
    loop {
        let c = [cell[0] as usize, cell[1] as usize, cell[2] as usize];
        if !visit(grid.index(c), c, t_enter) {
            return;
        }
        let t = t_next[0].min(t_next[1]).min(t_next[2]);
        if t > t_max || !t.is_finite() {
            return;
        }
        for a in 0..3 {
            if t_next[a] == t {
                cell[a] += step[a];
                if cell[a] < 0 || cell[a] >= grid.dims[a] as i64 {
                    return;
                }
                t_next[a] += t_delta[a];
            }
        }
        t_enter = t;
    }
}
