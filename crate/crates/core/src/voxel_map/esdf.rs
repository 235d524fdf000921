//! Euclidean distance field over occupied voxels.
//!
//! Each cell stores the index of its nearest occupied voxel (the "site") and
//! the squared center-to-center distance in voxel units. Sites are spread by
//! a Dijkstra-ordered brushfire over the 26-neighbourhood. Occupied voxels
//! are never removed from the map, so updates are insertion-only: a new site
//! only floods the cells it is strictly closer to. Ties between equidistant
//! sites resolve to the lexicographically smallest voxel.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::traversal::GridGeometry;

pub(crate) const NO_SITE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub(crate) struct Esdf {
    site: Vec<u32>,
    dist2: Vec<u32>,
}

impl Esdf {
    pub fn new(len: usize) -> Self {
        Self {
            site: vec![NO_SITE; len],
            dist2: vec![u32::MAX; len],
        }
    }

    #[inline]
    pub fn site(&self, idx: usize) -> Option<usize> {
        match self.site[idx] {
            NO_SITE => None,
            s => Some(s as usize),
        }
    }

    /// Squared distance to the site in voxel units.
    #[inline]
    pub fn dist2(&self, idx: usize) -> Option<u32> {
        self.site(idx).map(|_| self.dist2[idx])
    }

    pub fn clear(&mut self) {
        self.site.fill(NO_SITE);
        self.dist2.fill(u32::MAX);
    }

    pub fn insert(&mut self, grid: &GridGeometry, sites: &[usize]) {
        let mut heap = BinaryHeap::new();
        for &s in sites {
            if self.dist2[s] != 0 || self.site[s] as usize != s {
                self.site[s] = s as u32;
                self.dist2[s] = 0;
                heap.push(Reverse((0u32, s)));
            }
        }
        self.propagate(grid, heap);
    }

    fn propagate(&mut self, grid: &GridGeometry, mut heap: BinaryHeap<Reverse<(u32, usize)>>) {
        let dims = [
            grid.dims[0] as i64,
            grid.dims[1] as i64,
            grid.dims[2] as i64,
        ];
        while let Some(Reverse((d2, cell))) = heap.pop() {
            if self.dist2[cell] != d2 {
                continue;
            }
            let site = self.site[cell];
            let sc = grid.coords(site as usize);
            let sc = [sc[0] as i64, sc[1] as i64, sc[2] as i64];
            let cc = grid.coords(cell);
            let cc = [cc[0] as i64, cc[1] as i64, cc[2] as i64];
            for dx in -1..=1i64 {
                let x = cc[0] + dx;
                if x < 0 || x >= dims[0] {
                    continue;
                }
                for dy in -1..=1i64 {
                    let y = cc[1] + dy;
                    if y < 0 || y >= dims[1] {
                        continue;
                    }
                    for dz in -1..=1i64 {
                        let z = cc[2] + dz;
                        if z < 0 || z >= dims[2] || (dx == 0 && dy == 0 && dz == 0) {
                            continue;
                        }
                        let n = grid.index([x as usize, y as usize, z as usize]);
                        let (ex, ey, ez) = (x - sc[0], y - sc[1], z - sc[2]);
                        let nd2 = (ex * ex + ey * ey + ez * ez) as u32;
                        let current = self.dist2[n];
                        if nd2 < current || (nd2 == current && site < self.site[n]) {
                            self.dist2[n] = nd2;
                            self.site[n] = site;
                            heap.push(Reverse((nd2, n)));
                        }
                    }
                }
            }
        }
    }
}
