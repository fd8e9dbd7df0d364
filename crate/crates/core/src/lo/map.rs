//! Voxel-hashed point map with nearest-neighbor plane queries.

use alloc::vec::Vec;

use hashbrown::{HashMap, HashSet};
use nalgebra::SymmetricEigen;
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::{Mat3, Rotation, Vec3};

type Key = (i32, i32, i32);

pub const DEFAULT_PLANARITY: f64 = 0.01;

fn key(p: &Vec3, size: f64) -> Key {
    ((p.x / size).floor() as i32, (p.y / size).floor() as i32, (p.z / size).floor() as i32)
}

/// Keeps the first point landing in each voxel.
pub fn voxel_downsample(points: &[Vec3], size: f64) -> Vec<Vec3> {
    let mut seen = HashSet::with_capacity(points.len());
    points.iter().filter(|p| seen.insert(key(p, size))).copied().collect()
}

/// Local plane `normal · x + offset = 0` through a neighbor set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalPlane {
    pub normal: Vec3,
    pub offset: f64,
    /// RMS point-to-plane distance of the neighbors used.
    pub rms: f64,
    /// A neighbor point; any point on the plane works as anchor.
    pub anchor: Vec3,
}

/// Map points are averaged per fine voxel and bucketed on a coarser search
/// grid; neighbor queries scan the 3x3x3 search cells around the query.
#[derive(Clone, Debug)]
pub struct LocalMap {
    voxel_size: f64,
    cell_size: f64,
    /// Running sum and count of the points in each voxel.
    voxels: Vec<(Vec3, u32)>,
    index: HashMap<Key, usize>,
    cells: HashMap<Key, Vec<usize>>,
    /// Points more planar than this `l_min / l_mid` ratio of the neighbor
    /// covariance count as a plane.
    planarity: f64,
}

impl LocalMap {
    pub fn new(voxel_size: f64, cell_size: f64) -> Self {
        Self {
            voxel_size,
            cell_size,
            voxels: Vec::new(),
            index: HashMap::new(),
            cells: HashMap::new(),
            planarity: DEFAULT_PLANARITY,
        }
    }

    pub fn with_planarity(mut self, planarity: f64) -> Self {
        self.planarity = planarity;
        self
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    fn point(&self, i: usize) -> Vec3 {
        let (sum, n) = self.voxels[i];
        sum / n as f64
    }

    pub fn points(&self) -> impl Iterator<Item = Vec3> + '_ {
        (0..self.voxels.len()).map(|i| self.point(i))
    }

    pub fn insert(&mut self, p: Vec3) {
        if !p.iter().all(|c| c.is_finite()) {
            return;
        }
        match self.index.entry(key(&p, self.voxel_size)) {
            hashbrown::hash_map::Entry::Occupied(e) => {
                let v = &mut self.voxels[*e.get()];
                v.0 += p;
                v.1 += 1;
            }
            hashbrown::hash_map::Entry::Vacant(e) => {
                let i = self.voxels.len();
                e.insert(i);
                self.voxels.push((p, 1));
                self.cells.entry(key(&p, self.cell_size)).or_default().push(i);
            }
        }
    }

    /// Transforms body-frame points by `(rotation, translation)` and inserts them.
    pub fn insert_scan(&mut self, points: &[Vec3], rotation: &Rotation, translation: &Vec3) {
        for p in points {
            self.insert(rotation * p + translation);
        }
    }

    /// Up to `k` nearest map points, closest first, with squared distances.
    pub fn nearest(&self, q: &Vec3, k: usize) -> Vec<(f64, Vec3)> {
        let mut best: Vec<(f64, Vec3)> = Vec::with_capacity(k + 1);
        if k == 0 {
            return best;
        }
        let c = key(q, self.cell_size);
        // Squared gap from the query to the neighbor cell on each side, per axis.
        let gap = |x: f64, cell: i32, d: i32| {
            let lo = x - cell as f64 * self.cell_size;
            match d {
                -1 => lo * lo,
                1 => (self.cell_size - lo) * (self.cell_size - lo),
                _ => 0.0,
            }
        };
        let mut order = [(0.0, (0, 0, 0)); 27];
        let mut n = 0;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let d2 = gap(q.x, c.0, dx) + gap(q.y, c.1, dy) + gap(q.z, c.2, dz);
                    order[n] = (d2, (c.0 + dx, c.1 + dy, c.2 + dz));
                    n += 1;
                }
            }
        }
        order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        for (gap2, cell) in order {
            if best.len() == k && gap2 >= best[k - 1].0 {
                break;
            }
            let Some(cell) = self.cells.get(&cell) else { continue };
            for &i in cell {
                let p = self.point(i);
                let d = (p - q).norm_squared();
                if best.len() == k && d >= best[k - 1].0 {
                    continue;
                }
                let at = best.partition_point(|(e, _)| *e <= d);
                best.insert(at, (d, p));
                best.truncate(k);
            }
        }
        best
    }

    /// Plane through the `k` nearest neighbors, if all `k` exist, they
    /// spread over a plane rather than a line or a blob, and the fit RMS is
    /// below `rms_gate`.
    pub fn plane_near(&self, q: &Vec3, k: usize, rms_gate: f64) -> Option<LocalPlane> {
        let nn = self.nearest(q, k);
        if nn.len() < k.max(3) {
            return None;
        }
        let n = nn.len() as f64;
        let centroid = nn.iter().fold(Vec3::zeros(), |a, (_, p)| a + p) / n;
        let mut cov = Mat3::zeros();
        for (_, p) in &nn {
            let d = p - centroid;
            cov += d * d.transpose();
        }
        let eig = SymmetricEigen::new(cov / n);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let (l_min, l_mid) = (eig.eigenvalues[order[0]].max(0.0), eig.eigenvalues[order[1]]);
        if !(l_mid > 1e-4 * eig.eigenvalues[order[2]]) || l_mid < 1e-8 || l_min > self.planarity * l_mid {
            return None;
        }
        let rms = l_min.sqrt();
        if !(rms < rms_gate) {
            return None;
        }
        let normal: Vec3 = eig.eigenvectors.column(order[0]).normalize();
        Some(LocalPlane { normal, offset: -normal.dot(&centroid), rms, anchor: centroid })
    }
}
