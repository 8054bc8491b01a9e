//! Surface sampling and exact Chamfer distance.
//!
//! `chamfer(A, B) = ½·(mean_a min_b ‖a − b‖ + mean_b min_a ‖a − b‖)`, with
//! Euclidean (not squared) distances. Nearest neighbors come from a uniform
//! grid searched in growing shells until no unvisited cell can hold a closer
//! point, so the result is exact, not approximate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Mesh, Vec3};

/// Uniform grid over a point set for exact nearest-neighbor queries.
pub struct PointGrid<'a> {
    points: &'a [Vec3],
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    /// `starts[c]..starts[c + 1]` indexes `order` for cell `c`.
    starts: Vec<usize>,
    order: Vec<u32>,
}

impl<'a> PointGrid<'a> {
    pub fn new(points: &'a [Vec3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("nearest-neighbor grid over an empty point set".into()));
        }
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let ext = hi - lo;
        let diag = ext.norm().max(1e-12);
        // about two points per cell, at most 128 cells per axis
        let volume = ext.iter().map(|e| e.max(diag * 1e-3)).product::<f64>();
        let cell = (2.0 * volume / points.len() as f64).cbrt().max(diag / 128.0);
        let dims = [0, 1, 2].map(|k| ((ext[k] / cell).floor() as usize + 1).min(256));
        let mut grid = PointGrid {
            points,
            origin: lo,
            cell,
            dims,
            starts: Vec::new(),
            order: Vec::new(),
        };
        let ncell = dims[0] * dims[1] * dims[2];
        let mut counts = vec![0usize; ncell + 1];
        let ids: Vec<usize> = points.iter().map(|p| grid.cell_index(grid.cell_of(p))).collect();
        for &c in &ids {
            counts[c + 1] += 1;
        }
        for c in 0..ncell {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut order = vec![0u32; points.len()];
        for (i, &c) in ids.iter().enumerate() {
            order[fill[c]] = i as u32;
            fill[c] += 1;
        }
        grid.starts = counts;
        grid.order = order;
        Ok(grid)
    }

    fn cell_of(&self, p: &Vec3) -> [usize; 3] {
        [0, 1, 2].map(|k| {
            let c = ((p[k] - self.origin[k]) / self.cell).floor();
            (c.max(0.0) as usize).min(self.dims[k] - 1)
        })
    }

    fn cell_index(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    /// Distance from `q` to its nearest point.
    pub fn nearest_distance(&self, q: &Vec3) -> f64 {
        let c = self.cell_of(q);
        let mut best = f64::INFINITY;
        for r in 0usize.. {
            let lo = c.map(|x| x.saturating_sub(r));
            let hi = [0, 1, 2].map(|k| (c[k] + r).min(self.dims[k] - 1));
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        // only the shell at Chebyshev distance r
                        let ring = x.abs_diff(c[0]).max(y.abs_diff(c[1])).max(z.abs_diff(c[2]));
                        if ring != r {
                            continue;
                        }
                        let ci = self.cell_index([x, y, z]);
                        for &i in &self.order[self.starts[ci]..self.starts[ci + 1]] {
                            best = best.min((self.points[i as usize] - q).norm());
                        }
                    }
                }
            }
            // lower bound on the distance to any point outside the visited block
            let mut bound = f64::INFINITY;
            for k in 0..3 {
                if c[k] >= r + 1 {
                    bound = bound.min(q[k] - (self.origin[k] + (c[k] - r) as f64 * self.cell));
                }
                if c[k] + r + 1 < self.dims[k] {
                    bound = bound.min(self.origin[k] + (c[k] + r + 1) as f64 * self.cell - q[k]);
                }
            }
            if bound == f64::INFINITY || best < bound - 1e-9 * self.cell {
                break;
            }
        }
        best
    }
}

/// Mean over `from` of the distance to the nearest point of `to`.
fn mean_nearest(from: &[Vec3], to: &[Vec3]) -> Result<f64> {
    use rayon::prelude::*;
    let grid = PointGrid::new(to)?;
    let d: Vec<f64> = from.par_iter().map(|p| grid.nearest_distance(p)).collect();
    Ok(d.iter().sum::<f64>() / from.len() as f64)
}

/// Symmetric mean Chamfer distance in the units of the inputs.
pub fn chamfer(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("chamfer distance needs two non-empty point sets".into()));
    }
    Ok(0.5 * (mean_nearest(a, b)? + mean_nearest(b, a)?))
}

/// Area-uniform surface samples with the face each one came from.
pub fn sample_surface_with_faces(mesh: &Mesh, n: usize, seed: u64) -> Result<(Vec<Vec3>, Vec<u32>)> {
    if n == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let mut cdf = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cdf.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::Empty("cannot sample a mesh with zero surface area".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut faces = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.gen::<f64>() * total;
        let f = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        let (r1, r2) = (rng.gen::<f64>().sqrt(), rng.gen::<f64>());
        let [a, b, c] = mesh.triangle(f);
        points.push(a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2));
        faces.push(f as u32);
    }
    Ok((points, faces))
}

/// `n` area-uniform points on the surface of `mesh`.
pub fn sample_surface(mesh: &Mesh, n: usize, seed: u64) -> Result<Vec<Vec3>> {
    Ok(sample_surface_with_faces(mesh, n, seed)?.0)
}
